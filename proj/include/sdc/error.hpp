// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sdc {

enum class Errc {
  InvalidArgument,
  UnknownAccount,
  NotIssuer,
  InsufficientBalance,
  InsufficientAllowance,
  InsufficientSegregated,
  NegativeAmount,
  Overflow,
  CorruptJournal,
  IoError,
  NegativeTenor,
  PastMaturity,
  TimestampMismatch,
  MissingSnapshot,
  EmptySamples,
  UnknownPricer,
  InvalidSpec,
  DuplicateContract,
  PreconditionFailed,
  AccountsNotOpen,
  NotAParty,
  WrongState,
  TooEarly,
  WrongTime,
  NoValuation,
  ParseError,
  ValidationError,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::UnknownAccount: return "UnknownAccount";
    case Errc::NotIssuer: return "NotIssuer";
    case Errc::InsufficientBalance: return "InsufficientBalance";
    case Errc::InsufficientAllowance: return "InsufficientAllowance";
    case Errc::InsufficientSegregated: return "InsufficientSegregated";
    case Errc::NegativeAmount: return "NegativeAmount";
    case Errc::Overflow: return "Overflow";
    case Errc::CorruptJournal: return "CorruptJournal";
    case Errc::IoError: return "IoError";
    case Errc::NegativeTenor: return "NegativeTenor";
    case Errc::PastMaturity: return "PastMaturity";
    case Errc::TimestampMismatch: return "TimestampMismatch";
    case Errc::MissingSnapshot: return "MissingSnapshot";
    case Errc::EmptySamples: return "EmptySamples";
    case Errc::UnknownPricer: return "UnknownPricer";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::DuplicateContract: return "DuplicateContract";
    case Errc::PreconditionFailed: return "PreconditionFailed";
    case Errc::AccountsNotOpen: return "AccountsNotOpen";
    case Errc::NotAParty: return "NotAParty";
    case Errc::WrongState: return "WrongState";
    case Errc::TooEarly: return "TooEarly";
    case Errc::WrongTime: return "WrongTime";
    case Errc::NoValuation: return "NoValuation";
    case Errc::ParseError: return "ParseError";
    case Errc::ValidationError: return "ValidationError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above. The
/// message is prefixed with the code name so diagnostics stay greppable.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) +
                           (detail.empty() ? "" : ": " + detail)),
        code_(code),
        detail_(detail) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace sdc
