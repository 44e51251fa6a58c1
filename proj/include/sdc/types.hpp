// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <utility>

#include "sdc/error.hpp"

namespace sdc {

/// Simulated clock. One tick is one scheduling slot on the contract grid.
using Tick = std::int64_t;

/// Non-negative cash amount in minor currency units. Construction from a
/// negative value and subtraction below zero both throw; nothing is clamped.
class Amount {
 public:
  constexpr Amount() = default;
  constexpr explicit Amount(std::int64_t minor) : minor_(minor) {
    if (minor < 0) throw Error(Errc::NegativeAmount, std::to_string(minor));
  }

  constexpr std::int64_t minor() const noexcept { return minor_; }
  constexpr bool is_zero() const noexcept { return minor_ == 0; }

  friend constexpr Amount operator+(Amount a, Amount b) {
    if (a.minor_ > std::numeric_limits<std::int64_t>::max() - b.minor_)
      throw Error(Errc::Overflow, "amount addition");
    return Amount(a.minor_ + b.minor_);
  }
  friend constexpr Amount operator-(Amount a, Amount b) {
    if (b.minor_ > a.minor_)
      throw Error(Errc::NegativeAmount,
                  std::to_string(a.minor_) + " - " + std::to_string(b.minor_));
    return Amount(a.minor_ - b.minor_);
  }
  constexpr Amount& operator+=(Amount o) { return *this = *this + o; }
  constexpr Amount& operator-=(Amount o) { return *this = *this - o; }

  friend constexpr auto operator<=>(Amount, Amount) = default;

  friend std::ostream& operator<<(std::ostream& os, Amount a) {
    return os << a.minor_;
  }

 private:
  std::int64_t minor_ = 0;
};

/// Opaque account handle handed out by a Ledger.
class AccountId {
 public:
  AccountId() = default;
  explicit AccountId(std::string id) : id_(std::move(id)) {}

  const std::string& str() const noexcept { return id_; }
  bool empty() const noexcept { return id_.empty(); }

  friend auto operator<=>(const AccountId&, const AccountId&) = default;
  friend bool operator==(const AccountId&, const AccountId&) = default;

  friend std::ostream& operator<<(std::ostream& os, const AccountId& a) {
    return os << a.id_;
  }

 private:
  std::string id_;
};

}  // namespace sdc

template <>
struct std::hash<sdc::AccountId> {
  std::size_t operator()(const sdc::AccountId& a) const noexcept {
    return std::hash<std::string>{}(a.str());
  }
};
