// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "sdc/error.hpp"
#include "sdc/ledger.hpp"
#include "sdc/types.hpp"
#include "sdc/valuation.hpp"

namespace sdc {

enum class TerminationCause { InsufficientPrefund, SettlementFailed, Matured };

constexpr std::string_view to_string(TerminationCause c) noexcept {
  switch (c) {
    case TerminationCause::InsufficientPrefund: return "INSUFFICIENT_PREFUND";
    case TerminationCause::SettlementFailed: return "SETTLEMENT_FAILED";
    case TerminationCause::Matured: return "MATURED";
  }
  return "?";
}

namespace state {
struct PreCheck {
  friend bool operator==(const PreCheck&, const PreCheck&) = default;
};
struct AccountsOpen {
  Tick until = 0;
  friend bool operator==(const AccountsOpen&, const AccountsOpen&) = default;
};
struct MarginCheck {
  friend bool operator==(const MarginCheck&, const MarginCheck&) = default;
};
struct AwaitValuation {
  Tick settle_at = 0;
  friend bool operator==(const AwaitValuation&, const AwaitValuation&) = default;
};
struct MarginCalculation {
  friend bool operator==(const MarginCalculation&, const MarginCalculation&) = default;
};
struct Settled {
  int cycle = 0;
  friend bool operator==(const Settled&, const Settled&) = default;
};
struct Terminated {
  TerminationCause cause = TerminationCause::Matured;
  Tick at = 0;
  friend bool operator==(const Terminated&, const Terminated&) = default;
};
/// Oracle failure that outlived its retries. The contract is suspended, not
/// terminated; buckets stay where they are.
struct Error {
  std::string detail;
  friend bool operator==(const Error&, const Error&) = default;
};
}  // namespace state

using ContractState =
    std::variant<state::PreCheck, state::AccountsOpen, state::MarginCheck, state::AwaitValuation,
                 state::MarginCalculation, state::Settled, state::Terminated, state::Error>;

inline std::string to_string(const ContractState& s) {
  struct V {
    std::string operator()(const state::PreCheck&) const { return "PreCheck"; }
    std::string operator()(const state::AccountsOpen& o) const {
      return "AccountsOpen{until=" + std::to_string(o.until) + "}";
    }
    std::string operator()(const state::MarginCheck&) const { return "MarginCheck"; }
    std::string operator()(const state::AwaitValuation& a) const {
      return "AwaitValuation{settleAt=" + std::to_string(a.settle_at) + "}";
    }
    std::string operator()(const state::MarginCalculation&) const { return "MarginCalculation"; }
    std::string operator()(const state::Settled& s) const {
      return "Settled{cycle=" + std::to_string(s.cycle) + "}";
    }
    std::string operator()(const state::Terminated& t) const {
      return "Terminated{cause=" + std::string(to_string(t.cause)) +
             ",at=" + std::to_string(t.at) + "}";
    }
    std::string operator()(const state::Error& e) const { return "Error{detail=" + e.detail + "}"; }
  };
  return std::visit(V{}, s);
}

inline bool is_absorbing(const ContractState& s) {
  return std::holds_alternative<state::Terminated>(s) || std::holds_alternative<state::Error>(s);
}

/// Deterministic contract terms. Party A receives value: a positive
/// settlement amount is paid by B to A.
///
/// Cycle i (1-based) opens at start (i = 1) or at settlement time i-1, and
/// settles at settlement_times[i-1]; the last settlement time is maturity.
struct ContractSpec {
  std::string contract_id;
  AccountId party_a;
  AccountId party_b;
  ProductSpec product;
  Tick start = 0;
  std::vector<Tick> settlement_times;
  Amount margin_buffer_a;
  Amount margin_buffer_b;
  Amount termination_fee_a;
  Amount termination_fee_b;
  Tick prefund_window = 1;
  std::string pricer_version{FlatCurvePricer::kVersion};

  int cycles() const noexcept { return static_cast<int>(settlement_times.size()); }
  Tick maturity() const { return settlement_times.back(); }

  Tick cycle_open(int cycle) const {
    return cycle <= 1 ? start : settlement_times.at(static_cast<std::size_t>(cycle - 2));
  }
  Tick settlement_time(int cycle) const {
    return settlement_times.at(static_cast<std::size_t>(cycle - 1));
  }

  bool is_party(const AccountId& id) const { return id == party_a || id == party_b; }

  const AccountId& counterparty(const AccountId& id) const {
    return id == party_a ? party_b : party_a;
  }
  Amount margin_buffer(const AccountId& id) const {
    return id == party_a ? margin_buffer_a : margin_buffer_b;
  }
  Amount termination_fee(const AccountId& id) const {
    return id == party_a ? termination_fee_a : termination_fee_b;
  }

  void validate() const {
    auto fail = [](const std::string& what) { throw sdc::Error(Errc::InvalidSpec, what); };
    if (contract_id.empty()) fail("contract id must be non-empty");
    if (party_a.empty() || party_b.empty() || party_a == party_b)
      fail("contract needs two distinct parties");
    if (settlement_times.empty()) fail("at least one settlement time required");
    if (start < 0) fail("start must be non-negative");
    Tick prev = start;
    for (Tick t : settlement_times) {
      if (t <= prev) fail("settlement grid must strictly increase from start");
      if (prefund_window >= t - prev) fail("prefund window must be shorter than every period");
      prev = t;
    }
    if (prefund_window < 1) fail("prefund window must be at least one tick");
    if (margin_buffer_a.is_zero() || margin_buffer_b.is_zero())
      fail("margin buffers must be positive");
    if (termination_fee_a.is_zero() || termination_fee_b.is_zero())
      fail("termination fees must be positive");
    product.validate(start);
    if (product.maturity() != maturity()) fail("product maturity must equal last settlement time");
  }
};

struct FeeTransfer {
  AccountId from;
  AccountId to;
  Amount amount;
};

struct CheckOutcome {
  bool passed = true;
  std::vector<AccountId> deficient;
  std::vector<FeeTransfer> fee_transfers;
};

struct SettleOutcome {
  double value = 0.0;          // F as valued
  Amount due;                  // |F| in minor units
  std::optional<AccountId> payer;
  std::optional<AccountId> receiver;
  Amount transferred;          // margin actually moved to the receiver
  bool partial = false;
  std::optional<FeeTransfer> fee;
};

/// One smart derivative contract driven through its lifecycle:
///
///   PreCheck --initialize--> AccountsOpen --close_accounts--> MarginCheck
///   MarginCheck --margin_check--> AwaitValuation | Terminated{INSUFFICIENT_PREFUND}
///   AwaitValuation --record_valuation--> MarginCalculation
///   AwaitValuation --fail_valuation--> Error
///   MarginCalculation --settle--> Settled | Terminated{SETTLEMENT_FAILED}
///   Settled{i < n} --open_accounts--> AccountsOpen
///   Settled{n} --mature--> Terminated{MATURED}
///
/// Every other (state, operation) pair throws without side effects.
/// Operations take the ledger explicitly, so a (Contract, Ledger) pair is a
/// plain value that can be copied to branch a scenario.
class Contract {
 public:
  explicit Contract(ContractSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

  const ContractSpec& spec() const noexcept { return spec_; }
  const ContractState& state() const noexcept { return state_; }
  const std::string& id() const noexcept { return spec_.contract_id; }
  int cycle() const noexcept { return cycle_; }
  const std::optional<SettlementAmount>& valuation() const noexcept { return valuation_; }
  bool absorbing() const { return is_absorbing(state_); }

  Amount margin(const Ledger& l, const AccountId& p) const {
    return l.segregated(id(), p, Bucket::Margin);
  }
  Amount fee(const Ledger& l, const AccountId& p) const {
    return l.segregated(id(), p, Bucket::Fee);
  }

  /// depositP: posting the termination fee is only legal before the contract
  /// starts.
  void deposit_fee(Ledger& ledger, const AccountId& party, Amount amount, Tick now) {
    require_party(party);
    if (!is<state::PreCheck>()) throw wrong_state("deposit_fee");
    ledger.set_time(now);
    ledger.lock_segregated(id(), party, Bucket::Fee, amount, "deposit_fee");
  }

  /// debitP: a fee can be drawn back only after regular termination.
  void withdraw_fee(Ledger& ledger, const AccountId& party, Amount amount, Tick now) {
    require_party(party);
    const auto* t = std::get_if<state::Terminated>(&state_);
    if (!t || t->cause != TerminationCause::Matured) throw wrong_state("withdraw_fee");
    ledger.set_time(now);
    ledger.release_segregated(id(), party, Bucket::Fee, amount, party, "withdraw_fee");
  }

  /// Checks both parties can cover fee plus first buffer, locks the fees and
  /// opens the first funding window. On PreconditionFailed the ledger is
  /// untouched and the contract stays in PreCheck.
  void initialize(Ledger& ledger, Tick now) {
    if (!is<state::PreCheck>()) throw wrong_state("initialize");
    if (ledger.has_contract(id())) throw sdc::Error(Errc::DuplicateContract, id());
    if (now != spec_.start)
      throw sdc::Error(Errc::WrongTime, "initialize at " + std::to_string(now) +
                                            ", contract starts at " + std::to_string(spec_.start));
    std::string deficient;
    for (const auto* p : {&spec_.party_a, &spec_.party_b}) {
      if (!ledger.has_account(*p)) throw sdc::Error(Errc::UnknownAccount, p->str());
      if (ledger.balance_of(*p) < fee_top_up(ledger, *p) + spec_.margin_buffer(*p))
        deficient += (deficient.empty() ? "" : ",") + p->str();
    }
    if (!deficient.empty()) throw sdc::Error(Errc::PreconditionFailed, deficient);
    for (const auto* p : {&spec_.party_a, &spec_.party_b}) {
      Amount top_up = fee_top_up(ledger, *p);
      if (!top_up.is_zero()) deposit_fee(ledger, *p, top_up, now);
    }
    ledger.register_contract(id());
    cycle_ = 1;
    transition(ledger, now, state::AccountsOpen{now + spec_.prefund_window}, "initialize");
  }

  /// depositM: only inside the funding window right after a settlement.
  void deposit_margin(Ledger& ledger, const AccountId& party, Amount amount, Tick now) {
    require_party(party);
    require_open(now, "deposit_margin");
    ledger.set_time(now);
    ledger.lock_segregated(id(), party, Bucket::Margin, amount, "deposit_margin");
  }

  void withdraw_margin(Ledger& ledger, const AccountId& party, Amount amount, Tick now) {
    require_party(party);
    require_open(now, "withdraw_margin");
    ledger.set_time(now);
    ledger.release_segregated(id(), party, Bucket::Margin, amount, party, "withdraw_margin");
  }

  void close_accounts(Ledger& ledger, Tick now) {
    const auto* open = std::get_if<state::AccountsOpen>(&state_);
    if (!open) throw wrong_state("close_accounts");
    if (now < open->until)
      throw sdc::Error(Errc::TooEarly, "window open until " + std::to_string(open->until));
    transition(ledger, now, state::MarginCheck{}, "close_accounts");
  }

  /// Both buckets must hold at least the agreed buffer. A deficient party
  /// forfeits its fee to the other; if both are deficient the fees cross.
  CheckOutcome margin_check(Ledger& ledger, Tick now) {
    if (!is<state::MarginCheck>()) throw wrong_state("margin_check");
    CheckOutcome out;
    for (const auto* p : {&spec_.party_a, &spec_.party_b})
      if (margin(ledger, *p) < spec_.margin_buffer(*p)) out.deficient.push_back(*p);
    if (out.deficient.empty()) {
      transition(ledger, now, state::AwaitValuation{spec_.settlement_time(cycle_)},
                 "margin_check");
      return out;
    }
    out.passed = false;
    ledger.set_time(now);
    for (const auto& d : out.deficient) {
      const auto& survivor = spec_.counterparty(d);
      Amount forfeited = fee(ledger, d);
      ledger.release_segregated(id(), d, Bucket::Fee, forfeited, survivor, "fee_forfeit");
      out.fee_transfers.push_back({d, survivor, forfeited});
    }
    return_all(ledger);
    terminate(ledger, now, TerminationCause::InsufficientPrefund, "margin_check");
    return out;
  }

  void record_valuation(Ledger& ledger, const SettlementAmount& f, Tick now) {
    const auto* await = std::get_if<state::AwaitValuation>(&state_);
    if (!await) throw wrong_state("record_valuation");
    if (f.as_of != await->settle_at)
      throw sdc::Error(Errc::TimestampMismatch, "valuation as of " + std::to_string(f.as_of) +
                                                    " for settlement at " +
                                                    std::to_string(await->settle_at));
    if (!std::isfinite(f.value)) throw sdc::Error(Errc::InvalidArgument, "non-finite valuation");
    settle_at_ = await->settle_at;
    valuation_ = f;
    transition(ledger, now, state::MarginCalculation{}, "record_valuation");
  }

  void fail_valuation(Ledger& ledger, const std::string& detail, Tick now) {
    if (!is<state::AwaitValuation>()) throw wrong_state("fail_valuation");
    transition(ledger, now, state::Error{detail}, "fail_valuation");
  }

  /// Books the recorded valuation. The payer's margin bucket covers |F| in
  /// full or the contract terminates with a partial settlement of the whole
  /// bucket plus the payer's fee.
  SettleOutcome settle(Ledger& ledger, Tick now) {
    if (is<state::AwaitValuation>()) throw sdc::Error(Errc::NoValuation, id());
    if (!is<state::MarginCalculation>()) throw wrong_state("settle");
    if (now != settle_at_)
      throw sdc::Error(Errc::WrongTime, "settlement due at " + std::to_string(settle_at_));

    SettleOutcome out;
    out.value = valuation_->value;
    const std::int64_t rounded = round_to_minor(out.value);
    out.due = Amount(rounded < 0 ? -rounded : rounded);
    ledger.set_time(now);

    if (out.due.is_zero()) {
      record_settlement(ledger, out);
      transition(ledger, now, state::Settled{cycle_}, "settle");
      return out;
    }
    const AccountId& payer = rounded > 0 ? spec_.party_b : spec_.party_a;
    const AccountId& receiver = spec_.counterparty(payer);
    out.payer = payer;
    out.receiver = receiver;
    Amount available = margin(ledger, payer);
    if (available >= out.due) {
      ledger.release_segregated(id(), payer, Bucket::Margin, out.due, receiver, "settlement");
      out.transferred = out.due;
      record_settlement(ledger, out);
      transition(ledger, now, state::Settled{cycle_}, "settle");
      return out;
    }
    out.partial = true;
    out.transferred = available;
    if (!available.is_zero())
      ledger.release_segregated(id(), payer, Bucket::Margin, available, receiver, "settlement");
    Amount forfeited = fee(ledger, payer);
    ledger.release_segregated(id(), payer, Bucket::Fee, forfeited, receiver, "fee_forfeit");
    out.fee = FeeTransfer{payer, receiver, forfeited};
    record_settlement(ledger, out);
    return_all(ledger);
    terminate(ledger, now, TerminationCause::SettlementFailed, "settle");
    return out;
  }

  /// Starts the next cycle's funding window.
  void open_accounts(Ledger& ledger, Tick now) {
    const auto* s = std::get_if<state::Settled>(&state_);
    if (!s || s->cycle >= spec_.cycles()) throw wrong_state("open_accounts");
    if (now != spec_.cycle_open(s->cycle + 1))
      throw sdc::Error(Errc::WrongTime, "next window opens at " +
                                            std::to_string(spec_.cycle_open(s->cycle + 1)));
    cycle_ = s->cycle + 1;
    transition(ledger, now, state::AccountsOpen{now + spec_.prefund_window}, "open_accounts");
  }

  /// Regular termination after the final settlement: buffers and fees go
  /// back to their owners.
  void mature(Ledger& ledger, Tick now) {
    const auto* s = std::get_if<state::Settled>(&state_);
    if (!s || s->cycle != spec_.cycles()) throw wrong_state("mature");
    if (now != spec_.maturity())
      throw sdc::Error(Errc::WrongTime, "maturity is " + std::to_string(spec_.maturity()));
    ledger.set_time(now);
    return_all(ledger);
    terminate(ledger, now, TerminationCause::Matured, "mature");
  }

 private:
  template <class S>
  bool is() const noexcept {
    return std::holds_alternative<S>(state_);
  }

  sdc::Error wrong_state(std::string_view op) const {
    return sdc::Error(Errc::WrongState, std::string(op) + " in " + to_string(state_));
  }

  void require_party(const AccountId& who) const {
    if (!spec_.is_party(who)) throw sdc::Error(Errc::NotAParty, who.str());
  }

  void require_open(Tick now, std::string_view op) const {
    const auto* open = std::get_if<state::AccountsOpen>(&state_);
    if (!open || now < spec_.cycle_open(cycle_) || now >= open->until)
      throw sdc::Error(Errc::AccountsNotOpen, std::string(op) + " in " + to_string(state_) +
                                                  " at t=" + std::to_string(now));
  }

  Amount fee_top_up(const Ledger& ledger, const AccountId& p) const {
    Amount have = fee(ledger, p);
    Amount want = spec_.termination_fee(p);
    return have >= want ? Amount{} : want - have;
  }

  void return_all(Ledger& ledger) {
    for (const auto* p : {&spec_.party_a, &spec_.party_b}) {
      if (Amount m = margin(ledger, *p); !m.is_zero())
        ledger.release_segregated(id(), *p, Bucket::Margin, m, *p, "margin_return");
      if (Amount f = fee(ledger, *p); !f.is_zero())
        ledger.release_segregated(id(), *p, Bucket::Fee, f, *p, "fee_return");
    }
  }

  void record_settlement(Ledger& ledger, const SettleOutcome& out) {
    ledger.record(EventKind::Settlement, id(),
                  {{"contract", id()},
                   {"cycle", std::to_string(cycle_)},
                   {"due", std::to_string(out.due.minor())},
                   {"partial", out.partial ? "true" : "false"},
                   {"payer", out.payer ? out.payer->str() : ""},
                   {"transferred", std::to_string(out.transferred.minor())},
                   {"value", format_decimal(out.value)}});
  }

  void terminate(Ledger& ledger, Tick now, TerminationCause cause, std::string_view by) {
    ledger.set_time(now);
    ledger.record(EventKind::Termination, id(),
                  {{"cause", std::string(to_string(cause))},
                   {"contract", id()},
                   {"cycle", std::to_string(cycle_)}});
    transition(ledger, now, state::Terminated{cause, now}, by);
  }

  void transition(Ledger& ledger, Tick now, ContractState next, std::string_view cause) {
    ledger.set_time(now);
    ledger.record(EventKind::StateTransition, id(),
                  {{"cause", std::string(cause)},
                   {"contract", id()},
                   {"from", to_string(state_)},
                   {"to", to_string(next)}});
    state_ = std::move(next);
  }

  ContractSpec spec_;
  ContractState state_ = state::PreCheck{};
  int cycle_ = 0;
  Tick settle_at_ = 0;
  std::optional<SettlementAmount> valuation_;
};

/// Validates the spec, checks preconditions and opens the first window.
inline Contract initialize(ContractSpec spec, Ledger& ledger) {
  Contract c(std::move(spec));
  c.initialize(ledger, c.spec().start);
  return c;
}

}  // namespace sdc
