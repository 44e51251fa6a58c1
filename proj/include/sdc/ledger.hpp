// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>

#include "sdc/error.hpp"
#include "sdc/journal.hpp"
#include "sdc/types.hpp"

namespace sdc {

enum class Bucket { Margin, Fee };

constexpr std::string_view to_string(Bucket b) noexcept {
  return b == Bucket::Margin ? "MARGIN" : "FEE";
}

struct SegregatedKey {
  std::string contract;
  AccountId party;
  Bucket bucket = Bucket::Margin;

  friend auto operator<=>(const SegregatedKey&, const SegregatedKey&) = default;
  friend bool operator==(const SegregatedKey&, const SegregatedKey&) = default;
};

/// Stable-coin books: free balances, allowances and per-contract segregated
/// buckets, plus the hash-chained journal every mutation is written to.
///
/// Every operation validates completely before mutating anything, so a call
/// that throws leaves balances, allowances and the journal untouched.
///
/// Invariant after every call:
///   sum(free) + sum(segregated) == total_supply() == minted - burned
class Ledger {
 public:
  /// Invoked by approve_and_call after the approval is booked.
  using ApprovalHook =
      std::function<void(const AccountId& owner, Amount amount, std::string_view data)>;

  explicit Ledger(std::string_view issuer_label = "central-bank")
      : issuer_(open_account(issuer_label)) {}

  const AccountId& issuer() const noexcept { return issuer_; }

  /// Timestamp stamped on every event recorded from now on.
  void set_time(Tick t) noexcept { now_ = t; }
  Tick time() const noexcept { return now_; }

  AccountId open_account(std::string_view label) {
    if (label.empty()) throw Error(Errc::InvalidArgument, "account label must be non-empty");
    AccountId id(std::string(label) + "#" + std::to_string(next_account_++));
    free_.emplace(id, Amount{});
    labels_.emplace(id, std::string(label));
    return id;
  }

  bool has_account(const AccountId& id) const { return free_.contains(id); }

  const std::string& label_of(const AccountId& id) const {
    require(id);
    return labels_.at(id);
  }

  void mint(const AccountId& caller, const AccountId& to, Amount amount) {
    require_issuer(caller);
    require(to);
    if (amount.is_zero()) return;
    free_[to] += amount;
    supply_ += amount;
    emit(EventKind::Mint, caller.str(), {{"amount", num(amount)}, {"to", to.str()}});
  }

  void burn(const AccountId& caller, const AccountId& from, Amount amount) {
    require_issuer(caller);
    require(from);
    if (amount.is_zero()) return;
    require_funds(from, amount);
    free_[from] -= amount;
    supply_ -= amount;
    emit(EventKind::Burn, caller.str(), {{"amount", num(amount)}, {"from", from.str()}});
  }

  void transfer(const AccountId& from, const AccountId& to, Amount amount,
                std::string_view memo = {}) {
    require(from);
    require(to);
    require_funds(from, amount);
    move_free(from, to, amount);
    emit(EventKind::Transfer, from.str(),
         with_memo({{"amount", num(amount)}, {"from", from.str()}, {"to", to.str()}}, memo));
  }

  /// Overwrites any previous allowance for (owner, spender).
  void approve(const AccountId& owner, const AccountId& spender, Amount amount) {
    require(owner);
    require(spender);
    allowances_[{owner, spender}] = amount;
    emit(EventKind::Approval, owner.str(),
         {{"amount", num(amount)}, {"owner", owner.str()}, {"spender", spender.str()}});
  }

  /// approve followed by a notification to the spender. The hook is an
  /// in-process callback; the ledger does not execute foreign code.
  void approve_and_call(const AccountId& owner, const AccountId& spender, Amount amount,
                        std::string_view data, const ApprovalHook& hook) {
    approve(owner, spender, amount);
    emit(EventKind::Notification, owner.str(),
         {{"data", std::string(data)}, {"spender", spender.str()}});
    if (hook) hook(owner, amount, data);
  }

  void transfer_from(const AccountId& spender, const AccountId& from, const AccountId& to,
                     Amount amount) {
    require(spender);
    require(from);
    require(to);
    auto it = allowances_.find({from, spender});
    Amount allowed = it == allowances_.end() ? Amount{} : it->second;
    if (allowed < amount)
      throw Error(Errc::InsufficientAllowance,
                  spender.str() + " may move " + num(allowed) + " of " + from.str());
    require_funds(from, amount);
    move_free(from, to, amount);
    allowances_[{from, spender}] = allowed - amount;
    emit(EventKind::Transfer, spender.str(),
         {{"amount", num(amount)}, {"from", from.str()}, {"spender", spender.str()},
          {"to", to.str()}});
  }

  void lock_segregated(const std::string& contract, const AccountId& party, Bucket bucket,
                       Amount amount, std::string_view memo = {}) {
    require(party);
    require_funds(party, amount);
    free_[party] -= amount;
    segregated_[{contract, party, bucket}] += amount;
    emit(EventKind::Lock, party.str(),
         with_memo({{"amount", num(amount)},
                    {"bucket", std::string(to_string(bucket))},
                    {"contract", contract},
                    {"party", party.str()}},
                   memo));
  }

  /// Moves `amount` out of (contract, party, bucket) into the free balance of
  /// `to`, which may be the party itself or its counterparty.
  void release_segregated(const std::string& contract, const AccountId& party, Bucket bucket,
                          Amount amount, const AccountId& to, std::string_view memo = {}) {
    require(party);
    require(to);
    Amount held = segregated(contract, party, bucket);
    if (held < amount)
      throw Error(Errc::InsufficientSegregated,
                  contract + "/" + party.str() + "/" + std::string(to_string(bucket)) +
                      " holds " + num(held) + ", requested " + num(amount));
    segregated_[{contract, party, bucket}] -= amount;
    free_[to] += amount;
    emit(EventKind::Release, contract,
         with_memo({{"amount", num(amount)},
                    {"bucket", std::string(to_string(bucket))},
                    {"contract", contract},
                    {"party", party.str()},
                    {"to", to.str()}},
                   memo));
  }

  Amount balance_of(const AccountId& id) const {
    require(id);
    return free_.at(id);
  }

  Amount allowance(const AccountId& owner, const AccountId& spender) const {
    auto it = allowances_.find({owner, spender});
    return it == allowances_.end() ? Amount{} : it->second;
  }

  Amount segregated(const std::string& contract, const AccountId& party, Bucket bucket) const {
    auto it = segregated_.find({contract, party, bucket});
    return it == segregated_.end() ? Amount{} : it->second;
  }

  /// Free balance plus every segregated bucket the account owns.
  Amount wealth_of(const AccountId& id) const {
    Amount w = balance_of(id);
    for (const auto& [key, amt] : segregated_)
      if (key.party == id) w += amt;
    return w;
  }

  Amount total_supply() const noexcept { return supply_; }

  /// Sum of all free and segregated balances; equals total_supply().
  Amount total_held() const {
    Amount s;
    for (const auto& [id, amt] : free_) s += amt;
    for (const auto& [key, amt] : segregated_) s += amt;
    return s;
  }

  /// Returns false if the id was already registered.
  bool register_contract(const std::string& contract) {
    return contracts_.insert(contract).second;
  }
  bool has_contract(const std::string& contract) const { return contracts_.contains(contract); }

  /// Appends a non-ledger fact (state transition, valuation...) stamped with
  /// the current ledger time.
  void record(EventKind kind, std::string actor, std::map<std::string, std::string> details) {
    emit(kind, std::move(actor), std::move(details));
  }

  const Journal& journal() const noexcept { return journal_; }

  /// CSV with columns account_id,bucket,balance_minor_units. Free balances
  /// come first in account order, then segregated buckets in key order.
  std::string export_csv() const {
    std::ostringstream os;
    os << "account_id,bucket,balance_minor_units\n";
    for (const auto& [id, amt] : free_) os << id << ",FREE," << amt << "\n";
    for (const auto& [key, amt] : segregated_)
      os << key.party << "," << to_string(key.bucket) << ":" << key.contract << "," << amt
         << "\n";
    return os.str();
  }

 private:
  static std::string num(Amount a) { return std::to_string(a.minor()); }

  static std::map<std::string, std::string> with_memo(std::map<std::string, std::string> d,
                                                      std::string_view memo) {
    if (!memo.empty()) d.emplace("memo", std::string(memo));
    return d;
  }

  void require(const AccountId& id) const {
    if (!free_.contains(id)) throw Error(Errc::UnknownAccount, id.str());
  }

  void require_issuer(const AccountId& caller) const {
    if (caller != issuer_) throw Error(Errc::NotIssuer, caller.str());
  }

  void require_funds(const AccountId& id, Amount amount) const {
    Amount have = free_.at(id);
    if (have < amount)
      throw Error(Errc::InsufficientBalance,
                  id.str() + " has " + num(have) + ", needs " + num(amount));
  }

  void move_free(const AccountId& from, const AccountId& to, Amount amount) {
    free_[from] -= amount;
    free_[to] += amount;
  }

  void emit(EventKind kind, std::string actor, std::map<std::string, std::string> details) {
    journal_.append(EventRecord{now_, kind, std::move(actor), std::move(details)});
  }

  std::uint64_t next_account_ = 0;
  std::map<AccountId, Amount> free_;
  std::map<AccountId, std::string> labels_;
  std::map<std::pair<AccountId, AccountId>, Amount> allowances_;
  std::map<SegregatedKey, Amount> segregated_;
  std::set<std::string> contracts_;
  Amount supply_;
  Tick now_ = 0;
  Journal journal_;
  AccountId issuer_;
};

}  // namespace sdc
