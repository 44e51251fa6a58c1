// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sdc/contract.hpp"
#include "sdc/error.hpp"
#include "sdc/ledger.hpp"
#include "sdc/valuation.hpp"

namespace sdc {

enum class TimelineEventKind {
  OpenAccounts,
  CloseAccounts,
  MarginCheck,
  Valuation,
  Settlement,
  Maturity,
};

constexpr std::string_view to_string(TimelineEventKind k) noexcept {
  switch (k) {
    case TimelineEventKind::OpenAccounts: return "OPEN_ACCOUNTS";
    case TimelineEventKind::CloseAccounts: return "CLOSE_ACCOUNTS";
    case TimelineEventKind::MarginCheck: return "MARGIN_CHECK";
    case TimelineEventKind::Valuation: return "VALUATION";
    case TimelineEventKind::Settlement: return "SETTLEMENT";
    case TimelineEventKind::Maturity: return "MATURITY";
  }
  return "?";
}

inline std::optional<TimelineEventKind> timeline_event_from_string(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(TimelineEventKind::Maturity); ++i) {
    auto k = static_cast<TimelineEventKind>(i);
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

struct TimelineEvent {
  Tick time = 0;
  TimelineEventKind kind = TimelineEventKind::OpenAccounts;
  int cycle = 0;

  friend bool operator==(const TimelineEvent&, const TimelineEvent&) = default;
};

/// Per cycle: OPEN(o) < CLOSE(o + w) < MARGIN_CHECK(o + w + 1)
///            <= VALUATION(s) <= SETTLEMENT(s), MATURITY(s) on the last cycle,
/// where o is the cycle's opening time and s its settlement time. Events that
/// share a tick are ordered by their position in the list.
struct Timeline {
  std::vector<TimelineEvent> events;

  int cycles() const { return events.empty() ? 0 : events.back().cycle; }
};

inline Timeline build_timeline(const ContractSpec& spec) {
  Timeline tl;
  for (int c = 1; c <= spec.cycles(); ++c) {
    const Tick open = spec.cycle_open(c);
    const Tick close = open + spec.prefund_window;
    const Tick settle = spec.settlement_time(c);
    tl.events.push_back({open, TimelineEventKind::OpenAccounts, c});
    tl.events.push_back({close, TimelineEventKind::CloseAccounts, c});
    tl.events.push_back({close + 1, TimelineEventKind::MarginCheck, c});
    tl.events.push_back({settle, TimelineEventKind::Valuation, c});
    tl.events.push_back({settle, TimelineEventKind::Settlement, c});
    if (c == spec.cycles()) tl.events.push_back({settle, TimelineEventKind::Maturity, c});
  }
  return tl;
}

enum class RejectReason { NotAuthorized, NotDue, Overdue, OutOfSequence, Finished };

constexpr std::string_view to_string(RejectReason r) noexcept {
  switch (r) {
    case RejectReason::NotAuthorized: return "NotAuthorized";
    case RejectReason::NotDue: return "NotDue";
    case RejectReason::Overdue: return "Overdue";
    case RejectReason::OutOfSequence: return "OutOfSequence";
    case RejectReason::Finished: return "Finished";
  }
  return "?";
}

struct RequestResult {
  bool accepted = true;
  RejectReason reason = RejectReason::NotDue;

  static RequestResult ok() { return {}; }
  static RequestResult rejected(RejectReason r) { return {false, r}; }
};

/// One line of a driver script: `tick,event_kind,requesting_party`.
struct ScriptStep {
  Tick tick = 0;
  TimelineEventKind kind = TimelineEventKind::OpenAccounts;
  AccountId requester;
};

/// Per-cycle facts collected while the engine runs; the report is built from
/// these, never from the journal, so the two can be reconciled.
struct CycleRecord {
  int cycle = 0;
  Tick open = 0;
  Tick settle = 0;
  std::optional<double> value;  // V(t_i, M(t_i))
  std::optional<SettleOutcome> settlement;
  std::optional<CheckOutcome> check;
  Tick checked_at = 0;
};

struct EngineConfig {
  /// Valuation attempts before the contract is suspended in Error.
  int valuation_attempts = 3;
  /// Account allowed to request events besides the two parties.
  AccountId oracle;
};

/// Runs one contract against one ledger and market store. Three trigger
/// regimes share the same event executor:
///   - run_active / advance_to: the engine fires timeline events itself;
///   - request_event: a party or the oracle asks for the next due event;
///   - run_driver: a scripted sequence of requests, rejections journaled.
class Engine {
 public:
  /// Called right after each funding window opens; agents post or withdraw
  /// margin from here.
  using OpenHook = std::function<void(Engine&, int cycle, Tick now)>;

  Engine(ContractSpec spec, Ledger ledger, MarketStore market,
         std::shared_ptr<const Pricer> pricer, EngineConfig config = {})
      : contract_(std::move(spec)),
        ledger_(std::move(ledger)),
        market_(std::move(market)),
        oracle_(contract_.id(), contract_.spec().product, pricer, config.oracle),
        pricer_(std::move(pricer)),
        config_(std::move(config)),
        timeline_(build_timeline(contract_.spec())),
        clock_(contract_.spec().start) {}

  void on_accounts_open(OpenHook hook) { hook_ = std::move(hook); }

  const Timeline& timeline() const noexcept { return timeline_; }
  const Contract& contract() const noexcept { return contract_; }
  const Ledger& ledger() const noexcept { return ledger_; }
  Ledger& ledger() noexcept { return ledger_; }
  const MarketStore& market() const noexcept { return market_; }
  MarketStore& market() noexcept { return market_; }
  const Pricer& pricer() const noexcept { return *pricer_; }
  const EngineConfig& config() const noexcept { return config_; }
  Tick clock() const noexcept { return clock_; }
  const std::vector<CycleRecord>& cycles() const noexcept { return cycles_; }

  /// Set when an event could not be executed (e.g. failed preconditions);
  /// the engine stops there.
  const std::optional<std::string>& halted() const noexcept { return halted_; }

  bool finished() const {
    return halted_ || contract_.absorbing() || next_ >= timeline_.events.size();
  }

  std::optional<TimelineEvent> next_due() const {
    if (finished()) return std::nullopt;
    return timeline_.events[next_];
  }

  // Party actions, stamped with the engine clock.
  void deposit_margin(const AccountId& party, Amount amount) {
    contract_.deposit_margin(ledger_, party, amount, clock_);
  }
  void withdraw_margin(const AccountId& party, Amount amount) {
    contract_.withdraw_margin(ledger_, party, amount, clock_);
  }
  void withdraw_fee(const AccountId& party, Amount amount) {
    contract_.withdraw_fee(ledger_, party, amount, clock_);
  }

  /// Moves the clock to `now`, first firing every due event scheduled at or
  /// before it.
  void advance_to(Tick now) {
    while (auto ev = next_due()) {
      if (ev->time > now) break;
      fire(*ev);
    }
    if (now > clock_) clock_ = now;
  }

  /// Active triggering: fire every event on schedule until the contract
  /// reaches an absorbing state or the timeline is exhausted.
  void run_active() {
    while (auto ev = next_due()) fire(*ev);
  }

  /// Passive triggering. Executes the event iff the requester is a party or
  /// the oracle account, `kind` is the next due event and `now` is its time.
  RequestResult request_event(const AccountId& requester, TimelineEventKind kind, Tick now) {
    if (!contract_.spec().is_party(requester) &&
        (config_.oracle.empty() || requester != config_.oracle))
      return RequestResult::rejected(RejectReason::NotAuthorized);
    auto ev = next_due();
    if (!ev) return RequestResult::rejected(RejectReason::Finished);
    if (ev->kind != kind) return RequestResult::rejected(RejectReason::OutOfSequence);
    if (now < ev->time) return RequestResult::rejected(RejectReason::NotDue);
    if (now > ev->time) return RequestResult::rejected(RejectReason::Overdue);
    fire(*ev);
    return RequestResult::ok();
  }

  /// Replays a script of requests; rejected steps are journaled, stamped
  /// with the current engine clock.
  void run_driver(std::span<const ScriptStep> script) {
    for (const auto& step : script) {
      auto r = request_event(step.requester, step.kind, step.tick);
      if (!r.accepted) {
        ledger_.set_time(clock_);
        ledger_.record(EventKind::Rejection, step.requester.str(),
                       {{"contract", contract_.id()},
                        {"event", std::string(to_string(step.kind))},
                        {"reason", std::string(to_string(r.reason))},
                        {"tick", std::to_string(step.tick)}});
      }
    }
  }

 private:
  void fire(const TimelineEvent& ev) {
    if (ev.time > clock_) clock_ = ev.time;
    ++next_;
    const Tick now = ev.time;
    switch (ev.kind) {
      case TimelineEventKind::OpenAccounts:
        try {
          if (ev.cycle == 1)
            contract_.initialize(ledger_, now);
          else
            contract_.open_accounts(ledger_, now);
        } catch (const sdc::Error& e) {
          halted_ = e.what();
          return;
        }
        cycles_.push_back({ev.cycle, now, contract_.spec().settlement_time(ev.cycle), {}, {}, {}, 0});
        if (hook_) hook_(*this, ev.cycle, now);
        break;
      case TimelineEventKind::CloseAccounts:
        contract_.close_accounts(ledger_, now);
        break;
      case TimelineEventKind::MarginCheck:
        cycles_.back().check = contract_.margin_check(ledger_, now);
        cycles_.back().checked_at = now;
        break;
      case TimelineEventKind::Valuation:
        value(ev);
        break;
      case TimelineEventKind::Settlement:
        cycles_.back().settlement = contract_.settle(ledger_, now);
        break;
      case TimelineEventKind::Maturity:
        contract_.mature(ledger_, now);
        break;
    }
  }

  void value(const TimelineEvent& ev) {
    const auto& spec = contract_.spec();
    const Tick start = spec.cycle_open(ev.cycle);
    std::string failure;
    ledger_.set_time(ev.time);
    for (int attempt = 0; attempt < std::max(1, config_.valuation_attempts); ++attempt) {
      try {
        auto f = oracle_.get_margin(market_, ledger_, start, ev.time);
        cycles_.back().value = pricer_->price(spec.product, ev.time, market_.at(ev.time));
        contract_.record_valuation(ledger_, f, ev.time);
        return;
      } catch (const sdc::Error& e) {
        if (e.code() != Errc::MissingSnapshot) throw;
        failure = e.what();
      }
    }
    contract_.fail_valuation(ledger_, failure, ev.time);
  }

  Contract contract_;
  Ledger ledger_;
  MarketStore market_;
  MarginOracle oracle_;
  std::shared_ptr<const Pricer> pricer_;
  EngineConfig config_;
  Timeline timeline_;
  OpenHook hook_;
  std::size_t next_ = 0;
  Tick clock_ = 0;
  std::vector<CycleRecord> cycles_;
  std::optional<std::string> halted_;
};

}  // namespace sdc
