// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "sdc/contract.hpp"
#include "sdc/invariants.hpp"
#include "sdc/journal.hpp"
#include "sdc/ledger.hpp"
#include "sdc/market_path.hpp"
#include "sdc/scenario.hpp"
#include "sdc/scheduler.hpp"
#include "sdc/valuation.hpp"

namespace sdc {

struct TransferRow {
  int cycle = 0;
  Tick tick = 0;
  AccountId from;
  AccountId to;
  Amount amount;
  std::string purpose;  // settlement | fee_forfeit

  friend auto operator<=>(const TransferRow&, const TransferRow&) = default;
  friend bool operator==(const TransferRow&, const TransferRow&) = default;
};

struct CycleRow {
  int cycle = 0;
  Tick open = 0;
  Tick settle = 0;
  std::optional<double> value;
  std::optional<double> settlement_amount;
  Amount settled;
  std::string payer;
  Amount fee_forfeit;
  std::string outcome;
};

struct PartyBalance {
  std::string label;
  AccountId id;
  std::string policy;
  Amount initial;
  Amount free;
  Amount margin;
  Amount fee;
  Amount wealth;
};

struct InvariantSummary {
  bool conservation = false;
  bool journal_verifies = false;
  bool timestamps_monotonic = false;
  bool windows_respected = false;
  bool settlement_bounded = false;
  bool reconciled = false;

  bool all() const {
    return conservation && journal_verifies && timestamps_monotonic && windows_respected &&
           settlement_bounded && reconciled;
  }
};

struct RunReport {
  std::string contract_id;
  std::string mode;
  std::uint64_t seed = 0;
  std::string final_state;
  std::optional<TerminationCause> cause;
  std::optional<Tick> terminated_at;
  std::optional<std::string> error;
  std::vector<CycleRow> cycles;
  std::vector<TransferRow> transfers;
  std::vector<PartyBalance> parties;
  std::string journal_hash;
  std::size_t journal_blocks = 0;
  InvariantSummary invariants;

  Journal journal;
  std::string ledger_csv;

  bool matured() const { return cause == TerminationCause::Matured; }
};

/// Ledger with the two parties and the oracle account opened and funded.
struct World {
  Ledger ledger;
  AccountId party_a;
  AccountId party_b;
  AccountId oracle;
};

inline World build_world(const Scenario& sc) {
  World w;
  w.party_a = w.ledger.open_account(sc.party_a.label);
  w.party_b = w.ledger.open_account(sc.party_b.label);
  w.oracle = w.ledger.open_account("valuation-oracle");
  w.ledger.set_time(sc.start);
  w.ledger.mint(w.ledger.issuer(), w.party_a, sc.party_a.funding);
  w.ledger.mint(w.ledger.issuer(), w.party_b, sc.party_b.funding);
  return w;
}

inline MarketStore build_market(const Scenario& sc) {
  if (sc.path_file) return load_market_csv(*sc.path_file);
  MarketStore store;
  const Tick maturity = sc.settlement_times.back();
  for (const auto& s : generate_path(sc.market, sc.seed, maturity - sc.start, sc.start))
    store.put(s);
  return store;
}

namespace agents {

/// Loss the party expects over the coming period from its own view: the
/// current snapshot rolled forward by the model drift, rate unchanged.
inline double projected_loss(const Engine& engine, const AccountId& party, int cycle, Tick now,
                             const MarketModel& model) {
  const auto* snap = engine.market().find(now);
  if (!snap) return 0.0;
  const auto& spec = engine.contract().spec();
  const Tick settle = spec.settlement_time(cycle);
  const double horizon = static_cast<double>(settle - now) * spec.product.years_per_tick;
  MarketSnapshot base = *snap;
  base.as_of = settle;
  MarketSnapshot moved = base;
  moved.spot = base.spot * std::exp(model.drift * horizon);
  const double f = engine.pricer().price(spec.product, settle, moved) -
                   engine.pricer().price(spec.product, settle, base);
  // F > 0 is paid by B.
  return party == spec.party_a ? std::max(0.0, -f) : std::max(0.0, f);
}

inline void top_up(Engine& engine, const AccountId& party) {
  const auto& c = engine.contract();
  const Amount have = c.margin(engine.ledger(), party);
  const Amount want = c.spec().margin_buffer(party);
  if (have >= want) return;
  const Amount deposit = std::min(want - have, engine.ledger().balance_of(party));
  if (!deposit.is_zero()) engine.deposit_margin(party, deposit);
}

inline void empty_wallet(Engine& engine, const AccountId& party) {
  const Amount have = engine.contract().margin(engine.ledger(), party);
  if (!have.is_zero()) engine.withdraw_margin(party, have);
}

/// One agent's move inside an open funding window.
inline void act(Engine& engine, const AccountId& party, const AgentPolicy& policy, int cycle,
                Tick now, const MarketModel& model) {
  if (const auto* d = std::get_if<policy::Defaulting>(&policy)) {
    if (cycle < d->at_cycle)
      top_up(engine, party);
    else if (cycle == d->at_cycle)
      empty_wallet(engine, party);
    return;
  }
  if (const auto* w = std::get_if<policy::Willful>(&policy)) {
    if (projected_loss(engine, party, cycle, now, model) > static_cast<double>(w->threshold.minor())) {
      empty_wallet(engine, party);
      return;
    }
  }
  top_up(engine, party);
}

}  // namespace agents

/// Who asks for a timeline event in passive and derived driver runs: the
/// oracle asks for valuations, party A drives odd cycles and B even ones.
inline AccountId default_requester(const TimelineEvent& ev, const World& w) {
  if (ev.kind == TimelineEventKind::Valuation) return w.oracle;
  return ev.cycle % 2 == 1 ? w.party_a : w.party_b;
}

inline std::vector<ScriptStep> derive_script(const Timeline& tl, const World& w) {
  std::vector<ScriptStep> script;
  for (const auto& ev : tl.events) script.push_back({ev.time, ev.kind, default_requester(ev, w)});
  return script;
}

inline Engine make_engine(const Scenario& sc, World& world) {
  auto pricer = PricerRegistry::with_defaults().get(sc.pricer_version);
  EngineConfig cfg{sc.valuation_attempts, world.oracle};
  Engine engine(sc.contract_spec(world.party_a, world.party_b), world.ledger, build_market(sc),
                std::move(pricer), cfg);
  const auto a = world.party_a;
  const auto b = world.party_b;
  engine.on_accounts_open([a, b, pa = sc.party_a.policy, pb = sc.party_b.policy,
                           model = sc.market](Engine& e, int cycle, Tick now) {
    agents::act(e, a, pa, cycle, now, model);
    agents::act(e, b, pb, cycle, now, model);
  });
  return engine;
}

namespace detail {

inline std::vector<TransferRow> journal_transfers(const std::vector<EventRecord>& records) {
  std::vector<TransferRow> out;
  for (const auto& r : records) {
    if (r.kind != EventKind::Release) continue;
    auto memo = r.get("memo");
    if (memo != "settlement" && memo != "fee_forfeit") continue;
    out.push_back({0, r.timestamp, AccountId(r.at("party")), AccountId(r.at("to")),
                   Amount(std::stoll(r.at("amount"))), memo});
  }
  return out;
}

inline bool reconcile(std::vector<TransferRow> report, std::vector<TransferRow> journal) {
  for (auto& t : report) t.cycle = 0;
  std::sort(report.begin(), report.end());
  std::sort(journal.begin(), journal.end());
  return report == journal;
}

}  // namespace detail

/// Builds the report from the engine's own cycle records and ledger; the
/// journal is used only to cross-check them.
inline RunReport make_report(const Scenario& sc, const World& world, const Engine& engine) {
  RunReport rep;
  const auto& contract = engine.contract();
  const auto& ledger = engine.ledger();
  rep.contract_id = contract.id();
  rep.mode = std::string(to_string(sc.mode));
  rep.seed = sc.seed;
  rep.final_state = to_string(contract.state());
  rep.error = engine.halted();
  if (const auto* t = std::get_if<state::Terminated>(&contract.state())) {
    rep.cause = t->cause;
    rep.terminated_at = t->at;
  }
  if (const auto* e = std::get_if<state::Error>(&contract.state())) rep.error = e->detail;

  for (const auto& c : engine.cycles()) {
    CycleRow row;
    row.cycle = c.cycle;
    row.open = c.open;
    row.settle = c.settle;
    row.value = c.value;
    row.outcome = "open";
    if (c.check) {
      for (const auto& f : c.check->fee_transfers) {
        rep.transfers.push_back({c.cycle, c.checked_at, f.from, f.to, f.amount, "fee_forfeit"});
        row.fee_forfeit += f.amount;
      }
      row.outcome = c.check->passed ? "checked" : "INSUFFICIENT_PREFUND";
    }
    if (c.settlement) {
      const auto& s = *c.settlement;
      row.settlement_amount = s.value;
      row.settled = s.transferred;
      row.payer = s.payer ? ledger.label_of(*s.payer) : "";
      if (!s.transferred.is_zero())
        rep.transfers.push_back({c.cycle, c.settle, *s.payer, *s.receiver, s.transferred, "settlement"});
      if (s.fee) {
        rep.transfers.push_back({c.cycle, c.settle, s.fee->from, s.fee->to, s.fee->amount, "fee_forfeit"});
        row.fee_forfeit += s.fee->amount;
      }
      row.outcome = s.partial ? "SETTLEMENT_FAILED" : "settled";
    }
    if (c.cycle == contract.cycle() && std::holds_alternative<state::Error>(contract.state()))
      row.outcome = "ERROR";
    if (c.cycle == contract.spec().cycles() && rep.cause == TerminationCause::Matured)
      row.outcome = "MATURED";
    rep.cycles.push_back(std::move(row));
  }
  Amount initial_total, final_total;
  for (auto [cfg, id] : {std::pair{&sc.party_a, world.party_a}, std::pair{&sc.party_b, world.party_b}}) {
    PartyBalance p{cfg->label,
                   id,
                   to_string(cfg->policy),
                   cfg->funding,
                   ledger.balance_of(id),
                   contract.margin(ledger, id),
                   contract.fee(ledger, id),
                   ledger.wealth_of(id)};
    initial_total += p.initial;
    final_total += p.wealth;
    rep.parties.push_back(std::move(p));
  }

  rep.journal = ledger.journal();
  rep.journal_hash = to_hex(rep.journal.head_hash());
  rep.journal_blocks = rep.journal.size();
  rep.ledger_csv = ledger.export_csv();

  const auto records = rep.journal.records();
  auto& inv = rep.invariants;
  inv.conservation = initial_total == final_total && ledger.total_held() == ledger.total_supply();
  inv.journal_verifies = verify(rep.journal);
  inv.timestamps_monotonic = invariants::timestamps_monotonic(records);
  inv.windows_respected = invariants::windows_respected(records);
  inv.settlement_bounded = invariants::settlement_bounded(records);
  inv.reconciled = detail::reconcile(rep.transfers, detail::journal_transfers(records));
  return rep;
}

/// Initialize, run every cycle under the scenario's trigger mode, and report.
/// Protocol outcomes (early termination, oracle failure) are report facts;
/// only I/O problems throw.
inline RunReport run_simulation(const Scenario& sc) {
  World world = build_world(sc);
  Engine engine = make_engine(sc, world);
  switch (sc.mode) {
    case TriggerMode::Active:
      engine.run_active();
      break;
    case TriggerMode::Passive:
      while (auto ev = engine.next_due()) {
        auto r = engine.request_event(default_requester(*ev, world), ev->kind, ev->time);
        if (!r.accepted) break;
      }
      break;
    case TriggerMode::Driver: {
      std::vector<ScriptStep> script;
      if (sc.script_file) {
        script = parse_script(io::read_text(*sc.script_file), [&](const std::string& label) {
          if (label == sc.party_a.label) return world.party_a;
          if (label == sc.party_b.label) return world.party_b;
          if (label == "oracle" || label == "valuation-oracle") return world.oracle;
          return AccountId(label);  // unknown requesters are rejected, not fatal
        });
      } else {
        script = derive_script(engine.timeline(), world);
      }
      engine.run_driver(script);
      break;
    }
  }
  return make_report(sc, world, engine);
}

/// One-period settlement amounts over the first settlement interval, each
/// from an independent draw of `stream`.
inline std::vector<double> sample_settlements(const Scenario& sc, std::size_t trials,
                                              std::uint64_t stream) {
  auto pricer = PricerRegistry::with_defaults().get(sc.pricer_version);
  const Tick t0 = sc.start;
  const Tick t1 = sc.settlement_times.front();
  const double dt = static_cast<double>(t1 - t0) * sc.market.tick_years;
  const double sigma = sc.market.volatility;
  const double drift = (sc.market.drift - 0.5 * sigma * sigma) * dt;
  const MarketSnapshot before{t0, sc.market.rate0, sc.market.spot0};
  std::vector<double> out;
  out.reserve(trials);
  for (std::size_t k = 0; k < trials; ++k) {
    const double z = sigma == 0.0 ? 0.0 : rng::standard_normal(sc.seed, stream, k);
    const MarketSnapshot after{t1, sc.market.rate0,
                               sc.market.spot0 * std::exp(drift + sigma * std::sqrt(dt) * z)};
    out.push_back(settlement_amount(*pricer, sc.product, t0, t1, before, after).value);
  }
  return out;
}

/// Quantile margin buffer from `trials` simulated one-period settlements,
/// floored at one minor unit.
inline Amount calibrate_buffer(const Scenario& sc, double q, std::size_t trials) {
  if (!(q > 0.0 && q <= 1.0)) throw Error(Errc::InvalidArgument, "q must be in (0,1]");
  if (trials < 100) throw Error(Errc::InvalidArgument, "calibration needs at least 100 trials");
  auto samples = sample_settlements(sc, trials, streams::kCalibration);
  return std::max(margin_buffer(samples, q), Amount(1));
}

/// Exit status for a finished run: 0 matured, 3 early termination, 1 when
/// the engine could not complete (halt or oracle suspension).
inline int exit_code(const RunReport& r) {
  if (r.cause == TerminationCause::Matured) return 0;
  if (r.cause) return 3;
  return 1;
}

}  // namespace sdc
