// SPDX-License-Identifier: Apache-2.0
//
// Shared builders for contract-level tests.
#pragma once

#include <vector>

#include "sdc/contract.hpp"
#include "sdc/ledger.hpp"

namespace sdc::testing {

struct Parties {
  Ledger ledger;
  AccountId a;
  AccountId b;
};

inline Parties funded(std::int64_t a_minor, std::int64_t b_minor) {
  Parties p;
  p.a = p.ledger.open_account("bankA");
  p.b = p.ledger.open_account("bankB");
  p.ledger.mint(p.ledger.issuer(), p.a, Amount(a_minor));
  p.ledger.mint(p.ledger.issuer(), p.b, Amount(b_minor));
  return p;
}

/// Forward on spot; start 0, settlements every `gap` ticks.
inline ContractSpec forward_spec(const Parties& p, int cycles = 3, Tick gap = 10,
                                 std::int64_t buffer = 400, std::int64_t fee = 100,
                                 Tick window = 3) {
  ContractSpec s;
  s.contract_id = "sdc-1";
  s.party_a = p.a;
  s.party_b = p.b;
  s.start = 0;
  for (int c = 1; c <= cycles; ++c) s.settlement_times.push_back(gap * c);
  s.product = ProductSpec{Forward{1.0, 100.0, s.settlement_times.back()}, 1.0 / 252.0};
  s.margin_buffer_a = s.margin_buffer_b = Amount(buffer);
  s.termination_fee_a = s.termination_fee_b = Amount(fee);
  s.prefund_window = window;
  return s;
}

/// Posts both buffers and runs the current cycle up to MarginCalculation
/// with the given F; margin check must pass.
inline void to_calculation(Contract& c, Ledger& l, double f) {
  const auto& s = c.spec();
  const Tick open = s.cycle_open(c.cycle());
  c.close_accounts(l, open + s.prefund_window);
  c.margin_check(l, open + s.prefund_window + 1);
  c.record_valuation(l, {f, s.settlement_time(c.cycle())}, s.settlement_time(c.cycle()));
}

}  // namespace sdc::testing

#include "sdc/simulation.hpp"

namespace sdc::testing {

/// Forward on an index, three cycles of ten ticks, flat market unless the
/// caller adds volatility. Values are in minor units: notional 100 turns a
/// one-point index move into 100 minor units.
inline Scenario basic_scenario() {
  Scenario sc;
  sc.contract_id = "fwd-1";
  sc.start = 0;
  sc.settlement_times = {10, 20, 30};
  sc.prefund_window = 3;
  sc.market = MarketModel{100.0, 0.01, 0.0, 0.0, 1.0 / 252.0};
  sc.product = ProductSpec{Forward{100.0, 100.0, 30}, sc.market.tick_years};
  sc.party_a = {"bankA", Amount(100'000), Amount(5'000), Amount(1'000), policy::Compliant{}};
  sc.party_b = {"bankB", Amount(100'000), Amount(5'000), Amount(1'000), policy::Compliant{}};
  sc.seed = 42;
  return sc;
}

}  // namespace sdc::testing
