// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <functional>
#include <set>

#include "fixtures.hpp"
#include "sdc/contract.hpp"

using namespace sdc;
using namespace sdc::testing;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const sdc::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::InvalidArgument;
}

struct Running {
  Parties p;
  Contract c;

  explicit Running(std::int64_t fund_a = 10'000, std::int64_t fund_b = 10'000, int cycles = 3)
      : p(funded(fund_a, fund_b)), c(forward_spec(p, cycles)) {
    c.initialize(p.ledger, 0);
  }

  void post_both(std::int64_t amount = 400) {
    c.deposit_margin(p.ledger, p.a, Amount(amount), c.spec().cycle_open(c.cycle()));
    c.deposit_margin(p.ledger, p.b, Amount(amount), c.spec().cycle_open(c.cycle()));
  }
};

}  // namespace

TEST(ContractSpec, Validation) {
  auto p = funded(0, 0);
  auto s = forward_spec(p);
  EXPECT_NO_THROW(s.validate());
  auto bad = s;
  bad.party_b = bad.party_a;
  EXPECT_EQ(code_of([&] { bad.validate(); }), Errc::InvalidSpec);
  bad = s;
  bad.prefund_window = 10;
  EXPECT_EQ(code_of([&] { bad.validate(); }), Errc::InvalidSpec);
  bad = s;
  bad.settlement_times = {10, 10, 30};
  EXPECT_EQ(code_of([&] { bad.validate(); }), Errc::InvalidSpec);
  bad = s;
  bad.termination_fee_b = Amount(0);
  EXPECT_EQ(code_of([&] { bad.validate(); }), Errc::InvalidSpec);
  bad = s;
  bad.product = ProductSpec{Forward{1.0, 100.0, 29}, 1.0 / 252.0};
  EXPECT_EQ(code_of([&] { bad.validate(); }), Errc::InvalidSpec);
}

TEST(Initialize, ExactFundingLocksFees) {
  auto p = funded(500, 500);
  Contract c(forward_spec(p));
  c.initialize(p.ledger, 0);
  EXPECT_EQ(to_string(c.state()), "AccountsOpen{until=3}");
  EXPECT_EQ(c.fee(p.ledger, p.a), Amount(100));
  EXPECT_EQ(c.fee(p.ledger, p.b), Amount(100));
  EXPECT_EQ(p.ledger.balance_of(p.a), Amount(400));
  EXPECT_EQ(c.cycle(), 1);
}

TEST(Initialize, ShortPartyFailsWithoutSideEffects) {
  auto p = funded(500, 499);
  Contract c(forward_spec(p));
  auto csv = p.ledger.export_csv();
  auto blocks = p.ledger.journal().size();
  try {
    c.initialize(p.ledger, 0);
    FAIL();
  } catch (const sdc::Error& e) {
    EXPECT_EQ(e.code(), Errc::PreconditionFailed);
    EXPECT_EQ(e.detail(), p.b.str());
  }
  EXPECT_EQ(p.ledger.export_csv(), csv);
  EXPECT_EQ(p.ledger.journal().size(), blocks);
  EXPECT_EQ(to_string(c.state()), "PreCheck");
}

TEST(Initialize, DuplicateContractIdRejected) {
  auto p = funded(10'000, 10'000);
  Contract c(forward_spec(p));
  c.initialize(p.ledger, 0);
  Contract twin(forward_spec(p));
  auto csv = p.ledger.export_csv();
  EXPECT_EQ(code_of([&] { twin.initialize(p.ledger, 0); }), Errc::DuplicateContract);
  EXPECT_EQ(p.ledger.export_csv(), csv);
  EXPECT_EQ(code_of([&] { c.initialize(p.ledger, 0); }), Errc::WrongState);
}

TEST(Margin, DepositWindowRules) {
  Running r;
  r.c.deposit_margin(r.p.ledger, r.p.a, Amount(250), 2);
  EXPECT_EQ(r.c.margin(r.p.ledger, r.p.a), Amount(250));
  auto outsider = r.p.ledger.open_account("bankC");
  EXPECT_EQ(code_of([&] { r.c.deposit_margin(r.p.ledger, outsider, Amount(1), 1); }),
            Errc::NotAParty);
  // The window is [open, until): the closing tick itself is outside.
  EXPECT_EQ(code_of([&] { r.c.deposit_margin(r.p.ledger, r.p.a, Amount(1), 3); }),
            Errc::AccountsNotOpen);
  r.c.close_accounts(r.p.ledger, 3);
  EXPECT_EQ(code_of([&] { r.c.deposit_margin(r.p.ledger, r.p.a, Amount(1), 3); }),
            Errc::AccountsNotOpen);
  EXPECT_EQ(code_of([&] { r.c.withdraw_margin(r.p.ledger, r.p.a, Amount(1), 3); }),
            Errc::AccountsNotOpen);
}

TEST(Margin, WithdrawRules) {
  Running r;
  r.post_both();
  EXPECT_EQ(code_of([&] { r.c.withdraw_margin(r.p.ledger, r.p.a, Amount(401), 1); }),
            Errc::InsufficientSegregated);
  r.c.withdraw_margin(r.p.ledger, r.p.a, Amount(400), 1);
  EXPECT_EQ(r.c.margin(r.p.ledger, r.p.a), Amount(0));
  r.c.close_accounts(r.p.ledger, 3);
  auto out = r.c.margin_check(r.p.ledger, 4);
  EXPECT_FALSE(out.passed);
  EXPECT_EQ(to_string(r.c.state()), "Terminated{cause=INSUFFICIENT_PREFUND,at=4}");
}

TEST(Fee, DepositAndWithdrawTiming) {
  Running r;
  EXPECT_EQ(code_of([&] { r.c.deposit_fee(r.p.ledger, r.p.a, Amount(1), 1); }), Errc::WrongState);
  EXPECT_EQ(code_of([&] { r.c.withdraw_fee(r.p.ledger, r.p.a, Amount(1), 1); }), Errc::WrongState);

  Running m(10'000, 10'000, 1);
  m.post_both();
  to_calculation(m.c, m.p.ledger, 0.0);
  m.c.settle(m.p.ledger, 10);
  m.c.mature(m.p.ledger, 10);
  EXPECT_EQ(m.c.fee(m.p.ledger, m.p.a), Amount(0));
  EXPECT_EQ(m.p.ledger.balance_of(m.p.a), Amount(10'000));
  // Nothing left to draw: fees went home at maturity.
  EXPECT_EQ(code_of([&] { m.c.withdraw_fee(m.p.ledger, m.p.a, Amount(1), 10); }),
            Errc::InsufficientSegregated);
  m.c.withdraw_fee(m.p.ledger, m.p.a, Amount(0), 10);
}

TEST(CloseAccounts, Timing) {
  Running r;
  EXPECT_EQ(code_of([&] { r.c.close_accounts(r.p.ledger, 2); }), Errc::TooEarly);
  EXPECT_EQ(to_string(r.c.state()), "AccountsOpen{until=3}");
  r.c.close_accounts(r.p.ledger, 3);
  EXPECT_EQ(to_string(r.c.state()), "MarginCheck");
  EXPECT_EQ(code_of([&] { r.c.close_accounts(r.p.ledger, 3); }), Errc::WrongState);
}

TEST(MarginCheckRule, ExactBufferPasses) {
  Running r;
  r.post_both();
  r.c.close_accounts(r.p.ledger, 3);
  EXPECT_TRUE(r.c.margin_check(r.p.ledger, 4).passed);
  EXPECT_EQ(to_string(r.c.state()), "AwaitValuation{settleAt=10}");
}

TEST(MarginCheckRule, OneShortForfeitsFee) {
  Running r;
  r.c.deposit_margin(r.p.ledger, r.p.a, Amount(399), 0);
  r.c.deposit_margin(r.p.ledger, r.p.b, Amount(400), 0);
  r.c.close_accounts(r.p.ledger, 3);
  auto out = r.c.margin_check(r.p.ledger, 4);
  ASSERT_EQ(out.fee_transfers.size(), 1U);
  EXPECT_EQ(out.fee_transfers[0].from, r.p.a);
  EXPECT_EQ(out.fee_transfers[0].amount, Amount(100));
  EXPECT_EQ(r.p.ledger.balance_of(r.p.b), Amount(10'100));
  EXPECT_EQ(r.p.ledger.balance_of(r.p.a), Amount(9'900));
  EXPECT_EQ(r.p.ledger.segregated("sdc-1", r.p.a, Bucket::Margin), Amount(0));
  EXPECT_EQ(r.p.ledger.segregated("sdc-1", r.p.b, Bucket::Fee), Amount(0));
}

TEST(MarginCheckRule, BothShortFeesCross) {
  auto p = funded(10'000, 10'000);
  auto spec = forward_spec(p);
  spec.termination_fee_a = Amount(70);
  spec.termination_fee_b = Amount(130);
  Contract c(spec);
  c.initialize(p.ledger, 0);
  c.close_accounts(p.ledger, 3);
  auto out = c.margin_check(p.ledger, 4);
  EXPECT_EQ(out.fee_transfers.size(), 2U);
  // Net effect: A gains P_B - P_A.
  EXPECT_EQ(p.ledger.balance_of(p.a), Amount(10'060));
  EXPECT_EQ(p.ledger.balance_of(p.b), Amount(9'940));
}

TEST(Settle, ZeroAmountAdvances) {
  Running r;
  r.post_both();
  to_calculation(r.c, r.p.ledger, 0.3);  // rounds to 0
  auto out = r.c.settle(r.p.ledger, 10);
  EXPECT_TRUE(out.due.is_zero());
  EXPECT_FALSE(out.payer.has_value());
  EXPECT_EQ(to_string(r.c.state()), "Settled{cycle=1}");
  r.c.open_accounts(r.p.ledger, 10);
  EXPECT_EQ(to_string(r.c.state()), "AccountsOpen{until=13}");
  EXPECT_EQ(r.c.cycle(), 2);
}

TEST(Settle, ExactBufferCoversPayment) {
  Running r;
  r.post_both();
  to_calculation(r.c, r.p.ledger, 400.0);  // B owes A
  auto out = r.c.settle(r.p.ledger, 10);
  EXPECT_EQ(out.payer, r.p.b);
  EXPECT_EQ(out.transferred, Amount(400));
  EXPECT_FALSE(out.partial);
  EXPECT_EQ(r.c.margin(r.p.ledger, r.p.b), Amount(0));
  EXPECT_EQ(r.p.ledger.balance_of(r.p.a), Amount(10'000 - 500 + 400));
  EXPECT_EQ(to_string(r.c.state()), "Settled{cycle=1}");
}

TEST(Settle, ShortfallTerminatesWithPartialSettlement) {
  Running r;
  r.post_both();
  to_calculation(r.c, r.p.ledger, -500.0);  // A owes B
  auto out = r.c.settle(r.p.ledger, 10);
  EXPECT_TRUE(out.partial);
  EXPECT_EQ(out.payer, r.p.a);
  EXPECT_EQ(out.transferred, Amount(400));
  ASSERT_TRUE(out.fee.has_value());
  EXPECT_EQ(out.fee->amount, Amount(100));
  EXPECT_EQ(to_string(r.c.state()), "Terminated{cause=SETTLEMENT_FAILED,at=10}");
  // B: own margin and fee back, plus A's 400 margin and 100 fee.
  EXPECT_EQ(r.p.ledger.balance_of(r.p.b), Amount(10'500));
  EXPECT_EQ(r.p.ledger.balance_of(r.p.a), Amount(9'500));
}

TEST(Settle, RequiresValuation) {
  Running r;
  r.post_both();
  r.c.close_accounts(r.p.ledger, 3);
  r.c.margin_check(r.p.ledger, 4);
  EXPECT_EQ(code_of([&] { r.c.settle(r.p.ledger, 10); }), Errc::NoValuation);
  EXPECT_EQ(code_of([&] { r.c.record_valuation(r.p.ledger, {1.0, 9}, 10); }),
            Errc::TimestampMismatch);
}

TEST(Lifecycle, MaturityReturnsEverything) {
  Running r;
  double fs[] = {120.0, -75.0, 10.0};
  for (int cycle = 1; cycle <= 3; ++cycle) {
    r.post_both(cycle == 1 ? 400 : 0);
    if (cycle > 1) {
      // Restore buffers drawn by the previous settlement.
      for (const auto& who : {r.p.a, r.p.b}) {
        auto have = r.c.margin(r.p.ledger, who);
        if (have < Amount(400))
          r.c.deposit_margin(r.p.ledger, who, Amount(400) - have, r.c.spec().cycle_open(cycle));
      }
    }
    to_calculation(r.c, r.p.ledger, fs[cycle - 1]);
    r.c.settle(r.p.ledger, 10 * cycle);
    if (cycle < 3) r.c.open_accounts(r.p.ledger, 10 * cycle);
  }
  EXPECT_EQ(code_of([&] { r.c.open_accounts(r.p.ledger, 30); }), Errc::WrongState);
  r.c.mature(r.p.ledger, 30);
  EXPECT_EQ(to_string(r.c.state()), "Terminated{cause=MATURED,at=30}");
  EXPECT_EQ(r.p.ledger.balance_of(r.p.a), Amount(10'000 + 120 - 75 + 10));
  EXPECT_EQ(r.p.ledger.balance_of(r.p.b), Amount(10'000 - 55));
  EXPECT_EQ(r.p.ledger.total_held(), r.p.ledger.total_supply());
  EXPECT_TRUE(verify(r.p.ledger.journal()));
}

// Every (reachable state, operation, time) triple either performs a listed
// transition or throws an sdc::Error that leaves contract and ledger as
// they were.
TEST(Lifecycle, ClosedTransitionGraph) {
  using Op = std::function<void(Contract&, Ledger&, const Parties&, Tick)>;
  struct NamedOp {
    const char* name;
    Op fn;
  };
  const std::vector<NamedOp> ops = {
      {"initialize", [](Contract& c, Ledger& l, const Parties&, Tick t) { c.initialize(l, t); }},
      {"deposit_fee",
       [](Contract& c, Ledger& l, const Parties& p, Tick t) { c.deposit_fee(l, p.a, Amount(5), t); }},
      {"withdraw_fee",
       [](Contract& c, Ledger& l, const Parties& p, Tick t) { c.withdraw_fee(l, p.a, Amount(0), t); }},
      {"deposit_margin",
       [](Contract& c, Ledger& l, const Parties& p, Tick t) {
         c.deposit_margin(l, p.a, Amount(5), t);
       }},
      {"withdraw_margin",
       [](Contract& c, Ledger& l, const Parties& p, Tick t) {
         c.withdraw_margin(l, p.b, Amount(5), t);
       }},
      {"close_accounts", [](Contract& c, Ledger& l, const Parties&, Tick t) { c.close_accounts(l, t); }},
      {"margin_check", [](Contract& c, Ledger& l, const Parties&, Tick t) { c.margin_check(l, t); }},
      {"record_valuation",
       [](Contract& c, Ledger& l, const Parties&, Tick t) { c.record_valuation(l, {50.0, t}, t); }},
      {"fail_valuation",
       [](Contract& c, Ledger& l, const Parties&, Tick t) { c.fail_valuation(l, "x", t); }},
      {"settle", [](Contract& c, Ledger& l, const Parties&, Tick t) { c.settle(l, t); }},
      {"open_accounts", [](Contract& c, Ledger& l, const Parties&, Tick t) { c.open_accounts(l, t); }},
      {"mature", [](Contract& c, Ledger& l, const Parties&, Tick t) { c.mature(l, t); }},
  };
  const std::set<std::tuple<std::string, std::string, std::string>> allowed = {
      {"PreCheck", "initialize", "AccountsOpen"},
      {"PreCheck", "deposit_fee", "PreCheck"},
      {"AccountsOpen", "deposit_margin", "AccountsOpen"},
      {"AccountsOpen", "withdraw_margin", "AccountsOpen"},
      {"AccountsOpen", "close_accounts", "MarginCheck"},
      {"MarginCheck", "margin_check", "AwaitValuation"},
      {"MarginCheck", "margin_check", "Terminated"},
      {"AwaitValuation", "record_valuation", "MarginCalculation"},
      {"AwaitValuation", "fail_valuation", "Error"},
      {"MarginCalculation", "settle", "Settled"},
      {"MarginCalculation", "settle", "Terminated"},
      {"Settled", "open_accounts", "AccountsOpen"},
      {"Settled", "mature", "Terminated"},
      {"Terminated", "withdraw_fee", "Terminated"},
  };
  auto kind = [](const ContractState& s) {
    auto text = to_string(s);
    return text.substr(0, text.find('{'));
  };

  // Reachable snapshots of (contract, ledger) on a 3-settlement grid.
  auto base = funded(10'000, 10'000);
  std::vector<std::pair<Contract, Ledger>> states;
  Contract c(forward_spec(base));
  Ledger l = base.ledger;
  states.emplace_back(c, l);  // PreCheck
  c.initialize(l, 0);
  states.emplace_back(c, l);  // AccountsOpen, empty buckets
  {
    auto bare = std::pair{c, l};
    bare.first.close_accounts(bare.second, 3);
    bare.first.margin_check(bare.second, 4);
    states.push_back(bare);  // Terminated{INSUFFICIENT_PREFUND}
  }
  c.deposit_margin(l, base.a, Amount(400), 0);
  c.deposit_margin(l, base.b, Amount(400), 0);
  states.emplace_back(c, l);  // AccountsOpen, funded
  c.close_accounts(l, 3);
  states.emplace_back(c, l);  // MarginCheck
  c.margin_check(l, 4);
  states.emplace_back(c, l);  // AwaitValuation
  {
    auto err = std::pair{c, l};
    err.first.fail_valuation(err.second, "no data", 10);
    states.push_back(err);  // Error
    auto big = std::pair{c, l};
    big.first.record_valuation(big.second, {-1000.0, 10}, 10);
    big.first.settle(big.second, 10);
    states.push_back(big);  // Terminated{SETTLEMENT_FAILED}
  }
  c.record_valuation(l, {0.0, 10}, 10);
  states.emplace_back(c, l);  // MarginCalculation
  c.settle(l, 10);
  states.emplace_back(c, l);  // Settled{1}
  c.open_accounts(l, 10);
  states.emplace_back(c, l);  // AccountsOpen, cycle 2
  for (int cycle = 2; cycle <= 3; ++cycle) {
    if (cycle == 3) c.open_accounts(l, 20);
    to_calculation(c, l, 0.0);
    c.settle(l, 10 * cycle);
  }
  states.emplace_back(c, l);  // Settled{3}
  c.mature(l, 30);
  states.emplace_back(c, l);  // Terminated{MATURED}

  std::set<std::string> seen_kinds;
  std::size_t accepted = 0, rejected = 0;
  for (const auto& [c0, l0] : states) {
    seen_kinds.insert(kind(c0.state()));
    for (const auto& op : ops) {
      for (Tick t : {0, 1, 3, 4, 9, 10, 11, 13, 14, 20, 30, 31}) {
        Contract cc = c0;
        Ledger ll = l0;
        const auto before = kind(cc.state());
        try {
          op.fn(cc, ll, base, t);
          ++accepted;
          EXPECT_TRUE(allowed.contains({before, op.name, kind(cc.state())}))
              << before << " --" << op.name << "@" << t << "--> " << to_string(cc.state());
          EXPECT_EQ(ll.total_held(), ll.total_supply());
        } catch (const sdc::Error& e) {
          ++rejected;
          EXPECT_EQ(to_string(cc.state()), to_string(c0.state())) << op.name << ": " << e.what();
          EXPECT_EQ(ll.export_csv(), l0.export_csv()) << op.name << ": " << e.what();
          EXPECT_EQ(ll.journal().size(), l0.journal().size()) << op.name << ": " << e.what();
        } catch (const std::exception& e) {
          ADD_FAILURE() << "foreign exception from " << op.name << " in " << before << ": "
                        << e.what();
        }
      }
    }
  }
  EXPECT_EQ(seen_kinds.size(), 8U);
  EXPECT_GT(accepted, 0U);
  EXPECT_GT(rejected, 0U);
}

TEST(Margin, NoAccessBeforeWindowOpens) {
  Running r;
  r.post_both();
  to_calculation(r.c, r.p.ledger, 0.0);
  r.c.settle(r.p.ledger, 10);
  r.c.open_accounts(r.p.ledger, 10);
  EXPECT_EQ(code_of([&] { r.c.deposit_margin(r.p.ledger, r.p.a, Amount(1), 9); }),
            Errc::AccountsNotOpen);
  r.c.deposit_margin(r.p.ledger, r.p.a, Amount(1), 12);
}
