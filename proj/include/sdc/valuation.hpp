// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "sdc/error.hpp"
#include "sdc/io.hpp"
#include "sdc/ledger.hpp"
#include "sdc/types.hpp"

namespace sdc {

/// Market data observed at one grid time: a flat continuously-compounded
/// zero rate and an index level.
struct MarketSnapshot {
  Tick as_of = 0;
  double zero_rate = 0.0;
  double spot = 1.0;

  friend bool operator==(const MarketSnapshot&, const MarketSnapshot&) = default;
};

/// Pays notional * (S - strike) at maturity.
struct Forward {
  double notional = 0.0;
  double strike = 0.0;
  Tick maturity = 0;
};

/// Payer-fixed swap: receives the floating forward rate, pays the fixed rate,
/// on each payment time with the given accrual year fractions.
struct VanillaSwap {
  double notional = 0.0;
  double fixed_rate = 0.0;
  std::vector<Tick> payment_times;
  std::vector<double> accruals;
};

struct ProductSpec {
  std::variant<Forward, VanillaSwap> terms;
  double years_per_tick = 1.0 / 252.0;

  Tick maturity() const {
    return std::visit(
        [](const auto& p) -> Tick {
          if constexpr (std::is_same_v<std::decay_t<decltype(p)>, Forward>)
            return p.maturity;
          else
            return p.payment_times.empty() ? Tick{0} : p.payment_times.back();
        },
        terms);
  }

  double notional() const {
    return std::visit([](const auto& p) { return p.notional; }, terms);
  }

  double years(Tick t) const { return static_cast<double>(t) * years_per_tick; }

  /// Throws InvalidSpec unless the product is well formed for a contract
  /// starting at `start`.
  void validate(Tick start) const {
    auto fail = [](const std::string& what) { throw Error(Errc::InvalidSpec, what); };
    if (!(years_per_tick > 0.0) || !std::isfinite(years_per_tick))
      fail("years_per_tick must be positive");
    if (!std::isfinite(notional())) fail("notional must be finite");
    if (const auto* fwd = std::get_if<Forward>(&terms)) {
      if (fwd->maturity <= start) fail("forward maturity must follow contract start");
      if (!std::isfinite(fwd->strike)) fail("forward strike must be finite");
      return;
    }
    const auto& swp = std::get<VanillaSwap>(terms);
    if (swp.payment_times.empty()) fail("swap needs at least one payment");
    if (swp.payment_times.size() != swp.accruals.size())
      fail("swap payment_times and accruals differ in length");
    Tick prev = start;
    for (std::size_t j = 0; j < swp.payment_times.size(); ++j) {
      if (swp.payment_times[j] <= prev) fail("swap payment times must strictly increase");
      if (!(swp.accruals[j] > 0.0)) fail("swap accruals must be positive");
      prev = swp.payment_times[j];
    }
    if (!std::isfinite(swp.fixed_rate)) fail("swap fixed rate must be finite");
  }
};

/// exp(-r (T - t)) with t, T in years.
inline double discount_factor(const MarketSnapshot& snap, double t, double T) {
  if (T < t) throw Error(Errc::NegativeTenor, "T < t");
  return std::exp(-snap.zero_rate * (T - t));
}

/// V(t, M(s)): time-t value of the product's remaining cash flows under the
/// model calibrated to `snap`. Implementations must be pure.
class Pricer {
 public:
  virtual ~Pricer() = default;
  virtual double price(const ProductSpec& product, Tick t, const MarketSnapshot& snap) const = 0;
  virtual std::string version() const = 0;
};

/// Flat continuously-compounded curve.
///   Forward:     N (S - K) df(t, T)
///   VanillaSwap: N sum_j tau_j (f_j - K) df(t, T_j) over payments T_j > t,
///                f_j = (df(t, T_{j-1}) / df(t, T_j) - 1) / tau_j, with the
///                first remaining period starting at t.
class FlatCurvePricer final : public Pricer {
 public:
  static constexpr std::string_view kVersion = "flat-curve/1";

  double price(const ProductSpec& product, Tick t, const MarketSnapshot& snap) const override {
    if (t > product.maturity())
      throw Error(Errc::PastMaturity,
                  "t=" + std::to_string(t) + " > maturity " + std::to_string(product.maturity()));
    const double now = product.years(t);
    if (const auto* fwd = std::get_if<Forward>(&product.terms)) {
      return fwd->notional * (snap.spot - fwd->strike) *
             discount_factor(snap, now, product.years(fwd->maturity));
    }
    const auto& swp = std::get<VanillaSwap>(product.terms);
    double sum = 0.0;
    double period_start = now;
    for (std::size_t j = 0; j < swp.payment_times.size(); ++j) {
      if (swp.payment_times[j] <= t) continue;
      const double pay = product.years(swp.payment_times[j]);
      const double tau = swp.accruals[j];
      const double df_start = discount_factor(snap, now, period_start);
      const double df_pay = discount_factor(snap, now, pay);
      const double fwd_rate = (df_start / df_pay - 1.0) / tau;
      sum += tau * (fwd_rate - swp.fixed_rate) * df_pay;
      period_start = pay;
    }
    return swp.notional * sum;
  }

  std::string version() const override { return std::string(kVersion); }
};

/// Pricers addressable by the version string a contract pins.
class PricerRegistry {
 public:
  static PricerRegistry with_defaults() {
    PricerRegistry r;
    r.add(std::make_shared<FlatCurvePricer>());
    return r;
  }

  void add(std::shared_ptr<const Pricer> pricer) {
    auto v = pricer->version();
    pricers_[v] = std::move(pricer);
  }

  std::shared_ptr<const Pricer> get(const std::string& version) const {
    auto it = pricers_.find(version);
    if (it == pricers_.end()) throw Error(Errc::UnknownPricer, version);
    return it->second;
  }

  bool contains(const std::string& version) const { return pricers_.contains(version); }

 private:
  std::map<std::string, std::shared_ptr<const Pricer>> pricers_;
};

/// F(t_i, t_next); positive means party B pays party A.
struct SettlementAmount {
  double value = 0.0;
  Tick as_of = 0;

  friend bool operator==(const SettlementAmount&, const SettlementAmount&) = default;
};

/// F(t_i, t_next) = V(t_next, M(t_next)) - V(t_next, M(t_i)).
inline SettlementAmount settlement_amount(const Pricer& pricer, const ProductSpec& product,
                                          Tick t_i, Tick t_next, const MarketSnapshot& snap_old,
                                          const MarketSnapshot& snap_new) {
  if (t_i >= t_next) throw Error(Errc::InvalidArgument, "settlement period must be non-empty");
  if (t_next > product.maturity())
    throw Error(Errc::PastMaturity, "period ends after maturity");
  if (snap_old.as_of != t_i || snap_new.as_of != t_next)
    throw Error(Errc::TimestampMismatch,
                "snapshots at " + std::to_string(snap_old.as_of) + "/" +
                    std::to_string(snap_new.as_of) + " for period " + std::to_string(t_i) + "/" +
                    std::to_string(t_next));
  return {pricer.price(product, t_next, snap_new) - pricer.price(product, t_next, snap_old),
          t_next};
}

/// Round half away from zero to whole minor units.
inline std::int64_t round_to_minor(double value) {
  if (!std::isfinite(value) || std::fabs(value) > 9.0e18)
    throw Error(Errc::Overflow, "amount not representable in minor units");
  return static_cast<std::int64_t>(std::llround(value));
}

/// Exact text form for doubles in journal records.
inline std::string format_decimal(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Snapshots keyed by time; single writer, asOf strictly increasing.
class MarketStore {
 public:
  void put(const MarketSnapshot& snap) {
    if (!(snap.spot > 0.0) || !std::isfinite(snap.spot))
      throw Error(Errc::InvalidArgument, "spot must be positive at t=" + std::to_string(snap.as_of));
    if (!std::isfinite(snap.zero_rate))
      throw Error(Errc::InvalidArgument, "zero rate must be finite");
    if (!snaps_.empty() && snap.as_of <= snaps_.rbegin()->first)
      throw Error(Errc::InvalidArgument,
                  "snapshot times must strictly increase at t=" + std::to_string(snap.as_of));
    snaps_.emplace(snap.as_of, snap);
  }

  const MarketSnapshot* find(Tick t) const {
    auto it = snaps_.find(t);
    return it == snaps_.end() ? nullptr : &it->second;
  }

  const MarketSnapshot& at(Tick t) const {
    if (const auto* s = find(t)) return *s;
    throw Error(Errc::MissingSnapshot, "no market snapshot at t=" + std::to_string(t));
  }

  std::size_t size() const noexcept { return snaps_.size(); }
  bool empty() const noexcept { return snaps_.empty(); }

  std::vector<MarketSnapshot> snapshots() const {
    std::vector<MarketSnapshot> out;
    out.reserve(snaps_.size());
    for (const auto& [t, s] : snaps_) out.push_back(s);
    return out;
  }

 private:
  std::map<Tick, MarketSnapshot> snaps_;
};

/// Parses a market path file: header `time,spot,zero_rate`, one row per
/// snapshot, integer ticks.
inline MarketStore parse_market_csv(std::string_view text) {
  MarketStore store;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != "time,spot,zero_rate")
        throw Error(Errc::ParseError, "line 1: expected header time,spot,zero_rate");
      header = true;
      continue;
    }
    std::istringstream row(line);
    std::string f_time, f_spot, f_rate, extra;
    if (!std::getline(row, f_time, ',') || !std::getline(row, f_spot, ',') ||
        !std::getline(row, f_rate, ',') || std::getline(row, extra, ','))
      throw Error(Errc::ParseError, "line " + std::to_string(lineno) + ": expected 3 columns");
    try {
      std::size_t used = 0;
      MarketSnapshot s;
      s.as_of = std::stoll(f_time, &used);
      if (used != f_time.size()) throw std::invalid_argument("time");
      s.spot = std::stod(f_spot, &used);
      if (used != f_spot.size()) throw std::invalid_argument("spot");
      s.zero_rate = std::stod(f_rate, &used);
      if (used != f_rate.size()) throw std::invalid_argument("zero_rate");
      store.put(s);
    } catch (const Error& e) {
      throw Error(Errc::ParseError, "line " + std::to_string(lineno) + ": " + e.what());
    } catch (const std::exception&) {
      throw Error(Errc::ParseError, "line " + std::to_string(lineno) + ": malformed number");
    }
  }
  if (!header) throw Error(Errc::ParseError, "line 1: expected header time,spot,zero_rate");
  return store;
}

inline MarketStore load_market_csv(const std::filesystem::path& path) {
  return parse_market_csv(io::read_text(path));
}

inline std::string market_csv(const MarketStore& store) {
  std::string out = "time,spot,zero_rate\n";
  for (const auto& s : store.snapshots())
    out += std::to_string(s.as_of) + "," + format_decimal(s.spot) + "," +
           format_decimal(s.zero_rate) + "\n";
  return out;
}

/// The agreed settlement oracle for one contract. Each (start, end) period is
/// valued once; later queries return the cached number without journaling
/// again, so both parties always see the same figure.
class MarginOracle {
 public:
  MarginOracle(std::string contract, ProductSpec product, std::shared_ptr<const Pricer> pricer,
               AccountId actor)
      : contract_(std::move(contract)),
        product_(std::move(product)),
        pricer_(std::move(pricer)),
        actor_(std::move(actor)) {}

  SettlementAmount get_margin(const MarketStore& store, Ledger& ledger, Tick period_start,
                              Tick period_end) {
    if (auto it = cache_.find({period_start, period_end}); it != cache_.end()) return it->second;
    const auto& old_snap = store.at(period_start);
    const auto& new_snap = store.at(period_end);
    auto f = settlement_amount(*pricer_, product_, period_start, period_end, old_snap, new_snap);
    ledger.record(EventKind::Valuation, actor_.empty() ? std::string(kSystemActor) : actor_.str(),
                  {{"contract", contract_},
                   {"period_end", std::to_string(period_end)},
                   {"period_start", std::to_string(period_start)},
                   {"pricer", pricer_->version()},
                   {"value", format_decimal(f.value)}});
    cache_.emplace(std::pair{period_start, period_end}, f);
    return f;
  }

  const ProductSpec& product() const noexcept { return product_; }
  const Pricer& pricer() const noexcept { return *pricer_; }
  const AccountId& actor() const noexcept { return actor_; }

 private:
  std::string contract_;
  ProductSpec product_;
  std::shared_ptr<const Pricer> pricer_;
  AccountId actor_;
  std::map<std::pair<Tick, Tick>, SettlementAmount> cache_;
};

/// Nearest-rank q-quantile of |samples|, rounded up to whole minor units.
/// Samples are in minor units.
inline Amount margin_buffer(std::span<const double> samples, double q) {
  if (samples.empty()) throw Error(Errc::EmptySamples, "margin buffer needs samples");
  if (!(q > 0.0 && q <= 1.0)) throw Error(Errc::InvalidArgument, "quantile level must be in (0,1]");
  std::vector<double> mags(samples.size());
  std::transform(samples.begin(), samples.end(), mags.begin(),
                 [](double x) { return std::fabs(x); });
  const auto n = mags.size();
  // ceil(q n), guarded against q n landing a hair above an integer.
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(rank - 1), mags.end());
  const double v = mags[rank - 1];
  if (!std::isfinite(v)) throw Error(Errc::InvalidArgument, "non-finite sample");
  return Amount(static_cast<std::int64_t>(std::ceil(v - 1e-9)));
}

}  // namespace sdc
