// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sdc/contract.hpp"
#include "sdc/error.hpp"
#include "sdc/io.hpp"
#include "sdc/market_path.hpp"
#include "sdc/scheduler.hpp"
#include "sdc/types.hpp"

namespace sdc {

namespace policy {
/// Tops the margin bucket up to the agreed buffer in every window.
struct Compliant {
  friend bool operator==(const Compliant&, const Compliant&) = default;
};
/// Credit event at `at_cycle`: the buffer is pulled in that cycle's window
/// and never replenished.
struct Defaulting {
  int at_cycle = 1;
  friend bool operator==(const Defaulting&, const Defaulting&) = default;
};
/// Empties its wallet whenever its projected loss over the coming period
/// exceeds `threshold` minor units; compliant otherwise.
struct Willful {
  Amount threshold;
  friend bool operator==(const Willful&, const Willful&) = default;
};
}  // namespace policy

using AgentPolicy = std::variant<policy::Compliant, policy::Defaulting, policy::Willful>;

inline std::string to_string(const AgentPolicy& p) {
  if (std::holds_alternative<policy::Compliant>(p)) return "compliant";
  if (const auto* d = std::get_if<policy::Defaulting>(&p))
    return "defaulting:" + std::to_string(d->at_cycle);
  return "willful:" + std::to_string(std::get<policy::Willful>(p).threshold.minor());
}

enum class TriggerMode { Active, Passive, Driver };

constexpr std::string_view to_string(TriggerMode m) noexcept {
  switch (m) {
    case TriggerMode::Active: return "active";
    case TriggerMode::Passive: return "passive";
    case TriggerMode::Driver: return "driver";
  }
  return "?";
}

inline std::optional<TriggerMode> trigger_mode_from_string(std::string_view s) {
  if (s == "active") return TriggerMode::Active;
  if (s == "passive") return TriggerMode::Passive;
  if (s == "driver") return TriggerMode::Driver;
  return std::nullopt;
}

struct PartyConfig {
  std::string label;
  Amount funding;
  Amount margin_buffer;
  Amount termination_fee;
  AgentPolicy policy = policy::Compliant{};
};

/// A complete, validated run description. Party account ids do not exist
/// until a ledger is built, so the contract is kept as terms plus labels.
struct Scenario {
  std::string contract_id = "sdc";
  ProductSpec product;
  Tick start = 0;
  std::vector<Tick> settlement_times;
  Tick prefund_window = 1;
  std::string pricer_version{FlatCurvePricer::kVersion};

  PartyConfig party_a;
  PartyConfig party_b;

  MarketModel market;
  std::optional<std::filesystem::path> path_file;

  std::uint64_t seed = 0;
  TriggerMode mode = TriggerMode::Active;
  int valuation_attempts = 3;
  std::optional<std::filesystem::path> script_file;

  ContractSpec contract_spec(const AccountId& a, const AccountId& b) const {
    ContractSpec s;
    s.contract_id = contract_id;
    s.party_a = a;
    s.party_b = b;
    s.product = product;
    s.start = start;
    s.settlement_times = settlement_times;
    s.margin_buffer_a = party_a.margin_buffer;
    s.margin_buffer_b = party_b.margin_buffer;
    s.termination_fee_a = party_a.termination_fee;
    s.termination_fee_b = party_b.termination_fee;
    s.prefund_window = prefund_window;
    s.pricer_version = pricer_version;
    return s;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline Error parse_error(std::size_t line, const std::string& reason) {
  return Error(Errc::ParseError, "line " + std::to_string(line) + ": " + reason);
}

inline Error validation_error(const std::string& field, const std::string& reason) {
  return Error(Errc::ValidationError, field + ": " + reason);
}

struct Entry {
  std::string value;
  std::size_t line = 0;
};

using Sections = std::map<std::string, std::map<std::string, Entry>>;

inline const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"contract",
       {"id", "product", "notional", "strike", "fixed_rate", "start", "settlement_times",
        "settlement_interval", "settlement_count", "prefund_window", "margin_buffer",
        "margin_buffer_a", "margin_buffer_b", "termination_fee", "termination_fee_a",
        "termination_fee_b", "pricer"}},
      {"market", {"spot", "rate", "volatility", "drift", "tick_years", "path_file"}},
      {"agents",
       {"party_a", "party_b", "policy_a", "policy_b", "funding_a", "funding_b"}},
      {"run", {"seed", "mode", "valuation_attempts", "script"}},
  };
  return keys;
}

inline Sections tokenize(std::string_view text) {
  Sections sections;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::string current;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw parse_error(lineno, "unterminated section header");
      current = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!known_keys().contains(current))
        throw parse_error(lineno, "unknown section [" + current + "]");
      if (sections.contains(current))
        throw parse_error(lineno, "duplicate section [" + current + "]");
      sections[current];
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw parse_error(lineno, "expected key = value");
    if (current.empty()) throw parse_error(lineno, "key outside of any section");
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!known_keys().at(current).contains(key))
      throw parse_error(lineno, "unknown key '" + key + "' in [" + current + "]");
    auto& sec = sections[current];
    if (sec.contains(key)) throw parse_error(lineno, "duplicate key '" + key + "'");
    sec.emplace(key, Entry{value, lineno});
  }
  return sections;
}

/// Typed access to one section; numbers that do not parse are ParseErrors
/// naming the line, values out of range are ValidationErrors naming the key.
class SectionReader {
 public:
  SectionReader(const Sections& all, const std::string& name) : name_(name) {
    auto it = all.find(name);
    if (it == all.end()) throw Error(Errc::ValidationError, "missing section [" + name + "]");
    entries_ = &it->second;
  }

  bool has(const std::string& key) const { return entries_->contains(key); }

  const Entry& entry(const std::string& key) const {
    auto it = entries_->find(key);
    if (it == entries_->end())
      throw validation_error(key, "required key missing from [" + name_ + "]");
    return it->second;
  }

  std::string text(const std::string& key) const {
    auto v = entry(key).value;
    if (v.empty()) throw validation_error(key, "must not be empty");
    return v;
  }
  std::string text_or(const std::string& key, std::string fallback) const {
    return has(key) ? text(key) : fallback;
  }

  std::int64_t integer(const std::string& key) const {
    const auto& e = entry(key);
    return parse_int(e.value, e.line);
  }

  std::uint64_t unsigned_integer(const std::string& key) const {
    const auto& e = entry(key);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
    if (ec != std::errc() || p != e.value.data() + e.value.size())
      throw parse_error(e.line, "'" + key + "' is not an unsigned integer");
    return v;
  }

  double real(const std::string& key) const {
    const auto& e = entry(key);
    try {
      std::size_t used = 0;
      double v = std::stod(e.value, &used);
      if (used != e.value.size()) throw std::invalid_argument(key);
      return v;
    } catch (const std::exception&) {
      throw parse_error(e.line, "'" + key + "' is not a number");
    }
  }
  double real_or(const std::string& key, double fallback) const {
    return has(key) ? real(key) : fallback;
  }

  Amount positive_amount(const std::string& key) const {
    auto v = integer(key);
    if (v <= 0) throw validation_error(key, "must be a positive amount, got " + std::to_string(v));
    return Amount(v);
  }

  std::vector<std::int64_t> integer_list(const std::string& key) const {
    const auto& e = entry(key);
    std::vector<std::int64_t> out;
    std::istringstream in(e.value);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(parse_int(trim(item), e.line));
    if (out.empty()) throw validation_error(key, "empty list");
    return out;
  }

  std::size_t line(const std::string& key) const { return entry(key).line; }

 private:
  static std::int64_t parse_int(const std::string& s, std::size_t line) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
      throw parse_error(line, "'" + s + "' is not an integer");
    return v;
  }

  std::string name_;
  const std::map<std::string, Entry>* entries_ = nullptr;
};

inline AgentPolicy parse_policy(const std::string& value, std::size_t line) {
  auto colon = value.find(':');
  std::string name = value.substr(0, colon);
  std::string arg = colon == std::string::npos ? "" : value.substr(colon + 1);
  auto number = [&](const char* what) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), v);
    if (arg.empty() || ec != std::errc() || p != arg.data() + arg.size())
      throw parse_error(line, std::string("policy ") + name + " needs an integer " + what);
    return v;
  };
  if (name == "compliant" && arg.empty()) return policy::Compliant{};
  if (name == "defaulting") {
    auto c = number("cycle");
    if (c < 1) throw validation_error("policy", "defaulting cycle must be >= 1");
    return policy::Defaulting{static_cast<int>(c)};
  }
  if (name == "willful") {
    auto t = number("threshold");
    if (t < 0) throw validation_error("policy", "willful threshold must be >= 0");
    return policy::Willful{Amount(t)};
  }
  throw parse_error(line, "unknown agent policy '" + value + "'");
}

}  // namespace detail

/// Parses and validates a scenario. `base_dir` resolves relative file
/// references (path_file, script).
inline Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir = {}) {
  using detail::validation_error;
  auto sections = detail::tokenize(text);
  for (const auto& [name, keys] : detail::known_keys())
    if (!sections.contains(name)) throw Error(Errc::ValidationError, "missing section [" + name + "]");

  Scenario sc;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };

  detail::SectionReader market(sections, "market");
  sc.market.tick_years = market.real("tick_years");
  if (!(sc.market.tick_years > 0.0)) throw validation_error("tick_years", "must be positive");
  sc.market.spot0 = market.real("spot");
  if (!(sc.market.spot0 > 0.0)) throw validation_error("spot", "must be positive");
  sc.market.rate0 = market.real("rate");
  sc.market.volatility = market.real_or("volatility", 0.0);
  if (sc.market.volatility < 0.0) throw validation_error("volatility", "must be non-negative");
  sc.market.drift = market.real_or("drift", 0.0);
  if (market.has("path_file")) sc.path_file = resolve(market.text("path_file"));

  detail::SectionReader con(sections, "contract");
  sc.contract_id = con.text("id");
  sc.start = con.has("start") ? con.integer("start") : 0;
  if (sc.start < 0) throw validation_error("start", "must be non-negative");
  if (con.has("settlement_times")) {
    if (con.has("settlement_interval") || con.has("settlement_count"))
      throw validation_error("settlement_times", "give either a list or interval/count, not both");
    sc.settlement_times = con.integer_list("settlement_times");
  } else {
    auto interval = con.integer("settlement_interval");
    auto count = con.integer("settlement_count");
    if (interval < 1) throw validation_error("settlement_interval", "must be >= 1");
    if (count < 1) throw validation_error("settlement_count", "must be >= 1");
    for (std::int64_t i = 1; i <= count; ++i) sc.settlement_times.push_back(sc.start + i * interval);
  }
  for (std::size_t i = 0; i < sc.settlement_times.size(); ++i) {
    Tick prev = i == 0 ? sc.start : sc.settlement_times[i - 1];
    if (sc.settlement_times[i] <= prev)
      throw validation_error("settlement_times", "must strictly increase after start");
  }
  sc.prefund_window = con.integer("prefund_window");
  if (sc.prefund_window < 1) throw validation_error("prefund_window", "must be >= 1");
  for (std::size_t i = 0; i < sc.settlement_times.size(); ++i) {
    Tick prev = i == 0 ? sc.start : sc.settlement_times[i - 1];
    if (sc.prefund_window >= sc.settlement_times[i] - prev)
      throw validation_error("prefund_window", "must be shorter than every settlement period");
  }
  auto both = [&](const std::string& key, Amount PartyConfig::*field) {
    for (auto [suffix, party] : {std::pair{"_a", &sc.party_a}, std::pair{"_b", &sc.party_b}}) {
      std::string k = key + suffix;
      if (con.has(k) && con.has(key)) throw validation_error(k, "also set via '" + key + "'");
      if (!con.has(k) && !con.has(key)) throw validation_error(k, "required key missing");
      party->*field = con.positive_amount(con.has(k) ? k : key);
    }
  };
  both("margin_buffer", &PartyConfig::margin_buffer);
  both("termination_fee", &PartyConfig::termination_fee);
  if (con.has("pricer")) sc.pricer_version = con.text("pricer");

  const double notional = con.real("notional");
  if (!(notional > 0.0)) throw validation_error("notional", "must be positive");
  const std::string product = con.text("product");
  sc.product.years_per_tick = sc.market.tick_years;
  if (product == "forward") {
    if (con.has("fixed_rate")) throw validation_error("fixed_rate", "not a forward term");
    sc.product.terms = Forward{notional, con.real("strike"), sc.settlement_times.back()};
  } else if (product == "swap") {
    if (con.has("strike")) throw validation_error("strike", "not a swap term");
    VanillaSwap swp{notional, con.real("fixed_rate"), sc.settlement_times, {}};
    Tick prev = sc.start;
    for (Tick t : sc.settlement_times) {
      swp.accruals.push_back(static_cast<double>(t - prev) * sc.market.tick_years);
      prev = t;
    }
    sc.product.terms = std::move(swp);
  } else {
    throw detail::parse_error(con.line("product"), "unknown product '" + product + "'");
  }

  detail::SectionReader agents(sections, "agents");
  sc.party_a.label = agents.text_or("party_a", "party-a");
  sc.party_b.label = agents.text_or("party_b", "party-b");
  if (sc.party_a.label == sc.party_b.label)
    throw validation_error("party_b", "parties need distinct labels");
  for (auto [suffix, party] : {std::pair{"_a", &sc.party_a}, std::pair{"_b", &sc.party_b}}) {
    std::string fk = std::string("funding") + suffix;
    auto f = agents.integer(fk);
    if (f < 0) throw validation_error(fk, "must be non-negative");
    party->funding = Amount(f);
    std::string pk = std::string("policy") + suffix;
    if (agents.has(pk)) party->policy = detail::parse_policy(agents.text(pk), agents.line(pk));
  }

  detail::SectionReader run(sections, "run");
  sc.seed = run.has("seed") ? run.unsigned_integer("seed") : 0;
  if (run.has("mode")) {
    auto m = trigger_mode_from_string(run.text("mode"));
    if (!m) throw detail::parse_error(run.line("mode"), "unknown mode '" + run.text("mode") + "'");
    sc.mode = *m;
  }
  if (run.has("valuation_attempts")) {
    auto n = run.integer("valuation_attempts");
    if (n < 1) throw validation_error("valuation_attempts", "must be >= 1");
    sc.valuation_attempts = static_cast<int>(n);
  }
  if (run.has("script")) sc.script_file = resolve(run.text("script"));

  // Whole-contract invariants, with placeholder party ids.
  try {
    sc.contract_spec(AccountId("a"), AccountId("b")).validate();
  } catch (const Error& e) {
    throw validation_error("contract", e.detail());
  }
  if (!PricerRegistry::with_defaults().contains(sc.pricer_version))
    throw validation_error("pricer", "unknown pricer version '" + sc.pricer_version + "'");
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(io::read_text(path), path.parent_path());
}

/// Driver script: one `tick,event_kind,requesting_party` per line, `#`
/// comments allowed. `resolve` maps a party label to its account.
template <class Resolve>
std::vector<ScriptStep> parse_script(std::string_view text, Resolve&& resolve) {
  std::vector<ScriptStep> steps;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    auto line = detail::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string f_tick, f_kind, f_party, extra;
    if (!std::getline(row, f_tick, ',') || !std::getline(row, f_kind, ',') ||
        !std::getline(row, f_party, ',') || std::getline(row, extra, ','))
      throw detail::parse_error(lineno, "expected tick,event_kind,requesting_party");
    ScriptStep step;
    f_tick = detail::trim(f_tick);
    auto [p, ec] = std::from_chars(f_tick.data(), f_tick.data() + f_tick.size(), step.tick);
    if (ec != std::errc() || p != f_tick.data() + f_tick.size())
      throw detail::parse_error(lineno, "bad tick '" + f_tick + "'");
    auto kind = timeline_event_from_string(detail::trim(f_kind));
    if (!kind) throw detail::parse_error(lineno, "unknown event kind '" + f_kind + "'");
    step.kind = *kind;
    step.requester = resolve(detail::trim(f_party));
    steps.push_back(std::move(step));
  }
  return steps;
}

}  // namespace sdc
