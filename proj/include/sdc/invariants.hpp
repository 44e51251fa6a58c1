// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "sdc/journal.hpp"

namespace sdc::invariants {

// Checks that read only the journal, so they hold for imported journals as
// well as live runs.

inline bool timestamps_monotonic(const std::vector<EventRecord>& records) {
  for (std::size_t i = 1; i < records.size(); ++i)
    if (records[i].timestamp < records[i - 1].timestamp) return false;
  return true;
}

/// Every margin deposit or withdrawal happened while its contract was in
/// AccountsOpen, according to the StateTransition records before it.
inline bool windows_respected(const std::vector<EventRecord>& records) {
  std::map<std::string, std::string> current;
  for (const auto& r : records) {
    if (r.kind == EventKind::StateTransition) {
      current[r.at("contract")] = r.at("to");
      continue;
    }
    const auto memo = r.get("memo");
    const bool access = (r.kind == EventKind::Lock && memo == "deposit_margin") ||
                        (r.kind == EventKind::Release && memo == "withdraw_margin");
    if (!access) continue;
    const auto& s = current[r.at("contract")];
    if (s.rfind("AccountsOpen", 0) != 0) return false;
  }
  return true;
}

/// Replays segregated buckets from Lock/Release records; no release, and in
/// particular no settlement, may exceed the bucket it draws from.
inline bool settlement_bounded(const std::vector<EventRecord>& records) {
  std::map<std::tuple<std::string, std::string, std::string>, long long> buckets;
  for (const auto& r : records) {
    if (r.kind != EventKind::Lock && r.kind != EventKind::Release) continue;
    auto key = std::tuple{r.at("contract"), r.at("party"), r.at("bucket")};
    const long long amount = std::stoll(r.at("amount"));
    if (r.kind == EventKind::Lock) {
      buckets[key] += amount;
    } else {
      if (amount > buckets[key]) return false;
      buckets[key] -= amount;
    }
  }
  return true;
}

/// Cross-party fee movements recorded for one contract.
inline std::size_t fee_forfeits(const std::vector<EventRecord>& records,
                                const std::string& contract) {
  std::size_t n = 0;
  for (const auto& r : records)
    if (r.kind == EventKind::Release && r.get("memo") == "fee_forfeit" &&
        r.get("contract") == contract)
      ++n;
  return n;
}

}  // namespace sdc::invariants
