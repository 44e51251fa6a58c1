// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "sdc/error.hpp"
#include "sdc/io.hpp"
#include "sdc/simulation.hpp"

namespace sdc {

enum class ReportFormat { Csv, Text };

inline std::optional<ReportFormat> report_format_from_string(std::string_view s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "text") return ReportFormat::Text;
  return std::nullopt;
}

namespace detail {
inline std::string fixed(std::optional<double> v) {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}
inline const char* ok(bool b) { return b ? "ok" : "FAILED"; }
}  // namespace detail

/// One header line plus one row per executed cycle.
inline std::string format_csv(const RunReport& r) {
  std::ostringstream os;
  os << "cycle,open_tick,settle_tick,value,settlement_amount,settled_minor,payer,"
        "fee_forfeit_minor,outcome\n";
  for (const auto& c : r.cycles)
    os << c.cycle << ',' << c.open << ',' << c.settle << ',' << detail::fixed(c.value) << ','
       << detail::fixed(c.settlement_amount) << ',' << c.settled << ',' << c.payer << ','
       << c.fee_forfeit << ',' << c.outcome << '\n';
  return os.str();
}

inline std::string format_text(const RunReport& r) {
  std::ostringstream os;
  os << "contract: " << r.contract_id << '\n'
     << "mode: " << r.mode << '\n'
     << "seed: " << r.seed << '\n';
  if (r.cause)
    os << "termination: " << to_string(*r.cause) << " at " << *r.terminated_at << '\n';
  else
    os << "termination: none\n";
  os << "final_state: " << r.final_state << '\n';
  if (r.error) os << "error: " << *r.error << '\n';
  os << "journal_hash: " << r.journal_hash << '\n'
     << "journal_blocks: " << r.journal_blocks << '\n';

  os << "\ncycles:\n";
  for (const auto& c : r.cycles)
    os << "  " << c.cycle << "  open=" << c.open << " settle=" << c.settle
       << " V=" << detail::fixed(c.value) << " F=" << detail::fixed(c.settlement_amount)
       << " settled=" << c.settled << " payer=" << (c.payer.empty() ? "-" : c.payer)
       << " fee_forfeit=" << c.fee_forfeit << " outcome=" << c.outcome << '\n';

  os << "\ntransfers:\n";
  for (const auto& t : r.transfers)
    os << "  cycle=" << t.cycle << " tick=" << t.tick << ' ' << t.purpose << ' ' << t.from
       << " -> " << t.to << ' ' << t.amount << '\n';

  os << "\nbalances:\n";
  for (const auto& p : r.parties)
    os << "  " << p.label << " (" << p.id << ", " << p.policy << ") initial=" << p.initial
       << " free=" << p.free << " margin=" << p.margin << " fee=" << p.fee
       << " wealth=" << p.wealth << '\n';

  const auto& inv = r.invariants;
  os << "\ninvariants:\n"
     << "  conservation: " << detail::ok(inv.conservation) << '\n'
     << "  journal_verifies: " << detail::ok(inv.journal_verifies) << '\n'
     << "  timestamps_monotonic: " << detail::ok(inv.timestamps_monotonic) << '\n'
     << "  windows_respected: " << detail::ok(inv.windows_respected) << '\n'
     << "  settlement_bounded: " << detail::ok(inv.settlement_bounded) << '\n'
     << "  reconciled: " << detail::ok(inv.reconciled) << '\n';
  return os.str();
}

inline std::string format_report(const RunReport& r, ReportFormat f) {
  return f == ReportFormat::Csv ? format_csv(r) : format_text(r);
}

inline void write_report(const RunReport& r, const std::filesystem::path& path, ReportFormat f) {
  io::write_atomic(path, std::string_view(format_report(r, f)));
}

}  // namespace sdc
