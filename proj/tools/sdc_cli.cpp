// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: validate, run, verify, calibrate.
//
// Exit codes: 0 success / matured, 1 engine or I/O error, 2 usage or input
// error, 3 contract terminated early.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "sdc/sdc.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kEngineError = 1;
constexpr int kInputError = 2;

struct Options {
  std::string scenario;
  std::string journal;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::string format = "text";
  double q = 0.99;
  std::size_t trials = 10000;
  bool verbose = false;
};

std::optional<sdc::Scenario> load(const Options& opt) {
  try {
    auto sc = sdc::load_scenario(opt.scenario);
    if (opt.seed) sc.seed = *opt.seed;
    if (opt.mode) {
      auto m = sdc::trigger_mode_from_string(*opt.mode);
      if (!m) throw sdc::Error(sdc::Errc::InvalidArgument, "unknown mode " + *opt.mode);
      sc.mode = *m;
    }
    return sc;
  } catch (const sdc::Error& e) {
    std::cerr << opt.scenario << ": " << e.what() << '\n';
    return std::nullopt;
  }
}

int cmd_validate(const Options& opt) {
  auto sc = load(opt);
  if (!sc) return kInputError;
  if (opt.verbose)
    std::cerr << "ok: contract " << sc->contract_id << ", " << sc->settlement_times.size()
              << " cycles\n";
  return kOk;
}

int cmd_run(const Options& opt) {
  auto sc = load(opt);
  if (!sc) return kInputError;
  auto format = sdc::report_format_from_string(opt.format);
  if (!format) {
    std::cerr << "unknown format " << opt.format << '\n';
    return kInputError;
  }
  try {
    auto report = sdc::run_simulation(*sc);
    std::filesystem::path out(opt.out);
    std::filesystem::create_directories(out);
    const char* ext = *format == sdc::ReportFormat::Csv ? "report.csv" : "report.txt";
    sdc::write_report(report, out / ext, *format);
    sdc::export_journal(report.journal, out / "journal.bin");
    sdc::io::write_atomic(out / "ledger.csv", std::string_view(report.ledger_csv));
    std::cout << (report.cause ? std::string(sdc::to_string(*report.cause)) : report.final_state)
              << ' ' << report.journal_hash << '\n';
    if (opt.verbose) std::cerr << sdc::format_text(report);
    if (!report.invariants.all()) {
      std::cerr << "invariant check failed; see report\n";
      return kEngineError;
    }
    return sdc::exit_code(report);
  } catch (const sdc::Error& e) {
    std::cerr << e.what() << '\n';
    return e.code() == sdc::Errc::IoError ? kEngineError : kInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << e.what() << '\n';
    return kEngineError;
  }
}

int cmd_verify(const Options& opt) {
  try {
    auto j = sdc::import_journal(opt.journal);
    std::cout << "ok " << j.size() << " blocks " << sdc::to_hex(j.head_hash()) << '\n';
    return kOk;
  } catch (const sdc::Error& e) {
    std::cerr << opt.journal << ": " << e.what() << '\n';
    return kInputError;
  }
}

int cmd_calibrate(const Options& opt) {
  if (!(opt.q > 0.0 && opt.q <= 1.0)) {
    std::cerr << "--q must be in (0,1], got " << opt.q << '\n';
    return kInputError;
  }
  if (opt.trials < 100) {
    std::cerr << "--trials must be at least 100\n";
    return kInputError;
  }
  auto sc = load(opt);
  if (!sc) return kInputError;
  try {
    std::cout << sdc::calibrate_buffer(*sc, opt.q, opt.trials).minor() << '\n';
    return kOk;
  } catch (const sdc::Error& e) {
    std::cerr << e.what() << '\n';
    return kInputError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smart derivative contract lifecycle engine"};
  app.require_subcommand(1);
  Options opt;
  app.add_flag("-v,--verbose", opt.verbose, "Diagnostics on stderr");

  auto* validate = app.add_subcommand("validate", "Parse and validate a scenario file");
  validate->add_option("scenario", opt.scenario)->required();

  auto* run = app.add_subcommand("run", "Run a scenario; writes report, journal and ledger");
  run->add_option("scenario", opt.scenario)->required();
  run->add_option("--seed", opt.seed, "Override the scenario seed");
  run->add_option("--mode", opt.mode, "active|passive|driver")
      ->check(CLI::IsMember({"active", "passive", "driver"}));
  run->add_option("--out", opt.out, "Output directory");
  run->add_option("--format", opt.format, "csv|text")->check(CLI::IsMember({"csv", "text"}));

  auto* verify = app.add_subcommand("verify", "Verify an exported journal's hash chain");
  verify->add_option("journal", opt.journal)->required();

  auto* calibrate = app.add_subcommand("calibrate", "Quantile margin buffer for a scenario");
  calibrate->add_option("scenario", opt.scenario)->required();
  calibrate->add_option("--q", opt.q, "Quantile level in (0,1]");
  calibrate->add_option("--trials", opt.trials, "Simulated one-period settlements");
  calibrate->add_option("--seed", opt.seed, "Override the scenario seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  if (*validate) return cmd_validate(opt);
  if (*run) return cmd_run(opt);
  if (*verify) return cmd_verify(opt);
  if (*calibrate) return cmd_calibrate(opt);
  return kInputError;
}
