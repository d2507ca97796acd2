#include "rdsl/runner.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

int fail_with_error(const std::string& kind, const std::string& message) {
  rdsl::Json err;
  err["error"] = {{"type", kind}, {"message", message}};
  std::cerr << err.dump() << "\n";
  return kind == "config" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rdslab: spectral and statistical experiments for random "
               "torus maps and matrix cocycles"};
  app.set_version_flag("--version",
                       std::string("rdslab ") + rdsl::kArtifactVersion +
                           " (report format " +
                           std::to_string(rdsl::kReportFormatVersion) +
                           ", operator format RDSLOP01)");

  std::string config_path, manifest_path, out_dir, out_file;
  std::int64_t seed = -1;
  int threads = 0;

  auto* run = app.add_subcommand("run", "run one experiment config");
  run->add_option("config", config_path, "experiment config (JSON)")
      ->required();
  run->add_option("--out", out_dir, "output directory (default: timestamped)");
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--threads", threads, "worker thread count");

  auto* suite = app.add_subcommand("suite", "run a manifest of configs with assertions");
  suite->add_option("manifest", manifest_path, "suite manifest (JSON)")
      ->required();
  suite->add_option("--out", out_dir, "output directory");
  suite->add_option("--threads", threads, "worker thread count");

  auto* exp = app.add_subcommand("export-operator",
                                 "assemble and export an operator in the "
                                 "binary format");
  exp->add_option("config", config_path, "experiment config (JSON)")->required();
  exp->add_option("--out", out_file, "output file")->required();

  app.require_subcommand(1);
  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      rdsl::CliOptions opts;
      opts.out_dir = out_dir;
      opts.threads = threads;
      if (seed >= 0) opts.seed_override = std::uint64_t(seed);
      const std::string dir = rdsl::run_config_file(config_path, opts);
      std::cout << dir << "\n";
      return 0;
    }
    if (suite->parsed()) {
      rdsl::CliOptions opts;
      opts.out_dir = out_dir;
      opts.threads = threads;
      const rdsl::SuiteResult result = rdsl::run_suite(manifest_path, opts);
      for (const auto& row : result.rows) {
        std::printf("%-4s %-40s %-34s measured=%s threshold=%s\n",
                    row.pass ? "ok" : "FAIL", row.config.c_str(),
                    row.assertion.c_str(),
                    rdsl::format_double(row.measured).c_str(),
                    row.threshold.c_str());
      }
      std::printf("%zu assertions, %s\n", result.rows.size(),
                  result.all_passed ? "all passed" : "FAILURES");
      return result.all_passed ? 0 : 3;
    }
    if (exp->parsed()) {
      rdsl::export_operator_from_config(config_path, out_file);
      std::cout << out_file << "\n";
      return 0;
    }
  } catch (const rdsl::ConfigError& e) {
    return fail_with_error("config", e.what());
  } catch (const rdsl::UnsupportedError& e) {
    return fail_with_error("unsupported", e.what());
  } catch (const rdsl::BudgetError& e) {
    return fail_with_error("budget", e.what());
  } catch (const std::exception& e) {
    return fail_with_error("internal", e.what());
  }
  return 0;
}
