// topo-risk: compliance-statistics topology optimization from the command line.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "toporisk/commands.hpp"
#include "toporisk/error.hpp"
#include "toporisk/logging.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kSolver = 3, kGradient = 4 };

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<int> threads;
};

toporisk::RunConfig resolve(const Options& o) {
  toporisk::RunConfig cfg = toporisk::load_run_config(o.config);
  if (o.out) cfg.output_dir = *o.out;
  if (o.seed) cfg.scenarios.seed = *o.seed;
  if (o.method) cfg.method = toporisk::parse_method(*o.method);
  if (o.threads) {
    if (*o.threads < 1) throw toporisk::ConfigError("--threads must be at least 1");
    cfg.threads = *o.threads;
  }
  return cfg;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "JSON run configuration")->required();
  sub->add_option("--out", o.out, "output directory (overrides output_dir)");
  sub->add_option("--seed", o.seed, "scenario sampler seed");
  sub->add_option("--method", o.method, "naive or svd");
  sub->add_option("--threads", o.threads, "cap on solver threads");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topology optimization under many load scenarios"};
  app.require_subcommand(1);
  Options o;
  auto* run = app.add_subcommand("run", "optimize and write report, history and density files");
  auto* bench = app.add_subcommand("bench", "time naive and SVD statistics on the full ground mesh");
  auto* grad = app.add_subcommand("check-grad", "compare gradients against central differences");
  auto* sample = app.add_subcommand("sample-scenarios", "write the sampled scenario matrix as CSV");
  for (auto* sub : {run, bench, grad, sample}) add_common(sub, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    toporisk::init_logging();
    const toporisk::RunConfig cfg = resolve(o);
    if (run->parsed()) {
      toporisk::run_command(cfg);
    } else if (bench->parsed()) {
      const auto r = toporisk::bench_command(cfg);
      std::cout << "method,statistic,value,seconds,solves\n";
      for (const auto& row : r.rows)
        std::cout << row.method << ',' << row.statistic << ',' << toporisk::format_double(row.value) << ','
                  << toporisk::format_double(row.seconds) << ',' << row.solves << '\n';
      if (!r.agree) {
        std::cerr << "naive and SVD values disagree: relative error " << r.max_value_error << '\n';
        return kSolver;
      }
    } else if (grad->parsed()) {
      const auto r = toporisk::check_grad_command(cfg);
      for (const auto& e : r.entries) std::cout << e.quantity << ' ' << e.max_relative_error << '\n';
      std::cout << "max " << r.max_relative_error << '\n';
      if (!r.passed) return kGradient;
    } else if (sample->parsed()) {
      toporisk::sample_scenarios_command(cfg);
    }
  } catch (const toporisk::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const toporisk::DimensionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const toporisk::SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolver;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kSolver;
  }
  return kOk;
}
