#pragma once

#include <string>
#include <vector>

#include "toporisk/config.hpp"
#include "toporisk/exporters.hpp"
#include "toporisk/scenarios.hpp"

namespace toporisk {

/// Sampled or file-backed scenarios for the configured mesh. Loads on fixed DOFs are a ConfigError.
ScenarioMatrix build_scenarios(const RunConfig& cfg, const GroundMesh& mesh);

/// Runs the continuation and writes report.json, history.csv, density.vtk,
/// density.pgm (2D) and timing.csv into cfg.output_dir.
RunReport run_command(const RunConfig& cfg);

struct BenchResult {
  std::vector<BenchRow> rows;  // naive/svd x mean/stddev
  double max_value_error = 0.0;     // relative, between methods
  double max_gradient_error = 0.0;  // relative infinity norm
  bool agree = false;               // values within 1e-9
};
/// Full ground mesh, both statistics with gradients by both methods. Writes bench.csv.
BenchResult bench_command(const RunConfig& cfg);

struct GradCheckEntry {
  std::string quantity;
  double max_relative_error = 0.0;
};
struct GradCheckResult {
  std::vector<GradCheckEntry> entries;
  double max_relative_error = 0.0;
  bool passed = false;
};
inline constexpr double kGradCheckTolerance = 1e-4;
inline constexpr int kGradCheckMaxElements = 200;
/// Central differences over x for mu, sigma^2, sigma, w^T C, mu + m sigma and the
/// augmented Lagrangian terms. Writes check_grad.json.
GradCheckResult check_grad_command(const RunConfig& cfg);

/// Writes scenarios.csv for the configured mesh, count and seed.
ScenarioMatrix sample_scenarios_command(const RunConfig& cfg);

}  // namespace toporisk
