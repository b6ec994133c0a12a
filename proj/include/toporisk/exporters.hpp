#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "toporisk/compliance_stats.hpp"
#include "toporisk/continuation.hpp"
#include "toporisk/mesh_fea.hpp"

namespace toporisk {

struct RunReport {
  std::string problem;
  std::string method;
  int scenarios = 0;
  int n_elements = 0;
  double threshold = 0.0;
  ComplianceStats stats;  // fresh evaluation at the final design and stage
  double volume = 0.0;
  bool feasible = true;
  std::uint64_t total_solves = 0;
  double wall_seconds = 0.0;  // kept out of report.json so it stays reproducible
  std::vector<HistoryRecord> history;
};

nlohmann::json to_json(const RunReport& r);
void write_report_json(const std::filesystem::path& path, const RunReport& r);
void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRecord>& history);

/// STRUCTURED_POINTS grid with one cell per element, x fastest; scalars "density" and "design".
void write_density_vtk(const std::filesystem::path& path, const GroundMesh& mesh, const Eigen::VectorXd& rho,
                       const Eigen::VectorXd& x);
/// ASCII P2 image, nx by ny, solid black. Pixel row r is element row ny - 1 - r,
/// so the image is upright; pixel column c is element column c.
void write_density_pgm(const std::filesystem::path& path, const GroundMesh& mesh, const Eigen::VectorXd& rho);
void write_timing_csv(const std::filesystem::path& path, const std::vector<std::pair<std::string, double>>& rows);

struct BenchRow {
  std::string method;
  std::string statistic;
  double value = 0.0;
  double seconds = 0.0;
  std::uint64_t solves = 0;
};
void write_bench_csv(const std::filesystem::path& path, const std::vector<BenchRow>& rows);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

}  // namespace toporisk
