#include "toporisk/exporters.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "toporisk/error.hpp"

namespace toporisk {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

}  // namespace

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

nlohmann::json to_json(const RunReport& r) {
  using nlohmann::json;
  json j;
  j["problem"] = r.problem;
  j["method"] = r.method;
  j["scenarios"] = r.scenarios;
  j["elements"] = r.n_elements;
  j["threshold"] = std::isfinite(r.threshold) ? json(r.threshold) : json(nullptr);
  j["mean_compliance"] = r.stats.mean;
  j["std_compliance"] = r.stats.stddev;
  j["variance_compliance"] = r.stats.variance;
  j["max_compliance"] = r.stats.max();
  j["min_compliance"] = r.stats.min();
  j["volume"] = r.volume;
  j["feasible"] = r.feasible;
  j["total_solves"] = r.total_solves;
  json hist = json::array();
  for (const auto& h : r.history) {
    hist.push_back({{"step", h.step},
                    {"penalty", h.penalty},
                    {"beta", h.beta},
                    {"tolerance", h.tolerance},
                    {"objective_start", h.objective_start},
                    {"objective_end", h.objective_end},
                    {"volume", h.volume},
                    {"mean", h.mean},
                    {"stddev", h.stddev},
                    {"max_compliance", h.max_compliance},
                    {"solves", h.solves},
                    {"iterations", h.iterations},
                    {"converged", h.converged}});
  }
  j["history"] = std::move(hist);
  return j;
}

void write_report_json(const std::filesystem::path& path, const RunReport& r) {
  auto out = open_out(path);
  out << to_json(r).dump(2) << '\n';
}

void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRecord>& history) {
  auto out = open_out(path);
  out << "step,penalty,beta,tolerance,objective_start,objective_end,volume,mean,stddev,max_compliance,solves,"
         "iterations,converged\n";
  for (const auto& h : history) {
    out << h.step << ',' << format_double(h.penalty) << ',' << format_double(h.beta) << ','
        << format_double(h.tolerance) << ',' << format_double(h.objective_start) << ','
        << format_double(h.objective_end) << ',' << format_double(h.volume) << ',' << format_double(h.mean) << ','
        << format_double(h.stddev) << ',' << format_double(h.max_compliance) << ',' << h.solves << ','
        << h.iterations << ',' << (h.converged ? 1 : 0) << '\n';
  }
}

void write_density_vtk(const std::filesystem::path& path, const GroundMesh& mesh, const Eigen::VectorXd& rho,
                       const Eigen::VectorXd& x) {
  if (rho.size() != mesh.n_elements() || x.size() != mesh.n_elements())
    throw DimensionError("density field does not match the mesh");
  const auto c = mesh.cells();
  const int nz = mesh.dim() == 3 ? c[2] : 1;
  const double h = mesh.element_size();
  auto out = open_out(path);
  out << "# vtk DataFile Version 3.0\n"
      << "topo-risk density\n"
      << "ASCII\n"
      << "DATASET STRUCTURED_POINTS\n"
      << "DIMENSIONS " << c[0] + 1 << ' ' << c[1] + 1 << ' ' << (mesh.dim() == 3 ? nz + 1 : 1) << '\n'
      << "ORIGIN 0 0 0\n"
      << "SPACING " << format_double(h) << ' ' << format_double(h) << ' ' << format_double(h) << '\n'
      << "CELL_DATA " << mesh.n_elements() << '\n';
  auto field = [&](const char* name, const Eigen::VectorXd& v) {
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (Eigen::Index e = 0; e < v.size(); ++e) out << format_double(v[e]) << '\n';
  };
  field("density", rho);
  field("design", x);
}

void write_density_pgm(const std::filesystem::path& path, const GroundMesh& mesh, const Eigen::VectorXd& rho) {
  if (mesh.dim() != 2) throw DimensionError("PGM export is 2D only");
  if (rho.size() != mesh.n_elements()) throw DimensionError("density field does not match the mesh");
  const auto c = mesh.cells();
  auto out = open_out(path);
  out << "P2\n" << c[0] << ' ' << c[1] << "\n255\n";
  for (int r = 0; r < c[1]; ++r) {
    const int j = c[1] - 1 - r;
    for (int i = 0; i < c[0]; ++i) {
      const double v = std::clamp(rho[mesh.element_index(i, j)], 0.0, 1.0);
      out << static_cast<int>(std::lround(255.0 * (1.0 - v))) << (i + 1 < c[0] ? ' ' : '\n');
    }
  }
}

void write_timing_csv(const std::filesystem::path& path, const std::vector<std::pair<std::string, double>>& rows) {
  auto out = open_out(path);
  out << "phase,seconds\n";
  for (const auto& [name, s] : rows) out << name << ',' << format_double(s) << '\n';
}

void write_bench_csv(const std::filesystem::path& path, const std::vector<BenchRow>& rows) {
  auto out = open_out(path);
  out << "method,statistic,value,seconds,solves\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.statistic << ',' << format_double(r.value) << ',' << format_double(r.seconds) << ','
        << r.solves << '\n';
}

}  // namespace toporisk
