#include "toporisk/scenarios.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "toporisk/error.hpp"

namespace toporisk {

Eigen::MatrixXd ScenarioMatrix::dense() const {
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n_dofs, block.cols());
  for (int r = 0; r < n_loaded(); ++r) f.row(loaded_dofs[static_cast<std::size_t>(r)]) = block.row(r);
  return f;
}

Eigen::VectorXd ScenarioMatrix::column(int i) const {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n_dofs);
  for (int r = 0; r < n_loaded(); ++r) f[loaded_dofs[static_cast<std::size_t>(r)]] = block(r, i);
  return f;
}

void ScenarioMatrix::validate() const {
  if (block.cols() < 1) throw ConfigError("scenario matrix needs at least one scenario");
  if (block.rows() != n_loaded()) throw DimensionError("scenario block rows do not match loaded DOF list");
  for (std::size_t r = 0; r < loaded_dofs.size(); ++r) {
    if (loaded_dofs[r] < 0 || loaded_dofs[r] >= n_dofs) throw DimensionError("loaded DOF out of range");
    if (r > 0 && loaded_dofs[r] <= loaded_dofs[r - 1]) throw DimensionError("loaded DOF list not increasing");
  }
}

ScenarioMatrix ScenarioMatrix::from_dense(const Eigen::MatrixXd& f) {
  ScenarioMatrix out;
  out.n_dofs = static_cast<int>(f.rows());
  for (Eigen::Index r = 0; r < f.rows(); ++r)
    if ((f.row(r).array() != 0.0).any()) out.loaded_dofs.push_back(static_cast<int>(r));
  out.block.resize(out.n_loaded(), f.cols());
  for (int r = 0; r < out.n_loaded(); ++r) out.block.row(r) = f.row(out.loaded_dofs[static_cast<std::size_t>(r)]);
  return out;
}

Eigen::MatrixXd ThinSVD::u_dense() const {
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n_dofs, u_block.cols());
  for (std::size_t r = 0; r < loaded_dofs.size(); ++r) u.row(loaded_dofs[r]) = u_block.row(static_cast<Eigen::Index>(r));
  return u;
}

namespace {

std::uint64_t fingerprint(const Eigen::MatrixXd& block) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the value bits
  for (Eigen::Index i = 0; i < block.size(); ++i) {
    h ^= std::bit_cast<std::uint64_t>(block.data()[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

bool ThinSVD::matches(const ScenarioMatrix& f) const {
  return n_dofs == f.n_dofs && scenarios() == f.scenarios() && loaded_dofs == f.loaded_dofs &&
         source_hash == fingerprint(f.block);
}

ThinSVD thin_svd(const ScenarioMatrix& f, double rel_tol) {
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw ConfigError("SVD rank tolerance must lie in (0, 1)");
  f.validate();
  if (f.n_loaded() == 0) throw SolverError("scenario matrix is identically zero");

  // Householder QR along the long side, then an SVD of the small triangular
  // factor. With B = block: tall B = Q R, R = Ur S Wr^T gives U = Q Ur, V = Wr;
  // wide B^T = Q R gives U = Wr, V = Q Ur.
  const bool wide = f.block.cols() > f.block.rows();
  const Eigen::MatrixXd tall = wide ? Eigen::MatrixXd(f.block.transpose()) : f.block;
  const Eigen::Index k = tall.cols();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(tall);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  if (sigma.size() == 0 || !(sigma[0] > 0.0)) throw SolverError("scenario matrix is identically zero");
  Eigen::Index rank = 0;
  while (rank < sigma.size() && sigma[rank] >= rel_tol * sigma[0]) ++rank;

  Eigen::MatrixXd long_side = Eigen::MatrixXd::Zero(tall.rows(), rank);
  long_side.topRows(k) = svd.matrixU().leftCols(rank);
  long_side.applyOnTheLeft(qr.householderQ());

  ThinSVD out;
  out.n_dofs = f.n_dofs;
  out.loaded_dofs = f.loaded_dofs;
  out.s = sigma.head(rank);
  out.source_hash = fingerprint(f.block);
  if (wide) {
    out.u_block = svd.matrixV().leftCols(rank);
    out.v = std::move(long_side);
  } else {
    out.u_block = std::move(long_side);
    out.v = svd.matrixV().leftCols(rank);
  }
  return out;
}

double ScenarioRng::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double ScenarioRng::normal() {
  if (spare_) {
    const double z = *spare_;
    spare_.reset();
    return z;
  }
  double u1 = 0.0;
  do {
    u1 = uniform01();
  } while (u1 == 0.0);
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

std::vector<int> free_surface_dofs(const GroundMesh& mesh) {
  std::vector<int> out;
  for (int node : mesh.boundary_nodes())
    for (int d = 0; d < mesh.dim(); ++d) {
      const int dof = mesh.dim() * node + d;
      if (!mesh.is_fixed(dof)) out.push_back(dof);
    }
  return out;
}

namespace {

int rounded(double v) { return static_cast<int>(std::lround(v)); }

}  // namespace

ScenarioMatrix cantilever_load_basis(const GroundMesh& mesh, ScenarioRng& rng) {
  const int dim = mesh.dim();
  const int nx = mesh.cells(0);
  const int ny = mesh.cells(1);
  const int nz = dim == 3 ? mesh.cells(2) : 0;
  const int kmid = rounded(nz / 2.0);

  // Node positions scale the benchmark geometry (160 x 40 in 2D, 60 x 20 x 20 in 3D).
  const int n1 = mesh.node_index(nx, rounded(ny / 2.0), kmid);
  const int n2 = mesh.node_index(rounded(nx / 2.0), ny, kmid);
  const int n3 = mesh.node_index(rounded(dim == 2 ? 0.75 * nx : 2.0 * nx / 3.0), 0, kmid);
  const double c = std::numbers::sqrt2 / 2.0;

  std::vector<int> surface = free_surface_dofs(mesh);
  std::set<int> loaded(surface.begin(), surface.end());
  auto point_dof = [&](int node, int comp) {
    const int dof = dim * node + comp;
    if (mesh.is_fixed(dof)) throw ConfigError("cantilever point load lands on a fixed DOF");
    loaded.insert(dof);
    return dof;
  };
  const int f1y = point_dof(n1, 1);
  const int f2x = point_dof(n2, 0);
  const int f2y = point_dof(n2, 1);
  const int f3x = point_dof(n3, 0);
  const int f3y = point_dof(n3, 1);

  ScenarioMatrix basis;
  basis.n_dofs = mesh.n_dofs();
  basis.loaded_dofs.assign(loaded.begin(), loaded.end());
  std::map<int, int> row_of;
  for (int r = 0; r < basis.n_loaded(); ++r) row_of[basis.loaded_dofs[static_cast<std::size_t>(r)]] = r;

  basis.block = Eigen::MatrixXd::Zero(basis.n_loaded(), 10);
  basis.block(row_of[f1y], 0) = -1.0;
  basis.block(row_of[f2x], 1) = c;
  basis.block(row_of[f2y], 1) = -c;
  basis.block(row_of[f3x], 2) = -c;
  basis.block(row_of[f3y], 2) = -c;
  for (int j = 3; j < 10; ++j)
    for (int dof : surface) basis.block(row_of[dof], j) = rng.normal();
  return basis;
}

ScenarioMatrix combine_scenarios(const ScenarioMatrix& basis, const Eigen::MatrixXd& coefficients) {
  if (basis.scenarios() != 10 || coefficients.rows() != 10)
    throw DimensionError("cantilever scenarios combine exactly ten basis loads");
  Eigen::VectorXd weight = Eigen::VectorXd::Ones(10);
  weight.tail(7).setConstant(1.0 / 7.0);
  ScenarioMatrix out;
  out.n_dofs = basis.n_dofs;
  out.loaded_dofs = basis.loaded_dofs;
  out.block = basis.block * weight.asDiagonal() * coefficients;
  return out;
}

ScenarioMatrix sample_cantilever_scenarios(const GroundMesh& mesh, int scenarios, std::uint64_t seed) {
  if (scenarios < 1) throw ConfigError("scenario count must be at least 1");
  ScenarioRng rng(seed);
  const ScenarioMatrix basis = cantilever_load_basis(mesh, rng);
  Eigen::MatrixXd coeff(10, scenarios);
  for (int i = 0; i < scenarios; ++i) {
    for (int j = 0; j < 3; ++j) coeff(j, i) = rng.uniform(-2.0, 2.0);
    for (int j = 3; j < 10; ++j) coeff(j, i) = rng.normal();
  }
  return combine_scenarios(basis, coeff);
}

namespace {

template <class T>
T parse_field(std::string_view text, const std::string& where) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc() || res.ptr != end) throw ConfigError("malformed scenario CSV field '" + std::string(text) + "' at " + where);
  return value;
}

}  // namespace

ScenarioMatrix load_scenarios_csv(const std::filesystem::path& path, int n_dofs, std::optional<int> scenarios) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("scenario file is empty: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "dof,scenario,value") throw ConfigError("scenario file must start with header dof,scenario,value");

  std::map<std::pair<int, int>, double> entries;
  int max_scenario = -1;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos)
      throw ConfigError("malformed scenario CSV row at " + where);
    const std::string_view view(line);
    const int dof = parse_field<int>(view.substr(0, c1), where);
    const int sc = parse_field<int>(view.substr(c1 + 1, c2 - c1 - 1), where);
    const double value = parse_field<double>(view.substr(c2 + 1), where);
    if (dof < 0 || dof >= n_dofs) throw ConfigError("DOF index " + std::to_string(dof) + " out of range at " + where);
    if (sc < 0) throw ConfigError("negative scenario index at " + where);
    if (!std::isfinite(value)) throw ConfigError("non-finite load value at " + where);
    if (!entries.emplace(std::pair{dof, sc}, value).second)
      throw ConfigError("duplicate (dof, scenario) pair at " + where);
    max_scenario = std::max(max_scenario, sc);
  }
  int count = max_scenario + 1;
  if (scenarios) {
    if (*scenarios <= max_scenario) throw ConfigError("scenario index exceeds the declared scenario count");
    count = *scenarios;
  }
  if (count < 1) throw ConfigError("scenario file contains no scenarios");

  ScenarioMatrix out;
  out.n_dofs = n_dofs;
  std::set<int> rows;
  for (const auto& [key, value] : entries)
    if (value != 0.0) rows.insert(key.first);
  out.loaded_dofs.assign(rows.begin(), rows.end());
  std::map<int, int> row_of;
  for (int r = 0; r < out.n_loaded(); ++r) row_of[out.loaded_dofs[static_cast<std::size_t>(r)]] = r;
  out.block = Eigen::MatrixXd::Zero(out.n_loaded(), count);
  for (const auto& [key, value] : entries)
    if (value != 0.0) out.block(row_of[key.first], key.second) = value;
  return out;
}

void write_scenarios_csv(const std::filesystem::path& path, const ScenarioMatrix& f) {
  f.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write scenario file " + path.string());
  out << "dof,scenario,value\n";
  char buf[64];
  for (int sc = 0; sc < f.scenarios(); ++sc)
    for (int r = 0; r < f.n_loaded(); ++r) {
      const double v = f.block(r, sc);
      if (v == 0.0) continue;
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      out << f.loaded_dofs[static_cast<std::size_t>(r)] << ',' << sc << ',' << std::string_view(buf, res.ptr) << '\n';
    }
  if (!out) throw ConfigError("failed writing scenario file " + path.string());
}

}  // namespace toporisk
