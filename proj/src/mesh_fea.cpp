#include "toporisk/mesh_fea.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "toporisk/error.hpp"

namespace toporisk {

void Material::validate() const {
  if (!(youngs_modulus > 0.0)) throw ConfigError("youngs_modulus must be positive");
  if (!(poissons_ratio > -1.0 && poissons_ratio < 0.5))
    throw ConfigError("poissons_ratio must lie in (-1, 0.5)");
}

GroundMesh::GroundMesh(int dim, std::array<int, 3> cells, double element_size, double thickness)
    : dim_(dim), cells_(cells), element_size_(element_size), thickness_(thickness) {
  if (dim != 2 && dim != 3) throw ConfigError("mesh dimension must be 2 or 3");
  if (dim == 2) cells_[2] = 1;
  for (int a = 0; a < dim; ++a)
    if (cells_[a] < 1) throw ConfigError("mesh needs at least one cell per axis");
  if (!(element_size > 0.0)) throw ConfigError("element_size must be positive");
  if (!(thickness > 0.0)) throw ConfigError("thickness must be positive");

  n_elements_ = cells_[0] * cells_[1] * (dim == 3 ? cells_[2] : 1);
  n_nodes_ = nodes(0) * nodes(1) * (dim == 3 ? nodes(2) : 1);
  fixed_mask_.assign(static_cast<std::size_t>(n_dofs()), 0);

  const int nd = dofs_per_element();
  dof_map_.resize(static_cast<std::size_t>(n_elements_) * static_cast<std::size_t>(nd));
  for (int e = 0; e < n_elements_; ++e) {
    const auto [i, j, k] = element_cell(e);
    std::array<int, 8> corner{};
    corner[0] = node_index(i, j, k);
    corner[1] = node_index(i + 1, j, k);
    corner[2] = node_index(i + 1, j + 1, k);
    corner[3] = node_index(i, j + 1, k);
    if (dim == 3) {
      corner[4] = node_index(i, j, k + 1);
      corner[5] = node_index(i + 1, j, k + 1);
      corner[6] = node_index(i + 1, j + 1, k + 1);
      corner[7] = node_index(i, j + 1, k + 1);
    }
    const int n_corners = dim == 2 ? 4 : 8;
    int* out = dof_map_.data() + static_cast<std::size_t>(e) * static_cast<std::size_t>(nd);
    for (int c = 0; c < n_corners; ++c)
      for (int d = 0; d < dim; ++d) *out++ = dim * corner[c] + d;
  }
}

GroundMesh GroundMesh::cantilever_2d(int nx, int ny, double element_size, double thickness) {
  GroundMesh mesh(2, {nx, ny, 1}, element_size, thickness);
  for (int j = 0; j <= ny; ++j) mesh.fix_node(mesh.node_index(0, j));
  return mesh;
}

GroundMesh GroundMesh::cantilever_3d(int nx, int ny, int nz, double element_size) {
  GroundMesh mesh(3, {nx, ny, nz}, element_size);
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j) mesh.fix_node(mesh.node_index(0, j, k));
  return mesh;
}

int GroundMesh::node_index(int i, int j, int k) const {
  return i + nodes(0) * (j + nodes(1) * k);
}

int GroundMesh::element_index(int i, int j, int k) const {
  return i + cells_[0] * (j + cells_[1] * k);
}

std::array<int, 3> GroundMesh::element_cell(int e) const {
  const int i = e % cells_[0];
  const int rest = e / cells_[0];
  return {i, rest % cells_[1], rest / cells_[1]};
}

std::array<double, 3> GroundMesh::element_centroid(int e) const {
  const auto [i, j, k] = element_cell(e);
  const double h = element_size_;
  return {(i + 0.5) * h, (j + 0.5) * h, dim_ == 3 ? (k + 0.5) * h : 0.0};
}

std::array<double, 3> GroundMesh::node_position(int node) const {
  const int i = node % nodes(0);
  const int rest = node / nodes(0);
  const double h = element_size_;
  return {i * h, (rest % nodes(1)) * h, (rest / nodes(1)) * h};
}

std::vector<int> GroundMesh::boundary_nodes() const {
  std::vector<int> out;
  for (int node = 0; node < n_nodes_; ++node) {
    const int i = node % nodes(0);
    const int rest = node / nodes(0);
    const int j = rest % nodes(1);
    const int k = rest / nodes(1);
    bool on = i == 0 || i == cells_[0] || j == 0 || j == cells_[1];
    if (dim_ == 3) on = on || k == 0 || k == cells_[2];
    if (on) out.push_back(node);
  }
  return out;
}

void GroundMesh::fix_dof(int dof) {
  if (dof < 0 || dof >= n_dofs()) throw ConfigError("fixed DOF " + std::to_string(dof) + " out of range");
  auto& flag = fixed_mask_[static_cast<std::size_t>(dof)];
  if (flag) return;
  flag = 1;
  fixed_dofs_.insert(std::upper_bound(fixed_dofs_.begin(), fixed_dofs_.end(), dof), dof);
}

void GroundMesh::fix_node(int node) {
  for (int d = 0; d < dim_; ++d) fix_dof(dim_ * node + d);
}

void GroundMesh::clear_fixed() {
  fixed_dofs_.clear();
  std::fill(fixed_mask_.begin(), fixed_mask_.end(), 0);
}

namespace {

// Closed-form bilinear plane-stress stiffness of a square element.
Eigen::MatrixXd q4_plane_stress(double E, double nu, double t) {
  const double k[8] = {0.5 - nu / 6.0,         0.125 + nu / 8.0,  -0.25 - nu / 12.0, -0.125 + 3.0 * nu / 8.0,
                       -0.25 + nu / 12.0,      -0.125 - nu / 8.0, nu / 6.0,          0.125 - 3.0 * nu / 8.0};
  static constexpr int idx[8][8] = {{0, 1, 2, 3, 4, 5, 6, 7}, {1, 0, 7, 6, 5, 4, 3, 2}, {2, 7, 0, 5, 6, 3, 4, 1},
                                    {3, 6, 5, 0, 7, 2, 1, 4}, {4, 5, 6, 7, 0, 1, 2, 3}, {5, 4, 3, 2, 1, 0, 7, 6},
                                    {6, 3, 4, 1, 2, 7, 0, 5}, {7, 2, 1, 4, 3, 6, 5, 0}};
  Eigen::MatrixXd ke(8, 8);
  const double scale = E * t / (1.0 - nu * nu);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) ke(r, c) = scale * k[idx[r][c]];
  return ke;
}

// Trilinear hexahedron, 2x2x2 Gauss rule; exact on a cube.
Eigen::MatrixXd hex8(double E, double nu, double h) {
  const double lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  const double mu = E / (2.0 * (1.0 + nu));
  Eigen::Matrix<double, 6, 6> D = Eigen::Matrix<double, 6, 6>::Zero();
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) D(a, b) = lam;
    D(a, a) = lam + 2.0 * mu;
    D(a + 3, a + 3) = mu;
  }
  static constexpr int sign[8][3] = {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
                                     {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1}};
  const double g = 1.0 / std::sqrt(3.0);
  const double jac = h / 2.0;  // d(x)/d(xi) on every axis
  Eigen::MatrixXd ke = Eigen::MatrixXd::Zero(24, 24);
  for (int q = 0; q < 8; ++q) {
    const double xi[3] = {sign[q][0] * g, sign[q][1] * g, sign[q][2] * g};
    Eigen::Matrix<double, 6, 24> B = Eigen::Matrix<double, 6, 24>::Zero();
    for (int n = 0; n < 8; ++n) {
      double dN[3];
      for (int a = 0; a < 3; ++a) {
        double v = sign[n][a] / 8.0;
        for (int b = 0; b < 3; ++b)
          if (b != a) v *= 1.0 + sign[n][b] * xi[b];
        dN[a] = v / jac;
      }
      const int c = 3 * n;
      B(0, c) = dN[0];
      B(1, c + 1) = dN[1];
      B(2, c + 2) = dN[2];
      B(3, c) = dN[1];
      B(3, c + 1) = dN[0];
      B(4, c + 1) = dN[2];
      B(4, c + 2) = dN[1];
      B(5, c) = dN[2];
      B(5, c + 2) = dN[0];
    }
    ke.noalias() += B.transpose() * D * B * (jac * jac * jac);
  }
  return 0.5 * (ke + ke.transpose());
}

}  // namespace

ElementStiffness element_stiffness(const Material& material, const GroundMesh& mesh) {
  material.validate();
  if (mesh.dim() == 2)
    return {q4_plane_stress(material.youngs_modulus, material.poissons_ratio, mesh.thickness())};
  return {hex8(material.youngs_modulus, material.poissons_ratio, mesh.element_size())};
}

struct StiffnessSystem::Factor {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
};

StiffnessSystem::StiffnessSystem(const GroundMesh& mesh, ElementStiffness ke, double density_floor)
    : mesh_(&mesh), ke_(std::move(ke)), density_floor_(density_floor), factor_(std::make_unique<Factor>()) {
  const int nd = mesh.dofs_per_element();
  if (ke_.matrix.rows() != nd || ke_.matrix.cols() != nd)
    throw DimensionError("element matrix does not match mesh element DOF count");

  const int n = mesh.n_dofs();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(mesh.n_elements()) * static_cast<std::size_t>(nd * nd) +
               mesh.fixed_dofs().size());
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto dofs = mesh.element_dofs(e);
    for (int b = 0; b < nd; ++b)
      for (int a = 0; a < nd; ++a)
        if (!mesh.is_fixed(dofs[a]) && !mesh.is_fixed(dofs[b])) trip.emplace_back(dofs[a], dofs[b], 1.0);
  }
  for (int d : mesh.fixed_dofs()) trip.emplace_back(d, d, 1.0);
  K_.resize(n, n);
  K_.setFromTriplets(trip.begin(), trip.end());
  K_.makeCompressed();

  auto slot = [this](int row, int col) {
    const int* begin = K_.innerIndexPtr() + K_.outerIndexPtr()[col];
    const int* end = K_.innerIndexPtr() + K_.outerIndexPtr()[col + 1];
    const int* it = std::lower_bound(begin, end, row);
    return static_cast<int>(it - K_.innerIndexPtr());
  };
  scatter_.assign(static_cast<std::size_t>(mesh.n_elements()) * static_cast<std::size_t>(nd * nd), -1);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto dofs = mesh.element_dofs(e);
    int* out = scatter_.data() + static_cast<std::size_t>(e) * static_cast<std::size_t>(nd * nd);
    for (int b = 0; b < nd; ++b)
      for (int a = 0; a < nd; ++a)
        if (!mesh.is_fixed(dofs[a]) && !mesh.is_fixed(dofs[b])) out[b * nd + a] = slot(dofs[a], dofs[b]);
  }
  for (int d : mesh.fixed_dofs()) diag_slots_fixed_.push_back(slot(d, d));
  factor_->ldlt.analyzePattern(K_);
}

StiffnessSystem::~StiffnessSystem() = default;
StiffnessSystem::StiffnessSystem(StiffnessSystem&& other) noexcept
    : mesh_(other.mesh_),
      ke_(std::move(other.ke_)),
      density_floor_(other.density_floor_),
      K_(std::move(other.K_)),
      scatter_(std::move(other.scatter_)),
      diag_slots_fixed_(std::move(other.diag_slots_fixed_)),
      factor_(std::move(other.factor_)),
      factorized_(other.factorized_),
      generation_(other.generation_),
      threads_(other.threads_),
      solve_count_(other.solve_count_.load()) {}

StiffnessSystem& StiffnessSystem::operator=(StiffnessSystem&& other) noexcept {
  mesh_ = other.mesh_;
  ke_ = std::move(other.ke_);
  density_floor_ = other.density_floor_;
  K_ = std::move(other.K_);
  scatter_ = std::move(other.scatter_);
  diag_slots_fixed_ = std::move(other.diag_slots_fixed_);
  factor_ = std::move(other.factor_);
  factorized_ = other.factorized_;
  generation_ = other.generation_;
  threads_ = other.threads_;
  solve_count_.store(other.solve_count_.load());
  return *this;
}

void StiffnessSystem::assemble(std::span<const double> rho) {
  const int ne = mesh_->n_elements();
  if (static_cast<int>(rho.size()) != ne)
    throw DimensionError("density vector has " + std::to_string(rho.size()) + " entries, mesh has " +
                         std::to_string(ne) + " elements");
  for (int e = 0; e < ne; ++e)
    if (!(rho[static_cast<std::size_t>(e)] >= density_floor_))
      throw SolverError("density of element " + std::to_string(e) + " is below the floor");

  const int nd = mesh_->dofs_per_element();
  double* values = K_.valuePtr();
  std::fill(values, values + K_.nonZeros(), 0.0);
  const double* ke = ke_.matrix.data();  // column-major, symmetric
  for (int e = 0; e < ne; ++e) {
    const double r = rho[static_cast<std::size_t>(e)];
    const int* slots = scatter_.data() + static_cast<std::size_t>(e) * static_cast<std::size_t>(nd * nd);
    for (int q = 0; q < nd * nd; ++q)
      if (slots[q] >= 0) values[slots[q]] += r * ke[q];
  }
  for (int s : diag_slots_fixed_) values[s] = 1.0;
  factorized_ = false;
  ++generation_;
}

void StiffnessSystem::factorize() {
  if (mesh_->fixed_dofs().empty()) throw SolverError("stiffness matrix is singular: no supported DOFs");
  factor_->ldlt.factorize(K_);
  if (factor_->ldlt.info() != Eigen::Success) throw SolverError("sparse factorization failed");
  const auto& d = factor_->ldlt.vectorD();
  const double dmax = d.maxCoeff();
  const double dmin = d.minCoeff();
  if (!(dmin > 0.0) || !(dmin > 1e-14 * dmax))
    throw SolverError("stiffness matrix is not positive definite (insufficient supports or zero densities)");
  factorized_ = true;
}

void StiffnessSystem::require_factorized() const {
  if (!factorized_) throw SolverError("solve called on an unfactorized stiffness system");
}

Eigen::VectorXd StiffnessSystem::solve(const Eigen::VectorXd& rhs) const {
  require_factorized();
  if (rhs.size() != n_dofs()) throw DimensionError("right-hand side length does not match DOF count");
  solve_count_.fetch_add(1);
  return factor_->ldlt.solve(rhs);
}

Eigen::MatrixXd StiffnessSystem::solve(const Eigen::MatrixXd& rhs) const {
  require_factorized();
  if (rhs.rows() != n_dofs()) throw DimensionError("right-hand side rows do not match DOF count");
  const auto cols = rhs.cols();
  Eigen::MatrixXd out(rhs.rows(), cols);
  const int workers = static_cast<int>(std::min<Eigen::Index>(threads_, cols));
  if (workers <= 1) {
    if (cols > 0) out = factor_->ldlt.solve(rhs);
  } else {
    std::vector<std::jthread> pool;
    const Eigen::Index chunk = (cols + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const Eigen::Index begin = w * chunk;
      const Eigen::Index width = std::min(chunk, cols - begin);
      if (width <= 0) break;
      pool.emplace_back([&, begin, width] {
        out.middleCols(begin, width) = factor_->ldlt.solve(rhs.middleCols(begin, width));
      });
    }
  }
  solve_count_.fetch_add(static_cast<std::uint64_t>(cols));
  return out;
}

}  // namespace toporisk
