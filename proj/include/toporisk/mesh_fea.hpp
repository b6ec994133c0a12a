#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace toporisk {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Material {
  double youngs_modulus = 1.0;
  double poissons_ratio = 0.3;

  void validate() const;
};

/// Structured ground mesh of square (2D, plane stress) or cubic (3D) elements.
///
/// Nodes are numbered lexicographically with x fastest, then y, then z.
/// Node (i, j[, k]) has DOFs dim*node + c for c in [0, dim). Elements are
/// numbered the same way over cells.
class GroundMesh {
 public:
  GroundMesh(int dim, std::array<int, 3> cells, double element_size, double thickness = 1.0);

  /// Cantilever benchmark: every DOF on the x = 0 face is fixed.
  static GroundMesh cantilever_2d(int nx, int ny, double element_size = 1.0, double thickness = 1.0);
  static GroundMesh cantilever_3d(int nx, int ny, int nz, double element_size = 1.0);

  int dim() const { return dim_; }
  int cells(int axis) const { return cells_[axis]; }
  const std::array<int, 3>& cells() const { return cells_; }
  int nodes(int axis) const { return cells_[axis] + 1; }
  double element_size() const { return element_size_; }
  double thickness() const { return thickness_; }

  int n_elements() const { return n_elements_; }
  int n_nodes() const { return n_nodes_; }
  int n_dofs() const { return dim_ * n_nodes_; }
  int dofs_per_element() const { return dim_ == 2 ? 8 : 24; }

  int node_index(int i, int j, int k = 0) const;
  int element_index(int i, int j, int k = 0) const;
  std::array<int, 3> element_cell(int e) const;
  std::array<double, 3> element_centroid(int e) const;
  std::array<double, 3> node_position(int node) const;

  /// Global DOFs of element e in local element order (counterclockwise
  /// bottom face, then top face in 3D; dim DOFs per node).
  std::span<const int> element_dofs(int e) const {
    const auto n = static_cast<std::size_t>(dofs_per_element());
    return {dof_map_.data() + static_cast<std::size_t>(e) * n, n};
  }

  /// Nodes on the boundary of the box, ascending node index.
  std::vector<int> boundary_nodes() const;

  void fix_dof(int dof);
  void fix_node(int node);
  void clear_fixed();
  const std::vector<int>& fixed_dofs() const { return fixed_dofs_; }
  bool is_fixed(int dof) const { return fixed_mask_[static_cast<std::size_t>(dof)] != 0; }

 private:
  int dim_;
  std::array<int, 3> cells_;
  double element_size_;
  double thickness_;
  int n_elements_;
  int n_nodes_;
  std::vector<int> dof_map_;
  std::vector<int> fixed_dofs_;
  std::vector<char> fixed_mask_;
};

/// The single element matrix shared by all elements of a uniform mesh.
struct ElementStiffness {
  Eigen::MatrixXd matrix;  // dofs_per_element square
};

ElementStiffness element_stiffness(const Material& material, const GroundMesh& mesh);

/// Global stiffness K = sum_e rho_e K_e with fixed DOFs eliminated by
/// zeroing their rows and columns and placing 1 on the diagonal.
///
/// The sparsity pattern and the symbolic factorization are computed once;
/// assemble() only rewrites values. After factorize(), solve() is const and
/// may be called from several threads.
class StiffnessSystem {
 public:
  StiffnessSystem(const GroundMesh& mesh, ElementStiffness ke, double density_floor = 0.0);
  ~StiffnessSystem();
  StiffnessSystem(StiffnessSystem&&) noexcept;
  StiffnessSystem& operator=(StiffnessSystem&&) noexcept;

  /// Requires rho.size() == n_E and every entry >= density_floor.
  void assemble(std::span<const double> rho);
  void factorize();

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  /// Column-block solve; the counter grows by rhs.cols().
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

  /// Caps the number of threads used by multi-column solves.
  void set_threads(int threads) { threads_ = threads < 1 ? 1 : threads; }

  const Eigen::SparseMatrix<double>& matrix() const { return K_; }
  const GroundMesh& mesh() const { return *mesh_; }
  const ElementStiffness& element() const { return ke_; }
  bool factorized() const { return factorized_; }
  int n_dofs() const { return mesh_->n_dofs(); }

  /// Increments on every assemble(); caches record it to detect staleness.
  std::uint64_t generation() const { return generation_; }

  std::uint64_t solve_count() const { return solve_count_.load(); }
  void reset_solve_count() { solve_count_.store(0); }

 private:
  void require_factorized() const;

  const GroundMesh* mesh_;
  ElementStiffness ke_;
  double density_floor_;
  Eigen::SparseMatrix<double> K_;
  std::vector<int> scatter_;  // element-local entry -> K_ value slot, -1 if eliminated
  std::vector<int> diag_slots_fixed_;
  struct Factor;
  std::unique_ptr<Factor> factor_;
  bool factorized_ = false;
  std::uint64_t generation_ = 0;
  int threads_ = 1;
  mutable std::atomic<std::uint64_t> solve_count_{0};
};

}  // namespace toporisk
