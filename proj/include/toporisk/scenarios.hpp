#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "toporisk/mesh_fea.hpp"

namespace toporisk {

/// n_dofs x L load matrix, stored as the dense block over its loaded rows.
struct ScenarioMatrix {
  int n_dofs = 0;
  std::vector<int> loaded_dofs;  // strictly increasing
  Eigen::MatrixXd block;         // loaded_dofs.size() x L

  int scenarios() const { return static_cast<int>(block.cols()); }
  int n_loaded() const { return static_cast<int>(loaded_dofs.size()); }

  Eigen::MatrixXd dense() const;
  Eigen::VectorXd column(int i) const;
  void validate() const;

  /// Loaded rows are the rows with at least one nonzero.
  static ScenarioMatrix from_dense(const Eigen::MatrixXd& f);
};

/// Compact SVD F = U diag(S) V^T with U kept on the loaded rows only.
struct ThinSVD {
  int n_dofs = 0;
  std::vector<int> loaded_dofs;
  Eigen::MatrixXd u_block;  // n_loaded x n_s
  Eigen::VectorXd s;        // descending, positive
  Eigen::MatrixXd v;        // L x n_s
  std::uint64_t source_hash = 0;

  int rank() const { return static_cast<int>(s.size()); }
  int scenarios() const { return static_cast<int>(v.rows()); }
  Eigen::MatrixXd u_dense() const;
  /// True if the factors were computed from this F (shape, sparsity and values).
  bool matches(const ScenarioMatrix& f) const;
};

/// Singular values below rel_tol * sigma_1 are dropped. The decomposition
/// works on the n_loaded x L block; zero rows are never materialized.
ThinSVD thin_svd(const ScenarioMatrix& f, double rel_tol = 1e-10);

/// Seedable generator used by the samplers: std::mt19937_64 with explicit
/// uniform (top 53 bits) and Box-Muller normal transforms, so draws do not
/// depend on the standard library's distribution implementations.
class ScenarioRng {
 public:
  explicit ScenarioRng(std::uint64_t seed) : engine_(seed) {}
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double normal();

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// DOFs of "surface" nodes (mesh boundary) that are not fixed, ascending.
std::vector<int> free_surface_dofs(const GroundMesh& mesh);

/// The ten cantilever load vectors F_1..F_10 as columns. F_1..F_3 are unit
/// point loads (F_1 downward at mid right edge, F_2 at 45 degrees on top,
/// F_3 at 45 degrees on the bottom); F_4..F_10 carry standard normal entries
/// on every free surface DOF.
ScenarioMatrix cantilever_load_basis(const GroundMesh& mesh, ScenarioRng& rng);

/// Columns f_i = s_1 F_1 + s_2 F_2 + s_3 F_3 + (1/7) sum_{j>=4} s_j F_j with
/// coefficients.col(i) = s (10 entries).
ScenarioMatrix combine_scenarios(const ScenarioMatrix& basis, const Eigen::MatrixXd& coefficients);

/// s_1..s_3 ~ U(-2, 2), s_4..s_10 ~ N(0, 1); basis drawn first from the same stream.
ScenarioMatrix sample_cantilever_scenarios(const GroundMesh& mesh, int scenarios, std::uint64_t seed);

/// CSV with header "dof,scenario,value", 0-based indices, zeros omitted.
/// The scenario count is max index + 1 unless `scenarios` is given.
ScenarioMatrix load_scenarios_csv(const std::filesystem::path& path, int n_dofs,
                                  std::optional<int> scenarios = std::nullopt);
void write_scenarios_csv(const std::filesystem::path& path, const ScenarioMatrix& f);

}  // namespace toporisk
