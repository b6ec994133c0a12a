#pragma once

#include <cstdint>
#include <memory>
#include <optional>

#include <Eigen/Dense>

#include "toporisk/auglag.hpp"
#include "toporisk/compliance_stats.hpp"
#include "toporisk/density_pipeline.hpp"
#include "toporisk/mesh_fea.hpp"
#include "toporisk/mma.hpp"
#include "toporisk/scenarios.hpp"

namespace toporisk {

enum class Method { Naive, Svd };

/// Mesh, material, density chain, scenarios and solver wired together:
/// x -> rho(x) -> K(rho) -> compliance statistics and their x-gradients.
/// The last evaluated design is cached, so asking again for the same x
/// costs no factorization or solve.
class TopologyProblem {
 public:
  TopologyProblem(GroundMesh mesh, const Material& material, double filter_radius, const PipelineConfig& pipeline,
                  ScenarioMatrix scenarios, Method method, double svd_tol = 1e-10, int threads = 1);
  TopologyProblem(const TopologyProblem&) = delete;
  TopologyProblem& operator=(const TopologyProblem&) = delete;

  ComplianceStats evaluate(const Eigen::VectorXd& x);
  /// Value of the scalar function of C selected by kind, and its gradient over x.
  Evaluation evaluate_with_gradient(const Eigen::VectorXd& x, const WeightKind& kind);
  /// grad_x(C^T w) at the most recently evaluated design.
  Eigen::VectorXd weighted_gradient(const Eigen::VectorXd& w);

  void set_stage(double penalty, double beta);

  const GroundMesh& mesh() const { return *mesh_; }
  int n_elements() const { return mesh_->n_elements(); }
  const ScenarioMatrix& scenarios() const { return scenarios_; }
  const ThinSVD* svd() const { return svd_ ? &*svd_ : nullptr; }
  Method method() const { return method_; }
  DensityPipeline& pipeline() { return pipeline_; }
  const StiffnessSystem& system() const { return system_; }
  std::uint64_t solve_count() const { return system_.solve_count(); }
  const Eigen::VectorXd& densities() const { return pipeline_.field().rho; }

 private:
  void prepare(const Eigen::VectorXd& x);

  std::unique_ptr<GroundMesh> mesh_;
  DensityPipeline pipeline_;
  StiffnessSystem system_;
  ScenarioMatrix scenarios_;
  std::optional<ThinSVD> svd_;
  Method method_;

  bool cached_ = false;
  ComplianceStats stats_;
  NaiveCache naive_cache_;
  TraceWorkspace workspace_;
};

/// Volume fraction mean(x) and its gradient.
Evaluation volume_fraction(const Eigen::VectorXd& x);

/// Compliance constraints C_i(x) / reference for the augmented Lagrangian.
class NormalizedComplianceModel : public ConstraintModel {
 public:
  NormalizedComplianceModel(TopologyProblem& problem, double reference) : problem_(problem), reference_(reference) {}
  Eigen::VectorXd values(const Eigen::VectorXd& x) override;
  Eigen::VectorXd weighted_gradient(const Eigen::VectorXd& w) override;

 private:
  TopologyProblem& problem_;
  double reference_;
};

}  // namespace toporisk
