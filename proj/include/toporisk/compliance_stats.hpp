#pragma once

#include <cstdint>
#include <variant>

#include <Eigen/Dense>

#include "toporisk/density_pipeline.hpp"
#include "toporisk/mesh_fea.hpp"
#include "toporisk/scenarios.hpp"

// Compliance statistics over a finite scenario set, and their gradients with
// respect to the physical densities. Every quantity has a naive route (one
// solve per scenario) and an SVD route (one solve per singular value).

namespace toporisk {

struct ComplianceStats {
  Eigen::VectorXd compliances;  // C_i = f_i^T K^{-1} f_i
  double mean = 0.0;
  double variance = 0.0;  // sample variance, 1/(L-1); 0 when L == 1
  double stddev = 0.0;

  int scenarios() const { return static_cast<int>(compliances.size()); }
  double max() const { return compliances.maxCoeff(); }
  double min() const { return compliances.minCoeff(); }

  static ComplianceStats from_compliances(Eigen::VectorXd c);
};

/// Displacements u_i = K^{-1} f_i, one row per DOF (row-major n_dofs x L).
/// Rows of fixed DOFs are zeroed: the stiffness derivative vanishes there.
struct NaiveCache {
  std::uint64_t generation = 0;
  RowMatrix displacements;
};

/// Q = K^{-1} U S (row-major n_dofs x n_s) for the trace-form gradients.
struct TraceWorkspace {
  std::uint64_t generation = 0;
  int scenarios = 0;
  RowMatrix q;
};

struct NaiveMean {
  double mean = 0.0;
  NaiveCache cache;
};

struct SvdMean {
  double mean = 0.0;
  TraceWorkspace workspace;
};

struct NaiveEvaluation {
  ComplianceStats stats;
  NaiveCache cache;
};

struct SvdEvaluation {
  ComplianceStats stats;
  TraceWorkspace workspace;
};

/// mu_C = (1/L) sum_i f_i^T K^{-1} f_i with L solves.
NaiveMean mean_compliance_naive(const StiffnessSystem& sys, const ScenarioMatrix& f);

/// mu_C = (1/L) sum_i S_ii^2 U_i^T K^{-1} U_i with n_s solves.
SvdMean mean_compliance_svd(const StiffnessSystem& sys, const ThinSVD& svd);

/// d mu_C / d rho_e = -(1/L) sum_i q_i^T K_e q_i, q_i = Q[:, i].
Eigen::VectorXd mean_gradient_svd(const StiffnessSystem& sys, const TraceWorkspace& ws);

NaiveEvaluation compliances_naive(const StiffnessSystem& sys, const ScenarioMatrix& f);

/// C_i = f_i^T Q V[i, :]^T with Q = K^{-1} U S.
SvdEvaluation compliances_svd(const StiffnessSystem& sys, const ScenarioMatrix& f, const ThinSVD& svd);

namespace weights {
struct Mean {};
struct Variance {};
struct StdDev {};
struct MeanPlusStd {
  double m = 0.0;
};
/// Terms sum_i lambda_i (C_i - C_t) + r sum_i max(C_i - C_t, 0)^2.
struct AugLag {
  Eigen::VectorXd lambda;
  double r = 0.0;
  double threshold = 0.0;
};
}  // namespace weights

using WeightKind = std::variant<weights::Mean, weights::Variance, weights::StdDev, weights::MeanPlusStd, weights::AugLag>;

/// Below this the standard deviation is treated as zero and its weights vanish.
double stddev_floor(const ComplianceStats& stats);

/// Gradient of the scalar function with respect to C, held fixed while the
/// density gradient is assembled.
Eigen::VectorXd weight_vector(const ComplianceStats& stats, const WeightKind& kind);

/// The scalar function itself, evaluated on stats.
double scalar_value(const ComplianceStats& stats, const WeightKind& kind);

/// (grad_rho C^T w)_e = -sum_i w_i u_i^T K_e u_i
Eigen::VectorXd weighted_gradient_naive(const StiffnessSystem& sys, const NaiveCache& cache, const Eigen::VectorXd& w);

/// (grad_rho C^T w)_e = -tr(X Q_e^T K_e Q_e) with X = V^T D_w V.
Eigen::VectorXd weighted_gradient_svd(const StiffnessSystem& sys, const TraceWorkspace& ws, const Eigen::VectorXd& w,
                                      const Eigen::MatrixXd& v);

/// grad_x = (d rho / d x)^T grad_rho through the pipeline's cached forward pass.
Eigen::VectorXd pullback_to_x(const Eigen::VectorXd& grad_rho, const DensityPipeline& pipeline,
                              const Eigen::VectorXd& x);

}  // namespace toporisk
