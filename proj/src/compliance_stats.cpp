#include "toporisk/compliance_stats.hpp"

#include <cmath>
#include <string>

#include "toporisk/error.hpp"
#include "toporisk/kernels.hpp"

namespace toporisk {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_factorized(const StiffnessSystem& sys) {
  if (!sys.factorized()) throw SolverError("compliance evaluation needs a factorized stiffness system");
}

void require_current(const StiffnessSystem& sys, std::uint64_t generation, const char* what) {
  if (generation != sys.generation() || !sys.factorized())
    throw SolverError(std::string(what) + " is stale: the stiffness system was reassembled");
}

RowMatrix to_row_major_free(const StiffnessSystem& sys, const Eigen::MatrixXd& m) {
  RowMatrix out = m;
  for (int d : sys.mesh().fixed_dofs()) out.row(d).setZero();
  return out;
}

// -tr(A_e^T K_e B_e) for every element.
Eigen::VectorXd element_contraction(const StiffnessSystem& sys, const RowMatrix& a, const RowMatrix& b) {
  const auto& mesh = sys.mesh();
  const auto& ke = sys.element().matrix;
  Eigen::VectorXd out(mesh.n_elements());
  kernels::active_kernels().element_bilinear(ke.data(), static_cast<int>(ke.rows()), mesh.element_dofs(0).data(),
                                             mesh.n_elements(), a.data(), b.data(), static_cast<int>(a.cols()),
                                             out.data());
  return -out;
}

// C_i = sum_r F(r, i) U(loaded_r, i) with U row-major.
Eigen::VectorXd diagonal_compliances(const ScenarioMatrix& f, const Eigen::MatrixXd& u) {
  const int L = f.scenarios();
  const RowMatrix frow = f.block;
  const RowMatrix urow = u;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(L);
  const auto& k = kernels::active_kernels();
  for (int r = 0; r < f.n_loaded(); ++r)
    k.multiply_accumulate(frow.row(r).data(), urow.row(f.loaded_dofs[static_cast<std::size_t>(r)]).data(), L,
                          c.data());
  return c;
}

}  // namespace

ComplianceStats ComplianceStats::from_compliances(Eigen::VectorXd c) {
  ComplianceStats s;
  s.compliances = std::move(c);
  const auto L = s.compliances.size();
  if (L == 0) throw DimensionError("no compliances");
  s.mean = s.compliances.mean();
  if (L > 1) {
    s.variance = (s.compliances.array() - s.mean).square().sum() / static_cast<double>(L - 1);
    s.stddev = std::sqrt(s.variance);
  }
  return s;
}

NaiveMean mean_compliance_naive(const StiffnessSystem& sys, const ScenarioMatrix& f) {
  NaiveEvaluation eval = compliances_naive(sys, f);
  return {eval.stats.mean, std::move(eval.cache)};
}

NaiveEvaluation compliances_naive(const StiffnessSystem& sys, const ScenarioMatrix& f) {
  require_factorized(sys);
  f.validate();
  if (f.n_dofs != sys.n_dofs()) throw DimensionError("scenario matrix DOF count does not match the system");
  const Eigen::MatrixXd u = sys.solve(f.dense());
  NaiveEvaluation eval;
  eval.stats = ComplianceStats::from_compliances(diagonal_compliances(f, u));
  eval.cache.generation = sys.generation();
  eval.cache.displacements = to_row_major_free(sys, u);
  return eval;
}

SvdMean mean_compliance_svd(const StiffnessSystem& sys, const ThinSVD& svd) {
  require_factorized(sys);
  if (svd.n_dofs != sys.n_dofs()) throw DimensionError("SVD DOF count does not match the system");
  const Eigen::MatrixXd us = svd.u_dense() * svd.s.asDiagonal();
  const Eigen::MatrixXd q = sys.solve(us);
  double total = 0.0;
  for (int i = 0; i < svd.rank(); ++i) {
    double quad = 0.0;
    for (std::size_t r = 0; r < svd.loaded_dofs.size(); ++r)
      quad += svd.u_block(static_cast<Eigen::Index>(r), i) * q(svd.loaded_dofs[r], i);
    total += svd.s[i] * quad;
  }
  SvdMean out;
  out.mean = total / svd.scenarios();
  out.workspace.generation = sys.generation();
  out.workspace.scenarios = svd.scenarios();
  out.workspace.q = to_row_major_free(sys, q);
  return out;
}

Eigen::VectorXd mean_gradient_svd(const StiffnessSystem& sys, const TraceWorkspace& ws) {
  require_current(sys, ws.generation, "trace workspace");
  const RowMatrix scaled = ws.q / static_cast<double>(ws.scenarios);
  return element_contraction(sys, scaled, ws.q);
}

SvdEvaluation compliances_svd(const StiffnessSystem& sys, const ScenarioMatrix& f, const ThinSVD& svd) {
  require_factorized(sys);
  if (!svd.matches(f)) throw SolverError("SVD is stale: it does not describe this scenario matrix");
  if (f.n_dofs != sys.n_dofs()) throw DimensionError("scenario matrix DOF count does not match the system");
  const Eigen::MatrixXd us = svd.u_dense() * svd.s.asDiagonal();
  const Eigen::MatrixXd q = sys.solve(us);
  Eigen::MatrixXd q_loaded(f.n_loaded(), svd.rank());
  for (int r = 0; r < f.n_loaded(); ++r) q_loaded.row(r) = q.row(f.loaded_dofs[static_cast<std::size_t>(r)]);
  // G = F^T Q restricted to loaded rows; C_i = G[i, :] . V[i, :]
  const Eigen::MatrixXd g = f.block.transpose() * q_loaded;
  SvdEvaluation eval;
  eval.stats = ComplianceStats::from_compliances(g.cwiseProduct(svd.v).rowwise().sum());
  eval.workspace.generation = sys.generation();
  eval.workspace.scenarios = f.scenarios();
  eval.workspace.q = to_row_major_free(sys, q);
  return eval;
}

double stddev_floor(const ComplianceStats& stats) { return 1e-12 * std::max(1.0, std::abs(stats.mean)); }

namespace {

Eigen::VectorXd std_weights(const ComplianceStats& s) {
  const auto L = s.scenarios();
  if (L < 2 || s.stddev <= stddev_floor(s)) return Eigen::VectorXd::Zero(L);
  return (s.compliances.array() - s.mean).matrix() / (static_cast<double>(L - 1) * s.stddev);
}

void check_auglag(const ComplianceStats& s, const weights::AugLag& a) {
  if (a.lambda.size() != s.scenarios()) throw DimensionError("multiplier count does not match scenario count");
}

}  // namespace

Eigen::VectorXd weight_vector(const ComplianceStats& s, const WeightKind& kind) {
  const auto L = s.scenarios();
  return std::visit(
      overloaded{
          [&](const weights::Mean&) -> Eigen::VectorXd { return Eigen::VectorXd::Constant(L, 1.0 / L); },
          [&](const weights::Variance&) -> Eigen::VectorXd {
            if (L < 2) return Eigen::VectorXd::Zero(L);
            return (2.0 / static_cast<double>(L - 1)) * (s.compliances.array() - s.mean).matrix();
          },
          [&](const weights::StdDev&) -> Eigen::VectorXd { return std_weights(s); },
          [&](const weights::MeanPlusStd& k) -> Eigen::VectorXd {
            return Eigen::VectorXd::Constant(L, 1.0 / L) + k.m * std_weights(s);
          },
          [&](const weights::AugLag& a) -> Eigen::VectorXd {
            check_auglag(s, a);
            const Eigen::VectorXd violation = (s.compliances.array() - a.threshold).max(0.0).matrix();
            return a.lambda + 2.0 * a.r * violation;
          },
      },
      kind);
}

double scalar_value(const ComplianceStats& s, const WeightKind& kind) {
  return std::visit(overloaded{
                        [&](const weights::Mean&) { return s.mean; },
                        [&](const weights::Variance&) { return s.variance; },
                        [&](const weights::StdDev&) { return s.stddev; },
                        [&](const weights::MeanPlusStd& k) { return s.mean + k.m * s.stddev; },
                        [&](const weights::AugLag& a) {
                          check_auglag(s, a);
                          const Eigen::ArrayXd h = s.compliances.array() - a.threshold;
                          return (a.lambda.array() * h).sum() + a.r * h.max(0.0).square().sum();
                        },
                    },
                    kind);
}

Eigen::VectorXd weighted_gradient_naive(const StiffnessSystem& sys, const NaiveCache& cache, const Eigen::VectorXd& w) {
  require_current(sys, cache.generation, "displacement cache");
  if (w.size() != cache.displacements.cols()) throw DimensionError("weight vector length does not match scenario count");
  const RowMatrix weighted = cache.displacements * w.asDiagonal();
  return element_contraction(sys, weighted, cache.displacements);
}

Eigen::VectorXd weighted_gradient_svd(const StiffnessSystem& sys, const TraceWorkspace& ws, const Eigen::VectorXd& w,
                                      const Eigen::MatrixXd& v) {
  require_current(sys, ws.generation, "trace workspace");
  if (w.size() != v.rows()) throw DimensionError("weight vector length does not match the rows of V");
  if (v.cols() != ws.q.cols()) throw DimensionError("V and the trace workspace disagree on the rank");
  const Eigen::MatrixXd x = v.transpose() * w.asDiagonal() * v;
  const RowMatrix qx = ws.q * x;
  return element_contraction(sys, qx, ws.q);
}

Eigen::VectorXd pullback_to_x(const Eigen::VectorXd& grad_rho, const DensityPipeline& pipeline,
                              const Eigen::VectorXd& x) {
  return pipeline.pullback(x, grad_rho);
}

}  // namespace toporisk
