#include "toporisk/problem.hpp"

#include "toporisk/error.hpp"

namespace toporisk {

TopologyProblem::TopologyProblem(GroundMesh mesh, const Material& material, double filter_radius,
                                 const PipelineConfig& pipeline, ScenarioMatrix scenarios, Method method,
                                 double svd_tol, int threads)
    : mesh_(std::make_unique<GroundMesh>(std::move(mesh))),
      pipeline_(build_filter(*mesh_, filter_radius), pipeline),
      system_(*mesh_, element_stiffness(material, *mesh_), pipeline.x_min),
      scenarios_(std::move(scenarios)),
      method_(method) {
  scenarios_.validate();
  if (scenarios_.n_dofs != mesh_->n_dofs()) throw ConfigError("scenario matrix DOF count does not match the mesh");
  system_.set_threads(threads);
  if (method_ == Method::Svd) svd_ = thin_svd(scenarios_, svd_tol);
}

void TopologyProblem::set_stage(double penalty, double beta) {
  PipelineConfig cfg = pipeline_.config();
  cfg.penalty = penalty;
  cfg.beta = beta;
  pipeline_.set_config(cfg);
  cached_ = false;
}

void TopologyProblem::prepare(const Eigen::VectorXd& x) {
  if (cached_ && pipeline_.field().x.size() == x.size() && pipeline_.field().x == x) return;
  cached_ = false;
  const DensityField& field = pipeline_.forward(x);
  system_.assemble({field.rho.data(), static_cast<std::size_t>(field.rho.size())});
  system_.factorize();
  if (method_ == Method::Naive) {
    NaiveEvaluation eval = compliances_naive(system_, scenarios_);
    stats_ = std::move(eval.stats);
    naive_cache_ = std::move(eval.cache);
  } else {
    SvdEvaluation eval = compliances_svd(system_, scenarios_, *svd_);
    stats_ = std::move(eval.stats);
    workspace_ = std::move(eval.workspace);
  }
  cached_ = true;
}

ComplianceStats TopologyProblem::evaluate(const Eigen::VectorXd& x) {
  prepare(x);
  return stats_;
}

Eigen::VectorXd TopologyProblem::weighted_gradient(const Eigen::VectorXd& w) {
  if (!cached_) throw SolverError("no evaluated design to differentiate at");
  const Eigen::VectorXd grad_rho = method_ == Method::Naive
                                       ? weighted_gradient_naive(system_, naive_cache_, w)
                                       : weighted_gradient_svd(system_, workspace_, w, svd_->v);
  return pullback_to_x(grad_rho, pipeline_, pipeline_.field().x);
}

Evaluation TopologyProblem::evaluate_with_gradient(const Eigen::VectorXd& x, const WeightKind& kind) {
  prepare(x);
  Evaluation out;
  out.value = scalar_value(stats_, kind);
  if (method_ == Method::Svd && std::holds_alternative<weights::Mean>(kind)) {
    out.gradient = pullback_to_x(mean_gradient_svd(system_, workspace_), pipeline_, x);
  } else {
    out.gradient = weighted_gradient(weight_vector(stats_, kind));
  }
  return out;
}

Evaluation volume_fraction(const Eigen::VectorXd& x) {
  const double n = static_cast<double>(x.size());
  return {x.sum() / n, Eigen::VectorXd::Constant(x.size(), 1.0 / n)};
}

Eigen::VectorXd NormalizedComplianceModel::values(const Eigen::VectorXd& x) {
  return problem_.evaluate(x).compliances / reference_;
}

Eigen::VectorXd NormalizedComplianceModel::weighted_gradient(const Eigen::VectorXd& w) {
  return problem_.weighted_gradient(w / reference_);
}

}  // namespace toporisk
