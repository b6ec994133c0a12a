#include "toporisk/continuation.hpp"

#include <cmath>

#include "toporisk/error.hpp"

namespace toporisk {

ContinuationSchedule ContinuationSchedule::standard(double p_start, double p_end, double p_step, double beta_end,
                                                    double beta_step, double tol_start, double tol_end) {
  if (!(p_step > 0.0) || !(beta_step > 0.0)) throw ConfigError("continuation increments must be positive");
  ContinuationSchedule s;
  const int np = static_cast<int>(std::lround((p_end - p_start) / p_step));
  for (int i = 0; i <= np; ++i) s.steps.push_back({p_start + i * p_step, 0.0, 0.0});
  const int nb = static_cast<int>(std::lround(beta_end / beta_step));
  for (int i = 1; i <= nb; ++i) s.steps.push_back({p_end, i * beta_step, 0.0});
  const auto n = s.steps.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double t = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
    s.steps[i].tolerance = tol_start * std::pow(tol_end / tol_start, t);
  }
  s.validate();
  return s;
}

ContinuationSchedule ContinuationSchedule::single(double penalty, double beta, double tolerance) {
  ContinuationSchedule s;
  s.steps.push_back({penalty, beta, tolerance});
  s.validate();
  return s;
}

void ContinuationSchedule::validate() const {
  if (steps.empty()) throw ConfigError("continuation schedule is empty");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    if (!(s.penalty >= 1.0) || !(s.beta >= 0.0) || !(s.tolerance > 0.0))
      throw ConfigError("continuation step has an invalid penalty, beta, or tolerance");
    if (i == 0) continue;
    const auto& prev = steps[i - 1];
    const bool increasing = s.penalty > prev.penalty || (s.penalty == prev.penalty && s.beta > prev.beta);
    if (!increasing || s.penalty < prev.penalty || s.beta < prev.beta)
      throw ConfigError("continuation steps must increase");
    if (!(s.tolerance < prev.tolerance)) throw ConfigError("continuation tolerances must strictly decrease");
  }
}

WeightKind objective_kind(const ProblemSpec& spec) {
  if (spec.kind == ProblemKind::MeanStd) return weights::MeanPlusStd{spec.std_multiple};
  return weights::Mean{};
}

namespace {

class EmptyConstraints : public ConstraintModel {
 public:
  explicit EmptyConstraints(int n) : n_(n) {}
  Eigen::VectorXd values(const Eigen::VectorXd&) override { return {}; }
  Eigen::VectorXd weighted_gradient(const Eigen::VectorXd&) override { return Eigen::VectorXd::Zero(n_); }

 private:
  int n_;
};

}  // namespace

ContinuationResult run_continuation(TopologyProblem& problem, const ProblemSpec& spec,
                                    const ContinuationSchedule& schedule, const MMAConfig& mma,
                                    const AugLagConfig& auglag, const HistoryObserver& observer) {
  schedule.validate();
  const int n = problem.n_elements();
  ContinuationResult result;

  const bool max_c = spec.kind == ProblemKind::MaxCompliance;
  if (!max_c && !(spec.volume_fraction > 0.0 && spec.volume_fraction < 1.0))
    throw ConfigError("volume fraction must lie in (0, 1)");
  if (max_c && !(spec.threshold > 0.0)) throw ConfigError("compliance threshold must be positive");

  result.x = Eigen::VectorXd::Constant(n, max_c ? 1.0 : spec.volume_fraction);

  double reference = 1.0;
  const bool constrained = max_c && std::isfinite(spec.threshold);
  AugLagState state;
  if (max_c) {
    // Full ground mesh: rho(1) = 1 at any penalty or projection.
    problem.set_stage(schedule.steps.front().penalty, schedule.steps.front().beta);
    reference = problem.evaluate(Eigen::VectorXd::Ones(n)).max();
    state = AugLagState::initial(constrained ? problem.scenarios().scenarios() : 0,
                                 constrained ? spec.threshold / reference : 1.0, auglag);
  }
  const Oracle volume_objective = volume_fraction;  // left unscaled
  const WeightKind kind = objective_kind(spec);
  const Oracle volume_constraint = [&](const Eigen::VectorXd& x) {
    Evaluation v = volume_fraction(x);
    v.value -= spec.volume_fraction;
    return v;
  };

  for (std::size_t k = 0; k < schedule.steps.size(); ++k) {
    const auto& step = schedule.steps[k];
    problem.set_stage(step.penalty, step.beta);
    HistoryRecord rec;
    rec.step = static_cast<int>(k);
    rec.penalty = step.penalty;
    rec.beta = step.beta;
    rec.tolerance = step.tolerance;
    const std::uint64_t solves_before = problem.solve_count();

    if (!max_c) {
      const double start = problem.evaluate_with_gradient(result.x, kind).value;
      if (!(start > 0.0)) throw SolverError("objective at the warm start is not positive");
      const double scale = 1.0 / start;
      const Oracle objective = [&](const Eigen::VectorXd& x) {
        Evaluation e = problem.evaluate_with_gradient(x, kind);
        e.value *= scale;
        e.gradient *= scale;
        return e;
      };
      const MMAResult r = mma_minimize(objective, volume_constraint, result.x, mma, step.tolerance);
      result.x = r.x;
      rec.objective_start = start;
      rec.objective_end = r.objective / scale;
      rec.iterations = r.iterations;
      rec.converged = r.converged;
    } else {
      rec.objective_start = volume_fraction(result.x).value;
      state.r = auglag.initial_penalty;
      state.max_step = auglag.initial_step;
      const int primal_before = state.primal_iters;
      EmptyConstraints none(n);
      NormalizedComplianceModel model(problem, reference);
      ConstraintModel& constraints = constrained ? static_cast<ConstraintModel&>(model) : none;
      const AugLagResult r =
          auglag_minimize(volume_objective, constraints, result.x, state, auglag, step.tolerance);
      result.x = r.x;
      result.feasible = !constrained || r.feasible;
      rec.objective_end = volume_fraction(result.x).value;
      rec.iterations = state.primal_iters - primal_before;
      rec.converged = result.feasible;
    }

    const ComplianceStats stats = problem.evaluate(result.x);
    rec.volume = volume_fraction(result.x).value;
    rec.mean = stats.mean;
    rec.stddev = stats.stddev;
    rec.max_compliance = stats.max();
    rec.solves = problem.solve_count() - solves_before;
    result.history.push_back(rec);
    if (observer) observer(rec);
  }
  return result;
}

}  // namespace toporisk
