#include "toporisk/auglag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "toporisk/error.hpp"

namespace toporisk {

void AugLagConfig::validate() const {
  if (dual_iters < 1 || primal_iters < 1) throw ConfigError("augmented Lagrangian iteration counts must be positive");
  if (!(trust_region > 0.0)) throw ConfigError("trust region must be positive");
  if (!(initial_penalty > 0.0) || !(growth >= 1.0)) throw ConfigError("penalty must be positive and nondecreasing");
  if (!(initial_multiplier >= 0.0)) throw ConfigError("initial multipliers must be nonnegative");
  if (!(initial_step > 0.0) || !(step_growth > 0.0)) throw ConfigError("line search steps must be positive");
}

AugLagState AugLagState::initial(int constraints, double threshold, const AugLagConfig& cfg) {
  AugLagState s;
  s.lambda = Eigen::VectorXd::Constant(constraints, cfg.initial_multiplier);
  s.r = cfg.initial_penalty;
  s.threshold = threshold;
  s.max_step = cfg.initial_step;
  return s;
}

Eigen::VectorXd projected_gradient_step(const Eigen::VectorXd& x, const Eigen::VectorXd& grad, double step,
                                        double trust_region) {
  if (!(step > 0.0)) throw ConfigError("projected gradient step must be positive");
  Eigen::VectorXd out(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double lo = std::max(0.0, x[j] - trust_region);
    const double hi = std::min(1.0, x[j] + trust_region);
    out[j] = std::clamp(x[j] - step * grad[j], lo, hi);
  }
  return out;
}

StepResult projected_line_search(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                 double fx, const Eigen::VectorXd& grad, double max_step, double trust_region,
                                 double armijo, int max_halvings) {
  double step = max_step;
  for (int h = 0; h <= max_halvings; ++h, step *= 0.5) {
    Eigen::VectorXd trial = projected_gradient_step(x, grad, step, trust_region);
    const double decrease = grad.dot(trial - x);
    if (decrease >= 0.0) break;  // no descent possible along the projected path
    const double ft = f(trial);
    if (ft <= fx + armijo * decrease) return {std::move(trial), ft, step, false};
  }
  return {x, fx, 0.0, true};
}

namespace {

double max_violation(const Eigen::VectorXd& c, double threshold) {
  if (c.size() == 0) return 0.0;
  return std::max(0.0, c.maxCoeff() - threshold);
}

double primal_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& grad, const Eigen::VectorXd& lambda) {
  double res = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j)
    res = std::max(res, std::abs(x[j] - std::clamp(x[j] - grad[j], 0.0, 1.0)));
  const double s_d = std::max(1.0, lambda.size() ? lambda.mean() / 100.0 : 0.0);
  return res / s_d;
}

}  // namespace

AugLagResult auglag_minimize(const Oracle& objective, ConstraintModel& constraints, Eigen::VectorXd x0,
                             AugLagState& state, const AugLagConfig& cfg, double tol) {
  cfg.validate();
  if (!(state.threshold > 0.0)) throw ConfigError("compliance threshold must be positive");
  Eigen::VectorXd x = x0.cwiseMax(0.0).cwiseMin(1.0);

  // Lagrangian value at x; leaves the constraint model evaluated at x.
  Eigen::VectorXd last_c;
  auto lagrangian = [&](const Eigen::VectorXd& at, Evaluation* g_out) {
    Evaluation g = objective(at);
    last_c = constraints.values(at);
    if (last_c.size() != state.lambda.size()) throw DimensionError("constraint count does not match multipliers");
    const Eigen::ArrayXd h = last_c.array() - state.threshold;
    const double value = g.value + (state.lambda.array() * h).sum() + state.r * h.max(0.0).square().sum();
    if (g_out) *g_out = std::move(g);
    if (!std::isfinite(value)) throw SolverError("augmented Lagrangian evaluated to a non-finite value");
    return value;
  };

  AugLagResult out;
  bool improved = false;
  for (int k = 0; k < cfg.dual_iters; ++k) {
    Evaluation g;
    double value = lagrangian(x, &g);
    for (int it = 0; it < cfg.primal_iters; ++it) {
      const Eigen::VectorXd m = (last_c.array() - state.threshold).max(0.0).matrix();
      const Eigen::VectorXd w = state.lambda + 2.0 * state.r * m;
      const Eigen::VectorXd wg = constraints.weighted_gradient(w);
      if (wg.size() != x.size()) throw DimensionError("constraint gradient length does not match design length");
      const Eigen::VectorXd grad = g.gradient + wg;
      if (primal_residual(x, grad, state.lambda) <= tol) break;
      ++state.primal_iters;
      StepResult step = projected_line_search([&](const Eigen::VectorXd& t) { return lagrangian(t, nullptr); }, x,
                                              value, grad, state.max_step, cfg.trust_region, cfg.armijo,
                                              cfg.max_halvings);
      if (step.stalled) {
        lagrangian(x, &g);  // restore the model to x
        break;
      }
      x = std::move(step.x);
      state.max_step = cfg.step_growth * step.step;
      value = lagrangian(x, &g);
    }
    const Eigen::VectorXd c = constraints.values(x);
    const double viol = max_violation(c, state.threshold);
    if (!out.max_violation.empty() && viol < out.max_violation.back()) improved = true;
    out.max_violation.push_back(viol);
    state.lambda = (state.lambda.array() + 2.0 * state.r * (c.array() - state.threshold)).max(0.0).matrix();
    state.r *= cfg.growth;
    ++state.dual_iters;
  }

  const Eigen::VectorXd c = constraints.values(x);
  out.objective = objective(x).value;
  out.max_constraint = c.size() ? c.maxCoeff() : -std::numeric_limits<double>::infinity();
  out.feasible = out.max_constraint <= state.threshold * (1.0 + cfg.feasibility_slack);
  out.infeasible_signal = !out.feasible && !improved;
  out.x = std::move(x);
  return out;
}

}  // namespace toporisk
