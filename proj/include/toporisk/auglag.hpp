#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "toporisk/mma.hpp"

namespace toporisk {

/// Per-scenario constraint values C_i(x) and the adjoint product grad_x(C^T w).
class ConstraintModel {
 public:
  virtual ~ConstraintModel() = default;
  /// Evaluates at x; later weighted_gradient() calls refer to this x.
  virtual Eigen::VectorXd values(const Eigen::VectorXd& x) = 0;
  virtual Eigen::VectorXd weighted_gradient(const Eigen::VectorXd& w) = 0;
};

struct AugLagConfig {
  int dual_iters = 10;
  int primal_iters = 50;
  double trust_region = 0.1;
  double initial_penalty = 0.1;
  double growth = 3.0;
  double initial_multiplier = 1.0;
  double initial_step = 1.0;
  double step_growth = 1.5;
  double armijo = 1e-4;
  int max_halvings = 30;
  double feasibility_slack = 0.01;  // relative to the threshold

  void validate() const;
};

struct AugLagState {
  Eigen::VectorXd lambda;
  double r = 0.1;
  double threshold = 0.0;
  double max_step = 1.0;
  int dual_iters = 0;
  int primal_iters = 0;

  static AugLagState initial(int constraints, double threshold, const AugLagConfig& cfg);
};

struct StepResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double step = 0.0;  // accepted step, 0 when stalled
  bool stalled = false;
};

/// x' = clip(x - step grad, max(0, x - trust), min(1, x + trust)).
Eigen::VectorXd projected_gradient_step(const Eigen::VectorXd& x, const Eigen::VectorXd& grad, double step,
                                        double trust_region);

/// Backtracking from max_step, halving until
/// f(x') <= f(x) + armijo * grad^T (x' - x). After max_halvings failures x is
/// returned unchanged with stalled set.
StepResult projected_line_search(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                 double fx, const Eigen::VectorXd& grad, double max_step, double trust_region,
                                 double armijo = 1e-4, int max_halvings = 30);

struct AugLagResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  double max_constraint = 0.0;
  std::vector<double> max_violation;  // after each dual iteration
  bool feasible = false;
  bool infeasible_signal = false;  // violation never decreased over the run
};

/// Minimizes g(x) s.t. C_i(x) <= threshold over the unit box with the
/// augmented Lagrangian g + sum lambda_i h_i + r sum max(h_i, 0)^2,
/// h = C - threshold. Each dual iteration runs up to primal_iters projected
/// gradient steps, then lambda <- max(0, lambda + 2 r h) and r <- growth r.
AugLagResult auglag_minimize(const Oracle& objective, ConstraintModel& constraints, Eigen::VectorXd x0,
                             AugLagState& state, const AugLagConfig& cfg, double tol);

}  // namespace toporisk
