#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace toporisk {

struct Evaluation {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

/// Value and gradient at a point of the unit box.
using Oracle = std::function<Evaluation(const Eigen::VectorXd&)>;

struct MMAConfig {
  double s_init = 0.5;
  double s_incr = 1.1;
  double s_decr = 0.7;
  int max_iters = 1000;
  double move = 0.5;    // move limit, fraction of the box width
  double albefa = 0.1;  // keeps alpha/beta away from the asymptotes

  void validate() const;
};

/// Scaled KKT residual at x for min f s.t. g <= 0, 0 <= x <= 1:
///
///   max(|x - clip(x - (df + lambda dg))|_inf, max(g, 0), |lambda g|) / s_d
///   s_d = max(1, (lambda + sum_j z_j) / (n + 1) / 100)
///
/// z_j is |df_j + lambda dg_j| where the box projection is active, else 0.
double scaled_kkt_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& df, double g, const Eigen::VectorXd& dg,
                           double lambda);

/// Convex separable approximation built at one iterate.
struct MMAApproximation {
  Eigen::VectorXd center;  // iterate the approximation was built at
  Eigen::VectorXd low, upp, alpha, beta;
  Eigen::VectorXd p0, q0, p1, q1;
  double r0 = 0.0;
  double r1 = 0.0;

  double objective(const Eigen::VectorXd& x) const;
  Eigen::VectorXd objective_gradient(const Eigen::VectorXd& x) const;
  double constraint(const Eigen::VectorXd& x) const;
  Eigen::VectorXd constraint_gradient(const Eigen::VectorXd& x) const;

  /// Minimizes the objective approximation subject to the constraint
  /// approximation over [alpha, beta]. Returns the minimizer and multiplier.
  std::pair<Eigen::VectorXd, double> solve() const;
};

/// Moving-asymptote state; one instance per optimization run.
class MMAState {
 public:
  MMAState(int n, MMAConfig cfg);

  MMAApproximation approximate(const Eigen::VectorXd& x, double f, const Eigen::VectorXd& df, double g,
                               const Eigen::VectorXd& dg);
  /// Records x as the iterate the last approximation was built at.
  void advance(const Eigen::VectorXd& x);
  int iteration() const { return iter_; }

 private:
  MMAConfig cfg_;
  int iter_ = 0;
  Eigen::VectorXd xold1_, xold2_, low_, upp_;
};

struct MMAResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  double constraint = 0.0;
  double kkt = 0.0;
  double multiplier = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_history;  // one entry per evaluated iterate
};

/// Method of moving asymptotes for min f(x) s.t. g(x) <= 0, x in [0, 1]^n.
/// Stops when scaled_kkt_residual <= tol or after cfg.max_iters updates.
MMAResult mma_minimize(const Oracle& objective, const Oracle& constraint, Eigen::VectorXd x0, const MMAConfig& cfg,
                       double tol);

}  // namespace toporisk
