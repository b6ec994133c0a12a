#include "toporisk/mma.hpp"

#include <algorithm>
#include <cmath>

#include "toporisk/error.hpp"

namespace toporisk {

void MMAConfig::validate() const {
  if (!(s_init > 0.0 && s_init < 1.0)) throw ConfigError("MMA s_init must lie in (0, 1)");
  if (!(s_decr > 0.0 && s_decr < 1.0 && s_incr > 1.0)) throw ConfigError("MMA requires 0 < s_decr < 1 < s_incr");
  if (max_iters < 0) throw ConfigError("MMA max_iters must be nonnegative");
  if (!(move > 0.0 && move <= 1.0)) throw ConfigError("MMA move limit must lie in (0, 1]");
  if (!(albefa > 0.0 && albefa < 1.0)) throw ConfigError("MMA albefa must lie in (0, 1)");
}

double scaled_kkt_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& df, double g, const Eigen::VectorXd& dg,
                           double lambda) {
  double stationarity = 0.0;
  double bound_mult = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double grad = df[j] + lambda * dg[j];
    const double step = x[j] - std::clamp(x[j] - grad, 0.0, 1.0);
    stationarity = std::max(stationarity, std::abs(step));
    if (std::abs(step) < std::abs(grad)) bound_mult += std::abs(grad);
  }
  const double residual = std::max({stationarity, std::max(g, 0.0), std::abs(lambda * g)});
  const double s_d = std::max(1.0, (lambda + bound_mult) / static_cast<double>(x.size() + 1) / 100.0);
  return residual / s_d;
}

double MMAApproximation::objective(const Eigen::VectorXd& x) const {
  return r0 + (p0.array() / (upp - x).array() + q0.array() / (x - low).array()).sum();
}

Eigen::VectorXd MMAApproximation::objective_gradient(const Eigen::VectorXd& x) const {
  return (p0.array() / (upp - x).array().square() - q0.array() / (x - low).array().square()).matrix();
}

double MMAApproximation::constraint(const Eigen::VectorXd& x) const {
  return r1 + (p1.array() / (upp - x).array() + q1.array() / (x - low).array()).sum();
}

Eigen::VectorXd MMAApproximation::constraint_gradient(const Eigen::VectorXd& x) const {
  return (p1.array() / (upp - x).array().square() - q1.array() / (x - low).array().square()).matrix();
}

std::pair<Eigen::VectorXd, double> MMAApproximation::solve() const {
  const Eigen::Index n = low.size();
  Eigen::VectorXd x(n);
  auto primal = [&](double lam) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double sp = std::sqrt(p0[j] + lam * p1[j]);
      const double sq = std::sqrt(q0[j] + lam * q1[j]);
      const double xj = sp + sq > 0.0 ? (sp * low[j] + sq * upp[j]) / (sp + sq) : center[j];
      x[j] = std::clamp(xj, alpha[j], beta[j]);
    }
    return constraint(x);
  };

  // The dual derivative g~(x(lambda)) is nonincreasing in lambda.
  if (primal(0.0) <= 0.0) return {x, 0.0};
  double lo = 0.0;
  const double scale_f = (p0 + q0).sum();
  const double scale_g = (p1 + q1).sum();
  double hi = scale_g > 0.0 ? std::max(scale_f / scale_g, 1e-300) : 1.0;
  int expansions = 0;
  while (primal(hi) > 0.0 && expansions < 200) {
    lo = hi;
    hi *= 2.0;
    ++expansions;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (primal(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  primal(hi);
  return {x, hi};
}

MMAState::MMAState(int n, MMAConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  xold1_ = xold2_ = low_ = upp_ = Eigen::VectorXd::Zero(n);
}

MMAApproximation MMAState::approximate(const Eigen::VectorXd& x, double f, const Eigen::VectorXd& df, double g,
                                       const Eigen::VectorXd& dg) {
  const Eigen::Index n = x.size();
  constexpr double width = 1.0;  // box is [0, 1]
  // Oscillating asymptotes keep contracting (the floor only guards the divisions);
  // growth stops at one box width so a long monotone run cannot flatten the model.
  constexpr double min_gap = 1e-12 * width;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (iter_ < 2) {
      low_[j] = x[j] - cfg_.s_init * width;
      upp_[j] = x[j] + cfg_.s_init * width;
    } else {
      const double trend = (x[j] - xold1_[j]) * (xold1_[j] - xold2_[j]);
      const double gamma = trend < 0.0 ? cfg_.s_decr : (trend > 0.0 ? cfg_.s_incr : 1.0);
      low_[j] = x[j] - gamma * (xold1_[j] - low_[j]);
      upp_[j] = x[j] + gamma * (upp_[j] - xold1_[j]);
      low_[j] = std::clamp(low_[j], x[j] - width, x[j] - min_gap);
      upp_[j] = std::clamp(upp_[j], x[j] + min_gap, x[j] + width);
    }
  }

  MMAApproximation a;
  a.center = x;
  a.low = low_;
  a.upp = upp_;
  a.alpha.resize(n);
  a.beta.resize(n);
  a.p0.resize(n);
  a.q0.resize(n);
  a.p1.resize(n);
  a.q1.resize(n);
  double sum0 = 0.0;
  double sum1 = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    a.alpha[j] = std::max({0.0, low_[j] + cfg_.albefa * (x[j] - low_[j]), x[j] - cfg_.move * width});
    a.beta[j] = std::min({1.0, upp_[j] - cfg_.albefa * (upp_[j] - x[j]), x[j] + cfg_.move * width});
    const double ux2 = (upp_[j] - x[j]) * (upp_[j] - x[j]);
    const double xl2 = (x[j] - low_[j]) * (x[j] - low_[j]);
    const double fp = std::max(df[j], 0.0);
    const double fm = std::max(-df[j], 0.0);
    a.p0[j] = ux2 * (1.001 * fp + 0.001 * fm);
    a.q0[j] = xl2 * (0.001 * fp + 1.001 * fm);
    const double gp = std::max(dg[j], 0.0);
    const double gm = std::max(-dg[j], 0.0);
    a.p1[j] = ux2 * (1.001 * gp + 0.001 * gm);
    a.q1[j] = xl2 * (0.001 * gp + 1.001 * gm);
    sum0 += a.p0[j] / (upp_[j] - x[j]) + a.q0[j] / (x[j] - low_[j]);
    sum1 += a.p1[j] / (upp_[j] - x[j]) + a.q1[j] / (x[j] - low_[j]);
  }
  a.r0 = f - sum0;
  a.r1 = g - sum1;
  return a;
}

void MMAState::advance(const Eigen::VectorXd& x) {
  xold2_ = xold1_;
  xold1_ = x;
  ++iter_;
}

namespace {

void check_finite(const Evaluation& e, Eigen::Index n, const char* what) {
  if (e.gradient.size() != n) throw DimensionError(std::string(what) + " gradient has the wrong length");
  if (!std::isfinite(e.value) || !e.gradient.allFinite())
    throw SolverError(std::string(what) + " oracle returned a non-finite value or gradient");
}

}  // namespace

MMAResult mma_minimize(const Oracle& objective, const Oracle& constraint, Eigen::VectorXd x0, const MMAConfig& cfg,
                       double tol) {
  const auto n = x0.size();
  MMAState state(static_cast<int>(n), cfg);
  MMAResult out;
  out.x = x0.cwiseMax(0.0).cwiseMin(1.0);
  double lambda = 0.0;
  for (;;) {
    const Evaluation f = objective(out.x);
    const Evaluation g = constraint(out.x);
    check_finite(f, n, "objective");
    check_finite(g, n, "constraint");
    out.objective = f.value;
    out.constraint = g.value;
    out.objective_history.push_back(f.value);
    out.kkt = scaled_kkt_residual(out.x, f.gradient, g.value, g.gradient, lambda);
    out.multiplier = lambda;
    if (out.kkt <= tol) {
      out.converged = true;
      break;
    }
    if (out.iterations >= cfg.max_iters) break;
    const MMAApproximation approx = state.approximate(out.x, f.value, f.gradient, g.value, g.gradient);
    state.advance(out.x);
    auto [xnew, lam] = approx.solve();
    out.x = std::move(xnew);
    lambda = lam;
    ++out.iterations;
  }
  return out;
}

}  // namespace toporisk
