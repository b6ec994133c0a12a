#include <random>

#include "doctest.h"
#include "support.hpp"
#include "toporisk/auglag.hpp"
#include "toporisk/continuation.hpp"
#include "toporisk/error.hpp"
#include "toporisk/mma.hpp"
#include "toporisk/problem.hpp"

using namespace toporisk;

namespace {

Oracle volume_le(double frac) {
  return [frac](const Eigen::VectorXd& x) {
    Evaluation v = volume_fraction(x);
    v.value -= frac;
    return v;
  };
}

// Unscaled KKT residual minimized over the multiplier, with no reuse of the solver's value.
double best_kkt(const Eigen::VectorXd& x, const Evaluation& f, const Evaluation& g) {
  auto r = [&](double lam) {
    const Eigen::VectorXd grad = f.gradient + lam * g.gradient;
    const Eigen::VectorXd proj = (x - grad).cwiseMax(0.0).cwiseMin(1.0);
    return std::max({(x - proj).lpNorm<Eigen::Infinity>(), std::max(g.value, 0.0), std::abs(lam * g.value)});
  };
  double best = r(0.0), lam_best = 0.0;
  for (double lam = 1e-6; lam < 1e6; lam *= 1.01)
    if (r(lam) < best) best = r(lam), lam_best = lam;
  double lo = lam_best / 1.01, hi = lam_best * 1.01;
  for (int i = 0; i < 200; ++i) {
    const double a = lo + (hi - lo) / 3, b = hi - (hi - lo) / 3;
    if (r(a) < r(b))
      hi = b;
    else
      lo = a;
  }
  return std::min(best, r(0.5 * (lo + hi)));
}

TopologyProblem small_problem(int nx, int ny, int L, Method method = Method::Svd) {
  auto mesh = GroundMesh::cantilever_2d(nx, ny);
  auto f = sample_cantilever_scenarios(mesh, L, 1);
  return TopologyProblem(std::move(mesh), Material{}, 1.5, PipelineConfig{}, std::move(f), method);
}

}  // namespace

TEST_CASE("MMA: quadratic with an inactive volume constraint") {
  const Oracle f = [](const Eigen::VectorXd& x) {
    return Evaluation{(x.array() - 0.3).square().sum(), 2.0 * (x.array() - 0.3).matrix()};
  };
  const auto r = mma_minimize(f, volume_le(0.4), Eigen::VectorXd::Constant(10, 0.9), MMAConfig{}, 1e-9);
  CHECK(r.converged);
  CHECK((r.x.array() - 0.3).abs().maxCoeff() <= 1e-6);
}

TEST_CASE("MMA: linear objective hits the volume bound") {
  const Oracle f = [](const Eigen::VectorXd& x) { return Evaluation{-x.sum(), -Eigen::VectorXd::Ones(x.size())}; };
  const auto r = mma_minimize(f, volume_le(0.4), Eigen::VectorXd::Constant(10, 0.1), MMAConfig{}, 1e-9);
  CHECK(r.converged);
  CHECK((r.x.array() - 0.4).abs().maxCoeff() <= 1e-6);
  CHECK(std::abs(volume_fraction(r.x).value - 0.4) <= 1e-6);
}

TEST_CASE("MMA: nonconvex instance passes an independent KKT check") {
  std::mt19937_64 g(9);
  const int n = 12;
  const Eigen::VectorXd a = oracle::random_vector(g, n, 0.5, 2.0), b = oracle::random_vector(g, n, 0.0, 1.0);
  const Oracle f = [&](const Eigen::VectorXd& x) {
    const Eigen::ArrayXd d = x.array() - b.array();
    Evaluation e;
    e.value = (a.array() * d.square()).sum() - 0.3 * (4.0 * x.array()).cos().sum();
    e.gradient = (2.0 * a.array() * d + 1.2 * (4.0 * x.array()).sin()).matrix();
    return e;
  };
  const double tol = 1e-6;
  // Every iterate stays in the box.
  bool inside = true;
  const Oracle watched = [&](const Eigen::VectorXd& x) {
    inside = inside && x.minCoeff() >= 0.0 && x.maxCoeff() <= 1.0;
    return f(x);
  };
  const auto r = mma_minimize(watched, volume_le(0.35), Eigen::VectorXd::Constant(n, 0.5), MMAConfig{}, tol);
  CHECK(r.converged);
  CHECK(inside);
  CHECK(best_kkt(r.x, f(r.x), volume_le(0.35)(r.x)) <= 10 * tol);
}

TEST_CASE("MMA approximation is first-order consistent at its center") {
  std::mt19937_64 g(10);
  const int n = 7;
  MMAState state(n, MMAConfig{});
  Eigen::VectorXd x = oracle::random_vector(g, n, 0.1, 0.9);
  for (int it = 0; it < 4; ++it) {
    const Eigen::VectorXd df = oracle::random_vector(g, n), dg = oracle::random_vector(g, n);
    const double fv = 2.5, gv = -0.1;
    const auto ap = state.approximate(x, fv, df, gv, dg);
    CHECK(ap.objective(x) == doctest::Approx(fv).epsilon(1e-12));
    CHECK(ap.constraint(x) == doctest::Approx(gv).epsilon(1e-12));
    CHECK((ap.objective_gradient(x) - df).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((ap.constraint_gradient(x) - dg).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((ap.low.array() < ap.alpha.array()).all());
    CHECK((ap.alpha.array() <= x.array()).all());
    CHECK((x.array() <= ap.beta.array()).all());
    CHECK((ap.beta.array() < ap.upp.array()).all());
    CHECK(ap.alpha.minCoeff() >= 0.0);
    CHECK(ap.beta.maxCoeff() <= 1.0);
    state.advance(x);
    x = ap.solve().first;
  }
}

TEST_CASE("MMA iterates are invariant to objective scaling") {
  std::mt19937_64 g(12);
  const int n = 15;
  const Eigen::VectorXd b = oracle::random_vector(g, n, 0.0, 1.0);
  auto make = [&](double scale) -> Oracle {
    return [&b, scale](const Eigen::VectorXd& x) {
      const Eigen::ArrayXd d = x.array() - b.array();
      return Evaluation{scale * (d.square() * (1.0 + x.array())).sum(),
                        (scale * (2.0 * d * (1.0 + x.array()) + d.square())).matrix()};
    };
  };
  MMAConfig cfg;
  cfg.max_iters = 25;
  const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(n, 0.6);
  const auto r1 = mma_minimize(make(1.0), volume_le(0.3), x0, cfg, 0.0);
  const auto r2 = mma_minimize(make(1234.5), volume_le(0.3), x0, cfg, 0.0);
  CHECK(r1.iterations == r2.iterations);
  CHECK((r1.x - r2.x).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("scaled KKT residual") {
  const Eigen::VectorXd x = (Eigen::VectorXd(3) << 0.0, 0.5, 1.0).finished();
  const Eigen::VectorXd df = (Eigen::VectorXd(3) << 2.0, 0.0, -3.0).finished();
  const Eigen::VectorXd dg = Eigen::VectorXd::Zero(3);
  // Bound-active components contribute no stationarity residual.
  CHECK(scaled_kkt_residual(x, df, -1.0, dg, 0.0) == 0.0);
  const Eigen::VectorXd df2 = (Eigen::VectorXd(3) << 0.0, 0.2, 0.0).finished();
  CHECK(scaled_kkt_residual(x, df2, -1.0, dg, 0.0) == doctest::Approx(0.2));
  CHECK(scaled_kkt_residual(x, df2, 0.3, dg, 0.0) == doctest::Approx(0.3));
  CHECK(scaled_kkt_residual(x, Eigen::VectorXd::Zero(3), -0.5, dg, 2.0) == doctest::Approx(1.0));
  // Large multipliers scale the residual down.
  const double big = scaled_kkt_residual(x, Eigen::VectorXd::Zero(3), -1e-3, dg, 1e5);
  CHECK(big == doctest::Approx(100.0 / (1e5 / 4.0 / 100.0)));
  CHECK_THROWS_AS((MMAConfig{0.5, 0.9, 0.7}.validate()), ConfigError);
}

TEST_CASE("projected gradient step") {
  const Eigen::VectorXd x = (Eigen::VectorXd(3) << 0.0, 0.5, 1.0).finished();
  CHECK(projected_gradient_step(x, Eigen::VectorXd::Zero(3), 1.0, 0.1) == x);
  const Eigen::VectorXd grad = (Eigen::VectorXd(3) << 1.0, -2.0, -1.0).finished();
  const Eigen::VectorXd tiny = projected_gradient_step(x, grad, 1e-3, 0.1);
  CHECK(tiny[0] == 0.0);
  CHECK(tiny[1] == 0.5 - 1e-3 * -2.0);
  CHECK(tiny[2] == 1.0);
  CHECK(projected_gradient_step(x, grad, 10.0, 0.1)[1] == doctest::Approx(0.6));
  CHECK_THROWS_AS(projected_gradient_step(x, grad, 0.0, 0.1), ConfigError);
}

TEST_CASE("projected line search") {
  const Eigen::VectorXd target = (Eigen::VectorXd(2) << 0.2, 0.9).finished();
  const auto f = [&](const Eigen::VectorXd& x) { return (x - target).squaredNorm(); };
  const Eigen::VectorXd x = (Eigen::VectorXd(2) << 0.5, 0.5).finished();
  const Eigen::VectorXd grad = 2.0 * (x - target);
  const auto r = projected_line_search(f, x, f(x), grad, 1.0, 0.1, 1e-4, 30);
  CHECK_FALSE(r.stalled);
  CHECK(r.value < f(x));
  CHECK(r.value <= f(x) + 1e-4 * grad.dot(r.x - x));
  CHECK((r.x - x).lpNorm<Eigen::Infinity>() <= 0.1 + 1e-15);
  // A wrong-signed gradient never gives sufficient decrease.
  const auto s = projected_line_search(f, x, f(x), -grad, 1.0, 0.1, 1e-4, 30);
  CHECK(s.stalled);
  CHECK(s.x == x);
  CHECK(s.step == 0.0);
}

TEST_CASE("augmented Lagrangian matches a brute-force penalty solution") {
  // Two elements, one load: fine grid search over the design for min V s.t. C <= C_t.
  auto mesh = GroundMesh::cantilever_2d(2, 1);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(mesh.n_dofs(), 1);
  d(2 * mesh.node_index(2, 1) + 1, 0) = -1.0;
  TopologyProblem prob(std::move(mesh), Material{}, 0.5, PipelineConfig{0.001, 3.0, 0.0},
                       ScenarioMatrix::from_dense(d), Method::Svd);
  const double c_full = prob.evaluate(Eigen::VectorXd::Ones(2)).max();
  const double ct = 2.0 * c_full;

  double best = 1.0;
  const int grid = 400;
  for (int i = 0; i <= grid; ++i)
    for (int j = 0; j <= grid; ++j) {
      const Eigen::VectorXd x = (Eigen::VectorXd(2) << double(i) / grid, double(j) / grid).finished();
      if (x.mean() >= best) continue;
      if (prob.evaluate(x).max() <= ct) best = x.mean();
    }

  AugLagConfig cfg;
  auto state = AugLagState::initial(1, ct / c_full, cfg);
  NormalizedComplianceModel model(prob, c_full);
  const Oracle vol = volume_fraction;
  const auto r = auglag_minimize(vol, model, Eigen::VectorXd::Ones(2), state, cfg, 1e-6);
  const double c_final = prob.evaluate(r.x).max();
  CHECK(c_final <= 1.01 * ct);
  CHECK(r.feasible);
  CHECK(r.objective == doctest::Approx(best).epsilon(0.02));
  CHECK(r.x.minCoeff() >= 0.0);
  CHECK(r.x.maxCoeff() <= 1.0);
  CHECK((state.lambda.array() >= 0.0).all());
  CHECK(state.dual_iters >= 1);
  CHECK(state.r > cfg.initial_penalty);
  for (std::size_t k = 1; k < r.max_violation.size(); ++k)
    if (r.max_violation[k] > r.max_violation[k - 1]) MESSAGE("violation rose at dual iteration " << k);
}

TEST_CASE("continuation schedule contract") {
  const auto s = ContinuationSchedule::standard();
  REQUIRE(s.steps.size() == 16);
  CHECK(s.steps.front().penalty == 1.0);
  CHECK(s.steps[10].penalty == 6.0);
  CHECK(s.steps[10].beta == 0.0);
  for (int i = 0; i <= 10; ++i) CHECK(s.steps[i].beta == 0.0);
  for (int i = 11; i < 16; ++i) {
    CHECK(s.steps[i].penalty == 6.0);
    CHECK(s.steps[i].beta == 4.0 * (i - 10));
  }
  CHECK(s.steps.front().tolerance == doctest::Approx(1e-3).epsilon(1e-14));
  CHECK(s.steps.back().tolerance == doctest::Approx(1e-4).epsilon(1e-14));
  for (std::size_t i = 1; i < s.steps.size(); ++i) {
    CHECK(s.steps[i].tolerance < s.steps[i - 1].tolerance);
    CHECK(s.steps[i].tolerance / s.steps[i - 1].tolerance ==
          doctest::Approx(s.steps[1].tolerance / s.steps[0].tolerance));
  }
  ContinuationSchedule bad = s;
  std::swap(bad.steps[2], bad.steps[3]);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = s;
  bad.steps[5].tolerance = bad.steps[4].tolerance;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(ContinuationSchedule{}.validate(), ConfigError);
}

TEST_CASE("a single-step schedule is one MMA call") {
  auto p1 = small_problem(8, 4, 12);
  auto p2 = small_problem(8, 4, 12);
  ProblemSpec spec;
  const auto res = run_continuation(p1, spec, ContinuationSchedule::single(1.0, 0.0, 1e-3), MMAConfig{}, AugLagConfig{});
  REQUIRE(res.history.size() == 1);

  p2.set_stage(1.0, 0.0);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(p2.n_elements(), 0.4);
  const double scale = 1.0 / p2.evaluate(x0).mean;
  const Oracle obj = [&](const Eigen::VectorXd& x) {
    Evaluation e = p2.evaluate_with_gradient(x, weights::Mean{});
    e.value *= scale;
    e.gradient *= scale;
    return e;
  };
  const auto direct = mma_minimize(obj, volume_le(0.4), x0, MMAConfig{}, 1e-3);
  CHECK((direct.x - res.x).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(res.history[0].iterations == direct.iterations);
}

TEST_CASE("mean continuation keeps the volume constraint active") {
  auto prob = small_problem(16, 6, 30);
  ProblemSpec spec;
  std::vector<HistoryRecord> seen;
  const auto res = run_continuation(prob, spec, ContinuationSchedule::standard(), MMAConfig{}, AugLagConfig{},
                                    [&](const HistoryRecord& h) { seen.push_back(h); });
  CHECK(seen.size() == 16);
  CHECK(std::abs(volume_fraction(res.x).value - 0.4) <= 1e-3);
  std::uint64_t solves = 0;
  for (const auto& h : res.history) {
    CHECK(h.objective_end <= 1.01 * h.objective_start);
    solves += h.solves;
  }
  CHECK(solves == prob.solve_count());
  CHECK(res.x.minCoeff() >= 0.0);
  CHECK(res.x.maxCoeff() <= 1.0);
}

TEST_CASE("infinite compliance threshold minimizes volume to the lower bound") {
  auto prob = small_problem(8, 4, 5);
  ProblemSpec spec;
  spec.kind = ProblemKind::MaxCompliance;
  const auto res = run_continuation(prob, spec, ContinuationSchedule::single(3.0, 0.0, 1e-4), MMAConfig{}, AugLagConfig{});
  CHECK(res.x.maxCoeff() <= 1e-12);
  CHECK(res.feasible);
}

TEST_CASE("max-compliance continuation on a small cantilever is feasible with V < 1") {
  auto prob = small_problem(16, 6, 30);
  ProblemSpec spec;
  spec.kind = ProblemKind::MaxCompliance;
  prob.set_stage(1.0, 0.0);
  spec.threshold = 1.5 * prob.evaluate(Eigen::VectorXd::Ones(prob.n_elements())).max();
  const auto sched = ContinuationSchedule::standard(1.0, 3.0, 1.0, 4.0, 4.0);
  const auto res = run_continuation(prob, spec, sched, MMAConfig{}, AugLagConfig{});
  CHECK(prob.evaluate(res.x).max() <= 1.01 * spec.threshold);
  CHECK(volume_fraction(res.x).value < 1.0);
}
