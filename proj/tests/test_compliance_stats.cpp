#include <random>

#include "doctest.h"
#include "support.hpp"
#include "toporisk/compliance_stats.hpp"
#include "toporisk/error.hpp"
#include "toporisk/problem.hpp"

using namespace toporisk;

namespace {

std::vector<double> as_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

struct Instance {
  GroundMesh mesh;
  Eigen::VectorXd rho;
  ScenarioMatrix f;
};

StiffnessSystem system_for(const GroundMesh& m, const Eigen::VectorXd& rho) {
  StiffnessSystem sys(m, element_stiffness({}, m));
  sys.assemble(as_vec(rho));
  sys.factorize();
  return sys;
}

// Random loads of the given rank on free DOFs.
ScenarioMatrix random_scenarios(std::mt19937_64& g, const GroundMesh& m, int L, int rank, double density = 0.3) {
  std::normal_distribution<double> n;
  std::bernoulli_distribution pick(density);
  std::vector<int> rows;
  for (int d = 0; d < m.n_dofs(); ++d)
    if (!m.is_fixed(d) && pick(g)) rows.push_back(d);
  if (static_cast<int>(rows.size()) < rank) rows = {};
  if (rows.empty())
    for (int d = 0; d < m.n_dofs(); ++d)
      if (!m.is_fixed(d)) rows.push_back(d);
  Eigen::MatrixXd a(rows.size(), rank), b(rank, L);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = n(g);
  for (int i = 0; i < b.size(); ++i) b.data()[i] = n(g);
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(m.n_dofs(), L);
  const Eigen::MatrixXd block = a * b;
  for (std::size_t r = 0; r < rows.size(); ++r) full.row(rows[r]) = block.row(r);
  return ScenarioMatrix::from_dense(full);
}

Instance random_instance(std::mt19937_64& g, int nx, int ny, int L, int rank) {
  auto m = GroundMesh::cantilever_2d(nx, ny);
  Eigen::VectorXd rho = oracle::random_vector(g, m.n_elements(), 0.05, 1.0);
  auto f = random_scenarios(g, m, L, rank);
  return {std::move(m), std::move(rho), std::move(f)};
}

Eigen::VectorXd dense_compliances(const Instance& in) {
  const Eigen::MatrixXd ke = element_stiffness({}, in.mesh).matrix;
  const Eigen::MatrixXd kinv = oracle::dense_stiffness(in.mesh, ke, in.rho).inverse();
  const Eigen::MatrixXd F = in.f.dense();
  return (F.transpose() * kinv * F).diagonal();
}

// C(rho) by the naive route on a fresh system.
Eigen::VectorXd compliances_at(const GroundMesh& m, const Eigen::VectorXd& rho, const ScenarioMatrix& f) {
  return compliances_naive(system_for(m, rho), f).stats.compliances;
}

}  // namespace

TEST_CASE("hand-computed compliances on an identity system") {
  GroundMesh m(2, {1, 1, 1}, 1.0);
  for (int d = 0; d < m.n_dofs(); ++d) m.fix_dof(d);
  const auto sys = system_for(m, Eigen::VectorXd::Ones(1));
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(8, 2);
  d(0, 0) = 1.0;
  d(0, 1) = 2.0;
  CHECK(mean_compliance_naive(sys, ScenarioMatrix::from_dense(d)).mean == doctest::Approx(2.5).epsilon(1e-15));
  d.setZero();
  d(0, 0) = 1.0;
  d(1, 1) = 3.0;
  const auto stats = compliances_naive(sys, ScenarioMatrix::from_dense(d)).stats;
  CHECK(stats.compliances[0] == doctest::Approx(1.0));
  CHECK(stats.compliances[1] == doctest::Approx(9.0));
  CHECK(stats.mean == doctest::Approx(5.0));
  CHECK(stats.variance == doctest::Approx(32.0));
}

TEST_CASE("naive routes match the dense-inverse oracle") {
  std::mt19937_64 g(17);
  for (int trial = 0; trial < 4; ++trial) {
    const auto in = random_instance(g, 4, 2, 9, 4);
    const auto sys = system_for(in.mesh, in.rho);
    const Eigen::VectorXd ref = dense_compliances(in);
    const auto stats = compliances_naive(sys, in.f).stats;
    CHECK(oracle::rel_inf(ref, stats.compliances) <= 1e-10);
    CHECK(std::abs(mean_compliance_naive(sys, in.f).mean - ref.mean()) <= 1e-10 * ref.mean());
    CHECK(std::abs(stats.mean - stats.compliances.mean()) <= 1e-12 * stats.mean);
    const double var = (stats.compliances.array() - stats.mean).square().sum() / (stats.scenarios() - 1);
    CHECK(std::abs(stats.variance - var) <= 1e-12 * var);
    CHECK(stats.stddev == std::sqrt(stats.variance));
    CHECK(stats.min() >= 0.0);
  }
}

TEST_CASE("identical columns") {
  std::mt19937_64 g(2);
  auto in = random_instance(g, 5, 3, 1, 1);
  const Eigen::VectorXd f1 = in.f.dense().col(0);
  Eigen::MatrixXd dup(in.mesh.n_dofs(), 6);
  for (int i = 0; i < 6; ++i) dup.col(i) = f1;
  const auto f = ScenarioMatrix::from_dense(dup);
  auto sys = system_for(in.mesh, in.rho);
  const double c = f1.dot(sys.solve(f1));
  CHECK(mean_compliance_naive(sys, f).mean == doctest::Approx(c).epsilon(1e-12));
  const auto svd = thin_svd(f);
  CHECK(svd.rank() == 1);
  sys.reset_solve_count();
  const auto sm = mean_compliance_svd(sys, svd);
  CHECK(sys.solve_count() == 1);
  CHECK(sm.mean == doctest::Approx(c).epsilon(1e-12));
  const auto ev = compliances_svd(sys, f, svd);
  for (int i = 0; i < 6; ++i) CHECK(ev.stats.compliances[i] == doctest::Approx(c).epsilon(1e-12));
  CHECK(std::abs(ev.stats.variance) <= 1e-20 * c * c);
  CHECK(compliances_naive(sys, f).stats.variance <= 1e-20 * c * c);
  // Degenerate dispersion: std weights vanish.
  CHECK(weight_vector(compliances_naive(sys, f).stats, weights::StdDev{}).isZero(0.0));
}

TEST_CASE("SVD routes agree with naive routes") {
  std::mt19937_64 g(23);
  for (auto [L, rank] : std::vector<std::pair<int, int>>{{5, 1}, {50, 3}, {50, 10}, {300, 7}}) {
    const auto in = random_instance(g, 10, 5, L, rank);
    auto sys = system_for(in.mesh, in.rho);
    const auto svd = thin_svd(in.f);
    CHECK(svd.rank() == std::min(rank, L));

    sys.reset_solve_count();
    const auto nv = compliances_naive(sys, in.f);
    CHECK(sys.solve_count() == static_cast<std::uint64_t>(L));
    sys.reset_solve_count();
    const auto sv = compliances_svd(sys, in.f, svd);
    CHECK(sys.solve_count() == static_cast<std::uint64_t>(svd.rank()));

    CHECK(oracle::rel_inf(nv.stats.compliances, sv.stats.compliances) <= 1e-9);
    CHECK(std::abs(nv.stats.mean - sv.stats.mean) <= 1e-9 * nv.stats.mean);
    CHECK(std::abs(nv.stats.variance - sv.stats.variance) <= 1e-9 * nv.stats.variance);
    CHECK(std::abs(nv.stats.stddev - sv.stats.stddev) <= 1e-9 * nv.stats.stddev);

    sys.reset_solve_count();
    const auto mn = mean_compliance_naive(sys, in.f);
    const auto ms = mean_compliance_svd(sys, svd);
    CHECK(sys.solve_count() == static_cast<std::uint64_t>(L + svd.rank()));
    CHECK(std::abs(mn.mean - ms.mean) <= 1e-9 * mn.mean);

    sys.reset_solve_count();
    const Eigen::VectorXd w_mean = Eigen::VectorXd::Constant(L, 1.0 / L);
    const Eigen::VectorXd g_mean_naive = weighted_gradient_naive(sys, mn.cache, w_mean);
    const Eigen::VectorXd g_mean_svd = mean_gradient_svd(sys, ms.workspace);
    CHECK(oracle::rel_inf(g_mean_naive, g_mean_svd) <= 1e-9);
    CHECK(oracle::rel_inf(g_mean_naive, weighted_gradient_svd(sys, sv.workspace, w_mean, svd.v)) <= 1e-9);

    std::vector<WeightKind> kinds{weights::Mean{}, weights::Variance{}, weights::StdDev{}, weights::MeanPlusStd{2.0}};
    weights::AugLag al;
    al.lambda = oracle::random_vector(g, L, 0.0, 2.0);
    al.r = 0.5;
    al.threshold = nv.stats.mean;
    kinds.push_back(al);
    for (const auto& kind : kinds) {
      const Eigen::VectorXd w = weight_vector(nv.stats, kind);
      CHECK(oracle::rel_inf(w, weight_vector(sv.stats, kind)) <= 1e-9);
      const Eigen::VectorXd gn = weighted_gradient_naive(sys, nv.cache, w);
      const Eigen::VectorXd gs = weighted_gradient_svd(sys, sv.workspace, w, svd.v);
      CHECK((gn - gs).lpNorm<Eigen::Infinity>() <= 1e-9 * gn.lpNorm<Eigen::Infinity>());
    }
    const Eigen::VectorXd w = oracle::random_vector(g, L);
    const Eigen::VectorXd gn = weighted_gradient_naive(sys, nv.cache, w);
    CHECK((gn - weighted_gradient_svd(sys, sv.workspace, w, svd.v)).lpNorm<Eigen::Infinity>() <=
          1e-9 * gn.lpNorm<Eigen::Infinity>());
    CHECK(sys.solve_count() == 0);  // gradients reuse the cached solves
  }
}

TEST_CASE("gradients match finite differences over rho") {
  std::mt19937_64 g(31);
  const auto in = random_instance(g, 6, 3, 12, 4);
  auto sys = system_for(in.mesh, in.rho);
  const auto svd = thin_svd(in.f);
  const auto nv = compliances_naive(sys, in.f);
  const auto ms = mean_compliance_svd(sys, svd);
  const Eigen::VectorXd w = oracle::random_vector(g, in.f.scenarios());
  const Eigen::VectorXd gw = weighted_gradient_naive(sys, nv.cache, w);
  const Eigen::VectorXd gm = mean_gradient_svd(sys, ms.workspace);
  Eigen::VectorXd fd_w(in.rho.size()), fd_m(in.rho.size());
  const double h = 1e-6;
  for (int e = 0; e < in.rho.size(); ++e) {
    Eigen::VectorXd rp = in.rho, rm = in.rho;
    rp[e] += h;
    rm[e] -= h;
    const Eigen::VectorXd cp = compliances_at(in.mesh, rp, in.f), cm = compliances_at(in.mesh, rm, in.f);
    fd_w[e] = (w.dot(cp) - w.dot(cm)) / (2 * h);
    fd_m[e] = (cp.mean() - cm.mean()) / (2 * h);
  }
  CHECK(oracle::rel_inf(fd_w, gw) <= 1e-5);
  CHECK(oracle::rel_inf(fd_m, gm) <= 1e-5);
}

TEST_CASE("single element, single load: gradient is -u^T Ke u") {
  auto m = GroundMesh::cantilever_2d(1, 1);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m.n_dofs(), 1);
  d(2 * m.node_index(1, 1) + 1, 0) = -1.0;
  d(2 * m.node_index(1, 0), 0) = 0.5;
  const auto f = ScenarioMatrix::from_dense(d);
  const auto sys = system_for(m, Eigen::VectorXd::Constant(1, 0.7));
  const Eigen::VectorXd u = sys.solve(Eigen::VectorXd(d.col(0)));
  Eigen::VectorXd ue(8);
  for (int a = 0; a < 8; ++a) ue[a] = m.is_fixed(m.element_dofs(0)[a]) ? 0.0 : u[m.element_dofs(0)[a]];
  const double expected = -ue.dot(element_stiffness({}, m).matrix * ue);
  const auto ms = mean_compliance_svd(sys, thin_svd(f));
  CHECK(mean_gradient_svd(sys, ms.workspace)[0] == doctest::Approx(expected).epsilon(1e-12));
  const auto nv = compliances_naive(sys, f);
  CHECK(weighted_gradient_naive(sys, nv.cache, Eigen::VectorXd::Ones(1))[0] ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("weight vectors") {
  auto stats_of = [](std::vector<double> c) {
    return ComplianceStats::from_compliances(Eigen::Map<Eigen::VectorXd>(c.data(), c.size()));
  };
  const auto s4 = stats_of({1, 2, 3, 4});
  CHECK(weight_vector(s4, weights::Mean{}) == Eigen::VectorXd::Constant(4, 0.25));
  const auto s2 = stats_of({1, 3});
  const Eigen::VectorXd wv = weight_vector(s2, weights::Variance{});
  CHECK(wv[0] == doctest::Approx(-2.0));
  CHECK(wv[1] == doctest::Approx(2.0));

  std::mt19937_64 g(4);
  const Eigen::VectorXd c = oracle::random_vector(g, 9, 1.0, 10.0);
  const auto s = ComplianceStats::from_compliances(c);
  const double m = 1.7;
  weights::AugLag al{oracle::random_vector(g, 9, 0.0, 1.0), 0.3, s.mean};
  for (const WeightKind& kind :
       std::vector<WeightKind>{weights::Mean{}, weights::Variance{}, weights::StdDev{}, weights::MeanPlusStd{m}, al}) {
    const Eigen::VectorXd w = weight_vector(s, kind);
    for (int i = 0; i < 9; ++i) {
      const double h = 1e-6;
      Eigen::VectorXd cp = c, cm = c;
      cp[i] += h;
      cm[i] -= h;
      const double fd = (scalar_value(ComplianceStats::from_compliances(cp), kind) -
                         scalar_value(ComplianceStats::from_compliances(cm), kind)) /
                        (2 * h);
      CHECK(std::abs(fd - w[i]) <= 1e-7 * std::max(1.0, std::abs(w[i])));
    }
  }
  const Eigen::VectorXd wmps = weight_vector(s, weights::MeanPlusStd{m});
  const Eigen::VectorXd wstd = weight_vector(s, weights::StdDev{});
  CHECK((wmps - (Eigen::VectorXd::Constant(9, 1.0 / 9) + m * wstd)).lpNorm<Eigen::Infinity>() <= 1e-15);
  const Eigen::VectorXd wal = weight_vector(s, al);
  for (int i = 0; i < 9; ++i)
    CHECK(wal[i] == doctest::Approx(al.lambda[i] + 2 * al.r * std::max(c[i] - al.threshold, 0.0)));
  CHECK(scalar_value(s, weights::MeanPlusStd{m}) == doctest::Approx(s.mean + m * s.stddev));

  const auto one = stats_of({5.0});
  CHECK(one.variance == 0.0);
  CHECK(weight_vector(one, weights::Variance{}).isZero(0.0));
  CHECK(weight_vector(one, weights::StdDev{}).isZero(0.0));
  CHECK(weight_vector(one, weights::Mean{})[0] == 1.0);
  CHECK_THROWS_AS(weight_vector(s, weights::AugLag{Eigen::VectorXd::Ones(3), 1.0, 1.0}), DimensionError);
}

TEST_CASE("scale equivariance and staleness") {
  std::mt19937_64 g(41);
  const auto in = random_instance(g, 6, 3, 20, 5);
  auto sys = system_for(in.mesh, in.rho);
  const auto base = compliances_naive(sys, in.f).stats;
  ScenarioMatrix scaled = in.f;
  scaled.block *= 3.0;
  const auto s3 = compliances_svd(sys, scaled, thin_svd(scaled)).stats;
  CHECK(s3.mean == doctest::Approx(9.0 * base.mean).epsilon(1e-12));
  CHECK(s3.stddev == doctest::Approx(9.0 * base.stddev).epsilon(1e-12));

  const auto nv = compliances_naive(sys, in.f);
  const auto svd = thin_svd(in.f);
  const auto sv = compliances_svd(sys, in.f, svd);
  CHECK_THROWS_AS(compliances_svd(sys, scaled, svd), SolverError);
  sys.assemble(as_vec(in.rho));
  sys.factorize();
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(20);
  CHECK_THROWS_AS(weighted_gradient_naive(sys, nv.cache, w), SolverError);
  CHECK_THROWS_AS(weighted_gradient_svd(sys, sv.workspace, w, svd.v), SolverError);
  CHECK_THROWS_AS(mean_gradient_svd(sys, sv.workspace), SolverError);
  StiffnessSystem unfactored(in.mesh, element_stiffness({}, in.mesh));
  unfactored.assemble(as_vec(in.rho));
  CHECK_THROWS_AS(compliances_naive(unfactored, in.f), SolverError);
}

TEST_CASE("pullback through the identity pipeline") {
  std::mt19937_64 g(5);
  const auto f = FilterMatrix::identity(8);
  DensityPipeline p(f, PipelineConfig{0.0, 1.0, 0.0});
  const Eigen::VectorXd x = oracle::random_vector(g, 8, 0.0, 1.0);
  p.forward(x);
  const Eigen::VectorXd gr = oracle::random_vector(g, 8);
  CHECK((pullback_to_x(gr, p, x) - gr).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(pullback_to_x(Eigen::VectorXd::Zero(8), p, x).isZero(0.0));
}

TEST_CASE("problem gradients over x match central differences for every kind and both methods") {
  std::mt19937_64 g(51);
  for (Method method : {Method::Naive, Method::Svd}) {
    auto mesh = GroundMesh::cantilever_2d(8, 4);
    auto f = sample_cantilever_scenarios(mesh, 15, 2);
    TopologyProblem prob(std::move(mesh), Material{}, 1.5, PipelineConfig{0.001, 3.0, 4.0}, std::move(f), method);
    const int n = prob.n_elements();
    const Eigen::VectorXd x = oracle::random_vector(g, n, 0.2, 0.8);
    const auto base = prob.evaluate(x);
    weights::AugLag al{oracle::random_vector(g, 15, 0.5, 1.5), 1.0 / base.mean, base.mean};
    for (const WeightKind& kind : std::vector<WeightKind>{weights::Mean{}, weights::Variance{}, weights::StdDev{},
                                                          weights::MeanPlusStd{2.0}, al}) {
      const Evaluation ev = prob.evaluate_with_gradient(x, kind);
      CHECK(ev.value == doctest::Approx(scalar_value(base, kind)).epsilon(1e-12));
      Eigen::VectorXd fd(n);
      const double h = 1e-6;
      for (int e = 0; e < n; ++e) {
        Eigen::VectorXd xp = x, xm = x;
        xp[e] += h;
        xm[e] -= h;
        fd[e] = (scalar_value(prob.evaluate(xp), kind) - scalar_value(prob.evaluate(xm), kind)) / (2 * h);
      }
      CHECK(oracle::rel_inf(fd, ev.gradient) <= 1e-5);
    }
  }
}

TEST_CASE("problem solve counts per evaluation") {
  for (Method method : {Method::Naive, Method::Svd}) {
    auto mesh = GroundMesh::cantilever_2d(10, 4);
    auto f = sample_cantilever_scenarios(mesh, 100, 4);
    TopologyProblem prob(std::move(mesh), Material{}, 1.5, PipelineConfig{}, std::move(f), method);
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(prob.n_elements(), 0.5);
    const std::uint64_t per = method == Method::Naive ? 100 : 10;
    double shift = 0.0;
    for (const WeightKind& kind : std::vector<WeightKind>{weights::Mean{}, weights::StdDev{}}) {
      const auto before = prob.solve_count();
      shift += 0.01;
      prob.evaluate_with_gradient((x.array() + shift).matrix(), kind);
      CHECK(prob.solve_count() - before == per);
    }
    const auto before = prob.solve_count();
    prob.evaluate(x);
    prob.weighted_gradient(Eigen::VectorXd::Ones(100));
    prob.evaluate_with_gradient(x, weights::Variance{});
    CHECK(prob.solve_count() - before <= per);
  }
}

TEST_CASE("volume fraction") {
  const Eigen::VectorXd x = (Eigen::VectorXd(4) << 0.0, 0.5, 1.0, 0.5).finished();
  const Evaluation v = volume_fraction(x);
  CHECK(v.value == 0.5);
  CHECK(v.gradient == Eigen::VectorXd::Constant(4, 0.25));
}
