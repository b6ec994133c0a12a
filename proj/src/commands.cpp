#include "toporisk/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include <spdlog/spdlog.h>

#include "toporisk/error.hpp"

namespace toporisk {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), 1e-300); }

double rel_err_inf(const Eigen::VectorXd& ref, const Eigen::VectorXd& v) {
  const double scale = std::max(ref.lpNorm<Eigen::Infinity>(), 1e-300);
  return (ref - v).lpNorm<Eigen::Infinity>() / scale;
}

TopologyProblem make_problem(const RunConfig& cfg, ScenarioMatrix f) {
  return TopologyProblem(cfg.make_mesh(), cfg.material, cfg.filter_radius, cfg.pipeline, std::move(f), cfg.method,
                         cfg.svd_tol, cfg.threads);
}

}  // namespace

ScenarioMatrix build_scenarios(const RunConfig& cfg, const GroundMesh& mesh) {
  if (cfg.scenarios.kind == ScenarioSource::Kind::Sample)
    return sample_cantilever_scenarios(mesh, cfg.scenarios.count, cfg.scenarios.seed);
  ScenarioMatrix f = load_scenarios_csv(cfg.scenarios.path, mesh.n_dofs());
  for (int k = 0; k < f.n_loaded(); ++k) {
    const int d = f.loaded_dofs[k];
    if (mesh.is_fixed(d) && (f.block.row(k).array() != 0.0).any())
      throw ConfigError("scenario file loads fixed DOF " + std::to_string(d));
  }
  return f;
}

RunReport run_command(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  const GroundMesh mesh = cfg.make_mesh();
  TopologyProblem problem = make_problem(cfg, build_scenarios(cfg, mesh));
  const double setup = seconds_since(t0);
  spdlog::info("{} elements, {} scenarios, method {}", problem.n_elements(), problem.scenarios().scenarios(),
               method_name(cfg.method));
  if (problem.svd()) spdlog::info("scenario rank {}", problem.svd()->rank());

  ProblemSpec spec = cfg.problem;
  if (spec.kind == ProblemKind::MaxCompliance && cfg.threshold_factor) {
    problem.set_stage(cfg.schedule.steps.front().penalty, cfg.schedule.steps.front().beta);
    spec.threshold = *cfg.threshold_factor * problem.evaluate(Eigen::VectorXd::Ones(problem.n_elements())).max();
    spdlog::info("compliance threshold {}", spec.threshold);
  }

  const auto t1 = Clock::now();
  const ContinuationResult result =
      run_continuation(problem, spec, cfg.schedule, cfg.mma, cfg.auglag, [](const HistoryRecord& h) {
        spdlog::info("step {:2d} p={:.2f} beta={:4.1f}: objective {:.6g} -> {:.6g}, V={:.4f}, {} iterations", h.step,
                     h.penalty, h.beta, h.objective_start, h.objective_end, h.volume, h.iterations);
      });
  const double optimize = seconds_since(t1);

  RunReport report;
  report.problem = kind_name(spec.kind);
  report.method = method_name(cfg.method);
  report.scenarios = problem.scenarios().scenarios();
  report.n_elements = problem.n_elements();
  report.threshold = spec.threshold;
  report.stats = problem.evaluate(result.x);
  report.volume = volume_fraction(result.x).value;
  report.feasible = result.feasible;
  report.total_solves = problem.solve_count();
  report.history = result.history;

  const auto t2 = Clock::now();
  const auto& dir = cfg.output_dir;
  std::filesystem::create_directories(dir);
  write_report_json(dir / "report.json", report);
  write_history_csv(dir / "history.csv", report.history);
  write_density_vtk(dir / "density.vtk", problem.mesh(), problem.densities(), result.x);
  if (problem.mesh().dim() == 2) write_density_pgm(dir / "density.pgm", problem.mesh(), problem.densities());
  const double exporting = seconds_since(t2);
  report.wall_seconds = seconds_since(t0);
  write_timing_csv(dir / "timing.csv",
                   {{"setup", setup}, {"optimize", optimize}, {"export", exporting}, {"total", report.wall_seconds}});
  spdlog::info("mean {:.6g}, std {:.6g}, max {:.6g}, V {:.4f}, {} solves, {:.2f} s", report.stats.mean,
               report.stats.stddev, report.stats.max(), report.volume, report.total_solves, report.wall_seconds);
  return report;
}

BenchResult bench_command(const RunConfig& cfg) {
  const GroundMesh mesh = cfg.make_mesh();
  const ScenarioMatrix f = build_scenarios(cfg, mesh);
  const int n = mesh.n_elements();
  DensityPipeline pipeline(build_filter(mesh, cfg.filter_radius), cfg.pipeline);
  const Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
  pipeline.forward(x);
  StiffnessSystem sys(mesh, element_stiffness(cfg.material, mesh), cfg.pipeline.x_min);
  sys.set_threads(cfg.threads);
  const Eigen::VectorXd rho = pipeline.field().rho;

  struct Outcome {
    double value = 0.0;
    Eigen::VectorXd gradient;
  };
  // Every timed block starts from assembly so each row stands on its own.
  auto timed = [&](const std::string& method, const std::string& statistic, auto&& body) {
    BenchRow row{method, statistic, 0.0, 0.0, 0};
    Outcome out;
    double best = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < cfg.bench_repeats; ++rep) {
      sys.reset_solve_count();
      const auto t0 = Clock::now();
      sys.assemble(std::span<const double>(rho.data(), static_cast<std::size_t>(rho.size())));
      sys.factorize();
      out = body();
      best = std::min(best, seconds_since(t0));
      row.solves = sys.solve_count();
    }
    row.value = out.value;
    row.seconds = best;
    return std::make_pair(row, out.gradient);
  };

  auto naive_mean = timed("naive", "mean", [&] {
    NaiveMean m = mean_compliance_naive(sys, f);
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(f.scenarios(), 1.0 / f.scenarios());
    return Outcome{m.mean, pullback_to_x(weighted_gradient_naive(sys, m.cache, w), pipeline, x)};
  });
  auto naive_std = timed("naive", "stddev", [&] {
    NaiveEvaluation e = compliances_naive(sys, f);
    const Eigen::VectorXd w = weight_vector(e.stats, weights::StdDev{});
    return Outcome{e.stats.stddev, pullback_to_x(weighted_gradient_naive(sys, e.cache, w), pipeline, x)};
  });
  // The decomposition is part of the SVD route's cost.
  auto svd_mean = timed("svd", "mean", [&] {
    const ThinSVD svd = thin_svd(f, cfg.svd_tol);
    SvdMean m = mean_compliance_svd(sys, svd);
    return Outcome{m.mean, pullback_to_x(mean_gradient_svd(sys, m.workspace), pipeline, x)};
  });
  auto svd_std = timed("svd", "stddev", [&] {
    const ThinSVD svd = thin_svd(f, cfg.svd_tol);
    SvdEvaluation e = compliances_svd(sys, f, svd);
    const Eigen::VectorXd w = weight_vector(e.stats, weights::StdDev{});
    return Outcome{e.stats.stddev, pullback_to_x(weighted_gradient_svd(sys, e.workspace, w, svd.v), pipeline, x)};
  });

  BenchResult res;
  res.rows = {naive_mean.first, naive_std.first, svd_mean.first, svd_std.first};
  res.max_value_error = std::max(rel_err(naive_mean.first.value, svd_mean.first.value),
                                 rel_err(naive_std.first.value, svd_std.first.value));
  res.max_gradient_error =
      std::max(rel_err_inf(naive_mean.second, svd_mean.second), rel_err_inf(naive_std.second, svd_std.second));
  res.agree = res.max_value_error <= 1e-9;

  std::filesystem::create_directories(cfg.output_dir);
  write_bench_csv(cfg.output_dir / "bench.csv", res.rows);
  for (const auto& r : res.rows)
    spdlog::info("{:5s} {:6s} value {:.12g}  {:.4f} s  {} solves", r.method, r.statistic, r.value, r.seconds,
                 r.solves);
  spdlog::info("method agreement: values {:.3g}, gradients {:.3g}", res.max_value_error, res.max_gradient_error);
  return res;
}

GradCheckResult check_grad_command(const RunConfig& cfg) {
  const auto& g = cfg.check_grad;
  if (!(g.step > 0.0) || !std::isfinite(g.step)) throw ConfigError("check_grad.step must be positive");
  const GroundMesh mesh = cfg.make_mesh();
  if (mesh.n_elements() > kGradCheckMaxElements)
    throw ConfigError("check-grad needs a mesh with at most " + std::to_string(kGradCheckMaxElements) +
                      " elements, got " + std::to_string(mesh.n_elements()));
  TopologyProblem problem = make_problem(cfg, build_scenarios(cfg, mesh));
  problem.set_stage(g.penalty, g.beta);
  const int n = problem.n_elements();
  const int L = problem.scenarios().scenarios();

  // Interior design so that x +- h stays inside the box.
  ScenarioRng rng(g.design_seed);
  Eigen::VectorXd x(n);
  for (int e = 0; e < n; ++e) x[e] = rng.uniform(0.2, 0.8);
  Eigen::VectorXd w(L);
  for (int i = 0; i < L; ++i) w[i] = rng.normal();

  const ComplianceStats base = problem.evaluate(x);
  weights::AugLag al;
  al.lambda.resize(L);
  for (int i = 0; i < L; ++i) al.lambda[i] = rng.uniform(0.5, 1.5);
  {
    std::vector<double> c(base.compliances.data(), base.compliances.data() + L);
    std::nth_element(c.begin(), c.begin() + L / 2, c.end());
    al.threshold = c[L / 2];
  }
  al.r = 1.0 / std::max(base.mean, 1e-300);

  struct Quantity {
    std::string name;
    std::function<double(const ComplianceStats&)> value;
    Eigen::VectorXd analytic;
  };
  std::vector<Quantity> qs;
  auto add_kind = [&](const std::string& name, const WeightKind& kind) {
    Quantity q{name, [kind](const ComplianceStats& s) { return scalar_value(s, kind); }, {}};
    q.analytic = problem.evaluate_with_gradient(x, kind).gradient;
    qs.push_back(std::move(q));
  };
  add_kind("mean", weights::Mean{});
  add_kind("variance", weights::Variance{});
  add_kind("stddev", weights::StdDev{});
  add_kind("mean_plus_" + format_double(g.std_multiple) + "_std", weights::MeanPlusStd{g.std_multiple});
  add_kind("auglag", al);
  {
    problem.evaluate(x);
    Quantity q{"weighted_sum", [w](const ComplianceStats& s) { return w.dot(s.compliances); }, {}};
    q.analytic = problem.weighted_gradient(w);
    qs.push_back(std::move(q));
  }

  std::vector<Eigen::VectorXd> fd(qs.size(), Eigen::VectorXd(n));
  for (int e = 0; e < n; ++e) {
    Eigen::VectorXd xp = x, xm = x;
    xp[e] += g.step;
    xm[e] -= g.step;
    const ComplianceStats sp = problem.evaluate(xp);
    const ComplianceStats sm = problem.evaluate(xm);
    for (std::size_t k = 0; k < qs.size(); ++k) fd[k][e] = (qs[k].value(sp) - qs[k].value(sm)) / (2.0 * g.step);
  }

  GradCheckResult res;
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t k = 0; k < qs.size(); ++k) {
    const double err = rel_err_inf(fd[k], qs[k].analytic);
    res.entries.push_back({qs[k].name, err});
    res.max_relative_error = std::max(res.max_relative_error, err);
    j["quantities"][qs[k].name] = err;
    spdlog::info("{:22s} max rel. error {:.3e}", qs[k].name, err);
  }
  res.passed = res.max_relative_error <= kGradCheckTolerance;
  j["max_relative_error"] = res.max_relative_error;
  j["tolerance"] = kGradCheckTolerance;
  j["passed"] = res.passed;
  j["elements"] = n;
  j["scenarios"] = L;
  j["step"] = g.step;
  std::filesystem::create_directories(cfg.output_dir);
  std::ofstream(cfg.output_dir / "check_grad.json") << j.dump(2) << '\n';
  return res;
}

ScenarioMatrix sample_scenarios_command(const RunConfig& cfg) {
  const GroundMesh mesh = cfg.make_mesh();
  ScenarioMatrix f = sample_cantilever_scenarios(mesh, cfg.scenarios.count, cfg.scenarios.seed);
  std::filesystem::create_directories(cfg.output_dir);
  write_scenarios_csv(cfg.output_dir / "scenarios.csv", f);
  spdlog::info("wrote {} scenarios over {} loaded DOFs", f.scenarios(), f.n_loaded());
  return f;
}

}  // namespace toporisk
