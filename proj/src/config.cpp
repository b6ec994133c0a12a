#include "toporisk/config.hpp"

#include <fstream>
#include <set>

#include "json.hpp"

#include "toporisk/error.hpp"

namespace toporisk {
namespace {

using nlohmann::json;

void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("wrong type for '" + std::string(key) + "' in " + where);
  }
}

double read_threshold(const json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    throw ConfigError("threshold must be a number or \"inf\"");
  }
  if (!v.is_number()) throw ConfigError("threshold must be a number or \"inf\"");
  return v.get<double>();
}

}  // namespace

Method parse_method(const std::string& name) {
  if (name == "naive") return Method::Naive;
  if (name == "svd") return Method::Svd;
  throw ConfigError("method must be 'naive' or 'svd', got '" + name + "'");
}

std::string method_name(Method m) { return m == Method::Naive ? "naive" : "svd"; }

std::string kind_name(ProblemKind k) {
  switch (k) {
    case ProblemKind::Mean: return "mean";
    case ProblemKind::MeanStd: return "mean_std";
    case ProblemKind::MaxCompliance: return "max_compliance";
  }
  return "?";
}

void RunConfig::validate() const {
  material.validate();
  pipeline.validate();
  if (!(pipeline.x_min > 0.0)) throw ConfigError("x_min must be positive for optimization runs");
  if (!(filter_radius > 0.0)) throw ConfigError("filter_radius must be positive");
  if (!(svd_tol > 0.0 && svd_tol < 1.0)) throw ConfigError("svd_tol must lie in (0, 1)");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (bench_repeats < 1) throw ConfigError("bench repeats must be at least 1");
  if (scenarios.kind == ScenarioSource::Kind::Sample && scenarios.count < 1)
    throw ConfigError("scenario count must be at least 1");
  if (problem.kind != ProblemKind::MaxCompliance &&
      !(problem.volume_fraction > 0.0 && problem.volume_fraction < 1.0))
    throw ConfigError("volume_fraction must lie in (0, 1)");
  if (problem.kind == ProblemKind::MaxCompliance && !threshold_factor && !(problem.threshold > 0.0))
    throw ConfigError("max_compliance needs a positive threshold");
  if (threshold_factor && !(*threshold_factor > 0.0)) throw ConfigError("threshold_factor must be positive");
  mma.validate();
  auglag.validate();
  schedule.validate();
  make_mesh();
}

GroundMesh RunConfig::make_mesh() const {
  if (dim == 2) return GroundMesh::cantilever_2d(cells[0], cells[1], element_size, thickness);
  if (dim == 3) return GroundMesh::cantilever_3d(cells[0], cells[1], cells[2], element_size);
  throw ConfigError("mesh dim must be 2 or 3");
}

RunConfig parse_run_config(const json& j) {
  only_keys(j,
            {"schema_version", "problem", "mesh", "material", "filter_radius", "pipeline", "scenarios", "method",
             "svd_tol", "continuation", "mma", "auglag", "check_grad", "bench", "threads", "output_dir"},
            "config");
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer() ||
      j["schema_version"].get<int>() != kSchemaVersion)
    throw ConfigError("config schema_version must be " + std::to_string(kSchemaVersion));

  RunConfig c;
  if (j.contains("problem")) {
    const auto& p = j["problem"];
    only_keys(p, {"kind", "std_multiple", "volume_fraction", "threshold", "threshold_factor"}, "problem");
    std::string kind = "mean";
    read(p, "kind", kind, "problem");
    if (kind == "mean")
      c.problem.kind = ProblemKind::Mean;
    else if (kind == "mean_std")
      c.problem.kind = ProblemKind::MeanStd;
    else if (kind == "max_compliance")
      c.problem.kind = ProblemKind::MaxCompliance;
    else
      throw ConfigError("problem.kind must be mean, mean_std or max_compliance");
    read(p, "std_multiple", c.problem.std_multiple, "problem");
    read(p, "volume_fraction", c.problem.volume_fraction, "problem");
    if (p.contains("threshold")) c.problem.threshold = read_threshold(p["threshold"]);
    if (p.contains("threshold_factor")) {
      double f = 0.0;
      read(p, "threshold_factor", f, "problem");
      c.threshold_factor = f;
    }
    if (c.problem.kind == ProblemKind::MeanStd && !p.contains("std_multiple")) c.problem.std_multiple = 2.0;
  }
  if (j.contains("mesh")) {
    const auto& m = j["mesh"];
    only_keys(m, {"dim", "cells", "element_size", "thickness"}, "mesh");
    read(m, "dim", c.dim, "mesh");
    if (m.contains("cells")) {
      std::vector<int> cells;
      read(m, "cells", cells, "mesh");
      if (static_cast<int>(cells.size()) != c.dim) throw ConfigError("mesh.cells needs one entry per dimension");
      c.cells = {cells[0], cells[1], c.dim == 3 ? cells[2] : 1};
    }
    read(m, "element_size", c.element_size, "mesh");
    read(m, "thickness", c.thickness, "mesh");
  }
  if (j.contains("material")) {
    const auto& m = j["material"];
    only_keys(m, {"youngs_modulus", "poissons_ratio"}, "material");
    read(m, "youngs_modulus", c.material.youngs_modulus, "material");
    read(m, "poissons_ratio", c.material.poissons_ratio, "material");
  }
  read(j, "filter_radius", c.filter_radius, "config");
  if (j.contains("pipeline")) {
    const auto& p = j["pipeline"];
    only_keys(p, {"x_min", "order"}, "pipeline");
    read(p, "x_min", c.pipeline.x_min, "pipeline");
    std::string order = "penalize_then_interpolate";
    read(p, "order", order, "pipeline");
    if (order == "penalize_then_interpolate")
      c.pipeline.order = StageOrder::PenalizeThenInterpolate;
    else if (order == "interpolate_then_penalize")
      c.pipeline.order = StageOrder::InterpolateThenPenalize;
    else
      throw ConfigError("pipeline.order must be penalize_then_interpolate or interpolate_then_penalize");
  }
  if (j.contains("scenarios")) {
    const auto& s = j["scenarios"];
    only_keys(s, {"source", "count", "seed", "path"}, "scenarios");
    std::string source = "sample";
    read(s, "source", source, "scenarios");
    if (source == "sample") {
      c.scenarios.kind = ScenarioSource::Kind::Sample;
    } else if (source == "file") {
      c.scenarios.kind = ScenarioSource::Kind::File;
      std::string path;
      read(s, "path", path, "scenarios");
      if (path.empty()) throw ConfigError("scenarios.path is required for source 'file'");
      c.scenarios.path = path;
    } else {
      throw ConfigError("scenarios.source must be 'sample' or 'file'");
    }
    read(s, "count", c.scenarios.count, "scenarios");
    read(s, "seed", c.scenarios.seed, "scenarios");
  }
  if (j.contains("method")) {
    std::string m;
    read(j, "method", m, "config");
    c.method = parse_method(m);
  }
  read(j, "svd_tol", c.svd_tol, "config");
  if (j.contains("continuation")) {
    const auto& s = j["continuation"];
    if (s.contains("steps")) {
      only_keys(s, {"steps"}, "continuation");
      ContinuationSchedule sched;
      for (const auto& st : s["steps"]) {
        only_keys(st, {"penalty", "beta", "tolerance"}, "continuation step");
        ContinuationStep step;
        read(st, "penalty", step.penalty, "continuation step");
        read(st, "beta", step.beta, "continuation step");
        read(st, "tolerance", step.tolerance, "continuation step");
        sched.steps.push_back(step);
      }
      c.schedule = sched;
    } else {
      only_keys(s, {"p_start", "p_end", "p_step", "beta_end", "beta_step", "tol_start", "tol_end"}, "continuation");
      double p0 = 1, p1 = 6, dp = 0.5, b1 = 20, db = 4, t0 = 1e-3, t1 = 1e-4;
      read(s, "p_start", p0, "continuation");
      read(s, "p_end", p1, "continuation");
      read(s, "p_step", dp, "continuation");
      read(s, "beta_end", b1, "continuation");
      read(s, "beta_step", db, "continuation");
      read(s, "tol_start", t0, "continuation");
      read(s, "tol_end", t1, "continuation");
      c.schedule = ContinuationSchedule::standard(p0, p1, dp, b1, db, t0, t1);
    }
  }
  if (j.contains("mma")) {
    const auto& m = j["mma"];
    only_keys(m, {"s_init", "s_incr", "s_decr", "max_iters", "move"}, "mma");
    read(m, "s_init", c.mma.s_init, "mma");
    read(m, "s_incr", c.mma.s_incr, "mma");
    read(m, "s_decr", c.mma.s_decr, "mma");
    read(m, "max_iters", c.mma.max_iters, "mma");
    read(m, "move", c.mma.move, "mma");
  }
  if (j.contains("auglag")) {
    const auto& a = j["auglag"];
    only_keys(a,
              {"dual_iters", "primal_iters", "trust_region", "initial_penalty", "growth", "initial_multiplier",
               "initial_step", "step_growth"},
              "auglag");
    read(a, "dual_iters", c.auglag.dual_iters, "auglag");
    read(a, "primal_iters", c.auglag.primal_iters, "auglag");
    read(a, "trust_region", c.auglag.trust_region, "auglag");
    read(a, "initial_penalty", c.auglag.initial_penalty, "auglag");
    read(a, "growth", c.auglag.growth, "auglag");
    read(a, "initial_multiplier", c.auglag.initial_multiplier, "auglag");
    read(a, "initial_step", c.auglag.initial_step, "auglag");
    read(a, "step_growth", c.auglag.step_growth, "auglag");
  }
  if (j.contains("check_grad")) {
    const auto& g = j["check_grad"];
    only_keys(g, {"step", "penalty", "beta", "std_multiple", "design_seed"}, "check_grad");
    read(g, "step", c.check_grad.step, "check_grad");
    read(g, "penalty", c.check_grad.penalty, "check_grad");
    read(g, "beta", c.check_grad.beta, "check_grad");
    read(g, "std_multiple", c.check_grad.std_multiple, "check_grad");
    read(g, "design_seed", c.check_grad.design_seed, "check_grad");
  }
  if (j.contains("bench")) {
    only_keys(j["bench"], {"repeats"}, "bench");
    read(j["bench"], "repeats", c.bench_repeats, "bench");
  }
  read(j, "threads", c.threads, "config");
  if (j.contains("output_dir")) {
    std::string out;
    read(j, "output_dir", out, "config");
    c.output_dir = out;
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  RunConfig c = parse_run_config(j);
  if (c.scenarios.kind == ScenarioSource::Kind::File && c.scenarios.path.is_relative())
    c.scenarios.path = path.parent_path() / c.scenarios.path;
  return c;
}

}  // namespace toporisk
