#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "toporisk/auglag.hpp"
#include "toporisk/continuation.hpp"
#include "toporisk/density_pipeline.hpp"
#include "toporisk/mesh_fea.hpp"
#include "toporisk/mma.hpp"
#include "toporisk/problem.hpp"

namespace toporisk {

inline constexpr int kSchemaVersion = 1;

struct ScenarioSource {
  enum class Kind { Sample, File } kind = Kind::Sample;
  int count = 1000;
  std::uint64_t seed = 1;
  std::filesystem::path path;
};

struct GradCheckSettings {
  double step = 1e-6;
  double penalty = 3.0;
  double beta = 4.0;
  double std_multiple = 2.0;
  std::uint64_t design_seed = 7;
};

struct RunConfig {
  ProblemSpec problem;
  std::optional<double> threshold_factor;  // C_t as a multiple of the full-design max compliance
  int dim = 2;
  std::array<int, 3> cells{40, 10, 1};
  double element_size = 1.0;
  double thickness = 1.0;
  Material material;
  double filter_radius = 2.0;
  PipelineConfig pipeline;
  ScenarioSource scenarios;
  Method method = Method::Svd;
  double svd_tol = 1e-10;
  ContinuationSchedule schedule = ContinuationSchedule::standard();
  MMAConfig mma;
  AugLagConfig auglag;
  GradCheckSettings check_grad;
  int bench_repeats = 1;
  int threads = 1;
  std::filesystem::path output_dir = "out";

  void validate() const;
  GroundMesh make_mesh() const;
};

/// Strict parser: unknown keys and wrong types are ConfigError.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

Method parse_method(const std::string& name);
std::string method_name(Method m);
std::string kind_name(ProblemKind k);

}  // namespace toporisk
