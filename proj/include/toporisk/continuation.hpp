#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "toporisk/auglag.hpp"
#include "toporisk/mma.hpp"
#include "toporisk/problem.hpp"

namespace toporisk {

struct ContinuationStep {
  double penalty = 1.0;
  double beta = 0.0;
  double tolerance = 1e-3;
};

struct ContinuationSchedule {
  std::vector<ContinuationStep> steps;

  /// Penalty p_start..p_end by p_step at beta = 0, then beta by beta_step up
  /// to beta_end at p_end; tolerances geometric from tol_start to tol_end.
  static ContinuationSchedule standard(double p_start = 1.0, double p_end = 6.0, double p_step = 0.5,
                                       double beta_end = 20.0, double beta_step = 4.0, double tol_start = 1e-3,
                                       double tol_end = 1e-4);
  static ContinuationSchedule single(double penalty, double beta, double tolerance);

  /// Steps increase (penalty, then beta) and tolerances strictly decrease.
  void validate() const;
};

enum class ProblemKind { Mean, MeanStd, MaxCompliance };

struct ProblemSpec {
  ProblemKind kind = ProblemKind::Mean;
  double std_multiple = 0.0;    // m in mu + m sigma
  double volume_fraction = 0.4;  // Mean, MeanStd
  double threshold = std::numeric_limits<double>::infinity();  // MaxCompliance, in compliance units
};

struct HistoryRecord {
  int step = 0;
  double penalty = 0.0;
  double beta = 0.0;
  double tolerance = 0.0;
  double objective_start = 0.0;
  double objective_end = 0.0;
  double volume = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  double max_compliance = 0.0;
  std::uint64_t solves = 0;
  int iterations = 0;
  bool converged = false;
};

struct ContinuationResult {
  Eigen::VectorXd x;
  std::vector<HistoryRecord> history;
  bool feasible = true;
};

using HistoryObserver = std::function<void(const HistoryRecord&)>;

/// Runs the schedule, warm-starting every step from the previous design.
/// MMA steps minimize the objective scaled by the inverse of its value at the
/// step's warm start; max-compliance steps run the augmented Lagrangian on
/// constraints normalized by the full-design maximum compliance.
ContinuationResult run_continuation(TopologyProblem& problem, const ProblemSpec& spec,
                                    const ContinuationSchedule& schedule, const MMAConfig& mma,
                                    const AugLagConfig& auglag, const HistoryObserver& observer = {});

/// mu_C, mu_C + m sigma_C as a weight kind.
WeightKind objective_kind(const ProblemSpec& spec);

}  // namespace toporisk
