#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "toporisk/mesh_fea.hpp"

namespace toporisk {

enum class StageOrder {
  PenalizeThenInterpolate,  // rho = H((1 - x_min) (Ax)^p + x_min)
  InterpolateThenPenalize,  // rho = H(((1 - x_min) Ax + x_min)^p)
};

struct PipelineConfig {
  double x_min = 0.001;
  double penalty = 1.0;
  double beta = 0.0;
  StageOrder order = StageOrder::PenalizeThenInterpolate;

  void validate() const;
};

/// Row-stochastic density filter.
class FilterMatrix {
 public:
  FilterMatrix() = default;
  explicit FilterMatrix(Eigen::SparseMatrix<double, Eigen::RowMajor> a) : a_(std::move(a)) {}

  static FilterMatrix identity(int n);

  const Eigen::SparseMatrix<double, Eigen::RowMajor>& matrix() const { return a_; }
  int size() const { return static_cast<int>(a_.rows()); }

 private:
  Eigen::SparseMatrix<double, Eigen::RowMajor> a_;
};

/// Cone-kernel filter on element centroids: w_ij = max(0, r - d_ij), rows normalized.
FilterMatrix build_filter(const GroundMesh& mesh, double radius);

/// Regularized Heaviside H(t) = 1 - exp(-beta t) + t exp(-beta); H(t) = t when beta == 0.
double heaviside(double t, double beta);
double heaviside_derivative(double t, double beta);

/// Output of a forward pass, with what the adjoint needs.
struct DensityField {
  Eigen::VectorXd x;       // design the field was computed from
  Eigen::VectorXd rho;     // physical densities in [x_min, 1]
  Eigen::VectorXd drho_dy; // derivative of the elementwise stages w.r.t. the filtered value
};

DensityField apply_pipeline(const Eigen::VectorXd& x, const FilterMatrix& filter, const PipelineConfig& cfg);

/// Returns (d rho / d x)^T g without forming the Jacobian. Throws SolverError
/// if x differs from the design the field was computed from.
Eigen::VectorXd jacobian_transpose_apply(const DensityField& field, const FilterMatrix& filter,
                                         const Eigen::VectorXd& x, const Eigen::VectorXd& g);

/// Filter plus configuration plus the most recent forward pass.
class DensityPipeline {
 public:
  DensityPipeline(FilterMatrix filter, PipelineConfig cfg);

  const DensityField& forward(const Eigen::VectorXd& x);
  Eigen::VectorXd pullback(const Eigen::VectorXd& x, const Eigen::VectorXd& g) const;

  const PipelineConfig& config() const { return cfg_; }
  void set_config(const PipelineConfig& cfg);
  const FilterMatrix& filter() const { return filter_; }
  const DensityField& field() const { return field_; }
  int size() const { return filter_.size(); }

 private:
  FilterMatrix filter_;
  PipelineConfig cfg_;
  DensityField field_;
  bool valid_ = false;
};

}  // namespace toporisk
