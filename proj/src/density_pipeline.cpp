#include "toporisk/density_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "toporisk/error.hpp"

namespace toporisk {

namespace {
constexpr double kEps = std::numeric_limits<double>::epsilon();
}

void PipelineConfig::validate() const {
  if (!(x_min >= 0.0 && x_min < 1.0)) throw ConfigError("x_min must lie in [0, 1)");
  if (!(penalty >= 1.0)) throw ConfigError("penalty exponent must be >= 1");
  if (!(beta >= 0.0)) throw ConfigError("projection beta must be >= 0");
}

FilterMatrix FilterMatrix::identity(int n) {
  Eigen::SparseMatrix<double, Eigen::RowMajor> a(n, n);
  a.setIdentity();
  return FilterMatrix(std::move(a));
}

FilterMatrix build_filter(const GroundMesh& mesh, double radius) {
  if (!(radius > 0.0)) throw ConfigError("filter radius must be positive");
  const int ne = mesh.n_elements();
  const int reach = static_cast<int>(std::ceil(radius / mesh.element_size()));
  const int dim = mesh.dim();
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<std::pair<int, double>> row;
  for (int e = 0; e < ne; ++e) {
    const auto cell = mesh.element_cell(e);
    const auto ce = mesh.element_centroid(e);
    row.clear();
    double total = 0.0;
    const int kreach = dim == 3 ? reach : 0;
    for (int dk = -kreach; dk <= kreach; ++dk) {
      const int k = cell[2] + dk;
      if (k < 0 || k >= (dim == 3 ? mesh.cells(2) : 1)) continue;
      for (int dj = -reach; dj <= reach; ++dj) {
        const int j = cell[1] + dj;
        if (j < 0 || j >= mesh.cells(1)) continue;
        for (int di = -reach; di <= reach; ++di) {
          const int i = cell[0] + di;
          if (i < 0 || i >= mesh.cells(0)) continue;
          const int f = mesh.element_index(i, j, k);
          const auto cf = mesh.element_centroid(f);
          const double d =
              std::sqrt((ce[0] - cf[0]) * (ce[0] - cf[0]) + (ce[1] - cf[1]) * (ce[1] - cf[1]) +
                        (ce[2] - cf[2]) * (ce[2] - cf[2]));
          const double w = radius - d;
          if (w > 0.0) {
            row.emplace_back(f, w);
            total += w;
          }
        }
      }
    }
    for (const auto& [f, w] : row) trip.emplace_back(e, f, w / total);
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> a(ne, ne);
  a.setFromTriplets(trip.begin(), trip.end());
  a.makeCompressed();
  return FilterMatrix(std::move(a));
}

double heaviside(double t, double beta) {
  if (beta == 0.0 || t == 1.0) return t;
  return 1.0 - std::exp(-beta * t) + t * std::exp(-beta);
}

double heaviside_derivative(double t, double beta) {
  if (beta == 0.0) return 1.0;
  return beta * std::exp(-beta * t) + std::exp(-beta);
}

DensityField apply_pipeline(const Eigen::VectorXd& x, const FilterMatrix& filter, const PipelineConfig& cfg) {
  cfg.validate();
  if (x.size() != filter.size()) throw DimensionError("design vector length does not match filter size");
  const Eigen::VectorXd y = filter.matrix() * x;
  const double xmin = cfg.x_min;
  const double p = cfg.penalty;
  DensityField field{x, Eigen::VectorXd(x.size()), Eigen::VectorXd(x.size())};
  for (Eigen::Index e = 0; e < x.size(); ++e) {
    // filter rows sum to 1 only up to rounding; keep the full design exactly full
    const double ye = std::abs(y[e] - 1.0) <= 8.0 * kEps ? 1.0 : std::clamp(y[e], 0.0, 1.0);
    double t = 0.0;
    double dt = 0.0;
    if (cfg.order == StageOrder::PenalizeThenInterpolate) {
      t = std::lerp(xmin, 1.0, std::pow(ye, p));
      dt = (1.0 - xmin) * p * std::pow(ye, p - 1.0);
    } else {
      const double s = std::lerp(xmin, 1.0, ye);
      t = std::pow(s, p);
      dt = p * std::pow(s, p - 1.0) * (1.0 - xmin);
    }
    // With interpolation first, (x_min)^p can project below x_min; the clamped
    // part of the chain is flat.
    const double h = heaviside(t, cfg.beta);
    field.rho[e] = std::clamp(h, xmin, 1.0);
    field.drho_dy[e] = h < xmin ? 0.0 : heaviside_derivative(t, cfg.beta) * dt;
  }
  return field;
}

Eigen::VectorXd jacobian_transpose_apply(const DensityField& field, const FilterMatrix& filter,
                                         const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
  if (g.size() != field.rho.size()) throw DimensionError("adjoint input length does not match density length");
  if (x.size() != field.x.size() || x != field.x)
    throw SolverError("density cache is stale: design changed since the forward pass");
  const Eigen::VectorXd scaled = field.drho_dy.cwiseProduct(g);
  return filter.matrix().transpose() * scaled;
}

DensityPipeline::DensityPipeline(FilterMatrix filter, PipelineConfig cfg)
    : filter_(std::move(filter)), cfg_(cfg) {
  cfg_.validate();
}

const DensityField& DensityPipeline::forward(const Eigen::VectorXd& x) {
  field_ = apply_pipeline(x, filter_, cfg_);
  valid_ = true;
  return field_;
}

Eigen::VectorXd DensityPipeline::pullback(const Eigen::VectorXd& x, const Eigen::VectorXd& g) const {
  if (!valid_) throw SolverError("density pipeline has no forward pass to pull back through");
  return jacobian_transpose_apply(field_, filter_, x, g);
}

void DensityPipeline::set_config(const PipelineConfig& cfg) {
  cfg.validate();
  cfg_ = cfg;
  valid_ = false;
}

}  // namespace toporisk
