#include "toporisk/kernels.hpp"

namespace toporisk::kernels {
namespace {

void element_bilinear_scalar(const double* ke, int nd, const int* dof_map, int n_elements, const double* a,
                             const double* b, int width, double* out) {
  for (int e = 0; e < n_elements; ++e) {
    const int* dofs = dof_map + static_cast<long>(e) * nd;
    double sum = 0.0;
    for (int c = 0; c < width; ++c) {
      for (int r = 0; r < nd; ++r) {
        double t = 0.0;
        for (int s = 0; s < nd; ++s) t += ke[r + s * nd] * b[static_cast<long>(dofs[s]) * width + c];
        sum += a[static_cast<long>(dofs[r]) * width + c] * t;
      }
    }
    out[e] = sum;
  }
}

void multiply_accumulate_scalar(const double* x, const double* y, int n, double* acc) {
  for (int i = 0; i < n; ++i) acc[i] += x[i] * y[i];
}

constexpr KernelTable kScalar{"scalar", element_bilinear_scalar, multiply_accumulate_scalar};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

}  // namespace toporisk::kernels
