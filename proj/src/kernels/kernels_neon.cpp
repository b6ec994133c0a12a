#include "toporisk/kernels.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)
#include <arm_neon.h>

#include <array>

namespace toporisk::kernels {
namespace {

constexpr int kMaxNd = 24;

void element_bilinear_neon(const double* ke, int nd, const int* dof_map, int n_elements, const double* a,
                           const double* b, int width, double* out) {
  if (nd > kMaxNd) {
    scalar_kernels().element_bilinear(ke, nd, dof_map, n_elements, a, b, width, out);
    return;
  }
  std::array<const double*, kMaxNd> arow{};
  std::array<const double*, kMaxNd> brow{};
  std::array<float64x2_t, kMaxNd> bv;
  const int full = width & ~1;
  for (int e = 0; e < n_elements; ++e) {
    const int* dofs = dof_map + static_cast<long>(e) * nd;
    for (int r = 0; r < nd; ++r) {
      arow[r] = a + static_cast<long>(dofs[r]) * width;
      brow[r] = b + static_cast<long>(dofs[r]) * width;
    }
    float64x2_t acc = vdupq_n_f64(0.0);
    for (int c = 0; c < full; c += 2) {
      for (int s = 0; s < nd; ++s) bv[s] = vld1q_f64(brow[s] + c);
      for (int r = 0; r < nd; ++r) {
        float64x2_t t = vmulq_n_f64(bv[0], ke[r]);
        for (int s = 1; s < nd; ++s) t = vfmaq_n_f64(t, bv[s], ke[r + s * nd]);
        acc = vfmaq_f64(acc, vld1q_f64(arow[r] + c), t);
      }
    }
    double sum = vaddvq_f64(acc);
    if (full < width) {
      for (int r = 0; r < nd; ++r) {
        double t = 0.0;
        for (int s = 0; s < nd; ++s) t += ke[r + s * nd] * brow[s][full];
        sum += arow[r][full] * t;
      }
    }
    out[e] = sum;
  }
}

void multiply_accumulate_neon(const double* x, const double* y, int n, double* acc) {
  int i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(acc + i, vfmaq_f64(vld1q_f64(acc + i), vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) acc[i] += x[i] * y[i];
}

constexpr KernelTable kNeon{"neon", element_bilinear_neon, multiply_accumulate_neon};

}  // namespace

const KernelTable* neon_kernels() { return &kNeon; }

}  // namespace toporisk::kernels

#else

namespace toporisk::kernels {
const KernelTable* neon_kernels() { return nullptr; }
}  // namespace toporisk::kernels

#endif
