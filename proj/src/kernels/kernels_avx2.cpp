// Compiled with -mavx2 -mfma; only reached after a CPU feature check.
#include "toporisk/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

#include <array>

namespace toporisk::kernels {
namespace {

constexpr int kMaxNd = 24;

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline __m256i tail_mask(int remaining) {
  return _mm256_setr_epi64x(remaining > 0 ? -1 : 0, remaining > 1 ? -1 : 0, remaining > 2 ? -1 : 0, 0);
}

void element_bilinear_avx2(const double* ke, int nd, const int* dof_map, int n_elements, const double* a,
                           const double* b, int width, double* out) {
  if (nd > kMaxNd) {
    scalar_kernels().element_bilinear(ke, nd, dof_map, n_elements, a, b, width, out);
    return;
  }
  std::array<const double*, kMaxNd> arow{};
  std::array<const double*, kMaxNd> brow{};
  std::array<__m256d, kMaxNd> bv;
  const int full = width & ~3;
  const __m256i mask = tail_mask(width - full);
  for (int e = 0; e < n_elements; ++e) {
    const int* dofs = dof_map + static_cast<long>(e) * nd;
    for (int r = 0; r < nd; ++r) {
      arow[r] = a + static_cast<long>(dofs[r]) * width;
      brow[r] = b + static_cast<long>(dofs[r]) * width;
    }
    __m256d acc = _mm256_setzero_pd();
    for (int c = 0; c < width; c += 4) {
      const bool tail = c >= full;
      for (int s = 0; s < nd; ++s)
        bv[s] = tail ? _mm256_maskload_pd(brow[s] + c, mask) : _mm256_loadu_pd(brow[s] + c);
      for (int r = 0; r < nd; ++r) {
        const double* kr = ke + r;
        __m256d t = _mm256_mul_pd(_mm256_broadcast_sd(kr), bv[0]);
        for (int s = 1; s < nd; ++s) t = _mm256_fmadd_pd(_mm256_broadcast_sd(kr + s * nd), bv[s], t);
        const __m256d av = tail ? _mm256_maskload_pd(arow[r] + c, mask) : _mm256_loadu_pd(arow[r] + c);
        acc = _mm256_fmadd_pd(av, t, acc);
      }
    }
    out[e] = hsum(acc);
  }
}

void multiply_accumulate_avx2(const double* x, const double* y, int n, double* acc) {
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), _mm256_loadu_pd(acc + i));
    _mm256_storeu_pd(acc + i, r);
  }
  for (; i < n; ++i) acc[i] += x[i] * y[i];
}

constexpr KernelTable kAvx2{"avx2", element_bilinear_avx2, multiply_accumulate_avx2};

}  // namespace

const KernelTable* avx2_kernels() {
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &kAvx2 : nullptr;
}

}  // namespace toporisk::kernels

#else

namespace toporisk::kernels {
const KernelTable* avx2_kernels() { return nullptr; }
}  // namespace toporisk::kernels

#endif
