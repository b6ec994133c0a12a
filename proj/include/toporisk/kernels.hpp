#pragma once

#include <string_view>

// Data-parallel inner loops behind every compliance gradient. Each kernel has
// a scalar reference implementation and, where the target supports it, an
// AVX2+FMA (x86-64) or NEON (aarch64) variant. The variant is picked once at
// runtime from CPU features; TOPO_RISK_SIMD={scalar|avx2|neon|auto} overrides.

namespace toporisk::kernels {

/// out[e] = sum_b sum_c A[dof(e,b), c] * sum_a Ke[b, a] * B[dof(e,a), c]
///
/// i.e. tr(A_e^T Ke B_e) with A_e, B_e the element rows of two row-major
/// n_dofs x width blocks. ke is nd x nd and symmetric; dof_map holds nd
/// global DOFs per element.
using ElementBilinearFn = void (*)(const double* ke, int nd, const int* dof_map, int n_elements, const double* a,
                                   const double* b, int width, double* out);

/// acc[i] += x[i] * y[i]
using MultiplyAccumulateFn = void (*)(const double* x, const double* y, int n, double* acc);

struct KernelTable {
  const char* name;
  ElementBilinearFn element_bilinear;
  MultiplyAccumulateFn multiply_accumulate;
};

const KernelTable& scalar_kernels();
/// nullptr when the variant is not compiled in or the CPU lacks the feature.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

const KernelTable& active_kernels();
/// Accepts "scalar", "avx2", "neon" or "auto"; throws ConfigError if unavailable.
void select_kernels(std::string_view name);

}  // namespace toporisk::kernels
