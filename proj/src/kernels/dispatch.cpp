#include <atomic>
#include <cstdlib>
#include <string>

#include "toporisk/error.hpp"
#include "toporisk/kernels.hpp"

namespace toporisk::kernels {
namespace {

const KernelTable* best_available() {
  if (const auto* k = avx2_kernels()) return k;
  if (const auto* k = neon_kernels()) return k;
  return &scalar_kernels();
}

const KernelTable* lookup(std::string_view name) {
  if (name == "auto" || name.empty()) return best_available();
  if (name == "scalar") return &scalar_kernels();
  if (name == "avx2") return avx2_kernels();
  if (name == "neon") return neon_kernels();
  return nullptr;
}

const KernelTable* initial() {
  if (const char* env = std::getenv("TOPO_RISK_SIMD")) {
    if (const auto* k = lookup(env)) return k;
  }
  return best_available();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial()};
  return table;
}

}  // namespace

const KernelTable& active_kernels() { return *current().load(std::memory_order_acquire); }

void select_kernels(std::string_view name) {
  const auto* k = lookup(name);
  if (!k) throw ConfigError("kernel variant '" + std::string(name) + "' is not available on this machine");
  current().store(k, std::memory_order_release);
}

}  // namespace toporisk::kernels
