#include <atomic>
#include <cstdlib>
#include <limits>
#include <string>

#include "mlsmo/error.hpp"
#include "mlsmo/kernels.hpp"

namespace mlsmo::kernels {

#if defined(MLSMO_HAVE_AVX2)
const KernelTable& avx2_table_unchecked();
#endif

namespace {

#if defined(MLSMO_HAVE_AVX2)
bool cpu_has_avx2() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

const KernelTable* initial_table() {
  const char* forced = std::getenv("MLSMO_KERNELS");
  if (forced != nullptr && std::string(forced) == "scalar") return &scalar_table();
  if (const KernelTable* simd = avx2_table()) return simd;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable* avx2_table() {
#if defined(MLSMO_HAVE_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? &avx2_table_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

Backend active_backend() { return active().backend; }

bool backend_available(Backend backend) {
  return backend == Backend::kScalar || avx2_table() != nullptr;
}

void set_backend(Backend backend) {
  if (backend == Backend::kScalar) {
    current().store(&scalar_table());
    return;
  }
  const KernelTable* simd = avx2_table();
  if (simd == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "AVX2 kernels are not available on this machine");
  }
  current().store(simd);
}

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
  }
  return "unknown";
}

double min_squared_distance(std::span<const double> point, const Matrix& set) {
  const KernelTable& table = active();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < set.rows(); ++r) {
    const double d = table.squared_distance(point.data(), set.row(r).data(), point.size());
    if (d < best) best = d;
  }
  return best;
}

double min_plus_squared_distance(std::span<const double> point, const Matrix& set) {
  const KernelTable& table = active();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < set.rows(); ++r) {
    const double d = table.plus_squared_distance(point.data(), set.row(r).data(), point.size());
    if (d < best) best = d;
  }
  return best;
}

}  // namespace mlsmo::kernels
