#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include "mlsmo/matrix.hpp"

// Vector kernels used by the hot loops (dense layers, front distances).
// A scalar reference implementation is always built; an AVX2/FMA variant is
// compiled on x86-64 and picked at runtime when the CPU supports it. The
// environment variable MLSMO_KERNELS=scalar forces the reference path.
namespace mlsmo::kernels {

enum class Backend { kScalar, kAvx2 };

struct KernelTable {
  Backend backend;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // sum_i (a[i] - b[i])^2
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // sum_i max(a[i] - b[i], 0)^2
  double (*plus_squared_distance)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_table();
// nullptr when the variant was not compiled in or the CPU lacks support.
const KernelTable* avx2_table();

const KernelTable& active();
Backend active_backend();
// Throws Error(kInvalidArgument) when the requested backend is unavailable.
void set_backend(Backend backend);
std::string_view backend_name(Backend backend);
bool backend_available(Backend backend);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}
inline double plus_squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().plus_squared_distance(a.data(), b.data(), a.size());
}

// min over rows z of set: squared_distance(point, z) (resp. the truncated
// variant). set must be non-empty with set.cols() == point.size().
double min_squared_distance(std::span<const double> point, const Matrix& set);
double min_plus_squared_distance(std::span<const double> point, const Matrix& set);

}  // namespace mlsmo::kernels
