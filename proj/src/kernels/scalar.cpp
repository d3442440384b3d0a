#include "mlsmo/kernels.hpp"

namespace mlsmo::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = a[i] - b[i];
    sum += diff * diff;
  }
  return sum;
}

double plus_squared_distance_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = a[i] - b[i];
    if (diff > 0.0) sum += diff * diff;
  }
  return sum;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Backend::kScalar, &dot_scalar, &axpy_scalar,
                                 &squared_distance_scalar, &plus_squared_distance_scalar};
  return table;
}

}  // namespace mlsmo::kernels
