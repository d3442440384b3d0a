#include <algorithm>
#include <cmath>

#include "mlsmo/moo.hpp"

namespace mlsmo {

namespace {
constexpr double kSameGene = 1e-14;

double spread_factor(double beta, double eta, double u) {
  const double alpha = 2.0 - std::pow(beta, -(eta + 1.0));
  if (u <= 1.0 / alpha) return std::pow(u * alpha, 1.0 / (eta + 1.0));
  return std::pow(1.0 / (2.0 - u * alpha), 1.0 / (eta + 1.0));
}
}  // namespace

std::pair<std::vector<double>, std::vector<double>> sbx_crossover(
    std::span<const double> parent1, std::span<const double> parent2, double eta_c,
    double crossover_prob, const FeatureBounds& bounds, Rng& rng) {
  std::vector<double> c1(parent1.begin(), parent1.end());
  std::vector<double> c2(parent2.begin(), parent2.end());
  if (uniform01(rng) >= crossover_prob) return {c1, c2};
  for (std::size_t j = 0; j < c1.size(); ++j) {
    if (uniform01(rng) > 0.5) continue;
    if (std::abs(parent1[j] - parent2[j]) <= kSameGene) continue;
    const double y1 = std::min(parent1[j], parent2[j]);
    const double y2 = std::max(parent1[j], parent2[j]);
    const double lo = bounds.lower[j];
    const double hi = bounds.upper[j];
    const double u = uniform01(rng);
    const double beta_lo = 1.0 + 2.0 * (y1 - lo) / (y2 - y1);
    const double beta_hi = 1.0 + 2.0 * (hi - y2) / (y2 - y1);
    double child_lo = 0.5 * ((y1 + y2) - spread_factor(beta_lo, eta_c, u) * (y2 - y1));
    double child_hi = 0.5 * ((y1 + y2) + spread_factor(beta_hi, eta_c, u) * (y2 - y1));
    child_lo = std::clamp(child_lo, lo, hi);
    child_hi = std::clamp(child_hi, lo, hi);
    if (uniform01(rng) <= 0.5) {
      c1[j] = child_hi;
      c2[j] = child_lo;
    } else {
      c1[j] = child_lo;
      c2[j] = child_hi;
    }
  }
  return {c1, c2};
}

void polynomial_mutation(std::span<double> x, double eta_m, double rate,
                         const FeatureBounds& bounds, Rng& rng) {
  const double power = 1.0 / (eta_m + 1.0);
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!(uniform01(rng) < rate)) continue;
    const double lo = bounds.lower[j];
    const double hi = bounds.upper[j];
    if (!(hi > lo)) continue;
    const double y = std::clamp(x[j], lo, hi);
    const double delta1 = (y - lo) / (hi - lo);
    const double delta2 = (hi - y) / (hi - lo);
    const double u = uniform01(rng);
    double deltaq;
    if (u <= 0.5) {
      const double val = 2.0 * u + (1.0 - 2.0 * u) * std::pow(1.0 - delta1, eta_m + 1.0);
      deltaq = std::pow(val, power) - 1.0;
    } else {
      const double val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(1.0 - delta2, eta_m + 1.0);
      deltaq = 1.0 - std::pow(val, power);
    }
    x[j] = std::clamp(y + deltaq * (hi - lo), lo, hi);
  }
}

}  // namespace mlsmo
