#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mlsmo/dataset.hpp"
#include "mlsmo/matrix.hpp"
#include "mlsmo/random.hpp"

namespace mlsmo {

enum class Direction { kMinimize, kMaximize };

std::string_view direction_name(Direction d);
Direction parse_direction(std::string_view name);

// Maps a q x d batch of designs to q x m objective values. A row containing a
// non-finite value marks that design as infeasible. Must be safe to call
// concurrently on disjoint batches.
using BatchEvaluator = std::function<Matrix(const Matrix&)>;

struct ProblemSpec {
  FeatureBounds bounds;
  std::vector<std::string> objective_names;
  std::vector<Direction> directions;
  BatchEvaluator evaluator;

  std::size_t n_objectives() const noexcept { return directions.size(); }
};

struct Individual {
  std::vector<double> x;
  std::vector<double> objectives;  // problem orientation on output
  std::size_t rank = 0;
  double crowding = 0.0;
  bool feasible = true;
};

struct ParetoFront {
  std::vector<Individual> members;

  Matrix designs() const;
  Matrix objectives() const;
};

// a dominates b (minimization): a <= b everywhere and a < b somewhere.
bool dominates(std::span<const double> a, std::span<const double> b);

// Flips the sign of maximize columns so every objective is minimized.
Matrix to_minimization(const Matrix& objectives, std::span<const Direction> directions);

struct SortResult {
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<std::size_t> rank;
  std::size_t demoted = 0;  // rows with non-finite objectives, placed in a final front
};

// Fast non-dominated sort on minimization-oriented rows.
SortResult fast_non_dominated_sort(const Matrix& objectives);

// Crowding distance of each member of `front` (indices into objectives).
std::vector<double> crowding_distance(const Matrix& objectives, std::span<const std::size_t> front);

// Indices (ascending) of the rows not dominated by any other row, after
// orienting by `directions`. Exact duplicates are all kept.
std::vector<std::size_t> pareto_filter(const Matrix& points, std::span<const Direction> directions);

// Bounded simulated binary crossover. With probability 1 - crossover_prob the
// children are copies of the parents. Children are clipped to the bounds.
std::pair<std::vector<double>, std::vector<double>> sbx_crossover(
    std::span<const double> parent1, std::span<const double> parent2, double eta_c,
    double crossover_prob, const FeatureBounds& bounds, Rng& rng);

// Bounded polynomial mutation applied gene-wise with probability `rate`.
void polynomial_mutation(std::span<double> x, double eta_m, double rate,
                         const FeatureBounds& bounds, Rng& rng);

struct NsgaSettings {
  std::size_t pop_size = 100;
  std::size_t generations = 200;
  double crossover_prob = 0.9;
  double eta_c = 15.0;
  double eta_m = 20.0;
  double mutation_rate = -1.0;  // negative means 1/d
  std::uint64_t seed = 0;
};

struct NsgaResult {
  std::vector<Individual> population;
  ParetoFront front;  // rank-0 feasible members of the final population
  std::size_t evaluations = 0;
  std::size_t infeasible_evaluations = 0;
};

NsgaResult nsga2_run(const ProblemSpec& problem, const NsgaSettings& settings);

}  // namespace mlsmo
