#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mlsmo/dataset.hpp"
#include "mlsmo/moo.hpp"

namespace mlsmo {

enum class InfeasibleReason { kOutOfBounds, kConstraintViolated };

std::string_view infeasible_reason_name(InfeasibleReason reason);

struct EvaluationOutcome {
  std::vector<double> objectives;           // empty when infeasible
  std::optional<InfeasibleReason> infeasible;

  bool feasible() const noexcept { return !infeasible.has_value(); }
};

// Analytic ground-truth problem standing in for an expensive simulator.
class OracleProblem {
 public:
  virtual ~OracleProblem() = default;

  virtual std::string name() const = 0;
  virtual std::size_t n_features() const = 0;
  virtual std::size_t n_objectives() const = 0;
  virtual FeatureBounds bounds() const = 0;
  virtual std::vector<Direction> directions() const {
    return std::vector<Direction>(n_objectives(), Direction::kMinimize);
  }
  virtual std::vector<std::string> objective_names() const;
  std::vector<std::string> feature_names() const;

  // Out-of-bounds inputs are reported before any constraint check.
  EvaluationOutcome evaluate(std::span<const double> x) const;

  virtual bool has_true_front() const { return false; }
  // n points on the analytic Pareto front. Throws kUnavailableFront if the
  // problem has none.
  virtual Matrix true_front(std::size_t n) const;

 protected:
  // Called with in-bounds x only.
  virtual EvaluationOutcome evaluate_in_bounds(std::span<const double> x) const = 0;
};

// Known names: zdt1, zdt2, zdt3, dtlz2, zdt1-disk.
std::unique_ptr<OracleProblem> make_problem(std::string_view name);
std::vector<std::string> problem_names();

// ZDT1 with an excluded half-disk of radius 0.2 centered at x0 = 0.5, x1 = 0
// that cuts through the unconstrained Pareto set.
inline constexpr double kDiskRadiusSquared = 0.04;

std::vector<EvaluationOutcome> evaluate_batch(const OracleProblem& problem, const Matrix& designs);

// Objectives with NaN rows for infeasible designs, as expected by nsga2_run.
Matrix evaluate_or_nan(const OracleProblem& problem, const Matrix& designs);

enum class Sampler { kLatinHypercube, kUniform };
Sampler parse_sampler(std::string_view name);
std::string_view sampler_name(Sampler sampler);

struct GeneratedDataset {
  TabularDataset dataset;
  std::size_t dropped_rows = 0;
};

GeneratedDataset generate_dataset(const OracleProblem& problem, Sampler sampler, std::size_t n,
                                  std::uint64_t seed);

}  // namespace mlsmo
