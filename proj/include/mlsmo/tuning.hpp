#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mlsmo/dataset.hpp"
#include "mlsmo/hyperparameters.hpp"

namespace mlsmo {

// Row indices of each validation fold: a seeded shuffle cut into k nearly
// equal contiguous blocks.
std::vector<std::vector<std::size_t>> fold_assignment(std::size_t n, std::size_t k,
                                                      std::uint64_t seed);

// Mean over folds of the validation MSE (averaged over rows and targets).
// Supports gbt and mlp.
double cross_validate(const TabularDataset& train, ModelKind kind, const Hyperparameters& hp,
                      std::size_t k, std::uint64_t seed);

struct Trial {
  std::size_t index = 0;
  Hyperparameters hyperparameters;
  double score = 0.0;  // +inf when training failed
  std::string status;  // "ok" or the failure label
};

class SearchStrategy {
 public:
  virtual ~SearchStrategy() = default;
  virtual Hyperparameters propose(const SearchSpace& space, std::size_t trial,
                                  std::uint64_t seed) const = 0;
};

// Each trial draws from its own counter-derived stream, so the sequence does
// not depend on how trials are scheduled.
class RandomSearch final : public SearchStrategy {
 public:
  Hyperparameters propose(const SearchSpace& space, std::size_t trial,
                          std::uint64_t seed) const override;
};

struct TuneResult {
  Hyperparameters best;
  double best_score = 0.0;
  std::size_t best_index = 0;
  std::vector<Trial> trials;

  // Trial indices sorted by score, ties by index.
  std::vector<std::size_t> ranking() const;
};

TuneResult tune(const TabularDataset& train, ModelKind kind, const SearchSpace& space,
                std::size_t budget, std::size_t k, std::uint64_t seed,
                const SearchStrategy& strategy = RandomSearch());

}  // namespace mlsmo
