#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mlsmo/dataset.hpp"
#include "mlsmo/surrogate.hpp"

namespace mlsmo {

enum class ImportanceMethod { kGain, kPermutation };

std::string_view importance_method_name(ImportanceMethod method);

// Nonnegative relevances normalized to sum 1, or all zero when the model
// carries no signal (no splits, or no permutation hurts it).
struct ImportanceVector {
  ImportanceMethod method = ImportanceMethod::kGain;
  std::vector<double> values;

  // Feature indices by decreasing relevance, ties by index.
  std::vector<std::size_t> ranking() const;
};

ImportanceVector gain_importance(const GbtModel& model);
// Throws Error(kInvalidArgument) for non-gbt surrogates.
ImportanceVector gain_importance(const TrainedSurrogate& model, std::size_t target_index);

// Mean MSE increase on target_index when one column is shuffled, clipped at 0.
ImportanceVector permutation_importance(const Predictor& model, const TabularDataset& data,
                                        std::size_t target_index, std::size_t repeats,
                                        std::uint64_t seed);

inline constexpr std::size_t kPdpBackgroundLimit = 10000;

struct PdpCurve {
  std::vector<std::size_t> features;        // one or two indices
  std::vector<std::vector<double>> grids;   // one grid per feature
  // One row per grid point (row-major over the grids for pairs), one column
  // per target.
  Matrix response;
};

// Average prediction over the background rows with the chosen feature(s)
// overwritten by each grid value. Grids span the observed range with
// grid_size equally spaced points.
PdpCurve partial_dependence(const Predictor& model, const Matrix& background,
                            std::span<const std::size_t> features, std::size_t grid_size);

}  // namespace mlsmo
