#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mlsmo/matrix.hpp"

namespace mlsmo {

// n x d design parameters paired row-by-row with n x m objective values.
// Construction validates the invariants (non-empty, finite, unique disjoint
// names); instances are immutable afterwards.
class TabularDataset {
 public:
  TabularDataset(std::vector<std::string> feature_names, std::vector<std::string> target_names,
                 Matrix features, Matrix targets);

  std::size_t rows() const noexcept { return features_.rows(); }
  std::size_t n_features() const noexcept { return features_.cols(); }
  std::size_t n_targets() const noexcept { return targets_.cols(); }

  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
  const std::vector<std::string>& target_names() const noexcept { return target_names_; }
  const Matrix& features() const noexcept { return features_; }
  const Matrix& targets() const noexcept { return targets_; }

  TabularDataset select_rows(std::span<const std::size_t> indices) const;
  // Single-target view, used for per-target model training.
  TabularDataset select_target(std::size_t target_index) const;
  TabularDataset with_appended_rows(const Matrix& features, const Matrix& targets) const;

 private:
  std::vector<std::string> feature_names_;
  std::vector<std::string> target_names_;
  Matrix features_;
  Matrix targets_;
};

struct FeatureBounds {
  std::vector<double> lower;
  std::vector<double> upper;

  FeatureBounds() = default;
  FeatureBounds(std::vector<double> lower_in, std::vector<double> upper_in);

  std::size_t dims() const noexcept { return lower.size(); }
  bool contains(std::span<const double> x) const;
  // Observed per-column min/max of a matrix.
  static FeatureBounds from_data(const Matrix& features);
};

struct LoadResult {
  TabularDataset dataset;
  std::size_t dropped_rows = 0;
};

// First n_feature_columns columns are features, the rest targets. Rows with an
// empty, unparseable or non-finite cell are dropped and counted.
LoadResult load_csv(const std::filesystem::path& path, std::size_t n_feature_columns);
void write_csv(const std::filesystem::path& path, const TabularDataset& dataset);

// Headed all-numeric table, used for front and metric files.
struct NumericTable {
  std::vector<std::string> header;
  Matrix values;

  std::size_t column_index(const std::string& name) const;
};

// Strict reader: every cell must parse (empty cells read as NaN).
NumericTable read_numeric_csv(const std::filesystem::path& path);
void write_numeric_csv(const std::filesystem::path& path, const NumericTable& table);

// Shortest round-trip decimal form, used by every CSV writer in the toolkit.
std::string format_double(double value);

struct Split {
  TabularDataset train;
  TabularDataset test;
};

// Test size is ceil(n * test_fraction): 691 rows at 0.2 give 552/139.
std::size_t test_size_for(std::size_t n, double test_fraction);
Split split(const TabularDataset& dataset, double test_fraction, std::uint64_t seed);

enum class ScalerKind { kStandard, kMinMax };

struct Scaler {
  ScalerKind kind = ScalerKind::kStandard;
  std::vector<double> shift;
  std::vector<double> scale;

  Matrix apply(const Matrix& values) const;
  Matrix invert(const Matrix& values) const;
};

// Standard: shift = mean, scale = sample standard deviation. MinMax: shift =
// min, scale = max - min. Constant columns get scale 1.
Scaler fit_scaler(const Matrix& values, ScalerKind kind);
inline Scaler fit_scaler(const TabularDataset& dataset, ScalerKind kind) {
  return fit_scaler(dataset.features(), kind);
}

Matrix latin_hypercube(std::size_t n, const FeatureBounds& bounds, std::uint64_t seed);
Matrix uniform_random(std::size_t n, const FeatureBounds& bounds, std::uint64_t seed);

}  // namespace mlsmo
