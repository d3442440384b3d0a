#include "mlsmo/xai.hpp"

#include <algorithm>
#include <numeric>

#include "mlsmo/error.hpp"
#include "mlsmo/random.hpp"

namespace mlsmo {
namespace {

std::vector<double> normalized(std::vector<double> v) {
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  if (total > 0.0) {
    for (double& x : v) x /= total;
  }
  return v;
}

double target_mse(const Matrix& predicted, const Matrix& targets, std::size_t t) {
  double sum = 0.0;
  for (std::size_t r = 0; r < targets.rows(); ++r) {
    const double e = predicted(r, t) - targets(r, t);
    sum += e * e;
  }
  return sum / static_cast<double>(targets.rows());
}

}  // namespace

std::string_view importance_method_name(ImportanceMethod method) {
  return method == ImportanceMethod::kGain ? "gain" : "permutation";
}

std::vector<std::size_t> ImportanceVector::ranking() const {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return order;
}

ImportanceVector gain_importance(const GbtModel& model) {
  return {ImportanceMethod::kGain, normalized(model.feature_gain)};
}

ImportanceVector gain_importance(const TrainedSurrogate& model, std::size_t target_index) {
  const auto* trees = std::get_if<std::vector<GbtModel>>(&model.body());
  if (trees == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "gain importance is only defined for gbt models");
  }
  if (target_index >= trees->size()) throw Error(ErrorCode::kInvalidArgument, "target index");
  return gain_importance((*trees)[target_index]);
}

ImportanceVector permutation_importance(const Predictor& model, const TabularDataset& data,
                                        std::size_t target_index, std::size_t repeats,
                                        std::uint64_t seed) {
  if (target_index >= data.n_targets()) throw Error(ErrorCode::kInvalidArgument, "target index");
  if (repeats == 0) throw Error(ErrorCode::kInvalidArgument, "repeats must be >= 1");
  const Matrix& x = data.features();
  const double baseline = target_mse(model.predict(x), data.targets(), target_index);
  std::vector<double> increase(data.n_features(), 0.0);
  std::vector<std::size_t> perm(data.rows());
  for (std::size_t j = 0; j < data.n_features(); ++j) {
    const std::vector<double> original = x.column(j);
    double total = 0.0;
    for (std::size_t r = 0; r < repeats; ++r) {
      std::iota(perm.begin(), perm.end(), 0);
      Rng rng = make_rng(seed, {j, r});
      shuffle_indices(perm, rng);
      Matrix shuffled = x;
      for (std::size_t i = 0; i < data.rows(); ++i) shuffled(i, j) = original[perm[i]];
      total += target_mse(model.predict(shuffled), data.targets(), target_index) - baseline;
    }
    increase[j] = std::max(0.0, total / static_cast<double>(repeats));
  }
  return {ImportanceMethod::kPermutation, normalized(std::move(increase))};
}

PdpCurve partial_dependence(const Predictor& model, const Matrix& background,
                            std::span<const std::size_t> features, std::size_t grid_size) {
  if (grid_size < 2) throw Error(ErrorCode::kInvalidArgument, "grid size must be >= 2");
  if (background.empty()) throw Error(ErrorCode::kInvalidArgument, "empty background data");
  if (features.empty() || features.size() > 2) {
    throw Error(ErrorCode::kInvalidArgument, "partial dependence takes one or two features");
  }
  if (features.size() == 2 && features[0] == features[1]) {
    throw Error(ErrorCode::kInvalidArgument, "duplicate feature indices in pair");
  }
  for (std::size_t f : features) {
    if (f >= background.cols()) throw Error(ErrorCode::kInvalidArgument, "feature index");
  }

  // Above the limit, use an evenly strided subset of the rows.
  Matrix rows = background;
  if (background.rows() > kPdpBackgroundLimit) {
    std::vector<std::size_t> keep(kPdpBackgroundLimit);
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i * background.rows() / keep.size();
    rows = background.select_rows(keep);
  }

  PdpCurve curve;
  curve.features.assign(features.begin(), features.end());
  for (std::size_t f : features) {
    const auto col = rows.column(f);
    const auto [mn, mx] = std::minmax_element(col.begin(), col.end());
    if (!(*mn < *mx)) {
      throw Error(ErrorCode::kDegenerateRange, "feature " + std::to_string(f) + " is constant");
    }
    std::vector<double> grid(grid_size);
    for (std::size_t i = 0; i < grid_size; ++i) {
      grid[i] = *mn + (*mx - *mn) * static_cast<double>(i) / static_cast<double>(grid_size - 1);
    }
    grid.back() = *mx;
    curve.grids.push_back(std::move(grid));
  }

  const std::size_t points = features.size() == 1 ? grid_size : grid_size * grid_size;
  const std::size_t n = rows.rows();
  curve.response = Matrix(points, model.n_targets());
  for (std::size_t p = 0; p < points; ++p) {
    Matrix probe = rows;
    const std::size_t gi = features.size() == 1 ? p : p / grid_size;
    for (std::size_t i = 0; i < n; ++i) probe(i, features[0]) = curve.grids[0][gi];
    if (features.size() == 2) {
      for (std::size_t i = 0; i < n; ++i) probe(i, features[1]) = curve.grids[1][p % grid_size];
    }
    const Matrix pred = model.predict(probe);
    for (std::size_t t = 0; t < pred.cols(); ++t) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) sum += pred(i, t);
      curve.response(p, t) = sum / static_cast<double>(n);
    }
  }
  return curve;
}

}  // namespace mlsmo
