#include <algorithm>
#include <cmath>
#include <numeric>

#include "mlsmo/error.hpp"
#include "mlsmo/surrogate.hpp"

namespace mlsmo {

double RegressionTree::predict(std::span<const double> x) const {
  std::size_t node = 0;
  while (nodes[node].feature >= 0) {
    const TreeNode& n = nodes[node];
    node = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                        : n.right);
  }
  return nodes[node].value;
}

std::size_t RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::size_t> level(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (nodes[i].feature >= 0) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

bool RegressionTree::splits_on(std::size_t feature) const {
  return std::any_of(nodes.begin(), nodes.end(), [feature](const TreeNode& n) {
    return n.feature >= 0 && static_cast<std::size_t>(n.feature) == feature;
  });
}

double GbtModel::predict_row(std::span<const double> x, std::size_t n_trees) const {
  double sum = 0.0;
  const std::size_t used = std::min(n_trees, trees.size());
  for (std::size_t t = 0; t < used; ++t) sum += trees[t].predict(x);
  return base_prediction + learning_rate * sum;
}

namespace {

struct SplitChoice {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& features, const std::vector<double>& residual, std::size_t max_depth,
              std::size_t min_leaf, double min_gain, std::vector<double>& gains)
      : x_(features),
        residual_(residual),
        max_depth_(max_depth),
        min_leaf_(min_leaf),
        min_gain_(min_gain),
        gains_(gains),
        goes_left_(features.rows(), 0) {}

  // sorted[f] lists the node's rows ordered by feature f.
  RegressionTree build(std::vector<std::vector<std::size_t>> sorted) {
    tree_.nodes.clear();
    grow(std::move(sorted), 0);
    return std::move(tree_);
  }

 private:
  std::size_t grow(std::vector<std::vector<std::size_t>> sorted, std::size_t depth) {
    const std::size_t id = tree_.nodes.size();
    tree_.nodes.emplace_back();
    const auto& rows = sorted.front();
    const double count = static_cast<double>(rows.size());
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t r : rows) {
      sum += residual_[r];
      sum_sq += residual_[r] * residual_[r];
    }
    tree_.nodes[id].value = sum / count;

    if (depth >= max_depth_ || rows.size() < 2 * min_leaf_) return id;
    const SplitChoice best = find_split(sorted, sum);
    // Gains are differences of terms of size sum_sq; below that scale they are rounding noise.
    if (!best.found || !(best.gain > 0.0) || best.gain <= 1e-12 * sum_sq ||
        best.gain < min_gain_) {
      return id;
    }

    gains_[best.feature] += best.gain;
    for (std::size_t r : rows) goes_left_[r] = x_(r, best.feature) <= best.threshold ? 1 : 0;
    std::vector<std::vector<std::size_t>> left(sorted.size()), right(sorted.size());
    for (std::size_t f = 0; f < sorted.size(); ++f) {
      for (std::size_t r : sorted[f]) (goes_left_[r] ? left[f] : right[f]).push_back(r);
    }
    sorted.clear();
    sorted.shrink_to_fit();

    const std::size_t left_id = grow(std::move(left), depth + 1);
    const std::size_t right_id = grow(std::move(right), depth + 1);
    TreeNode& node = tree_.nodes[id];
    node.feature = static_cast<int>(best.feature);
    node.threshold = best.threshold;
    node.left = static_cast<int>(left_id);
    node.right = static_cast<int>(right_id);
    return id;
  }

  SplitChoice find_split(const std::vector<std::vector<std::size_t>>& sorted, double total) const {
    SplitChoice best;
    const std::size_t n = sorted.front().size();
    const double parent_term = total * total / static_cast<double>(n);
    for (std::size_t f = 0; f < sorted.size(); ++f) {
      const auto& order = sorted[f];
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += residual_[order[i]];
        const std::size_t n_left = i + 1;
        const std::size_t n_right = n - n_left;
        if (n_left < min_leaf_) continue;
        if (n_right < min_leaf_) break;
        const double lo = x_(order[i], f);
        const double hi = x_(order[i + 1], f);
        if (!(lo < hi)) continue;
        const double right_sum = total - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                            right_sum * right_sum / static_cast<double>(n_right) - parent_term;
        if (!best.found || gain > best.gain) {
          double mid = lo + (hi - lo) / 2.0;
          if (!(mid < hi)) mid = lo;
          best = {true, f, mid, gain};
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  const std::vector<double>& residual_;
  std::size_t max_depth_;
  std::size_t min_leaf_;
  double min_gain_;
  std::vector<double>& gains_;
  std::vector<char> goes_left_;
  RegressionTree tree_;
};

}  // namespace

GbtModel train_gbt(const TabularDataset& train, std::size_t target_index,
                   const Hyperparameters& hp, std::uint64_t /*seed*/) {
  validate_hyperparameters(ModelKind::kGbt, hp);
  if (target_index >= train.n_targets()) {
    throw Error(ErrorCode::kInvalidArgument, "target index out of range");
  }
  const std::size_t n = train.rows();
  if (n < 2) throw Error(ErrorCode::kDatasetTooSmall, "gbt needs at least 2 rows");
  const Hyperparameters defaults = default_hyperparameters(ModelKind::kGbt);
  const auto n_trees = static_cast<std::size_t>(hp.get_or("n_trees", defaults.get("n_trees")));
  const auto max_depth = static_cast<std::size_t>(hp.get_or("max_depth", defaults.get("max_depth")));
  const auto min_leaf =
      static_cast<std::size_t>(hp.get_or("min_samples_leaf", defaults.get("min_samples_leaf")));

  const Matrix& x = train.features();
  const std::vector<double> y = train.targets().column(target_index);

  GbtModel model;
  model.learning_rate = hp.get_or("learning_rate", defaults.get("learning_rate"));
  model.feature_gain.assign(train.n_features(), 0.0);
  {
    const double pivot = y.front();
    double acc = 0.0;
    for (double v : y) acc += v - pivot;
    model.base_prediction = pivot + acc / static_cast<double>(n);
  }

  // Presort once; children inherit the order through stable partitioning.
  std::vector<std::vector<std::size_t>> root_order(train.n_features());
  for (std::size_t f = 0; f < train.n_features(); ++f) {
    auto& order = root_order[f];
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
  }

  std::vector<double> fitted(n, model.base_prediction);
  std::vector<double> residual(n);
  const double min_gain = hp.get_or("min_split_gain", defaults.get("min_split_gain"));
  TreeBuilder builder(x, residual, max_depth, min_leaf, min_gain, model.feature_gain);
  model.trees.reserve(n_trees);
  for (std::size_t t = 0; t < n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - fitted[i];
    RegressionTree tree = builder.build(root_order);
    for (std::size_t i = 0; i < n; ++i) fitted[i] += model.learning_rate * tree.predict(x.row(i));
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace mlsmo
