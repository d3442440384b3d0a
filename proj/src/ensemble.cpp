#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mlsmo/error.hpp"
#include "mlsmo/surrogate.hpp"

namespace mlsmo {

std::vector<double> project_to_simplex(std::span<const double> v) {
  if (v.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot project an empty vector");
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumulative += sorted[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) theta = candidate;
  }
  std::vector<double> w(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) w[i] = std::max(v[i] - theta, 0.0);
  // Renormalize away the rounding left by the threshold.
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return w;
}

Matrix EnsembleModel::predict(const Matrix& designs) const {
  Matrix blended;
  for (std::size_t i = 0; i < members.size(); ++i) {
    const Matrix p = members[i]->predict(designs);
    if (i == 0) blended = Matrix(p.rows(), p.cols());
    auto out = blended.data();
    const auto in = p.data();
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += weights[i] * in[j];
  }
  return blended;
}

namespace {

Matrix blend(const std::vector<Matrix>& predictions, std::span<const double> w) {
  Matrix out(predictions.front().rows(), predictions.front().cols());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto in = predictions[i].data();
    auto o = out.data();
    for (std::size_t j = 0; j < o.size(); ++j) o[j] += w[i] * in[j];
  }
  return out;
}

double largest_eigenvalue(const std::vector<std::vector<double>>& g) {
  const std::size_t k = g.size();
  std::vector<double> v(k, 1.0 / std::sqrt(static_cast<double>(k))), next(k);
  double lambda = 0.0;
  for (int it = 0; it < 500; ++it) {
    for (std::size_t i = 0; i < k; ++i) {
      next[i] = 0.0;
      for (std::size_t j = 0; j < k; ++j) next[i] += g[i][j] * v[j];
    }
    const double norm = std::sqrt(std::inner_product(next.begin(), next.end(), next.begin(), 0.0));
    if (norm == 0.0) return 0.0;
    for (std::size_t i = 0; i < k; ++i) v[i] = next[i] / norm;
    if (std::abs(norm - lambda) <= 1e-14 * norm) return norm;
    lambda = norm;
  }
  return lambda;
}

}  // namespace

EnsembleModel train_ensemble(std::vector<std::shared_ptr<const TrainedSurrogate>> members,
                             const TabularDataset& holdout) {
  if (members.size() < 2) throw Error(ErrorCode::kInvalidArgument, "ensemble needs >= 2 members");
  for (const auto& m : members) {
    if (m->n_targets() != holdout.n_targets() || m->n_features() != holdout.n_features()) {
      throw Error(ErrorCode::kDimensionMismatch, "ensemble member shape differs from holdout");
    }
  }
  const std::size_t k = members.size();
  std::vector<Matrix> preds;
  preds.reserve(k);
  for (const auto& m : members) preds.push_back(m->predict(holdout.features()));
  const Matrix& y = holdout.targets();
  const double scale = 1.0 / static_cast<double>(y.rows() * y.cols());

  // MSE(w) = w'Gw - 2b'w + const
  std::vector<std::vector<double>> gram(k, std::vector<double>(k));
  std::vector<double> cross(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto pi = preds[i].data();
    cross[i] = std::inner_product(pi.begin(), pi.end(), y.data().begin(), 0.0) * scale;
    for (std::size_t j = i; j < k; ++j) {
      const auto pj = preds[j].data();
      gram[i][j] = gram[j][i] = std::inner_product(pi.begin(), pi.end(), pj.begin(), 0.0) * scale;
    }
  }

  std::vector<double> member_mse(k);
  for (std::size_t i = 0; i < k; ++i) member_mse[i] = mean_squared_error(y, preds[i]);
  const std::size_t best_member = static_cast<std::size_t>(
      std::min_element(member_mse.begin(), member_mse.end()) - member_mse.begin());

  std::vector<double> w(k, 0.0);
  w[best_member] = 1.0;
  const double lipschitz = 2.0 * largest_eigenvalue(gram);
  if (lipschitz > 0.0) {
    const double step = 1.0 / lipschitz;
    std::vector<double> moved(k);
    for (int it = 0; it < 20000; ++it) {
      for (std::size_t i = 0; i < k; ++i) {
        double grad = -2.0 * cross[i];
        for (std::size_t j = 0; j < k; ++j) grad += 2.0 * gram[i][j] * w[j];
        moved[i] = w[i] - step * grad;
      }
      std::vector<double> next = project_to_simplex(moved);
      double change = 0.0;
      for (std::size_t i = 0; i < k; ++i) change = std::max(change, std::abs(next[i] - w[i]));
      w = std::move(next);
      if (change < 1e-13) break;
    }
  }

  EnsembleModel model;
  model.members = std::move(members);
  model.holdout_mse = mean_squared_error(y, blend(preds, w));
  if (!(model.holdout_mse <= member_mse[best_member])) {
    std::fill(w.begin(), w.end(), 0.0);
    w[best_member] = 1.0;
    model.holdout_mse = member_mse[best_member];
  }
  model.weights = std::move(w);
  return model;
}

TrainedSurrogate make_ensemble_surrogate(EnsembleModel ensemble) {
  const std::size_t d = ensemble.members.front()->n_features();
  const std::size_t m = ensemble.members.front()->n_targets();
  TrainingRecord record;
  record.cv_score = ensemble.holdout_mse;
  return TrainedSurrogate(std::move(ensemble), d, m, std::move(record));
}

}  // namespace mlsmo
