#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "json.hpp"
#include "mlsmo/dataset.hpp"
#include "mlsmo/hyperparameters.hpp"
#include "mlsmo/matrix.hpp"

namespace mlsmo {

// Anything that maps q x d designs to q x m objective predictions. Trained
// surrogates implement it; so do test doubles and oracle wrappers.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual Matrix predict(const Matrix& designs) const = 0;
  virtual std::size_t n_features() const = 0;
  virtual std::size_t n_targets() const = 0;
};

// ---------------------------------------------------------------- trees

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  // x[feature] <= threshold goes left.
  double predict(std::span<const double> x) const;
  std::size_t depth() const;
  bool splits_on(std::size_t feature) const;
};

// Least-squares gradient boosting for a single target.
struct GbtModel {
  std::vector<RegressionTree> trees;
  double learning_rate = 0.1;
  double base_prediction = 0.0;
  std::vector<double> feature_gain;  // summed SSE reduction per feature

  double predict_row(std::span<const double> x) const { return predict_row(x, trees.size()); }
  // Prediction using only the first `n_trees` trees.
  double predict_row(std::span<const double> x, std::size_t n_trees) const;
};

// Keys: n_trees, max_depth, learning_rate, min_samples_leaf, min_split_gain
// (smallest squared-error reduction a split must achieve). Splits are exact
// greedy variance reduction over midpoints of sorted unique values; ties go to
// the lowest feature index, then the lowest threshold.
GbtModel train_gbt(const TabularDataset& train, std::size_t target_index,
                   const Hyperparameters& hp, std::uint64_t seed);

// ---------------------------------------------------------------- MLP

enum class Activation { kRelu, kTanh };

struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;  // outputs x inputs, row-major
  std::vector<double> bias;
};

struct MlpModel {
  std::vector<DenseLayer> layers;
  Activation activation = Activation::kRelu;
  Scaler input_scaler;
  Scaler output_scaler;

  std::size_t n_inputs() const { return layers.front().inputs; }
  std::size_t n_outputs() const { return layers.back().outputs; }

  // Raw features in, target units out.
  Matrix predict(const Matrix& designs) const;
  // Operates in the scaled spaces.
  Matrix forward(const Matrix& scaled_inputs) const;
};

// Glorot-uniform weights, zero biases, identity scalers.
MlpModel init_mlp(std::size_t inputs, std::size_t outputs, std::span<const std::size_t> hidden,
                  Activation activation, std::uint64_t seed);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // same layout as mlp_parameters()
};

// Loss = mean over rows and outputs of squared error + weight_decay * sum(W^2),
// computed on already-scaled inputs/targets.
LossAndGradient mlp_loss_and_gradient(const MlpModel& model, const Matrix& scaled_inputs,
                                      const Matrix& scaled_targets, double weight_decay);
std::vector<double> mlp_parameters(const MlpModel& model);
void set_mlp_parameters(MlpModel& model, std::span<const double> params);

// Keys: hidden_1, hidden_2 (0 = single layer), activation (0 relu, 1 tanh),
// learning_rate, epochs, batch_size (0 = full batch below 1024 rows, else 256),
// weight_decay. Adam on the joint MSE over all targets.
MlpModel train_mlp(const TabularDataset& train, const Hyperparameters& hp, std::uint64_t seed);

// ---------------------------------------------------------------- bundle

class TrainedSurrogate;

struct EnsembleModel {
  std::vector<std::shared_ptr<const TrainedSurrogate>> members;
  std::vector<double> weights;
  double holdout_mse = std::numeric_limits<double>::quiet_NaN();

  Matrix predict(const Matrix& designs) const;
};

struct TrainingRecord {
  // One entry per target for gbt, one for mlp, none for ensembles.
  std::vector<Hyperparameters> hyperparameters;
  double cv_score = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

class TrainedSurrogate final : public Predictor {
 public:
  using Body = std::variant<std::vector<GbtModel>, MlpModel, EnsembleModel>;

  TrainedSurrogate(Body body, std::size_t n_features, std::size_t n_targets,
                   TrainingRecord record);

  ModelKind kind() const;
  Matrix predict(const Matrix& designs) const override;
  std::size_t n_features() const override { return n_features_; }
  std::size_t n_targets() const override { return n_targets_; }

  const Body& body() const noexcept { return body_; }
  const TrainingRecord& record() const noexcept { return record_; }
  TrainingRecord& mutable_record() noexcept { return record_; }

 private:
  Body body_;
  std::size_t n_features_;
  std::size_t n_targets_;
  TrainingRecord record_;
};

// Fits a gbt (one model per target) or mlp bundle. For gbt, `hp` holds either
// one entry shared by all targets or one per target.
TrainedSurrogate fit_surrogate(ModelKind kind, const TabularDataset& train,
                               const std::vector<Hyperparameters>& hp, std::uint64_t seed);

// Euclidean projection onto {w : w >= 0, sum w = 1}.
std::vector<double> project_to_simplex(std::span<const double> v);

// Learns convex combination weights minimizing holdout MSE by projected
// gradient descent, starting from the best single member.
EnsembleModel train_ensemble(std::vector<std::shared_ptr<const TrainedSurrogate>> members,
                             const TabularDataset& holdout);
TrainedSurrogate make_ensemble_surrogate(EnsembleModel ensemble);

// ---------------------------------------------------------------- metrics

struct RegressionMetrics {
  double mape = 0.0;  // percent
  double mse = 0.0;
  std::vector<double> residuals;  // y - y_hat for rows with |y| >= kZeroTargetThreshold
  std::size_t excluded_zero_targets = 0;
};

inline constexpr double kZeroTargetThreshold = 1e-8;

RegressionMetrics regression_metrics(std::span<const double> truth,
                                     std::span<const double> predicted);
// One entry per target.
std::vector<RegressionMetrics> evaluate(const Predictor& model, const TabularDataset& test);
double mean_squared_error(const Matrix& truth, const Matrix& predicted);

// ---------------------------------------------------------------- persistence

nlohmann::json surrogate_to_json(const TrainedSurrogate& model);
std::shared_ptr<const TrainedSurrogate> surrogate_from_json(const nlohmann::json& doc);
void save_surrogate(const std::filesystem::path& path, const TrainedSurrogate& model);
std::shared_ptr<const TrainedSurrogate> load_surrogate(const std::filesystem::path& path);

}  // namespace mlsmo
