#include "mlsmo/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mlsmo/dataset.hpp"
#include "mlsmo/error.hpp"
#include "mlsmo/parallel.hpp"
#include "mlsmo/surrogate.hpp"

namespace mlsmo {

// ---------------------------------------------------------------- hyperparameters

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kGbt: return "gbt";
    case ModelKind::kMlp: return "mlp";
    case ModelKind::kEnsemble: return "ensemble";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "gbt") return ModelKind::kGbt;
  if (name == "mlp") return ModelKind::kMlp;
  if (name == "ensemble") return ModelKind::kEnsemble;
  throw Error(ErrorCode::kInvalidArgument, "unknown model kind '" + std::string(name) + "'");
}

double Hyperparameters::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCode::kInvalidArgument, "missing hyperparameter " + key);
  return it->second;
}

double Hyperparameters::get_or(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string Hyperparameters::to_string() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    if (!out.empty()) out += ' ';
    out += k + "=" + format_double(v);
  }
  return out;
}

double ParamRange::sample(Rng& rng) const {
  if (!choices.empty()) return choices[uniform_index(rng, choices.size())];
  const double u = uniform01(rng);
  double v = log_scale ? std::exp(std::log(low) + u * (std::log(high) - std::log(low)))
                       : low + u * (high - low);
  if (integer) v = std::clamp(std::round(v), low, high);
  return v;
}

namespace {

struct Limit {
  const char* name;
  double low;
  double high;
  bool low_open;
  bool integer;
};

const std::vector<Limit>& limits_for(ModelKind kind) {
  static const std::vector<Limit> gbt{
      {"n_trees", 0, 5000, false, true},
      {"max_depth", 1, 16, false, true},
      {"learning_rate", 0, 1, true, false},
      {"min_samples_leaf", 1, 100000, false, true},
      {"min_split_gain", 0, 1e12, false, false},
  };
  static const std::vector<Limit> mlp{
      {"hidden_1", 1, 4096, false, true},
      {"hidden_2", 0, 4096, false, true},
      {"activation", 0, 1, false, true},
      {"learning_rate", 0, 100, true, false},
      {"epochs", 0, 1e6, false, true},
      {"batch_size", 0, 1e7, false, true},
      {"weight_decay", 0, 1, false, false},
  };
  static const std::vector<Limit> none;
  switch (kind) {
    case ModelKind::kGbt: return gbt;
    case ModelKind::kMlp: return mlp;
    case ModelKind::kEnsemble: return none;
  }
  return none;
}

}  // namespace

Hyperparameters default_hyperparameters(ModelKind kind) {
  switch (kind) {
    case ModelKind::kGbt:
      return {{"n_trees", 100}, {"max_depth", 4}, {"learning_rate", 0.1}, {"min_samples_leaf", 1},
              {"min_split_gain", 0.0}};
    case ModelKind::kMlp:
      return {{"hidden_1", 64},   {"hidden_2", 0},   {"activation", 0},  {"learning_rate", 1e-3},
              {"epochs", 500},    {"batch_size", 0}, {"weight_decay", 0}};
    case ModelKind::kEnsemble:
      return {};
  }
  return {};
}

void validate_hyperparameters(ModelKind kind, const Hyperparameters& hp) {
  const auto& limits = limits_for(kind);
  for (const auto& [key, value] : hp.values()) {
    const auto it = std::find_if(limits.begin(), limits.end(),
                                 [&](const Limit& l) { return key == l.name; });
    if (it == limits.end()) {
      throw Error(ErrorCode::kInvalidArgument, std::string(model_kind_name(kind)) +
                                                   " has no hyperparameter '" + key + "'");
    }
    const bool low_ok = it->low_open ? value > it->low : value >= it->low;
    const bool integral = !it->integer || value == std::round(value);
    if (!std::isfinite(value) || !low_ok || value > it->high || !integral) {
      throw Error(ErrorCode::kInvalidArgument,
                  key + "=" + format_double(value) + " is outside its declared range");
    }
  }
}

SearchSpace default_search_space(ModelKind kind) {
  switch (kind) {
    case ModelKind::kGbt:
      return {{
          {"n_trees", 50, 400, true, true, {}},
          {"max_depth", 2, 6, false, true, {}},
          {"learning_rate", 0.02, 0.3, true, false, {}},
          {"min_samples_leaf", 1, 10, false, true, {}},
      }};
    case ModelKind::kMlp:
      return {{
          {"hidden_1", 0, 0, false, true, {16, 32, 64}},
          {"hidden_2", 0, 0, false, true, {0}},
          {"activation", 0, 0, false, true, {0}},
          {"learning_rate", 1e-3, 3e-2, true, false, {}},
          {"epochs", 0, 0, false, true, {300, 500}},
          {"batch_size", 0, 0, false, true, {0, 64}},
          {"weight_decay", 1e-7, 1e-4, true, false, {}},
      }};
    case ModelKind::kEnsemble:
      return {};
  }
  return {};
}

SearchSpace alternate_mlp_search_space() {
  return {{
      {"hidden_1", 0, 0, false, true, {32, 64}},
      {"hidden_2", 0, 0, false, true, {16, 32}},
      {"activation", 0, 0, false, true, {1}},
      {"learning_rate", 1e-3, 2e-2, true, false, {}},
      {"epochs", 0, 0, false, true, {300, 500}},
      {"batch_size", 0, 0, false, true, {0, 64}},
      {"weight_decay", 1e-7, 1e-4, true, false, {}},
  }};
}

// ---------------------------------------------------------------- cross-validation

std::vector<std::vector<std::size_t>> fold_assignment(std::size_t n, std::size_t k,
                                                      std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "cross-validation needs k >= 2");
  if (k > n) {
    throw Error(ErrorCode::kDatasetTooSmall,
                "k=" + std::to_string(k) + " exceeds " + std::to_string(n) + " rows");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, {0xf01d});
  shuffle_indices(order, rng);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t start = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                    order.begin() + static_cast<std::ptrdiff_t>(start + size));
    std::sort(folds[f].begin(), folds[f].end());
    start += size;
  }
  return folds;
}

double cross_validate(const TabularDataset& train, ModelKind kind, const Hyperparameters& hp,
                      std::size_t k, std::uint64_t seed) {
  if (kind == ModelKind::kEnsemble) {
    throw Error(ErrorCode::kInvalidArgument, "cross-validation supports gbt and mlp only");
  }
  validate_hyperparameters(kind, hp);
  const auto folds = fold_assignment(train.rows(), k, seed);
  std::vector<double> scores(k);
  parallel_for(k, [&](std::size_t f) {
    std::vector<char> held(train.rows(), 0);
    for (std::size_t r : folds[f]) held[r] = 1;
    std::vector<std::size_t> fit_rows;
    for (std::size_t r = 0; r < train.rows(); ++r) {
      if (!held[r]) fit_rows.push_back(r);
    }
    const TabularDataset fit = train.select_rows(fit_rows);
    const TabularDataset validation = train.select_rows(folds[f]);
    const TrainedSurrogate model = fit_surrogate(kind, fit, {hp}, derive_seed(seed, {f}));
    scores[f] = mean_squared_error(validation.targets(), model.predict(validation.features()));
  });
  double total = 0.0;
  for (double s : scores) total += s;
  return total / static_cast<double>(k);
}

// ---------------------------------------------------------------- search

Hyperparameters RandomSearch::propose(const SearchSpace& space, std::size_t trial,
                                      std::uint64_t seed) const {
  Rng rng = make_rng(seed, {0x7a1, trial});
  Hyperparameters hp;
  for (const auto& p : space.params) hp.set(p.name, p.sample(rng));
  return hp;
}

std::vector<std::size_t> TuneResult::ranking() const {
  std::vector<std::size_t> order(trials.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return trials[a].score < trials[b].score; });
  return order;
}

TuneResult tune(const TabularDataset& train, ModelKind kind, const SearchSpace& space,
                std::size_t budget, std::size_t k, std::uint64_t seed,
                const SearchStrategy& strategy) {
  if (space.empty()) throw Error(ErrorCode::kInvalidArgument, "empty search space");
  if (budget < 1) throw Error(ErrorCode::kInvalidArgument, "tuning budget must be >= 1");
  TuneResult result;
  result.trials.resize(budget);
  for (std::size_t t = 0; t < budget; ++t) {
    result.trials[t].index = t;
    result.trials[t].hyperparameters = strategy.propose(space, t, seed);
    validate_hyperparameters(kind, result.trials[t].hyperparameters);
  }
  // Trials run sequentially; cross_validate parallelizes over folds.
  for (auto& trial : result.trials) {
    try {
      trial.score = cross_validate(train, kind, trial.hyperparameters, k, seed);
      trial.status = std::isfinite(trial.score) ? "ok" : "non-finite-score";
      if (!std::isfinite(trial.score)) trial.score = std::numeric_limits<double>::infinity();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTrainingDiverged) throw;
      trial.score = std::numeric_limits<double>::infinity();
      trial.status = std::string(error_code_name(e.code()));
    }
  }
  result.best_index = result.ranking().front();
  result.best = result.trials[result.best_index].hyperparameters;
  result.best_score = result.trials[result.best_index].score;
  return result;
}

}  // namespace mlsmo
