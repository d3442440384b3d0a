#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>

#include "mlsmo/error.hpp"
#include "mlsmo/random.hpp"
#include "mlsmo/surrogate.hpp"

namespace mlsmo {

using nlohmann::json;

TrainedSurrogate::TrainedSurrogate(Body body, std::size_t n_features, std::size_t n_targets,
                                   TrainingRecord record)
    : body_(std::move(body)),
      n_features_(n_features),
      n_targets_(n_targets),
      record_(std::move(record)) {
  if (const auto* trees = std::get_if<std::vector<GbtModel>>(&body_)) {
    if (trees->size() != n_targets_) {
      throw Error(ErrorCode::kDimensionMismatch, "gbt bundle needs one model per target");
    }
  }
  if (const auto* ens = std::get_if<EnsembleModel>(&body_)) {
    if (ens->members.size() != ens->weights.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "ensemble weights/members length");
    }
  }
}

ModelKind TrainedSurrogate::kind() const {
  switch (body_.index()) {
    case 0: return ModelKind::kGbt;
    case 1: return ModelKind::kMlp;
    default: return ModelKind::kEnsemble;
  }
}

Matrix TrainedSurrogate::predict(const Matrix& designs) const {
  if (designs.cols() != n_features_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "expected " + std::to_string(n_features_) + " columns, got " +
                    std::to_string(designs.cols()));
  }
  if (const auto* trees = std::get_if<std::vector<GbtModel>>(&body_)) {
    Matrix out(designs.rows(), n_targets_);
    for (std::size_t r = 0; r < designs.rows(); ++r) {
      for (std::size_t t = 0; t < n_targets_; ++t) out(r, t) = (*trees)[t].predict_row(designs.row(r));
    }
    return out;
  }
  if (const auto* mlp = std::get_if<MlpModel>(&body_)) return mlp->predict(designs);
  return std::get<EnsembleModel>(body_).predict(designs);
}

TrainedSurrogate fit_surrogate(ModelKind kind, const TabularDataset& train,
                               const std::vector<Hyperparameters>& hp, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  TrainingRecord record;
  record.seed = seed;
  std::optional<TrainedSurrogate::Body> body;
  if (kind == ModelKind::kGbt) {
    if (hp.size() != 1 && hp.size() != train.n_targets()) {
      throw Error(ErrorCode::kInvalidArgument, "gbt needs one hyperparameter set or one per target");
    }
    std::vector<GbtModel> models;
    for (std::size_t t = 0; t < train.n_targets(); ++t) {
      const Hyperparameters& h = hp.size() == 1 ? hp.front() : hp[t];
      models.push_back(train_gbt(train, t, h, derive_seed(seed, {t})));
      record.hyperparameters.push_back(h);
    }
    body = std::move(models);
  } else if (kind == ModelKind::kMlp) {
    if (hp.size() != 1) throw Error(ErrorCode::kInvalidArgument, "mlp needs one hyperparameter set");
    body = train_mlp(train, hp.front(), seed);
    record.hyperparameters.push_back(hp.front());
  } else {
    throw Error(ErrorCode::kInvalidArgument, "ensembles are built with train_ensemble");
  }
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return TrainedSurrogate(std::move(*body), train.n_features(), train.n_targets(),
                          std::move(record));
}

// ---------------------------------------------------------------- metrics

double mean_squared_error(const Matrix& truth, const Matrix& predicted) {
  if (truth.rows() != predicted.rows() || truth.cols() != predicted.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "mse operand shapes differ");
  }
  double sum = 0.0;
  const auto a = truth.data();
  const auto b = predicted.data();
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return sum / static_cast<double>(a.size());
}

RegressionMetrics regression_metrics(std::span<const double> truth,
                                     std::span<const double> predicted) {
  if (truth.size() != predicted.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "metric operand lengths differ");
  }
  if (truth.empty()) throw Error(ErrorCode::kInvalidArgument, "no rows to evaluate");
  RegressionMetrics m;
  double ape_sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double residual = truth[i] - predicted[i];
    m.mse += residual * residual;
    if (std::abs(truth[i]) < kZeroTargetThreshold) {
      ++m.excluded_zero_targets;
      continue;
    }
    ape_sum += std::abs(residual) / std::abs(truth[i]);
    m.residuals.push_back(residual);
  }
  m.mse /= static_cast<double>(truth.size());
  if (m.residuals.empty()) {
    throw Error(ErrorCode::kUndefinedMape, "every target is below the zero-exclusion threshold");
  }
  m.mape = 100.0 * ape_sum / static_cast<double>(m.residuals.size());
  return m;
}

std::vector<RegressionMetrics> evaluate(const Predictor& model, const TabularDataset& test) {
  const Matrix predicted = model.predict(test.features());
  std::vector<RegressionMetrics> out;
  for (std::size_t t = 0; t < test.n_targets(); ++t) {
    const auto truth = test.targets().column(t);
    const auto pred = predicted.column(t);
    out.push_back(regression_metrics(truth, pred));
  }
  return out;
}

// ---------------------------------------------------------------- persistence

namespace {

constexpr const char* kFormat = "mlsmo-surrogate";
constexpr int kVersion = 1;

double number_or_nan(const json& v) {
  return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

json scaler_to_json(const Scaler& s) {
  return {{"kind", s.kind == ScalerKind::kStandard ? "standard" : "minmax"},
          {"shift", s.shift},
          {"scale", s.scale}};
}

Scaler scaler_from_json(const json& j) {
  Scaler s;
  s.kind = j.at("kind").get<std::string>() == "standard" ? ScalerKind::kStandard
                                                         : ScalerKind::kMinMax;
  s.shift = j.at("shift").get<std::vector<double>>();
  s.scale = j.at("scale").get<std::vector<double>>();
  return s;
}

json gbt_to_json(const GbtModel& g) {
  json trees = json::array();
  for (const auto& t : g.trees) {
    json f = json::array(), th = json::array(), l = json::array(), r = json::array(),
         v = json::array();
    for (const auto& n : t.nodes) {
      f.push_back(n.feature);
      th.push_back(n.threshold);
      l.push_back(n.left);
      r.push_back(n.right);
      v.push_back(n.value);
    }
    trees.push_back({{"feature", f}, {"threshold", th}, {"left", l}, {"right", r}, {"value", v}});
  }
  return {{"learning_rate", g.learning_rate},
          {"base_prediction", g.base_prediction},
          {"feature_gain", g.feature_gain},
          {"trees", trees}};
}

GbtModel gbt_from_json(const json& j) {
  GbtModel g;
  g.learning_rate = j.at("learning_rate").get<double>();
  g.base_prediction = j.at("base_prediction").get<double>();
  g.feature_gain = j.at("feature_gain").get<std::vector<double>>();
  for (const auto& t : j.at("trees")) {
    RegressionTree tree;
    const auto f = t.at("feature").get<std::vector<int>>();
    const auto th = t.at("threshold").get<std::vector<double>>();
    const auto l = t.at("left").get<std::vector<int>>();
    const auto r = t.at("right").get<std::vector<int>>();
    const auto v = t.at("value").get<std::vector<double>>();
    for (std::size_t i = 0; i < f.size(); ++i) tree.nodes.push_back({f[i], th[i], l[i], r[i], v[i]});
    g.trees.push_back(std::move(tree));
  }
  return g;
}

json mlp_to_json(const MlpModel& m) {
  json layers = json::array();
  for (const auto& l : m.layers) {
    layers.push_back(
        {{"inputs", l.inputs}, {"outputs", l.outputs}, {"weights", l.weights}, {"bias", l.bias}});
  }
  return {{"activation", m.activation == Activation::kRelu ? "relu" : "tanh"},
          {"layers", layers},
          {"input_scaler", scaler_to_json(m.input_scaler)},
          {"output_scaler", scaler_to_json(m.output_scaler)}};
}

MlpModel mlp_from_json(const json& j) {
  MlpModel m;
  m.activation = j.at("activation").get<std::string>() == "relu" ? Activation::kRelu
                                                                 : Activation::kTanh;
  for (const auto& l : j.at("layers")) {
    DenseLayer layer;
    layer.inputs = l.at("inputs").get<std::size_t>();
    layer.outputs = l.at("outputs").get<std::size_t>();
    layer.weights = l.at("weights").get<std::vector<double>>();
    layer.bias = l.at("bias").get<std::vector<double>>();
    if (layer.weights.size() != layer.inputs * layer.outputs || layer.bias.size() != layer.outputs) {
      throw Error(ErrorCode::kParse, "mlp layer arrays do not match their declared shape");
    }
    m.layers.push_back(std::move(layer));
  }
  m.input_scaler = scaler_from_json(j.at("input_scaler"));
  m.output_scaler = scaler_from_json(j.at("output_scaler"));
  return m;
}

}  // namespace

json surrogate_to_json(const TrainedSurrogate& model) {
  const TrainingRecord& rec = model.record();
  json hps = json::array();
  for (const auto& hp : rec.hyperparameters) hps.push_back(hp.values());
  json doc{{"format", kFormat},
           {"version", kVersion},
           {"kind", model_kind_name(model.kind())},
           {"n_features", model.n_features()},
           {"n_targets", model.n_targets()},
           {"record",
            {{"hyperparameters", hps},
             {"cv_score", rec.cv_score},
             {"seed", rec.seed},
             {"wall_seconds", rec.wall_seconds}}}};
  if (const auto* trees = std::get_if<std::vector<GbtModel>>(&model.body())) {
    json arr = json::array();
    for (const auto& g : *trees) arr.push_back(gbt_to_json(g));
    doc["gbt"] = arr;
  } else if (const auto* mlp = std::get_if<MlpModel>(&model.body())) {
    doc["mlp"] = mlp_to_json(*mlp);
  } else {
    const auto& ens = std::get<EnsembleModel>(model.body());
    json members = json::array();
    for (const auto& m : ens.members) members.push_back(surrogate_to_json(*m));
    doc["ensemble"] = {{"weights", ens.weights}, {"holdout_mse", ens.holdout_mse}, {"members", members}};
  }
  return doc;
}

std::shared_ptr<const TrainedSurrogate> surrogate_from_json(const json& doc) {
  try {
    if (doc.at("format").get<std::string>() != kFormat || doc.at("version").get<int>() != kVersion) {
      throw Error(ErrorCode::kParse, "not a version-1 surrogate bundle");
    }
    const ModelKind kind = parse_model_kind(doc.at("kind").get<std::string>());
    const auto d = doc.at("n_features").get<std::size_t>();
    const auto m = doc.at("n_targets").get<std::size_t>();
    TrainingRecord rec;
    const json& r = doc.at("record");
    for (const auto& hp : r.at("hyperparameters")) {
      Hyperparameters h;
      for (const auto& [k, v] : hp.items()) h.set(k, v.get<double>());
      rec.hyperparameters.push_back(std::move(h));
    }
    rec.cv_score = number_or_nan(r.at("cv_score"));
    rec.seed = r.at("seed").get<std::uint64_t>();
    rec.wall_seconds = r.at("wall_seconds").get<double>();

    switch (kind) {
      case ModelKind::kGbt: {
        std::vector<GbtModel> trees;
        for (const auto& g : doc.at("gbt")) trees.push_back(gbt_from_json(g));
        return std::make_shared<const TrainedSurrogate>(std::move(trees), d, m, std::move(rec));
      }
      case ModelKind::kMlp:
        return std::make_shared<const TrainedSurrogate>(mlp_from_json(doc.at("mlp")), d, m,
                                                        std::move(rec));
      case ModelKind::kEnsemble: {
        const json& e = doc.at("ensemble");
        EnsembleModel ens;
        ens.weights = e.at("weights").get<std::vector<double>>();
        ens.holdout_mse = number_or_nan(e.at("holdout_mse"));
        for (const auto& member : e.at("members")) ens.members.push_back(surrogate_from_json(member));
        return std::make_shared<const TrainedSurrogate>(std::move(ens), d, m, std::move(rec));
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed surrogate bundle: ") + e.what());
  }
  throw Error(ErrorCode::kParse, "unknown surrogate kind");
}

void save_surrogate(const std::filesystem::path& path, const TrainedSurrogate& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << surrogate_to_json(model).dump() << '\n';
}

std::shared_ptr<const TrainedSurrogate> load_surrogate(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return surrogate_from_json(doc);
}

}  // namespace mlsmo
