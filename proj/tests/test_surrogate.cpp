#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "doctest.h"
#include "mlsmo/error.hpp"
#include "mlsmo/surrogate.hpp"
#include "mlsmo/tuning.hpp"
#include "oracles.hpp"

using namespace mlsmo;

namespace {

TabularDataset make_dataset(const Matrix& x, const Matrix& y) {
  std::vector<std::string> f;
  std::vector<std::string> t;
  for (std::size_t j = 0; j < x.cols(); ++j) f.push_back("x" + std::to_string(j));
  for (std::size_t j = 0; j < y.cols(); ++j) t.push_back("y" + std::to_string(j));
  return TabularDataset(f, t, x, y);
}

// y0 = sin(3 x0) + x1^2, y1 = x0 - 2 x2
TabularDataset smooth_dataset(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const Matrix x = oracle::random_matrix(n, 3, gen);
  Matrix y(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    y(i, 0) = std::sin(3.0 * x(i, 0)) + x(i, 1) * x(i, 1);
    y(i, 1) = x(i, 0) - 2.0 * x(i, 2);
  }
  return make_dataset(x, y);
}

double training_mse(const GbtModel& model, const TabularDataset& ds, std::size_t trees) {
  double s = 0.0;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    const double e = ds.targets()(i, 0) - model.predict_row(ds.features().row(i), trees);
    s += e * e;
  }
  return s / static_cast<double>(ds.rows());
}

}  // namespace

TEST_CASE("gbt with zero trees predicts the training mean") {
  const TabularDataset ds = smooth_dataset(40, 1);
  const GbtModel m = train_gbt(ds, 0, {{"n_trees", 0}}, 1);
  const std::vector<double> y = ds.targets().column(0);
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  CHECK(m.base_prediction == doctest::Approx(mean).epsilon(1e-14));
  for (std::size_t i = 0; i < ds.rows(); ++i) CHECK(m.predict_row(ds.features().row(i)) == m.base_prediction);
}

TEST_CASE("min_split_gain blocks splits below the threshold") {
  const TabularDataset ds = smooth_dataset(40, 1);
  const std::vector<double> y = ds.targets().column(0);
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double sse = 0.0;
  for (double v : y) sse += (v - mean) * (v - mean);
  const GbtModel blocked = train_gbt(ds, 0, {{"n_trees", 5}, {"min_split_gain", sse + 1.0}}, 1);
  for (const auto& t : blocked.trees) CHECK(t.nodes.size() == 1);
  CHECK(std::all_of(blocked.feature_gain.begin(), blocked.feature_gain.end(), [](double g) { return g == 0.0; }));
  const GbtModel open = train_gbt(ds, 0, {{"n_trees", 5}, {"min_split_gain", 0.0}}, 1);
  CHECK(open.trees.front().nodes.size() > 1);
}

TEST_CASE("a single stump fits a step exactly") {
  Matrix x(20, 1);
  Matrix y(20, 1);
  for (std::size_t i = 0; i < 20; ++i) {
    x(i, 0) = (static_cast<double>(i) + 0.5) / 20.0;
    y(i, 0) = x(i, 0) < 0.5 ? 0.0 : 1.0;
  }
  const TabularDataset ds = make_dataset(x, y);
  const GbtModel m =
      train_gbt(ds, 0, {{"n_trees", 1}, {"max_depth", 1}, {"learning_rate", 1.0}}, 0);
  CHECK(training_mse(m, ds, 1) == doctest::Approx(0.0).epsilon(1e-24));
  REQUIRE(m.trees.size() == 1);
  // Midpoint between the last 0-class and the first 1-class sample.
  CHECK(m.trees[0].nodes[0].threshold == doctest::Approx(0.5));
}

TEST_CASE("gbt training error never increases with more trees") {
  const TabularDataset ds = smooth_dataset(120, 2);
  const GbtModel m = train_gbt(ds, 0,
                               {{"n_trees", 60}, {"max_depth", 3}, {"learning_rate", 0.3}}, 2);
  double previous = training_mse(m, ds, 0);
  for (std::size_t t = 1; t <= m.trees.size(); ++t) {
    const double now = training_mse(m, ds, t);
    CHECK(now <= previous + 1e-12);
    previous = now;
  }
  CHECK(previous < 0.05 * training_mse(m, ds, 0));
}

TEST_CASE("gbt gains are nonnegative and zero for unused features") {
  const TabularDataset ds = smooth_dataset(150, 3);
  const GbtModel m = train_gbt(ds, 1, {{"n_trees", 30}, {"max_depth", 2}}, 3);
  for (std::size_t f = 0; f < ds.n_features(); ++f) {
    CHECK(m.feature_gain[f] >= 0.0);
    const bool used = std::any_of(m.trees.begin(), m.trees.end(),
                                  [&](const RegressionTree& t) { return t.splits_on(f); });
    if (!used) CHECK(m.feature_gain[f] == 0.0);
  }
  // y1 does not depend on x1.
  CHECK(m.feature_gain[1] < 1e-3 * (m.feature_gain[0] + m.feature_gain[2]));
}

TEST_CASE("mlp gradient matches central differences") {
  std::mt19937_64 gen(21);
  for (int rep = 0; rep < 5; ++rep) {
    const std::size_t hidden[] = {3};
    const std::size_t two_layers[] = {4, 3};
    const Activation act = rep % 2 == 0 ? Activation::kTanh : Activation::kRelu;
    MlpModel model = rep < 3 ? init_mlp(2, 1, hidden, act, gen()) : init_mlp(3, 2, two_layers, act, gen());
    const Matrix x = oracle::random_matrix(6, model.n_inputs(), gen, -1.0, 1.0);
    const Matrix y = oracle::random_matrix(6, model.n_outputs(), gen, -1.0, 1.0);
    const double wd = 1e-3;
    const LossAndGradient lg = mlp_loss_and_gradient(model, x, y, wd);
    std::vector<double> p = mlp_parameters(model);
    const double h = 1e-5;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double keep = p[k];
      p[k] = keep + h;
      set_mlp_parameters(model, p);
      const double up = mlp_loss_and_gradient(model, x, y, wd).loss;
      p[k] = keep - h;
      set_mlp_parameters(model, p);
      const double down = mlp_loss_and_gradient(model, x, y, wd).loss;
      p[k] = keep;
      set_mlp_parameters(model, p);
      const double fd = (up - down) / (2.0 * h);
      num += (fd - lg.gradient[k]) * (fd - lg.gradient[k]);
      den += fd * fd + lg.gradient[k] * lg.gradient[k];
    }
    CHECK(std::sqrt(num / den) < 1e-4);
  }
}

TEST_CASE("mlp learns a line") {
  std::mt19937_64 gen(4);
  const Matrix x = oracle::random_matrix(200, 1, gen);
  Matrix y(200, 1);
  for (std::size_t i = 0; i < 200; ++i) y(i, 0) = 2.0 * x(i, 0);
  const TabularDataset train = make_dataset(x, y);
  const MlpModel m = train_mlp(train, {{"hidden_1", 16}, {"learning_rate", 1e-2}, {"epochs", 800}}, 4);
  const Matrix xt = oracle::random_matrix(100, 1, gen);
  const Matrix pred = m.predict(xt);
  double mse = 0.0;
  for (std::size_t i = 0; i < 100; ++i) mse += std::pow(pred(i, 0) - 2.0 * xt(i, 0), 2) / 100.0;
  CHECK(mse < 1e-3);
}

TEST_CASE("mlp with zero epochs keeps its initialization") {
  const TabularDataset ds = smooth_dataset(30, 5);
  const MlpModel a = train_mlp(ds, {{"epochs", 0}}, 5);
  const MlpModel b = train_mlp(ds, {{"epochs", 0}}, 5);
  CHECK(mlp_parameters(a) == mlp_parameters(b));
  CHECK(a.predict(ds.features()).all_finite());
  const MlpModel trained = train_mlp(ds, {{"epochs", 5}}, 5);
  CHECK_FALSE(mlp_parameters(trained) == mlp_parameters(a));
}

TEST_CASE("simplex projection satisfies the optimality conditions") {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> v(1 + gen() % 8);
    for (double& x : v) x = normal(gen);
    const std::vector<double> w = project_to_simplex(v);
    double sum = 0.0;
    for (double x : w) {
      CHECK(x >= 0.0);
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
    // w = max(v - tau, 0) for a single tau.
    double tau = NAN;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (w[i] > 0.0) tau = v[i] - w[i];
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (w[i] > 0.0) CHECK(v[i] - w[i] == doctest::Approx(tau).epsilon(1e-12));
      else CHECK(v[i] <= tau + 1e-12);
    }
  }
}

TEST_CASE("ensemble weights") {
  const TabularDataset train = smooth_dataset(200, 9);
  const TabularDataset holdout = smooth_dataset(80, 10);

  SUBCASE("perfect member wins against a constant one") {
    auto good = std::make_shared<const TrainedSurrogate>(fit_surrogate(
        ModelKind::kGbt, train, {{{"n_trees", 300}, {"max_depth", 4}}}, 1));
    auto bad = std::make_shared<const TrainedSurrogate>(
        fit_surrogate(ModelKind::kGbt, train, {{{"n_trees", 0}}}, 1));
    const EnsembleModel e = train_ensemble({bad, good}, holdout);
    CHECK(e.weights[1] >= 0.99);
  }
  SUBCASE("identical members") {
    auto a = std::make_shared<const TrainedSurrogate>(
        fit_surrogate(ModelKind::kGbt, train, {{{"n_trees", 20}}}, 1));
    const EnsembleModel e = train_ensemble({a, a}, holdout);
    CHECK(e.weights[0] + e.weights[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.holdout_mse == doctest::Approx(mean_squared_error(holdout.targets(), a->predict(holdout.features()))));
  }
  SUBCASE("prediction is the convex combination of members") {
    auto a = std::make_shared<const TrainedSurrogate>(
        fit_surrogate(ModelKind::kGbt, train, {{{"n_trees", 20}}}, 1));
    auto b = std::make_shared<const TrainedSurrogate>(
        fit_surrogate(ModelKind::kMlp, train, {{{"epochs", 50}}}, 2));
    const EnsembleModel e = train_ensemble({a, b}, holdout);
    const Matrix pa = a->predict(holdout.features());
    const Matrix pb = b->predict(holdout.features());
    const Matrix pe = e.predict(holdout.features());
    for (std::size_t i = 0; i < pe.data().size(); ++i) {
      CHECK(pe.data()[i] ==
            doctest::Approx(e.weights[0] * pa.data()[i] + e.weights[1] * pb.data()[i]).epsilon(1e-12));
    }
    const double best = std::min(mean_squared_error(holdout.targets(), pa),
                                 mean_squared_error(holdout.targets(), pb));
    CHECK(e.holdout_mse <= best + 1e-6);
  }
}

TEST_CASE("cross validation") {
  SUBCASE("constant target") {
    std::mt19937_64 gen(1);
    const Matrix x = oracle::random_matrix(30, 2, gen);
    const TabularDataset ds = make_dataset(x, Matrix(30, 1, 4.25));
    CHECK(cross_validate(ds, ModelKind::kGbt, default_hyperparameters(ModelKind::kGbt), 3, 1) == 0.0);
    CHECK(cross_validate(ds, ModelKind::kMlp, {{"epochs", 300}, {"learning_rate", 1e-2}}, 3, 1) < 1e-4);
  }
  SUBCASE("leave one out") {
    const TabularDataset ds = smooth_dataset(5, 2);
    CHECK(std::isfinite(cross_validate(ds, ModelKind::kGbt, {{"n_trees", 10}}, 5, 3)));
  }
  SUBCASE("deterministic") {
    const TabularDataset ds = smooth_dataset(60, 3);
    const Hyperparameters hp{{"epochs", 30}};
    CHECK(cross_validate(ds, ModelKind::kMlp, hp, 3, 9) == cross_validate(ds, ModelKind::kMlp, hp, 3, 9));
  }
  SUBCASE("folds partition the rows") {
    const auto folds = fold_assignment(23, 4, 5);
    std::vector<int> seen(23, 0);
    for (const auto& f : folds) {
      CHECK((f.size() == 5 || f.size() == 6));
      for (std::size_t i : f) seen[i]++;
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  }
}

TEST_CASE("random search tuning") {
  const TabularDataset ds = smooth_dataset(80, 4);
  SUBCASE("budget one") {
    const SearchSpace space = default_search_space(ModelKind::kGbt);
    const TuneResult r = tune(ds.select_target(0), ModelKind::kGbt, space, 1, 3, 7);
    REQUIRE(r.trials.size() == 1);
    CHECK(r.best == r.trials[0].hyperparameters);
    CHECK(r.best == RandomSearch().propose(space, 0, 7));
  }
  SUBCASE("good learning rate beats a bad one") {
    SearchSpace space;
    space.params.push_back({"learning_rate", 0, 0, false, false, {0.01, 10.0}});
    space.params.push_back({"epochs", 0, 0, false, false, {200}});
    const TuneResult r = tune(ds, ModelKind::kMlp, space, 8, 3, 3);
    CHECK(r.best.get("learning_rate") == 0.01);
  }
  SUBCASE("deterministic") {
    const SearchSpace space = default_search_space(ModelKind::kGbt);
    const TuneResult a = tune(ds.select_target(1), ModelKind::kGbt, space, 4, 3, 11);
    const TuneResult b = tune(ds.select_target(1), ModelKind::kGbt, space, 4, 3, 11);
    CHECK(a.best == b.best);
    for (std::size_t i = 0; i < 4; ++i) CHECK(a.trials[i].score == b.trials[i].score);
  }
  SUBCASE("invalid budget") { CHECK_THROWS_AS(tune(ds, ModelKind::kGbt, default_search_space(ModelKind::kGbt), 0, 3, 1), Error); }
}

TEST_CASE("metrics") {
  const std::vector<double> y{100.0, 200.0};
  const std::vector<double> p{110.0, 180.0};
  const RegressionMetrics m = regression_metrics(y, p);
  CHECK(m.mape == doctest::Approx(10.0));
  CHECK(m.mse == doctest::Approx(250.0));

  const RegressionMetrics perfect = regression_metrics(y, y);
  CHECK(perfect.mape == 0.0);
  CHECK(perfect.mse == 0.0);

  const std::vector<double> z{0.0, 2.0};
  const std::vector<double> zp{1.0, 2.0};
  const RegressionMetrics excl = regression_metrics(z, zp);
  CHECK(excl.mape == 0.0);
  CHECK(excl.excluded_zero_targets == 1);

  const std::vector<double> zeros{0.0, 1e-9};
  try {
    regression_metrics(zeros, zeros);
    FAIL("expected undefined MAPE");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUndefinedMape);
  }
}

TEST_CASE("bundles: batch prediction, persistence") {
  const TabularDataset train = smooth_dataset(100, 12);
  const TabularDataset test = smooth_dataset(20, 13);
  auto gbt = std::make_shared<const TrainedSurrogate>(
      fit_surrogate(ModelKind::kGbt, train, {{{"n_trees", 25}}}, 3));
  auto mlp = std::make_shared<const TrainedSurrogate>(
      fit_surrogate(ModelKind::kMlp, train, {{{"epochs", 40}, {"hidden_2", 5}, {"activation", 1}}}, 3));
  auto ens = std::make_shared<const TrainedSurrogate>(
      make_ensemble_surrogate(train_ensemble({gbt, mlp}, test)));

  for (const auto& model : {gbt, mlp, ens}) {
    const Matrix batch = model->predict(test.features());
    for (std::size_t i = 0; i < test.rows(); ++i) {
      const Matrix one = model->predict(test.features().select_rows(std::vector<std::size_t>{i}));
      for (std::size_t j = 0; j < 2; ++j) CHECK(one(0, j) == batch(i, j));
    }
    const auto path = std::filesystem::temp_directory_path() / "mlsmo_bundle.json";
    save_surrogate(path, *model);
    const auto back = load_surrogate(path);
    CHECK(back->kind() == model->kind());
    CHECK(back->predict(test.features()) == batch);
  }
  const std::vector<RegressionMetrics> m = evaluate(*gbt, test);
  CHECK(m.size() == 2);
}

TEST_CASE("training is reproducible") {
  const TabularDataset ds = smooth_dataset(60, 14);
  const Matrix a = fit_surrogate(ModelKind::kMlp, ds, {{{"epochs", 30}}}, 5).predict(ds.features());
  const Matrix b = fit_surrogate(ModelKind::kMlp, ds, {{{"epochs", 30}}}, 5).predict(ds.features());
  CHECK(a == b);
  const Matrix c = fit_surrogate(ModelKind::kGbt, ds, {{{"n_trees", 30}}}, 5).predict(ds.features());
  const Matrix d = fit_surrogate(ModelKind::kGbt, ds, {{{"n_trees", 30}}}, 5).predict(ds.features());
  CHECK(c == d);
}

TEST_CASE("hyperparameter validation") {
  CHECK_THROWS_AS(validate_hyperparameters(ModelKind::kGbt, {{"max_depth", 0}}), Error);
  CHECK_THROWS_AS(validate_hyperparameters(ModelKind::kGbt, {{"unknown", 1}}), Error);
  CHECK_THROWS_AS(validate_hyperparameters(ModelKind::kMlp, {{"activation", 2}}), Error);
  CHECK_NOTHROW(validate_hyperparameters(ModelKind::kMlp, default_hyperparameters(ModelKind::kMlp)));
}
