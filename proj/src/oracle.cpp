#include "mlsmo/oracle.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "mlsmo/error.hpp"

namespace mlsmo {

std::string_view infeasible_reason_name(InfeasibleReason reason) {
  return reason == InfeasibleReason::kOutOfBounds ? "out_of_bounds" : "constraint_violated";
}

std::vector<std::string> OracleProblem::objective_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n_objectives(); ++i) names.push_back("f" + std::to_string(i + 1));
  return names;
}

std::vector<std::string> OracleProblem::feature_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n_features(); ++i) names.push_back("x" + std::to_string(i));
  return names;
}

EvaluationOutcome OracleProblem::evaluate(std::span<const double> x) const {
  if (x.size() != n_features()) {
    throw Error(ErrorCode::kDimensionMismatch, name() + " expects " +
                                                   std::to_string(n_features()) + " inputs");
  }
  if (!bounds().contains(x)) return {{}, InfeasibleReason::kOutOfBounds};
  return evaluate_in_bounds(x);
}

Matrix OracleProblem::true_front(std::size_t) const {
  throw Error(ErrorCode::kUnavailableFront, name() + " has no analytic front");
}

namespace {

enum class ZdtVariant { k1, k2, k3 };

class Zdt : public OracleProblem {
 public:
  Zdt(ZdtVariant variant, bool disk) : variant_(variant), disk_(disk) {}

  std::string name() const override {
    const char* base = variant_ == ZdtVariant::k1 ? "zdt1" : variant_ == ZdtVariant::k2 ? "zdt2" : "zdt3";
    return disk_ ? std::string(base) + "-disk" : base;
  }
  std::size_t n_features() const override { return 30; }
  std::size_t n_objectives() const override { return 2; }
  FeatureBounds bounds() const override {
    return FeatureBounds(std::vector<double>(30, 0.0), std::vector<double>(30, 1.0));
  }
  bool has_true_front() const override { return !disk_; }

  Matrix true_front(std::size_t n) const override {
    if (disk_) return OracleProblem::true_front(n);
    if (n == 0) return Matrix(0, 2);
    Matrix out(n, 2);
    if (variant_ == ZdtVariant::k3) {
      fill_zdt3_front(out);
      return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
      out(i, 0) = t;
      out(i, 1) = front_f2(t);
    }
    return out;
  }

 protected:
  EvaluationOutcome evaluate_in_bounds(std::span<const double> x) const override {
    if (disk_) {
      const double dx = x[0] - 0.5;
      if (dx * dx + x[1] * x[1] < kDiskRadiusSquared) {
        return {{}, InfeasibleReason::kConstraintViolated};
      }
    }
    double tail = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) tail += x[i];
    const double g = 1.0 + 9.0 * tail / static_cast<double>(x.size() - 1);
    const double f1 = x[0];
    const double ratio = f1 / g;
    double h = 0.0;
    switch (variant_) {
      case ZdtVariant::k1: h = 1.0 - std::sqrt(ratio); break;
      case ZdtVariant::k2: h = 1.0 - ratio * ratio; break;
      case ZdtVariant::k3:
        h = 1.0 - std::sqrt(ratio) - ratio * std::sin(10.0 * std::numbers::pi * f1);
        break;
    }
    return {{f1, g * h}, std::nullopt};
  }

 private:
  double front_f2(double t) const {
    switch (variant_) {
      case ZdtVariant::k1: return 1.0 - std::sqrt(t);
      case ZdtVariant::k2: return 1.0 - t * t;
      case ZdtVariant::k3: return 1.0 - std::sqrt(t) - t * std::sin(10.0 * std::numbers::pi * t);
    }
    return 0.0;
  }

  // The ZDT3 front is the union of five f1 intervals; points are spread over
  // them in proportion to their length.
  void fill_zdt3_front(Matrix& out) const {
    static constexpr double kIntervals[5][2] = {{0.0, 0.0830015349},
                                                {0.1822287280, 0.2577623634},
                                                {0.4093136748, 0.4538821041},
                                                {0.6183967944, 0.6525117038},
                                                {0.8233317983, 0.8518328654}};
    double total = 0.0;
    for (const auto& iv : kIntervals) total += iv[1] - iv[0];
    const std::size_t n = out.rows();
    for (std::size_t i = 0; i < n; ++i) {
      double pos = n == 1 ? 0.0 : total * static_cast<double>(i) / static_cast<double>(n - 1);
      double t = kIntervals[4][1];
      for (const auto& iv : kIntervals) {
        if (pos <= iv[1] - iv[0]) {
          t = iv[0] + pos;
          break;
        }
        pos -= iv[1] - iv[0];
      }
      out(i, 0) = t;
      out(i, 1) = front_f2(t);
    }
  }

  ZdtVariant variant_;
  bool disk_;
};

class Dtlz2 : public OracleProblem {
 public:
  std::string name() const override { return "dtlz2"; }
  std::size_t n_features() const override { return 12; }
  std::size_t n_objectives() const override { return 3; }
  FeatureBounds bounds() const override {
    return FeatureBounds(std::vector<double>(12, 0.0), std::vector<double>(12, 1.0));
  }
  bool has_true_front() const override { return true; }

  Matrix true_front(std::size_t n) const override {
    // Angles: first coordinate on an even grid, second from the golden-ratio
    // sequence, so any n gives well-spread points on the octant.
    Matrix out(n, 3);
    constexpr double kGolden = 0.6180339887498949;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
      const double b = std::fmod(static_cast<double>(i) * kGolden, 1.0);
      const double p = a * std::numbers::pi / 2.0;
      const double q = b * std::numbers::pi / 2.0;
      out(i, 0) = std::cos(p) * std::cos(q);
      out(i, 1) = std::cos(p) * std::sin(q);
      out(i, 2) = std::sin(p);
    }
    return out;
  }

 protected:
  EvaluationOutcome evaluate_in_bounds(std::span<const double> x) const override {
    double g = 0.0;
    for (std::size_t i = 2; i < x.size(); ++i) g += (x[i] - 0.5) * (x[i] - 0.5);
    const double p = x[0] * std::numbers::pi / 2.0;
    const double q = x[1] * std::numbers::pi / 2.0;
    return {{(1.0 + g) * std::cos(p) * std::cos(q), (1.0 + g) * std::cos(p) * std::sin(q),
             (1.0 + g) * std::sin(p)},
            std::nullopt};
  }
};

}  // namespace

std::unique_ptr<OracleProblem> make_problem(std::string_view name) {
  if (name == "zdt1") return std::make_unique<Zdt>(ZdtVariant::k1, false);
  if (name == "zdt2") return std::make_unique<Zdt>(ZdtVariant::k2, false);
  if (name == "zdt3") return std::make_unique<Zdt>(ZdtVariant::k3, false);
  if (name == "zdt1-disk") return std::make_unique<Zdt>(ZdtVariant::k1, true);
  if (name == "dtlz2") return std::make_unique<Dtlz2>();
  throw Error(ErrorCode::kInvalidArgument, "unknown oracle problem '" + std::string(name) + "'");
}

std::vector<std::string> problem_names() { return {"zdt1", "zdt2", "zdt3", "dtlz2", "zdt1-disk"}; }

std::vector<EvaluationOutcome> evaluate_batch(const OracleProblem& problem, const Matrix& designs) {
  if (designs.cols() != problem.n_features()) {
    throw Error(ErrorCode::kDimensionMismatch, problem.name() + " expects " +
                                                   std::to_string(problem.n_features()) +
                                                   " columns");
  }
  std::vector<EvaluationOutcome> out;
  out.reserve(designs.rows());
  for (std::size_t r = 0; r < designs.rows(); ++r) out.push_back(problem.evaluate(designs.row(r)));
  return out;
}

Matrix evaluate_or_nan(const OracleProblem& problem, const Matrix& designs) {
  const auto outcomes = evaluate_batch(problem, designs);
  Matrix out(designs.rows(), problem.n_objectives(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    if (outcomes[r].feasible()) {
      std::copy(outcomes[r].objectives.begin(), outcomes[r].objectives.end(), out.row(r).begin());
    }
  }
  return out;
}

Sampler parse_sampler(std::string_view name) {
  if (name == "lhd" || name == "latin_hypercube") return Sampler::kLatinHypercube;
  if (name == "uniform") return Sampler::kUniform;
  throw Error(ErrorCode::kInvalidArgument, "unknown sampler '" + std::string(name) + "'");
}

std::string_view sampler_name(Sampler sampler) {
  return sampler == Sampler::kLatinHypercube ? "lhd" : "uniform";
}

GeneratedDataset generate_dataset(const OracleProblem& problem, Sampler sampler, std::size_t n,
                                  std::uint64_t seed) {
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "generate needs n >= 2");
  const FeatureBounds bounds = problem.bounds();
  const Matrix designs = sampler == Sampler::kLatinHypercube ? latin_hypercube(n, bounds, seed)
                                                             : uniform_random(n, bounds, seed);
  const auto outcomes = evaluate_batch(problem, designs);
  Matrix features(0, problem.n_features());
  Matrix targets(0, problem.n_objectives());
  std::size_t dropped = 0;
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    if (!outcomes[r].feasible()) {
      ++dropped;
      continue;
    }
    features.append_row(designs.row(r));
    targets.append_row(outcomes[r].objectives);
  }
  if (features.rows() == 0) {
    throw Error(ErrorCode::kAllInfeasible, "every sampled design of " + problem.name() +
                                               " was infeasible");
  }
  return {TabularDataset(problem.feature_names(), problem.objective_names(), std::move(features),
                         std::move(targets)),
          dropped};
}

}  // namespace mlsmo
