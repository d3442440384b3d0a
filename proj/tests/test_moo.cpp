#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "mlsmo/moo.hpp"
#include "mlsmo/parallel.hpp"
#include "oracles.hpp"

using namespace mlsmo;

namespace {

ProblemSpec schaffer() {
  ProblemSpec p;
  p.bounds = FeatureBounds({-5.0}, {5.0});
  p.objective_names = {"f1", "f2"};
  p.directions = {Direction::kMinimize, Direction::kMinimize};
  p.evaluator = [](const Matrix& x) {
    Matrix out(x.rows(), 2);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      out(i, 0) = x(i, 0) * x(i, 0);
      out(i, 1) = (x(i, 0) - 2.0) * (x(i, 0) - 2.0);
    }
    return out;
  };
  return p;
}

ProblemSpec zdt1_spec(std::size_t d) {
  ProblemSpec p;
  p.bounds = FeatureBounds(std::vector<double>(d, 0.0), std::vector<double>(d, 1.0));
  p.objective_names = {"f1", "f2"};
  p.directions = {Direction::kMinimize, Direction::kMinimize};
  p.evaluator = [](const Matrix& x) {
    Matrix out(x.rows(), 2);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const auto f = oracle::zdt1(std::vector<double>(x.row(i).begin(), x.row(i).end()));
      out(i, 0) = f[0];
      out(i, 1) = f[1];
    }
    return out;
  };
  return p;
}

}  // namespace

TEST_CASE("dominance") {
  const std::vector<double> a{1.0, 1.0};
  const std::vector<double> b{1.0, 2.0};
  CHECK(dominates(a, b));
  CHECK_FALSE(dominates(b, a));
  CHECK_FALSE(dominates(a, a));
}

TEST_CASE("non-dominated sorting hand cases") {
  const SortResult chain = fast_non_dominated_sort(Matrix{{1, 1}, {2, 2}, {3, 3}});
  CHECK(chain.rank == std::vector<std::size_t>{0, 1, 2});
  const SortResult pair = fast_non_dominated_sort(Matrix{{1, 2}, {2, 1}});
  CHECK(pair.rank == std::vector<std::size_t>{0, 0});
  CHECK(pair.fronts.size() == 1);
}

TEST_CASE("non-dominated sorting matches dominance peeling") {
  std::mt19937_64 gen(12);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 1 + gen() % 120;
    const std::size_t m = 2 + gen() % 2;
    Matrix pts = oracle::random_matrix(n, m, gen);
    // Coarse values force ties and duplicates.
    if (rep % 3 == 0) {
      for (double& v : pts.data()) v = std::floor(v * 4.0);
    }
    const SortResult r = fast_non_dominated_sort(pts);
    CHECK(r.rank == oracle::peel_ranks(pts));
    std::size_t total = 0;
    for (std::size_t k = 0; k < r.fronts.size(); ++k) {
      for (std::size_t i : r.fronts[k]) CHECK(r.rank[i] == k);
      total += r.fronts[k].size();
    }
    CHECK(total == n);
  }
}

TEST_CASE("non-finite rows are demoted to a final front") {
  const SortResult r = fast_non_dominated_sort(Matrix{{1, 1}, {NAN, 0}, {2, 2}, {0, INFINITY}});
  CHECK(r.demoted == 2);
  CHECK(r.rank[0] == 0);
  CHECK(r.rank[2] == 1);
  CHECK(r.rank[1] == 2);
  CHECK(r.rank[3] == 2);
}

TEST_CASE("crowding distance") {
  const Matrix two{{0, 1}, {1, 0}};
  const std::size_t both[] = {0, 1};
  for (double d : crowding_distance(two, both)) CHECK(std::isinf(d));

  const Matrix three{{0, 2}, {1, 1}, {2, 0}};
  const std::size_t all[] = {0, 1, 2};
  const auto cd = crowding_distance(three, all);
  CHECK(std::isinf(cd[0]));
  CHECK(std::isinf(cd[2]));
  CHECK(cd[1] == doctest::Approx(2.0));

  const Matrix same{{1, 1}, {1, 1}, {1, 1}, {1, 1}};
  const std::size_t four[] = {0, 1, 2, 3};
  const auto flat = crowding_distance(same, four);
  CHECK(std::count_if(flat.begin(), flat.end(), [](double d) { return d == 0.0; }) == 2);
}

TEST_CASE("pareto filter") {
  const std::vector<Direction> min2(2, Direction::kMinimize);
  CHECK(pareto_filter(Matrix{{1, 1}, {0, 2}, {2, 0}, {2, 2}}, min2) == std::vector<std::size_t>{0, 1, 2});
  CHECK(pareto_filter(Matrix{{3, 4}}, min2) == std::vector<std::size_t>{0});
  CHECK(pareto_filter(Matrix{{1, 1}, {1, 1}, {2, 2}}, min2) == std::vector<std::size_t>{0, 1});

  std::mt19937_64 gen(5);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix pts = oracle::random_matrix(60, 3, gen);
    Matrix flipped = pts;
    for (std::size_t i = 0; i < flipped.rows(); ++i) flipped(i, 1) = -flipped(i, 1);
    const std::vector<Direction> dirs{Direction::kMinimize, Direction::kMaximize, Direction::kMinimize};
    CHECK(pareto_filter(flipped, dirs) == pareto_filter(pts, std::vector<Direction>(3, Direction::kMinimize)));
  }
}

TEST_CASE("variation operators") {
  const FeatureBounds b({0.0, -1.0, 2.0}, {1.0, 1.0, 3.0});
  Rng rng(4);
  SUBCASE("zero mutation rate is the identity") {
    std::vector<double> x{0.3, 0.1, 2.5};
    const auto keep = x;
    polynomial_mutation(x, 20.0, 0.0, b, rng);
    CHECK(x == keep);
  }
  SUBCASE("identical parents") {
    const std::vector<double> p{0.3, 0.1, 2.5};
    for (int i = 0; i < 50; ++i) {
      const auto [c1, c2] = sbx_crossover(p, p, 15.0, 1.0, b, rng);
      CHECK(c1 == p);
      CHECK(c2 == p);
    }
  }
  SUBCASE("mutation is symmetric about a midpoint gene") {
    const FeatureBounds unit({0.0}, {1.0});
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      std::vector<double> x{0.5};
      polynomial_mutation(x, 20.0, 1.0, unit, rng);
      sum += x[0];
    }
    CHECK(std::abs(sum / n - 0.5) < 0.005);
  }
  SUBCASE("children stay inside the bounds") {
    std::mt19937_64 gen(9);
    for (int rep = 0; rep < 2000; ++rep) {
      std::vector<double> p1(3);
      std::vector<double> p2(3);
      for (std::size_t j = 0; j < 3; ++j) {
        p1[j] = b.lower[j] + uniform01(rng) * (b.upper[j] - b.lower[j]);
        p2[j] = rep % 7 == 0 ? b.upper[j] : b.lower[j] + uniform01(rng) * (b.upper[j] - b.lower[j]);
      }
      auto [c1, c2] = sbx_crossover(p1, p2, 1.0 + static_cast<double>(gen() % 30), 0.9, b, rng);
      polynomial_mutation(c1, 5.0, 1.0, b, rng);
      polynomial_mutation(c2, 100.0, 0.5, b, rng);
      CHECK(b.contains(c1));
      CHECK(b.contains(c2));
    }
  }
}

TEST_CASE("nsga2 converges on a one-dimensional problem") {
  NsgaSettings s;
  s.pop_size = 40;
  s.generations = 50;
  s.seed = 3;
  const NsgaResult r = nsga2_run(schaffer(), s);
  REQUIRE(!r.front.members.empty());
  for (const auto& ind : r.front.members) {
    const double f1 = ind.objectives[0];
    CHECK(std::sqrt(f1) <= 2.0 + 1e-2);
    CHECK(std::abs(ind.objectives[1] - std::pow(std::sqrt(f1) - 2.0, 2)) < 1e-2);
  }
  const Matrix obj = r.front.objectives();
  for (std::size_t i = 0; i < obj.rows(); ++i) {
    for (std::size_t j = 0; j < obj.rows(); ++j) CHECK_FALSE(dominates(obj.row(i), obj.row(j)));
  }
}

TEST_CASE("nsga2 bookkeeping") {
  NsgaSettings s;
  s.pop_size = 30;
  s.generations = 0;
  const NsgaResult zero = nsga2_run(schaffer(), s);
  CHECK(zero.evaluations == 30);
  CHECK(zero.population.size() == 30);

  s.generations = 10;
  const NsgaResult ten = nsga2_run(schaffer(), s);
  CHECK(ten.evaluations == 30 * 11);
  for (const auto& ind : ten.population) CHECK(FeatureBounds({-5.0}, {5.0}).contains(ind.x));
}

TEST_CASE("nsga2 is reproducible and worker-count invariant") {
  NsgaSettings s;
  s.pop_size = 24;
  s.generations = 15;
  s.seed = 77;
  set_worker_count(1);
  const NsgaResult a = nsga2_run(zdt1_spec(8), s);
  const NsgaResult b = nsga2_run(zdt1_spec(8), s);
  set_worker_count(3);
  const NsgaResult c = nsga2_run(zdt1_spec(8), s);
  set_worker_count(1);
  CHECK(a.front.designs() == b.front.designs());
  CHECK(a.front.designs() == c.front.designs());
  CHECK(a.front.objectives() == c.front.objectives());
}

TEST_CASE("nsga2 survives non-finite evaluations") {
  ProblemSpec p = schaffer();
  auto inner = p.evaluator;
  p.evaluator = [inner](const Matrix& x) {
    Matrix out = inner(x);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (x(i, 0) > 1.0) out(i, 1) = NAN;
    }
    return out;
  };
  NsgaSettings s;
  s.pop_size = 20;
  s.generations = 20;
  const NsgaResult r = nsga2_run(p, s);
  CHECK(r.infeasible_evaluations > 0);
  REQUIRE(!r.front.members.empty());
  for (const auto& ind : r.front.members) {
    CHECK(ind.feasible);
    CHECK(ind.x[0] <= 1.0);
  }
}

TEST_CASE("maximize directions are honored") {
  ProblemSpec p = schaffer();
  auto inner = p.evaluator;
  p.directions = {Direction::kMinimize, Direction::kMaximize};
  p.evaluator = [inner](const Matrix& x) {
    Matrix out = inner(x);
    for (std::size_t i = 0; i < out.rows(); ++i) out(i, 1) = -out(i, 1);
    return out;
  };
  NsgaSettings s;
  s.pop_size = 20;
  s.generations = 30;
  const NsgaResult r = nsga2_run(p, s);
  for (const auto& ind : r.front.members) {
    CHECK(ind.objectives[1] <= 0.0);
    CHECK(ind.x[0] >= -1e-2);
    CHECK(ind.x[0] <= 2.0 + 1e-2);
  }
}
