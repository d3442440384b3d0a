#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "mlsmo/error.hpp"
#include "mlsmo/indicators.hpp"
#include "oracles.hpp"

using namespace mlsmo;

namespace {

Matrix random_front(std::size_t n, std::size_t m, std::mt19937_64& gen) {
  const Matrix pts = oracle::random_matrix(n, m, gen);
  return pts.select_rows(pareto_filter(pts, std::vector<Direction>(m, Direction::kMinimize)));
}

}  // namespace

TEST_CASE("normalization") {
  const Matrix db{{1.0, 10.0}, {3.0, 30.0}, {2.0, 20.0}};
  const NormalizationSpec spec = NormalizationSpec::from_database(db);
  CHECK(spec.min == std::vector<double>{1.0, 10.0});
  CHECK(spec.max == std::vector<double>{3.0, 30.0});
  CHECK(spec.reference_point == std::vector<double>{1.1, 1.1});
  const Matrix n = normalize(Matrix{{1.0, 10.0}, {3.0, 30.0}, {1.5, 15.0}}, spec);
  CHECK(n(0, 0) == 0.0);
  CHECK(n(0, 1) == 0.0);
  CHECK(n(1, 0) == 1.0);
  CHECK(n(1, 1) == 1.0);
  CHECK(n(2, 0) == doctest::Approx(0.25));
  CHECK(n(2, 1) == doctest::Approx(0.25));
  try {
    NormalizationSpec::from_database(Matrix{{1.0, 2.0}, {1.0, 3.0}});
    FAIL("expected degenerate range");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateRange);
  }
}

TEST_CASE("generational distance") {
  CHECK(gd(Matrix{{2, 2}}, Matrix{{1, 1}}) == doctest::Approx(std::sqrt(2.0)));
  CHECK(gd(Matrix{{0, 2}, {2, 0}}, Matrix{{0, 2}}) == doctest::Approx(std::sqrt(2.0)));
  CHECK(gd_plus(Matrix{{0, 2}}, Matrix{{1, 1}}) == 1.0);
  CHECK(gd_plus(Matrix{{0, 0}, {0.5, 0.2}}, Matrix{{1, 1}, {0.6, 0.3}}) == 0.0);
  const Matrix z{{0, 1}, {1, 0}};
  CHECK(gd(z, z) == 0.0);
  CHECK_THROWS_AS(gd(Matrix(0, 2), z), Error);
}

TEST_CASE("generational distance properties") {
  std::mt19937_64 gen(3);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t m = 2 + gen() % 2;
    const Matrix a = oracle::random_matrix(1 + gen() % 20, m, gen);
    const Matrix z = oracle::random_matrix(1 + gen() % 20, m, gen);
    const double g = gd(a, z);
    const double gp = gd_plus(a, z);
    CHECK(gp <= g + 1e-15);
    CHECK(g == doctest::Approx(oracle::average_distance(a, z, false)).epsilon(1e-12));
    CHECK(gp == doctest::Approx(oracle::average_distance(a, z, true)).epsilon(1e-12));
    // A subset of Z is at distance 0; anything else is not.
    const Matrix sub = z.select_rows(std::vector<std::size_t>{0});
    CHECK(gd(sub, z) == 0.0);
    CHECK(gd(vstack(sub, Matrix(1, m, 2.0)), z) > 0.0);
  }
}

TEST_CASE("hypervolume hand cases") {
  const std::vector<double> r2{2.0, 2.0};
  CHECK(hypervolume(Matrix{{1, 1}}, r2) == 1.0);
  const std::vector<double> r3{3.0, 3.0};
  CHECK(hypervolume(Matrix{{1, 2}, {2, 1}}, r3) == 3.0);
  CHECK(hypervolume(Matrix{{1, 2}, {2, 1}, {2.5, 2.5}}, r3) == 3.0);
  CHECK(hypervolume(Matrix{{4, 1}}, r3) == 0.0);
  const std::vector<double> cube{2.0, 2.0, 2.0};
  CHECK(hypervolume(Matrix{{1, 1, 1}}, cube) == 1.0);
  CHECK(hypervolume(Matrix{{0, 1, 1}, {1, 0, 1}, {1, 1, 0}}, cube) == doctest::Approx(8.0 - 1.0 - 3.0));
  const std::vector<double> r4(4, 2.0);
  try {
    hypervolume(Matrix{{1, 1, 1, 1}}, r4);
    FAIL("expected unsupported dimension");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnsupportedDimension);
  }
}

TEST_CASE("hypervolume agrees with a Monte-Carlo estimate") {
  std::mt19937_64 gen(17);
  for (int rep = 0; rep < 6; ++rep) {
    const std::size_t m = 2 + rep % 2;
    const Matrix front = random_front(15, m, gen);
    const std::vector<double> ref(m, 1.1);
    const auto mc = oracle::monte_carlo_hv(front, ref, 200000, 100 + rep);
    CHECK(std::abs(hypervolume(front, ref) - mc.value) <= 4.0 * mc.standard_error + 1e-12);
  }
}

TEST_CASE("hypervolume monotonicity") {
  std::mt19937_64 gen(23);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t m = 2 + rep % 2;
    const Matrix front = random_front(10, m, gen);
    const std::vector<double> ref(m, 1.1);
    const double base = hypervolume(front, ref);
    Matrix worse = front.select_rows(std::vector<std::size_t>{0});
    for (double& v : worse.row(0)) v = std::min(1.05, v + 0.01);
    CHECK(hypervolume(vstack(front, worse), ref) == doctest::Approx(base).epsilon(1e-12));
    const Matrix extra = oracle::random_matrix(1, m, gen);
    CHECK(hypervolume(vstack(front, extra), ref) >= base - 1e-12);
  }
}

TEST_CASE("indicators are invariant to affine rescaling") {
  std::mt19937_64 gen(31);
  const Matrix db = oracle::random_matrix(40, 3, gen);
  const Matrix run = oracle::random_matrix(10, 3, gen, -0.1, 0.8);
  const std::vector<double> scale{3.0, 0.01, 250.0};
  const std::vector<double> shift{-4.0, 7.0, 1e3};
  const auto rescale = [&](const Matrix& x) {
    Matrix out = x;
    for (std::size_t i = 0; i < out.rows(); ++i) {
      for (std::size_t j = 0; j < 3; ++j) out(i, j) = scale[j] * x(i, j) + shift[j];
    }
    return out;
  };
  const std::vector<Direction> dirs(3, Direction::kMinimize);
  const auto a = compare_runs({{"r", run, 10}}, db, dirs);
  const auto b = compare_runs({{"r", rescale(run), 10}}, rescale(db), dirs);
  CHECK(*a[1].gd == doctest::Approx(*b[1].gd).epsilon(1e-9));
  CHECK(*a[1].gd_plus == doctest::Approx(*b[1].gd_plus).epsilon(1e-9));
  CHECK(a[1].hv == doctest::Approx(b[1].hv).epsilon(1e-9));
  CHECK(a[0].hv == doctest::Approx(b[0].hv).epsilon(1e-9));
}

TEST_CASE("simulation rate") {
  CHECK(simulation_rate(100, 100) == 1.0);
  CHECK(simulation_rate(1000, 783) == doctest::Approx(0.783));
  CHECK(simulation_rate(5, 0) == 0.0);
  CHECK_THROWS_AS(simulation_rate(0, 0), Error);
}

TEST_CASE("compare runs") {
  const Matrix db{{0.0, 1.0}, {0.5, 0.5}, {1.0, 0.0}, {0.8, 0.9}};
  const std::vector<Direction> dirs(2, Direction::kMinimize);

  SUBCASE("dominated run adds nothing") {
    const auto rows = compare_runs({{"m", Matrix{{0.9, 0.9}, {0.6, 0.7}}, 2}}, db, dirs);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].label == "database");
    CHECK_FALSE(rows[0].simulation_rate.has_value());
    CHECK(rows[1].hv == doctest::Approx(rows[0].hv).epsilon(1e-14));
    CHECK(*rows[1].simulation_rate == 1.0);
    CHECK(*rows[1].gd_plus > 0.0);
  }
  SUBCASE("a dominating point increases the merged volume") {
    const Matrix run{{0.3, 0.3}};
    const auto rows = compare_runs({{"m", run, 4}}, db, dirs);
    CHECK(rows[1].hv > rows[0].hv);
    CHECK(*rows[1].simulation_rate == 0.25);
    CHECK(*rows[1].gd_plus == 0.0);
    const Matrix merged{{0.0, 1.0}, {0.5, 0.5}, {1.0, 0.0}, {0.3, 0.3}};
    const auto mc = oracle::monte_carlo_hv(merged, {1.1, 1.1}, 400000, 5);
    CHECK(std::abs(rows[1].hv - mc.value) <= 4.0 * mc.standard_error);
  }
  SUBCASE("maximized objectives are flipped") {
    Matrix flipped = db;
    for (std::size_t i = 0; i < db.rows(); ++i) flipped(i, 1) = -db(i, 1);
    const std::vector<Direction> mixed{Direction::kMinimize, Direction::kMaximize};
    const auto a = compare_runs({{"m", Matrix{{0.3, -0.3}}, 1}}, flipped, mixed);
    const auto b = compare_runs({{"m", Matrix{{0.3, 0.3}}, 1}}, db, dirs);
    CHECK(a[1].hv == doctest::Approx(b[1].hv).epsilon(1e-14));
  }
  SUBCASE("identical runs give identical rows") {
    const Matrix run{{0.2, 0.7}, {0.6, 0.1}};
    const auto rows = compare_runs({{"a", run, 2}, {"b", run, 2}}, db, dirs);
    CHECK(rows[1].hv == rows[2].hv);
    CHECK(*rows[1].gd == *rows[2].gd);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(compare_runs({}, db, dirs), Error);
    CHECK_THROWS_AS(compare_runs({{"m", Matrix{{1, 2, 3}}, 1}}, db, dirs), Error);
  }
}

TEST_CASE("indicators csv round trip") {
  const std::vector<IndicatorRow> rows{{"database", std::nullopt, std::nullopt, std::nullopt, 1.0625},
                                       {"gbt", 0.783, 0.1, 0.05, 1.2}};
  const auto path = std::filesystem::temp_directory_path() / "mlsmo_indicators.csv";
  write_indicators_csv(path, rows);
  const auto back = read_indicators_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].label == "database");
  CHECK_FALSE(back[0].gd.has_value());
  CHECK(back[0].hv == 1.0625);
  CHECK(*back[1].simulation_rate == 0.783);
  CHECK(*back[1].gd_plus == 0.05);
}
