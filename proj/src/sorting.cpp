#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mlsmo/error.hpp"
#include "mlsmo/moo.hpp"

namespace mlsmo {

std::string_view direction_name(Direction d) {
  return d == Direction::kMinimize ? "minimize" : "maximize";
}

Direction parse_direction(std::string_view name) {
  if (name == "minimize" || name == "min") return Direction::kMinimize;
  if (name == "maximize" || name == "max") return Direction::kMaximize;
  throw Error(ErrorCode::kInvalidArgument, "unknown direction '" + std::string(name) + "'");
}

bool dominates(std::span<const double> a, std::span<const double> b) {
  bool strictly = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return false;
    if (a[i] < b[i]) strictly = true;
  }
  return strictly;
}

Matrix to_minimization(const Matrix& objectives, std::span<const Direction> directions) {
  if (objectives.cols() != directions.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "objective count differs from directions");
  }
  Matrix out = objectives;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      if (directions[c] == Direction::kMaximize) out(r, c) = -out(r, c);
    }
  }
  return out;
}

namespace {
bool row_finite(std::span<const double> row) {
  return std::all_of(row.begin(), row.end(), [](double v) { return std::isfinite(v); });
}
}  // namespace

SortResult fast_non_dominated_sort(const Matrix& objectives) {
  const std::size_t n = objectives.rows();
  SortResult result;
  result.rank.assign(n, 0);

  std::vector<std::size_t> finite, broken;
  for (std::size_t i = 0; i < n; ++i) (row_finite(objectives.row(i)) ? finite : broken).push_back(i);

  std::vector<std::vector<std::size_t>> dominated_by_me(n);
  std::vector<std::size_t> domination_count(n, 0);
  std::vector<std::size_t> current;
  for (std::size_t a = 0; a < finite.size(); ++a) {
    const std::size_t p = finite[a];
    for (std::size_t b = a + 1; b < finite.size(); ++b) {
      const std::size_t q = finite[b];
      if (dominates(objectives.row(p), objectives.row(q))) {
        dominated_by_me[p].push_back(q);
        ++domination_count[q];
      } else if (dominates(objectives.row(q), objectives.row(p))) {
        dominated_by_me[q].push_back(p);
        ++domination_count[p];
      }
    }
  }
  for (std::size_t p : finite) {
    if (domination_count[p] == 0) current.push_back(p);
  }
  std::size_t level = 0;
  while (!current.empty()) {
    std::vector<std::size_t> next;
    for (std::size_t p : current) {
      result.rank[p] = level;
      for (std::size_t q : dominated_by_me[p]) {
        if (--domination_count[q] == 0) next.push_back(q);
      }
    }
    std::sort(next.begin(), next.end());
    result.fronts.push_back(std::move(current));
    current = std::move(next);
    ++level;
  }
  if (!broken.empty()) {
    for (std::size_t p : broken) result.rank[p] = level;
    result.demoted = broken.size();
    result.fronts.push_back(std::move(broken));
  }
  return result;
}

std::vector<double> crowding_distance(const Matrix& objectives, std::span<const std::size_t> front) {
  const std::size_t k = front.size();
  std::vector<double> distance(k, 0.0);
  if (k == 0) return distance;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (k <= 2) {
    std::fill(distance.begin(), distance.end(), kInf);
    return distance;
  }
  std::vector<std::size_t> order(k);
  for (std::size_t obj = 0; obj < objectives.cols(); ++obj) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return objectives(front[a], obj) < objectives(front[b], obj);
    });
    const double lo = objectives(front[order.front()], obj);
    const double hi = objectives(front[order.back()], obj);
    distance[order.front()] = kInf;
    distance[order.back()] = kInf;
    const double range = hi - lo;
    if (!(range > 0.0) || !std::isfinite(range)) continue;
    for (std::size_t i = 1; i + 1 < k; ++i) {
      const double gap = objectives(front[order[i + 1]], obj) - objectives(front[order[i - 1]], obj);
      distance[order[i]] += gap / range;
    }
  }
  return distance;
}

std::vector<std::size_t> pareto_filter(const Matrix& points, std::span<const Direction> directions) {
  const Matrix oriented = to_minimization(points, directions);
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < oriented.rows(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < oriented.rows() && !dominated; ++j) {
      dominated = j != i && dominates(oriented.row(j), oriented.row(i));
    }
    if (!dominated) kept.push_back(i);
  }
  return kept;
}

Matrix ParetoFront::designs() const {
  Matrix out;
  for (const auto& m : members) out.append_row(m.x);
  return out;
}

Matrix ParetoFront::objectives() const {
  Matrix out;
  for (const auto& m : members) out.append_row(m.objectives);
  return out;
}

}  // namespace mlsmo
