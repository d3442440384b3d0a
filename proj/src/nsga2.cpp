#include <algorithm>
#include <cmath>
#include <numeric>

#include "mlsmo/error.hpp"
#include "mlsmo/moo.hpp"
#include "mlsmo/parallel.hpp"

namespace mlsmo {
namespace {

Matrix evaluate_batch(const ProblemSpec& problem, const Matrix& designs) {
  const std::size_t workers = std::min(worker_count(), designs.rows());
  Matrix out;
  if (workers <= 1) {
    out = problem.evaluator(designs);
  } else {
    // Contiguous chunks, stitched back in order: identical to a single call.
    std::vector<Matrix> parts(workers);
    const std::size_t block = (designs.rows() + workers - 1) / workers;
    parallel_for(workers, [&](std::size_t w) {
      std::vector<std::size_t> rows;
      for (std::size_t r = w * block; r < std::min(designs.rows(), (w + 1) * block); ++r) {
        rows.push_back(r);
      }
      if (!rows.empty()) parts[w] = problem.evaluator(designs.select_rows(rows));
    });
    for (const auto& p : parts) out = vstack(out, p);
  }
  if (out.rows() != designs.rows() || out.cols() != problem.n_objectives()) {
    throw Error(ErrorCode::kDimensionMismatch, "evaluator returned the wrong shape");
  }
  return out;
}

struct Ranked {
  std::vector<std::size_t> rank;
  std::vector<double> crowding;
};

Ranked rank_and_crowd(const Matrix& minimized) {
  const SortResult sorted = fast_non_dominated_sort(minimized);
  Ranked out{sorted.rank, std::vector<double>(minimized.rows(), 0.0)};
  for (std::size_t f = 0; f < sorted.fronts.size(); ++f) {
    const auto& front = sorted.fronts[f];
    if (sorted.demoted > 0 && f + 1 == sorted.fronts.size()) break;
    const auto dist = crowding_distance(minimized, front);
    for (std::size_t i = 0; i < front.size(); ++i) out.crowding[front[i]] = dist[i];
  }
  return out;
}

bool row_finite(std::span<const double> row) {
  return std::all_of(row.begin(), row.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

NsgaResult nsga2_run(const ProblemSpec& problem, const NsgaSettings& settings) {
  const std::size_t n = settings.pop_size;
  const std::size_t d = problem.bounds.dims();
  if (n < 4 || n % 2 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "population size must be even and >= 4");
  }
  if (d == 0) throw Error(ErrorCode::kInvalidArgument, "problem has no design variables");
  if (problem.n_objectives() < 2 || problem.objective_names.size() != problem.n_objectives()) {
    throw Error(ErrorCode::kInvalidArgument, "need >= 2 named objectives");
  }
  if (!problem.evaluator) throw Error(ErrorCode::kInvalidArgument, "problem has no evaluator");
  const double mutation_rate =
      settings.mutation_rate < 0.0 ? 1.0 / static_cast<double>(d) : settings.mutation_rate;

  NsgaResult result;
  Matrix designs = latin_hypercube(n, problem.bounds, derive_seed(settings.seed, {0x1a7}));
  Matrix values = evaluate_batch(problem, designs);
  result.evaluations = n;
  for (std::size_t r = 0; r < n; ++r) result.infeasible_evaluations += row_finite(values.row(r)) ? 0 : 1;
  Matrix minimized = to_minimization(values, problem.directions);
  Ranked ranked = rank_and_crowd(minimized);

  const auto better = [&](std::size_t a, std::size_t b) {
    if (ranked.rank[a] != ranked.rank[b]) return ranked.rank[a] < ranked.rank[b];
    return ranked.crowding[a] > ranked.crowding[b];
  };

  for (std::size_t gen = 1; gen <= settings.generations; ++gen) {
    Matrix offspring(n, d);
    for (std::size_t pair = 0; pair < n / 2; ++pair) {
      Rng rng = make_rng(settings.seed, {gen, pair});
      const auto pick = [&] {
        const std::size_t a = uniform_index(rng, n);
        const std::size_t b = uniform_index(rng, n);
        return better(b, a) ? b : a;
      };
      const std::size_t p1 = pick();
      const std::size_t p2 = pick();
      auto [c1, c2] = sbx_crossover(designs.row(p1), designs.row(p2), settings.eta_c,
                                    settings.crossover_prob, problem.bounds, rng);
      polynomial_mutation(c1, settings.eta_m, mutation_rate, problem.bounds, rng);
      polynomial_mutation(c2, settings.eta_m, mutation_rate, problem.bounds, rng);
      std::copy(c1.begin(), c1.end(), offspring.row(2 * pair).begin());
      std::copy(c2.begin(), c2.end(), offspring.row(2 * pair + 1).begin());
    }
    const Matrix offspring_values = evaluate_batch(problem, offspring);
    result.evaluations += n;
    for (std::size_t r = 0; r < n; ++r) {
      result.infeasible_evaluations += row_finite(offspring_values.row(r)) ? 0 : 1;
    }

    // (mu + lambda) selection: whole fronts first, then the least crowded
    // members of the front that overflows.
    const Matrix all_designs = vstack(designs, offspring);
    const Matrix all_values = vstack(values, offspring_values);
    const Matrix all_min = to_minimization(all_values, problem.directions);
    const SortResult sorted = fast_non_dominated_sort(all_min);
    std::vector<std::size_t> chosen;
    std::vector<double> chosen_crowding;
    chosen.reserve(n);
    for (std::size_t f = 0; f < sorted.fronts.size() && chosen.size() < n; ++f) {
      const auto& front = sorted.fronts[f];
      const bool demoted_front = sorted.demoted > 0 && f + 1 == sorted.fronts.size();
      std::vector<double> dist = demoted_front ? std::vector<double>(front.size(), 0.0)
                                               : crowding_distance(all_min, front);
      if (chosen.size() + front.size() <= n) {
        chosen.insert(chosen.end(), front.begin(), front.end());
        chosen_crowding.insert(chosen_crowding.end(), dist.begin(), dist.end());
        continue;
      }
      std::vector<std::size_t> order(front.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
      for (std::size_t i = 0; chosen.size() < n; ++i) {
        chosen.push_back(front[order[i]]);
        chosen_crowding.push_back(dist[order[i]]);
      }
    }
    designs = all_designs.select_rows(chosen);
    values = all_values.select_rows(chosen);
    ranked.rank.resize(n);
    ranked.crowding = std::move(chosen_crowding);
    for (std::size_t i = 0; i < n; ++i) ranked.rank[i] = sorted.rank[chosen[i]];
  }

  // Final ranks are recomputed on the surviving population.
  minimized = to_minimization(values, problem.directions);
  ranked = rank_and_crowd(minimized);
  result.population.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Individual ind;
    ind.x.assign(designs.row(i).begin(), designs.row(i).end());
    ind.objectives.assign(values.row(i).begin(), values.row(i).end());
    ind.rank = ranked.rank[i];
    ind.crowding = ranked.crowding[i];
    ind.feasible = row_finite(values.row(i));
    if (ind.rank == 0 && ind.feasible) result.front.members.push_back(ind);
    result.population.push_back(std::move(ind));
  }
  return result;
}

}  // namespace mlsmo
