#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlsmo/matrix.hpp"
#include "mlsmo/moo.hpp"

namespace mlsmo {

inline constexpr double kDefaultReferenceCoordinate = 1.1;

// Per-objective ranges of the reference database in minimization
// orientation, plus the hypervolume reference point in normalized units.
struct NormalizationSpec {
  std::vector<double> min;
  std::vector<double> max;
  std::vector<double> reference_point;

  static NormalizationSpec from_database(const Matrix& minimized_points,
                                         double reference_coordinate = kDefaultReferenceCoordinate);
};

// (v - min) / (max - min) per column. Throws kDegenerateRange if max <= min.
Matrix normalize(const Matrix& points, const NormalizationSpec& spec);

// Mean over a in A of the Euclidean distance to the nearest z in Z.
double gd(const Matrix& front, const Matrix& reference);
// Same aggregation with the distance truncated to dominance-relevant excess.
double gd_plus(const Matrix& front, const Matrix& reference);

// Exact dominated volume for m = 2 (sweep) and m = 3 (slicing); points that
// do not strictly dominate the reference point contribute nothing.
double hypervolume(const Matrix& front, std::span<const double> reference_point);

double simulation_rate(std::size_t candidates, std::size_t validated_ok);

struct IndicatorRow {
  std::string label;
  std::optional<double> simulation_rate;
  std::optional<double> gd;
  std::optional<double> gd_plus;
  double hv = 0.0;
};

struct RunFront {
  std::string label;
  Matrix validated;  // objectives in problem orientation
  std::size_t candidates = 0;
};

// First row is the database baseline; then one "database + run" row per run.
std::vector<IndicatorRow> compare_runs(const std::vector<RunFront>& runs, const Matrix& database,
                                       std::span<const Direction> directions);

void write_indicators_csv(const std::filesystem::path& path, const std::vector<IndicatorRow>& rows);
std::vector<IndicatorRow> read_indicators_csv(const std::filesystem::path& path);

}  // namespace mlsmo
