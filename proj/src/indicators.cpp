#include "mlsmo/indicators.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mlsmo/dataset.hpp"
#include "mlsmo/error.hpp"
#include "mlsmo/kernels.hpp"

namespace mlsmo {

NormalizationSpec NormalizationSpec::from_database(const Matrix& minimized_points,
                                                   double reference_coordinate) {
  if (minimized_points.empty()) throw Error(ErrorCode::kInvalidArgument, "empty database");
  NormalizationSpec spec;
  for (std::size_t c = 0; c < minimized_points.cols(); ++c) {
    const auto col = minimized_points.column(c);
    const auto [mn, mx] = std::minmax_element(col.begin(), col.end());
    if (!(*mn < *mx)) {
      throw Error(ErrorCode::kDegenerateRange, "objective " + std::to_string(c) + " is constant");
    }
    spec.min.push_back(*mn);
    spec.max.push_back(*mx);
  }
  spec.reference_point.assign(minimized_points.cols(), reference_coordinate);
  return spec;
}

Matrix normalize(const Matrix& points, const NormalizationSpec& spec) {
  if (points.cols() != spec.min.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "normalization width");
  }
  Matrix out(points.rows(), points.cols());
  for (std::size_t c = 0; c < points.cols(); ++c) {
    const double range = spec.max[c] - spec.min[c];
    if (!(range > 0.0)) throw Error(ErrorCode::kDegenerateRange, "degenerate objective range");
    for (std::size_t r = 0; r < points.rows(); ++r) out(r, c) = (points(r, c) - spec.min[c]) / range;
  }
  return out;
}

namespace {
void check_pair(const Matrix& a, const Matrix& z) {
  if (a.empty() || z.empty()) throw Error(ErrorCode::kInvalidArgument, "empty front");
  if (a.cols() != z.cols()) throw Error(ErrorCode::kDimensionMismatch, "front widths differ");
}
}  // namespace

double gd(const Matrix& front, const Matrix& reference) {
  check_pair(front, reference);
  double total = 0.0;
  for (std::size_t r = 0; r < front.rows(); ++r) {
    total += std::sqrt(kernels::min_squared_distance(front.row(r), reference));
  }
  return total / static_cast<double>(front.rows());
}

double gd_plus(const Matrix& front, const Matrix& reference) {
  check_pair(front, reference);
  double total = 0.0;
  for (std::size_t r = 0; r < front.rows(); ++r) {
    total += std::sqrt(kernels::min_plus_squared_distance(front.row(r), reference));
  }
  return total / static_cast<double>(front.rows());
}

namespace {

using Point2 = std::pair<double, double>;

// Points must already strictly dominate (rx, ry).
double sweep_2d(std::vector<Point2> pts, double rx, double ry) {
  std::sort(pts.begin(), pts.end());
  double area = 0.0;
  double floor_y = ry;
  for (const auto& [x, y] : pts) {
    if (y < floor_y) {
      area += (rx - x) * (floor_y - y);
      floor_y = y;
    }
  }
  return area;
}

}  // namespace

double hypervolume(const Matrix& front, std::span<const double> reference_point) {
  const std::size_t m = front.cols();
  if (front.empty()) return 0.0;
  if (reference_point.size() != m) {
    throw Error(ErrorCode::kDimensionMismatch, "reference point width");
  }
  if (m < 2 || m > 3) {
    throw Error(ErrorCode::kUnsupportedDimension,
                "exact hypervolume supports 2 or 3 objectives, got " + std::to_string(m));
  }
  std::vector<std::size_t> inside;
  for (std::size_t r = 0; r < front.rows(); ++r) {
    bool ok = true;
    for (std::size_t c = 0; c < m && ok; ++c) ok = front(r, c) < reference_point[c];
    if (ok) inside.push_back(r);
  }
  if (inside.empty()) return 0.0;

  if (m == 2) {
    std::vector<Point2> pts;
    for (std::size_t r : inside) pts.emplace_back(front(r, 0), front(r, 1));
    return sweep_2d(std::move(pts), reference_point[0], reference_point[1]);
  }

  // m == 3: slice along the third objective.
  std::sort(inside.begin(), inside.end(),
            [&](std::size_t a, std::size_t b) { return front(a, 2) < front(b, 2); });
  double volume = 0.0;
  std::vector<Point2> active;
  for (std::size_t i = 0; i < inside.size(); ++i) {
    const std::size_t r = inside[i];
    active.emplace_back(front(r, 0), front(r, 1));
    const double z_next = i + 1 < inside.size() ? front(inside[i + 1], 2) : reference_point[2];
    const double depth = z_next - front(r, 2);
    if (depth > 0.0) volume += depth * sweep_2d(active, reference_point[0], reference_point[1]);
  }
  return volume;
}

double simulation_rate(std::size_t candidates, std::size_t validated_ok) {
  if (candidates == 0) throw Error(ErrorCode::kInvalidArgument, "zero candidates");
  if (validated_ok > candidates) {
    throw Error(ErrorCode::kInvalidArgument, "more validated points than candidates");
  }
  return static_cast<double>(validated_ok) / static_cast<double>(candidates);
}

std::vector<IndicatorRow> compare_runs(const std::vector<RunFront>& runs, const Matrix& database,
                                       std::span<const Direction> directions) {
  if (runs.empty()) throw Error(ErrorCode::kInvalidArgument, "no runs to compare");
  if (database.cols() != directions.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "database objective count differs from directions");
  }
  const Matrix db_min = to_minimization(database, directions);
  const NormalizationSpec spec = NormalizationSpec::from_database(db_min);
  const Matrix db_norm = normalize(db_min, spec);
  const std::vector<Direction> all_min(directions.size(), Direction::kMinimize);
  const Matrix db_front = db_norm.select_rows(pareto_filter(db_norm, all_min));

  std::vector<IndicatorRow> rows;
  rows.push_back({"database", std::nullopt, std::nullopt, std::nullopt,
                  hypervolume(db_front, spec.reference_point)});
  for (const auto& run : runs) {
    if (!run.validated.empty() && run.validated.cols() != database.cols()) {
      throw Error(ErrorCode::kDimensionMismatch, "run '" + run.label + "' objective count");
    }
    IndicatorRow row;
    row.label = run.label;
    if (run.candidates > 0) row.simulation_rate = simulation_rate(run.candidates, run.validated.rows());
    if (run.validated.empty()) {
      row.hv = rows.front().hv;
    } else {
      const Matrix run_norm = normalize(to_minimization(run.validated, directions), spec);
      row.gd = gd(run_norm, db_front);
      row.gd_plus = gd_plus(run_norm, db_front);
      row.hv = hypervolume(vstack(db_front, run_norm), spec.reference_point);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_indicators_csv(const std::filesystem::path& path, const std::vector<IndicatorRow>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  const auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  out << "label,simulation_rate,gd,gd_plus,hv\n";
  for (const auto& r : rows) {
    out << r.label << ',' << cell(r.simulation_rate) << ',' << cell(r.gd) << ','
        << cell(r.gd_plus) << ',' << format_double(r.hv) << '\n';
  }
}

std::vector<IndicatorRow> read_indicators_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "label,simulation_rate,gd,gd_plus,hv") {
    throw Error(ErrorCode::kParse, path.string() + ": unexpected indicators header");
  }
  const auto parse = [&](const std::string& s) -> std::optional<double> {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw Error(ErrorCode::kParse, path.string() + ": bad number '" + s + "'");
    }
    return v;
  };
  std::vector<IndicatorRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != 5) throw Error(ErrorCode::kParse, path.string() + ": bad row");
    const auto hv = parse(cells[4]);
    if (!hv) throw Error(ErrorCode::kParse, path.string() + ": missing hv");
    rows.push_back({cells[0], parse(cells[1]), parse(cells[2]), parse(cells[3]), *hv});
  }
  return rows;
}

}  // namespace mlsmo
