#include "mlsmo/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "mlsmo/error.hpp"
#include "mlsmo/random.hpp"

namespace mlsmo {
namespace {

void require_unique(const std::vector<std::string>& names, std::set<std::string>& seen) {
  for (const auto& name : names) {
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate column name '" + name + "'");
    }
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      return fields;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

bool parse_cell(std::string_view cell, double& out) {
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size() && std::isfinite(out);
}

std::string unquote(std::string_view s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

// Mean with the first element as pivot; exact for constant columns.
double pivot_mean(std::span<const double> v) {
  const double pivot = v.front();
  double acc = 0.0;
  for (double x : v) acc += x - pivot;
  return pivot + acc / static_cast<double>(v.size());
}

}  // namespace

// ---------------------------------------------------------------- TabularDataset

TabularDataset::TabularDataset(std::vector<std::string> feature_names,
                               std::vector<std::string> target_names, Matrix features,
                               Matrix targets)
    : feature_names_(std::move(feature_names)),
      target_names_(std::move(target_names)),
      features_(std::move(features)),
      targets_(std::move(targets)) {
  if (features_.rows() == 0) throw Error(ErrorCode::kNoRowsSurvived, "dataset has no rows");
  if (features_.cols() == 0 || targets_.cols() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "dataset needs at least one feature and one target");
  }
  if (features_.rows() != targets_.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "feature and target row counts differ");
  }
  if (feature_names_.size() != features_.cols() || target_names_.size() != targets_.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "column names do not match matrix widths");
  }
  std::set<std::string> seen;
  require_unique(feature_names_, seen);
  require_unique(target_names_, seen);
  if (!features_.all_finite() || !targets_.all_finite()) {
    throw Error(ErrorCode::kInvalidArgument, "dataset contains non-finite values");
  }
}

TabularDataset TabularDataset::select_rows(std::span<const std::size_t> indices) const {
  return TabularDataset(feature_names_, target_names_, features_.select_rows(indices),
                        targets_.select_rows(indices));
}

TabularDataset TabularDataset::select_target(std::size_t target_index) const {
  if (target_index >= n_targets()) {
    throw Error(ErrorCode::kInvalidArgument, "target index out of range");
  }
  const std::size_t idx[] = {target_index};
  return TabularDataset(feature_names_, {target_names_[target_index]}, features_,
                        targets_.select_columns(idx));
}

TabularDataset TabularDataset::with_appended_rows(const Matrix& features,
                                                  const Matrix& targets) const {
  return TabularDataset(feature_names_, target_names_, vstack(features_, features),
                        vstack(targets_, targets));
}

// ---------------------------------------------------------------- bounds

FeatureBounds::FeatureBounds(std::vector<double> lower_in, std::vector<double> upper_in)
    : lower(std::move(lower_in)), upper(std::move(upper_in)) {
  if (lower.size() != upper.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "bounds length mismatch");
  }
  for (std::size_t j = 0; j < lower.size(); ++j) {
    if (!(lower[j] <= upper[j])) {
      throw Error(ErrorCode::kInvalidArgument, "lower bound exceeds upper bound");
    }
  }
}

bool FeatureBounds::contains(std::span<const double> x) const {
  if (x.size() != lower.size()) return false;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!(x[j] >= lower[j] && x[j] <= upper[j])) return false;
  }
  return true;
}

FeatureBounds FeatureBounds::from_data(const Matrix& features) {
  std::vector<double> lo(features.cols()), hi(features.cols());
  for (std::size_t j = 0; j < features.cols(); ++j) {
    const auto col = features.column(j);
    const auto [mn, mx] = std::minmax_element(col.begin(), col.end());
    lo[j] = *mn;
    hi[j] = *mx;
  }
  return FeatureBounds(std::move(lo), std::move(hi));
}

// ---------------------------------------------------------------- CSV

LoadResult load_csv(const std::filesystem::path& path, std::size_t n_feature_columns) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open " + path.string());
  if (n_feature_columns == 0) {
    throw Error(ErrorCode::kInvalidArgument, "need at least one feature column");
  }

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kShortHeader, "empty file " + path.string());
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_fields(line);
  if (header.size() < n_feature_columns + 1) {
    throw Error(ErrorCode::kShortHeader,
                path.string() + ": header has " + std::to_string(header.size()) +
                    " columns, need at least " + std::to_string(n_feature_columns + 1));
  }
  std::vector<std::string> feature_names, target_names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    (c < n_feature_columns ? feature_names : target_names).push_back(unquote(header[c]));
  }

  const std::size_t width = header.size();
  Matrix features(0, n_feature_columns);
  Matrix targets(0, width - n_feature_columns);
  std::vector<double> values(width);
  std::size_t dropped = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    bool complete = fields.size() == width;
    for (std::size_t c = 0; complete && c < width; ++c) complete = parse_cell(fields[c], values[c]);
    if (!complete) {
      ++dropped;
      continue;
    }
    features.append_row(std::span<const double>(values).first(n_feature_columns));
    targets.append_row(std::span<const double>(values).subspan(n_feature_columns));
  }
  if (features.rows() == 0) {
    throw Error(ErrorCode::kNoRowsSurvived,
                path.string() + ": no complete rows (" + std::to_string(dropped) + " dropped)");
  }
  return {TabularDataset(std::move(feature_names), std::move(target_names), std::move(features),
                         std::move(targets)),
          dropped};
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void write_csv(const std::filesystem::path& path, const TabularDataset& dataset) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  std::string header;
  for (const auto& n : dataset.feature_names()) header += n + ",";
  for (const auto& n : dataset.target_names()) header += n + ",";
  header.pop_back();
  out << header << '\n';
  for (std::size_t r = 0; r < dataset.rows(); ++r) {
    std::string row;
    for (double v : dataset.features().row(r)) row += format_double(v) + ",";
    for (double v : dataset.targets().row(r)) row += format_double(v) + ",";
    row.pop_back();
    out << row << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::size_t NumericTable::column_index(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error(ErrorCode::kParse, "missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

NumericTable read_numeric_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParse, path.string() + " is empty");
  NumericTable table;
  for (auto f : split_fields(line)) table.header.push_back(unquote(f));
  table.values = Matrix(0, table.header.size());
  std::vector<double> row(table.header.size());
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != row.size()) {
      throw Error(ErrorCode::kParse, path.string() + ": row width differs from header");
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (fields[c].empty()) {
        row[c] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      std::string_view cell = fields[c];
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), row[c]);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw Error(ErrorCode::kParse, path.string() + ": bad number '" + std::string(cell) + "'");
      }
    }
    table.values.append_row(row);
  }
  return table;
}

void write_numeric_csv(const std::filesystem::path& path, const NumericTable& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (std::size_t c = 0; c < table.header.size(); ++c) out << (c ? "," : "") << table.header[c];
  out << '\n';
  for (std::size_t r = 0; r < table.values.rows(); ++r) {
    for (std::size_t c = 0; c < table.values.cols(); ++c) {
      const double v = table.values(r, c);
      out << (c ? "," : "") << (std::isnan(v) ? std::string() : format_double(v));
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

// ---------------------------------------------------------------- split

std::size_t test_size_for(std::size_t n, double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "test fraction must lie in (0, 1)");
  }
  // The tolerance keeps products like 1000 * 0.2 from rounding up a row.
  return static_cast<std::size_t>(std::ceil(static_cast<double>(n) * test_fraction - 1e-9));
}

Split split(const TabularDataset& dataset, double test_fraction, std::uint64_t seed) {
  const std::size_t n = dataset.rows();
  const std::size_t n_test = test_size_for(n, test_fraction);
  if (n_test < 1 || n_test >= n) {
    throw Error(ErrorCode::kDatasetTooSmall,
                std::to_string(n) + " rows cannot be split with fraction " +
                    format_double(test_fraction));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, {0x5b117});
  shuffle_indices(order, rng);
  const std::span<const std::size_t> all(order);
  return {dataset.select_rows(all.subspan(n_test)), dataset.select_rows(all.first(n_test))};
}

// ---------------------------------------------------------------- scaler

Scaler fit_scaler(const Matrix& values, ScalerKind kind) {
  if (values.rows() < 2) throw Error(ErrorCode::kDatasetTooSmall, "scaler needs at least 2 rows");
  Scaler s;
  s.kind = kind;
  s.shift.resize(values.cols());
  s.scale.resize(values.cols());
  for (std::size_t j = 0; j < values.cols(); ++j) {
    const auto col = values.column(j);
    double spread = 0.0;
    if (kind == ScalerKind::kStandard) {
      s.shift[j] = pivot_mean(col);
      double ss = 0.0;
      for (double v : col) ss += (v - s.shift[j]) * (v - s.shift[j]);
      spread = std::sqrt(ss / static_cast<double>(col.size() - 1));
    } else {
      const auto [mn, mx] = std::minmax_element(col.begin(), col.end());
      s.shift[j] = *mn;
      spread = *mx - *mn;
    }
    s.scale[j] = spread > 0.0 ? spread : 1.0;
  }
  return s;
}

Matrix Scaler::apply(const Matrix& values) const {
  if (values.cols() != shift.size()) throw Error(ErrorCode::kDimensionMismatch, "scaler width");
  Matrix out(values.rows(), values.cols());
  for (std::size_t r = 0; r < values.rows(); ++r) {
    for (std::size_t j = 0; j < values.cols(); ++j) out(r, j) = (values(r, j) - shift[j]) / scale[j];
  }
  return out;
}

Matrix Scaler::invert(const Matrix& values) const {
  if (values.cols() != shift.size()) throw Error(ErrorCode::kDimensionMismatch, "scaler width");
  Matrix out(values.rows(), values.cols());
  for (std::size_t r = 0; r < values.rows(); ++r) {
    for (std::size_t j = 0; j < values.cols(); ++j) out(r, j) = values(r, j) * scale[j] + shift[j];
  }
  return out;
}

// ---------------------------------------------------------------- sampling

Matrix latin_hypercube(std::size_t n, const FeatureBounds& bounds, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "latin hypercube needs n >= 1");
  const std::size_t d = bounds.dims();
  Matrix out(n, d);
  std::vector<std::size_t> strata(n);
  for (std::size_t j = 0; j < d; ++j) {
    Rng rng = make_rng(seed, {0x1bd, j});
    std::iota(strata.begin(), strata.end(), 0);
    shuffle_indices(strata, rng);
    const double width = bounds.upper[j] - bounds.lower[j];
    for (std::size_t i = 0; i < n; ++i) {
      const double unit = (static_cast<double>(strata[i]) + uniform01(rng)) / static_cast<double>(n);
      out(i, j) = width == 0.0 ? bounds.lower[j]
                               : std::min(bounds.upper[j], bounds.lower[j] + unit * width);
    }
  }
  return out;
}

Matrix uniform_random(std::size_t n, const FeatureBounds& bounds, std::uint64_t seed) {
  const std::size_t d = bounds.dims();
  Matrix out(n, d);
  Rng rng = make_rng(seed, {0x0f1});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double width = bounds.upper[j] - bounds.lower[j];
      out(i, j) = width == 0.0 ? bounds.lower[j] : bounds.lower[j] + uniform01(rng) * width;
    }
  }
  return out;
}

}  // namespace mlsmo
