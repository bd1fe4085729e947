#pragma once

// Labelled datasets, CSV ingestion, feature normalization, seeded splits and
// the two-spiral generator.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "celm/error.hpp"
#include "celm/linalg.hpp"
#include "celm/rng.hpp"

namespace celm {

using ClassId = std::string;

namespace detail {

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || first == last) return std::nullopt;
  return v;
}

/// Ascending order; numeric when every label parses as a number, else lexicographic.
inline void sort_class_ids(std::vector<ClassId>& ids) {
  const bool numeric = std::all_of(ids.begin(), ids.end(), [](const ClassId& s) {
    auto v = parse_double(s);
    return v && std::isfinite(*v);
  });
  if (numeric) {
    std::stable_sort(ids.begin(), ids.end(), [](const ClassId& a, const ClassId& b) {
      const double x = *parse_double(a), y = *parse_double(b);
      return x < y || (x == y && a < b);
    });
  } else {
    std::sort(ids.begin(), ids.end());
  }
}

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// N samples x n features with one class label per sample.
///
/// Labels are stored as indices into classes(), which holds the distinct class
/// identifiers present in this dataset in ascending order. Immutable once built.
class Dataset {
 public:
  Dataset() = default;

  Dataset(Matrix features, std::span<const ClassId> labels) : x_(std::move(features)) {
    if (static_cast<Index>(labels.size()) != x_.rows())
      throw UsageError("dataset has " + std::to_string(x_.rows()) + " rows but " +
                       std::to_string(labels.size()) + " labels");
    require_finite(x_, "feature matrix");
    classes_.assign(labels.begin(), labels.end());
    detail::sort_class_ids(classes_);
    classes_.erase(std::unique(classes_.begin(), classes_.end()), classes_.end());
    std::map<ClassId, int> lookup;
    for (std::size_t k = 0; k < classes_.size(); ++k) lookup.emplace(classes_[k], static_cast<int>(k));
    y_.reserve(labels.size());
    members_.resize(classes_.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const int k = lookup.at(labels[i]);
      y_.push_back(k);
      members_[k].push_back(static_cast<Index>(i));
    }
  }

  Index size() const noexcept { return x_.rows(); }
  Index features() const noexcept { return x_.cols(); }
  Index num_classes() const noexcept { return static_cast<Index>(classes_.size()); }
  bool empty() const noexcept { return x_.rows() == 0; }

  const Matrix& x() const noexcept { return x_; }
  auto sample(Index i) const { return x_.row(i); }

  const std::vector<ClassId>& classes() const noexcept { return classes_; }
  /// Class index (into classes()) of every sample.
  const std::vector<int>& y() const noexcept { return y_; }
  const ClassId& label(Index i) const { return classes_[y_[i]]; }
  /// Row indices of every class; partitions {0, ..., N-1}.
  const std::vector<std::vector<Index>>& class_index() const noexcept { return members_; }

  std::vector<ClassId> labels() const {
    std::vector<ClassId> out;
    out.reserve(y_.size());
    for (int k : y_) out.push_back(classes_[k]);
    return out;
  }

  Dataset subset(std::span<const Index> rows) const {
    Matrix sub(static_cast<Index>(rows.size()), x_.cols());
    std::vector<ClassId> labs;
    labs.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      sub.row(static_cast<Index>(r)) = x_.row(rows[r]);
      labs.push_back(label(rows[r]));
    }
    return Dataset(std::move(sub), labs);
  }

  /// Same labels, different feature matrix with the same row count.
  Dataset with_features(Matrix features) const {
    if (features.rows() != x_.rows())
      throw UsageError("replacement feature matrix has the wrong number of rows");
    return Dataset(std::move(features), labels());
  }

 private:
  Matrix x_;
  std::vector<ClassId> classes_;
  std::vector<int> y_;
  std::vector<std::vector<Index>> members_;
};

// ---------------------------------------------------------------------------
// CSV

enum class HeaderMode { absent, present, detect };

/// Label column by zero-based position or by header name. Negative positions
/// count from the end (-1 is the last column).
using LabelColumn = std::variant<Index, std::string>;

/// Raw comma-separated table. Line numbers are 1-based positions in the file.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::size_t width() const { return rows.empty() ? header.size() : rows.front().size(); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    auto field = trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (field.size() >= 2 && field.front() == '"' && field.back() == '"') field = field.substr(1, field.size() - 2);
    out.emplace_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

/// Parse CSV text. Blank lines are skipped; every remaining row must have the
/// same number of fields. With HeaderMode::detect the first row is a header
/// when any of its fields other than `numeric_exempt_col` is non-numeric.
inline CsvTable parse_csv(std::istream& in, HeaderMode header, std::optional<Index> numeric_exempt_col = std::nullopt) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_fields(line);
    if (first) {
      first = false;
      bool is_header = header == HeaderMode::present;
      if (header == HeaderMode::detect) {
        const Index width = static_cast<Index>(fields.size());
        const Index exempt = numeric_exempt_col ? (*numeric_exempt_col < 0 ? width + *numeric_exempt_col
                                                                           : *numeric_exempt_col)
                                                : -1;
        for (Index c = 0; c < width; ++c)
          if (c != exempt && !detail::parse_double(fields[c])) is_header = true;
      }
      if (is_header) {
        table.header = std::move(fields);
        continue;
      }
    }
    const std::size_t expected = table.rows.empty() ? (table.header.empty() ? fields.size() : table.header.size())
                                                    : table.rows.front().size();
    if (fields.size() != expected)
      throw DataError("ragged row " + std::to_string(line_no) + ": expected " + std::to_string(expected) +
                      " fields, found " + std::to_string(fields.size()));
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  return table;
}

inline CsvTable read_csv_file(const std::string& path, HeaderMode header,
                              std::optional<Index> numeric_exempt_col = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_csv(in, header, numeric_exempt_col);
}

/// Resolve a label column against a table; returns a non-negative position.
inline Index resolve_column(const CsvTable& table, const LabelColumn& col) {
  const Index width = static_cast<Index>(table.width());
  if (const auto* name = std::get_if<std::string>(&col)) {
    const auto it = std::find(table.header.begin(), table.header.end(), *name);
    if (it == table.header.end()) throw DataError("no column named '" + *name + "' in header");
    return static_cast<Index>(it - table.header.begin());
  }
  Index pos = std::get<Index>(col);
  if (pos < 0) pos += width;
  if (pos < 0 || (width > 0 && pos >= width))
    throw DataError("label column " + std::to_string(std::get<Index>(col)) + " out of range for " +
                    std::to_string(width) + " columns");
  return pos;
}

/// Numeric matrix from every column except `skip_col`.
inline Matrix table_features(const CsvTable& table, std::optional<Index> skip_col) {
  const Index width = static_cast<Index>(table.width());
  const Index n = skip_col ? width - 1 : width;
  Matrix x(static_cast<Index>(table.rows.size()), std::max<Index>(n, 0));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    Index out_col = 0;
    for (Index c = 0; c < width; ++c) {
      if (skip_col && c == *skip_col) continue;
      const auto v = detail::parse_double(table.rows[r][c]);
      if (!v || !std::isfinite(*v))
        throw DataError("non-numeric feature at row " + std::to_string(table.line_numbers[r]) + ", column " +
                        std::to_string(c + 1) + ": '" + table.rows[r][c] + "'");
      x(static_cast<Index>(r), out_col++) = *v;
    }
  }
  return x;
}

inline Dataset table_to_dataset(const CsvTable& table, const LabelColumn& label_column) {
  if (table.rows.empty()) return Dataset(Matrix(0, 0), std::span<const ClassId>{});
  const Index col = resolve_column(table, label_column);
  std::vector<ClassId> labels;
  labels.reserve(table.rows.size());
  for (const auto& row : table.rows) labels.push_back(row[col]);
  return Dataset(table_features(table, col), labels);
}

/// Load a labelled dataset. Row order follows the file.
inline Dataset load_csv(const std::string& path, const LabelColumn& label_column,
                        HeaderMode header = HeaderMode::detect) {
  std::optional<Index> exempt;
  if (const auto* pos = std::get_if<Index>(&label_column)) exempt = *pos;
  return table_to_dataset(read_csv_file(path, header, exempt), label_column);
}

/// Write `x1,...,xn,label` with a header row; values round-trip exactly.
inline void write_csv(std::ostream& out, const Dataset& data) {
  for (Index c = 0; c < data.features(); ++c) out << 'x' << (c + 1) << ',';
  out << "label\n";
  for (Index i = 0; i < data.size(); ++i) {
    for (Index c = 0; c < data.features(); ++c) out << detail::format_double(data.x()(i, c)) << ',';
    out << data.label(i) << '\n';
  }
}

inline void write_csv_file(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv(out, data);
  if (!out) throw DataError("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Normalization

/// Per-feature mean and divisor. Constant features keep divisor 1.
struct NormStats {
  Vector mean;
  Vector scale;
  Index size() const noexcept { return mean.size(); }
};

/// Mean and population standard deviation of every column.
inline NormStats normalize_fit(const Matrix& x) {
  if (x.rows() == 0) throw UsageError("cannot fit normalization on an empty dataset");
  const double n = static_cast<double>(x.rows());
  NormStats s{x.colwise().mean().transpose(), Vector::Ones(x.cols())};
  for (Index c = 0; c < x.cols(); ++c) {
    const double var = (x.col(c).array() - s.mean(c)).square().sum() / n;
    const double sd = std::sqrt(var);
    // Treat round-off-level spread as a constant column.
    if (sd > 1e-12 * std::max(1.0, std::abs(s.mean(c)))) s.scale(c) = sd;
  }
  return s;
}

inline NormStats normalize_fit(const Dataset& data) { return normalize_fit(data.x()); }

inline Matrix normalize_apply(const NormStats& stats, const Matrix& x) {
  if (x.cols() != stats.size())
    throw UsageError("normalization expects " + std::to_string(stats.size()) + " features, got " +
                     std::to_string(x.cols()));
  return ((x.rowwise() - stats.mean.transpose()).array().rowwise() / stats.scale.transpose().array()).matrix();
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
  double train_fraction = 2.0 / 3.0;
  std::uint64_t seed = 0;
};

struct Split {
  Dataset train;
  Dataset test;
  std::vector<Index> train_rows;  // rows of the source dataset, in draw order
  std::vector<Index> test_rows;
  std::vector<std::string> warnings;
};

/// Number of training rows: ceil(fraction * N), kept within [1, N-1].
inline Index split_train_size(Index n, double fraction) {
  const auto raw = static_cast<Index>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  return std::clamp<Index>(raw, 1, n - 1);
}

/// Seeded uniform shuffle; the first split_train_size rows go to train.
inline Split split(const Dataset& data, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw ConfigError("train fraction must lie strictly between 0 and 1");
  if (data.size() < 2) throw UsageError("splitting needs at least 2 samples");
  std::vector<Index> order(static_cast<std::size_t>(data.size()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);
  auto rng = make_rng(spec.seed);
  shuffle(std::span<Index>(order), rng);
  const auto cut = static_cast<std::size_t>(split_train_size(data.size(), spec.train_fraction));
  Split out;
  out.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
  out.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(cut), order.end());
  out.train = data.subset(out.train_rows);
  out.test = data.subset(out.test_rows);
  const auto& present = out.train.classes();
  for (const auto& cls : data.classes())
    if (std::find(present.begin(), present.end(), cls) == present.end())
      out.warnings.push_back("class '" + cls + "' is absent from the training split");
  return out;
}

// ---------------------------------------------------------------------------
// Two-spiral generator

/// Two interleaved Archimedean arms with total/2 points each, labels "0" and
/// "1". Arm k: theta ~ U[0, 3 pi), r = theta / (3 pi),
/// p = r (cos(theta + k pi), sin(theta + k pi)) + N(0, noise_sigma^2) per axis.
/// Each axis is then rescaled affinely onto [-1, 1].
inline Dataset gen_spiral(Index total, double noise_sigma, std::uint64_t seed) {
  if (total < 2 || total % 2 != 0)
    throw UsageError("spiral total must be an even number >= 2, got " + std::to_string(total));
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw UsageError("spiral noise sigma must be a finite non-negative number");
  constexpr double kTurns = 3.0 * std::numbers::pi;
  auto rng = make_rng(seed);
  Matrix x(total, 2);
  std::vector<ClassId> labels(static_cast<std::size_t>(total));
  const Index half = total / 2;
  for (int arm = 0; arm < 2; ++arm) {
    for (Index i = 0; i < half; ++i) {
      const Index row = arm * half + i;
      const double theta = kTurns * uniform01(rng);
      const double r = theta / kTurns;
      const double phase = theta + arm * std::numbers::pi;
      x(row, 0) = r * std::cos(phase);
      x(row, 1) = r * std::sin(phase);
      if (noise_sigma > 0.0) {
        x(row, 0) += noise_sigma * standard_normal(rng);
        x(row, 1) += noise_sigma * standard_normal(rng);
      }
      labels[static_cast<std::size_t>(row)] = arm == 0 ? "0" : "1";
    }
  }
  for (Index c = 0; c < 2; ++c) {
    const double lo = x.col(c).minCoeff();
    const double hi = x.col(c).maxCoeff();
    const double span = hi - lo;
    if (span > 0.0)
      x.col(c) = ((x.col(c).array() - lo) * (2.0 / span) - 1.0).cwiseMax(-1.0).cwiseMin(1.0).matrix();
    else
      x.col(c).setZero();
  }
  return Dataset(std::move(x), labels);
}

}  // namespace celm
