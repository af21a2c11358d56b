#pragma once

// Aligned multivariate time series and the preprocessing transforms applied
// before any causality analysis. Panels are immutable: every transform
// returns a new panel.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "causalkit/error.hpp"

namespace causalkit {

namespace detail {

inline std::optional<double> parse_number(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

// Timestamps are opaque; two numeric labels compare numerically, anything
// else lexicographically.
inline bool label_less(const std::string& a, const std::string& b) {
  auto na = parse_number(a);
  auto nb = parse_number(b);
  if (na && nb) return *na < *nb;
  return a < b;
}

inline std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, delim)) out.push_back(cell);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  for (auto& c : out) {
    while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
    while (!c.empty() && c.front() == ' ') c.erase(c.begin());
  }
  return out;
}

}  // namespace detail

class TimeSeriesPanel {
 public:
  TimeSeriesPanel() = default;

  TimeSeriesPanel(std::vector<std::string> names, std::vector<Eigen::VectorXd> columns,
                  std::optional<std::vector<std::string>> index = std::nullopt)
      : names_(std::move(names)), columns_(std::move(columns)), index_(std::move(index)) {
    validate();
  }

  std::size_t length() const { return columns_.empty() ? 0 : static_cast<std::size_t>(columns_[0].size()); }
  std::size_t width() const { return columns_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::optional<std::vector<std::string>>& index() const { return index_; }

  bool has_column(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
  }

  std::size_t column_index(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) fail(Errc::UnknownColumn, "no column named '" + name + "'");
    return static_cast<std::size_t>(it - names_.begin());
  }

  const Eigen::VectorXd& column(const std::string& name) const { return columns_[column_index(name)]; }
  const Eigen::VectorXd& column(std::size_t i) const { return columns_.at(i); }

  // Copy with one column's values replaced (same length required).
  TimeSeriesPanel with_column(const std::string& name, Eigen::VectorXd values) const {
    auto cols = columns_;
    cols[column_index(name)] = std::move(values);
    return TimeSeriesPanel(names_, std::move(cols), index_);
  }

  TimeSeriesPanel select(const std::vector<std::string>& names) const {
    std::vector<Eigen::VectorXd> cols;
    for (const auto& n : names) cols.push_back(column(n));
    return TimeSeriesPanel(names, std::move(cols), index_);
  }

 private:
  void validate() const {
    if (names_.size() != columns_.size())
      fail(Errc::InvalidArgument, "column name count differs from column count");
    if (columns_.empty()) fail(Errc::InvalidArgument, "panel needs at least one column");
    std::set<std::string> seen;
    for (const auto& n : names_) {
      if (n.empty()) fail(Errc::InvalidArgument, "empty column name");
      if (!seen.insert(n).second) fail(Errc::DuplicateColumnName, "duplicate column '" + n + "'");
    }
    const auto n = columns_[0].size();
    if (n < 1) fail(Errc::LengthTooShort, "panel length must be >= 1");
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      if (columns_[j].size() != n) fail(Errc::LengthMismatch, "column '" + names_[j] + "' has a different length");
      if (!columns_[j].allFinite()) fail(Errc::InvalidArgument, "column '" + names_[j] + "' has non-finite values");
    }
    if (index_) {
      if (static_cast<Eigen::Index>(index_->size()) != n)
        fail(Errc::LengthMismatch, "index length differs from panel length");
      for (std::size_t i = 1; i < index_->size(); ++i)
        if (!detail::label_less((*index_)[i - 1], (*index_)[i]))
          fail(Errc::InvalidArgument, "index is not strictly increasing at row " + std::to_string(i));
    }
  }

  std::vector<std::string> names_;
  std::vector<Eigen::VectorXd> columns_;
  std::optional<std::vector<std::string>> index_;
};

struct CsvOptions {
  char delimiter = ',';
  bool index_column = false;  // first column holds timestamps/labels
};

// Rows are reported 1-based, counting data rows only (header excluded).
inline TimeSeriesPanel load_csv(const std::filesystem::path& path, const CsvOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) fail(Errc::FileNotFound, path.string());

  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r" || line.front() == '#') continue;
    header = detail::split_line(line, opts.delimiter);
    break;
  }
  if (header.empty()) fail(Errc::EmptyFile, path.string() + " has no header");

  const std::size_t first = opts.index_column ? 1 : 0;
  if (header.size() <= first) fail(Errc::EmptyFile, path.string() + " has no data columns");
  std::vector<std::string> names(header.begin() + static_cast<std::ptrdiff_t>(first), header.end());
  {
    std::set<std::string> seen;
    for (const auto& n : names) {
      if (n.empty()) fail(Errc::ParseError, "empty column name in header");
      if (!seen.insert(n).second) fail(Errc::DuplicateColumnName, "duplicate column '" + n + "'");
    }
  }

  std::vector<std::vector<double>> data(names.size());
  std::vector<std::string> labels;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    auto cells = detail::split_line(line, opts.delimiter);
    if (opts.index_column) labels.push_back(cells.empty() ? std::string() : cells[0]);
    for (std::size_t j = 0; j < names.size(); ++j) {
      const std::size_t k = j + first;
      const std::string cell = k < cells.size() ? cells[k] : std::string();
      auto v = detail::parse_number(cell);
      if (!v) throw ParseError(row, names[j], cell);
      data[j].push_back(*v);
    }
    if (cells.size() > names.size() + first)
      fail(Errc::ParseError, "row " + std::to_string(row) + " has extra cells");
  }
  if (row == 0) fail(Errc::EmptyFile, path.string() + " has no data rows");

  std::vector<Eigen::VectorXd> cols;
  for (auto& d : data) cols.emplace_back(Eigen::Map<Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size())));
  std::optional<std::vector<std::string>> index;
  if (opts.index_column) index = std::move(labels);
  return TimeSeriesPanel(std::move(names), std::move(cols), std::move(index));
}

inline void write_csv(std::ostream& out, const TimeSeriesPanel& panel, char delimiter = ',') {
  out << std::setprecision(17);
  const bool with_index = panel.index().has_value();
  if (with_index) out << "index" << delimiter;
  for (std::size_t j = 0; j < panel.width(); ++j) out << (j ? std::string(1, delimiter) : "") << panel.names()[j];
  out << '\n';
  for (std::size_t i = 0; i < panel.length(); ++i) {
    if (with_index) out << (*panel.index())[i] << delimiter;
    for (std::size_t j = 0; j < panel.width(); ++j)
      out << (j ? std::string(1, delimiter) : "") << panel.column(j)(static_cast<Eigen::Index>(i));
    out << '\n';
  }
}

inline TimeSeriesPanel window(const TimeSeriesPanel& panel, std::size_t start, std::size_t length) {
  if (length == 0 || start + length > panel.length())
    fail(Errc::OutOfRange, "window [" + std::to_string(start) + ", " + std::to_string(start + length) +
                               ") exceeds panel length " + std::to_string(panel.length()));
  std::vector<Eigen::VectorXd> cols;
  for (std::size_t j = 0; j < panel.width(); ++j)
    cols.emplace_back(panel.column(j).segment(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(length)));
  std::optional<std::vector<std::string>> index;
  if (panel.index())
    index.emplace(panel.index()->begin() + static_cast<std::ptrdiff_t>(start),
                  panel.index()->begin() + static_cast<std::ptrdiff_t>(start + length));
  return TimeSeriesPanel(panel.names(), std::move(cols), std::move(index));
}

// r_t = ln(c_t / c_{t-1}) for the selected columns (all when empty); the
// remaining columns lose their first row so the panel stays rectangular.
inline TimeSeriesPanel log_returns(const TimeSeriesPanel& panel, const std::vector<std::string>& columns = {}) {
  const auto n = static_cast<Eigen::Index>(panel.length());
  if (n < 2) fail(Errc::LengthTooShort, "log returns need at least 2 rows");
  std::vector<bool> selected(panel.width(), columns.empty());
  for (const auto& c : columns) selected[panel.column_index(c)] = true;

  std::vector<Eigen::VectorXd> cols;
  for (std::size_t j = 0; j < panel.width(); ++j) {
    const auto& c = panel.column(j);
    if (!selected[j]) {
      cols.emplace_back(c.tail(n - 1));
      continue;
    }
    for (Eigen::Index i = 0; i < n; ++i)
      if (!(c(i) > 0.0))
        fail(Errc::NonPositiveValue, "column '" + panel.names()[j] + "' row " + std::to_string(i) + " is not positive");
    Eigen::VectorXd r(n - 1);
    for (Eigen::Index i = 1; i < n; ++i) r(i - 1) = std::log(c(i) / c(i - 1));
    cols.push_back(std::move(r));
  }
  std::optional<std::vector<std::string>> index;
  if (panel.index()) index.emplace(panel.index()->begin() + 1, panel.index()->end());
  return TimeSeriesPanel(panel.names(), std::move(cols), std::move(index));
}

inline TimeSeriesPanel demean(const TimeSeriesPanel& panel) {
  std::vector<Eigen::VectorXd> cols;
  for (std::size_t j = 0; j < panel.width(); ++j) {
    const auto& c = panel.column(j);
    Eigen::VectorXd d = c.array() - c.mean();
    // second pass removes the rounding residue of the first
    d.array() -= d.mean();
    cols.push_back(std::move(d));
  }
  return TimeSeriesPanel(panel.names(), std::move(cols), panel.index());
}

// Subtracts the least-squares line over the time axis 0..n-1.
inline TimeSeriesPanel detrend(const TimeSeriesPanel& panel) {
  const auto n = static_cast<Eigen::Index>(panel.length());
  if (n < 2) fail(Errc::LengthTooShort, "detrend needs at least 2 rows");
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(n, 0.0, static_cast<double>(n - 1));
  const Eigen::VectorXd tc = t.array() - t.mean();
  const double stt = tc.squaredNorm();
  std::vector<Eigen::VectorXd> cols;
  for (std::size_t j = 0; j < panel.width(); ++j) {
    Eigen::VectorXd d = panel.column(j);
    for (int pass = 0; pass < 2; ++pass) {
      const double mean = d.mean();
      const double slope = tc.dot(d) / stt;
      d = d.array() - mean - slope * tc.array();
    }
    cols.push_back(std::move(d));
  }
  return TimeSeriesPanel(panel.names(), std::move(cols), panel.index());
}

inline TimeSeriesPanel difference(const TimeSeriesPanel& panel) {
  const auto n = static_cast<Eigen::Index>(panel.length());
  if (n < 2) fail(Errc::LengthTooShort, "difference needs at least 2 rows");
  std::vector<Eigen::VectorXd> cols;
  for (std::size_t j = 0; j < panel.width(); ++j) {
    const auto& c = panel.column(j);
    cols.emplace_back(c.tail(n - 1) - c.head(n - 1));
  }
  std::optional<std::vector<std::string>> index;
  if (panel.index()) index.emplace(panel.index()->begin() + 1, panel.index()->end());
  return TimeSeriesPanel(panel.names(), std::move(cols), std::move(index));
}

}  // namespace causalkit
