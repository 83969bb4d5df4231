#include "snn/masked_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace snn {

MaskedMatrix::MaskedMatrix(Matrix values, BoolMatrix mask)
    : values_(std::move(values)), mask_(std::move(mask)) {
  if (values_.rows() != mask_.rows() || values_.cols() != mask_.cols())
    throw std::invalid_argument("MaskedMatrix: values and mask shapes differ");
  if (values_.rows() < 1 || values_.cols() < 1)
    throw std::invalid_argument("MaskedMatrix: dimensions must be at least 1x1");
  for (Index j = 0; j < values_.cols(); ++j)
    for (Index i = 0; i < values_.rows(); ++i)
      if (!mask_(i, j)) values_(i, j) = 0.0;
}

MaskedMatrix MaskedMatrix::fully_observed(Matrix values) {
  BoolMatrix mask = BoolMatrix::Constant(values.rows(), values.cols(), true);
  return MaskedMatrix(std::move(values), std::move(mask));
}

void MaskedMatrix::check_bounds(Index i, Index j) const {
  if (i < 0 || i >= rows() || j < 0 || j >= cols()) {
    std::ostringstream msg;
    msg << "MaskedMatrix: index (" << i << "," << j << ") out of bounds for " << rows() << "x"
        << cols();
    throw std::out_of_range(msg.str());
  }
}

bool MaskedMatrix::observed(Index i, Index j) const {
  check_bounds(i, j);
  return mask_(i, j);
}

double MaskedMatrix::get(Index i, Index j) const {
  check_bounds(i, j);
  if (!mask_(i, j)) {
    std::ostringstream msg;
    msg << "MaskedMatrix: cell (" << i << "," << j << ") is unobserved";
    throw std::domain_error(msg.str());
  }
  return values_(i, j);
}

Index MaskedMatrix::observed_count() const {
  Index count = 0;
  for (Index j = 0; j < cols(); ++j)
    for (Index i = 0; i < rows(); ++i)
      if (mask_(i, j)) ++count;
  return count;
}

EvalReport evaluate(const Matrix& pred, const Matrix& truth, const BoolMatrix& eval_mask) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols() ||
      pred.rows() != eval_mask.rows() || pred.cols() != eval_mask.cols())
    throw std::invalid_argument("evaluate: shape mismatch");
  double sq_sum = 0.0;
  double abs_sum = 0.0;
  Index count = 0;
  for (Index j = 0; j < pred.cols(); ++j) {
    for (Index i = 0; i < pred.rows(); ++i) {
      if (!eval_mask(i, j)) continue;
      const double diff = pred(i, j) - truth(i, j);
      sq_sum += diff * diff;
      abs_sum += std::abs(diff);
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("evaluate: empty evaluation set");
  EvalReport report;
  report.count = count;
  report.rmse = std::sqrt(sq_sum / static_cast<double>(count));
  report.mae = abs_sum / static_cast<double>(count);
  return report;
}

std::string eval_report_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "rmse,mae,count\n"
      << format_double(report.rmse) << "," << format_double(report.mae) << "," << report.count
      << "\n";
  return out.str();
}

std::string format_double(double value) {
  char buf[64];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, value);
    if (std::strtod(buf, nullptr) == value) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_cell(const std::string& cell, Index row, Index col) {
  const char* text = cell.c_str();
  char* end = nullptr;
  const double value = std::strtod(text, &end);
  if (end == text || *end != '\0') {
    std::ostringstream msg;
    msg << "CSV: unparseable numeric cell \"" << cell << "\" at row " << row << ", column " << col;
    throw std::runtime_error(msg.str());
  }
  return value;
}

std::vector<std::vector<std::string>> read_csv_cells(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("CSV: cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() && in.peek() == EOF) break;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.push_back("");
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw std::runtime_error("CSV: empty file " + path);
  return rows;
}

}  // namespace

MaskedMatrix read_masked_csv(const std::string& path, const std::string& missing_token) {
  const auto cells = read_csv_cells(path);
  const Index m = static_cast<Index>(cells.size());
  const Index n = static_cast<Index>(cells.front().size());
  Matrix values = Matrix::Zero(m, n);
  BoolMatrix mask = BoolMatrix::Constant(m, n, false);
  for (Index i = 0; i < m; ++i) {
    if (static_cast<Index>(cells[i].size()) != n) {
      std::ostringstream msg;
      msg << "CSV: ragged rows in " << path << " (row " << i << " has " << cells[i].size()
          << " cells, expected " << n << ")";
      throw std::runtime_error(msg.str());
    }
    for (Index j = 0; j < n; ++j) {
      if (cells[i][j] == missing_token) continue;
      values(i, j) = parse_cell(cells[i][j], i, j);
      mask(i, j) = true;
    }
  }
  return MaskedMatrix(std::move(values), std::move(mask));
}

void write_masked_csv(const MaskedMatrix& mat, const std::string& path,
                      const std::string& missing_token) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("CSV: cannot write " + path);
  for (Index i = 0; i < mat.rows(); ++i) {
    for (Index j = 0; j < mat.cols(); ++j) {
      if (j > 0) out << ',';
      if (mat.mask()(i, j))
        out << format_double(mat.values()(i, j));
      else
        out << missing_token;
    }
    out << '\n';
  }
}

Matrix read_matrix_csv(const std::string& path) {
  const auto cells = read_csv_cells(path);
  const Index m = static_cast<Index>(cells.size());
  const Index n = static_cast<Index>(cells.front().size());
  Matrix values(m, n);
  for (Index i = 0; i < m; ++i) {
    if (static_cast<Index>(cells[i].size()) != n)
      throw std::runtime_error("CSV: ragged rows in " + path);
    for (Index j = 0; j < n; ++j) values(i, j) = parse_cell(cells[i][j], i, j);
  }
  return values;
}

void write_matrix_csv(const Matrix& mat, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("CSV: cannot write " + path);
  for (Index i = 0; i < mat.rows(); ++i) {
    for (Index j = 0; j < mat.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(mat(i, j));
    }
    out << '\n';
  }
}

std::vector<Index> histogram(const std::vector<double>& values,
                             const std::vector<double>& bin_edges) {
  if (bin_edges.size() < 2) throw std::invalid_argument("histogram: need at least two bin edges");
  for (std::size_t k = 1; k < bin_edges.size(); ++k)
    if (!(bin_edges[k] > bin_edges[k - 1]))
      throw std::invalid_argument("histogram: bin edges must be strictly ascending");
  std::vector<Index> counts(bin_edges.size() - 1, 0);
  for (double v : values) {
    if (v < bin_edges.front() || v > bin_edges.back()) continue;
    if (v == bin_edges.back()) {
      ++counts.back();
      continue;
    }
    const auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), v);
    counts[static_cast<std::size_t>(it - bin_edges.begin()) - 1]++;
  }
  return counts;
}

}  // namespace snn
