#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace snn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

/// Partially observed matrix: values plus an observation mask.
/// Missingness is carried by the mask bit, never by NaN in the values;
/// masked entries are zeroed at construction and must not be read.
class MaskedMatrix {
 public:
  MaskedMatrix(Matrix values, BoolMatrix mask);

  static MaskedMatrix fully_observed(Matrix values);

  Index rows() const { return values_.rows(); }
  Index cols() const { return values_.cols(); }

  bool observed(Index i, Index j) const;

  /// Value at an observed cell; throws on out-of-bounds or masked cells.
  double get(Index i, Index j) const;

  const Matrix& values() const { return values_; }
  const BoolMatrix& mask() const { return mask_; }

  Index observed_count() const;

 private:
  void check_bounds(Index i, Index j) const;

  Matrix values_;
  BoolMatrix mask_;
};

struct EvalReport {
  double rmse = 0.0;
  double mae = 0.0;
  Index count = 0;
};

/// RMSE/MAE of pred against truth over the cells where eval_mask is true.
EvalReport evaluate(const Matrix& pred, const Matrix& truth, const BoolMatrix& eval_mask);

/// One CSV row "rmse,mae,count" under a header line.
std::string eval_report_csv(const EvalReport& report);

/// Shortest decimal form that round-trips a double (up to 17 significant digits).
std::string format_double(double value);

MaskedMatrix read_masked_csv(const std::string& path, const std::string& missing_token = "NA");
void write_masked_csv(const MaskedMatrix& mat, const std::string& path,
                      const std::string& missing_token = "NA");

Matrix read_matrix_csv(const std::string& path);
void write_matrix_csv(const Matrix& mat, const std::string& path);

/// Counts per bin. Bins are half-open [e_k, e_{k+1}) with the last bin closed;
/// values outside [first, last] are ignored.
std::vector<Index> histogram(const std::vector<double>& values,
                             const std::vector<double>& bin_edges);

}  // namespace snn
