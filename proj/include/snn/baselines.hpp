#pragma once

#include <utility>
#include <vector>

#include "snn/masked_matrix.hpp"

namespace snn {

struct BaselineConfig {
  int knn_k = 5;
  double usvt_eta = 0.3;
  double softimpute_lambda = 0.0;
  int softimpute_max_iter = 200;
  double softimpute_tol = 1e-6;

  void validate() const;
};

struct KnnResult {
  Matrix completed;                                   // unestimable cells hold NaN
  std::vector<std::pair<Index, Index>> unestimable;   // missing cells without candidates
};

/// Row-neighbor imputation: for a missing (i, j), candidate rows observe
/// column j and share at least one observed column with row i; distance is
/// the mean squared difference over the shared columns; the estimate averages
/// the k closest candidates' column-j values (ties broken by row index).
KnnResult knn_impute(const MaskedMatrix& data, int k);

/// Universal singular value thresholding on the zero-filled matrix rescaled
/// by 1 / observed fraction; singular values below
/// eta * sqrt(max(m, n) * p_hat) * max|observed| are dropped and the
/// reconstruction is clipped to the observed value range.
Matrix usvt(const MaskedMatrix& data, double eta);

/// Nuclear-norm regularized imputation: iterate Z <- SVT_lambda on the
/// observed entries plus Z elsewhere until the relative Frobenius change
/// drops below tol. Warm start at zero, lambda fixed.
Matrix soft_impute(const MaskedMatrix& data, double lambda, int max_iter, double tol);

/// Objective tracked by soft_impute: 0.5 * ||P_obs(Y - Z)||_F^2 + lambda * ||Z||_*.
double soft_impute_objective(const MaskedMatrix& data, const Matrix& Z, double lambda);

}  // namespace snn
