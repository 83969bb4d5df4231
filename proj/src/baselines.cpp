#include "snn/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "snn/spectral.hpp"

namespace snn {

void BaselineConfig::validate() const {
  if (knn_k < 1) throw std::invalid_argument("BaselineConfig: knn_k must be >= 1");
  if (!(usvt_eta > 0.0 && usvt_eta <= 1.0))
    throw std::invalid_argument("BaselineConfig: usvt_eta must be in (0, 1]");
  if (softimpute_lambda < 0.0)
    throw std::invalid_argument("BaselineConfig: softimpute_lambda must be >= 0");
  if (softimpute_max_iter < 1)
    throw std::invalid_argument("BaselineConfig: softimpute_max_iter must be >= 1");
  if (!(softimpute_tol > 0.0)) throw std::invalid_argument("BaselineConfig: softimpute_tol must be > 0");
}

KnnResult knn_impute(const MaskedMatrix& data, int k) {
  if (k < 1) throw std::invalid_argument("knn_impute: k must be >= 1");
  const Index m = data.rows();
  const Index n = data.cols();
  KnnResult result;
  result.completed = data.values();
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (data.mask()(i, j)) continue;
      std::vector<std::pair<double, Index>> candidates;  // (distance, row)
      for (Index a = 0; a < m; ++a) {
        if (a == i || !data.mask()(a, j)) continue;
        double sq_sum = 0.0;
        Index common = 0;
        for (Index b = 0; b < n; ++b) {
          if (!data.mask()(i, b) || !data.mask()(a, b)) continue;
          const double diff = data.values()(i, b) - data.values()(a, b);
          sq_sum += diff * diff;
          ++common;
        }
        if (common == 0) continue;
        candidates.emplace_back(sq_sum / static_cast<double>(common), a);
      }
      if (candidates.empty()) {
        result.completed(i, j) = std::numeric_limits<double>::quiet_NaN();
        result.unestimable.emplace_back(i, j);
        continue;
      }
      std::sort(candidates.begin(), candidates.end());
      const std::size_t take = std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(k));
      double total = 0.0;
      for (std::size_t c = 0; c < take; ++c) total += data.values()(candidates[c].second, j);
      result.completed(i, j) = total / static_cast<double>(take);
    }
  }
  return result;
}

Matrix usvt(const MaskedMatrix& data, double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("usvt: eta must be in (0, 1]");
  const Index observed = data.observed_count();
  if (observed == 0) throw std::invalid_argument("usvt: no observed entries");
  const Index m = data.rows();
  const Index n = data.cols();
  const double p_hat = static_cast<double>(observed) / static_cast<double>(m * n);

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  double scale = 0.0;
  Matrix filled = Matrix::Zero(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) {
      if (!data.mask()(i, j)) continue;
      const double v = data.values()(i, j);
      filled(i, j) = v / p_hat;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      scale = std::max(scale, std::abs(v));
    }

  const SvdFactorization fact = svd(filled);
  const double cutoff = eta * std::sqrt(static_cast<double>(std::max(m, n)) * p_hat) * scale;
  Index keep = 0;
  for (Index l = 0; l < fact.singular_values.size(); ++l)
    if (fact.singular_values(l) >= cutoff) ++keep;
  Matrix estimate = Matrix::Zero(m, n);
  if (keep > 0)
    estimate = fact.left_vectors.leftCols(keep) * fact.singular_values.head(keep).asDiagonal() *
               fact.right_vectors.leftCols(keep).transpose();
  return estimate.cwiseMax(lo).cwiseMin(hi);
}

double soft_impute_objective(const MaskedMatrix& data, const Matrix& Z, double lambda) {
  double fit = 0.0;
  for (Index i = 0; i < data.rows(); ++i)
    for (Index j = 0; j < data.cols(); ++j) {
      if (!data.mask()(i, j)) continue;
      const double diff = data.values()(i, j) - Z(i, j);
      fit += diff * diff;
    }
  const SvdFactorization fact = svd(Z);
  return 0.5 * fit + lambda * fact.singular_values.sum();
}

Matrix soft_impute(const MaskedMatrix& data, double lambda, int max_iter, double tol) {
  if (lambda < 0.0) throw std::invalid_argument("soft_impute: lambda must be >= 0");
  if (max_iter < 1) throw std::invalid_argument("soft_impute: max_iter must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("soft_impute: tol must be positive");
  const Index m = data.rows();
  const Index n = data.cols();
  Matrix Z = Matrix::Zero(m, n);
  for (int iter = 0; iter < max_iter; ++iter) {
    Matrix work = Z;
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < n; ++j)
        if (data.mask()(i, j)) work(i, j) = data.values()(i, j);
    const SvdFactorization fact = svd(work);
    Vector shrunk = (fact.singular_values.array() - lambda).max(0.0).matrix();
    Index keep = 0;
    for (Index l = 0; l < shrunk.size(); ++l)
      if (shrunk(l) > 0.0) ++keep;
    Matrix Z_next = Matrix::Zero(m, n);
    if (keep > 0)
      Z_next = fact.left_vectors.leftCols(keep) * shrunk.head(keep).asDiagonal() *
               fact.right_vectors.leftCols(keep).transpose();
    const double denom = std::max(Z.norm(), 1e-12);
    const double change = (Z_next - Z).norm() / denom;
    Z = std::move(Z_next);
    if (change < tol) break;
  }
  return Z;
}

}  // namespace snn
