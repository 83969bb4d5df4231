#include "snn/spectral.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace snn {

Index SvdFactorization::positive_count() const {
  if (singular_values.size() == 0) return 0;
  const double cutoff = kSpectrumZeroTol * singular_values(0);
  Index count = 0;
  for (Index l = 0; l < singular_values.size(); ++l)
    if (singular_values(l) > cutoff && singular_values(l) > 0.0) ++count;
  return count;
}

SvdFactorization svd(const Matrix& M) {
  if (!M.allFinite()) throw std::invalid_argument("svd: input has non-finite entries");
  Eigen::BDCSVD<Matrix> solver(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdFactorization fact;
  fact.singular_values = solver.singularValues();
  fact.left_vectors = solver.matrixU();
  fact.right_vectors = solver.matrixV();
  for (Index l = 0; l < fact.left_vectors.cols(); ++l) {
    Index arg = 0;
    double best = -1.0;
    for (Index i = 0; i < fact.left_vectors.rows(); ++i) {
      const double mag = std::abs(fact.left_vectors(i, l));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    if (fact.left_vectors(arg, l) < 0.0) {
      fact.left_vectors.col(l) = -fact.left_vectors.col(l);
      fact.right_vectors.col(l) = -fact.right_vectors.col(l);
    }
  }
  return fact;
}

RankPolicy RankPolicy::fixed(int k) {
  if (k < 1) throw std::invalid_argument("RankPolicy::fixed: k must be >= 1");
  RankPolicy p;
  p.kind = Kind::Fixed;
  p.fixed_rank = k;
  return p;
}

RankPolicy RankPolicy::energy(double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("RankPolicy::energy: fraction must be in (0, 1]");
  RankPolicy p;
  p.kind = Kind::EnergyThreshold;
  p.energy_fraction = fraction;
  return p;
}

RankPolicy RankPolicy::universal(double constant) {
  if (!(constant > 0.0))
    throw std::invalid_argument("RankPolicy::universal: constant must be positive");
  RankPolicy p;
  p.kind = Kind::UniversalThreshold;
  p.universal_constant = constant;
  return p;
}

Index select_rank(const SvdFactorization& fact, const RankPolicy& policy, Index p, Index q,
                  std::optional<double> noise_scale) {
  const Index positive = fact.positive_count();
  if (positive == 0) throw std::invalid_argument("select_rank: all-zero spectrum");
  switch (policy.kind) {
    case RankPolicy::Kind::Fixed:
      return std::min<Index>(policy.fixed_rank, positive);
    case RankPolicy::Kind::EnergyThreshold: {
      if (policy.energy_fraction >= 1.0) return positive;
      double total = 0.0;
      for (Index l = 0; l < positive; ++l)
        total += fact.singular_values(l) * fact.singular_values(l);
      double cumulative = 0.0;
      for (Index l = 0; l < positive; ++l) {
        cumulative += fact.singular_values(l) * fact.singular_values(l);
        if (cumulative >= policy.energy_fraction * total) return l + 1;
      }
      return positive;
    }
    case RankPolicy::Kind::UniversalThreshold: {
      const double dim = static_cast<double>(std::max(p, q));
      double sigma_hat;
      if (noise_scale.has_value()) {
        sigma_hat = *noise_scale;
      } else {
        std::vector<double> taus(fact.singular_values.data(),
                                 fact.singular_values.data() + fact.singular_values.size());
        std::sort(taus.begin(), taus.end());
        const std::size_t s = taus.size();
        const double median =
            (s % 2 == 1) ? taus[s / 2] : 0.5 * (taus[s / 2 - 1] + taus[s / 2]);
        sigma_hat = median / std::sqrt(dim);
      }
      const double cutoff = policy.universal_constant * sigma_hat * std::sqrt(dim);
      Index keep = 0;
      for (Index l = 0; l < positive; ++l)
        if (fact.singular_values(l) >= cutoff) ++keep;
      return std::max<Index>(keep, 1);
    }
  }
  throw std::logic_error("select_rank: unknown policy kind");
}

Matrix hsvt(const Matrix& M, Index rank) {
  if (rank < 1 || rank > std::min(M.rows(), M.cols()))
    throw std::invalid_argument("hsvt: rank out of range");
  const SvdFactorization fact = svd(M);
  const Index keep = std::min(rank, fact.singular_values.size());
  return fact.left_vectors.leftCols(keep) * fact.singular_values.head(keep).asDiagonal() *
         fact.right_vectors.leftCols(keep).transpose();
}

Vector pcr(const Matrix& S, const Vector& response, Index rank) {
  return pcr(svd(S), response, rank);
}

Vector pcr(const SvdFactorization& fact, const Vector& response, Index rank) {
  if (fact.right_vectors.rows() != response.size())
    throw std::invalid_argument("pcr: response length does not match design columns");
  const Index positive = fact.positive_count();
  if (rank < 1 || rank > positive)
    throw std::invalid_argument("pcr: rank exceeds the positive spectrum");
  Vector beta = Vector::Zero(fact.left_vectors.rows());
  for (Index l = 0; l < rank; ++l) {
    const double coeff = fact.right_vectors.col(l).dot(response) / fact.singular_values(l);
    beta += coeff * fact.left_vectors.col(l);
  }
  return beta;
}

}  // namespace snn
