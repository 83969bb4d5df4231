#pragma once

#include <optional>

#include "snn/masked_matrix.hpp"

namespace snn {

// Singular values at or below kSpectrumZeroTol * tau_1 are treated as zero
// everywhere in this module; PCR never divides by anything smaller.
inline constexpr double kSpectrumZeroTol = 1e-12;

struct SvdFactorization {
  Vector singular_values;  // descending
  Matrix left_vectors;     // p x s, orthonormal columns
  Matrix right_vectors;    // q x s, orthonormal columns

  /// Number of singular values above kSpectrumZeroTol * tau_1.
  Index positive_count() const;
};

/// Thin SVD with a fixed sign convention: the largest-magnitude entry of each
/// left singular vector is nonnegative (ties broken by lowest index), so
/// downstream regressions are reproducible bit-for-bit.
SvdFactorization svd(const Matrix& M);

struct RankPolicy {
  enum class Kind { Fixed, EnergyThreshold, UniversalThreshold };

  Kind kind = Kind::EnergyThreshold;
  int fixed_rank = 1;
  double energy_fraction = 0.999;
  double universal_constant = 2.02;

  static RankPolicy fixed(int k);
  static RankPolicy energy(double fraction);
  static RankPolicy universal(double constant = 2.02);
};

/// Rank chosen by the policy; always in [1, positive_count]. The matrix shape
/// (p, q) feeds the universal threshold; noise_scale overrides its sigma-hat.
Index select_rank(const SvdFactorization& fact, const RankPolicy& policy, Index p, Index q,
                  std::optional<double> noise_scale = std::nullopt);

/// Best rank-`rank` Frobenius approximation (hard singular value thresholding).
Matrix hsvt(const Matrix& M, Index rank);

/// Principal component regression: the minimum-norm solution of S^T beta = response
/// restricted to the top-`rank` left singular subspace of S.
Vector pcr(const Matrix& S, const Vector& response, Index rank);
Vector pcr(const SvdFactorization& fact, const Vector& response, Index rank);

}  // namespace snn
