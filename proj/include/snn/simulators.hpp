#pragma once

#include "snn/masked_matrix.hpp"
#include "snn/rng.hpp"

namespace snn {

/// Simulator ground truth: row factors, column factors, and the signal matrix.
struct FactorPair {
  Matrix U;  // m x r
  Matrix V;  // n x r
  Matrix A;  // m x n, U V^T after optional range scaling
  int r = 0;
};

/// Row factor matrix with a Gaussian core block: the first m_core rows are
/// iid standard normal; every remaining row is a Dirichlet(1,...,1) mixture
/// of the core rows, so it lies in their convex hull by construction.
Matrix gen_core_factors(Index m, Index m_core, int r, Rng& rng);

/// Affine map sending min(A) to lo and max(A) to hi; a constant matrix maps
/// to the midpoint.
Matrix scale_to_range(const Matrix& A, double lo, double hi);

/// iid Bernoulli(p_observe) mask. p_observe must be in (0, 1].
BoolMatrix mcar_mask(Index m, Index n, double p_observe, Rng& rng);

/// Cohort-wise rating-dependent propensities for the limited-MNAR mechanism.
/// Cohorts partition the matrix by core rows/columns; alpha controls how
/// strongly extreme ratings are favored, and kappa is calibrated per cohort
/// so the mean propensity hits the target observed fraction.
struct CohortPropensitySpec {
  Index m_core = 20;
  Index n_core = 20;
  double threshold = 2.3;  // ratings at the threshold are the least likely to be revealed
  double alpha_core = 0.7;
  double alpha_user = 0.35;
  double alpha_item = 0.35;
  double alpha_standard = 0.1;
  double frac_core = 0.9;
  double frac_user = 0.7;
  double frac_item = 0.7;
  double frac_standard = 0.05;
};

/// Propensity matrix in (0, 1]: entries keep positivity and are independent
/// once sampled. A must take values in [1, 5]. Throws if calibrating a cohort
/// would clip more than half of it at probability 1.
Matrix limited_mnar_propensity(const Matrix& A, const CohortPropensitySpec& spec);

/// Independent Bernoulli(P_ij) draw.
BoolMatrix sample_mask(const Matrix& P, Rng& rng);

/// Deterministic favorite-genre mask: core columns (j < n_core) are fully
/// observed; elsewhere cell (i, j) is observed iff argmax_k U(i,k) equals
/// argmax_k V(j,k) (ties to the lowest index). Violates positivity and
/// cell independence by design.
BoolMatrix general_mnar_mask(const Matrix& U, const Matrix& V, Index n_core);

struct PanelAdoptionSpec {
  Index pre_periods = 18;
  double p_mild = 0.1;
  double p_moderate = 0.3;
  double p_severe = 0.5;
};

/// Unit severity from the pre/post change in average outcome: 0 mild
/// (change >= mean + std), 2 severe (change <= mean - std), 1 moderate.
std::vector<int> panel_severity_classes(const Matrix& Y, Index pre_periods);

/// Treatment-adoption mask: adopted units lose their entire post block;
/// everything else stays observed. Adoption probability depends on severity.
BoolMatrix panel_adoption_mask(const Matrix& Y, const PanelAdoptionSpec& spec, Rng& rng);

/// A + iid N(0, sigma^2).
Matrix add_noise(const Matrix& A, double sigma, Rng& rng);

}  // namespace snn
