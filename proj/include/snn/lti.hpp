#pragma once

#include <Eigen/Core>
#include <vector>

#include "snn/masked_matrix.hpp"
#include "snn/rng.hpp"

namespace snn {

/// Linear recurrent formula on R latent temporal factors with lag order G:
/// rho_r(t) = sum_g beta(r, g) * rho_r(t - g).
struct LrfSpec {
  Matrix beta;      // R x G coefficients
  Matrix rho_init;  // R x G initial values, newest first within each row

  Index factor_count() const { return beta.rows(); }
  Index lag_order() const { return beta.cols(); }
};

/// Companion block: first row beta_r, identity on the sub-diagonal.
Matrix companion_block(const Vector& beta_r);

/// Block-companion dynamical system for the spatio-temporal tensor factor
/// model: state X stacks each factor's lag window (newest first), A advances
/// it, and B maps state to the full innovation vector over (unit,
/// intervention) pairs via the theta/omega loadings.
struct LtiFactorSystem {
  Matrix A;      // RG x RG block-diagonal companion
  Matrix B;      // NI x RG loading, row (n, i) interleaves theta(n, r) * omega(i, r)
  Matrix theta;  // N x R
  Matrix omega;  // I x R
  Vector X;      // current state, length RG
  Vector M;      // cumulative outcomes, length N
  Index N = 0;
  Index I = 0;
  Index R = 0;
  Index G = 0;
  double max_companion_spectral_radius = 0.0;

  bool unstable() const { return max_companion_spectral_radius > 1.05; }
};

LtiFactorSystem build_system(const LrfSpec& spec, const Matrix& theta, const Matrix& omega);

/// One state transition: X <- A X.
void step(LtiFactorSystem& sys);

/// N x NI selection: row n carries a single 1 at column n * I + assignment[n].
Matrix selection_matrix(const std::vector<int>& assignment_row, Index interventions);

struct InterventionSchedule {
  Eigen::MatrixXi assignments;  // T x N, entries in [0, I)
};

struct LtiSimulation {
  std::vector<Matrix> delta;  // one N x T innovation slice per intervention
  Matrix m_path;              // N x T cumulative outcomes
  // rows = units, column t * I + i; exactly one observed cell per (unit, time)
  MaskedMatrix observed{Matrix::Zero(1, 1), BoolMatrix::Constant(1, 1, true)};
};

/// Propagates the system T steps under the schedule, recording the full
/// innovation tensor, cumulative outcomes under the applied interventions,
/// and the induced masked observation matrix with N(0, sigma^2) noise.
LtiSimulation simulate(const LtiFactorSystem& sys, const InterventionSchedule& schedule, Index T,
                       double sigma, Rng& rng);

/// Augmented block update: X' = A X, M' = M + C B A X. Matches simulate's
/// incremental bookkeeping step for step.
std::pair<Vector, Vector> augmented_step(const LtiFactorSystem& sys, const Vector& M,
                                         const Vector& X, const Matrix& C);

}  // namespace snn
