#include "snn/lti.hpp"

#include <Eigen/Eigenvalues>
#include <sstream>
#include <stdexcept>

namespace snn {

Matrix companion_block(const Vector& beta_r) {
  const Index G = beta_r.size();
  if (G < 1) throw std::invalid_argument("companion_block: empty coefficient vector");
  Matrix block = Matrix::Zero(G, G);
  block.row(0) = beta_r.transpose();
  for (Index g = 1; g < G; ++g) block(g, g - 1) = 1.0;
  return block;
}

LtiFactorSystem build_system(const LrfSpec& spec, const Matrix& theta, const Matrix& omega) {
  const Index R = spec.factor_count();
  const Index G = spec.lag_order();
  if (R < 1 || G < 1) throw std::invalid_argument("build_system: need R >= 1 and G >= 1");
  if (spec.rho_init.rows() != R || spec.rho_init.cols() != G)
    throw std::invalid_argument("build_system: rho_init shape must match beta");
  if (theta.cols() != R || omega.cols() != R)
    throw std::invalid_argument("build_system: theta and omega must have R columns");
  if (!spec.beta.allFinite())
    throw std::invalid_argument("build_system: beta has non-finite entries");

  LtiFactorSystem sys;
  sys.R = R;
  sys.G = G;
  sys.N = theta.rows();
  sys.I = omega.rows();
  sys.theta = theta;
  sys.omega = omega;
  sys.A = Matrix::Zero(R * G, R * G);
  sys.max_companion_spectral_radius = 0.0;
  for (Index r = 0; r < R; ++r) {
    const Matrix block = companion_block(spec.beta.row(r).transpose());
    sys.A.block(r * G, r * G, G, G) = block;
    const auto eigenvalues = Eigen::EigenSolver<Matrix>(block, false).eigenvalues();
    for (Index e = 0; e < eigenvalues.size(); ++e)
      sys.max_companion_spectral_radius =
          std::max(sys.max_companion_spectral_radius, std::abs(eigenvalues(e)));
  }
  sys.B = Matrix::Zero(sys.N * sys.I, R * G);
  for (Index n = 0; n < sys.N; ++n)
    for (Index i = 0; i < sys.I; ++i)
      for (Index r = 0; r < R; ++r) sys.B(n * sys.I + i, r * G) = theta(n, r) * omega(i, r);
  sys.X.resize(R * G);
  for (Index r = 0; r < R; ++r) sys.X.segment(r * G, G) = spec.rho_init.row(r).transpose();
  sys.M = Vector::Zero(sys.N);
  return sys;
}

void step(LtiFactorSystem& sys) { sys.X = sys.A * sys.X; }

Matrix selection_matrix(const std::vector<int>& assignment_row, Index interventions) {
  const Index N = static_cast<Index>(assignment_row.size());
  Matrix C = Matrix::Zero(N, N * interventions);
  for (Index n = 0; n < N; ++n) {
    const int pick = assignment_row[static_cast<std::size_t>(n)];
    if (pick < 0 || pick >= interventions) {
      std::ostringstream msg;
      msg << "selection_matrix: intervention index " << pick << " out of range for unit " << n;
      throw std::out_of_range(msg.str());
    }
    C(n, n * interventions + pick) = 1.0;
  }
  return C;
}

LtiSimulation simulate(const LtiFactorSystem& sys, const InterventionSchedule& schedule, Index T,
                       double sigma, Rng& rng) {
  if (T < 1) throw std::invalid_argument("simulate: horizon must be >= 1");
  if (schedule.assignments.rows() < T || schedule.assignments.cols() != sys.N)
    throw std::invalid_argument("simulate: schedule must be at least T x N");
  for (Index t = 0; t < T; ++t)
    for (Index n = 0; n < sys.N; ++n) {
      const int pick = schedule.assignments(t, n);
      if (pick < 0 || pick >= sys.I) {
        std::ostringstream msg;
        msg << "simulate: schedule index " << pick << " out of range at (t=" << t << ", n=" << n
            << ")";
        throw std::out_of_range(msg.str());
      }
    }

  LtiSimulation out;
  out.delta.assign(static_cast<std::size_t>(sys.I), Matrix::Zero(sys.N, T));
  out.m_path = Matrix::Zero(sys.N, T);
  Matrix values = Matrix::Zero(sys.N, T * sys.I);
  BoolMatrix mask = BoolMatrix::Constant(sys.N, T * sys.I, false);

  Vector X = sys.X;
  Vector M = sys.M;
  for (Index t = 0; t < T; ++t) {
    X = sys.A * X;
    const Vector innovations = sys.B * X;  // length NI
    for (Index n = 0; n < sys.N; ++n) {
      for (Index i = 0; i < sys.I; ++i)
        out.delta[static_cast<std::size_t>(i)](n, t) = innovations(n * sys.I + i);
      const Index applied = schedule.assignments(t, n);
      M(n) += innovations(n * sys.I + applied);
      out.m_path(n, t) = M(n);
      const Index column = t * sys.I + applied;
      values(n, column) = innovations(n * sys.I + applied) + (sigma > 0.0 ? sigma * rng.normal() : 0.0);
      mask(n, column) = true;
    }
  }
  out.observed = MaskedMatrix(std::move(values), std::move(mask));
  return out;
}

std::pair<Vector, Vector> augmented_step(const LtiFactorSystem& sys, const Vector& M,
                                         const Vector& X, const Matrix& C) {
  if (X.size() != sys.A.cols() || M.size() != C.rows() || C.cols() != sys.B.rows())
    throw std::invalid_argument("augmented_step: shape mismatch");
  const Vector X_next = sys.A * X;
  const Vector M_next = M + C * (sys.B * X_next);
  return {M_next, X_next};
}

}  // namespace snn
