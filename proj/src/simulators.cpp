#include "snn/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace snn {

Matrix gen_core_factors(Index m, Index m_core, int r, Rng& rng) {
  if (m_core < 1 || m_core > m)
    throw std::invalid_argument("gen_core_factors: m_core must be in [1, m]");
  if (r < 1) throw std::invalid_argument("gen_core_factors: r must be >= 1");
  Matrix U(m, r);
  for (Index i = 0; i < m_core; ++i)
    for (Index k = 0; k < r; ++k) U(i, k) = rng.normal();
  for (Index i = m_core; i < m; ++i) {
    const auto weights = rng.dirichlet_uniform(static_cast<std::size_t>(m_core));
    for (Index k = 0; k < r; ++k) {
      double value = 0.0;
      for (Index c = 0; c < m_core; ++c) value += weights[static_cast<std::size_t>(c)] * U(c, k);
      U(i, k) = value;
    }
  }
  return U;
}

Matrix scale_to_range(const Matrix& A, double lo, double hi) {
  if (!(hi > lo)) throw std::invalid_argument("scale_to_range: hi must exceed lo");
  const double lowest = A.minCoeff();
  const double highest = A.maxCoeff();
  if (highest == lowest) return Matrix::Constant(A.rows(), A.cols(), 0.5 * (lo + hi));
  const double slope = (hi - lo) / (highest - lowest);
  return ((A.array() - lowest) * slope + lo).matrix();
}

BoolMatrix mcar_mask(Index m, Index n, double p_observe, Rng& rng) {
  if (!(p_observe > 0.0 && p_observe <= 1.0))
    throw std::invalid_argument("mcar_mask: observation probability must be in (0, 1]");
  BoolMatrix mask(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) mask(i, j) = rng.bernoulli(p_observe);
  return mask;
}

namespace {

struct Cohort {
  const char* name;
  double alpha;
  double target;
  std::vector<std::pair<Index, Index>> cells;
};

double propensity_base(double rating, double threshold, double alpha) {
  return rating <= threshold ? std::pow(alpha, rating - 1.0) : std::pow(alpha, 5.0 - rating);
}

}  // namespace

Matrix limited_mnar_propensity(const Matrix& A, const CohortPropensitySpec& spec) {
  if (A.minCoeff() < 1.0 - 1e-9 || A.maxCoeff() > 5.0 + 1e-9)
    throw std::invalid_argument("limited_mnar_propensity: ratings must lie in [1, 5]");
  if (!(spec.threshold > 1.0 && spec.threshold < 5.0))
    throw std::invalid_argument("limited_mnar_propensity: threshold must lie strictly inside (1, 5)");
  for (double alpha : {spec.alpha_core, spec.alpha_user, spec.alpha_item, spec.alpha_standard})
    if (!(alpha > 0.0 && alpha <= 1.0))
      throw std::invalid_argument("limited_mnar_propensity: alphas must be in (0, 1]");
  for (double frac : {spec.frac_core, spec.frac_user, spec.frac_item, spec.frac_standard})
    if (!(frac > 0.0 && frac <= 1.0))
      throw std::invalid_argument("limited_mnar_propensity: target fractions must be in (0, 1]");
  if (spec.m_core < 0 || spec.m_core > A.rows() || spec.n_core < 0 || spec.n_core > A.cols())
    throw std::invalid_argument("limited_mnar_propensity: core counts out of range");

  Cohort cohorts[4] = {
      {"core", spec.alpha_core, spec.frac_core, {}},
      {"user", spec.alpha_user, spec.frac_user, {}},
      {"item", spec.alpha_item, spec.frac_item, {}},
      {"standard", spec.alpha_standard, spec.frac_standard, {}},
  };
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j) {
      const bool core_row = i < spec.m_core;
      const bool core_col = j < spec.n_core;
      const int which = core_row ? (core_col ? 0 : 1) : (core_col ? 2 : 3);
      cohorts[which].cells.emplace_back(i, j);
    }

  Matrix P(A.rows(), A.cols());
  for (const Cohort& cohort : cohorts) {
    if (cohort.cells.empty()) continue;
    std::vector<double> base(cohort.cells.size());
    for (std::size_t c = 0; c < cohort.cells.size(); ++c)
      base[c] = propensity_base(A(cohort.cells[c].first, cohort.cells[c].second), spec.threshold,
                                cohort.alpha);
    const auto mean_propensity = [&](double kappa) {
      double total = 0.0;
      for (double b : base) total += std::min(kappa * b, 1.0);
      return total / static_cast<double>(base.size());
    };
    double hi = 1.0;
    while (mean_propensity(hi) < cohort.target && hi < 1e12) hi *= 2.0;
    double lo = 0.0;
    for (int iter = 0; iter < 60; ++iter) {
      const double mid = 0.5 * (lo + hi);
      if (mean_propensity(mid) < cohort.target)
        lo = mid;
      else
        hi = mid;
    }
    const double kappa = hi;
    std::size_t clipped = 0;
    for (std::size_t c = 0; c < cohort.cells.size(); ++c) {
      const double p = std::min(kappa * base[c], 1.0);
      if (kappa * base[c] >= 1.0) ++clipped;
      P(cohort.cells[c].first, cohort.cells[c].second) = p;
    }
    // A degenerate cohort (nearly every propensity clipped at 1) means the
    // rating-dependent effect has been calibrated away entirely.
    if (20 * clipped > 19 * cohort.cells.size()) {
      std::ostringstream msg;
      msg << "limited_mnar_propensity: target fraction " << cohort.target << " for cohort "
          << cohort.name << " is infeasible (" << clipped << "/" << cohort.cells.size()
          << " cells clipped at 1)";
      throw std::invalid_argument(msg.str());
    }
  }
  return P;
}

BoolMatrix sample_mask(const Matrix& P, Rng& rng) {
  if (P.minCoeff() < 0.0 || P.maxCoeff() > 1.0)
    throw std::invalid_argument("sample_mask: propensities must lie in [0, 1]");
  BoolMatrix mask(P.rows(), P.cols());
  for (Index i = 0; i < P.rows(); ++i)
    for (Index j = 0; j < P.cols(); ++j) mask(i, j) = rng.bernoulli(P(i, j));
  return mask;
}

namespace {

Index argmax_row(const Matrix& M, Index row) {
  Index best = 0;
  for (Index k = 1; k < M.cols(); ++k)
    if (M(row, k) > M(row, best)) best = k;
  return best;
}

}  // namespace

BoolMatrix general_mnar_mask(const Matrix& U, const Matrix& V, Index n_core) {
  if (U.cols() != V.cols()) throw std::invalid_argument("general_mnar_mask: factor ranks differ");
  if (U.cols() < 1) throw std::invalid_argument("general_mnar_mask: rank must be >= 1");
  if (n_core < 0 || n_core > V.rows())
    throw std::invalid_argument("general_mnar_mask: n_core out of range");
  const Index m = U.rows();
  const Index n = V.rows();
  std::vector<Index> favorite(static_cast<std::size_t>(m));
  std::vector<Index> genre(static_cast<std::size_t>(n));
  for (Index i = 0; i < m; ++i) favorite[static_cast<std::size_t>(i)] = argmax_row(U, i);
  for (Index j = 0; j < n; ++j) genre[static_cast<std::size_t>(j)] = argmax_row(V, j);
  BoolMatrix mask(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j)
      mask(i, j) =
          j < n_core || favorite[static_cast<std::size_t>(i)] == genre[static_cast<std::size_t>(j)];
  return mask;
}

std::vector<int> panel_severity_classes(const Matrix& Y, Index pre_periods) {
  const Index T = Y.cols();
  if (pre_periods < 1 || pre_periods >= T)
    throw std::invalid_argument("panel: pre_periods must be in [1, T)");
  const Index m = Y.rows();
  Vector change(m);
  for (Index i = 0; i < m; ++i) {
    const double pre = Y.row(i).head(pre_periods).mean();
    const double post = Y.row(i).tail(T - pre_periods).mean();
    change(i) = post - pre;
  }
  const double mean = change.mean();
  double var = 0.0;
  for (Index i = 0; i < m; ++i) var += (change(i) - mean) * (change(i) - mean);
  const double stddev = m > 1 ? std::sqrt(var / static_cast<double>(m - 1)) : 0.0;
  std::vector<int> classes(static_cast<std::size_t>(m), 1);
  for (Index i = 0; i < m; ++i) {
    if (change(i) >= mean + stddev)
      classes[static_cast<std::size_t>(i)] = 0;  // mild
    else if (change(i) <= mean - stddev)
      classes[static_cast<std::size_t>(i)] = 2;  // severe
  }
  return classes;
}

BoolMatrix panel_adoption_mask(const Matrix& Y, const PanelAdoptionSpec& spec, Rng& rng) {
  for (double p : {spec.p_mild, spec.p_moderate, spec.p_severe})
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("panel_adoption_mask: probabilities must be in [0, 1]");
  const auto classes = panel_severity_classes(Y, spec.pre_periods);
  const double probs[3] = {spec.p_mild, spec.p_moderate, spec.p_severe};
  BoolMatrix mask = BoolMatrix::Constant(Y.rows(), Y.cols(), true);
  for (Index i = 0; i < Y.rows(); ++i) {
    const bool adopts = rng.bernoulli(probs[classes[static_cast<std::size_t>(i)]]);
    if (adopts)
      for (Index j = spec.pre_periods; j < Y.cols(); ++j) mask(i, j) = false;
  }
  return mask;
}

Matrix add_noise(const Matrix& A, double sigma, Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("add_noise: sigma must be nonnegative");
  Matrix out = A;
  if (sigma == 0.0) return out;
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j) out(i, j) += sigma * rng.normal();
  return out;
}

}  // namespace snn
