#include "snn/estimator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace snn {

void SnnConfig::validate() const {
  if (!(ci_level > 0.0 && ci_level < 1.0))
    throw std::invalid_argument("SnnConfig: ci_level must be in (0, 1)");
  if (k_folds < 0) throw std::invalid_argument("SnnConfig: k_folds must be >= 0");
  if (min_anchor_rows < 0) throw std::invalid_argument("SnnConfig: min_anchor_rows must be >= 0");
}

namespace {

struct FoldData {
  Matrix S;  // |fold| x |AC|
  Vector q;  // target row over anchor columns
  Vector x;  // target column over fold rows
};

FoldData extract_fold(const MaskedMatrix& data, const AnchorPlan& plan, std::size_t fold_index) {
  const auto& fold = plan.row_folds[fold_index];
  FoldData out;
  out.S.resize(static_cast<Index>(fold.size()), static_cast<Index>(plan.anchor_cols.size()));
  out.q.resize(static_cast<Index>(plan.anchor_cols.size()));
  out.x.resize(static_cast<Index>(fold.size()));
  for (std::size_t b = 0; b < plan.anchor_cols.size(); ++b)
    out.q(static_cast<Index>(b)) = data.values()(plan.row, plan.anchor_cols[b]);
  for (std::size_t a = 0; a < fold.size(); ++a) {
    out.x(static_cast<Index>(a)) = data.values()(fold[a], plan.col);
    for (std::size_t b = 0; b < plan.anchor_cols.size(); ++b)
      out.S(static_cast<Index>(a), static_cast<Index>(b)) =
          data.values()(fold[a], plan.anchor_cols[b]);
  }
  return out;
}

void check_entry_preconditions(const MaskedMatrix& data, Index i, Index j, const AnchorPlan& plan,
                               const SnnConfig& cfg) {
  cfg.validate();
  if (plan.row != i || plan.col != j)
    throw std::invalid_argument("snn_entry: plan targets a different cell");
  plan.validate(data.mask());
  if (cfg.min_anchor_rows > 0 && plan.min_fold_size() < cfg.min_anchor_rows)
    throw std::invalid_argument("snn_entry: a fold is smaller than min_anchor_rows");
}

}  // namespace

SnnEstimate snn_entry(const MaskedMatrix& data, Index i, Index j, const AnchorPlan& plan,
                      const SnnConfig& cfg) {
  check_entry_preconditions(data, i, j, plan, cfg);
  SnnEstimate est;
  est.plan = plan;
  const std::size_t folds = plan.row_folds.size();
  est.fold_values.reserve(folds);
  est.fold_betas.reserve(folds);
  est.fold_ranks.reserve(folds);
  double sum = 0.0;
  for (std::size_t k = 0; k < folds; ++k) {
    const FoldData fold = extract_fold(data, plan, k);
    const SvdFactorization fact = svd(fold.S);
    const Index rank = select_rank(fact, cfg.rank_policy, fold.S.rows(), fold.S.cols());
    Vector beta = pcr(fact, fold.q, rank);
    const double value = fold.x.dot(beta);
    est.fold_values.push_back(value);
    est.fold_betas.push_back(std::move(beta));
    est.fold_ranks.push_back(rank);
    sum += value;
  }
  est.value = sum / static_cast<double>(folds);
  const ConfidenceInterval ci = confidence_interval(est, data, cfg);
  est.variance = ci.variance;
  est.ci_lo = ci.lo;
  est.ci_hi = ci.hi;
  est.variance_degenerate = ci.degenerate;
  return est;
}

SnnEstimate snn_entry_transposed(const MaskedMatrix& data, Index i, Index j,
                                 const AnchorPlan& plan, const SnnConfig& cfg) {
  check_entry_preconditions(data, i, j, plan, cfg);
  SnnEstimate est;
  est.plan = plan;
  est.transposed = true;
  const std::size_t folds = plan.row_folds.size();
  double sum = 0.0;
  for (std::size_t k = 0; k < folds; ++k) {
    const FoldData fold = extract_fold(data, plan, k);
    const SvdFactorization fact = svd(Matrix(fold.S.transpose()));
    const Index rank = select_rank(fact, cfg.rank_policy, fold.S.cols(), fold.S.rows());
    Vector alpha = pcr(fact, fold.x, rank);
    const double value = fold.q.dot(alpha);
    est.fold_values.push_back(value);
    est.fold_betas.push_back(std::move(alpha));
    est.fold_ranks.push_back(rank);
    sum += value;
  }
  est.value = sum / static_cast<double>(folds);
  const ConfidenceInterval ci = confidence_interval(est, data, cfg);
  est.variance = ci.variance;
  est.ci_lo = ci.lo;
  est.ci_hi = ci.hi;
  est.variance_degenerate = ci.degenerate;
  return est;
}

ConfidenceInterval confidence_interval(const SnnEstimate& est, const MaskedMatrix& data,
                                       const SnnConfig& cfg) {
  cfg.validate();
  if (cfg.noise_model == NoiseModel::PerRowPlugin)
    throw std::logic_error("confidence_interval: PerRowPlugin noise model is unimplemented");
  const std::size_t folds = est.fold_values.size();
  if (folds == 0 || est.fold_betas.size() != folds || est.fold_ranks.size() != folds)
    throw std::invalid_argument("confidence_interval: estimate carries no fold data");

  // Homoskedastic plug-in: pooled residual mean square from the fold
  // regressions, using only folds with positive residual degrees of freedom.
  // The estimate is x^T (U Sigma^-1 V^T) q per fold; its delta-method
  // variance carries one term per noise source. Each fold's target-column
  // slice x^(k) is fresh, so those terms average as 1/K^2 * sum ||beta||^2.
  // The target row q is read once and shared by every fold, so its noise
  // enters through the fold-averaged dual weights alpha instead of
  // averaging out.
  double residual_ss = 0.0;
  Index residual_dof = 0;
  double x_weight_sq_sum = 0.0;  // sum_k ||weights on x^(k)||^2
  Vector q_weight_mean;          // mean_k (weights on q)
  for (std::size_t k = 0; k < folds; ++k) {
    const FoldData fold = extract_fold(data, est.plan, k);
    const Index dof = est.transposed
                          ? static_cast<Index>(fold.x.size()) - est.fold_ranks[k]
                          : static_cast<Index>(fold.q.size()) - est.fold_ranks[k];
    const SvdFactorization fact =
        est.transposed ? svd(Matrix(fold.S.transpose())) : svd(fold.S);
    Vector dual = Vector::Zero(est.transposed ? fold.x.size() : fold.q.size());
    const Index rank = std::min(est.fold_ranks[k], fact.positive_count());
    const Vector& held = est.transposed ? fold.q : fold.x;
    for (Index l = 0; l < rank; ++l)
      dual += (fact.left_vectors.col(l).dot(held) / fact.singular_values(l)) *
              fact.right_vectors.col(l);
    const Vector& x_weights = est.transposed ? dual : est.fold_betas[k];
    const Vector& q_weights = est.transposed ? est.fold_betas[k] : dual;
    x_weight_sq_sum += x_weights.squaredNorm();
    if (q_weight_mean.size() == 0) q_weight_mean = Vector::Zero(q_weights.size());
    q_weight_mean += q_weights / static_cast<double>(folds);
    if (dof < 1) continue;
    const Vector residual = est.transposed ? Vector(fold.x - fold.S * est.fold_betas[k])
                                           : Vector(fold.q - fold.S.transpose() * est.fold_betas[k]);
    residual_ss += residual.squaredNorm();
    residual_dof += dof;
  }
  ConfidenceInterval ci;
  ci.degenerate = (residual_dof == 0);
  const double sigma2 = ci.degenerate ? 0.0 : residual_ss / static_cast<double>(residual_dof);
  const double k_count = static_cast<double>(folds);
  ci.variance =
      sigma2 * (x_weight_sq_sum / (k_count * k_count) + q_weight_mean.squaredNorm());

  const double z = normal_quantile(0.5 * (1.0 + cfg.ci_level));
  const double half_width = z * std::sqrt(ci.variance);
  ci.lo = est.value - half_width;
  ci.hi = est.value + half_width;
  return ci;
}

const char* to_string(CellStatus status) {
  switch (status) {
    case CellStatus::Imputed: return "ok";
    case CellStatus::NoAnchor: return "no_anchor";
    case CellStatus::InsufficientAnchors: return "insufficient_anchors";
    case CellStatus::Degenerate: return "degenerate";
  }
  return "unknown";
}

namespace {

CellResult complete_one_cell(const MaskedMatrix& data, Index i, Index j, const SnnConfig& cfg,
                             std::uint64_t seed) {
  CellResult result;
  result.i = i;
  result.j = j;
  const auto anchors = try_anchor_submatrix(data.mask(), i, j);
  if (!anchors) {
    result.status = CellStatus::NoAnchor;
    return result;
  }
  // Rank estimate on the whole anchor block drives the fold-count and
  // minimum-anchor defaults.
  Matrix block(static_cast<Index>(anchors->rows.size()), static_cast<Index>(anchors->cols.size()));
  for (std::size_t a = 0; a < anchors->rows.size(); ++a)
    for (std::size_t b = 0; b < anchors->cols.size(); ++b)
      block(static_cast<Index>(a), static_cast<Index>(b)) =
          data.values()(anchors->rows[a], anchors->cols[b]);
  Index rank_estimate = 0;
  try {
    rank_estimate = select_rank(svd(block), cfg.rank_policy, block.rows(), block.cols());
  } catch (const std::invalid_argument&) {
    result.status = CellStatus::Degenerate;
    return result;
  }

  const Index n_rows = static_cast<Index>(anchors->rows.size());
  const Index min_side = std::min(n_rows, static_cast<Index>(anchors->cols.size()));
  const Index min_rows =
      cfg.min_anchor_rows > 0 ? cfg.min_anchor_rows : std::max<Index>(2 * rank_estimate, 1);
  if (n_rows < min_rows) {
    result.status = CellStatus::InsufficientAnchors;
    return result;
  }
  int k = cfg.k_folds > 0 ? cfg.k_folds : default_fold_count(min_side, rank_estimate);
  k = static_cast<int>(std::clamp<Index>(k, 1, n_rows / min_rows));

  Rng rng(seed);
  AnchorPlan plan;
  plan.row = i;
  plan.col = j;
  plan.anchor_cols = anchors->cols;
  plan.row_folds = partition_rows(anchors->rows, k, rng);
  try {
    result.estimate = snn_entry(data, i, j, plan, cfg);
    result.status = CellStatus::Imputed;
  } catch (const std::invalid_argument&) {
    result.status = CellStatus::Degenerate;
  }
  return result;
}

}  // namespace

CompletionResult snn_complete(const MaskedMatrix& data,
                              const std::vector<std::pair<Index, Index>>& targets,
                              const SnnConfig& cfg, std::uint64_t seed, int jobs) {
  cfg.validate();
  const Index n = data.cols();
  CompletionResult result;
  result.completed = data.values();
  for (Index jj = 0; jj < n; ++jj)
    for (Index ii = 0; ii < data.rows(); ++ii)
      if (!data.mask()(ii, jj))
        result.completed(ii, jj) = std::numeric_limits<double>::quiet_NaN();

  result.cells.resize(targets.size());
  auto run_cell = [&](std::size_t t) {
    const auto [i, j] = targets[t];
    const std::uint64_t cell_seed = derive_seed(seed, static_cast<std::uint64_t>(i * n + j));
    result.cells[t] = complete_one_cell(data, i, j, cfg, cell_seed);
  };

  if (jobs <= 1 || targets.size() < 2) {
    for (std::size_t t = 0; t < targets.size(); ++t) run_cell(t);
  } else {
    std::atomic<std::size_t> next{0};
    const int workers = std::min<int>(jobs, static_cast<int>(targets.size()));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t t = next.fetch_add(1); t < targets.size(); t = next.fetch_add(1))
          run_cell(t);
      });
    for (auto& worker : pool) worker.join();
  }

  for (const auto& cell : result.cells)
    if (cell.estimate) result.completed(cell.i, cell.j) = cell.estimate->value;
  return result;
}

CompletionResult snn_complete(const MaskedMatrix& data, AllMissingTag, const SnnConfig& cfg,
                              std::uint64_t seed, int jobs) {
  std::vector<std::pair<Index, Index>> targets;
  for (Index i = 0; i < data.rows(); ++i)
    for (Index j = 0; j < data.cols(); ++j)
      if (!data.mask()(i, j)) targets.emplace_back(i, j);
  return snn_complete(data, targets, cfg, seed, jobs);
}

// Wichura's algorithm AS241 (PPND16).
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must be in (0, 1)");
  const double q = p - 0.5;
  double r;
  if (std::abs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
              4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
              2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
              5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -value : value;
}

}  // namespace snn
