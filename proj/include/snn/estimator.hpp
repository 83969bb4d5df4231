#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "snn/anchors.hpp"
#include "snn/masked_matrix.hpp"
#include "snn/spectral.hpp"

namespace snn {

enum class NoiseModel { Homoskedastic, PerRowPlugin };

struct SnnConfig {
  RankPolicy rank_policy = RankPolicy::energy(0.999);
  int k_folds = 0;          // 0: floor(min_side / max(2*rank_estimate, 4)) clamped to [1, 10]
  int min_anchor_rows = 0;  // 0: 2 * rank estimate
  double ci_level = 0.95;
  NoiseModel noise_model = NoiseModel::Homoskedastic;

  void validate() const;
};

struct SnnEstimate {
  double value = 0.0;
  std::vector<double> fold_values;
  std::vector<Vector> fold_betas;   // per fold: weights over that fold's anchor rows
  std::vector<Index> fold_ranks;    // lambda^(k) actually used
  double variance = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool variance_degenerate = false;  // no fold had residual degrees of freedom
  bool transposed = false;           // fold_betas weight anchor columns instead
  AnchorPlan plan;
};

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  double variance = 0.0;
  bool degenerate = false;
};

/// Per-entry estimate: one principal-component regression per anchor-row fold
/// against the shared anchor columns, averaged across folds. Deterministic.
SnnEstimate snn_entry(const MaskedMatrix& data, Index i, Index j, const AnchorPlan& plan,
                      const SnnConfig& cfg);

/// Same estimate through the transposed route (synthetic neighbor columns):
/// per-fold values agree with snn_entry to numerical precision.
SnnEstimate snn_entry_transposed(const MaskedMatrix& data, Index i, Index j,
                                 const AnchorPlan& plan, const SnnConfig& cfg);

/// Plug-in variance and symmetric interval for an estimate, using the
/// homoskedastic residual noise estimate (PerRowPlugin is unimplemented).
ConfidenceInterval confidence_interval(const SnnEstimate& est, const MaskedMatrix& data,
                                       const SnnConfig& cfg);

enum class CellStatus {
  Imputed,
  NoAnchor,
  InsufficientAnchors,
  Degenerate,
};
const char* to_string(CellStatus status);

struct CellResult {
  Index i = 0;
  Index j = 0;
  CellStatus status = CellStatus::Imputed;
  std::optional<SnnEstimate> estimate;
};

struct CompletionResult {
  Matrix completed;               // unestimable target cells hold NaN
  std::vector<CellResult> cells;  // one entry per target cell, row-major order
};

struct AllMissingTag {};
inline constexpr AllMissingTag kAllMissing{};

/// Completes the requested target cells (anchor search + fold partition +
/// per-entry estimate); observed non-target cells are copied through. Each
/// cell draws its fold partition from seed xor cell-index, so results are
/// independent of evaluation order. jobs > 1 evaluates cells in parallel.
CompletionResult snn_complete(const MaskedMatrix& data,
                              const std::vector<std::pair<Index, Index>>& targets,
                              const SnnConfig& cfg, std::uint64_t seed, int jobs = 1);
CompletionResult snn_complete(const MaskedMatrix& data, AllMissingTag, const SnnConfig& cfg,
                              std::uint64_t seed, int jobs = 1);

/// Standard normal quantile (Wichura's AS241; |error| < 1e-13).
double normal_quantile(double p);

}  // namespace snn
