#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "snn/masked_matrix.hpp"
#include "snn/rng.hpp"

namespace snn {

/// Complete bipartite subgraph of an observation mask: every (row, col) pair
/// is observed. Index lists are kept ascending.
struct Biclique {
  std::vector<Index> rows;
  std::vector<Index> cols;
};

/// Raised when a target entry has no fully observed anchor block at all.
class NoBicliqueError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rows a with mask(a, j) true.
std::vector<Index> neighborhood_rows(const BoolMatrix& mask, Index j);
/// Columns b with mask(i, b) true.
std::vector<Index> neighborhood_cols(const BoolMatrix& mask, Index i);

/// Maximal bicliques of a bipartite incidence mask. Exact enumeration when
/// rows + cols <= 40; above that a deterministic greedy multi-start heuristic
/// returns a (deduplicated) candidate set. Every returned biclique is complete
/// and maximal. `limit` caps the list length.
std::vector<Biclique> maximal_bicliques(const BoolMatrix& incidence, std::size_t limit = 64);

/// Anchor rows/columns for target (i, j): the mask is restricted to
/// NR(j)\{i} x NC(i)\{j} and the biclique maximizing min(|rows|, |cols|)
/// is returned (ties: larger area, then lexicographic row set). Index sets
/// refer to the original matrix. nullopt when no biclique exists.
std::optional<Biclique> try_anchor_submatrix(const BoolMatrix& mask, Index i, Index j);

/// As try_anchor_submatrix but throws NoBicliqueError instead of nullopt.
Biclique anchor_submatrix(const BoolMatrix& mask, Index i, Index j);

/// Random partition into k disjoint folds whose sizes differ by at most one;
/// deterministic given the generator state. Folds are sorted ascending.
std::vector<std::vector<Index>> partition_rows(const std::vector<Index>& rows, int k, Rng& rng);

/// Default fold count: floor(min_side / max(2 * rank_estimate, 4)), clamped to [1, 10].
int default_fold_count(Index min_side, Index rank_estimate);

/// Anchor layout for one target entry: shared anchor columns plus K mutually
/// disjoint anchor row folds.
struct AnchorPlan {
  Index row = 0;
  Index col = 0;
  std::vector<Index> anchor_cols;
  std::vector<std::vector<Index>> row_folds;

  Index fold_count() const { return static_cast<Index>(row_folds.size()); }
  Index min_fold_size() const;

  /// Checks every invariant against the mask: target exclusion, full
  /// observation of folds x anchor_cols and of the target's cross cells,
  /// disjointness, non-emptiness. Throws std::invalid_argument on violation.
  void validate(const BoolMatrix& mask) const;

  /// Stable-key-order JSON dump (debugging interface); index lists ascending.
  std::string to_json() const;
};

/// Convenience composition: anchor_submatrix + partition_rows.
AnchorPlan make_anchor_plan(const BoolMatrix& mask, Index i, Index j, int k_folds, Rng& rng);

}  // namespace snn
