#include "snn/anchors.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <sstream>

namespace snn {

namespace {

// Row-major bitset view of a bool matrix; cols packed into 64-bit words.
struct BitRows {
  Index rows = 0;
  Index cols = 0;
  Index words = 0;
  std::vector<std::uint64_t> data;

  explicit BitRows(const BoolMatrix& mask)
      : rows(mask.rows()), cols(mask.cols()), words((mask.cols() + 63) / 64),
        data(static_cast<std::size_t>(rows * words), 0) {
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j)
        if (mask(i, j)) word(i, j / 64) |= (1ULL << (j % 64));
  }

  std::uint64_t& word(Index i, Index w) { return data[static_cast<std::size_t>(i * words + w)]; }
  std::uint64_t word(Index i, Index w) const {
    return data[static_cast<std::size_t>(i * words + w)];
  }
  bool test(Index i, Index j) const { return (word(i, j / 64) >> (j % 64)) & 1ULL; }
};

struct Candidate {
  std::vector<Index> rows;
  std::vector<Index> cols;

  Index min_side() const { return std::min<Index>(rows.size(), cols.size()); }
  Index area() const { return static_cast<Index>(rows.size() * cols.size()); }
};

// min side, then area, then lexicographically smaller row set.
bool better(const Candidate& a, const Candidate& b) {
  if (a.min_side() != b.min_side()) return a.min_side() > b.min_side();
  if (a.area() != b.area()) return a.area() > b.area();
  return a.rows < b.rows;
}

std::vector<Index> bits_to_indices(std::uint64_t bits) {
  std::vector<Index> out;
  while (bits) {
    out.push_back(static_cast<Index>(std::countr_zero(bits)));
    bits &= bits - 1;
  }
  return out;
}

// Exact enumeration via row-subset closures; valid when the row side has at
// most 20 vertices and the column side fits one word.
template <typename Emit>
void enumerate_exact(const std::vector<std::uint64_t>& row_masks, Index n_cols, Emit emit) {
  const Index n_rows = static_cast<Index>(row_masks.size());
  const std::uint64_t full = (n_rows == 64) ? ~0ULL : ((1ULL << n_rows) - 1);
  for (std::uint64_t subset = 1; subset <= full; ++subset) {
    std::uint64_t col_mask = ~0ULL >> (64 - n_cols);
    std::uint64_t s = subset;
    while (s) {
      col_mask &= row_masks[static_cast<std::size_t>(std::countr_zero(s))];
      if (col_mask == 0) break;
      s &= s - 1;
    }
    if (col_mask == 0) continue;
    std::uint64_t closure = 0;
    for (Index r = 0; r < n_rows; ++r)
      if ((row_masks[static_cast<std::size_t>(r)] & col_mask) == col_mask)
        closure |= (1ULL << r);
    if (closure == subset) emit(subset, col_mask);
  }
}

std::vector<std::uint64_t> pack_rows_single_word(const BoolMatrix& mask, bool transpose) {
  const Index r = transpose ? mask.cols() : mask.rows();
  const Index c = transpose ? mask.rows() : mask.cols();
  std::vector<std::uint64_t> rows(static_cast<std::size_t>(r), 0);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j)
      if (transpose ? mask(j, i) : mask(i, j)) rows[static_cast<std::size_t>(i)] |= (1ULL << j);
  return rows;
}

// Greedy: seed a column, take its neighborhood as the row set, then drop the
// worst vertex from the currently larger side until the block is complete,
// and finally extend back to maximality. Missing-cell counts are maintained
// incrementally so one start costs O(rows * cols).
std::optional<Candidate> greedy_biclique_from_seed(const BitRows& bits, Index seed_col) {
  std::vector<bool> in_row(static_cast<std::size_t>(bits.rows), false);
  std::vector<bool> in_col(static_cast<std::size_t>(bits.cols), true);
  Index n_rows = 0;
  for (Index r = 0; r < bits.rows; ++r)
    if (bits.test(r, seed_col)) {
      in_row[static_cast<std::size_t>(r)] = true;
      ++n_rows;
    }
  if (n_rows == 0) return std::nullopt;
  Index n_cols = bits.cols;

  std::vector<Index> row_miss(static_cast<std::size_t>(bits.rows), 0);
  std::vector<Index> col_miss(static_cast<std::size_t>(bits.cols), 0);
  std::int64_t total_missing = 0;
  for (Index r = 0; r < bits.rows; ++r) {
    if (!in_row[static_cast<std::size_t>(r)]) continue;
    for (Index c = 0; c < bits.cols; ++c) {
      if (bits.test(r, c)) continue;
      ++row_miss[static_cast<std::size_t>(r)];
      ++col_miss[static_cast<std::size_t>(c)];
      ++total_missing;
    }
  }

  auto drop_col = [&](Index c) {
    in_col[static_cast<std::size_t>(c)] = false;
    --n_cols;
    total_missing -= col_miss[static_cast<std::size_t>(c)];
    for (Index r = 0; r < bits.rows; ++r)
      if (in_row[static_cast<std::size_t>(r)] && !bits.test(r, c))
        --row_miss[static_cast<std::size_t>(r)];
  };
  auto drop_row = [&](Index r) {
    in_row[static_cast<std::size_t>(r)] = false;
    --n_rows;
    total_missing -= row_miss[static_cast<std::size_t>(r)];
    for (Index c = 0; c < bits.cols; ++c)
      if (in_col[static_cast<std::size_t>(c)] && !bits.test(r, c))
        --col_miss[static_cast<std::size_t>(c)];
  };

  while (total_missing > 0) {
    Index worst_col = -1, worst_col_missing = 0;
    for (Index c = 0; c < bits.cols; ++c) {
      if (!in_col[static_cast<std::size_t>(c)] || c == seed_col) continue;
      if (col_miss[static_cast<std::size_t>(c)] >= worst_col_missing &&
          col_miss[static_cast<std::size_t>(c)] > 0) {
        worst_col_missing = col_miss[static_cast<std::size_t>(c)];
        worst_col = c;
      }
    }
    Index worst_row = -1, worst_row_missing = 0;
    for (Index r = 0; r < bits.rows; ++r) {
      if (!in_row[static_cast<std::size_t>(r)]) continue;
      if (row_miss[static_cast<std::size_t>(r)] >= worst_row_missing &&
          row_miss[static_cast<std::size_t>(r)] > 0) {
        worst_row_missing = row_miss[static_cast<std::size_t>(r)];
        worst_row = r;
      }
    }
    // Prune from the currently larger side so min(|rows|, |cols|) survives;
    // on ties drop the dirtier vertex.
    bool drop_col_now;
    if (worst_col < 0)
      drop_col_now = false;
    else if (worst_row < 0)
      drop_col_now = true;
    else if (n_cols != n_rows)
      drop_col_now = n_cols > n_rows;
    else
      drop_col_now = worst_col_missing >= worst_row_missing;
    if (drop_col_now)
      drop_col(worst_col);
    else
      drop_row(worst_row);
    if (n_rows == 0 || n_cols == 0) return std::nullopt;
  }

  // Extend to maximality.
  auto row_fits = [&](Index r) {
    for (Index c = 0; c < bits.cols; ++c)
      if (in_col[static_cast<std::size_t>(c)] && !bits.test(r, c)) return false;
    return true;
  };
  auto col_fits = [&](Index c) {
    for (Index r = 0; r < bits.rows; ++r)
      if (in_row[static_cast<std::size_t>(r)] && !bits.test(r, c)) return false;
    return true;
  };
  bool grew = true;
  while (grew) {
    grew = false;
    for (Index r = 0; r < bits.rows; ++r) {
      if (in_row[static_cast<std::size_t>(r)] || !row_fits(r)) continue;
      in_row[static_cast<std::size_t>(r)] = true;
      ++n_rows;
      grew = true;
    }
    for (Index c = 0; c < bits.cols; ++c) {
      if (in_col[static_cast<std::size_t>(c)] || !col_fits(c)) continue;
      in_col[static_cast<std::size_t>(c)] = true;
      ++n_cols;
      grew = true;
    }
  }

  Candidate cand;
  for (Index r = 0; r < bits.rows; ++r)
    if (in_row[static_cast<std::size_t>(r)]) cand.rows.push_back(r);
  for (Index c = 0; c < bits.cols; ++c)
    if (in_col[static_cast<std::size_t>(c)]) cand.cols.push_back(c);
  if (cand.rows.empty() || cand.cols.empty()) return std::nullopt;
  return cand;
}

constexpr int kHeuristicStarts = 16;
constexpr Index kExactVertexLimit = 40;

std::vector<Candidate> heuristic_candidates(const BoolMatrix& incidence) {
  const BitRows bits(incidence);
  std::vector<std::pair<Index, Index>> degree_order;  // (-degree, col)
  for (Index c = 0; c < bits.cols; ++c) {
    Index deg = 0;
    for (Index r = 0; r < bits.rows; ++r)
      if (bits.test(r, c)) ++deg;
    if (deg > 0) degree_order.emplace_back(-deg, c);
  }
  std::sort(degree_order.begin(), degree_order.end());
  std::vector<Candidate> found;
  const int starts = std::min<int>(kHeuristicStarts, static_cast<int>(degree_order.size()));
  for (int s = 0; s < starts; ++s) {
    auto cand = greedy_biclique_from_seed(bits, degree_order[static_cast<std::size_t>(s)].second);
    if (!cand) continue;
    bool duplicate = false;
    for (const auto& existing : found)
      if (existing.rows == cand->rows && existing.cols == cand->cols) duplicate = true;
    if (!duplicate) found.push_back(std::move(*cand));
  }
  return found;
}

std::vector<Candidate> exact_candidates(const BoolMatrix& incidence, std::size_t cap) {
  const bool transpose = incidence.rows() > incidence.cols();
  const auto row_masks = pack_rows_single_word(incidence, transpose);
  const Index n_cols = transpose ? incidence.rows() : incidence.cols();
  std::vector<Candidate> out;
  enumerate_exact(row_masks, n_cols, [&](std::uint64_t row_bits, std::uint64_t col_bits) {
    if (out.size() >= cap) return;
    Candidate cand;
    cand.rows = bits_to_indices(transpose ? col_bits : row_bits);
    cand.cols = bits_to_indices(transpose ? row_bits : col_bits);
    out.push_back(std::move(cand));
  });
  return out;
}

std::optional<Candidate> best_biclique(const BoolMatrix& incidence) {
  std::optional<Candidate> best;
  auto consider = [&](Candidate cand) {
    if (!best || better(cand, *best)) best = std::move(cand);
  };
  if (incidence.rows() + incidence.cols() <= kExactVertexLimit) {
    const bool transpose = incidence.rows() > incidence.cols();
    const auto row_masks = pack_rows_single_word(incidence, transpose);
    const Index n_cols = transpose ? incidence.rows() : incidence.cols();
    enumerate_exact(row_masks, n_cols, [&](std::uint64_t row_bits, std::uint64_t col_bits) {
      Candidate cand;
      cand.rows = bits_to_indices(transpose ? col_bits : row_bits);
      cand.cols = bits_to_indices(transpose ? row_bits : col_bits);
      consider(std::move(cand));
    });
  } else {
    for (auto& cand : heuristic_candidates(incidence)) consider(std::move(cand));
  }
  return best;
}

}  // namespace

std::vector<Index> neighborhood_rows(const BoolMatrix& mask, Index j) {
  if (j < 0 || j >= mask.cols()) throw std::out_of_range("neighborhood_rows: column out of range");
  std::vector<Index> rows;
  for (Index a = 0; a < mask.rows(); ++a)
    if (mask(a, j)) rows.push_back(a);
  return rows;
}

std::vector<Index> neighborhood_cols(const BoolMatrix& mask, Index i) {
  if (i < 0 || i >= mask.rows()) throw std::out_of_range("neighborhood_cols: row out of range");
  std::vector<Index> cols;
  for (Index b = 0; b < mask.cols(); ++b)
    if (mask(i, b)) cols.push_back(b);
  return cols;
}

std::vector<Biclique> maximal_bicliques(const BoolMatrix& incidence, std::size_t limit) {
  if (incidence.rows() < 1 || incidence.cols() < 1)
    throw std::invalid_argument("maximal_bicliques: empty incidence matrix");
  std::vector<Candidate> candidates;
  if (incidence.rows() + incidence.cols() <= kExactVertexLimit)
    candidates = exact_candidates(incidence, limit);
  else
    candidates = heuristic_candidates(incidence);
  std::vector<Biclique> out;
  for (auto& cand : candidates) {
    if (out.size() >= limit) break;
    out.push_back(Biclique{std::move(cand.rows), std::move(cand.cols)});
  }
  return out;
}

std::optional<Biclique> try_anchor_submatrix(const BoolMatrix& mask, Index i, Index j) {
  if (i < 0 || i >= mask.rows() || j < 0 || j >= mask.cols())
    throw std::out_of_range("anchor_submatrix: target out of range");
  std::vector<Index> candidate_rows;
  for (Index a : neighborhood_rows(mask, j))
    if (a != i) candidate_rows.push_back(a);
  std::vector<Index> candidate_cols;
  for (Index b : neighborhood_cols(mask, i))
    if (b != j) candidate_cols.push_back(b);
  if (candidate_rows.empty() || candidate_cols.empty()) return std::nullopt;

  BoolMatrix restricted(static_cast<Index>(candidate_rows.size()),
                        static_cast<Index>(candidate_cols.size()));
  bool any_edge = false;
  for (std::size_t a = 0; a < candidate_rows.size(); ++a)
    for (std::size_t b = 0; b < candidate_cols.size(); ++b) {
      restricted(static_cast<Index>(a), static_cast<Index>(b)) =
          mask(candidate_rows[a], candidate_cols[b]);
      any_edge |= restricted(static_cast<Index>(a), static_cast<Index>(b));
    }
  if (!any_edge) return std::nullopt;

  const auto best = best_biclique(restricted);
  if (!best) return std::nullopt;
  Biclique result;
  for (Index r : best->rows) result.rows.push_back(candidate_rows[static_cast<std::size_t>(r)]);
  for (Index c : best->cols) result.cols.push_back(candidate_cols[static_cast<std::size_t>(c)]);
  return result;
}

Biclique anchor_submatrix(const BoolMatrix& mask, Index i, Index j) {
  auto result = try_anchor_submatrix(mask, i, j);
  if (!result) {
    std::ostringstream msg;
    msg << "anchor_submatrix: no biclique exists for target (" << i << "," << j << ")";
    throw NoBicliqueError(msg.str());
  }
  return std::move(*result);
}

std::vector<std::vector<Index>> partition_rows(const std::vector<Index>& rows, int k, Rng& rng) {
  if (k < 1 || static_cast<std::size_t>(k) > rows.size())
    throw std::invalid_argument("partition_rows: fold count must be in [1, |rows|]");
  std::vector<Index> shuffled = rows;
  rng.shuffle(shuffled);
  std::vector<std::vector<Index>> folds(static_cast<std::size_t>(k));
  const std::size_t base = rows.size() / static_cast<std::size_t>(k);
  const std::size_t remainder = rows.size() % static_cast<std::size_t>(k);
  std::size_t cursor = 0;
  for (std::size_t f = 0; f < static_cast<std::size_t>(k); ++f) {
    const std::size_t size = base + (f < remainder ? 1 : 0);
    folds[f].assign(shuffled.begin() + cursor, shuffled.begin() + cursor + size);
    std::sort(folds[f].begin(), folds[f].end());
    cursor += size;
  }
  return folds;
}

int default_fold_count(Index min_side, Index rank_estimate) {
  const Index divisor = std::max<Index>(2 * rank_estimate, 4);
  const Index k = min_side / divisor;
  return static_cast<int>(std::clamp<Index>(k, 1, 10));
}

Index AnchorPlan::min_fold_size() const {
  Index smallest = row_folds.empty() ? 0 : static_cast<Index>(row_folds.front().size());
  for (const auto& fold : row_folds)
    smallest = std::min(smallest, static_cast<Index>(fold.size()));
  return smallest;
}

void AnchorPlan::validate(const BoolMatrix& mask) const {
  if (row < 0 || row >= mask.rows() || col < 0 || col >= mask.cols())
    throw std::invalid_argument("AnchorPlan: target out of bounds");
  if (anchor_cols.empty()) throw std::invalid_argument("AnchorPlan: anchor column set is empty");
  if (row_folds.empty()) throw std::invalid_argument("AnchorPlan: no anchor row folds");
  for (Index b : anchor_cols) {
    if (b == col) throw std::invalid_argument("AnchorPlan: target column inside anchor columns");
    if (b < 0 || b >= mask.cols()) throw std::invalid_argument("AnchorPlan: anchor column out of bounds");
    if (!mask(row, b))
      throw std::invalid_argument("AnchorPlan: target row not observed on an anchor column");
  }
  std::vector<bool> seen(static_cast<std::size_t>(mask.rows()), false);
  for (const auto& fold : row_folds) {
    if (fold.empty()) throw std::invalid_argument("AnchorPlan: empty anchor row fold");
    for (Index a : fold) {
      if (a == row) throw std::invalid_argument("AnchorPlan: target row inside an anchor fold");
      if (a < 0 || a >= mask.rows()) throw std::invalid_argument("AnchorPlan: anchor row out of bounds");
      if (seen[static_cast<std::size_t>(a)])
        throw std::invalid_argument("AnchorPlan: anchor row folds are not disjoint");
      seen[static_cast<std::size_t>(a)] = true;
      if (!mask(a, col))
        throw std::invalid_argument("AnchorPlan: anchor row not observed on the target column");
      for (Index b : anchor_cols)
        if (!mask(a, b))
          throw std::invalid_argument("AnchorPlan: anchor block has an unobserved cell");
    }
  }
}

std::string AnchorPlan::to_json() const {
  std::ostringstream out;
  auto write_list = [&](const std::vector<Index>& xs) {
    out << '[';
    for (std::size_t k = 0; k < xs.size(); ++k) {
      if (k > 0) out << ',';
      out << xs[k];
    }
    out << ']';
  };
  out << "{\"target\":[" << row << ',' << col << "],\"anchor_cols\":";
  write_list(anchor_cols);
  out << ",\"anchor_row_folds\":[";
  for (std::size_t f = 0; f < row_folds.size(); ++f) {
    if (f > 0) out << ',';
    write_list(row_folds[f]);
  }
  out << "]}";
  return out.str();
}

AnchorPlan make_anchor_plan(const BoolMatrix& mask, Index i, Index j, int k_folds, Rng& rng) {
  Biclique anchors = anchor_submatrix(mask, i, j);
  const int k = std::clamp<int>(k_folds, 1, static_cast<int>(anchors.rows.size()));
  AnchorPlan plan;
  plan.row = i;
  plan.col = j;
  plan.anchor_cols = std::move(anchors.cols);
  plan.row_folds = partition_rows(anchors.rows, k, rng);
  return plan;
}

}  // namespace snn
