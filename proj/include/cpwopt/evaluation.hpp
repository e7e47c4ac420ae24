#pragma once

// Scoring of computed factorizations.

#include <optional>
#include <vector>

#include "cpwopt/tensor.hpp"

namespace cpwopt {

struct ScoreReport {
  double fms = 0.0;
  /// permutation[r] is the computed component matched to true component r.
  std::vector<Index> permutation;
  /// Score of each matched pair, in true-component order.
  std::vector<double> congruences;
  std::optional<double> tcs;
  std::optional<double> rho;
};

/// Pairwise score matrix S(r, s) for true component r and computed
/// component s after both models are normalized:
///   (1 - |l_r - l_s| / max(l_r, l_s)) * prod_n |a_r^(n)T b_s^(n)|.
/// A pair of zero weights scores as weight-agreement 1.
[[nodiscard]] Eigen::MatrixXd fms_score_matrix(const KruskalModel& truth,
                                               const KruskalModel& computed);

/// Factor match score, maximized over injections of the true components into
/// the computed ones by linear assignment. If the computed model has fewer
/// components, it is padded with zero components.
[[nodiscard]] ScoreReport fms(const KruskalModel& truth, const KruskalModel& computed);
/// Same maximum by enumerating every injection. Limited to R_computed <= 8.
[[nodiscard]] ScoreReport fms_exhaustive(const KruskalModel& truth, const KruskalModel& computed);

/// Maximum-weight assignment of each row to a distinct column (rows <=
/// cols). Returns the column for each row.
[[nodiscard]] std::vector<Index> max_assignment(const Eigen::MatrixXd& score);

/// ||(1-W)*(X - [[M]])|| / ||(1-W)*X||. Throws ValueError if W has no zero
/// entries or the denominator vanishes.
[[nodiscard]] double tcs(const DenseTensor& x_true, const DenseTensor& w,
                         const KruskalModel& model);
/// Same score over an explicit list of held-out entries.
[[nodiscard]] double tcs(const SparseSamples& holdout, const KruskalModel& model);

/// (1-M) prod I_n / (R (sum I_n - N + 2) + 1), which for three modes is
/// (1-M) IJK / (R (I+J+K-1) + 1).
[[nodiscard]] double rho(const Shape& shape, Index rank, double missing);

}  // namespace cpwopt
