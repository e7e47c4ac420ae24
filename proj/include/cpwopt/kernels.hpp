#pragma once

// Dense and sparse multilinear-algebra kernels.

#include <span>
#include <vector>

#include "cpwopt/tensor.hpp"

namespace cpwopt {

[[nodiscard]] double norm(const DenseTensor& x);
[[nodiscard]] double inner(const DenseTensor& x, const DenseTensor& y);
[[nodiscard]] DenseTensor hadamard(const DenseTensor& x, const DenseTensor& y);
/// ||W * X||, i.e. norm of the elementwise product.
[[nodiscard]] double weighted_norm(const DenseTensor& x, const DenseTensor& w);

/// Mode-n unfolding X_(n), of size I_n x prod_{m != n} I_m. Column index is
/// the linear index of the remaining modes with the lowest mode fastest.
[[nodiscard]] Eigen::MatrixXd matricize(const DenseTensor& x, Index mode);
/// Inverse of matricize.
[[nodiscard]] DenseTensor fold(const Eigen::MatrixXd& unfolded, Index mode, const Shape& shape);

/// Khatri-Rao product M_0 (.) M_1 (.) ... (.) M_{K-1}: column r is
/// kron(m0_r, kron(m1_r, ...)), so the row index of the LAST matrix varies
/// fastest. With this ordering X_(n) = A^(n) khatri_rao(A^(N-1),...,A^(n+1),
/// A^(n-1),...,A^(0))^T for X = [[A^(0),...,A^(N-1)]].
/// An empty list yields a 1 x `rank` matrix of ones.
[[nodiscard]] Eigen::MatrixXd khatri_rao(std::span<const FactorMatrix* const> matrices,
                                         Eigen::Index rank);
[[nodiscard]] Eigen::MatrixXd khatri_rao(const std::vector<FactorMatrix>& matrices);

/// Dense tensor with entries sum_r lambda_r prod_n a^(n)_{i_n r}.
[[nodiscard]] DenseTensor ktensor_full(const KruskalModel& model);

/// ||[[model]]|| from the Gram matrices, without forming the tensor.
[[nodiscard]] double ktensor_norm(const KruskalModel& model);

/// Model values at each listed index, lambda applied. Built from "expanded"
/// gather vectors one rank term and one mode at a time, so the transient
/// storage is O(Q).
[[nodiscard]] Eigen::VectorXd ktensor_values_at(const KruskalModel& model,
                                                const IndexList& indices);

/// T_(n) * khatri_rao(A^(-n)). The model weights are NOT applied.
[[nodiscard]] Eigen::MatrixXd mttkrp_dense(const DenseTensor& t, const KruskalModel& model,
                                           Index mode);

/// Sparse MTTKRP: G_{jr} = sum_{q: i_q^(n)=j} t_q prod_{m!=n} a^(m)_{i_q^(m) r},
/// computed by scatter-adding the expanded product vector in index order.
/// The model weights are NOT applied.
[[nodiscard]] Eigen::MatrixXd mttkrp_sparse(const IndexList& indices,
                                            const Eigen::VectorXd& values,
                                            const KruskalModel& model, Index mode);
[[nodiscard]] inline Eigen::MatrixXd mttkrp_sparse(const SparseSamples& s,
                                                   const KruskalModel& model, Index mode) {
  return mttkrp_sparse(s.indices(), s.values(), model, mode);
}

struct NormalizedModel {
  KruskalModel model;
  /// Components whose columns were identically zero in some mode. Their
  /// weight is 0 and the offending columns are set to e_1.
  std::vector<Index> zero_components;
};

/// Rescale every column to unit two-norm, absorbing magnitudes into lambda.
/// Sign convention: within each component, columns are flipped in pairs so
/// that their largest-magnitude entry is positive; when an odd number of
/// columns would need a flip, the column whose largest-magnitude entry is
/// smallest keeps its negative sign. Weights end up nonnegative.
[[nodiscard]] NormalizedModel normalize_model(const KruskalModel& model);

struct CenteredSamples {
  SparseSamples samples;
  Eigen::VectorXd means;  // one per index of the centered mode
};

/// Subtract from each known entry the mean of the known entries sharing its
/// index in `mode`. Throws ValueError if some slab has no known entry.
[[nodiscard]] CenteredSamples center_ignore_missing(const SparseSamples& s, Index mode);

}  // namespace cpwopt
