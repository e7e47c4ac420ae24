// n-mode singular vectors for initialization.

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cpwopt/datagen.hpp"
#include "cpwopt/error.hpp"
#include "cpwopt/kernels.hpp"

namespace cpwopt {

namespace {

constexpr double kRankTol = 1e-12;
constexpr int kOversample = 8;
constexpr int kMaxSubspaceIters = 500;
constexpr double kRitzTol = 1e-10;

void fix_column_signs(Eigen::MatrixXd& u) {
  for (Eigen::Index r = 0; r < u.cols(); ++r) {
    Eigen::Index peak = 0;
    u.col(r).cwiseAbs().maxCoeff(&peak);
    if (u(peak, r) < 0.0) u.col(r) = -u.col(r);
  }
}

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& block) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(block);
  return qr.householderQ() * Eigen::MatrixXd::Identity(block.rows(), block.cols());
}

// Keeps the leading eigenvectors whose eigenvalues are numerically nonzero
// and fills the remaining columns with random unit vectors.
Eigen::MatrixXd leading_vectors(const Eigen::VectorXd& eigvals_desc,
                                const Eigen::MatrixXd& eigvecs_desc, Index extent, Index rank,
                                std::uint64_t seed, Index mode) {
  const auto rows = static_cast<Eigen::Index>(extent);
  const auto cols = static_cast<Eigen::Index>(rank);
  Eigen::MatrixXd u(rows, cols);
  const double top = eigvals_desc.size() > 0 ? std::max(eigvals_desc[0], 0.0) : 0.0;
  Eigen::Index kept = 0;
  while (kept < std::min(cols, eigvals_desc.size()) && top > 0.0 &&
         eigvals_desc[kept] > kRankTol * top) {
    u.col(kept) = eigvecs_desc.col(kept);
    ++kept;
  }
  if (kept < cols) {
    Engine engine = make_engine(seed, Stream::nvecs, mode);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (Eigen::Index r = kept; r < cols; ++r) {
      for (Eigen::Index i = 0; i < rows; ++i) u(i, r) = dist(engine);
      u.col(r).normalize();
    }
  }
  fix_column_signs(u);
  return u;
}

Eigen::MatrixXd dense_mode_gram(const DenseTensor& x, Index mode) {
  const auto extent = static_cast<Eigen::Index>(x.shape()[mode]);
  const auto left = static_cast<Eigen::Index>(x.shape().left_size(mode));
  const auto right = static_cast<Eigen::Index>(x.shape().right_size(mode));
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(extent, extent);
  for (Eigen::Index k = 0; k < right; ++k) {
    Eigen::Map<const Eigen::MatrixXd> slab(x.data() + k * left * extent, left, extent);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(slab.transpose());
  }
  return gram.selfadjointView<Eigen::Lower>();
}

// X_(n) X_(n)^T applied to a block of vectors using only the known entries.
// Entries are grouped by their unfolding column (the index in all other
// modes); storage is a permutation and group offsets, both O(Q).
class SparseGramOperator {
 public:
  SparseGramOperator(const SparseSamples& s, Index mode) : samples_(s), mode_(mode) {
    const IndexList& idx = s.indices();
    const std::size_t q = idx.size();
    std::vector<std::uint64_t> keys(q);
    for (std::size_t k = 0; k < q; ++k) {
      std::uint64_t key = 0;
      for (Index m = idx.shape().order(); m-- > 0;) {
        if (m == mode) continue;
        key = key * idx.shape()[m] + idx.at(k, m);
      }
      keys[k] = key;
    }
    order_.resize(q);
    std::iota(order_.begin(), order_.end(), std::uint32_t{0});
    std::stable_sort(order_.begin(), order_.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return keys[a] < keys[b]; });
    for (std::size_t k = 0; k < q; ++k) {
      if (k == 0 || keys[order_[k]] != keys[order_[k - 1]]) starts_.push_back(static_cast<std::uint32_t>(k));
    }
    starts_.push_back(static_cast<std::uint32_t>(q));
  }

  [[nodiscard]] Eigen::MatrixXd apply(const Eigen::MatrixXd& v) const {
    const auto rows = idx_mode();
    const Eigen::VectorXd& y = samples_.values();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(v.rows(), v.cols());
    Eigen::RowVectorXd acc(v.cols());
    for (std::size_t g = 0; g + 1 < starts_.size(); ++g) {
      acc.setZero();
      for (std::uint32_t k = starts_[g]; k < starts_[g + 1]; ++k) {
        const auto q = order_[k];
        acc += y[q] * v.row(rows[q]);
      }
      for (std::uint32_t k = starts_[g]; k < starts_[g + 1]; ++k) {
        const auto q = order_[k];
        out.row(rows[q]) += y[q] * acc;
      }
    }
    return out;
  }

 private:
  [[nodiscard]] std::span<const IndexList::Coord> idx_mode() const {
    return samples_.indices().mode(mode_);
  }

  const SparseSamples& samples_;
  Index mode_;
  std::vector<std::uint32_t> order_;
  std::vector<std::uint32_t> starts_;
};

struct EigenPairs {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;
};

EigenPairs descending(const Eigen::MatrixXd& symmetric) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetric);
  return {es.eigenvalues().reverse(), es.eigenvectors().rowwise().reverse()};
}

EigenPairs sparse_leading_eigs(const SparseGramOperator& op, Index extent, Index rank,
                               std::uint64_t seed, Index mode) {
  const auto n = static_cast<Eigen::Index>(extent);
  const auto block = std::min<Eigen::Index>(n, static_cast<Eigen::Index>(rank) + kOversample);
  if (block == n) {
    return descending(op.apply(Eigen::MatrixXd::Identity(n, n)));
  }
  Engine engine = make_engine(seed, Stream::nvecs, 1000 + mode);
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd v(n, block);
  for (Eigen::Index r = 0; r < block; ++r) {
    for (Eigen::Index i = 0; i < n; ++i) v(i, r) = dist(engine);
  }
  v = orthonormal_basis(v);
  const auto want = std::min<Eigen::Index>(static_cast<Eigen::Index>(rank), block);
  EigenPairs ritz;
  for (int it = 0; it < kMaxSubspaceIters; ++it) {
    const Eigen::MatrixXd w = op.apply(v);
    const EigenPairs small = descending(v.transpose() * w);
    ritz.values = small.values;
    ritz.vectors = v * small.vectors;
    const double top = std::max(std::abs(small.values[0]), 1e-300);
    const Eigen::MatrixXd residual =
        w * small.vectors.leftCols(want) - ritz.vectors.leftCols(want) * small.values.head(want).asDiagonal();
    if (residual.colwise().norm().maxCoeff() <= kRitzTol * top) break;
    v = orthonormal_basis(w);
  }
  return ritz;
}

}  // namespace

KruskalModel init_nvecs(const DenseTensor& zero_filled, Index rank, std::uint64_t seed) {
  if (rank < 1) throw ValueError("rank must be at least 1");
  const Shape& shape = zero_filled.shape();
  std::vector<FactorMatrix> factors;
  for (Index n = 0; n < shape.order(); ++n) {
    const EigenPairs eig = descending(dense_mode_gram(zero_filled, n));
    factors.push_back(leading_vectors(eig.values, eig.vectors, shape[n], rank, seed, n));
  }
  return KruskalModel(std::move(factors));
}

KruskalModel init_nvecs(const SparseSamples& samples, Index rank, std::uint64_t seed) {
  if (rank < 1) throw ValueError("rank must be at least 1");
  const Shape& shape = samples.shape();
  std::vector<FactorMatrix> factors;
  for (Index n = 0; n < shape.order(); ++n) {
    const SparseGramOperator op(samples, n);
    const EigenPairs eig = sparse_leading_eigs(op, shape[n], rank, seed, n);
    factors.push_back(leading_vectors(eig.values, eig.vectors, shape[n], rank, seed, n));
  }
  return KruskalModel(std::move(factors));
}

KruskalModel match_norm(const KruskalModel& model, double target) {
  const double current = ktensor_norm(model);
  if (current == 0.0 || !(target > 0.0)) return model;
  const double s = std::pow(target / current, 1.0 / static_cast<double>(model.order()));
  KruskalModel out = model;
  for (auto& a : out.factors) a *= s;
  return out;
}

double extrapolated_norm(const SparseSamples& samples) {
  const double fill = static_cast<double>(samples.shape().numel()) /
                      static_cast<double>(samples.size());
  return samples.values().norm() * std::sqrt(fill);
}

double extrapolated_norm(const DenseTensor& zero_filled, const DenseTensor& w) {
  if (!(zero_filled.shape() == w.shape())) throw ShapeError("data and mask shapes differ");
  double sq = 0.0;
  std::size_t known = 0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k] == 0.0) continue;
    ++known;
    sq += zero_filled[k] * zero_filled[k];
  }
  if (known == 0) return 0.0;
  return std::sqrt(sq * static_cast<double>(w.size()) / static_cast<double>(known));
}

std::vector<KruskalModel> initial_guesses(const DenseTensor& zero_filled, const DenseTensor& w,
                                          Index rank, int starts, std::uint64_t seed) {
  if (starts < 1) throw ValueError("need at least one start");
  const double target = extrapolated_norm(zero_filled, w);
  std::vector<KruskalModel> out;
  out.push_back(match_norm(init_nvecs(zero_filled, rank, seed), target));
  for (int s = 1; s < starts; ++s) {
    out.push_back(match_norm(
        init_random(zero_filled.shape(), rank, seed, static_cast<std::uint64_t>(s)), target));
  }
  return out;
}

std::vector<KruskalModel> initial_guesses(const SparseSamples& samples, Index rank, int starts,
                                          std::uint64_t seed) {
  if (starts < 1) throw ValueError("need at least one start");
  const double target = extrapolated_norm(samples);
  std::vector<KruskalModel> out;
  out.push_back(match_norm(init_nvecs(samples, rank, seed), target));
  for (int s = 1; s < starts; ++s) {
    out.push_back(
        match_norm(init_random(samples.shape(), rank, seed, static_cast<std::uint64_t>(s)), target));
  }
  return out;
}

}  // namespace cpwopt
