#include "cpwopt/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "cpwopt/error.hpp"

namespace cpwopt {

namespace {

void require_same_shape(const DenseTensor& x, const DenseTensor& y, const char* op) {
  if (!(x.shape() == y.shape())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + x.shape().to_string() + " vs " +
                     y.shape().to_string());
  }
}

// Factors of all modes except `skip`, highest mode first, as expected by
// khatri_rao for the mode-`skip` unfolding.
std::vector<const FactorMatrix*> reversed_factors(const KruskalModel& m, Index first, Index last) {
  std::vector<const FactorMatrix*> out;
  for (Index n = last; n-- > first;) out.push_back(&m.factors[n]);
  return out;
}

}  // namespace

double norm(const DenseTensor& x) { return x.vec().norm(); }

double inner(const DenseTensor& x, const DenseTensor& y) {
  require_same_shape(x, y, "inner");
  return x.vec().dot(y.vec());
}

DenseTensor hadamard(const DenseTensor& x, const DenseTensor& y) {
  require_same_shape(x, y, "hadamard");
  DenseTensor out(x.shape());
  out.vec() = x.vec().cwiseProduct(y.vec());
  return out;
}

double weighted_norm(const DenseTensor& x, const DenseTensor& w) {
  require_same_shape(x, w, "weighted_norm");
  return x.vec().cwiseProduct(w.vec()).norm();
}

Eigen::MatrixXd matricize(const DenseTensor& x, Index mode) {
  const Shape& shape = x.shape();
  check_mode(shape, mode);
  const std::uint64_t left = shape.left_size(mode);
  const std::uint64_t extent = shape[mode];
  const std::uint64_t cols = shape.numel() / extent;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(extent), static_cast<Eigen::Index>(cols));
  for (std::uint64_t lin = 0; lin < x.size(); ++lin) {
    const std::uint64_t l = lin % left;
    const std::uint64_t rest = lin / left;
    const std::uint64_t i = rest % extent;
    const std::uint64_t r = rest / extent;
    out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l + left * r)) = x[lin];
  }
  return out;
}

DenseTensor fold(const Eigen::MatrixXd& unfolded, Index mode, const Shape& shape) {
  check_mode(shape, mode);
  const std::uint64_t left = shape.left_size(mode);
  const std::uint64_t extent = shape[mode];
  if (static_cast<std::uint64_t>(unfolded.rows()) != extent ||
      static_cast<std::uint64_t>(unfolded.cols()) * extent != shape.numel()) {
    throw ShapeError("fold: matrix dimensions do not match shape " + shape.to_string());
  }
  DenseTensor out(shape);
  for (std::uint64_t lin = 0; lin < out.size(); ++lin) {
    const std::uint64_t l = lin % left;
    const std::uint64_t rest = lin / left;
    out[lin] = unfolded(static_cast<Eigen::Index>(rest % extent),
                        static_cast<Eigen::Index>(l + left * (rest / extent)));
  }
  return out;
}

Eigen::MatrixXd khatri_rao(std::span<const FactorMatrix* const> matrices, Eigen::Index rank) {
  Eigen::MatrixXd acc = Eigen::MatrixXd::Ones(1, rank);
  for (const FactorMatrix* m : matrices) {
    if (m->cols() != rank) throw ShapeError("khatri_rao: column counts differ");
    const Eigen::Index rows_acc = acc.rows();
    const Eigen::Index rows_m = m->rows();
    Eigen::MatrixXd next(rows_acc * rows_m, rank);
    for (Eigen::Index r = 0; r < rank; ++r) {
      for (Eigen::Index i = 0; i < rows_acc; ++i) {
        next.col(r).segment(i * rows_m, rows_m) = acc(i, r) * m->col(r);
      }
    }
    acc = std::move(next);
  }
  return acc;
}

Eigen::MatrixXd khatri_rao(const std::vector<FactorMatrix>& matrices) {
  if (matrices.empty()) throw ShapeError("khatri_rao: empty matrix list");
  std::vector<const FactorMatrix*> ptrs;
  for (const auto& m : matrices) ptrs.push_back(&m);
  return khatri_rao(ptrs, matrices.front().cols());
}

DenseTensor ktensor_full(const KruskalModel& model) {
  model.validate();
  const Shape shape = model.shape();
  const auto rest = reversed_factors(model, 1, model.order());
  const Eigen::MatrixXd kr = khatri_rao(rest, static_cast<Eigen::Index>(model.rank()));
  DenseTensor out(shape);
  Eigen::Map<Eigen::MatrixXd> unfolded(out.data(), model.factors[0].rows(), kr.rows());
  unfolded.noalias() = (model.factors[0] * model.lambda.asDiagonal()) * kr.transpose();
  return out;
}

double ktensor_norm(const KruskalModel& model) {
  model.validate();
  Eigen::MatrixXd prod = model.lambda * model.lambda.transpose();
  for (const auto& a : model.factors) prod = prod.cwiseProduct(a.transpose() * a);
  return std::sqrt(std::max(prod.sum(), 0.0));
}

Eigen::VectorXd ktensor_values_at(const KruskalModel& model, const IndexList& indices) {
  model.validate();
  model.check_shape(indices.shape());
  const auto q = static_cast<Eigen::Index>(indices.size());
  Eigen::VectorXd z = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd u(q);
  for (Index r = 0; r < model.rank(); ++r) {
    const auto rr = static_cast<Eigen::Index>(r);
    u.setConstant(model.lambda[rr]);
    for (Index n = 0; n < model.order(); ++n) {
      const auto coords = indices.mode(n);
      const double* col = model.factors[n].col(rr).data();
      for (Eigen::Index k = 0; k < q; ++k) u[k] *= col[coords[static_cast<std::size_t>(k)]];
    }
    z += u;
  }
  return z;
}

Eigen::MatrixXd mttkrp_dense(const DenseTensor& t, const KruskalModel& model, Index mode) {
  model.validate();
  model.check_shape(t.shape());
  check_mode(t.shape(), mode);
  const auto rank = static_cast<Eigen::Index>(model.rank());
  const auto extent = static_cast<Eigen::Index>(t.shape()[mode]);
  const auto left = static_cast<Eigen::Index>(t.shape().left_size(mode));
  const auto right = static_cast<Eigen::Index>(t.shape().right_size(mode));

  // Khatri-Rao of the modes below and above `mode`; the full A^(-n) is
  // kr_right (.) kr_left, so each right-index slab contributes
  // (slab^T kr_left) scaled columnwise by a row of kr_right.
  const Eigen::MatrixXd kr_left = khatri_rao(reversed_factors(model, 0, mode), rank);
  const Eigen::MatrixXd kr_right = khatri_rao(reversed_factors(model, mode + 1, model.order()), rank);

  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(extent, rank);
  if (left == 1) {
    Eigen::Map<const Eigen::MatrixXd> unfolded(t.data(), extent, right);
    g.noalias() = unfolded * kr_right;
    return g;
  }
  if (right == 1) {
    Eigen::Map<const Eigen::MatrixXd> slab(t.data(), left, extent);
    g.noalias() = slab.transpose() * kr_left;
    return g;
  }
  Eigen::MatrixXd partial(extent, rank);
  for (Eigen::Index k = 0; k < right; ++k) {
    Eigen::Map<const Eigen::MatrixXd> slab(t.data() + k * left * extent, left, extent);
    partial.noalias() = slab.transpose() * kr_left;
    g += partial * kr_right.row(k).asDiagonal();
  }
  return g;
}

Eigen::MatrixXd mttkrp_sparse(const IndexList& indices, const Eigen::VectorXd& values,
                              const KruskalModel& model, Index mode) {
  model.validate();
  model.check_shape(indices.shape());
  check_mode(indices.shape(), mode);
  const auto q = static_cast<Eigen::Index>(indices.size());
  if (values.size() != q) throw ShapeError("mttkrp_sparse: value count does not match index count");
  const auto rank = static_cast<Eigen::Index>(model.rank());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(model.factors[mode].rows(), rank);
  Eigen::VectorXd u(q);
  const auto target = indices.mode(mode);
  for (Eigen::Index r = 0; r < rank; ++r) {
    u = values;
    for (Index m = 0; m < model.order(); ++m) {
      if (m == mode) continue;
      const auto coords = indices.mode(m);
      const double* col = model.factors[m].col(r).data();
      for (Eigen::Index k = 0; k < q; ++k) u[k] *= col[coords[static_cast<std::size_t>(k)]];
    }
    double* out = g.col(r).data();
    for (Eigen::Index k = 0; k < q; ++k) out[target[static_cast<std::size_t>(k)]] += u[k];
  }
  return g;
}

NormalizedModel normalize_model(const KruskalModel& model) {
  model.validate();
  NormalizedModel out{model, {}};
  KruskalModel& m = out.model;
  const Index order = m.order();
  for (Index r = 0; r < m.rank(); ++r) {
    const auto rr = static_cast<Eigen::Index>(r);
    bool zero = false;
    for (Index n = 0; n < order; ++n) {
      const double nrm = m.factors[n].col(rr).norm();
      if (nrm == 0.0) {
        zero = true;
      } else {
        m.factors[n].col(rr) /= nrm;
        m.lambda[rr] *= nrm;
      }
    }
    if (zero || m.lambda[rr] == 0.0) {
      for (Index n = 0; n < order; ++n) {
        m.factors[n].col(rr).setZero();
        m.factors[n](0, rr) = 1.0;
      }
      m.lambda[rr] = 0.0;
      out.zero_components.push_back(r);
      continue;
    }
    if (m.lambda[rr] < 0.0) {
      m.lambda[rr] = -m.lambda[rr];
      m.factors[0].col(rr) = -m.factors[0].col(rr);
    }

    // Largest-magnitude entry of each column (first one on ties).
    std::vector<std::pair<double, Index>> negative;  // (|peak|, mode)
    for (Index n = 0; n < order; ++n) {
      Eigen::Index peak = 0;
      m.factors[n].col(rr).cwiseAbs().maxCoeff(&peak);
      const double v = m.factors[n](peak, rr);
      if (v < 0.0) negative.emplace_back(-v, n);
    }
    // Leave the weakest negative column unflipped when the count is odd.
    std::sort(negative.begin(), negative.end(),
              [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    const std::size_t flips = negative.size() - negative.size() % 2;
    for (std::size_t k = 0; k < flips; ++k) {
      auto col = m.factors[negative[k].second].col(rr);
      col = -col;
    }
  }
  return out;
}

CenteredSamples center_ignore_missing(const SparseSamples& s, Index mode) {
  check_mode(s.shape(), mode);
  const auto extent = static_cast<Eigen::Index>(s.shape()[mode]);
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(extent);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(extent);
  const auto coords = s.indices().mode(mode);
  const Eigen::VectorXd& y = s.values();
  for (std::size_t q = 0; q < s.size(); ++q) {
    sums[coords[q]] += y[static_cast<Eigen::Index>(q)];
    counts[coords[q]] += 1.0;
  }
  for (Eigen::Index j = 0; j < extent; ++j) {
    if (counts[j] == 0.0) {
      throw ValueError("cannot center: slab " + std::to_string(j + 1) + " of mode " +
                       std::to_string(mode + 1) + " has no known entries");
    }
  }
  Eigen::VectorXd means = sums.cwiseQuotient(counts);
  Eigen::VectorXd centered = y;
  for (std::size_t q = 0; q < s.size(); ++q) centered[static_cast<Eigen::Index>(q)] -= means[coords[q]];
  return {s.with_values(std::move(centered)), std::move(means)};
}

}  // namespace cpwopt
