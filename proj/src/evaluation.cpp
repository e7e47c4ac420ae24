#include "cpwopt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cpwopt/error.hpp"
#include "cpwopt/kernels.hpp"

namespace cpwopt {

namespace {

constexpr Index kExhaustiveLimit = 8;

void check_comparable(const KruskalModel& a, const KruskalModel& b) {
  if (a.order() != b.order()) throw ShapeError("models have different numbers of modes");
  for (Index n = 0; n < a.order(); ++n) {
    if (a.factors[n].rows() != b.factors[n].rows()) {
      throw ShapeError("models differ in the size of mode " + std::to_string(n + 1));
    }
  }
}

// Appends zero components until `model` has at least `rank` columns.
KruskalModel pad_to(const KruskalModel& model, Index rank) {
  if (model.rank() >= rank) return model;
  const auto r = static_cast<Eigen::Index>(rank);
  KruskalModel out = model;
  for (auto& a : out.factors) {
    FactorMatrix wide = FactorMatrix::Zero(a.rows(), r);
    wide.leftCols(a.cols()) = a;
    a = std::move(wide);
  }
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(r);
  lambda.head(model.lambda.size()) = model.lambda;
  out.lambda = std::move(lambda);
  return out;
}

ScoreReport report_for(const Eigen::MatrixXd& s, std::vector<Index> perm) {
  ScoreReport rep;
  double total = 0.0;
  for (std::size_t r = 0; r < perm.size(); ++r) {
    const double c = s(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(perm[r]));
    rep.congruences.push_back(c);
    total += c;
  }
  rep.fms = std::clamp(total / static_cast<double>(perm.size()), 0.0, 1.0);
  rep.permutation = std::move(perm);
  return rep;
}

}  // namespace

Eigen::MatrixXd fms_score_matrix(const KruskalModel& truth, const KruskalModel& computed) {
  truth.validate();
  computed.validate();
  check_comparable(truth, computed);
  const KruskalModel t = normalize_model(truth).model;
  const KruskalModel c = normalize_model(pad_to(computed, truth.rank())).model;
  Eigen::MatrixXd s = Eigen::MatrixXd::Ones(t.lambda.size(), c.lambda.size());
  for (Index n = 0; n < t.order(); ++n) {
    s = s.cwiseProduct((t.factors[n].transpose() * c.factors[n]).cwiseAbs());
  }
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    for (Eigen::Index q = 0; q < s.cols(); ++q) {
      const double lr = t.lambda[r], lq = c.lambda[q];
      const double big = std::max(lr, lq);
      const double agree = big == 0.0 ? 1.0 : 1.0 - std::abs(lr - lq) / big;
      s(r, q) *= agree;
    }
  }
  return s;
}

ScoreReport fms(const KruskalModel& truth, const KruskalModel& computed) {
  const Eigen::MatrixXd s = fms_score_matrix(truth, computed);
  return report_for(s, max_assignment(s));
}

ScoreReport fms_exhaustive(const KruskalModel& truth, const KruskalModel& computed) {
  const Eigen::MatrixXd s = fms_score_matrix(truth, computed);
  const auto cols = static_cast<Index>(s.cols());
  const auto rows = static_cast<std::size_t>(s.rows());
  if (cols > kExhaustiveLimit) throw ValueError("exhaustive FMS is limited to 8 components");
  // Every injection is the first `rows` entries of some permutation of the
  // columns; duplicates only cost time.
  std::vector<Index> cols_perm(cols);
  std::iota(cols_perm.begin(), cols_perm.end(), Index{0});
  double best = -1.0;
  std::vector<Index> best_perm;
  do {
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      total += s(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cols_perm[r]));
    }
    if (total > best) {
      best = total;
      best_perm.assign(cols_perm.begin(), cols_perm.begin() + static_cast<std::ptrdiff_t>(rows));
    }
  } while (std::next_permutation(cols_perm.begin(), cols_perm.end()));
  return report_for(s, std::move(best_perm));
}

double tcs(const DenseTensor& x_true, const DenseTensor& w, const KruskalModel& model) {
  if (!(x_true.shape() == w.shape())) throw ShapeError("data and mask shapes differ");
  model.check_shape(x_true.shape());
  const DenseTensor z = ktensor_full(model);
  double num = 0.0, den = 0.0;
  std::size_t missing = 0;
  for (std::size_t k = 0; k < x_true.size(); ++k) {
    if (w[k] != 0.0) continue;
    ++missing;
    const double d = x_true[k] - z[k];
    num += d * d;
    den += x_true[k] * x_true[k];
  }
  if (missing == 0) throw ValueError("TCS needs at least one missing entry");
  if (den == 0.0) throw ValueError("TCS undefined: data vanish on the missing entries");
  return std::sqrt(num / den);
}

double tcs(const SparseSamples& holdout, const KruskalModel& model) {
  model.check_shape(holdout.shape());
  const Eigen::VectorXd z = ktensor_values_at(model, holdout.indices());
  const double den = holdout.values().norm();
  if (den == 0.0) throw ValueError("TCS undefined: held-out values are all zero");
  return (holdout.values() - z).norm() / den;
}

double rho(const Shape& shape, Index rank, double missing) {
  if (!(missing >= 0.0 && missing < 1.0)) throw ValueError("missing fraction must lie in [0, 1)");
  if (rank < 1) throw ValueError("rank must be at least 1");
  const double known = (1.0 - missing) * static_cast<double>(shape.numel());
  const double n = static_cast<double>(shape.order());
  const double dof =
      static_cast<double>(rank) * (static_cast<double>(shape.extent_sum()) - n + 2.0) + 1.0;
  return known / dof;
}

}  // namespace cpwopt
