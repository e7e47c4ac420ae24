#include "cpwopt/objective.hpp"

#include "cpwopt/error.hpp"
#include "cpwopt/kernels.hpp"

namespace cpwopt {

DenseObjective::DenseObjective(const DenseTensor& x, const DenseTensor& w)
    : y_(hadamard(x, w)), w_(w), residual_(x.shape()) {
  if (!w.is_binary()) throw ValueError("weight tensor must be binary");
  if (!y_.all_finite()) throw ValueError("known data entries must be finite");
  gamma_ = y_.vec().squaredNorm();
}

double DenseObjective::value(const KruskalModel& model) {
  model.check_shape(shape());
  const DenseTensor full = ktensor_full(model);
  residual_.vec() = y_.vec() - w_.vec().cwiseProduct(full.vec());
  return 0.5 * residual_.vec().squaredNorm();
}

double DenseObjective::evaluate(const KruskalModel& model, std::vector<Eigen::MatrixXd>& gradient) {
  model.check_shape(shape());
  const DenseTensor full = ktensor_full(model);
  // T = Y - Z with Z = W*full. f is accumulated as 1/2 ||T||^2, which equals
  // 1/2 gamma - <Y,Z> + 1/2 ||Z||^2 but does not cancel near f = 0.
  residual_.vec() = y_.vec() - w_.vec().cwiseProduct(full.vec());
  const double f = 0.5 * residual_.vec().squaredNorm();
  gradient.resize(model.order());
  for (Index n = 0; n < model.order(); ++n) {
    gradient[n] = -mttkrp_dense(residual_, model, n) * model.lambda.asDiagonal();
  }
  return f;
}

// ---------------------------------------------------------------------------

SparseObjective::SparseObjective(const SparseSamples& samples) : samples_(&samples) {
  gamma_ = samples.values().squaredNorm();
  const auto q = static_cast<Eigen::Index>(samples.size());
  z_.resize(q);
  t_.resize(q);
  u_.resize(q);
}

void SparseObjective::compute_model_values(const KruskalModel& model) {
  model.validate();
  model.check_shape(shape());
  const IndexList& idx = samples_->indices();
  const auto q = static_cast<Eigen::Index>(idx.size());
  z_.setZero();
  for (Index r = 0; r < model.rank(); ++r) {
    const auto rr = static_cast<Eigen::Index>(r);
    u_.setConstant(model.lambda[rr]);
    for (Index n = 0; n < model.order(); ++n) {
      const auto coords = idx.mode(n);
      const double* col = model.factors[n].col(rr).data();
      for (Eigen::Index k = 0; k < q; ++k) u_[k] *= col[coords[static_cast<std::size_t>(k)]];
    }
    z_ += u_;
  }
}

double SparseObjective::value(const KruskalModel& model) {
  compute_model_values(model);
  return 0.5 * (samples_->values() - z_).squaredNorm();
}

double SparseObjective::evaluate(const KruskalModel& model, std::vector<Eigen::MatrixXd>& gradient) {
  compute_model_values(model);
  t_ = samples_->values() - z_;
  const double f = 0.5 * t_.squaredNorm();

  const IndexList& idx = samples_->indices();
  const auto q = static_cast<Eigen::Index>(idx.size());
  gradient.resize(model.order());
  for (Index n = 0; n < model.order(); ++n) {
    Eigen::MatrixXd& g = gradient[n];
    g.setZero(model.factors[n].rows(), static_cast<Eigen::Index>(model.rank()));
    const auto target = idx.mode(n);
    for (Index r = 0; r < model.rank(); ++r) {
      const auto rr = static_cast<Eigen::Index>(r);
      u_ = t_ * (-model.lambda[rr]);
      for (Index m = 0; m < model.order(); ++m) {
        if (m == n) continue;
        const auto coords = idx.mode(m);
        const double* col = model.factors[m].col(rr).data();
        for (Eigen::Index k = 0; k < q; ++k) u_[k] *= col[coords[static_cast<std::size_t>(k)]];
      }
      double* out = g.col(rr).data();
      for (Eigen::Index k = 0; k < q; ++k) out[target[static_cast<std::size_t>(k)]] += u_[k];
    }
  }
  return f;
}

// ---------------------------------------------------------------------------

ObjectiveValue objective_grad_dense(const DenseTensor& x, const DenseTensor& w,
                                    const KruskalModel& model) {
  DenseObjective obj(x, w);
  ObjectiveValue out;
  out.f = obj.evaluate(model, out.gradient);
  return out;
}

ObjectiveValue objective_grad_sparse(const SparseSamples& s, const KruskalModel& model) {
  SparseObjective obj(s);
  ObjectiveValue out;
  out.f = obj.evaluate(model, out.gradient);
  return out;
}

}  // namespace cpwopt
