#pragma once

// Weighted least-squares CP objective
//
//   f(A) = 1/2 || W * (X - [[A^(0), ..., A^(N-1)]]) ||^2
//        = 1/2 gamma - <Y, Z> + 1/2 ||Z||^2,   Y = W*X, Z = W*[[A]], gamma = ||Y||^2
//
// and its gradient G^(n) = -(T_(n) A^(-n)) diag(lambda) with T = Y - Z.
// The model weights lambda are treated as constants; during fitting they are
// all ones.

#include <cstddef>
#include <vector>

#include "cpwopt/tensor.hpp"

namespace cpwopt {

struct ObjectiveValue {
  double f = 0.0;
  std::vector<Eigen::MatrixXd> gradient;  // one I_n x R matrix per mode
};

/// Interface shared by the dense and sparse workspaces.
class Objective {
 public:
  virtual ~Objective() = default;
  [[nodiscard]] virtual const Shape& shape() const noexcept = 0;
  /// gamma = ||W*X||^2.
  [[nodiscard]] virtual double gamma() const noexcept = 0;
  /// Returns f and writes one gradient matrix per mode into `gradient`
  /// (resized as needed).
  virtual double evaluate(const KruskalModel& model, std::vector<Eigen::MatrixXd>& gradient) = 0;
  /// Function value only.
  virtual double value(const KruskalModel& model) = 0;
};

/// Dense-mask workspace. Caches Y = W*X and gamma; holds one scratch tensor.
class DenseObjective final : public Objective {
 public:
  /// Throws ShapeError on mismatched shapes, ValueError if W is not binary.
  DenseObjective(const DenseTensor& x, const DenseTensor& w);

  [[nodiscard]] const Shape& shape() const noexcept override { return y_.shape(); }
  [[nodiscard]] double gamma() const noexcept override { return gamma_; }
  double evaluate(const KruskalModel& model, std::vector<Eigen::MatrixXd>& gradient) override;
  double value(const KruskalModel& model) override;

  [[nodiscard]] const DenseTensor& weighted_data() const noexcept { return y_; }
  [[nodiscard]] const DenseTensor& weights() const noexcept { return w_; }

 private:
  DenseTensor y_;
  DenseTensor w_;
  double gamma_ = 0.0;
  DenseTensor residual_;
};

/// Sparse workspace over the known entries only. Keeps a reference to the
/// samples, which must outlive the workspace. Scratch storage is three
/// length-Q vectors; nothing proportional to the full tensor is allocated.
class SparseObjective final : public Objective {
 public:
  explicit SparseObjective(const SparseSamples& samples);

  [[nodiscard]] const Shape& shape() const noexcept override { return samples_->shape(); }
  [[nodiscard]] double gamma() const noexcept override { return gamma_; }
  double evaluate(const KruskalModel& model, std::vector<Eigen::MatrixXd>& gradient) override;
  double value(const KruskalModel& model) override;

 private:
  void compute_model_values(const KruskalModel& model);

  const SparseSamples* samples_;
  double gamma_ = 0.0;
  Eigen::VectorXd z_;
  Eigen::VectorXd t_;
  Eigen::VectorXd u_;
};

/// One-shot helpers building a workspace internally.
[[nodiscard]] ObjectiveValue objective_grad_dense(const DenseTensor& x, const DenseTensor& w,
                                                  const KruskalModel& model);
[[nodiscard]] ObjectiveValue objective_grad_sparse(const SparseSamples& s,
                                                   const KruskalModel& model);

}  // namespace cpwopt
