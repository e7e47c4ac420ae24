#pragma once

// Small fixtures and brute-force oracles shared by the unit tests.

#include <random>
#include <vector>

#include "cpwopt/tensor.hpp"

namespace testing_helpers {

using cpwopt::DenseTensor;
using cpwopt::Index;
using cpwopt::KruskalModel;
using cpwopt::Shape;

inline KruskalModel random_model(const Shape& shape, Index rank, unsigned seed,
                                 bool random_lambda = false) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<cpwopt::FactorMatrix> factors;
  for (Index d : shape.dims()) {
    cpwopt::FactorMatrix a(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(rank));
    for (Eigen::Index r = 0; r < a.cols(); ++r)
      for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, r) = dist(gen);
    factors.push_back(a);
  }
  Eigen::VectorXd lambda = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(rank));
  if (random_lambda) {
    std::uniform_real_distribution<double> u(0.5, 2.0);
    for (Eigen::Index r = 0; r < lambda.size(); ++r) lambda[r] = u(gen);
  }
  return KruskalModel(std::move(factors), std::move(lambda));
}

inline DenseTensor random_tensor(const Shape& shape, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  DenseTensor t(shape);
  for (auto& v : t.values()) v = dist(gen);
  return t;
}

/// Bernoulli mask with the given missing probability; entry 0 is always
/// known so the mask is never empty.
inline DenseTensor random_mask(const Shape& shape, double missing, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::bernoulli_distribution miss(missing);
  DenseTensor w(shape);
  for (auto& v : w.values()) v = miss(gen) ? 0.0 : 1.0;
  w[0] = 1.0;
  return w;
}

/// Calls fn(linear, subs) for every entry in storage order.
template <typename Fn>
void for_each_index(const Shape& shape, Fn&& fn) {
  std::vector<Index> subs(shape.order(), 0);
  for (std::uint64_t lin = 0; lin < shape.numel(); ++lin) {
    shape.unravel(lin, subs);
    fn(lin, subs);
  }
}

/// Model value at one index by the defining sum.
inline double model_entry(const KruskalModel& m, const std::vector<Index>& subs) {
  double total = 0.0;
  for (Index r = 0; r < m.rank(); ++r) {
    double prod = m.lambda[static_cast<Eigen::Index>(r)];
    for (Index n = 0; n < m.order(); ++n) {
      prod *= m.factors[n](static_cast<Eigen::Index>(subs[n]), static_cast<Eigen::Index>(r));
    }
    total += prod;
  }
  return total;
}

inline DenseTensor full_by_loop(const KruskalModel& m) {
  DenseTensor t(m.shape());
  for_each_index(t.shape(), [&](std::uint64_t lin, const std::vector<Index>& s) { t[lin] = model_entry(m, s); });
  return t;
}

/// MTTKRP by the defining sum, without weights.
inline Eigen::MatrixXd mttkrp_by_loop(const DenseTensor& t, const KruskalModel& m, Index mode) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m.factors[mode].rows(), m.factors[mode].cols());
  for_each_index(t.shape(), [&](std::uint64_t lin, const std::vector<Index>& s) {
    for (Index r = 0; r < m.rank(); ++r) {
      double prod = t[lin];
      for (Index n = 0; n < m.order(); ++n) {
        if (n != mode) prod *= m.factors[n](static_cast<Eigen::Index>(s[n]), static_cast<Eigen::Index>(r));
      }
      g(static_cast<Eigen::Index>(s[mode]), static_cast<Eigen::Index>(r)) += prod;
    }
  });
  return g;
}

inline double max_rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace testing_helpers
