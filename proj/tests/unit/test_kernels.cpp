#include <gtest/gtest.h>

#include "cpwopt/error.hpp"
#include "cpwopt/kernels.hpp"
#include "helpers.hpp"

using namespace cpwopt;
using namespace testing_helpers;

TEST(Kernels, InnerNormHadamard) {
  const Shape s{3, 2, 2};
  const DenseTensor x = random_tensor(s, 1), y = random_tensor(s, 2);
  double ip = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) ip += x[k] * y[k];
  EXPECT_NEAR(inner(x, y), ip, 1e-12);
  EXPECT_NEAR(norm(x) * norm(x), inner(x, x), 1e-12);
  const DenseTensor h = hadamard(x, y);
  EXPECT_DOUBLE_EQ(h[5], x[5] * y[5]);
  const DenseTensor w = random_mask(s, 0.5, 3);
  EXPECT_NEAR(weighted_norm(x, w), norm(hadamard(x, w)), 1e-14);
  EXPECT_THROW((void)inner(x, random_tensor(Shape{2, 3, 2}, 1)), ShapeError);
}

TEST(Kernels, KhatriRaoLastMatrixFastest) {
  Eigen::MatrixXd a(2, 2), b(3, 2);
  a << 1, 2, 3, 4;
  b << 5, 6, 7, 8, 9, 10;
  const Eigen::MatrixXd kr = khatri_rao(std::vector<FactorMatrix>{a, b});
  ASSERT_EQ(kr.rows(), 6);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      for (int r = 0; r < 2; ++r) EXPECT_EQ(kr(i * 3 + j, r), a(i, r) * b(j, r));
  const Eigen::MatrixXd empty = khatri_rao(std::span<const FactorMatrix* const>{}, 3);
  EXPECT_EQ(empty, Eigen::MatrixXd::Ones(1, 3));
}

TEST(Kernels, MatricizeFoldRoundTrip) {
  const Shape s{3, 4, 2, 2};
  const DenseTensor x = random_tensor(s, 7);
  for (Index n = 0; n < s.order(); ++n) {
    const Eigen::MatrixXd m = matricize(x, n);
    EXPECT_EQ(static_cast<Index>(m.rows()), s[n]);
    const DenseTensor back = fold(m, n, s);
    EXPECT_EQ(back.vec(), x.vec());
  }
}

TEST(Kernels, UnfoldingEqualsFactorTimesKhatriRao) {
  const Shape s{3, 4, 2};
  const KruskalModel m = random_model(s, 2, 11);
  const DenseTensor x = full_by_loop(m);
  for (Index n = 0; n < 3; ++n) {
    std::vector<FactorMatrix> rest;
    for (Index k = 3; k-- > 0;) {
      if (k != n) rest.push_back(m.factors[k]);
    }
    const Eigen::MatrixXd expect = m.factors[n] * khatri_rao(rest).transpose();
    EXPECT_LT(max_rel_diff(matricize(x, n), expect), 1e-13) << "mode " << n;
  }
}

TEST(Kernels, KtensorFullMatchesLoop) {
  for (unsigned seed = 0; seed < 5; ++seed) {
    const Shape s{3, 2, 4, 2};
    const KruskalModel m = random_model(s, 3, seed, true);
    EXPECT_LT((ktensor_full(m).vec() - full_by_loop(m).vec()).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_NEAR(ktensor_norm(m), norm(ktensor_full(m)), 1e-12 * norm(ktensor_full(m)));
  }
}

TEST(Kernels, ValuesAtMatchesFull) {
  const Shape s{5, 4, 3};
  const KruskalModel m = random_model(s, 3, 4, true);
  const DenseTensor full = ktensor_full(m);
  const SparseSamples pick = SparseSamples::from_dense(full, random_mask(s, 0.6, 9));
  const Eigen::VectorXd z = ktensor_values_at(m, pick.indices());
  EXPECT_LT((z - pick.values()).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Kernels, MttkrpDenseMatchesLoop) {
  const Shape s{4, 3, 5};
  const KruskalModel m = random_model(s, 3, 21, true);
  const DenseTensor t = random_tensor(s, 22);
  for (Index n = 0; n < 3; ++n) {
    EXPECT_LT(max_rel_diff(mttkrp_dense(t, m, n), mttkrp_by_loop(t, m, n)), 1e-13);
  }
}

TEST(Kernels, MttkrpSparseEqualsDenseOnMaskedTensor) {
  const Shape s{4, 3, 2, 3};
  const KruskalModel m = random_model(s, 2, 31);
  const DenseTensor t = random_tensor(s, 32);
  const DenseTensor w = random_mask(s, 0.5, 33);
  const SparseSamples samples = SparseSamples::from_dense(t, w);
  const DenseTensor masked = hadamard(t, w);
  for (Index n = 0; n < s.order(); ++n) {
    EXPECT_LT(max_rel_diff(mttkrp_sparse(samples, m, n), mttkrp_dense(masked, m, n)), 1e-13);
  }
}

TEST(Kernels, MttkrpSingleMode) {
  const Shape s{5};
  const KruskalModel m = random_model(s, 2, 1);
  const DenseTensor t = random_tensor(s, 2);
  // With no other modes the Khatri-Rao product is a row of ones.
  const Eigen::MatrixXd g = mttkrp_dense(t, m, 0);
  for (int r = 0; r < 2; ++r) EXPECT_LT((g.col(r) - t.vec()).norm(), 1e-14);
}

TEST(Kernels, NormalizeGivesUnitColumnsAndSameTensor) {
  const Shape s{4, 3, 5};
  const KruskalModel m = random_model(s, 3, 41, true);
  const NormalizedModel nm = normalize_model(m);
  for (const auto& a : nm.model.factors) {
    for (Eigen::Index r = 0; r < a.cols(); ++r) EXPECT_NEAR(a.col(r).norm(), 1.0, 1e-14);
  }
  EXPECT_TRUE((nm.model.lambda.array() > 0.0).all());
  EXPECT_LT((ktensor_full(nm.model).vec() - ktensor_full(m).vec()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(nm.zero_components.empty());
}

TEST(Kernels, NormalizeSignConvention) {
  // Make every column's largest entry negative: an odd mode count leaves the
  // weakest column negative, an even count flips everything.
  const Shape s3{4, 3, 5};
  KruskalModel m = random_model(s3, 1, 3);
  for (auto& a : m.factors) {
    Eigen::Index p = 0;
    a.col(0).cwiseAbs().maxCoeff(&p);
    if (a(p, 0) > 0) a.col(0) = -a.col(0);
  }
  const KruskalModel n3 = normalize_model(m).model;
  int negative = 0;
  for (const auto& a : n3.factors) {
    Eigen::Index p = 0;
    a.col(0).cwiseAbs().maxCoeff(&p);
    if (a(p, 0) < 0) ++negative;
  }
  EXPECT_EQ(negative, 1);
  EXPECT_LT((ktensor_full(n3).vec() - ktensor_full(m).vec()).norm(), 1e-12);
}

TEST(Kernels, NormalizeZeroComponent) {
  KruskalModel m = random_model(Shape{3, 3, 3}, 2, 5);
  m.factors[1].col(1).setZero();
  const NormalizedModel nm = normalize_model(m);
  ASSERT_EQ(nm.zero_components.size(), 1u);
  EXPECT_EQ(nm.zero_components[0], 1u);
  EXPECT_EQ(nm.model.lambda[1], 0.0);
  EXPECT_EQ(nm.model.factors[2](0, 1), 1.0);
}

TEST(Kernels, CenterIgnoringMissing) {
  const Shape s{3, 4};
  const DenseTensor x = random_tensor(s, 8);
  DenseTensor w = DenseTensor::constant(s, 1.0);
  w[1] = 0.0;
  w[5] = 0.0;
  const SparseSamples samples = SparseSamples::from_dense(x, w);
  const CenteredSamples c = center_ignore_missing(samples, 1);
  // Loop oracle: mean of known entries per column.
  for (Index j = 0; j < 4; ++j) {
    double sum = 0.0, cnt = 0.0;
    for (Index i = 0; i < 3; ++i) {
      if (w[i + 3 * j] != 0.0) {
        sum += x[i + 3 * j];
        cnt += 1.0;
      }
    }
    EXPECT_NEAR(c.means[static_cast<Eigen::Index>(j)], sum / cnt, 1e-14);
  }
  const CenteredSamples again = center_ignore_missing(c.samples, 1);
  EXPECT_LT(again.means.cwiseAbs().maxCoeff(), 1e-14);

  DenseTensor hole = DenseTensor::constant(s, 1.0);
  for (Index i = 0; i < 3; ++i) hole[i + 3 * 2] = 0.0;
  EXPECT_THROW(center_ignore_missing(SparseSamples::from_dense(x, hole), 1), ValueError);
}
