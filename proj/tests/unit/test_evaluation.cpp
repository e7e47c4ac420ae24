#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "cpwopt/datagen.hpp"
#include "cpwopt/error.hpp"
#include "cpwopt/evaluation.hpp"
#include "cpwopt/kernels.hpp"
#include "helpers.hpp"

using namespace cpwopt;
using namespace testing_helpers;

namespace {

KruskalModel permute_and_flip(const KruskalModel& m, const std::vector<Index>& perm, unsigned seed) {
  std::mt19937 gen(seed);
  KruskalModel out = m;
  for (Index n = 0; n < m.order(); ++n) {
    for (Index r = 0; r < perm.size(); ++r) {
      out.factors[n].col(static_cast<Eigen::Index>(r)) = m.factors[n].col(static_cast<Eigen::Index>(perm[r]));
    }
  }
  for (Index r = 0; r < perm.size(); ++r) out.lambda[static_cast<Eigen::Index>(r)] = m.lambda[static_cast<Eigen::Index>(perm[r])];
  // Flip signs in pairs of modes.
  for (Index r = 0; r < perm.size(); ++r) {
    if (gen() % 2) {
      const Index a = gen() % m.order();
      Index b = gen() % m.order();
      if (b == a) b = (a + 1) % m.order();
      out.factors[a].col(static_cast<Eigen::Index>(r)) *= -1.0;
      out.factors[b].col(static_cast<Eigen::Index>(r)) *= -1.0;
    }
  }
  return out;
}

}  // namespace

TEST(Fms, IdentityScoresOne) {
  const KruskalModel m = random_model(Shape{6, 5, 4}, 3, 1, true);
  const ScoreReport rep = fms(m, m);
  EXPECT_NEAR(rep.fms, 1.0, 1e-12);
  EXPECT_EQ(rep.permutation, (std::vector<Index>{0, 1, 2}));
}

TEST(Fms, HandCaseWithKnownCongruences) {
  // Per-mode congruences 0.9 for component 1 and 0.8 for component 2, and
  // zero across components.
  std::vector<FactorMatrix> t, c;
  for (int n = 0; n < 3; ++n) {
    FactorMatrix a = FactorMatrix::Zero(4, 2), b = FactorMatrix::Zero(4, 2);
    a(0, 0) = 1;
    a(1, 1) = 1;
    b(0, 0) = 0.9;
    b(2, 0) = std::sqrt(1 - 0.81);
    b(1, 1) = 0.8;
    b(3, 1) = 0.6;
    t.push_back(a);
    c.push_back(b);
  }
  const KruskalModel truth(t), computed(c);
  EXPECT_NEAR(fms(truth, computed).fms, 0.6205, 1e-12);
  EXPECT_NEAR(fms_exhaustive(truth, computed).fms, 0.6205, 1e-12);
  const KruskalModel swapped = permute_and_flip(computed, {1, 0}, 3);
  const ScoreReport rep = fms(truth, swapped);
  EXPECT_NEAR(rep.fms, 0.6205, 1e-12);
  EXPECT_EQ(rep.permutation, (std::vector<Index>{1, 0}));
  ASSERT_EQ(rep.congruences.size(), 2u);
  EXPECT_NEAR(rep.congruences[0], 0.729, 1e-12);
}

TEST(Fms, WeightMismatchPenalized) {
  KruskalModel m = random_model(Shape{4, 4, 4}, 1, 2);
  KruskalModel doubled = m;
  doubled.lambda *= 2.0;
  EXPECT_NEAR(fms(m, doubled).fms, 0.5, 1e-12);
}

TEST(Fms, PermutationAndSignInvariance) {
  for (unsigned trial = 0; trial < 200; ++trial) {
    const Index r = 1 + trial % 5;
    const KruskalModel m = random_model(Shape{7, 6, 5}, r, trial, true);
    std::vector<Index> perm(r);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), std::mt19937(trial));
    EXPECT_NEAR(fms(m, permute_and_flip(m, perm, trial)).fms, 1.0, 1e-12);
  }
}

TEST(Fms, AssignmentEqualsExhaustive) {
  for (unsigned trial = 0; trial < 300; ++trial) {
    const Index r = 1 + trial % 6;
    const Index rbar = r + trial % 3;
    const KruskalModel a = random_model(Shape{5, 4, 3}, r, trial, true);
    const KruskalModel b = random_model(Shape{5, 4, 3}, std::min<Index>(rbar, 6), trial + 1000, true);
    EXPECT_NEAR(fms(a, b).fms, fms_exhaustive(a, b).fms, 1e-14) << "trial " << trial;
  }
}

TEST(Fms, PadsWhenComputedHasFewerComponents) {
  const KruskalModel truth = random_model(Shape{5, 4, 3}, 3, 4);
  KruskalModel two = truth;
  for (auto& a : two.factors) a = a.leftCols(2).eval();
  two.lambda = truth.lambda.head(2);
  const ScoreReport rep = fms(truth, two);
  EXPECT_EQ(rep.permutation.size(), 3u);
  EXPECT_GT(rep.fms, 0.0);
  EXPECT_LE(rep.fms, 2.0 / 3.0 + 1e-12);
}

TEST(Fms, BoundsAndErrors) {
  for (unsigned trial = 0; trial < 50; ++trial) {
    const double v = fms(random_model(Shape{3, 3, 3}, 2, trial), random_model(Shape{3, 3, 3}, 3, trial + 7)).fms;
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_THROW((void)fms(random_model(Shape{3, 3, 3}, 2, 1), random_model(Shape{3, 4, 3}, 2, 1)), ShapeError);
  EXPECT_THROW((void)fms(random_model(Shape{3, 3, 3}, 2, 1), random_model(Shape{3, 3}, 2, 1)), ShapeError);
}

TEST(Assignment, SmallKnownCase) {
  Eigen::MatrixXd s(2, 3);
  s << 0.1, 0.9, 0.5,  //
      0.2, 0.95, 0.1;
  // Best: row0->col2 (0.5) + row1->col1 (0.95) = 1.45 vs 0.9 + 0.2.
  EXPECT_EQ(max_assignment(s), (std::vector<Index>{2, 1}));
  EXPECT_THROW((void)max_assignment(s.transpose()), ShapeError);
}

TEST(Tcs, ZeroModelAndExactModel) {
  const InstanceSpec spec{Shape{8, 7, 6}, 2, 0.0, 0.5, MissingPattern::entries, 3};
  const ProblemInstance inst = generate_instance(spec);
  EXPECT_NEAR(tcs(*inst.full_data, *inst.mask, KruskalModel::zeros(spec.shape, 2)), 1.0, 1e-14);
  EXPECT_LT(tcs(*inst.full_data, *inst.mask, inst.truth), 1e-14);
}

TEST(Tcs, MatchesLoopAndHoldoutVariant) {
  const Shape s{5, 4, 3};
  const DenseTensor x = random_tensor(s, 1);
  const DenseTensor w = random_mask(s, 0.4, 2);
  const KruskalModel m = random_model(s, 2, 3);
  const DenseTensor z = full_by_loop(m);
  double num = 0, den = 0;
  DenseTensor missing(s);
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (w[k] == 0.0) {
      num += (x[k] - z[k]) * (x[k] - z[k]);
      den += x[k] * x[k];
      missing[k] = 1.0;
    }
  }
  EXPECT_NEAR(tcs(x, w, m), std::sqrt(num / den), 1e-13);
  EXPECT_NEAR(tcs(SparseSamples::from_dense(x, missing), m), std::sqrt(num / den), 1e-13);
  EXPECT_THROW((void)tcs(x, DenseTensor::constant(s, 1.0), m), ValueError);
  EXPECT_THROW((void)tcs(DenseTensor(s), w, m), ValueError);
}

TEST(Rho, KnownValues) {
  EXPECT_NEAR(rho(Shape{50, 40, 30}, 5, 0.95), 3000.0 / 596.0, 1e-12);
  EXPECT_NEAR(rho(Shape{50, 40, 30}, 5, 0.95), 5.03, 0.01);
  EXPECT_NEAR(rho(Shape{100, 80, 60}, 5, 0.95), 24000.0 / 1196.0, 1e-9);
  EXPECT_NEAR(rho(Shape{2, 2, 2}, 1, 0.0), 8.0 / 6.0, 1e-14);
  EXPECT_THROW((void)rho(Shape{2, 2, 2}, 1, 1.0), ValueError);
}

TEST(Rho, GeneralOrderDenominator) {
  // R (sum I - N + 2) + 1 for a 4-way shape.
  EXPECT_NEAR(rho(Shape{4, 3, 2, 2}, 2, 0.5), 0.5 * 48 / (2.0 * (11 - 4 + 2) + 1), 1e-14);
}
