#pragma once

// EM-ALS baseline: impute the missing entries from the current model, then
// do one sweep of alternating least squares on the completed tensor.
// Dense only.

#include <cstdint>
#include <span>

#include "cpwopt/fit.hpp"
#include "cpwopt/optimizer.hpp"
#include "cpwopt/tensor.hpp"

namespace cpwopt {

struct EmAlsConfig {
  Index rank = 1;
  int max_iters = 10000;
  double rel_f_tol = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// W*X + (1-W)*[[M]].
[[nodiscard]] DenseTensor impute(const DenseTensor& x, const DenseTensor& w,
                                 const KruskalModel& model);

/// One ALS pass over the modes in order. Each factor solves its
/// least-squares subproblem through the pseudo-inverse of the Hadamard
/// product of the other modes' Gram matrices. Weights are folded into the
/// first factor beforehand; the result has unit weights.
[[nodiscard]] KruskalModel als_sweep(const DenseTensor& xbar, const KruskalModel& model);

/// Runs {impute; als_sweep} from `init` until the relative change of the
/// known-entry objective drops to rel_f_tol or max_iters sweeps are done.
/// The returned model is normalized. `fevals` counts sweeps.
[[nodiscard]] std::pair<KruskalModel, OptResult> em_als_fit(const DenseTensor& x,
                                                            const DenseTensor& w,
                                                            const EmAlsConfig& cfg,
                                                            const KruskalModel& init);

/// Multi-start wrapper; the start with the lowest final objective wins.
[[nodiscard]] FitResult em_als_multistart(const DenseTensor& x, const DenseTensor& w,
                                          const EmAlsConfig& cfg,
                                          std::span<const KruskalModel> inits);

}  // namespace cpwopt
