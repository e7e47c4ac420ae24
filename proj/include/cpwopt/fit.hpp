#pragma once

// Multi-start CP fitting of incomplete tensors by direct minimization of the
// weighted least-squares objective.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpwopt/objective.hpp"
#include "cpwopt/optimizer.hpp"
#include "cpwopt/tensor.hpp"

namespace cpwopt {

enum class Variant { dense, sparse };

struct FitConfig {
  Index rank = 1;
  int starts = 1;
  std::uint64_t seed = 0;
  OptConfig opt;

  void validate() const;
};

/// Outcome of one start. `model` is set (and normalized) only for
/// successful starts; failed starts carry an error description.
struct StartOutcome {
  int start = 0;
  OptResult result;
  std::optional<KruskalModel> model;
  std::string error;
  [[nodiscard]] bool ok() const noexcept { return model.has_value(); }
};

struct FitResult {
  KruskalModel best;  // normalized
  int best_start = 0;
  std::vector<StartOutcome> starts;
};

/// Number of optimization variables R * sum_n I_n.
[[nodiscard]] Index variable_count(const Shape& shape, Index rank);
/// Concatenation of the column-major factor matrices (weights ignored).
[[nodiscard]] Eigen::VectorXd flatten_factors(const KruskalModel& model);
/// Inverse of flatten_factors, with unit weights.
[[nodiscard]] KruskalModel unflatten_factors(const Eigen::VectorXd& x, const Shape& shape,
                                             Index rank);

/// Minimizes the objective from a single starting point. Weights of `init`
/// are folded into the first factor; during the run all weights are one.
/// The returned model is NOT normalized.
[[nodiscard]] std::pair<KruskalModel, OptResult> minimize_from(Objective& objective,
                                                               const KruskalModel& init,
                                                               const OptConfig& opt);

/// Runs every starting point in order and keeps the start with the lowest
/// final f. Starts that end in a line-search breakdown or non-finite values
/// are recorded and discarded; throws NumericalError if all starts fail.
[[nodiscard]] FitResult fit_cpwopt(Objective& objective, std::span<const KruskalModel> inits,
                                   const OptConfig& opt);

/// Convenience drivers: starting points from initial_guesses (start 1 from
/// the n-mode singular vectors of the zero-filled data, then seeded random).
[[nodiscard]] FitResult fit_cpwopt(const DenseTensor& x, const DenseTensor& w,
                                   const FitConfig& cfg);
[[nodiscard]] FitResult fit_cpwopt(const SparseSamples& s, const FitConfig& cfg);

/// Shared selection logic for multi-start drivers: index of the lowest-f
/// successful start; throws NumericalError if there is none.
[[nodiscard]] std::size_t select_best(std::span<const StartOutcome> starts);

}  // namespace cpwopt
