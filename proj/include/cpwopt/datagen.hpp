#pragma once

// Synthetic problem generation and initial guesses.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "cpwopt/rng.hpp"
#include "cpwopt/tensor.hpp"

namespace cpwopt {

/// Factors with i.i.d. N(0,1) entries, every column scaled to unit length,
/// lambda = 1.
[[nodiscard]] KruskalModel gen_factors(const Shape& shape, Index rank, std::uint64_t seed);

/// X = Y + eta (||Y|| / ||N||) N with N i.i.d. N(0,1) on the full grid, so
/// that ||X - Y|| / ||Y|| = eta. Throws ValueError for eta < 0, or eta > 0
/// with ||Y|| = 0.
[[nodiscard]] DenseTensor add_noise(const DenseTensor& y, double eta, std::uint64_t seed);
/// Sparse variant: noise only on the known entries, norms over the known
/// entries of the clean data.
[[nodiscard]] SparseSamples add_noise(const SparseSamples& y, double eta, std::uint64_t seed);

/// floor(fraction * total), robust to the fraction not being exactly
/// representable (0.95 * 60000 is 57000, not 56999).
[[nodiscard]] std::uint64_t fraction_count(std::uint64_t total, double fraction);

/// Uniformly random subset of {0..total-1} of the given size, sorted.
/// Uses O(count) memory when count <= total / 2.
[[nodiscard]] std::vector<std::uint64_t> sample_subset(std::uint64_t total, std::uint64_t count,
                                                       Engine& engine);

/// Every slice (in every mode) holds at least one known entry.
[[nodiscard]] bool slices_covered(const DenseTensor& mask);
[[nodiscard]] bool slices_covered(const IndexList& known);

/// Binary mask with exactly floor(M * prod I_n) zeros placed uniformly at
/// random, resampled (up to 100 times) until every slice has a known entry.
/// Throws InfeasibleError if no such mask can be found, ValueError unless
/// 0 <= M < 1.
[[nodiscard]] DenseTensor gen_missing_random(const Shape& shape, double missing,
                                             std::uint64_t seed);
/// Same distribution, returned as the sorted known index set without any
/// storage proportional to prod I_n.
[[nodiscard]] IndexList gen_known_random(const Shape& shape, double missing, std::uint64_t seed);

/// Missing mode-3 fibers: a 2-D pattern over modes 1 and 2 with exactly
/// floor(M * I * J) zeros and no all-zero row or column, replicated along
/// mode 3. Requires a 3-way shape.
[[nodiscard]] DenseTensor gen_missing_fibers(const Shape& shape, double missing, std::uint64_t seed);

enum class MissingPattern { entries, fibers };
[[nodiscard]] std::string_view to_string(MissingPattern p) noexcept;
[[nodiscard]] MissingPattern missing_pattern_from_string(std::string_view s);

struct InstanceSpec {
  Shape shape;
  Index rank = 1;
  double noise = 0.0;    // eta
  double missing = 0.0;  // M
  MissingPattern pattern = MissingPattern::entries;
  std::uint64_t seed = 0;
};

struct ProblemInstance {
  InstanceSpec spec;
  KruskalModel truth;
  /// Known entries of the noisy data.
  SparseSamples observed;
  /// Dense instances only: the complete noisy tensor and the binary mask.
  std::optional<DenseTensor> full_data;
  std::optional<DenseTensor> mask;
};

/// Dense generation: truth, full noisy tensor, then the mask. The truth and
/// noise depend only on (shape, rank, noise, seed).
[[nodiscard]] ProblemInstance generate_instance(const InstanceSpec& spec);

/// Large-scale generation: (1-M) prod I_n distinct random indices, truth
/// evaluated only there, noise only there. Never forms a dense tensor.
[[nodiscard]] ProblemInstance gen_large_sparse(const Shape& shape, double missing, Index rank,
                                               double noise, std::uint64_t seed);

/// I.i.d. N(0,1) factors, lambda = 1.
[[nodiscard]] KruskalModel init_random(const Shape& shape, Index rank, std::uint64_t seed,
                                       std::uint64_t start = 0);

/// Leading left singular vectors of each unfolding of the zero-filled data
/// (Gram matrix eigenvectors). Columns beyond the numerical rank, or beyond
/// I_n, are seeded random unit vectors. Each column's largest-magnitude entry
/// is made positive.
[[nodiscard]] KruskalModel init_nvecs(const DenseTensor& zero_filled, Index rank,
                                      std::uint64_t seed);
/// Sparse variant using block subspace iteration on the Gram operator
/// X_(n) X_(n)^T applied in O(Q) per vector.
[[nodiscard]] KruskalModel init_nvecs(const SparseSamples& samples, Index rank,
                                      std::uint64_t seed);

/// Scales every factor by the same factor so that ||[[model]]|| equals
/// `target`. Models or targets of zero norm are returned unchanged.
[[nodiscard]] KruskalModel match_norm(const KruskalModel& model, double target);

/// Norm the complete data would have if the missing entries behaved like
/// the known ones: ||known values|| * sqrt(prod I_n / Q).
[[nodiscard]] double extrapolated_norm(const SparseSamples& samples);
[[nodiscard]] double extrapolated_norm(const DenseTensor& zero_filled, const DenseTensor& w);

/// Start 0 from n-mode singular vectors, starts 1.. from init_random. Every
/// start is then passed through match_norm with the extrapolated data norm,
/// so that no start begins orders of magnitude away from the data scale.
[[nodiscard]] std::vector<KruskalModel> initial_guesses(const DenseTensor& zero_filled,
                                                        const DenseTensor& w, Index rank,
                                                        int starts, std::uint64_t seed);
[[nodiscard]] std::vector<KruskalModel> initial_guesses(const SparseSamples& samples, Index rank,
                                                        int starts, std::uint64_t seed);

}  // namespace cpwopt
