#pragma once

// Synthetic experiment sweeps: for every (size, missing fraction, instance)
// generate a problem, run each method from one shared list of starting
// points, score every start against the truth and aggregate per cell.

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "cpwopt/datagen.hpp"
#include "cpwopt/em_als.hpp"
#include "cpwopt/optimizer.hpp"

namespace cpwopt {

enum class Method { cpwopt_dense, cpwopt_sparse, em_als };
[[nodiscard]] std::string_view to_string(Method m) noexcept;
[[nodiscard]] Method method_from_string(std::string_view s);

struct ExperimentSpec {
  std::vector<Shape> sizes;
  Index rank = 5;
  std::vector<double> missing;
  MissingPattern pattern = MissingPattern::entries;
  double noise = 0.1;
  int instances = 30;
  int starts = 5;
  std::vector<Method> methods;
  std::uint64_t seed = 0;
  OptConfig opt;
  /// The rank field is ignored; `rank` above is used.
  EmAlsConfig em;

  void validate() const;
};

/// Seed of one instance. It depends on the size and instance number but not
/// on the missing fraction, so every cell of a size shares truth and noise.
[[nodiscard]] std::uint64_t instance_seed(std::uint64_t base, std::size_t size_index,
                                          int instance) noexcept;

struct RunRecord {
  std::string size;  // "50x40x30"
  double missing = 0.0;
  int instance = 0;
  Method method = Method::cpwopt_dense;
  int start = 0;
  bool ok = false;
  double f = 0.0;
  StopReason stop_reason = StopReason::max_iters;
  int iterations = 0;
  int fevals = 0;
  double seconds = 0.0;
  double fms = 0.0;             // 0 for failed starts
  double cumulative_fms = 0.0;  // best FMS over starts 0..start
  double selected_fms = 0.0;    // FMS of the lowest-f start among 0..start
  std::string error;
};

struct Quartiles {
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
};
/// Linearly interpolated sample quartiles. Throws ValueError on empty input.
[[nodiscard]] Quartiles quartiles(std::vector<double> values);

struct CellSummary {
  std::string size;
  double missing = 0.0;
  Method method = Method::cpwopt_dense;
  int instances = 0;
  /// Entry k summarizes cumulative-best FMS after k+1 starts.
  std::vector<Quartiles> cumulative_fms;
  /// Per-instance wall time summed over all starts.
  Quartiles seconds;
  int failed_starts = 0;
  int converged_starts = 0;  // stopped on f_tol or g_tol
  int total_starts = 0;
};

struct ExperimentReport {
  std::vector<RunRecord> records;
  std::vector<CellSummary> cells;
};

using ProgressFn = std::function<void(const std::string&)>;

[[nodiscard]] ExperimentReport run_experiment(const ExperimentSpec& spec,
                                              const ProgressFn& progress = {});

/// Aggregates records into cells, in order of first appearance. A pure
/// function of the records.
[[nodiscard]] std::vector<CellSummary> summarize(const std::vector<RunRecord>& records);

[[nodiscard]] std::string records_to_jsonl(const std::vector<RunRecord>& records);
[[nodiscard]] std::vector<RunRecord> records_from_jsonl(const std::string& text);
[[nodiscard]] std::string summary_to_json(const std::vector<CellSummary>& cells);
[[nodiscard]] std::string summary_table(const std::vector<CellSummary>& cells);

[[nodiscard]] std::string spec_to_json(const ExperimentSpec& spec);
[[nodiscard]] ExperimentSpec spec_from_json(const std::string& text);

}  // namespace cpwopt
