#pragma once

// Text file formats.
//
// Tensor files:
//   ndims N
//   dims I_1 ... I_N
//   i_1 ... i_N value        (one line per known entry, 1-based indices)
// or, for a complete tensor,
//   ndims N
//   dims I_1 ... I_N
//   dense
//   value                    (prod I_n values, first mode fastest)
// Blank lines and lines starting with '#' are ignored. Coordinate entries
// may appear in any order; duplicates are an error.
//
// Model files are JSON:
//   {"format": "cpwopt-model", "version": 1, "shape": [...], "rank": R,
//    "lambda": [...], "factors": [[[row of A^(1)], ...], ...]}

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cpwopt/tensor.hpp"

namespace cpwopt {

/// Contents of a tensor file: exactly one of `samples` or `dense` is set.
struct TensorFile {
  Shape shape;
  std::optional<SparseSamples> samples;
  std::optional<DenseTensor> dense;

  /// Known entries, converting a dense file to a complete sample set.
  [[nodiscard]] SparseSamples known() const;
};

[[nodiscard]] TensorFile read_tensor(std::istream& in);
[[nodiscard]] TensorFile read_tensor_file(const std::filesystem::path& path);

void write_coordinate(std::ostream& out, const SparseSamples& samples);
void write_dense(std::ostream& out, const DenseTensor& tensor);
void write_coordinate_file(const std::filesystem::path& path, const SparseSamples& samples);
void write_dense_file(const std::filesystem::path& path, const DenseTensor& tensor);

/// Index requests for completion: one line of N 1-based indices per entry,
/// checked against `shape`. Entries keep the file order.
[[nodiscard]] std::vector<std::vector<Index>> read_index_requests(std::istream& in,
                                                                  const Shape& shape);

[[nodiscard]] std::string model_to_json(const KruskalModel& model);
[[nodiscard]] KruskalModel model_from_json(const std::string& text);
void write_model_file(const std::filesystem::path& path, const KruskalModel& model);
[[nodiscard]] KruskalModel read_model_file(const std::filesystem::path& path);

/// Writes `text` to `path` through a temporary file and a rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);

}  // namespace cpwopt
