#pragma once

// Core tensor containers.
//
// Layout conventions used throughout the library:
//   * modes are 0-based in the C++ API (files and the CLI use 1-based);
//   * dense values are linearized with mode 0 varying fastest, so
//     linear = i_0 + I_0*(i_1 + I_1*(i_2 + ...)) (column-major);
//   * sparse index sets are sorted by that same linear order, i.e.
//     lexicographically with the last mode slowest.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cpwopt {

using Index = std::size_t;
using FactorMatrix = Eigen::MatrixXd;

class Shape {
 public:
  Shape() = default;
  explicit Shape(std::vector<Index> dims);
  Shape(std::initializer_list<Index> dims) : Shape(std::vector<Index>(dims)) {}

  [[nodiscard]] Index order() const noexcept { return dims_.size(); }
  [[nodiscard]] Index operator[](Index mode) const { return dims_.at(mode); }
  [[nodiscard]] const std::vector<Index>& dims() const noexcept { return dims_; }

  /// Product of all extents. Throws ShapeError on 64-bit overflow.
  [[nodiscard]] std::uint64_t numel() const;
  [[nodiscard]] Index extent_sum() const noexcept;
  /// Product of the extents of modes strictly before / after `mode`.
  [[nodiscard]] std::uint64_t left_size(Index mode) const;
  [[nodiscard]] std::uint64_t right_size(Index mode) const;

  [[nodiscard]] std::uint64_t linear_index(std::span<const Index> subs) const;
  void unravel(std::uint64_t linear, std::span<Index> subs) const;

  [[nodiscard]] std::string to_string() const;  // "50x40x30"

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<Index> dims_;
};

/// Throws ShapeError if `mode` is not a valid mode of `shape`.
void check_mode(const Shape& shape, Index mode);

class DenseTensor {
 public:
  DenseTensor() = default;
  /// Zero-filled tensor.
  explicit DenseTensor(Shape shape);
  DenseTensor(Shape shape, std::vector<double> values);

  static DenseTensor constant(const Shape& shape, double value);

  [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

  [[nodiscard]] std::span<double> values() noexcept { return values_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] double* data() noexcept { return values_.data(); }
  [[nodiscard]] const double* data() const noexcept { return values_.data(); }

  [[nodiscard]] double& operator[](std::size_t linear) { return values_[linear]; }
  [[nodiscard]] double operator[](std::size_t linear) const { return values_[linear]; }
  [[nodiscard]] double& at(std::span<const Index> subs);
  [[nodiscard]] double at(std::span<const Index> subs) const;

  [[nodiscard]] Eigen::Map<Eigen::VectorXd> vec() {
    return {values_.data(), static_cast<Eigen::Index>(values_.size())};
  }
  [[nodiscard]] Eigen::Map<const Eigen::VectorXd> vec() const {
    return {values_.data(), static_cast<Eigen::Index>(values_.size())};
  }

  /// True when every entry is exactly 0 or 1.
  [[nodiscard]] bool is_binary() const noexcept;
  [[nodiscard]] bool all_finite() const noexcept;

 private:
  Shape shape_;
  std::vector<double> values_;
};

/// A list of index tuples stored mode-major (one contiguous coordinate
/// array per mode). Entries are bounds-checked on construction but no
/// ordering is imposed.
class IndexList {
 public:
  using Coord = std::uint32_t;

  IndexList() = default;
  IndexList(Shape shape, std::vector<std::vector<Coord>> coords);

  [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t size() const noexcept {
    return coords_.empty() ? 0 : coords_.front().size();
  }
  [[nodiscard]] std::span<const Coord> mode(Index n) const { return coords_.at(n); }
  [[nodiscard]] Index at(std::size_t q, Index n) const { return coords_[n][q]; }
  [[nodiscard]] std::uint64_t linear_index(std::size_t q) const;
  [[nodiscard]] bool is_strictly_sorted() const;

 private:
  Shape shape_;
  std::vector<std::vector<Coord>> coords_;
};

/// Known entries of a partially observed tensor. The set of stored indices
/// plays the role of the binary weight tensor: an entry is observed exactly
/// when its index is present.
///
/// Invariants: Q >= 1, indices strictly sorted (see file comment), every value
/// finite.
class SparseSamples {
 public:
  SparseSamples() = default;
  /// Validates the invariants; throws IndexError/ValueError.
  SparseSamples(IndexList indices, Eigen::VectorXd values);

  /// Sorts the entries into canonical order. Duplicate indices are an error.
  static SparseSamples from_unsorted(IndexList indices, Eigen::VectorXd values);
  /// Every entry of `tensor` where `mask` is nonzero.
  static SparseSamples from_dense(const DenseTensor& tensor, const DenseTensor& mask);
  /// Every entry of `tensor`.
  static SparseSamples from_dense(const DenseTensor& tensor);

  [[nodiscard]] const Shape& shape() const noexcept { return indices_.shape(); }
  [[nodiscard]] std::size_t size() const noexcept { return indices_.size(); }
  [[nodiscard]] const IndexList& indices() const noexcept { return indices_; }
  [[nodiscard]] const Eigen::VectorXd& values() const noexcept { return values_; }

  /// Same index set, new values (length must match).
  [[nodiscard]] SparseSamples with_values(Eigen::VectorXd values) const;

  /// Zero-filled dense tensor holding the known values.
  [[nodiscard]] DenseTensor densify() const;
  /// Binary mask with ones at the known indices.
  [[nodiscard]] DenseTensor mask() const;

 private:
  IndexList indices_;
  Eigen::VectorXd values_;
};

/// CP model sum_r lambda_r a^(0)_r o a^(1)_r o ... o a^(N-1)_r.
struct KruskalModel {
  std::vector<FactorMatrix> factors;
  Eigen::VectorXd lambda;

  KruskalModel() = default;
  /// Unit weights.
  explicit KruskalModel(std::vector<FactorMatrix> factors_);
  KruskalModel(std::vector<FactorMatrix> factors_, Eigen::VectorXd lambda_);

  static KruskalModel zeros(const Shape& shape, Index rank);

  [[nodiscard]] Index order() const noexcept { return factors.size(); }
  [[nodiscard]] Index rank() const noexcept { return static_cast<Index>(lambda.size()); }
  [[nodiscard]] Shape shape() const;

  /// Throws ShapeError/ValueError if ranks disagree or entries are not finite.
  void validate() const;
  /// Throws ShapeError unless the model's shape equals `shape`.
  void check_shape(const Shape& shape) const;
};

}  // namespace cpwopt
