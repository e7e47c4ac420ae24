#include "cpwopt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "cpwopt/error.hpp"

namespace cpwopt {

namespace {

std::uint64_t checked_product(std::span<const Index> dims) {
  std::uint64_t prod = 1;
  for (Index d : dims) {
    if (d != 0 && prod > std::numeric_limits<std::uint64_t>::max() / d) {
      throw ShapeError("tensor size overflows 64-bit index space");
    }
    prod *= d;
  }
  return prod;
}

}  // namespace

Shape::Shape(std::vector<Index> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw ShapeError("shape must have at least one mode");
  for (Index d : dims_) {
    if (d == 0) throw ShapeError("shape extents must be positive");
  }
}

std::uint64_t Shape::numel() const { return checked_product(dims_); }

Index Shape::extent_sum() const noexcept {
  return std::accumulate(dims_.begin(), dims_.end(), Index{0});
}

std::uint64_t Shape::left_size(Index mode) const {
  check_mode(*this, mode);
  return checked_product(std::span(dims_).first(mode));
}

std::uint64_t Shape::right_size(Index mode) const {
  check_mode(*this, mode);
  return checked_product(std::span(dims_).subspan(mode + 1));
}

std::uint64_t Shape::linear_index(std::span<const Index> subs) const {
  if (subs.size() != dims_.size()) throw ShapeError("index tuple has wrong length");
  std::uint64_t lin = 0;
  for (Index n = dims_.size(); n-- > 0;) {
    if (subs[n] >= dims_[n]) throw IndexError("index out of range in mode " + std::to_string(n));
    lin = lin * dims_[n] + subs[n];
  }
  return lin;
}

void Shape::unravel(std::uint64_t linear, std::span<Index> subs) const {
  if (subs.size() != dims_.size()) throw ShapeError("index tuple has wrong length");
  for (Index n = 0; n < dims_.size(); ++n) {
    subs[n] = static_cast<Index>(linear % dims_[n]);
    linear /= dims_[n];
  }
  if (linear != 0) throw IndexError("linear index out of range");
}

std::string Shape::to_string() const {
  std::ostringstream os;
  for (Index n = 0; n < dims_.size(); ++n) os << (n ? "x" : "") << dims_[n];
  return os.str();
}

void check_mode(const Shape& shape, Index mode) {
  if (mode >= shape.order()) {
    throw ShapeError("mode " + std::to_string(mode) + " out of range for order-" +
                     std::to_string(shape.order()) + " tensor");
  }
}

// ---------------------------------------------------------------------------

DenseTensor::DenseTensor(Shape shape)
    : shape_(std::move(shape)), values_(static_cast<std::size_t>(shape_.numel()), 0.0) {}

DenseTensor::DenseTensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_.numel()) {
    throw ShapeError("value count " + std::to_string(values_.size()) + " does not match shape " +
                     shape_.to_string());
  }
}

DenseTensor DenseTensor::constant(const Shape& shape, double value) {
  return DenseTensor(shape, std::vector<double>(static_cast<std::size_t>(shape.numel()), value));
}

double& DenseTensor::at(std::span<const Index> subs) { return values_[shape_.linear_index(subs)]; }

double DenseTensor::at(std::span<const Index> subs) const {
  return values_[shape_.linear_index(subs)];
}

bool DenseTensor::is_binary() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double w) { return w == 0.0 || w == 1.0; });
}

bool DenseTensor::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------

IndexList::IndexList(Shape shape, std::vector<std::vector<Coord>> coords)
    : shape_(std::move(shape)), coords_(std::move(coords)) {
  if (coords_.size() != shape_.order()) throw ShapeError("index list has wrong number of modes");
  const std::size_t q = coords_.front().size();
  for (Index n = 0; n < coords_.size(); ++n) {
    if (coords_[n].size() != q) throw ShapeError("index list modes have unequal lengths");
    const auto extent = shape_[n];
    for (Coord c : coords_[n]) {
      if (c >= extent) {
        throw IndexError("index " + std::to_string(c + 1) + " out of range in mode " +
                         std::to_string(n + 1) + " (extent " + std::to_string(extent) + ")");
      }
    }
  }
}

std::uint64_t IndexList::linear_index(std::size_t q) const {
  std::uint64_t lin = 0;
  for (Index n = coords_.size(); n-- > 0;) lin = lin * shape_[n] + coords_[n][q];
  return lin;
}

bool IndexList::is_strictly_sorted() const {
  const std::size_t q = size();
  for (std::size_t k = 1; k < q; ++k) {
    // Compare with the last mode most significant.
    bool less = false;
    for (Index n = coords_.size(); n-- > 0;) {
      if (coords_[n][k - 1] != coords_[n][k]) {
        less = coords_[n][k - 1] < coords_[n][k];
        break;
      }
    }
    if (!less) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

SparseSamples::SparseSamples(IndexList indices, Eigen::VectorXd values)
    : indices_(std::move(indices)), values_(std::move(values)) {
  if (indices_.size() == 0) throw ValueError("sparse samples need at least one known entry");
  if (static_cast<std::size_t>(values_.size()) != indices_.size()) {
    throw ShapeError("value count does not match index count");
  }
  if (!values_.allFinite()) throw ValueError("sparse sample values must be finite");
  if (!indices_.is_strictly_sorted()) {
    throw IndexError("sparse indices must be strictly sorted without duplicates");
  }
}

SparseSamples SparseSamples::from_unsorted(IndexList indices, Eigen::VectorXd values) {
  const std::size_t q = indices.size();
  if (static_cast<std::size_t>(values.size()) != q) {
    throw ShapeError("value count does not match index count");
  }
  const Index order = indices.shape().order();
  std::vector<std::size_t> perm(q);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto less = [&](std::size_t a, std::size_t b) {
    for (Index n = order; n-- > 0;) {
      const auto ca = indices.at(a, n), cb = indices.at(b, n);
      if (ca != cb) return ca < cb;
    }
    return false;
  };
  std::sort(perm.begin(), perm.end(), less);
  for (std::size_t k = 1; k < q; ++k) {
    if (!less(perm[k - 1], perm[k])) throw IndexError("duplicate index in sparse samples");
  }
  std::vector<std::vector<IndexList::Coord>> coords(order, std::vector<IndexList::Coord>(q));
  Eigen::VectorXd sorted(static_cast<Eigen::Index>(q));
  for (std::size_t k = 0; k < q; ++k) {
    for (Index n = 0; n < order; ++n) coords[n][k] = indices.mode(n)[perm[k]];
    sorted[static_cast<Eigen::Index>(k)] = values[static_cast<Eigen::Index>(perm[k])];
  }
  return {IndexList(indices.shape(), std::move(coords)), std::move(sorted)};
}

SparseSamples SparseSamples::from_dense(const DenseTensor& tensor, const DenseTensor& mask) {
  if (!(tensor.shape() == mask.shape())) throw ShapeError("tensor and mask shapes differ");
  const Shape& shape = tensor.shape();
  const Index order = shape.order();
  std::vector<std::vector<IndexList::Coord>> coords(order);
  std::vector<double> vals;
  std::vector<Index> subs(order, 0);
  // Walking linear indices in increasing order yields canonical order.
  for (std::size_t lin = 0; lin < tensor.size(); ++lin) {
    if (mask[lin] != 0.0) {
      for (Index n = 0; n < order; ++n) coords[n].push_back(static_cast<IndexList::Coord>(subs[n]));
      vals.push_back(tensor[lin]);
    }
    for (Index n = 0; n < order; ++n) {
      if (++subs[n] < shape[n]) break;
      subs[n] = 0;
    }
  }
  return {IndexList(shape, std::move(coords)),
          Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()))};
}

SparseSamples SparseSamples::from_dense(const DenseTensor& tensor) {
  return from_dense(tensor, DenseTensor::constant(tensor.shape(), 1.0));
}

SparseSamples SparseSamples::with_values(Eigen::VectorXd values) const {
  SparseSamples out = *this;
  if (values.size() != out.values_.size()) throw ShapeError("value count does not match index count");
  if (!values.allFinite()) throw ValueError("sparse sample values must be finite");
  out.values_ = std::move(values);
  return out;
}

DenseTensor SparseSamples::densify() const {
  DenseTensor out(shape());
  for (std::size_t q = 0; q < size(); ++q) {
    out[indices_.linear_index(q)] = values_[static_cast<Eigen::Index>(q)];
  }
  return out;
}

DenseTensor SparseSamples::mask() const {
  DenseTensor out(shape());
  for (std::size_t q = 0; q < size(); ++q) out[indices_.linear_index(q)] = 1.0;
  return out;
}

// ---------------------------------------------------------------------------

KruskalModel::KruskalModel(std::vector<FactorMatrix> factors_)
    : factors(std::move(factors_)),
      lambda(Eigen::VectorXd::Ones(factors.empty() ? 0 : factors.front().cols())) {
  validate();
}

KruskalModel::KruskalModel(std::vector<FactorMatrix> factors_, Eigen::VectorXd lambda_)
    : factors(std::move(factors_)), lambda(std::move(lambda_)) {
  validate();
}

KruskalModel KruskalModel::zeros(const Shape& shape, Index rank) {
  std::vector<FactorMatrix> f;
  f.reserve(shape.order());
  const auto r = static_cast<Eigen::Index>(rank);
  for (Index d : shape.dims()) f.push_back(FactorMatrix::Zero(static_cast<Eigen::Index>(d), r));
  return {std::move(f), Eigen::VectorXd::Ones(r)};
}

Shape KruskalModel::shape() const {
  std::vector<Index> dims;
  dims.reserve(factors.size());
  for (const auto& a : factors) dims.push_back(static_cast<Index>(a.rows()));
  return Shape(std::move(dims));
}

void KruskalModel::validate() const {
  if (factors.empty()) throw ShapeError("Kruskal model needs at least one factor matrix");
  if (lambda.size() < 1) throw ShapeError("Kruskal model rank must be at least 1");
  for (const auto& a : factors) {
    if (a.cols() != lambda.size()) throw ShapeError("factor column counts disagree with rank");
    if (a.rows() < 1) throw ShapeError("factor matrices need at least one row");
    if (!a.allFinite()) throw ValueError("factor entries must be finite");
  }
  if (!lambda.allFinite()) throw ValueError("weights must be finite");
}

void KruskalModel::check_shape(const Shape& expected) const {
  if (factors.size() != expected.order()) throw ShapeError("model order does not match tensor order");
  for (Index n = 0; n < factors.size(); ++n) {
    if (static_cast<Index>(factors[n].rows()) != expected[n]) {
      throw ShapeError("factor " + std::to_string(n + 1) + " has " +
                       std::to_string(factors[n].rows()) + " rows, expected " +
                       std::to_string(expected[n]));
    }
  }
}

}  // namespace cpwopt
