#include "cpwopt/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "cpwopt/error.hpp"
#include "cpwopt/kernels.hpp"

namespace cpwopt {

namespace {

constexpr int kMaskAttempts = 100;

void check_fraction(double missing) {
  if (!(missing >= 0.0 && missing < 1.0)) {
    throw ValueError("missing fraction must lie in [0, 1)");
  }
}

Eigen::VectorXd standard_normal(Eigen::Index n, Engine& engine) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index k = 0; k < n; ++k) v[k] = dist(engine);
  return v;
}

// Floyd's algorithm: exactly `count` draws, uniform over all subsets.
std::vector<std::uint64_t> floyd_sample(std::uint64_t total, std::uint64_t count, Engine& engine) {
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t j = total - count; j < total; ++j) {
    const std::uint64_t t = std::uniform_int_distribution<std::uint64_t>(0, j)(engine);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  std::vector<std::uint64_t> out(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

IndexList unravel_all(const Shape& shape, const std::vector<std::uint64_t>& linear) {
  std::vector<std::vector<IndexList::Coord>> coords(shape.order(),
                                                    std::vector<IndexList::Coord>(linear.size()));
  for (std::size_t q = 0; q < linear.size(); ++q) {
    std::uint64_t lin = linear[q];
    for (Index n = 0; n < shape.order(); ++n) {
      coords[n][q] = static_cast<IndexList::Coord>(lin % shape[n]);
      lin /= shape[n];
    }
  }
  return IndexList(shape, std::move(coords));
}

void check_coord_range(const Shape& shape) {
  for (Index d : shape.dims()) {
    if (d > std::numeric_limits<IndexList::Coord>::max()) {
      throw ShapeError("extent " + std::to_string(d) + " exceeds the 32-bit coordinate range");
    }
  }
}

}  // namespace

KruskalModel gen_factors(const Shape& shape, Index rank, std::uint64_t seed) {
  if (rank < 1) throw ValueError("rank must be at least 1");
  Engine engine = make_engine(seed, Stream::factors);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<FactorMatrix> factors;
  for (Index d : shape.dims()) {
    FactorMatrix a(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(rank));
    for (Eigen::Index r = 0; r < a.cols(); ++r) {
      for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, r) = dist(engine);
      a.col(r).normalize();
    }
    factors.push_back(std::move(a));
  }
  return KruskalModel(std::move(factors));
}

DenseTensor add_noise(const DenseTensor& y, double eta, std::uint64_t seed) {
  if (!(eta >= 0.0)) throw ValueError("noise level must be nonnegative");
  if (eta == 0.0) return y;
  const double ynorm = norm(y);
  if (ynorm == 0.0) throw ValueError("cannot scale noise relative to a zero tensor");
  Engine engine = make_engine(seed, Stream::noise);
  const Eigen::VectorXd noise = standard_normal(static_cast<Eigen::Index>(y.size()), engine);
  DenseTensor x = y;
  x.vec() += (eta * ynorm / noise.norm()) * noise;
  return x;
}

SparseSamples add_noise(const SparseSamples& y, double eta, std::uint64_t seed) {
  if (!(eta >= 0.0)) throw ValueError("noise level must be nonnegative");
  if (eta == 0.0) return y;
  const double ynorm = y.values().norm();
  if (ynorm == 0.0) throw ValueError("cannot scale noise relative to zero data");
  Engine engine = make_engine(seed, Stream::noise);
  const Eigen::VectorXd noise = standard_normal(y.values().size(), engine);
  return y.with_values(y.values() + (eta * ynorm / noise.norm()) * noise);
}

std::uint64_t fraction_count(std::uint64_t total, double fraction) {
  const double exact = fraction * static_cast<double>(total);
  const double nearest = std::round(exact);
  if (std::fabs(exact - nearest) <= 1e-9 * std::max(1.0, exact)) {
    return static_cast<std::uint64_t>(nearest);
  }
  return static_cast<std::uint64_t>(std::floor(exact));
}

std::vector<std::uint64_t> sample_subset(std::uint64_t total, std::uint64_t count, Engine& engine) {
  if (count > total) throw ValueError("cannot sample more elements than available");
  if (count == 0) return {};
  if (count <= total / 2) return floyd_sample(total, count, engine);
  // Dense regime: sample the complement.
  const auto excluded = floyd_sample(total, total - count, engine);
  std::vector<std::uint64_t> out;
  out.reserve(static_cast<std::size_t>(count));
  std::size_t k = 0;
  for (std::uint64_t v = 0; v < total; ++v) {
    if (k < excluded.size() && excluded[k] == v) {
      ++k;
    } else {
      out.push_back(v);
    }
  }
  return out;
}

bool slices_covered(const DenseTensor& mask) {
  const Shape& shape = mask.shape();
  std::vector<std::vector<char>> seen(shape.order());
  for (Index n = 0; n < shape.order(); ++n) seen[n].assign(shape[n], 0);
  std::vector<Index> subs(shape.order(), 0);
  for (std::size_t lin = 0; lin < mask.size(); ++lin) {
    if (mask[lin] != 0.0) {
      for (Index n = 0; n < shape.order(); ++n) seen[n][subs[n]] = 1;
    }
    for (Index n = 0; n < shape.order(); ++n) {
      if (++subs[n] < shape[n]) break;
      subs[n] = 0;
    }
  }
  for (const auto& s : seen) {
    if (std::find(s.begin(), s.end(), 0) != s.end()) return false;
  }
  return true;
}

bool slices_covered(const IndexList& known) {
  const Shape& shape = known.shape();
  for (Index n = 0; n < shape.order(); ++n) {
    std::vector<char> seen(shape[n], 0);
    for (auto c : known.mode(n)) seen[c] = 1;
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) return false;
  }
  return true;
}

IndexList gen_known_random(const Shape& shape, double missing, std::uint64_t seed) {
  check_fraction(missing);
  check_coord_range(shape);
  const std::uint64_t total = shape.numel();
  const std::uint64_t known = total - fraction_count(total, missing);
  const Index widest = *std::max_element(shape.dims().begin(), shape.dims().end());
  if (known < widest) {
    throw InfeasibleError("missing fraction leaves fewer known entries than slices in one mode");
  }
  for (int attempt = 0; attempt < kMaskAttempts; ++attempt) {
    Engine engine = make_engine(seed, Stream::mask, static_cast<std::uint64_t>(attempt));
    IndexList list = unravel_all(shape, sample_subset(total, known, engine));
    if (slices_covered(list)) return list;
  }
  throw InfeasibleError("no mask with full slice coverage found after " +
                        std::to_string(kMaskAttempts) + " attempts");
}

DenseTensor gen_missing_random(const Shape& shape, double missing, std::uint64_t seed) {
  const IndexList known = gen_known_random(shape, missing, seed);
  DenseTensor mask(shape);
  for (std::size_t q = 0; q < known.size(); ++q) mask[known.linear_index(q)] = 1.0;
  return mask;
}

DenseTensor gen_missing_fibers(const Shape& shape, double missing, std::uint64_t seed) {
  check_fraction(missing);
  if (shape.order() != 3) throw ShapeError("missing-fiber masks need a 3-way shape");
  const std::uint64_t rows = shape[0], cols = shape[1];
  const std::uint64_t total = rows * cols;
  const std::uint64_t known = total - fraction_count(total, missing);
  if (known < std::max(rows, cols)) {
    throw InfeasibleError("missing fraction leaves an empty row or column in the fiber pattern");
  }
  for (int attempt = 0; attempt < kMaskAttempts; ++attempt) {
    Engine engine = make_engine(seed, Stream::mask, static_cast<std::uint64_t>(attempt));
    const auto pairs = sample_subset(total, known, engine);
    std::vector<char> row_seen(rows, 0), col_seen(cols, 0);
    for (auto p : pairs) {
      row_seen[p % rows] = 1;
      col_seen[p / rows] = 1;
    }
    if (std::find(row_seen.begin(), row_seen.end(), 0) != row_seen.end() ||
        std::find(col_seen.begin(), col_seen.end(), 0) != col_seen.end()) {
      continue;
    }
    DenseTensor mask(shape);
    for (std::uint64_t k = 0; k < shape[2]; ++k) {
      for (auto p : pairs) mask[k * total + p] = 1.0;
    }
    return mask;
  }
  throw InfeasibleError("no fiber pattern without empty rows/columns found after " +
                        std::to_string(kMaskAttempts) + " attempts");
}

std::string_view to_string(MissingPattern p) noexcept {
  return p == MissingPattern::entries ? "entries" : "fibers";
}

MissingPattern missing_pattern_from_string(std::string_view s) {
  if (s == "entries") return MissingPattern::entries;
  if (s == "fibers") return MissingPattern::fibers;
  throw ValueError("unknown missing-data pattern '" + std::string(s) + "'");
}

ProblemInstance generate_instance(const InstanceSpec& spec) {
  check_fraction(spec.missing);
  KruskalModel truth = gen_factors(spec.shape, spec.rank, spec.seed);
  DenseTensor data = add_noise(ktensor_full(truth), spec.noise, spec.seed);
  DenseTensor mask = spec.pattern == MissingPattern::entries
                         ? gen_missing_random(spec.shape, spec.missing, spec.seed)
                         : gen_missing_fibers(spec.shape, spec.missing, spec.seed);
  SparseSamples observed = SparseSamples::from_dense(data, mask);
  return {spec, std::move(truth), std::move(observed), std::move(data), std::move(mask)};
}

ProblemInstance gen_large_sparse(const Shape& shape, double missing, Index rank, double noise,
                                 std::uint64_t seed) {
  InstanceSpec spec{shape, rank, noise, missing, MissingPattern::entries, seed};
  KruskalModel truth = gen_factors(shape, rank, seed);
  IndexList known = gen_known_random(shape, missing, seed);
  Eigen::VectorXd clean = ktensor_values_at(truth, known);
  SparseSamples observed = add_noise(SparseSamples(std::move(known), std::move(clean)), noise, seed);
  return {spec, std::move(truth), std::move(observed), std::nullopt, std::nullopt};
}

KruskalModel init_random(const Shape& shape, Index rank, std::uint64_t seed, std::uint64_t start) {
  if (rank < 1) throw ValueError("rank must be at least 1");
  Engine engine = make_engine(seed, Stream::init, start);
  std::vector<FactorMatrix> factors;
  for (Index d : shape.dims()) {
    const auto rows = static_cast<Eigen::Index>(d);
    const auto cols = static_cast<Eigen::Index>(rank);
    // Column-major fill keeps the draw order independent of Eigen internals.
    Eigen::VectorXd v = standard_normal(rows * cols, engine);
    factors.emplace_back(Eigen::Map<FactorMatrix>(v.data(), rows, cols));
  }
  return KruskalModel(std::move(factors));
}

}  // namespace cpwopt
