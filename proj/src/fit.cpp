#include "cpwopt/fit.hpp"

#include <cmath>

#include "cpwopt/datagen.hpp"
#include "cpwopt/error.hpp"
#include "cpwopt/kernels.hpp"

namespace cpwopt {

void FitConfig::validate() const {
  if (rank < 1) throw ValueError("rank must be at least 1");
  if (starts < 1) throw ValueError("need at least one start");
  opt.validate();
}

Index variable_count(const Shape& shape, Index rank) { return rank * shape.extent_sum(); }

Eigen::VectorXd flatten_factors(const KruskalModel& model) {
  Eigen::Index total = 0;
  for (const auto& a : model.factors) total += a.size();
  Eigen::VectorXd x(total);
  Eigen::Index offset = 0;
  for (const auto& a : model.factors) {
    x.segment(offset, a.size()) = a.reshaped();
    offset += a.size();
  }
  return x;
}

KruskalModel unflatten_factors(const Eigen::VectorXd& x, const Shape& shape, Index rank) {
  if (static_cast<Index>(x.size()) != variable_count(shape, rank)) {
    throw ShapeError("variable vector length does not match shape and rank");
  }
  const auto r = static_cast<Eigen::Index>(rank);
  std::vector<FactorMatrix> factors;
  Eigen::Index offset = 0;
  for (Index d : shape.dims()) {
    const auto rows = static_cast<Eigen::Index>(d);
    factors.emplace_back(x.segment(offset, rows * r).reshaped(rows, r));
    offset += rows * r;
  }
  return KruskalModel(std::move(factors));
}

std::pair<KruskalModel, OptResult> minimize_from(Objective& objective, const KruskalModel& init,
                                                 const OptConfig& opt) {
  init.check_shape(objective.shape());
  const Shape shape = objective.shape();
  const Index rank = init.rank();
  KruskalModel start = init;
  start.factors[0] = start.factors[0] * start.lambda.asDiagonal();
  start.lambda.setOnes();

  std::vector<Eigen::MatrixXd> grads;
  const GradientOracle oracle = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    if (!x.allFinite()) return std::numeric_limits<double>::quiet_NaN();
    const KruskalModel m = unflatten_factors(x, shape, rank);
    const double f = objective.evaluate(m, grads);
    Eigen::Index offset = 0;
    for (const auto& gn : grads) {
      g.segment(offset, gn.size()) = gn.reshaped();
      offset += gn.size();
    }
    return f;
  };
  MinimizeResult mr = ncg_minimize(oracle, flatten_factors(start), opt);
  return {unflatten_factors(mr.x, shape, rank), mr.result};
}

std::size_t select_best(std::span<const StartOutcome> starts) {
  std::size_t best = starts.size();
  for (std::size_t k = 0; k < starts.size(); ++k) {
    if (!starts[k].ok()) continue;
    if (best == starts.size() || starts[k].result.f < starts[best].result.f) best = k;
  }
  if (best == starts.size()) {
    std::string why = "all " + std::to_string(starts.size()) + " starts failed";
    if (!starts.empty()) why += " (first: " + starts.front().error + ")";
    throw NumericalError(why);
  }
  return best;
}

FitResult fit_cpwopt(Objective& objective, std::span<const KruskalModel> inits,
                     const OptConfig& opt) {
  if (inits.empty()) throw ValueError("need at least one starting point");
  opt.validate();
  FitResult out;
  for (std::size_t k = 0; k < inits.size(); ++k) {
    StartOutcome so;
    so.start = static_cast<int>(k);
    try {
      auto [model, result] = minimize_from(objective, inits[k], opt);
      so.result = result;
      if (result.stop_reason == StopReason::line_search_failure ||
          result.stop_reason == StopReason::numerical_failure || !std::isfinite(result.f)) {
        so.error = std::string(to_string(result.stop_reason));
      } else {
        so.model = normalize_model(model).model;
      }
    } catch (const Error& e) {
      so.result.stop_reason = StopReason::numerical_failure;
      so.error = e.what();
    }
    out.starts.push_back(std::move(so));
  }
  const std::size_t best = select_best(out.starts);
  out.best_start = static_cast<int>(best);
  out.best = *out.starts[best].model;
  return out;
}

FitResult fit_cpwopt(const DenseTensor& x, const DenseTensor& w, const FitConfig& cfg) {
  cfg.validate();
  DenseObjective objective(x, w);
  const auto inits = initial_guesses(objective.weighted_data(), objective.weights(), cfg.rank, cfg.starts, cfg.seed);
  return fit_cpwopt(objective, inits, cfg.opt);
}

FitResult fit_cpwopt(const SparseSamples& s, const FitConfig& cfg) {
  cfg.validate();
  SparseObjective objective(s);
  const auto inits = initial_guesses(s, cfg.rank, cfg.starts, cfg.seed);
  return fit_cpwopt(objective, inits, cfg.opt);
}

}  // namespace cpwopt
