#include "cpwopt/em_als.hpp"

#include <chrono>
#include <cmath>

#include "cpwopt/error.hpp"
#include "cpwopt/kernels.hpp"
#include "cpwopt/objective.hpp"

namespace cpwopt {

namespace {

constexpr double kRoundoffFloor = 1e-26;

// Symmetric pseudo-inverse with the usual relative cutoff.
Eigen::MatrixXd pinv_symmetric(const Eigen::MatrixXd& g) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  const double cutoff = static_cast<double>(g.rows()) * top * std::numeric_limits<double>::epsilon();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (std::abs(ev[k]) > cutoff) inv[k] = 1.0 / ev[k];
  }
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

void EmAlsConfig::validate() const {
  if (rank < 1) throw ValueError("rank must be at least 1");
  if (max_iters < 1) throw ValueError("max_iters must be at least 1");
  if (!(rel_f_tol > 0.0)) throw ValueError("rel_f_tol must be positive");
}

DenseTensor impute(const DenseTensor& x, const DenseTensor& w, const KruskalModel& model) {
  if (!(x.shape() == w.shape())) throw ShapeError("data and mask shapes differ");
  model.check_shape(x.shape());
  DenseTensor out = ktensor_full(model);
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (w[k] != 0.0) out[k] = x[k];
  }
  return out;
}

KruskalModel als_sweep(const DenseTensor& xbar, const KruskalModel& model) {
  model.check_shape(xbar.shape());
  KruskalModel m = model;
  m.factors[0] = m.factors[0] * m.lambda.asDiagonal();
  m.lambda.setOnes();
  const Index order = m.order();
  const auto r = static_cast<Eigen::Index>(m.rank());
  std::vector<Eigen::MatrixXd> grams;
  for (const auto& a : m.factors) grams.push_back(a.transpose() * a);
  for (Index n = 0; n < order; ++n) {
    Eigen::MatrixXd gamma = Eigen::MatrixXd::Ones(r, r);
    for (Index k = 0; k < order; ++k) {
      if (k != n) gamma = gamma.cwiseProduct(grams[k]);
    }
    m.factors[n] = mttkrp_dense(xbar, m, n) * pinv_symmetric(gamma);
    grams[n] = m.factors[n].transpose() * m.factors[n];
  }
  return m;
}

std::pair<KruskalModel, OptResult> em_als_fit(const DenseTensor& x, const DenseTensor& w,
                                              const EmAlsConfig& cfg, const KruskalModel& init) {
  cfg.validate();
  init.check_shape(x.shape());
  const auto t0 = std::chrono::steady_clock::now();
  DenseObjective objective(x, w);
  KruskalModel m = init;
  OptResult res;
  res.stop_reason = StopReason::max_iters;
  double f_prev = objective.value(m);
  res.fevals = 1;
  for (int it = 0; it < cfg.max_iters; ++it) {
    m = als_sweep(impute(x, w, m), m);
    const double f = objective.value(m);
    ++res.fevals;
    res.iterations = it + 1;
    if (!std::isfinite(f)) {
      res.f = f;
      res.stop_reason = StopReason::numerical_failure;
      break;
    }
    const double change = f_prev == 0.0 ? 0.0 : std::abs(f_prev - f) / std::abs(f_prev);
    f_prev = f;
    // On exact data the sweeps shrink f geometrically, so the relative change
    // stalls at the contraction rate; stop once the residual is at roundoff.
    if (change <= cfg.rel_f_tol || f <= kRoundoffFloor * objective.gamma()) {
      res.stop_reason = StopReason::f_tol;
      break;
    }
  }
  res.f = f_prev;
  std::vector<Eigen::MatrixXd> grads;
  objective.evaluate(m, grads);
  double g2 = 0.0;
  for (const auto& g : grads) g2 += g.squaredNorm();
  res.grad_norm = std::sqrt(g2);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {normalize_model(m).model, res};
}

FitResult em_als_multistart(const DenseTensor& x, const DenseTensor& w, const EmAlsConfig& cfg,
                            std::span<const KruskalModel> inits) {
  if (inits.empty()) throw ValueError("need at least one starting point");
  FitResult out;
  for (std::size_t k = 0; k < inits.size(); ++k) {
    StartOutcome so;
    so.start = static_cast<int>(k);
    try {
      auto [model, result] = em_als_fit(x, w, cfg, inits[k]);
      so.result = result;
      if (result.stop_reason == StopReason::numerical_failure) {
        so.error = "non-finite objective";
      } else {
        so.model = std::move(model);
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

}  // namespace cpwopt
