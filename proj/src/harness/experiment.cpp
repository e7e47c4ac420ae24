#include "cpwopt/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cpwopt/error.hpp"
#include "cpwopt/evaluation.hpp"
#include "cpwopt/fit.hpp"
#include "cpwopt/kernels.hpp"
#include "cpwopt/rng.hpp"

namespace cpwopt {

namespace {

using json = nlohmann::json;

bool converged(StopReason r) { return r == StopReason::f_tol || r == StopReason::g_tol; }

void fill_scores(std::vector<RunRecord>& run) {
  double best = 0.0;
  double best_f = 0.0;
  bool any = false;
  double selected = 0.0;
  for (auto& rec : run) {
    if (rec.ok) {
      best = std::max(best, rec.fms);
      if (!any || rec.f < best_f) {
        best_f = rec.f;
        selected = rec.fms;
      }
      any = true;
    }
    rec.cumulative_fms = best;
    rec.selected_fms = selected;
  }
}

std::vector<RunRecord> records_for(const std::vector<StartOutcome>& starts,
                                   const KruskalModel& truth, const RunRecord& base) {
  std::vector<RunRecord> out;
  for (const auto& so : starts) {
    RunRecord rec = base;
    rec.start = so.start;
    rec.ok = so.ok();
    rec.f = so.result.f;
    rec.stop_reason = so.result.stop_reason;
    rec.iterations = so.result.iterations;
    rec.fevals = so.result.fevals;
    rec.seconds = so.result.seconds;
    rec.error = so.error;
    rec.fms = so.ok() ? fms(truth, *so.model).fms : 0.0;
    out.push_back(std::move(rec));
  }
  fill_scores(out);
  return out;
}

// Runs every start separately instead of through the multi-start drivers,
// so that a cell where all starts fail still yields its per-start records.
std::vector<StartOutcome> run_method(Method method, const ProblemInstance& inst,
                                     const std::vector<KruskalModel>& inits,
                                     const ExperimentSpec& spec) {
  std::vector<StartOutcome> starts;
  auto record = [&](int k, auto&& body) {
    StartOutcome so;
    so.start = k;
    try {
      body(so);
    } catch (const Error& e) {
      so.model.reset();
      so.result.stop_reason = StopReason::numerical_failure;
      so.error = e.what();
    }
    starts.push_back(std::move(so));
  };
  const auto count = static_cast<int>(inits.size());
  switch (method) {
    case Method::cpwopt_dense:
    case Method::cpwopt_sparse: {
      std::unique_ptr<Objective> objective;
      if (method == Method::cpwopt_dense) {
        objective = std::make_unique<DenseObjective>(*inst.full_data, *inst.mask);
      } else {
        objective = std::make_unique<SparseObjective>(inst.observed);
      }
      for (int k = 0; k < count; ++k) {
        record(k, [&](StartOutcome& so) {
          auto [model, result] = minimize_from(*objective, inits[static_cast<std::size_t>(k)], spec.opt);
          so.result = result;
          if (result.stop_reason == StopReason::line_search_failure ||
              result.stop_reason == StopReason::numerical_failure) {
            so.error = std::string(to_string(result.stop_reason));
          } else {
            so.model = normalize_model(model).model;
          }
        });
      }
      break;
    }
    case Method::em_als: {
      EmAlsConfig cfg = spec.em;
      cfg.rank = spec.rank;
      for (int k = 0; k < count; ++k) {
        record(k, [&](StartOutcome& so) {
          auto [model, result] =
              em_als_fit(*inst.full_data, *inst.mask, cfg, inits[static_cast<std::size_t>(k)]);
          so.result = result;
          if (result.stop_reason == StopReason::numerical_failure) {
            so.error = "non-finite objective";
          } else {
            so.model = std::move(model);
          }
        });
      }
      break;
    }
  }
  return starts;
}

json quartiles_json(const Quartiles& q) {
  return json{{"q25", q.q25}, {"median", q.median}, {"q75", q.q75}};
}

}  // namespace

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::cpwopt_dense: return "cpwopt-dense";
    case Method::cpwopt_sparse: return "cpwopt-sparse";
    case Method::em_als: return "em-als";
  }
  return "?";
}

Method method_from_string(std::string_view s) {
  if (s == "cpwopt-dense" || s == "cpwopt") return Method::cpwopt_dense;
  if (s == "cpwopt-sparse") return Method::cpwopt_sparse;
  if (s == "em-als") return Method::em_als;
  throw ValueError("unknown method '" + std::string(s) + "'");
}

void ExperimentSpec::validate() const {
  if (sizes.empty()) throw ValueError("experiment needs at least one size");
  if (missing.empty()) throw ValueError("experiment needs at least one missing fraction");
  if (methods.empty()) throw ValueError("experiment needs at least one method");
  if (rank < 1) throw ValueError("rank must be at least 1");
  if (instances < 1 || starts < 1) throw ValueError("instances and starts must be at least 1");
  if (!(noise >= 0.0)) throw ValueError("noise level must be nonnegative");
  for (double m : missing) {
    if (!(m >= 0.0 && m < 1.0)) throw ValueError("missing fraction must lie in [0, 1)");
  }
  opt.validate();
}

std::uint64_t instance_seed(std::uint64_t base, std::size_t size_index, int instance) noexcept {
  const std::uint64_t sub = (static_cast<std::uint64_t>(size_index) << 32) |
                            static_cast<std::uint32_t>(instance);
  return derive_seed(base, Stream::instance, sub);
}

Quartiles quartiles(std::vector<double> values) {
  if (values.empty()) throw ValueError("quartiles of an empty sample");
  std::sort(values.begin(), values.end());
  auto at = [&](double p) {
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
  };
  return {at(0.25), at(0.5), at(0.75)};
}

ExperimentReport run_experiment(const ExperimentSpec& spec, const ProgressFn& progress) {
  spec.validate();
  ExperimentReport report;
  for (std::size_t si = 0; si < spec.sizes.size(); ++si) {
    const Shape& shape = spec.sizes[si];
    for (double m : spec.missing) {
      for (int i = 0; i < spec.instances; ++i) {
        const InstanceSpec is{shape, spec.rank, spec.noise, m, spec.pattern,
                              instance_seed(spec.seed, si, i)};
        const ProblemInstance inst = generate_instance(is);
        const DenseTensor y = inst.observed.densify();
        const auto inits = initial_guesses(y, *inst.mask, spec.rank, spec.starts, is.seed);
        for (Method method : spec.methods) {
          RunRecord base;
          base.size = shape.to_string();
          base.missing = m;
          base.instance = i;
          base.method = method;
          const auto starts = run_method(method, inst, inits, spec);
          auto recs = records_for(starts, inst.truth, base);
          if (progress) {
            char line[160];
            std::snprintf(line, sizeof line, "%s M=%.2f instance %d %s: best FMS %.4f",
                          base.size.c_str(), m, i, std::string(to_string(method)).c_str(),
                          recs.back().cumulative_fms);
            progress(line);
          }
          report.records.insert(report.records.end(), recs.begin(), recs.end());
        }
      }
    }
  }
  report.cells = summarize(report.records);
  return report;
}

std::vector<CellSummary> summarize(const std::vector<RunRecord>& records) {
  struct Key {
    std::string size;
    double missing;
    Method method;
    bool operator<(const Key& o) const {
      return std::tie(size, missing, method) < std::tie(o.size, o.missing, o.method);
    }
  };
  struct Acc {
    // instance -> per-start records
    std::map<int, std::vector<const RunRecord*>> runs;
  };
  std::vector<Key> order;
  std::map<Key, Acc> acc;
  for (const auto& rec : records) {
    const Key key{rec.size, rec.missing, rec.method};
    auto [it, fresh] = acc.try_emplace(key);
    if (fresh) order.push_back(key);
    it->second.runs[rec.instance].push_back(&rec);
  }
  std::vector<CellSummary> cells;
  for (const auto& key : order) {
    const Acc& a = acc.at(key);
    CellSummary c;
    c.size = key.size;
    c.missing = key.missing;
    c.method = key.method;
    c.instances = static_cast<int>(a.runs.size());
    std::size_t max_starts = 0;
    for (const auto& [inst, recs] : a.runs) max_starts = std::max(max_starts, recs.size());
    std::vector<double> wall;
    for (std::size_t k = 0; k < max_starts; ++k) {
      std::vector<double> vals;
      for (const auto& [inst, recs] : a.runs) {
        // Instances with fewer starts carry their last value forward.
        vals.push_back(recs[std::min(k, recs.size() - 1)]->cumulative_fms);
      }
      c.cumulative_fms.push_back(quartiles(std::move(vals)));
    }
    for (const auto& [inst, recs] : a.runs) {
      double total = 0.0;
      for (const RunRecord* r : recs) {
        total += r->seconds;
        ++c.total_starts;
        if (!r->ok) ++c.failed_starts;
        if (converged(r->stop_reason)) ++c.converged_starts;
      }
      wall.push_back(total);
    }
    c.seconds = quartiles(std::move(wall));
    cells.push_back(std::move(c));
  }
  return cells;
}

std::string records_to_jsonl(const std::vector<RunRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    json j{{"size", r.size},
           {"missing", r.missing},
           {"instance", r.instance},
           {"method", std::string(to_string(r.method))},
           {"start", r.start},
           {"ok", r.ok},
           {"f", r.f},
           {"stop_reason", std::string(to_string(r.stop_reason))},
           {"iterations", r.iterations},
           {"fevals", r.fevals},
           {"seconds", r.seconds},
           {"fms", r.fms},
           {"cumulative_fms", r.cumulative_fms},
           {"selected_fms", r.selected_fms}};
    if (!r.error.empty()) j["error"] = r.error;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<RunRecord> records_from_jsonl(const std::string& text) {
  std::vector<RunRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      RunRecord r;
      r.size = j.at("size").get<std::string>();
      r.missing = j.at("missing").get<double>();
      r.instance = j.at("instance").get<int>();
      r.method = method_from_string(j.at("method").get<std::string>());
      r.start = j.at("start").get<int>();
      r.ok = j.at("ok").get<bool>();
      r.f = j.at("f").is_null() ? std::nan("") : j.at("f").get<double>();
      r.stop_reason = stop_reason_from_string(j.at("stop_reason").get<std::string>());
      r.iterations = j.at("iterations").get<int>();
      r.fevals = j.at("fevals").get<int>();
      r.seconds = j.at("seconds").get<double>();
      r.fms = j.at("fms").get<double>();
      r.cumulative_fms = j.at("cumulative_fms").get<double>();
      r.selected_fms = j.at("selected_fms").get<double>();
      r.error = j.value("error", std::string{});
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw IoError("records line " + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

std::string summary_to_json(const std::vector<CellSummary>& cells) {
  json arr = json::array();
  for (const auto& c : cells) {
    json cum = json::array();
    for (const auto& q : c.cumulative_fms) cum.push_back(quartiles_json(q));
    arr.push_back(json{{"size", c.size},
                       {"missing", c.missing},
                       {"method", std::string(to_string(c.method))},
                       {"instances", c.instances},
                       {"cumulative_fms", std::move(cum)},
                       {"seconds", quartiles_json(c.seconds)},
                       {"failed_starts", c.failed_starts},
                       {"converged_starts", c.converged_starts},
                       {"total_starts", c.total_starts}});
  }
  return json{{"cells", std::move(arr)}}.dump(1) + "\n";
}

std::string summary_table(const std::vector<CellSummary>& cells) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-12s %6s %-14s %5s  %-34s %9s %7s\n", "size", "M", "method",
                "inst", "median cumulative FMS by start", "sec(med)", "conv");
  out << buf;
  for (const auto& c : cells) {
    std::string series;
    for (const auto& q : c.cumulative_fms) {
      std::snprintf(buf, sizeof buf, "%s%.3f", series.empty() ? "" : " ", q.median);
      series += buf;
    }
    std::snprintf(buf, sizeof buf, "%-12s %6.2f %-14s %5d  %-34s %9.2f %3d/%-3d\n", c.size.c_str(),
                  c.missing, std::string(to_string(c.method)).c_str(), c.instances, series.c_str(),
                  c.seconds.median, c.converged_starts, c.total_starts);
    out << buf;
  }
  return out.str();
}

std::string spec_to_json(const ExperimentSpec& spec) {
  json sizes = json::array();
  for (const auto& s : spec.sizes) sizes.push_back(s.dims());
  json methods = json::array();
  for (Method m : spec.methods) methods.push_back(std::string(to_string(m)));
  json j{{"sizes", std::move(sizes)},
         {"rank", spec.rank},
         {"missing", spec.missing},
         {"pattern", std::string(to_string(spec.pattern))},
         {"noise", spec.noise},
         {"instances", spec.instances},
         {"starts", spec.starts},
         {"methods", std::move(methods)},
         {"seed", spec.seed},
         {"max_iters", spec.opt.max_iters},
         {"max_fevals", spec.opt.max_fevals},
         {"ftol", spec.opt.rel_f_tol},
         {"gtol", spec.opt.grad_tol},
         {"em_max_iters", spec.em.max_iters},
         {"em_ftol", spec.em.rel_f_tol}};
  return j.dump(1) + "\n";
}

ExperimentSpec spec_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ExperimentSpec spec;
    for (const auto& s : j.at("sizes")) spec.sizes.emplace_back(s.get<std::vector<Index>>());
    spec.rank = j.at("rank").get<Index>();
    spec.missing = j.at("missing").get<std::vector<double>>();
    spec.pattern = missing_pattern_from_string(j.value("pattern", std::string("entries")));
    spec.noise = j.value("noise", 0.1);
    spec.instances = j.value("instances", 30);
    spec.starts = j.value("starts", 5);
    for (const auto& m : j.at("methods")) spec.methods.push_back(method_from_string(m.get<std::string>()));
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.opt.max_iters = j.value("max_iters", spec.opt.max_iters);
    spec.opt.max_fevals = j.value("max_fevals", spec.opt.max_fevals);
    spec.opt.rel_f_tol = j.value("ftol", spec.opt.rel_f_tol);
    spec.opt.grad_tol = j.value("gtol", spec.opt.grad_tol);
    spec.em.max_iters = j.value("em_max_iters", spec.em.max_iters);
    spec.em.rel_f_tol = j.value("em_ftol", spec.em.rel_f_tol);
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw IoError(std::string("experiment spec: ") + e.what());
  }
}

}  // namespace cpwopt
