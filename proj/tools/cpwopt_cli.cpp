// cpwopt: command-line harness.
//
//   cpwopt gen      --shape 50x40x30 --rank 5 --missing 0.9 --noise 0.1 --out DIR
//   cpwopt fit      DIR/tensor.txt --rank 5 --starts 5 --out model.json
//   cpwopt eval     --model model.json --truth DIR/truth.json --holdout DIR/holdout.txt
//   cpwopt bench    --sizes 50x40x30 --missing 0.6,0.9 --methods cpwopt-dense,em-als --out DIR
//   cpwopt complete --model model.json --requests idx.txt
//
// Every flag can also be set through an environment variable named
// CPWOPT_<FLAG>, e.g. CPWOPT_SEED or CPWOPT_MEMORY_BUDGET. Command-line
// values win.
//
// Exit codes: 0 success, 1 usage or invalid parameters, 2 I/O, parse or
// dimension errors, 3 numerical failure (every start failed).

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cpwopt/datagen.hpp"
#include "cpwopt/em_als.hpp"
#include "cpwopt/error.hpp"
#include "cpwopt/evaluation.hpp"
#include "cpwopt/experiment.hpp"
#include "cpwopt/fit.hpp"
#include "cpwopt/io.hpp"
#include "cpwopt/kernels.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace cpwopt;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumerical = 3;

// Dense copies a dense fit keeps alive: data, mask, model, residual and (for
// EM-ALS) the imputed tensor.
constexpr double kDenseCopies = 5.0;

struct UsageError : Error {
  using Error::Error;
};

struct Common {
  std::uint64_t seed = 0;
  Index rank = 1;
  int starts = 1;
  std::string method = "cpwopt";
  std::string out;
  bool log1p = false;
  int center_mode = 0;  // 1-based; 0 = off
  int max_iters = 500;
  int max_fevals = 10000;
  double ftol = 1e-8;
  double gtol = 1e-8;
  int em_max_iters = 10000;
  double memory_budget_mb = 2048.0;
};

std::string env_name(const std::string& flag) {
  std::string out = "CPWOPT_";
  for (char c : flag) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

template <typename T>
CLI::Option* flag(CLI::App* app, const std::string& name, T& value, const std::string& help) {
  return app->add_option("--" + name, value, help)->envname(env_name(name))->capture_default_str();
}

CLI::Option* switch_flag(CLI::App* app, const std::string& name, bool& value, const std::string& help) {
  return app->add_flag("--" + name, value, help)->envname(env_name(name));
}

void add_fit_flags(CLI::App* app, Common& c) {
  flag(app, "seed", c.seed, "base random seed");
  flag(app, "rank", c.rank, "number of components R")->check(CLI::PositiveNumber);
  flag(app, "starts", c.starts, "number of starting points")->check(CLI::PositiveNumber);
  flag(app, "max-iters", c.max_iters, "iteration cap per start")->check(CLI::PositiveNumber);
  flag(app, "max-fevals", c.max_fevals, "function evaluation cap per start")->check(CLI::PositiveNumber);
  flag(app, "em-max-iters", c.em_max_iters, "sweep cap per start for em-als")->check(CLI::PositiveNumber);
  flag(app, "ftol", c.ftol, "relative function change tolerance")->check(CLI::PositiveNumber);
  flag(app, "gtol", c.gtol, "tolerance on ||gradient|| / #variables")->check(CLI::PositiveNumber);
}

Shape parse_shape(const std::string& text) {
  std::vector<Index> dims;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != part.size() || v == 0) {
      throw UsageError("bad shape '" + text + "', expected e.g. 50x40x30");
    }
    dims.push_back(static_cast<Index>(v));
  }
  if (dims.empty()) throw UsageError("empty shape");
  return Shape(dims);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

OptConfig opt_config(const Common& c) {
  OptConfig opt;
  opt.max_iters = c.max_iters;
  opt.max_fevals = c.max_fevals;
  opt.rel_f_tol = c.ftol;
  opt.grad_tol = c.gtol;
  return opt;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text_atomic(path, text);
  }
}

// ---------------------------------------------------------------- gen ----

struct GenArgs {
  std::string shape = "50x40x30";
  double missing = 0.0;
  double noise = 0.0;
  std::string pattern = "entries";
  bool large = false;
  std::string manifest;
};

json gen_manifest(const InstanceSpec& spec, bool large) {
  return json{{"shape", spec.shape.dims()},
              {"rank", spec.rank},
              {"missing", spec.missing},
              {"noise", spec.noise},
              {"pattern", std::string(to_string(spec.pattern))},
              {"seed", spec.seed},
              {"large", large}};
}

int cmd_gen(const Common& c, const GenArgs& g) {
  if (c.out.empty()) throw UsageError("gen needs --out DIR");
  InstanceSpec spec;
  bool large = g.large;
  if (!g.manifest.empty()) {
    json m;
    try {
      m = json::parse(read_text_file(g.manifest));
      spec.shape = Shape(m.at("shape").get<std::vector<Index>>());
      spec.rank = m.at("rank").get<Index>();
      spec.missing = m.at("missing").get<double>();
      spec.noise = m.at("noise").get<double>();
      spec.pattern = missing_pattern_from_string(m.at("pattern").get<std::string>());
      spec.seed = m.at("seed").get<std::uint64_t>();
      large = m.value("large", false);
    } catch (const json::exception& e) {
      throw IoError("manifest: " + std::string(e.what()));
    }
  } else {
    spec = InstanceSpec{parse_shape(g.shape), c.rank, g.noise, g.missing,
                        missing_pattern_from_string(g.pattern), c.seed};
  }
  fs::create_directories(c.out);
  const fs::path dir(c.out);
  if (large) {
    if (spec.pattern != MissingPattern::entries) throw UsageError("--large supports random entries only");
    const ProblemInstance inst = gen_large_sparse(spec.shape, spec.missing, spec.rank, spec.noise, spec.seed);
    write_coordinate_file(dir / "tensor.txt", inst.observed);
    write_model_file(dir / "truth.json", inst.truth);
  } else {
    const ProblemInstance inst = generate_instance(spec);
    write_coordinate_file(dir / "tensor.txt", inst.observed);
    write_model_file(dir / "truth.json", inst.truth);
    // The missing entries of the noisy data, for completion scoring.
    DenseTensor unknown = DenseTensor::constant(spec.shape, 1.0);
    unknown.vec() -= inst.mask->vec();
    if (unknown.vec().sum() > 0.0) {
      write_coordinate_file(dir / "holdout.txt", SparseSamples::from_dense(*inst.full_data, unknown));
    }
  }
  write_text_atomic(dir / "manifest.json", gen_manifest(spec, large).dump(1) + "\n");
  std::cerr << "wrote " << (dir / "tensor.txt").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- fit ----

struct FitArgs {
  std::string input;
  std::string result;
};

void check_dense_budget(const Shape& shape, const Common& c, const std::string& method) {
  const double mb = static_cast<double>(shape.numel()) * sizeof(double) * kDenseCopies / (1024.0 * 1024.0);
  if (mb > c.memory_budget_mb) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "%s densifies the %s tensor (about %.0f MiB), above --memory-budget %.0f MiB; "
                  "use --method cpwopt-sparse or raise the budget",
                  method.c_str(), shape.to_string().c_str(), mb, c.memory_budget_mb);
    throw UsageError(buf);
  }
}

json start_json(const StartOutcome& so) {
  json j{{"start", so.start + 1},
         {"ok", so.ok()},
         {"f", so.result.f},
         {"grad_norm", so.result.grad_norm},
         {"stop_reason", std::string(to_string(so.result.stop_reason))},
         {"iterations", so.result.iterations},
         {"fevals", so.result.fevals},
         {"seconds", so.result.seconds}};
  if (!so.error.empty()) j["error"] = so.error;
  return j;
}

int cmd_fit(const Common& c, const FitArgs& a) {
  if (c.out.empty()) throw UsageError("fit needs --out MODEL.json");
  const Method method = c.method == "cpwopt" ? Method::cpwopt_sparse : method_from_string(c.method);
  const TensorFile file = read_tensor_file(a.input);
  SparseSamples samples = file.known();
  if (method != Method::cpwopt_sparse) check_dense_budget(samples.shape(), c, c.method);

  if (c.log1p) {
    Eigen::VectorXd v = samples.values();
    if ((v.array() <= -1.0).any()) throw ValueError("--log1p needs every value > -1");
    v = v.array().log1p();
    samples = samples.with_values(std::move(v));
  }
  std::optional<Eigen::VectorXd> means;
  if (c.center_mode != 0) {
    if (c.center_mode < 1 || static_cast<Index>(c.center_mode) > samples.shape().order()) {
      throw UsageError("--center-mode must name a mode between 1 and " +
                       std::to_string(samples.shape().order()));
    }
    CenteredSamples cs = center_ignore_missing(samples, static_cast<Index>(c.center_mode - 1));
    samples = std::move(cs.samples);
    means = std::move(cs.means);
  }

  FitResult fit;
  if (method == Method::cpwopt_sparse) {
    FitConfig cfg{c.rank, c.starts, c.seed, opt_config(c)};
    fit = fit_cpwopt(samples, cfg);
  } else {
    const DenseTensor y = samples.densify();
    const DenseTensor w = samples.mask();
    const auto inits = initial_guesses(y, w, c.rank, c.starts, c.seed);
    if (method == Method::cpwopt_dense) {
      DenseObjective objective(y, w);
      fit = fit_cpwopt(objective, inits, opt_config(c));
    } else {
      EmAlsConfig cfg;
      cfg.rank = c.rank;
      cfg.max_iters = c.em_max_iters;
      cfg.rel_f_tol = c.ftol;
      cfg.seed = c.seed;
      fit = em_als_multistart(y, w, cfg, inits);
    }
  }
  write_model_file(c.out, fit.best);

  json starts = json::array();
  for (const auto& so : fit.starts) starts.push_back(start_json(so));
  const auto& best = fit.starts[static_cast<std::size_t>(fit.best_start)].result;
  json result{{"input", a.input},
              {"method", std::string(to_string(method))},
              {"shape", samples.shape().dims()},
              {"known", samples.size()},
              {"rank", c.rank},
              {"seed", c.seed},
              {"log1p", c.log1p},
              {"center_mode", c.center_mode},
              {"best_start", fit.best_start + 1},
              {"f", best.f},
              {"stop_reason", std::string(to_string(best.stop_reason))},
              {"starts", std::move(starts)}};
  if (means) result["center_means"] = std::vector<double>(means->data(), means->data() + means->size());
  write_output(a.result, result.dump(1) + "\n");
  return 0;
}

// --------------------------------------------------------------- eval ----

struct EvalArgs {
  std::string model;
  std::string truth;
  std::string holdout;
  std::string data;
};

int cmd_eval(const Common& c, const EvalArgs& a) {
  if (a.truth.empty() && a.holdout.empty()) throw UsageError("eval needs --truth and/or --holdout");
  const KruskalModel model = read_model_file(a.model);
  json out{{"model", a.model}};
  std::string row = a.model;
  char buf[128];
  Index rank = model.rank();
  if (!a.truth.empty()) {
    const KruskalModel truth = read_model_file(a.truth);
    rank = truth.rank();
    const ScoreReport rep = fms(truth, model);
    std::vector<Index> perm;
    for (Index p : rep.permutation) perm.push_back(p + 1);
    out["fms"] = rep.fms;
    out["permutation"] = perm;
    out["congruences"] = rep.congruences;
    std::snprintf(buf, sizeof buf, "  fms=%.6f", rep.fms);
    row += buf;
  }
  if (!a.holdout.empty()) {
    const SparseSamples held = read_tensor_file(a.holdout).known();
    const double score = tcs(held, model);
    out["tcs"] = score;
    std::snprintf(buf, sizeof buf, "  tcs=%.6f", score);
    row += buf;
  }
  if (!a.data.empty()) {
    const SparseSamples data = read_tensor_file(a.data).known();
    const double missing =
        1.0 - static_cast<double>(data.size()) / static_cast<double>(data.shape().numel());
    const double r = rho(data.shape(), rank, missing);
    out["rho"] = r;
    std::snprintf(buf, sizeof buf, "  rho=%.4f", r);
    row += buf;
  }
  write_output(c.out, out.dump(1) + "\n");
  std::cerr << row << "\n";
  return 0;
}

// -------------------------------------------------------------- bench ----

struct BenchArgs {
  std::string spec;
  std::string sizes = "50x40x30";
  std::string missing = "0.6,0.7,0.8,0.9";
  std::string methods = "cpwopt-dense,em-als";
  std::string pattern = "entries";
  double noise = 0.1;
  int instances = 30;
  std::string aggregate;
  bool quiet = false;
};

int cmd_bench(const Common& c, const BenchArgs& b) {
  if (!b.aggregate.empty()) {
    const auto records = records_from_jsonl(read_text_file(b.aggregate));
    const auto cells = summarize(records);
    if (!c.out.empty()) {
      fs::create_directories(c.out);
      write_text_atomic(fs::path(c.out) / "summary.json", summary_to_json(cells));
    }
    std::cout << summary_table(cells);
    return 0;
  }
  if (c.out.empty()) throw UsageError("bench needs --out DIR");
  ExperimentSpec spec;
  if (!b.spec.empty()) {
    spec = spec_from_json(read_text_file(b.spec));
  } else {
    for (const auto& s : split_list(b.sizes)) spec.sizes.push_back(parse_shape(s));
    for (const auto& m : split_list(b.missing)) {
      try {
        spec.missing.push_back(std::stod(m));
      } catch (const std::exception&) {
        throw UsageError("bad missing fraction '" + m + "'");
      }
    }
    for (const auto& m : split_list(b.methods)) spec.methods.push_back(method_from_string(m));
    spec.rank = c.rank;
    spec.pattern = missing_pattern_from_string(b.pattern);
    spec.noise = b.noise;
    spec.instances = b.instances;
    spec.starts = c.starts;
    spec.seed = c.seed;
    spec.opt = opt_config(c);
    spec.em.max_iters = c.em_max_iters;
    spec.em.rel_f_tol = c.ftol;
  }
  spec.validate();
  for (const Shape& s : spec.sizes) {
    for (Method m : spec.methods) {
      if (m != Method::cpwopt_sparse) check_dense_budget(s, c, std::string(to_string(m)));
    }
  }
  fs::create_directories(c.out);
  const fs::path dir(c.out);
  write_text_atomic(dir / "spec.json", spec_to_json(spec));
  const ProgressFn progress = [&](const std::string& line) {
    if (!b.quiet) std::cerr << line << "\n";
  };
  const ExperimentReport report = run_experiment(spec, progress);
  write_text_atomic(dir / "records.jsonl", records_to_jsonl(report.records));
  write_text_atomic(dir / "summary.json", summary_to_json(report.cells));
  const std::string table = summary_table(report.cells);
  write_text_atomic(dir / "summary.txt", table);
  std::cout << table;
  return 0;
}

// ----------------------------------------------------------- complete ----

struct CompleteArgs {
  std::string model;
  std::string requests;
  std::string data;
  bool expm1 = false;
};

int cmd_complete(const Common& c, const CompleteArgs& a) {
  if (a.requests.empty() == a.data.empty()) {
    throw UsageError("complete needs exactly one of --requests or --data");
  }
  const KruskalModel model = read_model_file(a.model);
  const Shape shape = model.shape();
  std::vector<std::vector<IndexList::Coord>> coords(shape.order());
  if (!a.requests.empty()) {
    std::ifstream in(a.requests);
    if (!in) throw IoError("cannot open '" + a.requests + "'");
    for (const auto& subs : read_index_requests(in, shape)) {
      for (Index n = 0; n < shape.order(); ++n) coords[n].push_back(static_cast<IndexList::Coord>(subs[n]));
    }
  } else {
    // Every entry absent from the data file.
    const SparseSamples known = read_tensor_file(a.data).known();
    if (!(known.shape() == shape)) {
      throw ShapeError("data shape " + known.shape().to_string() + " differs from model shape " +
                       shape.to_string());
    }
    std::size_t q = 0;
    std::vector<Index> subs(shape.order());
    for (std::uint64_t lin = 0; lin < shape.numel(); ++lin) {
      if (q < known.size() && known.indices().linear_index(q) == lin) {
        ++q;
        continue;
      }
      shape.unravel(lin, subs);
      for (Index n = 0; n < shape.order(); ++n) coords[n].push_back(static_cast<IndexList::Coord>(subs[n]));
    }
  }
  std::string text;
  if (!coords.front().empty()) {
    const IndexList list(shape, std::move(coords));
    Eigen::VectorXd values = ktensor_values_at(model, list);
    if (a.expm1) values = values.array().expm1();
    std::array<char, 32> buf{};
    for (std::size_t q = 0; q < list.size(); ++q) {
      for (Index n = 0; n < shape.order(); ++n) {
        text += std::to_string(list.at(q, n) + 1);
        text += ' ';
      }
      auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), values[static_cast<Eigen::Index>(q)]);
      text.append(buf.data(), ptr);
      text += '\n';
    }
  }
  write_output(c.out, text);
  return 0;
}

// CLI11 silently drops environment values that fail validation; treat them
// as usage errors like the equivalent flag would be.
void reject_ignored_env(const CLI::App& sub) {
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_envname();
    if (name.empty() || opt->count() > 0) continue;
    const char* value = std::getenv(name.c_str());
    if (value != nullptr && *value != '\0') {
      throw UsageError("invalid value '" + std::string(value) + "' in " + name);
    }
  }
}

}  // namespace


int main(int argc, char** argv) {
  CLI::App app{"CP factorization of incomplete tensors"};
  app.require_subcommand(1);
  Common c;

  GenArgs g;
  auto* gen = app.add_subcommand("gen", "generate a synthetic instance");
  flag(gen, "seed", c.seed, "random seed");
  flag(gen, "rank", c.rank, "number of components R")->check(CLI::PositiveNumber);
  flag(gen, "out", c.out, "output directory");
  flag(gen, "shape", g.shape, "tensor shape, e.g. 50x40x30");
  flag(gen, "missing", g.missing, "fraction of missing entries M")->check(CLI::Range(0.0, 1.0));
  flag(gen, "noise", g.noise, "relative noise level")->check(CLI::NonNegativeNumber);
  flag(gen, "pattern", g.pattern, "entries | fibers")->check(CLI::IsMember({"entries", "fibers"}));
  switch_flag(gen, "large", g.large, "sparse generation without any dense storage");
  flag(gen, "manifest", g.manifest, "replay a manifest written by an earlier gen");

  FitArgs f;
  auto* fit = app.add_subcommand("fit", "fit a CP model to a tensor file");
  fit->add_option("input", f.input, "tensor file")->required();
  add_fit_flags(fit, c);
  flag(fit, "method", c.method, "cpwopt | cpwopt-sparse | cpwopt-dense | em-als")
      ->check(CLI::IsMember({"cpwopt", "cpwopt-sparse", "cpwopt-dense", "em-als"}));
  flag(fit, "out", c.out, "model file to write");
  flag(fit, "result", f.result, "result JSON file (default: stdout)");
  switch_flag(fit, "log1p", c.log1p, "replace every value x by log(1 + x)");
  flag(fit, "center-mode", c.center_mode, "subtract per-slice means of known entries in this mode");
  flag(fit, "memory-budget", c.memory_budget_mb, "MiB allowed for densified data (dense methods)");

  EvalArgs e;
  auto* eval = app.add_subcommand("eval", "score a model");
  flag(eval, "model", e.model, "computed model file")->required();
  flag(eval, "truth", e.truth, "true model file (FMS)");
  flag(eval, "holdout", e.holdout, "held-out entries (TCS)");
  flag(eval, "data", e.data, "fitted tensor file (for rho)");
  flag(eval, "out", c.out, "report file (default: stdout)");

  BenchArgs b;
  auto* bench = app.add_subcommand("bench", "run an experiment sweep");
  add_fit_flags(bench, c);
  flag(bench, "out", c.out, "output directory");
  flag(bench, "spec", b.spec, "experiment spec JSON (overrides sweep flags)");
  flag(bench, "sizes", b.sizes, "comma-separated shapes");
  flag(bench, "missing", b.missing, "comma-separated missing fractions");
  flag(bench, "methods", b.methods, "comma-separated methods");
  flag(bench, "pattern", b.pattern, "entries | fibers")->check(CLI::IsMember({"entries", "fibers"}));
  flag(bench, "noise", b.noise, "relative noise level")->check(CLI::NonNegativeNumber);
  flag(bench, "instances", b.instances, "instances per cell")->check(CLI::PositiveNumber);
  flag(bench, "memory-budget", c.memory_budget_mb, "MiB allowed for dense instances");
  flag(bench, "aggregate", b.aggregate, "re-aggregate an existing records.jsonl instead of running");
  switch_flag(bench, "quiet", b.quiet, "no per-instance progress");

  CompleteArgs k;
  auto* complete = app.add_subcommand("complete", "evaluate a model at requested entries");
  flag(complete, "model", k.model, "model file")->required();
  flag(complete, "requests", k.requests, "file of 1-based index tuples");
  flag(complete, "data", k.data, "tensor file; every entry it lacks is requested");
  switch_flag(complete, "expm1", k.expm1, "undo --log1p: output exp(v) - 1");
  flag(complete, "out", c.out, "output file (default: stdout)");

  try {
    app.parse(argc, argv);
    for (const CLI::App* sub : app.get_subcommands()) reject_ignored_env(*sub);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen(c, g);
    if (*fit) return cmd_fit(c, f);
    if (*eval) return cmd_eval(c, e);
    if (*bench) return cmd_bench(c, b);
    if (*complete) return cmd_complete(c, k);
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& err) {
    std::cerr << "numerical failure: " << err.what() << "\n";
    return kExitNumerical;
  } catch (const IoError& err) {
    std::cerr << "I/O error: " << err.what() << "\n";
    return kExitIo;
  } catch (const ShapeError& err) {
    std::cerr << "dimension error: " << err.what() << "\n";
    return kExitIo;
  } catch (const IndexError& err) {
    std::cerr << "index error: " << err.what() << "\n";
    return kExitIo;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "I/O error: " << err.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}
