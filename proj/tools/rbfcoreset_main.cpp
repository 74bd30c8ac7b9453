// Command-line front end: coreset building, evaluation, subset-selection
// export with a sensitivity cache, oracle validation, the hard-instance demo,
// and the function-approximation comparison.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rbfcoreset/evaluation.hpp"
#include "rbfcoreset/geometry.hpp"
#include "rbfcoreset/io.hpp"
#include "rbfcoreset/rbfnn.hpp"
#include "rbfcoreset/sampling.hpp"
#include "rbfcoreset/sensitivity.hpp"
#include "rbfcoreset/types.hpp"

namespace {

using namespace rbfcoreset;

constexpr int kExitOk = 0;
constexpr int kExitIo = 2;
constexpr int kExitPrecondition = 3;
constexpr int kExitValidation = 4;

/// A quantitative check requested on the command line failed.
struct ValidationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Deterministic key-value report; timing lines are segregated so everything
// above [timing] is reproducible byte for byte.
class Report {
 public:
  void add(const std::string& key, const std::string& value) {
    lines_.emplace_back(key, value);
  }
  void add(const std::string& key, Real value) { add(key, io_detail::format_double(value)); }
  void add(const std::string& key, Index value) { add(key, std::to_string(value)); }
  void add(const std::string& key, int value) { add(key, std::to_string(value)); }
  void add(const std::string& key, std::uint64_t value) { add(key, std::to_string(value)); }
  void add(const std::string& key, bool value) { add(key, std::string(value ? "1" : "0")); }
  void add_timing(const std::string& key, double ms) {
    timings_.emplace_back(key, io_detail::format_double(ms));
  }

  void write(std::ostream& out) const {
    out << "[report]\n";
    for (const auto& [k, v] : lines_) out << k << " " << v << "\n";
    out << "[timing]\n";
    for (const auto& [k, v] : timings_) out << k << " " << v << "\n";
  }

  void finish(const std::string& path) const {
    write(std::cout);
    if (!path.empty()) {
      std::ofstream out(path);
      if (!out) throw IoError("cannot write report " + path);
      write(out);
    }
  }

 private:
  std::vector<std::pair<std::string, std::string>> lines_;
  std::vector<std::pair<std::string, std::string>> timings_;
};

struct RunConfig {
  std::string input_path;
  std::string format = "csv";
  std::string loss = "rbf";
  double radius = 1.0;
  int size = 1;
  std::uint64_t seed = 0;
  std::string mode = "lemma";
  bool normalize = false;
  int query_count = 1000;
  double query_radius = 0.0;  // 0 = pick the loss default
  std::string output_path;
  std::string report_path;
};

Loss parse_loss(const std::string& text) {
  if (text == "rbf") return Loss::Rbf;
  if (text == "laplacian") return Loss::Laplacian;
  throw InvalidInput("unknown loss '" + text + "'");
}

SensitivityMode parse_mode(const std::string& text) {
  if (text == "lemma") return SensitivityMode::Lemma;
  if (text == "algorithm1") return SensitivityMode::Algorithm1;
  throw InvalidInput("unknown mode '" + text + "'");
}

DataFormat parse_format(const std::string& text) {
  if (text == "csv") return DataFormat::Csv;
  if (text == "bin") return DataFormat::Bin;
  throw InvalidInput("unknown format '" + text + "'");
}

struct LoadedInput {
  WeightedPointSet set;
  Real effective_radius = 1.0;
};

LoadedInput load_input(const RunConfig& cfg, Loss loss) {
  LoadedInput out{read_points(cfg.input_path, parse_format(cfg.format)), 1.0};
  validate(out.set);
  if (loss == Loss::Rbf && !(cfg.radius >= 1.0))
    throw InvalidInput("radius must be >= 1 for the RBF loss");
  if (cfg.normalize) {
    out.set = normalize_to_unit_ball(out.set);
    // A query ball of radius R in the original coordinates has radius
    // R / scale after normalization; the bounds require at least 1.
    out.effective_radius = std::max(1.0, cfg.radius / out.set.scale);
  } else {
    out.effective_radius = cfg.radius;
  }
  return out;
}

SensitivityProfile compute_profile(const WeightedPointSet& set, Loss loss,
                                   SensitivityMode mode, Real radius) {
  return loss == Loss::Rbf ? rbf_sensitivity_bounds(set, radius, mode)
                           : laplacian_sensitivity_bounds(set);
}

void add_profile_stats(Report& report, const SensitivityProfile& profile) {
  report.add("total_sensitivity", profile.total);
  report.add("bound_min", profile.bounds.minCoeff());
  report.add("bound_max", profile.bounds.maxCoeff());
  report.add("bound_mean", profile.bounds.mean());
  report.add("conditioner_distortion", profile.conditioner_distortion);
  report.add("saturated", profile.saturated);
}

// Informative sample-size guidance from the analysis, at epsilon = delta =
// 0.1. The values are astronomically large for realistic radii, which is why
// m stays a user choice; log10 keeps them printable.
void add_theory_sizes(Report& report, const WeightedPointSet& set, Loss loss, Real radius) {
  const Real n = static_cast<Real>(set.size());
  const Real d = static_cast<Real>(set.dim());
  const Real eps = 0.1, delta = 0.1;
  if (loss == Loss::Rbf) {
    const Real log10m =
        (12.0 * radius * radius + 2.0 * std::log(radius) + 1.5 * std::log(d) -
         2.0 * std::log(eps) +
         std::log(radius * radius + std::log(d) + std::log(1.0 / delta))) /
        std::log(10.0);
    report.add("advisory_sample_size_log10", log10m);
  } else {
    const Real log10m =
        (0.5 * std::log(n) + 1.25 * std::log(d) - 2.0 * std::log(eps) +
         std::log(std::log(n) + std::log(d) + std::log(1.0 / delta))) /
        std::log(10.0);
    report.add("advisory_sample_size_log10", log10m);
  }
}

int cmd_build(const RunConfig& cfg) {
  Timer total_timer;
  Report report;
  const Loss loss = parse_loss(cfg.loss);
  const SensitivityMode mode = parse_mode(cfg.mode);
  if (cfg.size < 1) throw InvalidInput("size must be >= 1");

  Timer load_timer;
  const LoadedInput input = load_input(cfg, loss);
  report.add("command", std::string("build"));
  report.add("input", cfg.input_path);
  report.add("n", input.set.size());
  report.add("d", input.set.dim());
  report.add("loss", std::string(to_string(loss)));
  report.add("mode", std::string(to_string(mode)));
  report.add("radius", cfg.radius);
  report.add("effective_radius", input.effective_radius);
  report.add("normalize", cfg.normalize);
  report.add("scale", input.set.scale);
  report.add("m", cfg.size);
  report.add("seed", cfg.seed);
  report.add_timing("timing_ms_load", load_timer.ms());

  Timer profile_timer;
  const SensitivityProfile profile =
      compute_profile(input.set, loss, mode, input.effective_radius);
  report.add_timing("timing_ms_profile", profile_timer.ms());
  add_profile_stats(report, profile);
  add_theory_sizes(report, input.set, loss, input.effective_radius);

  Timer sample_timer;
  const Coreset coreset = build_coreset(input.set, profile, cfg.size, cfg.seed);
  report.add_timing("timing_ms_sample", sample_timer.ms());
  report.add("distinct_indices", static_cast<Index>(coreset.distinct_count()));

  if (!cfg.output_path.empty()) write_coreset_csv(cfg.output_path, coreset);
  report.add_timing("timing_ms_total", total_timer.ms());
  report.finish(cfg.report_path);
  return kExitOk;
}

struct EvalOptions {
  std::string coreset_path;
  bool compare_uniform = false;
  bool allow_outside_queries = false;
  bool include_data_queries = true;
};

int cmd_eval(const RunConfig& cfg, const EvalOptions& opts) {
  Timer total_timer;
  Report report;
  const Loss loss = parse_loss(cfg.loss);
  const LoadedInput input = load_input(cfg, loss);
  Coreset coreset = read_coreset_csv(opts.coreset_path);
  coreset.source_n = input.set.size();
  coreset.loss = loss;
  if (loss == Loss::Rbf) coreset.radius = input.effective_radius;

  const Real query_radius =
      cfg.query_radius > 0 ? cfg.query_radius
                           : (loss == Loss::Rbf ? input.effective_radius : 10.0);
  const std::vector<Vector> queries =
      sample_queries(input.set.dim(), cfg.query_count, query_radius, cfg.seed,
                     opts.include_data_queries ? &input.set : nullptr);

  EvalReport eval = evaluate(input.set, coreset, queries, loss, opts.allow_outside_queries);
  report.add("command", std::string("eval"));
  report.add("input", cfg.input_path);
  report.add("coreset", opts.coreset_path);
  report.add("loss", std::string(to_string(loss)));
  report.add("query_count", eval.query_count);
  report.add("query_radius", query_radius);
  report.add("sup_relative_error", eval.sup_error);
  report.add("mean_relative_error", eval.mean_error);

  if (opts.compare_uniform) {
    const Coreset uniform = uniform_coreset(input.set, cfg.size, cfg.seed);
    EvalReport base = evaluate(input.set, uniform, queries, loss, opts.allow_outside_queries);
    report.add("uniform_m", cfg.size);
    report.add("uniform_sup_relative_error", base.sup_error);
    report.add("uniform_mean_relative_error", base.mean_error);
    report.add("sup_error_ratio_uniform_over_coreset",
               base.sup_error / std::max(eval.sup_error, 1e-300));
    eval.comparison = std::make_shared<EvalReport>(std::move(base));
  }
  report.add_timing("timing_ms_total", total_timer.ms());
  report.finish(cfg.report_path);
  return kExitOk;
}

int cmd_select(const RunConfig& cfg) {
  Timer total_timer;
  Report report;
  const Loss loss = parse_loss(cfg.loss);
  const SensitivityMode mode = parse_mode(cfg.mode);
  if (cfg.size < 1) throw InvalidInput("size must be >= 1");
  if (loss == Loss::Rbf && !(cfg.radius >= 1.0))
    throw InvalidInput("radius must be >= 1 for the RBF loss");

  const std::uint64_t key =
      sensitivity_cache_key(cfg.input_path, loss, mode, cfg.radius, cfg.normalize);
  const std::filesystem::path cache_path =
      sensitivity_cache_path(cfg.input_path, key);

  const LoadedInput input = load_input(cfg, loss);
  bool cache_hit = false;
  SensitivityProfile profile;
  if (std::filesystem::exists(cache_path)) {
    profile = read_sensitivity_cache(cache_path);
    cache_hit = profile.bounds.size() == input.set.size();
  }
  if (!cache_hit) {
    profile = compute_profile(input.set, loss, mode, input.effective_radius);
    write_sensitivity_cache(cache_path, profile);
  }

  const Coreset coreset = build_coreset(input.set, profile, cfg.size, cfg.seed);
  if (!cfg.output_path.empty()) write_coreset_csv(cfg.output_path, coreset);

  report.add("command", std::string("select"));
  report.add("input", cfg.input_path);
  report.add("loss", std::string(to_string(loss)));
  report.add("mode", std::string(to_string(mode)));
  report.add("m", cfg.size);
  report.add("seed", cfg.seed);
  report.add("cache_hit", cache_hit);
  report.add("cache_file", cache_path.string());
  add_profile_stats(report, profile);
  report.add("distinct_indices", static_cast<Index>(coreset.distinct_count()));
  report.add("selected_weight_sum",
             Eigen::Map<const Vector>(coreset.weights.data(),
                                      static_cast<Index>(coreset.weights.size()))
                 .sum());
  report.add_timing("timing_ms_total", total_timer.ms());
  report.finish(cfg.report_path);
  return kExitOk;
}

int cmd_oracle(const RunConfig& cfg, int grid_resolution) {
  Timer total_timer;
  Report report;
  const Loss loss = parse_loss(cfg.loss);
  const SensitivityMode mode = parse_mode(cfg.mode);
  const LoadedInput input = load_input(cfg, loss);

  const SensitivityProfile profile =
      compute_profile(input.set, loss, mode, input.effective_radius);
  const Real query_radius =
      cfg.query_radius > 0 ? cfg.query_radius
                           : (loss == Loss::Rbf ? input.effective_radius : 10.0);
  const Vector oracle =
      brute_force_sensitivity(input.set, loss, query_radius, grid_resolution);

  Index violations = 0;
  Real worst_ratio = 0.0;
  for (Index i = 0; i < oracle.size(); ++i) {
    const Real slack = 1e-9 * std::max(1.0, profile.bounds(i));
    if (oracle(i) > profile.bounds(i) + slack) ++violations;
    worst_ratio = std::max(worst_ratio, oracle(i) / profile.bounds(i));
  }

  report.add("command", std::string("oracle"));
  report.add("input", cfg.input_path);
  report.add("loss", std::string(to_string(loss)));
  report.add("mode", std::string(to_string(mode)));
  report.add("grid_resolution", grid_resolution);
  report.add("query_radius", query_radius);
  report.add("oracle_total", oracle.sum());
  add_profile_stats(report, profile);
  report.add("bound_violations", violations);
  report.add("worst_oracle_over_bound", worst_ratio);
  report.add_timing("timing_ms_total", total_timer.ms());
  report.finish(cfg.report_path);
  if (violations > 0)
    throw ValidationFailure(std::to_string(violations) +
                            " oracle sensitivities exceed their bounds");
  return kExitOk;
}

int cmd_lowerbound(Index n, Index d, const std::string& generator_name,
                   int grid_resolution, const RunConfig& cfg) {
  Timer total_timer;
  Report report;
  LowerBoundGenerator generator;
  if (generator_name == "closed-form") {
    generator = LowerBoundGenerator::ClosedFormRadius;
  } else if (generator_name == "separated") {
    generator = LowerBoundGenerator::GuaranteedSeparation;
  } else {
    throw InvalidInput("unknown generator '" + generator_name + "'");
  }

  const WeightedPointSet instance = lower_bound_instance(n, d, generator);
  const Real sphere_radius = instance.points.rowwise().norm().maxCoeff();
  const Vector oracle = brute_force_sensitivity(
      instance, Loss::Rbf, sphere_radius, grid_resolution);

  report.add("command", std::string("lowerbound"));
  report.add("n", n);
  report.add("d", d);
  report.add("generator", generator_name);
  report.add("sphere_radius", sphere_radius);
  report.add("min_sensitivity", oracle.minCoeff());
  report.add("max_sensitivity", oracle.maxCoeff());
  report.add("total_sensitivity", oracle.sum());
  report.add("half_n", 0.5 * static_cast<Real>(n));
  report.add_timing("timing_ms_total", total_timer.ms());
  report.finish(cfg.report_path);

  if (generator == LowerBoundGenerator::GuaranteedSeparation) {
    if (oracle.minCoeff() < 0.5 - 1e-9 ||
        oracle.sum() < 0.5 * static_cast<Real>(n))
      throw ValidationFailure("hard instance failed the sensitivity floor");
  }
  return kExitOk;
}

void dump_surface(const std::filesystem::path& path, Real radius, int resolution,
                  const std::function<Real(const Vector&)>& fn) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  Vector x(2);
  for (int i = 0; i < resolution; ++i) {
    x(0) = -radius + 2.0 * radius * i / (resolution - 1);
    for (int j = 0; j < resolution; ++j) {
      x(1) = -radius + 2.0 * radius * j / (resolution - 1);
      out << io_detail::format_double(x(0)) << " " << io_detail::format_double(x(1))
          << " " << io_detail::format_double(fn(x)) << "\n";
    }
    out << "\n";
  }
}

int cmd_funcapprox(int n, int subset, int seeds, int centers, Real ridge,
                   const std::string& surface_dir, const RunConfig& cfg) {
  Timer total_timer;
  Report report;
  const FunctionApproxReport result =
      function_approx_experiment(n, subset, seeds, centers, ridge, cfg.seed);

  report.add("command", std::string("funcapprox"));
  report.add("n", n);
  report.add("subset", subset);
  report.add("seeds", seeds);
  report.add("centers", centers);
  report.add("ridge", ridge);
  report.add("seed", cfg.seed);
  report.add("full_rmse", result.full_rmse);
  report.add("uniform_median_rmse", result.uniform_arm.median_rmse);
  report.add("coreset_median_rmse", result.coreset_arm.median_rmse);
  for (std::size_t s = 0; s < result.uniform_arm.rmse_per_seed.size(); ++s) {
    report.add("uniform_rmse_" + std::to_string(s), result.uniform_arm.rmse_per_seed[s]);
    report.add("coreset_rmse_" + std::to_string(s), result.coreset_arm.rmse_per_seed[s]);
  }

  if (!surface_dir.empty()) {
    std::filesystem::create_directories(surface_dir);
    const std::filesystem::path dir(surface_dir);
    constexpr int kRes = 61;
    constexpr Real kRadius = 1.5;
    dump_surface(dir / "target.dat", kRadius, kRes, funcapprox_target);
    dump_surface(dir / "full.dat", kRadius, kRes,
                 [&](const Vector& x) { return rbfnn_eval(result.full_model, x); });
    dump_surface(dir / "uniform.dat", kRadius, kRes,
                 [&](const Vector& x) { return rbfnn_eval(result.last_uniform_model, x); });
    dump_surface(dir / "coreset.dat", kRadius, kRes,
                 [&](const Vector& x) { return rbfnn_eval(result.last_coreset_model, x); });
    report.add("surface_dir", surface_dir);
  }
  report.add_timing("timing_ms_total", total_timer.ms());
  report.finish(cfg.report_path);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sensitivity-sampled coresets for RBF and Laplacian losses"};
  app.require_subcommand(1);

  RunConfig cfg;
  EvalOptions eval_opts;
  int grid_resolution = 201;
  Index lb_n = 100;
  Index lb_d = 3;
  std::string lb_generator = "separated";
  int fa_n = 10000, fa_subset = 400, fa_seeds = 10, fa_centers = 64;
  double fa_ridge = 1e-8;
  std::string fa_surface_dir;

  const auto add_common = [&](CLI::App* cmd, bool with_mode) {
    cmd->add_option("--input", cfg.input_path, "Input data file")->required();
    cmd->add_option("--format", cfg.format, "Input format: csv or bin");
    cmd->add_option("--loss", cfg.loss, "Loss: rbf or laplacian");
    cmd->add_option("--radius", cfg.radius, "Query-ball radius R (RBF, >= 1)");
    cmd->add_option("--seed", cfg.seed, "Random seed");
    cmd->add_flag("--normalize", cfg.normalize,
                  "Rescale points into the unit ball before bounding");
    cmd->add_option("--report", cfg.report_path, "Write the report here too");
    if (with_mode)
      cmd->add_option("--mode", cfg.mode, "Sensitivity constants: lemma or algorithm1");
  };

  CLI::App* build = app.add_subcommand("build", "Build a coreset and write it to CSV");
  add_common(build, true);
  build->add_option("--size", cfg.size, "Number of draws m")->required();
  build->add_option("--output", cfg.output_path, "Coreset CSV path")->required();

  CLI::App* eval = app.add_subcommand("eval", "Measure coreset relative error over queries");
  add_common(eval, false);
  eval->add_option("--coreset", eval_opts.coreset_path, "Coreset CSV path")->required();
  eval->add_option("--query-count", cfg.query_count, "Number of sampled queries");
  eval->add_option("--query-radius", cfg.query_radius, "Query sampling radius");
  eval->add_option("--size", cfg.size, "m for the uniform baseline");
  eval->add_flag("--compare-uniform", eval_opts.compare_uniform,
                 "Also evaluate a uniform sample of the same size");
  eval->add_flag("--allow-outside-queries", eval_opts.allow_outside_queries,
                 "Permit RBF queries outside the radius-R ball");
  eval->add_flag("!--no-data-queries", eval_opts.include_data_queries,
                 "Do not append the data points to the query set");

  CLI::App* select = app.add_subcommand(
      "select", "Export index,weight rows for external training; caches the profile");
  add_common(select, true);
  select->add_option("--size", cfg.size, "Number of draws m")->required();
  select->add_option("--output", cfg.output_path, "Selection CSV path")->required();

  CLI::App* oracle = app.add_subcommand(
      "oracle", "Check analytic bounds against the brute-force sensitivity oracle");
  add_common(oracle, true);
  oracle->add_option("--grid-resolution", grid_resolution, "Grid nodes per axis");
  oracle->add_option("--query-radius", cfg.query_radius, "Oracle sweep radius");

  CLI::App* lowerbound = app.add_subcommand(
      "lowerbound", "Generate a hard instance and certify per-point sensitivity >= 1/2");
  lowerbound->add_option("--n", lb_n, "Number of points");
  lowerbound->add_option("--d", lb_d, "Ambient dimension (>= 3)");
  lowerbound->add_option("--generator", lb_generator, "closed-form or separated");
  lowerbound->add_option("--grid-resolution", grid_resolution, "Grid nodes per axis");
  lowerbound->add_option("--report", cfg.report_path, "Write the report here too");

  CLI::App* funcapprox = app.add_subcommand(
      "funcapprox", "Function-approximation comparison: full vs uniform vs coreset");
  funcapprox->add_option("--n", fa_n, "Training points");
  funcapprox->add_option("--subset", fa_subset, "Subset size per arm");
  funcapprox->add_option("--seeds", fa_seeds, "Subsampling repetitions");
  funcapprox->add_option("--centers", fa_centers, "Hidden-layer size");
  funcapprox->add_option("--ridge", fa_ridge, "Ridge regularizer");
  funcapprox->add_option("--seed", cfg.seed, "Random seed");
  funcapprox->add_option("--surface-dir", fa_surface_dir,
                         "Write gnuplot surface dumps into this directory");
  funcapprox->add_option("--report", cfg.report_path, "Write the report here too");

  try {
    app.parse(argc, argv);
    if (build->parsed()) return cmd_build(cfg);
    if (eval->parsed()) return cmd_eval(cfg, eval_opts);
    if (select->parsed()) return cmd_select(cfg);
    if (oracle->parsed()) return cmd_oracle(cfg, grid_resolution);
    if (lowerbound->parsed())
      return cmd_lowerbound(lb_n, lb_d, lb_generator, grid_resolution, cfg);
    if (funcapprox->parsed())
      return cmd_funcapprox(fa_n, fa_subset, fa_seeds, fa_centers, fa_ridge,
                            fa_surface_dir, cfg);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitIo;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationFailure& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPrecondition;
  }
}
