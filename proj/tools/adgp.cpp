// Command-line front end: adaptive runs, posterior sampling, HPD boxes,
// multi-run design comparison, design generation and model evaluation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "adgp/experiment.hpp"

namespace fs = std::filesystem;
using namespace adgp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::string fmt_vector(const Vector& v) {
  std::ostringstream os;
  os.precision(17);
  for (Index i = 0; i < v.size(); ++i) os << (i ? "," : "") << v(i);
  return os.str();
}

void snapshot_config(RunDirectory& dir, const fs::path& config) {
  fs::copy_file(config, dir.file("config.ini"), fs::copy_options::overwrite_existing);
  dir.add("config.ini");
}

std::string hpd_csv(const HpdSummary& h) {
  std::ostringstream os;
  os.precision(17);
  os << "dim,lower,upper\n";
  for (Index d = 0; d < h.dim(); ++d) os << d + 1 << ',' << h.lower(d) << ',' << h.upper(d) << '\n';
  return os.str();
}

// ---------------------------------------------------------------- run-adaptive

struct RunAdaptiveArgs {
  std::string config;
  std::string out;
  long long seed = -1;
  int threads = 0;
};

int run_adaptive_cmd(const RunAdaptiveArgs& a) {
  ExperimentConfig cfg = load_config(a.config);
  if (a.seed >= 0) cfg.adaptive.seed = static_cast<std::uint64_t>(a.seed);
  if (a.threads > 0) cfg.adaptive.threads = a.threads;
  const fs::path out =
      a.out.empty() ? fs::path("runs") / (cfg.name + "-seed" + std::to_string(cfg.adaptive.seed))
                    : fs::path(a.out);

  const auto model = make_model(cfg.model);
  const MeasurementModel meas = make_measurements(cfg, *model);
  RunDirectory dir(out);
  snapshot_config(dir, a.config);
  dir.write_text("seed.txt", std::to_string(cfg.adaptive.seed) + "\n");

  spdlog::info("adaptive run '{}' seed {} -> {}", cfg.name, cfg.adaptive.seed, out.string());
  const AdaptiveResult result = run_adaptive(*model, meas, cfg.adaptive);
  save_adaptive_run(dir, result);

  const RunRecord& rec = result.record;
  const bool failed = rec.termination == Termination::model_failure ||
                      rec.termination == Termination::surrogate_failure;
  dir.write_manifest(to_string(rec.termination), failed);
  spdlog::info("terminated: {} after {} added points, g_min {:.6g}, relative EI {:.4g}",
               to_string(rec.termination), rec.points_added(), rec.final_g_min(),
               rec.final_relative_improvement());
  if (failed) {
    spdlog::error("{}", rec.message);
    return kExitNumerical;
  }
  return kExitOk;
}

// ------------------------------------------------------------ sample-posterior

struct SamplePosteriorArgs {
  std::string config;
  std::string likelihood = "surrogate";
  std::string run;
  std::string out;
  Index n = -1;
  long long seed = -1;
  Index walkers = -1;
  Index burn_in = -2;
  double alpha = -1.0;
  int threads = 0;
};

int sample_posterior_cmd(const SamplePosteriorArgs& a) {
  fs::path config_path = a.config;
  if (config_path.empty()) {
    if (a.run.empty()) throw ConfigError("either --config or --run is required");
    config_path = fs::path(a.run) / "config.ini";
  }
  ExperimentConfig cfg = load_config(config_path);
  PosteriorOptions opts = cfg.posterior.options;
  if (a.n > 0) opts.n_samples = a.n;
  if (a.seed >= 0) opts.seed = static_cast<std::uint64_t>(a.seed);
  if (a.walkers > 0) opts.n_walkers = a.walkers;
  if (a.burn_in >= -1) opts.burn_in = a.burn_in;
  if (a.threads > 0) opts.threads = a.threads;
  const double alpha = a.alpha > 0.0 ? a.alpha : cfg.posterior.alpha;

  const auto base = make_model(cfg.model);
  const MeasurementModel meas = make_measurements(cfg, *base);
  auto counted = std::make_shared<CountingModel>(base);
  const BoxPrior prior(cfg.adaptive.bounds.lower, cfg.adaptive.bounds.upper);

  LogProb loglik;
  if (a.likelihood == "true") {
    loglik = true_loglik_fn(counted, meas);
  } else if (a.likelihood == "surrogate") {
    if (a.run.empty()) throw ConfigError("--likelihood surrogate needs --run");
    loglik = surrogate_loglik_fn(load_surrogate(a.run, base->input_dim()), meas);
  } else {
    throw ConfigError("--likelihood must be 'true' or 'surrogate'");
  }

  const fs::path out = a.out.empty() ? fs::path(a.run.empty() ? "posterior-true" : a.run) /
                                           ("posterior-" + a.likelihood)
                                     : fs::path(a.out);
  RunDirectory dir(out);
  snapshot_config(dir, config_path);
  spdlog::info("sampling {} posterior: {} samples, {} walkers, seed {}", a.likelihood,
               opts.n_samples, opts.n_walkers, opts.seed);
  const PosteriorSampleSet set = sample_posterior(loglik, prior, opts, a.likelihood);

  const long calls = counted->count();
  if (a.likelihood == "surrogate" && calls != 0)
    throw std::logic_error("surrogate posterior evaluated the forward model");

  std::ostringstream samples;
  write_samples_csv(samples, set.samples);
  dir.write_text("samples.csv", samples.str());
  const HpdSummary hpd = hpd_region(set.samples, alpha);
  dir.write_text("hpd.csv", hpd_csv(hpd));

  nlohmann::json meta = {{"source", set.source},
                         {"seed", set.seed},
                         {"n_samples", set.samples.rows()},
                         {"n_walkers", set.n_walkers},
                         {"n_steps", set.n_steps},
                         {"burn_in", set.burn_in},
                         {"acceptance_rate", set.acceptance_rate},
                         {"relocated_walkers", set.relocated},
                         {"model_evaluations", calls},
                         {"alpha", alpha},
                         {"run", a.run}};
  dir.write_text("posterior.json", meta.dump(2) + "\n");
  dir.write_manifest("ok", false);

  for (Index d = 0; d < hpd.dim(); ++d)
    std::printf("theta%td [%.4f, %.4f]\n", d + 1, hpd.lower(d), hpd.upper(d));
  return kExitOk;
}

// ---------------------------------------------------------------------- hpd

int hpd_cmd(const std::string& samples, double alpha) {
  const HpdSummary h = hpd_region(read_csv_matrix(samples), alpha);
  std::cout << hpd_csv(h);
  return kExitOk;
}

// ---------------------------------------------------------- compare-designs

struct CompareArgs {
  std::string config;
  std::string out;
  Index runs = 10;
  long long base_seed = -1;
  int jobs = 1;
  Index lhs_size = 0;
  bool lhs = false;
  bool posterior = false;
};

int compare_designs_cmd(const CompareArgs& a) {
  const ExperimentConfig cfg = load_config(a.config);
  if (a.runs < 1) throw ConfigError("--runs must be positive");
  const std::uint64_t base =
      a.base_seed >= 0 ? static_cast<std::uint64_t>(a.base_seed) : cfg.adaptive.seed;
  const fs::path out = a.out.empty() ? fs::path("runs") / (cfg.name + "-compare") : fs::path(a.out);
  const auto model = make_model(cfg.model);
  const MeasurementModel meas = make_measurements(cfg, *model);
  const BoxPrior prior(cfg.adaptive.bounds.lower, cfg.adaptive.bounds.upper);
  const Index init = cfg.adaptive.initial_design.rows() > 0 ? cfg.adaptive.initial_design.rows()
                                                            : cfg.adaptive.initial_lhs_points;
  const Index lhs_n = a.lhs_size > 0 ? a.lhs_size : init + cfg.adaptive.n_max;

  RunDirectory top(out);
  snapshot_config(top, a.config);

  const auto r_count = static_cast<std::size_t>(a.runs);
  std::vector<RunRecord> records(r_count);
  std::vector<HpdSummary> adaptive_hpd(r_count), lhs_hpd(r_count);
  std::vector<std::string> errors(r_count);
  std::mutex log_mutex;

  parallel_for(a.runs, a.jobs, [&](Index r) {
    const auto i = static_cast<std::size_t>(r);
    try {
      AdaptiveConfig ac = cfg.adaptive;
      ac.seed = base + static_cast<std::uint64_t>(r);
      ac.threads = 1;
      const std::string name = "run" + std::to_string(r + 1);
      RunDirectory dir(out / name);
      const AdaptiveResult res = run_adaptive(*model, meas, ac);
      save_adaptive_run(dir, res);
      records[i] = res.record;
      PosteriorOptions po = cfg.posterior.options;
      po.threads = 1;
      if (a.posterior && res.ensemble) {
        po.seed = mix_seed(cfg.posterior.options.seed, static_cast<std::uint64_t>(r));
        adaptive_hpd[i] = hpd_region(
            sample_posterior(surrogate_loglik_fn(res.ensemble, meas), prior, po, "surrogate").samples,
            cfg.posterior.alpha);
        dir.write_text("hpd.csv", hpd_csv(adaptive_hpd[i]));
      }
      if (a.lhs) {
        const Matrix design = latin_hypercube(lhs_n, cfg.adaptive.bounds, mix_seed(ac.seed, 1000));
        const auto ens = fit_fixed_design(*model, design, ac, mix_seed(ac.seed, 1001));
        RunDirectory ldir(out / ("lhs" + std::to_string(r + 1)));
        std::ostringstream d;
        write_training_csv(d, ens->training().inputs(), ens->training().raw_outputs());
        ldir.write_text("design.csv", d.str());
        if (a.posterior) {
          po.seed = mix_seed(cfg.posterior.options.seed, 1000 + static_cast<std::uint64_t>(r));
          lhs_hpd[i] = hpd_region(
              sample_posterior(surrogate_loglik_fn(ens, meas), prior, po, "surrogate").samples,
              cfg.posterior.alpha);
          ldir.write_text("hpd.csv", hpd_csv(lhs_hpd[i]));
        }
        ldir.write_manifest("ok", false);
      }
      const bool failed = res.record.termination == Termination::model_failure ||
                          res.record.termination == Termination::surrogate_failure;
      dir.write_manifest(to_string(res.record.termination), failed);
      std::lock_guard lock(log_mutex);
      spdlog::info("{}: {} with {} points, g_min {:.6g}", name, to_string(res.record.termination),
                   res.record.final_inputs.rows(), res.record.final_g_min());
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  std::ostringstream table;
  table.precision(10);
  table << "run,seed,final_n_train,final_g_min,final_relative_ei,threshold_met,termination\n";
  bool any_failed = false;
  for (std::size_t i = 0; i < r_count; ++i) {
    if (!errors[i].empty()) {
      spdlog::error("run {} failed: {}", i + 1, errors[i]);
      any_failed = true;
      continue;
    }
    const RunRecord& rec = records[i];
    any_failed = any_failed || rec.termination == Termination::model_failure ||
                 rec.termination == Termination::surrogate_failure;
    table << i + 1 << ',' << rec.seed << ',' << rec.final_inputs.rows() << ',' << rec.final_g_min()
          << ',' << rec.final_relative_improvement() << ',' << (rec.threshold_met() ? "yes" : "no")
          << ',' << to_string(rec.termination) << '\n';
  }
  top.write_text("table.csv", table.str());
  if (a.posterior) {
    std::ostringstream h;
    h.precision(10);
    h << "design,run,dim,lower,upper\n";
    const auto dump = [&](const char* kind, const std::vector<HpdSummary>& v) {
      for (std::size_t i = 0; i < v.size(); ++i)
        for (Index d = 0; d < v[i].dim(); ++d)
          h << kind << ',' << i + 1 << ',' << d + 1 << ',' << v[i].lower(d) << ','
            << v[i].upper(d) << '\n';
    };
    dump("adaptive", adaptive_hpd);
    if (a.lhs) dump("lhs", lhs_hpd);
    top.write_text("hpd.csv", h.str());
  }
  top.write_manifest(any_failed ? "failed" : "ok", any_failed);
  std::cout << table.str();
  return any_failed ? kExitNumerical : kExitOk;
}

// --------------------------------------------------------------- gen-design

int gen_design_cmd(const std::string& kind, Index n, const std::string& lower,
                   const std::string& upper, std::uint64_t seed, Index skip,
                   const std::string& out) {
  const DesignBox box(parse_vector(lower), parse_vector(upper));
  Matrix pts;
  if (kind == "lhs")
    pts = latin_hypercube(n, box, seed);
  else if (kind == "sobol")
    pts = sobol(n, box, skip);
  else if (kind == "grid")
    pts = uniform_grid_1d(n, box);
  else
    throw ConfigError("--kind must be lhs, sobol or grid");
  if (out.empty()) {
    write_points_csv(std::cout, pts);
  } else {
    std::ofstream f(out);
    write_points_csv(f, pts);
  }
  return kExitOk;
}

// --------------------------------------------------------------- eval-model

int eval_model_cmd(const std::string& config, const std::string& theta_text, bool fine,
                   const std::string& field) {
  const ExperimentConfig cfg = load_config(config);
  const auto model = make_model(cfg.model);
  const Vector theta = parse_vector(theta_text);
  if (theta.size() != model->input_dim()) throw ConfigError("--theta has the wrong dimension");
  const Vector y = fine ? model->evaluate_fine(theta) : model->evaluate(theta);
  const MeasurementModel meas = make_measurements(cfg, *model);
  std::printf("outputs %s\n", fmt_vector(y).c_str());
  std::printf("misfit %.10g\n", misfit(y, meas));

  if (!field.empty()) {
    std::ofstream f(field);
    if (cfg.model.kind == "heat_source_2d") {
      GridSolverConfig g;
      g.nx = g.ny = fine ? cfg.model.fine_nx : cfg.model.nx;
      g.dt = fine ? cfg.model.fine_dt : cfg.model.dt;
      const HeatSolver solver(g);
      const double t_end = g.t_end;
      write_grid_field(f, solver.grid(), solver.solve(theta, {t_end}).front());
    } else if (cfg.model.kind == "darcy_2d") {
      const Index n = fine ? cfg.model.fine_nx : cfg.model.nx;
      const DarcySolver solver(n, n, cfg.model.normalized_sources);
      write_grid_field(f, solver.grid(), solver.solve(theta));
    } else {
      throw CapabilityError("model '" + cfg.model.kind + "' has no spatial field");
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("adgp"));
  spdlog::set_pattern("[%H:%M:%S] %v");

  CLI::App app{"Adaptive Gaussian-process surrogates for Bayesian inverse problems"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  RunAdaptiveArgs ra;
  auto* c_run = app.add_subcommand("run-adaptive", "Run the adaptive design loop");
  c_run->add_option("--config", ra.config, "Experiment configuration")->required()->check(CLI::ExistingFile);
  c_run->add_option("--seed", ra.seed, "Override the adaptive seed");
  c_run->add_option("--out", ra.out, "Run directory");
  c_run->add_option("--threads", ra.threads, "Worker threads");

  SamplePosteriorArgs sp;
  auto* c_post = app.add_subcommand("sample-posterior", "Sample the parameter posterior");
  c_post->add_option("--config", sp.config, "Experiment configuration (default: RUN/config.ini)");
  c_post->add_option("--likelihood", sp.likelihood, "true or surrogate")
      ->check(CLI::IsMember({"true", "surrogate"}));
  c_post->add_option("--run", sp.run, "Run directory holding the surrogate");
  c_post->add_option("--out", sp.out, "Output directory");
  c_post->add_option("--n", sp.n, "Number of samples");
  c_post->add_option("--seed", sp.seed, "Sampler seed");
  c_post->add_option("--walkers", sp.walkers, "Number of walkers");
  c_post->add_option("--burn-in", sp.burn_in, "Burn-in sweeps (-1: as many as kept)");
  c_post->add_option("--alpha", sp.alpha, "HPD credibility complement");
  c_post->add_option("--threads", sp.threads, "Worker threads");

  std::string hpd_samples;
  double hpd_alpha = 0.05;
  auto* c_hpd = app.add_subcommand("hpd", "Per-dimension HPD intervals of a sample CSV");
  c_hpd->add_option("--samples", hpd_samples, "Sample CSV")->required()->check(CLI::ExistingFile);
  c_hpd->add_option("--alpha", hpd_alpha, "Credibility complement");

  CompareArgs cd;
  auto* c_cmp = app.add_subcommand("compare-designs", "Multi-run adaptive versus Latin hypercube study");
  c_cmp->add_option("--config", cd.config, "Experiment configuration")->required()->check(CLI::ExistingFile);
  c_cmp->add_option("--runs", cd.runs, "Number of runs");
  c_cmp->add_option("--seed", cd.base_seed, "Seed of the first run (run r uses seed + r - 1)");
  c_cmp->add_option("--jobs", cd.jobs, "Runs executed concurrently");
  c_cmp->add_option("--out", cd.out, "Output directory");
  c_cmp->add_flag("--lhs", cd.lhs, "Also fit surrogates on Latin hypercube designs");
  c_cmp->add_option("--lhs-size", cd.lhs_size, "Latin hypercube size (default: initial + n_max)");
  c_cmp->add_flag("--posterior", cd.posterior, "Compute surrogate-posterior HPD boxes");

  std::string gd_kind = "lhs", gd_lower, gd_upper, gd_out;
  Index gd_n = 10, gd_skip = 0;
  std::uint64_t gd_seed = 1;
  auto* c_gen = app.add_subcommand("gen-design", "Generate a design as CSV");
  c_gen->add_option("--kind", gd_kind, "lhs, sobol or grid");
  c_gen->add_option("--n", gd_n, "Number of points");
  c_gen->add_option("--lower", gd_lower, "Comma-separated lower bounds")->required();
  c_gen->add_option("--upper", gd_upper, "Comma-separated upper bounds")->required();
  c_gen->add_option("--seed", gd_seed, "Seed (lhs)");
  c_gen->add_option("--skip", gd_skip, "Leading Sobol points to skip");
  c_gen->add_option("--out", gd_out, "Output file (default: stdout)");

  std::string em_config, em_theta, em_field;
  bool em_fine = false;
  auto* c_eval = app.add_subcommand("eval-model", "Evaluate the forward model at one input");
  c_eval->add_option("--config", em_config, "Experiment configuration")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--theta", em_theta, "Comma-separated input")->required();
  c_eval->add_flag("--fine", em_fine, "Use the fine discretization");
  c_eval->add_option("--field", em_field, "Write the final spatial field to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  if (quiet) spdlog::set_level(spdlog::level::warn);

  try {
    if (c_run->parsed()) return run_adaptive_cmd(ra);
    if (c_post->parsed()) return sample_posterior_cmd(sp);
    if (c_hpd->parsed()) return hpd_cmd(hpd_samples, hpd_alpha);
    if (c_cmp->parsed()) return compare_designs_cmd(cd);
    if (c_gen->parsed()) return gen_design_cmd(gd_kind, gd_n, gd_lower, gd_upper, gd_seed, gd_skip, gd_out);
    if (c_eval->parsed()) return eval_model_cmd(em_config, em_theta, em_fine, em_field);
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return kExitConfig;
  } catch (const ContractError& e) {
    spdlog::error("invalid input: {}", e.what());
    return kExitConfig;
  } catch (const CapabilityError& e) {
    spdlog::error("unsupported: {}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("failure: {}", e.what());
    return kExitNumerical;
  }
  return kExitConfig;
}
