#include "adgp/experiment.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>
#include <openssl/evp.h>

namespace adgp {

namespace pt = boost::property_tree;

Vector parse_vector(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) throw ConfigError("empty entry in list '" + text + "'");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item.substr(b), &used);
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + item + "'");
    }
    if (item.find_first_not_of(" \t", b + used) != std::string::npos)
      throw ConfigError("not a number: '" + item + "'");
    vals.push_back(v);
  }
  if (vals.empty()) throw ConfigError("empty list");
  return Eigen::Map<const Vector>(vals.data(), static_cast<Index>(vals.size()));
}

Matrix parse_matrix(const std::string& text) {
  std::vector<Vector> rows;
  std::stringstream ss(text);
  std::string row;
  while (std::getline(ss, row, ';')) rows.push_back(parse_vector(row));
  if (rows.empty()) throw ConfigError("empty matrix");
  Matrix m(static_cast<Index>(rows.size()), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) throw ConfigError("ragged matrix '" + text + "'");
    m.row(static_cast<Index>(i)) = rows[i].transpose();
  }
  return m;
}

namespace {

template <typename T>
T get(const pt::ptree& tree, const std::string& key, const T& fallback) {
  try {
    return tree.get<T>(key, fallback);
  } catch (const pt::ptree_bad_data&) {
    throw ConfigError("bad value for '" + key + "'");
  }
}

template <typename T>
T need(const pt::ptree& tree, const std::string& key) {
  try {
    return tree.get<T>(key);
  } catch (const pt::ptree_bad_path&) {
    throw ConfigError("missing key '" + key + "'");
  } catch (const pt::ptree_bad_data&) {
    throw ConfigError("bad value for '" + key + "'");
  }
}

bool get_bool(const pt::ptree& tree, const std::string& key, bool fallback) {
  const std::string v = get<std::string>(tree, key, fallback ? "true" : "false");
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("bad boolean for '" + key + "': " + v);
}

}  // namespace

ExperimentConfig load_config(const std::filesystem::path& path) {
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(e.what());
  }

  ExperimentConfig cfg;
  cfg.source = path;
  cfg.name = get<std::string>(tree, "experiment.name", path.stem().string());
  if (auto ref = tree.get_optional<double>("experiment.reference_g_star")) cfg.reference_g_star = *ref;

  ModelSettings& m = cfg.model;
  m.kind = need<std::string>(tree, "model.kind");
  m.nx = get<Index>(tree, "model.nx", m.nx);
  m.dt = get<double>(tree, "model.dt", m.dt);
  m.fine_nx = get<Index>(tree, "model.fine_nx", m.fine_nx);
  m.fine_dt = get<double>(tree, "model.fine_dt", m.fine_dt);
  m.normalized_sources = get_bool(tree, "model.normalized_sources", m.normalized_sources);
  try {
    m.layout = parse_sensor_layout(get<std::string>(tree, "model.sensor_layout", "interior"));
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }

  cfg.data.theta_true = parse_vector(need<std::string>(tree, "data.theta_true"));
  cfg.data.noise_sd = need<double>(tree, "data.noise_sd");
  cfg.data.seed = get<std::uint64_t>(tree, "data.seed", cfg.data.seed);

  AdaptiveConfig& a = cfg.adaptive;
  try {
    a.bounds = DesignBox(parse_vector(need<std::string>(tree, "design.lower")),
                         parse_vector(need<std::string>(tree, "design.upper")));
    if (auto init = tree.get_optional<std::string>("design.initial")) {
      a.initial_design = parse_matrix(*init);
      // A single row of scalars lists 1-D points.
      if (a.bounds.dim() == 1 && a.initial_design.rows() == 1)
        a.initial_design.transposeInPlace();
    }
    a.initial_lhs_points = get<Index>(tree, "design.initial_lhs", 0);

    a.eps_thresh = get<double>(tree, "adaptive.eps_thresh", a.eps_thresh);
    a.n_max = get<Index>(tree, "adaptive.n_max", a.n_max);
    a.starts = parse_start_design(get<std::string>(tree, "adaptive.starts", "sobol"));
    a.n_starts = get<Index>(tree, "adaptive.n_starts", a.n_starts);
    a.confirm_starts = get<Index>(tree, "adaptive.confirm_starts", a.confirm_starts);
    a.eta = get<double>(tree, "adaptive.eta", a.eta);
    a.seed = get<std::uint64_t>(tree, "adaptive.seed", 1);
    a.threads = get<int>(tree, "adaptive.threads", 1);

    a.hyper_prior = BoxPrior(parse_vector(need<std::string>(tree, "hyper.lower")),
                             parse_vector(need<std::string>(tree, "hyper.upper")));
    a.hyper_walkers = get<Index>(tree, "hyper.walkers", a.hyper_walkers);
    a.hyper_steps = get<Index>(tree, "hyper.steps", a.hyper_steps);
    a.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }

  PosteriorOptions& p = cfg.posterior.options;
  p.n_samples = get<Index>(tree, "posterior.samples", p.n_samples);
  p.n_walkers = get<Index>(tree, "posterior.walkers", p.n_walkers);
  p.burn_in = get<Index>(tree, "posterior.burn_in", p.burn_in);
  p.thin = get<Index>(tree, "posterior.thin", p.thin);
  p.seed = get<std::uint64_t>(tree, "posterior.seed", 1);
  p.threads = a.threads;
  cfg.posterior.alpha = get<double>(tree, "posterior.alpha", cfg.posterior.alpha);

  const auto model = make_model(m);
  if (model->input_dim() != a.bounds.dim())
    throw ConfigError("design box dimension does not match model " + m.kind);
  if (cfg.data.theta_true.size() != model->input_dim())
    throw ConfigError("theta_true dimension does not match model " + m.kind);
  if (!(cfg.data.noise_sd > 0.0)) throw ConfigError("noise_sd must be positive");
  return cfg;
}

std::shared_ptr<const ForwardModel> make_model(const ModelSettings& s) {
  if (s.kind == "rational_1d") return std::make_shared<RationalModel>();
  try {
    if (s.kind == "heat_source_2d") {
      GridSolverConfig coarse, fine;
      coarse.nx = coarse.ny = s.nx;
      coarse.dt = s.dt;
      fine.nx = fine.ny = s.fine_nx;
      fine.dt = s.fine_dt;
      return std::make_shared<HeatSourceModel>(coarse, fine, s.layout);
    }
    if (s.kind == "darcy_2d")
      return std::make_shared<DarcyModel>(s.nx, s.fine_nx, s.layout, s.normalized_sources);
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown model kind '" + s.kind + "'");
}

MeasurementModel make_measurements(const ExperimentConfig& cfg, const ForwardModel& model) {
  const double var = cfg.data.noise_sd * cfg.data.noise_sd;
  return generate_measurements(model, cfg.data.theta_true, Vector::Constant(model.output_dim(), var),
                               cfg.data.seed);
}

MisfitMinimum minimize_true_misfit(const ForwardModel& model, const MeasurementModel& meas,
                                   const DesignBox& box, const Matrix& starts, double h) {
  require(starts.rows() > 0 && starts.cols() == box.dim(), "minimize_true_misfit: starts");
  const SmoothObjective neg = [&](const VectorRef& x) {
    const double g = true_misfit(x, model, meas);
    Vector grad(x.size());
    for (Index i = 0; i < x.size(); ++i) {
      Vector a = x, b = x;
      a(i) = std::min(x(i) + h, box.upper(i));
      b(i) = std::max(x(i) - h, box.lower(i));
      grad(i) = -(true_misfit(a, model, meas) - true_misfit(b, model, meas)) / (a(i) - b(i));
    }
    return ObjectiveValue{-g, grad};
  };
  MisfitMinimum best{Vector(), std::numeric_limits<double>::infinity()};
  for (Index s = 0; s < starts.rows(); ++s) {
    const BoxOptResult r = maximize_box(neg, starts.row(s).transpose(), box);
    if (-r.value < best.g) best = {r.x, -r.value};
  }
  return best;
}

std::string sha256_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md;
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

RunDirectory::RunDirectory(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

void RunDirectory::add(const std::string& name, bool deterministic) {
  for (auto& e : entries_)
    if (e.name == name) {
      e.deterministic = deterministic;
      return;
    }
  entries_.push_back({name, deterministic});
}

void RunDirectory::write_text(const std::string& name, const std::string& content,
                              bool deterministic) {
  std::ofstream out(file(name), std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + file(name).string());
  add(name, deterministic);
}

void RunDirectory::write_manifest(const std::string& status, bool partial) const {
  nlohmann::json j;
  j["status"] = status;
  j["partial"] = partial;
  j["files"] = nlohmann::json::array();
  for (const auto& e : entries_) {
    const auto p = file(e.name);
    j["files"].push_back({{"name", e.name},
                          {"bytes", std::filesystem::file_size(p)},
                          {"sha256", sha256_file(p)},
                          {"deterministic", e.deterministic}});
  }
  std::ofstream(file("manifest.json")) << j.dump(2) << '\n';
}

Matrix read_csv_matrix(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read " + file.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<Vector> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(parse_vector(line));
  if (rows.empty()) throw ConfigError(file.string() + " has no data rows");
  Matrix m(static_cast<Index>(rows.size()), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) throw ConfigError(file.string() + ": ragged rows");
    m.row(static_cast<Index>(i)) = rows[i].transpose();
  }
  return m;
}

void save_adaptive_run(RunDirectory& dir, const AdaptiveResult& result) {
  const RunRecord& rec = result.record;
  dir.write_text("record.json", to_json(rec).dump(2) + "\n");

  std::ostringstream design;
  write_training_csv(design, rec.final_inputs, rec.final_outputs);
  dir.write_text("design.csv", design.str());

  if (result.ensemble) {
    const Matrix psi = result.ensemble->hyperparameter_matrix();
    std::ostringstream hp;
    hp << "sigma_c";
    for (Index i = 1; i < psi.cols(); ++i) hp << ",l" << i;
    hp << '\n';
    hp.precision(17);
    for (Index r = 0; r < psi.rows(); ++r) {
      for (Index c = 0; c < psi.cols(); ++c) hp << (c ? "," : "") << psi(r, c);
      hp << '\n';
    }
    dir.write_text("hyperposterior.csv", hp.str());
  }

  std::ostringstream hist, times;
  hist << "k,n_train,g_min,improvement,relative_improvement,added\n";
  times << "k,wall_seconds\n";
  hist.precision(17);
  for (const auto& it : rec.iterations) {
    hist << it.k << ',' << it.n_train << ',' << it.g_min << ',' << it.improvement << ','
         << it.relative_improvement() << ',' << (it.added ? 1 : 0) << '\n';
    times << it.k << ',' << it.wall_seconds << '\n';
  }
  dir.write_text("history.csv", hist.str());
  dir.write_text("timings.csv", times.str(), false);
}

std::shared_ptr<const GpEnsemble> load_surrogate(const std::filesystem::path& run_dir,
                                                 Index input_dim) {
  const Matrix design = read_csv_matrix(run_dir / "design.csv");
  const Matrix psi = read_csv_matrix(run_dir / "hyperposterior.csv");
  if (design.cols() <= input_dim || psi.cols() != input_dim + 1)
    throw ConfigError("saved run does not match the model dimension");
  auto training = std::make_shared<const TrainingSet>(design.leftCols(input_dim),
                                                      design.rightCols(design.cols() - input_dim));
  return std::make_shared<const GpEnsemble>(ensemble_from_samples(training, psi));
}

std::shared_ptr<const GpEnsemble> fit_fixed_design(const ForwardModel& model, const Matrix& inputs,
                                                   const AdaptiveConfig& cfg, std::uint64_t seed) {
  auto training = std::make_shared<const TrainingSet>(evaluate_design(model, inputs));
  HyperposteriorOptions ho;
  ho.n_walkers = cfg.hyper_walkers;
  ho.n_steps = cfg.hyper_steps;
  ho.seed = seed;
  ho.threads = cfg.threads;
  ho.jitter = cfg.jitter;
  return std::make_shared<const GpEnsemble>(
      sample_hyperposterior(training, cfg.hyper_prior, ho).ensemble);
}

}  // namespace adgp
