#include <doctest.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "adgp/experiment.hpp"

using namespace adgp;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("adgp_test_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)) + "_" +
            std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return path / name;
  }
};

const char* kRationalIni = R"(
[experiment]
name = tiny
[model]
kind = rational_1d
[data]
theta_true = 2.41
noise_sd = 0.01
[design]
lower = -6
upper = 6
initial = -4, 0, 4
[adaptive]
n_max = 3
starts = grid
n_starts = 9
seed = 4
[hyper]
lower = 1e-8, 1e-8
upper = 12, 5
walkers = 40
steps = 80
[posterior]
samples = 500
seed = 2
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("parse_vector and parse_matrix") {
  CHECK(parse_vector(" 1, -2.5e-1 ,3") == (Vector(3) << 1.0, -0.25, 3.0).finished());
  CHECK_THROWS_AS(parse_vector("1,,2"), ConfigError);
  CHECK_THROWS_AS(parse_vector("1, 2x"), ConfigError);
  CHECK_THROWS_AS(parse_vector(""), ConfigError);
  const Matrix m = parse_matrix("0.1, 0.2; 0.3, 0.4");
  CHECK(m.rows() == 2);
  CHECK(m(1, 0) == 0.3);
  CHECK_THROWS_AS(parse_matrix("1,2;3"), ConfigError);
}

TEST_CASE("load_config: checked-in experiment files parse") {
  const fs::path dir = fs::path(ADGP_SOURCE_DIR) / "configs";
  const ExperimentConfig r = load_config(dir / "rational_1d.ini");
  CHECK(r.adaptive.initial_design.rows() == 3);
  CHECK(r.adaptive.initial_design.cols() == 1);
  CHECK(r.adaptive.starts == StartDesign::grid);
  CHECK(r.data.theta_true(0) == 2.41);

  const ExperimentConfig h = load_config(dir / "heat.ini");
  CHECK(h.model.kind == "heat_source_2d");
  CHECK(h.adaptive.initial_lhs_points == 4);
  CHECK(h.adaptive.n_max == 11);
  REQUIRE(h.reference_g_star);
  CHECK(*h.reference_g_star == 15.015);

  const ExperimentConfig d = load_config(dir / "darcy.ini");
  CHECK(d.adaptive.bounds.dim() == 9);
  CHECK(d.adaptive.hyper_prior.dim() == 10);
  CHECK(d.adaptive.initial_lhs_points == 18);
  CHECK(d.adaptive.n_starts == 500);
}

TEST_CASE("load_config: malformed files raise ConfigError") {
  TempDir t;
  CHECK_THROWS_AS(load_config(t.path / "missing.ini"), ConfigError);
  CHECK_THROWS_AS(load_config(t.write("a.ini", "[model\nkind=x\n")), ConfigError);
  CHECK_THROWS_AS(load_config(t.write("b.ini", "[model]\nkind = nope\n[data]\ntheta_true=1\nnoise_sd=1\n"
                                                  "[design]\nlower=0\nupper=1\ninitial=0.5\n"
                                                  "[hyper]\nlower=0,0\nupper=1,1\n")),
                  ConfigError);

  std::string s = kRationalIni;
  CHECK_NOTHROW(load_config(t.write("ok.ini", s)));
  const auto broken = [&](const std::string& from, const std::string& to) {
    std::string c = s;
    c.replace(c.find(from), from.size(), to);
    return t.write("broken.ini", c);
  };
  CHECK_THROWS_AS(load_config(broken("noise_sd = 0.01", "noise_sd = -1")), ConfigError);
  CHECK_THROWS_AS(load_config(broken("noise_sd = 0.01", "noise_sd = abc")), ConfigError);
  CHECK_THROWS_AS(load_config(broken("theta_true = 2.41", "theta_true = 1, 2")), ConfigError);
  CHECK_THROWS_AS(load_config(broken("upper = 12, 5", "upper = 12")), ConfigError);
  CHECK_THROWS_AS(load_config(broken("starts = grid", "starts = random")), ConfigError);
  CHECK_THROWS_AS(load_config(broken("kind = rational_1d", "kind = darcy_2d")), ConfigError);
  CHECK_THROWS_AS(load_config(broken("n_max = 3", "n_max = 0")), ConfigError);
}

TEST_CASE("sha256 of known content") {
  TempDir t;
  CHECK(sha256_file(t.write("abc.txt", "abc")) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_file(t.write("empty.txt", "")) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("saved runs: identical hashes on rerun and a model-free surrogate reload") {
  TempDir t;
  const ExperimentConfig cfg = load_config(t.write("tiny.ini", kRationalIni));
  const auto model = make_model(cfg.model);
  const MeasurementModel meas = make_measurements(cfg, *model);

  const auto save = [&](const std::string& name) {
    RunDirectory dir(t.path / name);
    const AdaptiveResult res = run_adaptive(*model, meas, cfg.adaptive);
    save_adaptive_run(dir, res);
    dir.write_manifest(to_string(res.record.termination), false);
    return res;
  };
  const AdaptiveResult res = save("a");
  save("b");

  const auto manifest = [&](const std::string& name) {
    return nlohmann::json::parse(slurp(t.path / name / "manifest.json"));
  };
  const auto ma = manifest("a"), mb = manifest("b");
  CHECK(ma["status"] == mb["status"]);
  CHECK(ma["partial"] == false);
  std::size_t compared = 0;
  for (std::size_t i = 0; i < ma["files"].size(); ++i) {
    const auto& fa = ma["files"][i];
    CHECK(fa["sha256"] == sha256_file(t.path / "a" / fa["name"].get<std::string>()));
    if (!fa["deterministic"].get<bool>()) continue;
    CHECK(fa["sha256"] == mb["files"][i]["sha256"]);
    ++compared;
  }
  CHECK(compared >= 4);

  const auto ens = load_surrogate(t.path / "a", 1);
  CHECK(ens->size() == res.ensemble->size());
  const Vector theta = Vector::Constant(1, 1.3);
  CHECK(d_restricted_loglik(theta, *ens, meas) ==
        doctest::Approx(d_restricted_loglik(theta, *res.ensemble, meas)).epsilon(1e-9));
  CHECK_THROWS_AS(load_surrogate(t.path / "a", 2), ConfigError);
}

TEST_CASE("minimize_true_misfit finds the rational minimum") {
  const RationalModel model;
  const MeasurementModel meas =
      generate_measurements(model, Vector::Constant(1, 3.0), Vector::Constant(1, 1e-4), 1);
  const DesignBox box(Vector::Constant(1, 0.0), Vector::Constant(1, 6.0));
  const MisfitMinimum m = minimize_true_misfit(model, meas, box, sobol(8, box, 1));
  CHECK(m.g < 1e-8);
  CHECK(box.contains(m.theta));
}
