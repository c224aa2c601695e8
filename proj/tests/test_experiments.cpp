#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "qttfit/experiments.hpp"
#include "qttfit/rng.hpp"

using namespace qttfit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qttfit_exp_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("seed derivation") {
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(trial_seed(1, 0) == derive_seed(1, {0}));
  CHECK(trial_seed(1, 0) != trial_seed(1, 1));
  CHECK(trial_seed(1, 0) != trial_seed(2, 0));
  CHECK(derive_seed(7, {1, 2}) != derive_seed(7, {2, 1}));
}

TEST_CASE("defaults follow the parameter table") {
  const RunConfig c;
  CHECK(c.lambda == 1.2);
  CHECK(c.beta == 1.0);
  CHECK(c.tau == 2.0);
  CHECK(c.T == 2.0);
  CHECK(c.resolved_R(8) == 8);
  CHECK(c.tci_tol == 1e-5);
  CHECK(c.trotter_steps == 100);
  CHECK(c.shots == 15000);
  CHECK(c.iters == 500);
  CHECK(c.e_halfwidth == 2.0);
  CHECK(c.e_steps == 40);
  CHECK(default_chi_tilde(2) == 4);
  CHECK(default_chi_tilde(4) == 6);
  CHECK(default_chi_tilde(6) == 10);
  CHECK(default_chi(2) == 2);
  CHECK(default_chi(4) == 4);
  CHECK(default_chi(6) == 8);
}

TEST_CASE("config validation") {
  RunConfig c;
  c.n_site = 13;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = RunConfig{};
  c.method = "magic";
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = RunConfig{};
  c.tau = 0;
  CHECK_THROWS(c.validate());
  c = RunConfig{};
  c.sites = {2, 9};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("resolved config embeds command defaults") {
  RunConfig c;
  c.n_site = 4;
  const auto j = config_json(c, "gs-energy");
  CHECK(j["command"] == "gs-energy");
  CHECK(j["R"] == 8);
  CHECK(j["chi_tilde"] == 6);
  CHECK(j["chi"] == 4);
  CHECK(j["e_steps"] == 40);
  const auto s = config_json(RunConfig{}, "sine-demo");
  CHECK(s["R"] == 12);
  CHECK(s["chi_tilde"] == 6);
  CHECK(s["sigma"] == 0.1);
}

TEST_CASE("sine demo without noise is exact") {
  RunConfig c;
  c.sigma = 0.0;
  c.trials = 2;
  c.R = 10;
  c.iters = 50;
  c.out = scratch("sine0").string();
  const auto s = run_sine_demo(c);
  for (const auto& t : s.trials) {
    CHECK(t.err_itpl <= 1e-10);
    CHECK(t.err_init <= 1e-10);
    CHECK(t.err_opt <= 1e-10);
  }
  const fs::path dir = fs::path(c.out) / "sine_demo";
  CHECK(fs::exists(dir / "trial_00.csv"));
  CHECK(fs::exists(dir / "trial_01.csv"));
  CHECK(fs::exists(dir / "stats.csv"));
  const auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(j["config"]["sigma"] == 0.0);
  CHECK(j["config"]["R"] == 10);
  CHECK(j["trials"].size() == 2);
  fs::remove_all(c.out);
}

TEST_CASE("smaller noise gives roughly a decade smaller errors") {
  RunConfig c;
  c.trials = 4;
  c.R = 10;
  c.iters = 150;
  c.out = scratch("sine_sigma").string();
  c.sigma = 0.1;
  const auto big = run_sine_demo(c);
  c.sigma = 0.01;
  const auto small = run_sine_demo(c);
  CHECK(big.mean_err_opt / small.mean_err_opt > 4.0);
  CHECK(big.mean_err_opt / small.mean_err_opt < 25.0);
  CHECK(big.mean_err_itpl / small.mean_err_itpl > 4.0);
  fs::remove_all(c.out);
}

TEST_CASE("time grid and exact correlator grid") {
  RunConfig c;
  c.R = 3;
  const auto g = time_grid(c);
  CHECK(g.n_vars() == 2);
  CHECK(g.bits() == 3);
  CHECK(g.domains()[0] == std::pair{-2.0, 2.0});
  const auto h = build_tfim(2, 1.2);
  const auto v = exact_correlation_grid(h, PauliHamiltonian::identity(2), g);
  REQUIRE(v.size() == 64);
  for (std::size_t m = 0; m < 8; ++m) CHECK(std::abs(v[m * 8 + m] - 1.0) < 1e-12);
  CHECK(std::abs(v[1 * 8 + 5] - exact_correlation(h, PauliHamiltonian::identity(2), -1.5, 0.5)) < 1e-14);
}

TEST_CASE("corr-learn with exact probabilities is limited by Trotter error only") {
  RunConfig c;
  c.shots = 0;
  c.trials = 1;
  c.iters = 100;
  c.out = scratch("corr_exact").string();
  const auto s = run_corr_learn(c);
  double worst = 0;
  for (double e : s.mean_err_opt_num) worst = std::max(worst, e);
  for (double e : s.mean_err_opt_den) worst = std::max(worst, e);
  CHECK(worst < 0.05);
  CHECK(fs::exists(fs::path(c.out) / "corr_learn" / "abs_err.csv"));
  fs::remove_all(c.out);
}

TEST_CASE("bond dimensions of exact correlators") {
  RunConfig c;
  c.sites = {2, 4};
  c.trials = 2;
  c.scan_max_chi = 3;
  c.out = scratch("bond").string();
  const auto s = run_bonddim_scan(c);
  for (const auto& r : s.bonds) CHECK(r.max_bond <= 12);
  for (const auto& tight : s.bonds)
    for (const auto& loose : s.bonds)
      if (tight.n_site == loose.n_site && tight.observable == loose.observable && tight.tol < loose.tol)
        CHECK(loose.max_bond <= tight.max_bond);
  CHECK(s.scan.size() == 3);
  fs::remove_all(c.out);
}

TEST_CASE("unwritable output directory is an error") {
  const fs::path file = scratch("blocker");
  std::ofstream(file) << "x";
  RunConfig c;
  c.trials = 1;
  c.R = 6;
  c.iters = 5;
  c.out = (file / "sub").string();
  CHECK_THROWS_AS(run_sine_demo(c), std::runtime_error);
  fs::remove(file);
}
