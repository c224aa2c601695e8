#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "helpers.hpp"
#include "qttfit/experiments.hpp"
#include "qttfit/pite.hpp"
#include "qttfit/qsim.hpp"

using namespace qttfit;
using testutil::simpson;

namespace {

const KernelParams kP{};  // beta 1, tau 2, T 2
constexpr double kEg2 = -2.5298221281347035;

double g_formula(double t) {
  const double r2 = 1.0 + t * t;
  return 1.0 / (std::numbers::pi * r2) * std::exp(-r2 / 8.0);
}

double cos_transform(double omega, double a, double b, int n) {
  return simpson([&](double t) { return g_formula(t) * std::cos(omega * t); }, a, b, n);
}

QuanticsGrid tgrid(int R) { return QuanticsGrid(2, R, -2.0, 2.0); }

// Riemann sum of g on the left-endpoint grid.
double riemann_g(int R) {
  const double h = 4.0 / (1 << R);
  double s = 0;
  for (int m = 0; m < (1 << R); ++m) s += g_formula(-2.0 + h * m);
  return s * h;
}

}  // namespace

TEST_CASE("kernel values") {
  CHECK(kernel_g(0.0, kP) == doctest::Approx(0.2809074886192504).epsilon(1e-12));
  CHECK(kernel_g(2.0, kP) == doctest::Approx(0.034075800878090604).epsilon(1e-12));
  CHECK(kernel_g(2.0, kP) == doctest::Approx(std::exp(-5.0 / 8) / (5 * std::numbers::pi)).epsilon(1e-15));
  for (double t : {0.3, 1.7, 4.0}) CHECK(kernel_g(-t, kP) == kernel_g(t, kP));
  CHECK_THROWS_AS(KernelParams({0.0, 2.0, 2.0}).validate(), std::domain_error);
  CHECK_THROWS_AS(KernelParams({1.0, -2.0, 2.0}).validate(), std::domain_error);
}

TEST_CASE("closed-form transform") {
  CHECK(g_of_omega(0.0, 1.0, 2.0) == doctest::Approx(0.6170751).epsilon(1e-7));
  CHECK(g_of_omega(0.0, 1.0, 2.0) == doctest::Approx(std::erfc(1 / (2 * std::sqrt(2.0)))).epsilon(1e-14));
  for (double w : {0.0, 1.0, 2.0}) CHECK(std::abs(g_of_omega(w, 1.0, 2.0) - cos_transform(w, -100.0, 100.0, 400000)) <= 1e-8);
  CHECK(g_of_omega(10.0, 1.0, 2.0) < 1e-3);
  CHECK(g_of_omega(-3.0, 1.0, 2.0) == doctest::Approx(g_of_omega(3.0, 1.0, 2.0)));
  const double far = g_of_omega(40.0, 1.0, 2.0);
  CHECK(std::isfinite(far));
  CHECK(far >= 0.0);
  CHECK(far < 1e-15);
}

TEST_CASE("truncated transform and normalization") {
  for (double w : {0.0, 0.5, 3.0}) CHECK(g_truncated_of_omega(w, kP) == doctest::Approx(cos_transform(w, -2.0, 2.0, 20000)).epsilon(1e-10));
  CHECK(normalization_constant(kP) == doctest::Approx(cos_transform(0.0, -2.0, 2.0, 20000)).epsilon(1e-10));
}

TEST_CASE("bound constants") {
  CHECK(gamma_G(1.0, 2.0) == doctest::Approx(0.1353353).epsilon(1e-7));
  CHECK(gamma_T(1.0, 2.0, 2.0) == doctest::Approx(0.9678829).epsilon(1e-7));
  CHECK(gamma_G(0.0, 2.0) == 1.0);
}

TEST_CASE("operator bounds at n_site=2") {
  const MatrixC h = build_tfim(2, 1.2).dense();
  Eigen::SelfAdjointEigenSolver<MatrixC> es(h);
  const double thr = kP.beta / (kP.tau * kP.tau);
  for (double shift : {0.25, 0.5, 1.0, 1.5, 2.5}) {
    const double e0 = es.eigenvalues()(0) - shift;
    const double de = es.eigenvalues()(0) - e0;
    REQUIRE(de >= thr);
    double gap_g = 0, gap_t = 0;
    for (int k = 0; k < es.eigenvalues().size(); ++k) {
      const double w = es.eigenvalues()(k) - e0;
      const double gw = g_of_omega(w, kP.beta, kP.tau);
      gap_g = std::max(gap_g, std::abs(gw - std::exp(-kP.beta * w)));
      gap_t = std::max(gap_t, std::abs(cos_transform(w, -2.0, 2.0, 20000) - gw));
    }
    CHECK(gap_g <= gamma_G(de, kP.tau));
    CHECK(gap_t <= gamma_T(kP.beta, kP.tau, kP.T));
  }
}

TEST_CASE("sampler") {
  const KernelSampler s(kP);
  std::mt19937_64 rng(1);
  const int n = 200000;
  std::vector<double> xs(n);
  for (auto& x : xs) {
    x = s(rng);
    REQUIRE(x >= -2.0);
    REQUIRE(x < 2.0);
  }
  const double c = normalization_constant(kP);
  for (double q : {-1.5, -0.5, 0.0, 0.8, 1.9}) {
    const double cdf = simpson(g_formula, -2.0, q, 20000) / c;
    const double emp = static_cast<double>(std::count_if(xs.begin(), xs.end(), [q](double x) { return x < q; })) / n;
    CHECK(std::abs(emp - cdf) < 0.005);
  }
  CHECK(s.inverse_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(s.inverse_cdf(0.0) == -2.0);
  CHECK(s.inverse_cdf(1.0) < 2.0);
}

TEST_CASE("Monte Carlo estimator") {
  const Correlator one = [](double, double) { return cplx{1.0, 0.0}; };
  const double c = normalization_constant(kP);
  const auto e = mc_estimate(one, kP, 0.0, 500, 3);
  CHECK(std::abs(e.value - c * c) <= 1e-12 * c * c);
  CHECK(e.n_samples == 500);

  const double ref = std::pow(cos_transform(1.0, -2.0, 2.0, 20000), 2);
  const auto m = mc_estimate(one, kP, 1.0, 100000, 7);
  CHECK(std::abs(m.value.real() - ref) <= 3 * m.std_error);
  CHECK(std::abs(m.value.imag()) <= 3 * m.std_error);

  CHECK_THROWS_AS(mc_estimate(one, kP, 0.0, 0, 1), std::domain_error);
  CHECK(mc_estimate(one, kP, 1.0, 1000, 4).value == mc_estimate(one, kP, 1.0, 1000, 4).value);
}

TEST_CASE("Monte Carlo error shrinks as 1/sqrt(N)") {
  const Correlator one = [](double, double) { return cplx{1.0, 0.0}; };
  auto spread = [&](long n) {
    std::vector<double> v;
    for (std::uint64_t s = 0; s < 50; ++s) v.push_back(mc_estimate(one, kP, 1.0, n, 1000 + s).value.real());
    double mean = 0, var = 0;
    for (double x : v) mean += x / 50;
    for (double x : v) var += (x - mean) * (x - mean) / 49;
    return std::sqrt(var);
  };
  const double ratio = spread(1000) / spread(10000);
  CHECK(ratio >= std::sqrt(10.0) * 0.7);
  CHECK(ratio <= std::sqrt(10.0) * 1.3);
}

TEST_CASE("phase train") {
  const auto g4 = tgrid(4);
  const auto zero = build_phase_tt(0.0, g4);
  CHECK(zero.max_bond() == 1);
  for (auto v : zero.to_dense()) CHECK(std::abs(v - 1.0) < 1e-15);

  const auto ph = build_phase_tt(1.0, g4);
  CHECK(ph.max_bond() == 1);
  for (const auto& idx : testutil::all_indices(g4.local_dims())) {
    const auto x = decode(g4, idx);
    const cplx v = ph(idx);
    CHECK(std::abs(v - std::exp(cplx{0.0, x[0] - x[1]})) <= 1e-12);
    CHECK(std::abs(std::abs(v) - 1.0) <= 1e-12);
  }
  const QuanticsGrid shifted(2, 3, {{-1.0, 3.0}, {0.5, 2.5}});
  const auto ps = build_phase_tt(-0.7, shifted);
  for (const auto& idx : testutil::all_indices(shifted.local_dims())) {
    const auto x = decode(shifted, idx);
    CHECK(std::abs(ps(idx) - std::exp(cplx{0.0, -0.7 * (x[0] - x[1])})) <= 1e-12);
  }
  CHECK_THROWS_AS(build_phase_tt(1.0, QuanticsGrid(1, 4, 0.0, 1.0)), std::domain_error);
}

TEST_CASE("kernel train") {
  const auto g = tgrid(8);
  const auto k = learn_kernel_tt(kP, g, 1e-5);
  CHECK(k.error_estimate <= 1e-5);
  double worst = 0;
  for (std::size_t m0 = 0; m0 < 256; m0 += 5)
    for (std::size_t m1 = 0; m1 < 256; m1 += 3) {
      const std::vector<std::size_t> m{m0, m1};
      const auto x = g.coords_from_ints(m);
      worst = std::max(worst, std::abs(k.tt(g.index_from_ints(m)) - g_formula(x[0]) * g_formula(x[1])));
    }
  CHECK(worst <= 1e-4 * g_formula(0) * g_formula(0));
}

TEST_CASE("tt_estimate with a constant correlator") {
  const auto g = tgrid(8);
  const auto k = learn_kernel_tt(kP, g, 1e-5).tt;
  const auto one = TensorTrain::constant(g.local_dims(), 1.0);
  const cplx v0 = tt_estimate(one, k, 0.0, g);
  CHECK(std::abs(v0 - std::pow(riemann_g(8), 2)) <= 1e-6);

  const Correlator c1 = [](double, double) { return cplx{1.0, 0.0}; };
  const auto mc = mc_estimate(c1, kP, 1.0, 1000000, 11);
  const cplx v1 = tt_estimate(one, k, 1.0, g);
  CHECK(std::abs(v1.real() - mc.value.real()) <= 3 * mc.std_error);
}

TEST_CASE("tt_estimate equals the grid double sum at R=5") {
  const int R = 5;
  const auto g = tgrid(R);
  const auto k = learn_kernel_tt(kP, g, 1e-8).tt;
  const auto h = build_tfim(2, 1.2);
  const auto corr_dense = exact_correlation_grid(h, h, g);
  std::vector<cplx> interleaved(corr_dense.size());
  for (std::size_t m0 = 0; m0 < 32; ++m0)
    for (std::size_t m1 = 0; m1 < 32; ++m1) {
      const auto idx = g.index_from_ints(std::vector<std::size_t>{m0, m1});
      std::size_t flat = 0;
      for (int b : idx) flat = 2 * flat + static_cast<std::size_t>(b);
      interleaved[flat] = corr_dense[m0 * 32 + m1];
    }
  const auto corr = TensorTrain::from_dense(interleaved, g.local_dims());
  const double vol = cell_volume(g);
  for (double e0 : {-2.5, 0.0, 1.3}) {
    cplx ref{};
    for (const auto& idx : testutil::all_indices(g.local_dims())) {
      const auto x = decode(g, idx);
      ref += std::exp(cplx{0.0, e0 * (x[0] - x[1])}) * k(idx) * corr(idx);
    }
    ref *= vol;
    const cplx v = tt_estimate(corr, k, e0, g);
    CHECK(std::abs(v - ref) <= 1e-9 * std::abs(ref));
  }
}

TEST_CASE("energy scan grid") {
  EnergyScan s{kEg2, 2.0, 40};
  const auto e = s.grid();
  CHECK(e.size() == 41);
  CHECK(e[20] == kEg2);
  CHECK(e.front() == doctest::Approx(kEg2 - 2));
  CHECK(e.back() == doctest::Approx(kEg2 + 2));
  CHECK_THROWS_AS((EnergyScan{0.0, -1.0, 4}.grid()), std::domain_error);
  CHECK_THROWS_AS((EnergyScan{0.0, 1.0, 0}.grid()), std::domain_error);
}

TEST_CASE("scan flags vanishing denominators") {
  const EnergyScan s{0.0, 1.0, 4};
  const auto r = scan_energy(s, [](double e0) {
    EstimatorOutput o;
    o.numerator = e0;
    o.denominator = e0 < -0.75 ? 0.0 : 1.0;
    return o;
  });
  CHECK(r.flagged[0]);
  CHECK_FALSE(r.flagged[1]);
  CHECK(r.valid);
  CHECK(r.argmin == 1);
  CHECK(r.estimate == doctest::Approx(-0.5));

  const auto none = scan_energy(s, [](double) { return EstimatorOutput{}; });
  CHECK_FALSE(none.valid);
}

TEST_CASE("scan with exact correlators finds the ground energy") {
  RunConfig cfg;
  const auto g = time_grid(cfg);
  const auto h = build_tfim(2, 1.2);
  const auto k = learn_kernel_tt(kP, g, 1e-5).tt;
  auto exact_tt = [&](const PauliHamiltonian& obs) {
    const auto d = exact_correlation_grid(h, obs, g);
    return cross_interpolate([&](std::span<const int> idx) {
      const auto m = g.ints_from_index(idx);
      return d[m[0] * g.points_per_var() + m[1]];
    }, g.local_dims(), TciOptions{16, 1e-10, 40, {}}).tt;
  };
  const auto num = exact_tt(h), den = exact_tt(PauliHamiltonian::identity(2));
  const auto r = energy_scan(num, den, k, EnergyScan{kEg2, 2.0, 40}, g);
  REQUIRE(r.valid);
  CHECK(std::abs(r.estimate - kEg2) <= 0.05);
  CHECK(r.estimate == r.points[r.argmin].ratio.real());
  for (const auto& p : r.points) CHECK(p.denominator.real() >= -1e-6);

  const auto mid = r.points[20];
  CHECK(std::abs(mid.ratio.real() - kEg2) <= 0.05);

  const auto path = std::filesystem::temp_directory_path() / "qttfit_scan_test.csv";
  write_scan_csv(path.string(), r);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "E0,re_num,im_num,re_den,im_den,re_ratio,flagged");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 41);
  std::filesystem::remove(path);
}
