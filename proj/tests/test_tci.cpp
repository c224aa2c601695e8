#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "qttfit/fit.hpp"
#include "qttfit/quantics.hpp"
#include "qttfit/rng.hpp"
#include "qttfit/tci.hpp"

using namespace qttfit;

namespace {

Evaluator on_unit(int R, std::function<double(double)> f) {
  return tensorize(QuanticsGrid(1, R, 0.0, 1.0), [f](std::span<const double> x) { return cplx{f(x[0]), 0.0}; });
}

TciOptions opts(int chi, double tol = 0.0) {
  TciOptions o;
  o.max_bond = chi;
  o.tolerance = tol;
  return o;
}

std::vector<cplx> dense_values(const Evaluator& f, const std::vector<int>& dims) {
  std::vector<cplx> v;
  for (const auto& idx : testutil::all_indices(dims)) v.push_back(f(idx));
  return v;
}

double sine(double x) { return std::sin(2 * std::numbers::pi * x); }

}  // namespace

TEST_CASE("options validation") {
  CHECK_THROWS_AS(opts(0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(opts(2, -1.0).validate(), std::invalid_argument);
  auto o = opts(2);
  o.max_sweeps = 0;
  CHECK_THROWS_AS(o.validate(), std::invalid_argument);
  o = opts(2);
  o.global_search_starts = -1;
  CHECK_THROWS_AS(o.validate(), std::invalid_argument);
  CHECK_THROWS_AS(cross_interpolate(on_unit(4, sine), std::vector<int>{}, opts(2)), std::invalid_argument);
}

TEST_CASE("exponential is rank one") {
  const int R = 8;
  const std::vector<int> dims(R, 2);
  const auto res = cross_interpolate(on_unit(R, [](double x) { return std::exp(x); }), dims, opts(4));
  for (int chi : res.tt.bond_dims()) CHECK(chi == 1);
  CHECK(res.error_estimate <= 1e-12);
  CHECK(error_estimate(res.tt, res.ledger) <= 1e-12);
}

TEST_CASE("constant function") {
  const int R = 8;
  const std::vector<int> dims(R, 2);
  const auto res = cross_interpolate(on_unit(R, [](double) { return 3.0; }), dims, opts(4));
  for (const auto& p : res.row_pivots) CHECK(p.size() == 1);
  for (const auto& p : res.col_pivots) CHECK(p.size() == 1);
  for (const auto& idx : testutil::all_indices(dims)) CHECK(std::abs(res.tt(idx) - 3.0) < 1e-13);
  CHECK(res.ledger.size() <= static_cast<std::size_t>(4 * R * 2));
}

TEST_CASE("noise-free sine is exact at chi 4") {
  const int R = 8;
  const std::vector<int> dims(R, 2);
  const auto f = on_unit(R, sine);
  const auto res = cross_interpolate(f, dims, opts(4));
  CHECK(testutil::max_abs_diff(res.tt.to_dense(), dense_values(f, dims)) <= 1e-10);
  CHECK(res.tt.max_bond() <= 4);
}

TEST_CASE("interpolation property at the pivot crosses") {
  const QuanticsGrid g(2, 4, 0.0, 1.0);
  const auto f = tensorize(g, [](std::span<const double> x) { return cplx{1.0 / (1.0 + x[0] + 2 * x[1]), std::cos(x[0] * x[1])}; });
  const auto dims = g.local_dims();
  for (int chi : {2, 3, 5}) {
    const auto res = cross_interpolate(f, dims, opts(chi));
    const double fmax = res.ledger.max_abs();
    const auto cross = pivot_cross_indices(res, dims);
    CHECK(!cross.empty());
    for (const auto& idx : cross) {
      CHECK(res.ledger.contains(idx));
      CHECK(std::abs(res.tt(idx) - f(idx)) <= 1e-10 * fmax);
    }
    for (std::size_t l = 0; l < res.row_pivots.size(); ++l) {
      CHECK(static_cast<int>(res.row_pivots[l].size()) <= chi);
      CHECK(res.row_pivots[l].size() == res.col_pivots[l].size());
    }
  }
}

namespace {

void check_nested(const TciResult& res) {
  for (std::size_t l = 1; l < res.row_pivots.size(); ++l)
    for (const auto& row : res.row_pivots[l]) {
      const MultiIndex prefix(row.begin(), row.end() - 1);
      bool found = false;
      for (const auto& p : res.row_pivots[l - 1]) found |= p == prefix;
      CHECK(found);
    }
  for (std::size_t l = 0; l + 1 < res.col_pivots.size(); ++l)
    for (const auto& col : res.col_pivots[l]) {
      const MultiIndex suffix(col.begin() + 1, col.end());
      bool found = false;
      for (const auto& p : res.col_pivots[l + 1]) found |= p == suffix;
      CHECK(found);
    }
}

}  // namespace

TEST_CASE("pivot sets are nested") {
  const QuanticsGrid g(2, 4, 0.0, 1.0);
  const auto f = tensorize(g, [](std::span<const double> x) { return cplx{std::exp(-3 * (x[0] - x[1]) * (x[0] - x[1])), 0.0}; });
  check_nested(cross_interpolate(f, g.local_dims(), opts(4)));
}

TEST_CASE("global search escapes the separable trap") {
  const QuanticsGrid g(2, 6, -1.0, 1.0);
  const auto f = tensorize(g, [](std::span<const double> x) {
    return cplx{1.0 / (1 + 4 * x[0] * x[0]) / (1 + 4 * x[1] * x[1]), 0.0};
  });
  const auto dims = g.local_dims();
  const auto exact = dense_values(f, dims);
  auto worst = [&](const TciResult& r) {
    double w = 0;
    std::size_t k = 0;
    for (const auto& idx : testutil::all_indices(dims)) w = std::max(w, std::abs(r.tt(idx) - exact[k++]));
    return w;
  };

  const auto plain = cross_interpolate(f, dims, opts(32, 1e-8));
  CHECK(plain.tt.max_bond() == 1);
  CHECK(worst(plain) > 0.1);

  auto o = opts(64, 1e-8);
  o.global_search_starts = 8;
  const auto searched = cross_interpolate(f, dims, o);
  CHECK(searched.converged);
  CHECK(searched.tt.max_bond() > 1);
  CHECK(worst(searched) <= 1e-6);
  check_nested(searched);
  std::set<MultiIndex> seen;
  for (const auto& e : searched.ledger.entries()) CHECK(seen.insert(e.index).second);
  CHECK(cross_interpolate(f, dims, o).ledger.size() == searched.ledger.size());

  o.max_bond = 8;
  const auto capped = cross_interpolate(f, dims, o);
  CHECK_FALSE(capped.converged);
  check_nested(capped);
}

TEST_CASE("ledger completeness and uniqueness") {
  const int R = 8;
  const std::vector<int> dims(R, 2);
  std::size_t calls = 0;
  std::set<MultiIndex> seen;
  bool repeated = false;
  const Evaluator f = [&](std::span<const int> idx) {
    ++calls;
    repeated |= !seen.insert(MultiIndex(idx.begin(), idx.end())).second;
    double x = 0;
    for (int r = 0; r < R; ++r) x += idx[r] * std::ldexp(1.0, -(r + 1));
    return cplx{sine(x) + 0.3 * std::cos(6 * x), 0.0};
  };
  const auto res = cross_interpolate(f, dims, opts(5));
  CHECK(calls == res.ledger.size());
  CHECK_FALSE(repeated);
  for (const auto& e : res.ledger.entries()) CHECK(res.ledger.find(e.index).value() == e.value);
}

TEST_CASE("ledger rejects duplicates and exports CSV") {
  MeasurementLedger led;
  led.record({0, 1}, cplx{1.5, -2.0});
  led.record({1, 1}, cplx{0.25, 0.0});
  CHECK_THROWS_AS(led.record({0, 1}, 3.0), std::logic_error);
  CHECK(led.max_abs() == doctest::Approx(2.5));
  const auto path = std::filesystem::temp_directory_path() / "qttfit_ledger_test.csv";
  led.write_csv(path.string());
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "s1,s2,re,im");
  CHECK(row == "0,1,1.5,-2");
  std::filesystem::remove(path);
}

TEST_CASE("error estimate is non-increasing in chi for smooth targets") {
  const int R = 8;
  const std::vector<int> dims(R, 2);
  for (auto fn : {+[](double x) { return std::exp(x); }, +[](double x) { return sine(x); }}) {
    const auto f = on_unit(R, fn);
    double prev = INFINITY;
    for (int chi : {1, 2, 4, 8}) {
      const double e = cross_interpolate(f, dims, opts(chi)).error_estimate;
      CHECK(e <= prev + 1e-12);
      prev = e;
    }
  }
}

TEST_CASE("determinism") {
  const QuanticsGrid g(1, 10, 0.0, 1.0);
  const auto f = noisy_evaluator(g, [](std::span<const double> x, std::uint64_t s) {
    std::mt19937_64 rng(s);
    return cplx{sine(x[0]) * (1 + 0.1 * std::normal_distribution<double>()(rng)), 0.0};
  }, 42);
  const auto a = cross_interpolate(f, g.local_dims(), opts(6));
  const auto b = cross_interpolate(f, g.local_dims(), opts(6));
  REQUIRE(a.ledger.size() == b.ledger.size());
  for (std::size_t i = 0; i < a.ledger.size(); ++i) {
    CHECK(a.ledger.entries()[i].index == b.ledger.entries()[i].index);
    CHECK(a.ledger.entries()[i].value == b.ledger.entries()[i].value);
  }
  CHECK(testutil::max_abs_diff(a.tt.to_dense(), b.tt.to_dense()) == 0.0);
  CHECK(a.error_estimate == b.error_estimate);
}

TEST_CASE("zero function gives a zero train") {
  const std::vector<int> dims(6, 2);
  const auto res = cross_interpolate([](std::span<const int>) { return cplx{}; }, dims, opts(4));
  CHECK(res.error_estimate == 0.0);
  CHECK(res.tt.max_bond() == 1);
  for (auto v : res.tt.to_dense()) CHECK(v == cplx{});
}

TEST_CASE("evaluator failure carries the partial ledger") {
  const std::vector<int> dims(6, 2);
  int calls = 0;
  const Evaluator f = [&](std::span<const int>) -> cplx {
    if (++calls > 5) throw std::runtime_error("device lost");
    return cplx{static_cast<double>(calls), 0.0};
  };
  try {
    cross_interpolate(f, dims, opts(4));
    FAIL("expected TciError");
  } catch (const TciError& e) {
    CHECK(e.ledger.size() == 5);
  }

  const Evaluator nan = [](std::span<const int> idx) { return idx[0] ? cplx{NAN, 0.0} : cplx{1.0, 0.0}; };
  CHECK_THROWS_AS(cross_interpolate(nan, dims, opts(4)), TciError);
}

TEST_CASE("tolerance stops the sweep early") {
  const int R = 10;
  const std::vector<int> dims(R, 2);
  const auto f = on_unit(R, [](double x) { return 1.0 / (1.0 + 25 * (x - 0.4) * (x - 0.4)); });
  const auto loose = cross_interpolate(f, dims, opts(20, 1e-3));
  const auto tight = cross_interpolate(f, dims, opts(20, 1e-9));
  CHECK(loose.converged);
  CHECK(loose.error_estimate <= 1e-3);
  CHECK(loose.tt.max_bond() <= tight.tt.max_bond());
  CHECK(loose.ledger.size() <= tight.ledger.size());
}

TEST_CASE("noisy sine error estimate, sigma 0.01") {
  const QuanticsGrid g(1, 12, 0.0, 1.0);
  double mean = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = noisy_evaluator(g, [](std::span<const double> x, std::uint64_t s) {
      std::mt19937_64 rng(s);
      return cplx{sine(x[0]) * (1 + 0.01 * std::normal_distribution<double>()(rng)), 0.0};
    }, derive_seed(1, {static_cast<std::uint64_t>(trial)}));
    mean += cross_interpolate(f, g.local_dims(), opts(6)).error_estimate / 20;
  }
  MESSAGE("mean eps_TCI at sigma=0.01: " << mean);
  CHECK(mean >= 0.0381 / 2);
  CHECK(mean <= 0.0381 * 2);
}
