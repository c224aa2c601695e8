#pragma once

// Shared oracles for the unit tests. Nothing here calls the library routines
// being checked; contractions are spelled out with plain loops.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "qttfit/tensor_train.hpp"

namespace testutil {

using qttfit::Core3;
using qttfit::cplx;
using qttfit::MultiIndex;
using qttfit::TensorTrain;

inline TensorTrain random_tt(const std::vector<int>& dims, int chi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::vector<Core3> cores;
  const int L = static_cast<int>(dims.size());
  for (int l = 0; l < L; ++l) {
    const int left = l == 0 ? 1 : chi;
    const int right = l == L - 1 ? 1 : chi;
    Core3 c(left, dims[l], right);
    for (auto& v : c.data()) v = cplx{n01(rng), n01(rng)};
    cores.push_back(std::move(c));
  }
  return TensorTrain(std::move(cores));
}

/// Train with prescribed internal bonds.
inline TensorTrain random_tt_bonds(const std::vector<int>& dims, const std::vector<int>& bonds, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::vector<Core3> cores;
  const std::size_t L = dims.size();
  for (std::size_t l = 0; l < L; ++l) {
    Core3 c(l == 0 ? 1 : bonds[l - 1], dims[l], l + 1 == L ? 1 : bonds[l]);
    for (auto& v : c.data()) v = cplx{n01(rng), n01(rng)};
    cores.push_back(std::move(c));
  }
  return TensorTrain(std::move(cores));
}

inline std::vector<MultiIndex> all_indices(const std::vector<int>& dims) {
  std::vector<MultiIndex> out;
  MultiIndex idx(dims.size(), 0);
  while (true) {
    out.push_back(idx);
    int l = static_cast<int>(dims.size()) - 1;
    while (l >= 0 && ++idx[l] == dims[l]) idx[l--] = 0;
    if (l < 0) break;
  }
  return out;
}

/// Row vector times slices, written out by hand.
inline cplx contract(const TensorTrain& tt, const MultiIndex& idx) {
  std::vector<cplx> v{cplx{1.0, 0.0}};
  for (std::size_t l = 0; l < tt.length(); ++l) {
    const Core3& c = tt.core(l);
    std::vector<cplx> w(static_cast<std::size_t>(c.right()), cplx{});
    for (int a = 0; a < c.left(); ++a)
      for (int b = 0; b < c.right(); ++b) w[b] += v[a] * c(a, idx[l], b);
    v = std::move(w);
  }
  return v[0];
}

inline std::vector<cplx> dense(const TensorTrain& tt) {
  std::vector<cplx> out;
  for (const auto& idx : all_indices(tt.local_dims())) out.push_back(contract(tt, idx));
  return out;
}

/// Block-diagonal sum a + b.
inline TensorTrain tt_sum(const TensorTrain& a, const TensorTrain& b) {
  std::vector<Core3> cores;
  const std::size_t L = a.length();
  for (std::size_t l = 0; l < L; ++l) {
    const Core3& x = a.core(l);
    const Core3& y = b.core(l);
    const bool first = l == 0, last = l + 1 == L;
    const int left = first ? 1 : x.left() + y.left();
    const int right = last ? 1 : x.right() + y.right();
    Core3 c(left, x.dim(), right);
    for (int s = 0; s < x.dim(); ++s) {
      for (int i = 0; i < x.left(); ++i)
        for (int j = 0; j < x.right(); ++j) c(i, s, j) = x(i, s, j);
      for (int i = 0; i < y.left(); ++i)
        for (int j = 0; j < y.right(); ++j) c(first ? 0 : x.left() + i, s, last ? 0 : x.right() + j) += y(i, s, j);
    }
    cores.push_back(std::move(c));
  }
  return TensorTrain(std::move(cores));
}

/// e^{c x} on [0,1) with R bits, one rank-1 factor per bit.
inline TensorTrain exp_qtt(int R, cplx c) {
  std::vector<Core3> cores;
  for (int r = 1; r <= R; ++r) {
    Core3 k(1, 2, 1);
    k(0, 0, 0) = 1.0;
    k(0, 1, 0) = std::exp(c * std::ldexp(1.0, -r));
    cores.push_back(std::move(k));
  }
  return TensorTrain(std::move(cores));
}

/// sin(2 pi x) = (e^{2 pi i x} - e^{-2 pi i x}) / 2i.
inline TensorTrain sine_qtt(int R) {
  const cplx w{0.0, 2 * std::numbers::pi};
  TensorTrain a = exp_qtt(R, w), b = exp_qtt(R, -w);
  std::vector<Core3> ca(a.cores()), cb(b.cores());
  const cplx s = 1.0 / cplx{0.0, 2.0};
  for (auto& v : ca[0].data()) v *= s;
  for (auto& v : cb[0].data()) v *= -s;
  return tt_sum(TensorTrain(std::move(ca)), TensorTrain(std::move(cb)));
}

inline double max_abs_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs(const std::vector<cplx>& a) {
  double m = 0;
  for (auto v : a) m = std::max(m, std::abs(v));
  return m;
}

/// Composite Simpson rule on [a, b] with n (even) panels.
template <class F>
double simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + h * i);
  return s * h / 3.0;
}

}  // namespace testutil
