#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "qttfit/common.hpp"

namespace qttfit {

/// Uniform 2^R-point grid per variable on half-open intervals [a_k, b_k), with
/// interleaved bit ordering: site r*n + k holds bit r (most significant first)
/// of variable k.
class QuanticsGrid {
 public:
  QuanticsGrid(int n_vars, int bits, std::vector<std::pair<double, double>> domains);
  /// Same interval for every variable.
  QuanticsGrid(int n_vars, int bits, double lo, double hi);

  int n_vars() const noexcept { return n_vars_; }
  int bits() const noexcept { return bits_; }
  std::size_t length() const noexcept { return static_cast<std::size_t>(n_vars_) * bits_; }
  const std::vector<std::pair<double, double>>& domains() const noexcept { return domains_; }
  std::vector<int> local_dims() const { return std::vector<int>(length(), 2); }
  std::size_t points_per_var() const noexcept { return std::size_t{1} << bits_; }
  double spacing(int k) const;

  /// Site position of bit r of variable k.
  std::size_t site(int var, int bit) const noexcept { return static_cast<std::size_t>(bit) * n_vars_ + var; }

  /// Integer grid coordinates m_k in [0, 2^R) -> multi-index.
  MultiIndex index_from_ints(std::span<const std::size_t> m) const;
  std::vector<std::size_t> ints_from_index(std::span<const int> index) const;
  /// Grid point coordinates of integer coordinates.
  std::vector<double> coords_from_ints(std::span<const std::size_t> m) const;

 private:
  int n_vars_;
  int bits_;
  std::vector<std::pair<double, double>> domains_;
};

/// Point on the grid -> interleaved bits. Off-grid coordinates are a domain error.
MultiIndex encode(const QuanticsGrid& grid, std::span<const double> point);
/// Bits -> a_k + (b_k - a_k) * sum_r s_kr / 2^r.
std::vector<double> decode(const QuanticsGrid& grid, std::span<const int> index);

using RealFunction = std::function<cplx(std::span<const double>)>;

/// evaluator(s) = f(decode(s)).
Evaluator tensorize(const QuanticsGrid& grid, RealFunction f);

/// prod_k (b_k - a_k) / 2^R.
double cell_volume(const QuanticsGrid& grid);

/// Interleaved index <-> sequential index (all bits of variable 0 first).
MultiIndex to_sequential(const QuanticsGrid& grid, std::span<const int> interleaved);
MultiIndex to_interleaved(const QuanticsGrid& grid, std::span<const int> sequential);

}  // namespace qttfit
