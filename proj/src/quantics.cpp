#include "qttfit/quantics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qttfit {

QuanticsGrid::QuanticsGrid(int n_vars, int bits, std::vector<std::pair<double, double>> domains)
    : n_vars_(n_vars), bits_(bits), domains_(std::move(domains)) {
  if (n_vars < 1) throw std::invalid_argument("QuanticsGrid: n_vars must be >= 1");
  if (bits < 1 || bits > 52) throw std::invalid_argument("QuanticsGrid: bits must be in [1, 52]");
  if (domains_.size() != static_cast<std::size_t>(n_vars))
    throw std::invalid_argument("QuanticsGrid: one domain per variable required");
  for (const auto& [a, b] : domains_)
    if (!(a < b) || !std::isfinite(a) || !std::isfinite(b))
      throw std::invalid_argument("QuanticsGrid: each domain needs finite a < b");
}

QuanticsGrid::QuanticsGrid(int n_vars, int bits, double lo, double hi)
    : QuanticsGrid(n_vars, bits,
                   std::vector<std::pair<double, double>>(static_cast<std::size_t>(std::max(n_vars, 0)), {lo, hi})) {}

double QuanticsGrid::spacing(int k) const {
  const auto& [a, b] = domains_.at(static_cast<std::size_t>(k));
  return (b - a) / std::ldexp(1.0, bits_);
}

MultiIndex QuanticsGrid::index_from_ints(std::span<const std::size_t> m) const {
  if (m.size() != static_cast<std::size_t>(n_vars_)) throw std::domain_error("index_from_ints: wrong arity");
  MultiIndex idx(length());
  for (int k = 0; k < n_vars_; ++k) {
    if (m[k] >= points_per_var()) throw std::domain_error("index_from_ints: coordinate out of range");
    for (int r = 0; r < bits_; ++r) idx[site(k, r)] = static_cast<int>((m[k] >> (bits_ - 1 - r)) & 1u);
  }
  return idx;
}

std::vector<std::size_t> QuanticsGrid::ints_from_index(std::span<const int> index) const {
  if (index.size() != length())
    throw std::domain_error("QuanticsGrid: index length " + std::to_string(index.size()) + " != " +
                            std::to_string(length()));
  std::vector<std::size_t> m(static_cast<std::size_t>(n_vars_), 0);
  for (int k = 0; k < n_vars_; ++k)
    for (int r = 0; r < bits_; ++r) {
      const int s = index[site(k, r)];
      if (s != 0 && s != 1) throw std::domain_error("QuanticsGrid: bits must be 0 or 1");
      m[k] = (m[k] << 1) | static_cast<std::size_t>(s);
    }
  return m;
}

std::vector<double> QuanticsGrid::coords_from_ints(std::span<const std::size_t> m) const {
  std::vector<double> x(static_cast<std::size_t>(n_vars_));
  for (int k = 0; k < n_vars_; ++k) {
    const auto& [a, b] = domains_[k];
    x[k] = a + (b - a) * std::ldexp(static_cast<double>(m[k]), -bits_);
  }
  return x;
}

MultiIndex encode(const QuanticsGrid& grid, std::span<const double> point) {
  if (point.size() != static_cast<std::size_t>(grid.n_vars())) throw std::domain_error("encode: wrong arity");
  std::vector<std::size_t> m(point.size());
  for (int k = 0; k < grid.n_vars(); ++k) {
    const auto& [a, b] = grid.domains()[k];
    const double u = (point[k] - a) / (b - a) * std::ldexp(1.0, grid.bits());
    const double r = std::round(u);
    if (r < 0.0 || r >= std::ldexp(1.0, grid.bits()) || std::abs(u - r) > 1e-9)
      throw std::domain_error("encode: coordinate " + std::to_string(point[k]) + " is not a grid point");
    m[k] = static_cast<std::size_t>(r);
  }
  return grid.index_from_ints(m);
}

std::vector<double> decode(const QuanticsGrid& grid, std::span<const int> index) {
  return grid.coords_from_ints(grid.ints_from_index(index));
}

Evaluator tensorize(const QuanticsGrid& grid, RealFunction f) {
  return [grid, f = std::move(f)](std::span<const int> idx) { return f(decode(grid, idx)); };
}

double cell_volume(const QuanticsGrid& grid) {
  double v = 1.0;
  for (int k = 0; k < grid.n_vars(); ++k) v *= grid.spacing(k);
  return v;
}

MultiIndex to_sequential(const QuanticsGrid& grid, std::span<const int> interleaved) {
  if (interleaved.size() != grid.length()) throw std::domain_error("to_sequential: wrong length");
  MultiIndex out(grid.length());
  for (int k = 0; k < grid.n_vars(); ++k)
    for (int r = 0; r < grid.bits(); ++r)
      out[static_cast<std::size_t>(k) * grid.bits() + r] = interleaved[grid.site(k, r)];
  return out;
}

MultiIndex to_interleaved(const QuanticsGrid& grid, std::span<const int> sequential) {
  if (sequential.size() != grid.length()) throw std::domain_error("to_interleaved: wrong length");
  MultiIndex out(grid.length());
  for (int k = 0; k < grid.n_vars(); ++k)
    for (int r = 0; r < grid.bits(); ++r)
      out[grid.site(k, r)] = sequential[static_cast<std::size_t>(k) * grid.bits() + r];
  return out;
}

}  // namespace qttfit
