#include "qttfit/pite.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "qttfit/csv.hpp"

namespace qttfit {

namespace {

constexpr double kQuadTol = 1e-12;

template <class F>
double quad(F f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, kQuadTol);
}

// log erfc(x), stable for large positive x.
double log_erfc(double x) {
  if (x < 25.0) return std::log(std::erfc(x));
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / (2 * x2) + 3.0 / (4 * x2 * x2) - 15.0 / (8 * x2 * x2 * x2);
  return -x2 - std::log(x * std::sqrt(std::numbers::pi)) + std::log(series);
}

}  // namespace

void KernelParams::validate() const {
  if (!(beta > 0) || !(tau > 0) || !(T > 0)) throw std::domain_error("KernelParams: beta, tau and T must be positive");
}

double kernel_g(double t, const KernelParams& p) {
  const double r2 = p.beta * p.beta + t * t;
  return p.beta / (std::numbers::pi * r2) * std::exp(-r2 / (2 * p.tau * p.tau));
}

double g_of_omega(double omega, double beta, double tau) {
  double total = 0.0;
  for (int eta : {1, -1}) {
    const double x = (beta + eta * omega * tau * tau) / (std::sqrt(2.0) * tau);
    total += 0.5 * std::exp(eta * beta * omega + log_erfc(x));
  }
  return total;
}

double g_truncated_of_omega(double omega, const KernelParams& p) {
  p.validate();
  // g is even, so the sine part cancels.
  return 2.0 * quad([&](double t) { return kernel_g(t, p) * std::cos(omega * t); }, 0.0, p.T);
}

double gamma_G(double delta_e, double tau) { return std::exp(-delta_e * delta_e * tau * tau / 2); }

double gamma_T(double beta, double tau, double T) {
  return std::sqrt(2.0) * tau / (std::sqrt(std::numbers::pi) * beta) * std::exp(-T * T / (2 * tau * tau));
}

double normalization_constant(const KernelParams& p) {
  p.validate();
  return 2.0 * quad([&](double t) { return kernel_g(t, p); }, 0.0, p.T);
}

KernelSampler::KernelSampler(const KernelParams& p, int table_bits) : p_(p), c_(normalization_constant(p)) {
  if (table_bits < 4 || table_bits > 24) throw std::domain_error("KernelSampler: table_bits out of range");
  const std::size_t n = std::size_t{1} << table_bits;
  t_.resize(n + 1);
  cdf_.resize(n + 1);
  const double h = 2 * p.T / static_cast<double>(n);
  t_[0] = -p.T;
  cdf_[0] = 0.0;
  double prev = kernel_g(-p.T, p);
  for (std::size_t i = 1; i <= n; ++i) {
    t_[i] = -p.T + h * static_cast<double>(i);
    const double g = kernel_g(t_[i], p);
    cdf_[i] = cdf_[i - 1] + 0.5 * h * (prev + g);
    prev = g;
  }
  const double total = cdf_.back();
  for (auto& c : cdf_) c /= total;
  cdf_.back() = 1.0;
}

double KernelSampler::inverse_cdf(double u) const {
  u = std::clamp(u, 0.0, 1.0);
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) return std::nextafter(p_.T, -p_.T);
  const std::size_t i = static_cast<std::size_t>(it - cdf_.begin());
  const double c0 = cdf_[i - 1], c1 = cdf_[i];
  const double w = c1 > c0 ? (u - c0) / (c1 - c0) : 0.0;
  const double t = t_[i - 1] + w * (t_[i] - t_[i - 1]);
  return std::min(t, std::nextafter(p_.T, -p_.T));
}

double KernelSampler::operator()(std::mt19937_64& rng) const {
  return inverse_cdf(std::uniform_real_distribution<double>(0.0, 1.0)(rng));
}

McSamples mc_sample(const Correlator& corr, const KernelParams& p, long n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw std::domain_error("mc_estimate: N^MC must be >= 1");
  const KernelSampler sampler(p);
  std::mt19937_64 rng(seed);
  McSamples s;
  s.c = sampler.normalization();
  const auto n = static_cast<std::size_t>(n_samples);
  s.t.resize(n);
  s.t_prime.resize(n);
  s.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.t[i] = sampler(rng);
    s.t_prime[i] = sampler(rng);
  }
  for (std::size_t i = 0; i < n; ++i) s.values[i] = corr(s.t[i], s.t_prime[i]);
  return s;
}

McEstimate mc_estimate(const McSamples& s, double E0) {
  const std::size_t n = s.values.size();
  if (n == 0) throw std::domain_error("mc_estimate: no samples");
  cplx sum{0.0, 0.0};
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const cplx x = std::exp(cplx{0.0, E0 * (s.t[i] - s.t_prime[i])}) * s.values[i];
    sum += x;
    sq += std::norm(x);
  }
  const double dn = static_cast<double>(n);
  const cplx mean = sum / dn;
  const double var = n > 1 ? std::max(0.0, (sq - dn * std::norm(mean)) / (dn - 1)) : 0.0;
  const double c2 = s.c * s.c;
  return {c2 * mean, c2 * std::sqrt(var / dn), static_cast<long>(n)};
}

McEstimate mc_estimate(const Correlator& corr, const KernelParams& p, double E0, long n_samples,
                       std::uint64_t seed) {
  return mc_estimate(mc_sample(corr, p, n_samples, seed), E0);
}

TensorTrain build_phase_tt(double E0, const QuanticsGrid& grid) {
  if (grid.n_vars() != 2) throw std::domain_error("build_phase_tt: expected a two-variable grid");
  const int R = grid.bits();
  std::vector<std::vector<cplx>> factors(grid.length());
  const double sign[2] = {1.0, -1.0};
  for (int var = 0; var < 2; ++var) {
    const double h = grid.spacing(var);
    for (int r = 0; r < R; ++r) {
      const double w = h * std::ldexp(1.0, R - 1 - r);
      factors[grid.site(var, r)] = {cplx{1.0, 0.0}, std::exp(cplx{0.0, sign[var] * E0 * w})};
    }
  }
  const double offset = grid.domains()[0].first - grid.domains()[1].first;
  const cplx c = std::exp(cplx{0.0, E0 * offset});
  for (auto& v : factors[0]) v *= c;
  return TensorTrain::product(factors);
}

TciResult learn_kernel_tt(const KernelParams& p, const QuanticsGrid& grid, double tci_tolerance, int max_bond) {
  p.validate();
  if (grid.n_vars() != 2) throw std::domain_error("learn_kernel_tt: expected a two-variable grid");
  TciOptions opts;
  opts.max_bond = max_bond;
  opts.tolerance = tci_tolerance;
  // Separable in t and t', so every interleaved 2-site block around the
  // first pivot is rank 1 and plain sweeps stop at once.
  opts.global_search_starts = 8;
  const auto f = tensorize(grid, [p](std::span<const double> x) { return cplx{kernel_g(x[0], p) * kernel_g(x[1], p), 0.0}; });
  const auto dims = grid.local_dims();
  return cross_interpolate(f, dims, opts);
}

cplx tt_estimate(const TensorTrain& corr_tt, const TensorTrain& kernel_tt, double E0, const QuanticsGrid& grid,
                 const TruncationSpec& spec) {
  const TensorTrain weighted = elementwise_multiply(kernel_tt, corr_tt, spec);
  return integrate(elementwise_multiply(build_phase_tt(E0, grid), weighted, TruncationSpec::none()), cell_volume(grid));
}

void EnergyScan::validate() const {
  if (!(half_width > 0)) throw std::domain_error("EnergyScan: half_width must be positive");
  if (steps < 1) throw std::domain_error("EnergyScan: steps must be >= 1");
  if (!std::isfinite(center)) throw std::domain_error("EnergyScan: non-finite center");
}

std::vector<double> EnergyScan::grid() const {
  validate();
  std::vector<double> e(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) e[static_cast<std::size_t>(k)] = center - half_width + 2 * half_width * k / steps;
  if (steps % 2 == 0) e[static_cast<std::size_t>(steps / 2)] = center;
  return e;
}

EnergyScanResult scan_energy(const EnergyScan& scan, const std::function<EstimatorOutput(double)>& at) {
  EnergyScanResult r;
  r.e0 = scan.grid();
  for (double e0 : r.e0) {
    EstimatorOutput o = at(e0);
    const bool bad = !(std::abs(o.denominator) >= 1e-12);
    if (!bad) o.ratio = o.numerator / o.denominator;
    r.points.push_back(o);
    r.flagged.push_back(bad);
  }
  for (std::size_t k = 0; k < r.points.size(); ++k) {
    if (r.flagged[k]) continue;
    const double v = r.points[k].ratio.real();
    if (!r.valid || v < r.estimate) {
      r.estimate = v;
      r.argmin = k;
      r.valid = true;
    }
  }
  return r;
}

EnergyScanResult energy_scan(const TensorTrain& numerator_tt, const TensorTrain& denominator_tt,
                             const TensorTrain& kernel_tt, const EnergyScan& scan, const QuanticsGrid& grid,
                             const TruncationSpec& spec) {
  const TensorTrain kn = elementwise_multiply(kernel_tt, numerator_tt, spec);
  const TensorTrain kd = elementwise_multiply(kernel_tt, denominator_tt, spec);
  const double vol = cell_volume(grid);
  return scan_energy(scan, [&](double e0) {
    const TensorTrain phase = build_phase_tt(e0, grid);
    EstimatorOutput o;
    o.numerator = integrate(elementwise_multiply(phase, kn, TruncationSpec::none()), vol);
    o.denominator = integrate(elementwise_multiply(phase, kd, TruncationSpec::none()), vol);
    return o;
  });
}

EnergyScanResult mc_energy_scan(const McSamples& numerator, const McSamples& denominator, const EnergyScan& scan) {
  return scan_energy(scan, [&](double e0) {
    EstimatorOutput o;
    o.numerator = mc_estimate(numerator, e0).value;
    o.denominator = mc_estimate(denominator, e0).value;
    o.n_numerator = static_cast<long>(numerator.values.size());
    o.n_denominator = static_cast<long>(denominator.values.size());
    return o;
  });
}

void write_scan_csv(const std::string& path, const EnergyScanResult& r) {
  CsvWriter csv(path, {"E0", "re_num", "im_num", "re_den", "im_den", "re_ratio", "flagged"});
  for (std::size_t k = 0; k < r.e0.size(); ++k) {
    const auto& p = r.points[k];
    csv.row(r.e0[k], p.numerator.real(), p.numerator.imag(), p.denominator.real(), p.denominator.imag(),
            p.ratio.real(), r.flagged[k] ? 1 : 0);
  }
}

}  // namespace qttfit
