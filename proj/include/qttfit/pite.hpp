#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "qttfit/quantics.hpp"
#include "qttfit/tci.hpp"
#include "qttfit/tensor_train.hpp"

namespace qttfit {

struct KernelParams {
  double beta = 1.0;
  double tau = 2.0;
  double T = 2.0;  ///< integration over [-T, T)

  void validate() const;
};

/// (1/pi) beta/(beta^2+t^2) exp(-(beta^2+t^2)/(2 tau^2)).
double kernel_g(double t, const KernelParams& p);

/// Fourier transform int g(t) e^{-i omega t} dt over the real line, closed form.
double g_of_omega(double omega, double beta, double tau);

/// Same transform restricted to [-T, T], by adaptive quadrature.
double g_truncated_of_omega(double omega, const KernelParams& p);

double gamma_G(double delta_e, double tau);
double gamma_T(double beta, double tau, double T);

/// C = int_{-T}^{T} g(t) dt.
double normalization_constant(const KernelParams& p);

/// Draws t from g/C on [-T, T) by inverting a tabulated cumulative.
class KernelSampler {
 public:
  explicit KernelSampler(const KernelParams& p, int table_bits = 16);

  double operator()(std::mt19937_64& rng) const;
  double inverse_cdf(double u) const;
  double normalization() const noexcept { return c_; }

 private:
  KernelParams p_;
  double c_;
  std::vector<double> t_, cdf_;
};

using Correlator = std::function<cplx(double t, double t_prime)>;

struct McEstimate {
  cplx value;
  double std_error;  ///< sqrt(sample E|x - mean|^2 / N), scaled by C^2
  long n_samples;
};

/// C^2/N sum_i e^{i E0 (t_i - t'_i)} corr(t_i, t'_i), t_i and t'_i drawn i.i.d. from g/C.
McEstimate mc_estimate(const Correlator& corr, const KernelParams& p, double E0, long n_samples,
                       std::uint64_t seed);

/// Sampled times and correlator values, reusable across E0.
struct McSamples {
  std::vector<double> t, t_prime;
  std::vector<cplx> values;
  double c = 0.0;
};
McSamples mc_sample(const Correlator& corr, const KernelParams& p, long n_samples, std::uint64_t seed);
McEstimate mc_estimate(const McSamples& samples, double E0);

/// Rank-1 QTT of e^{i E0 (t - t')} on a two-variable grid (variable 0 = t).
TensorTrain build_phase_tt(double E0, const QuanticsGrid& grid);

/// QTT of g(t) g(t') learned by cross interpolation at the given tolerance.
TciResult learn_kernel_tt(const KernelParams& p, const QuanticsGrid& grid, double tci_tolerance,
                          int max_bond = 64);

/// integrate(phase(E0) * (kernel * corr)) over the grid.
cplx tt_estimate(const TensorTrain& corr_tt, const TensorTrain& kernel_tt, double E0, const QuanticsGrid& grid,
                 const TruncationSpec& spec = TruncationSpec::none());

struct EnergyScan {
  double center = 0.0;
  double half_width = 2.0;
  int steps = 40;

  void validate() const;
  /// steps + 1 points from center - half_width to center + half_width.
  std::vector<double> grid() const;
};

struct EstimatorOutput {
  cplx numerator{0.0, 0.0};
  cplx denominator{0.0, 0.0};
  cplx ratio{0.0, 0.0};
  long n_numerator = 0;
  long n_denominator = 0;
};

struct EnergyScanResult {
  std::vector<double> e0;
  std::vector<EstimatorOutput> points;
  std::vector<bool> flagged;  ///< |denominator| < 1e-12
  double estimate = 0.0;      ///< min Re ratio over unflagged points
  std::size_t argmin = 0;
  bool valid = false;         ///< false when every point was flagged
};

/// Evaluates `at` on each E0 of the scan and takes the minimum real part.
EnergyScanResult scan_energy(const EnergyScan& scan, const std::function<EstimatorOutput(double)>& at);

/// Algorithm-1 scan with cached kernel*correlator products.
EnergyScanResult energy_scan(const TensorTrain& numerator_tt, const TensorTrain& denominator_tt,
                             const TensorTrain& kernel_tt, const EnergyScan& scan, const QuanticsGrid& grid,
                             const TruncationSpec& spec = TruncationSpec::none());

/// Monte Carlo counterpart: one sample set per correlator reused across E0.
EnergyScanResult mc_energy_scan(const McSamples& numerator, const McSamples& denominator, const EnergyScan& scan);

/// Scan CSV: E0,re_num,im_num,re_den,im_den,re_ratio,flagged.
void write_scan_csv(const std::string& path, const EnergyScanResult& r);

}  // namespace qttfit
