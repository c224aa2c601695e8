#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qttfit/lbfgs.hpp"
#include "qttfit/quantics.hpp"
#include "qttfit/tci.hpp"
#include "qttfit/tensor_train.hpp"

namespace qttfit {

struct FitPlan {
  int chi_tilde = 6;       ///< bond cap of the interpolation step
  int chi = 2;             ///< bond cap after compression (chi <= chi_tilde)
  int n_itr = 500;         ///< optimizer iteration cap
  double convergence_tol = 1e-12;  ///< relative cost decrease over 10 iterations
  bool compress = true;    ///< false skips the SVD step and optimizes the interpolant directly
  double tci_tolerance = 0.0;
  int tci_max_sweeps = 40;
  MultiIndex pivot_seed;

  void validate() const;
};

/// Flat real parameters: (re, im) of every core entry, cores in order, each
/// core row-major over (left, dim, right).
using ParameterVector = std::vector<double>;

ParameterVector to_parameters(const TensorTrain& tt);
/// Rebuilds a train with the shapes of `shape` from a parameter vector.
TensorTrain from_parameters(std::span<const double> theta, const TensorTrain& shape);

/// sum_i |z_i - tt(s_i)|^2 over the ledger.
double cost(const TensorTrain& tt, const MeasurementLedger& ledger);

/// Exact gradient of `cost` with respect to every real parameter, computed per
/// sample from cached left/right environments.
ParameterVector gradient(const TensorTrain& tt, const MeasurementLedger& ledger);

struct OptimizeResult {
  TensorTrain tt;
  std::vector<double> cost_trace;
  int iterations = 0;
  bool line_search_failed = false;
  bool converged = false;
};

/// L-BFGS over all core entries at once, starting from tt_init.
OptimizeResult optimize(const TensorTrain& tt_init, const MeasurementLedger& ledger, const FitPlan& plan);

struct FitReport {
  std::optional<TensorTrain> tt_itpl, tt_init, tt_opt;
  MeasurementLedger ledger;
  double tci_error = 0.0;
  int tci_sweeps = 0;
  std::vector<double> cost_trace;
  double cost_itpl = 0.0;
  double cost_init = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool line_search_failed = false;
  std::uint64_t seed = 0;
  std::string failure;  ///< empty on success; otherwise the stage error
};

/// Function of grid coordinates and a per-point noise seed.
using NoisyFunction = std::function<cplx(std::span<const double> x, std::uint64_t point_seed)>;

/// Wraps a noisy function as an index evaluator. The noise seed of a point is
/// derived from (seed, its integer grid coordinates), so realisations do not
/// depend on evaluation order.
Evaluator noisy_evaluator(const QuanticsGrid& grid, NoisyFunction f, std::uint64_t seed);

/// Interpolate at chi~ recording the ledger, compress to chi, refit against the ledger.
FitReport fit_pipeline(const Evaluator& f, std::span<const int> dims, const FitPlan& plan);
FitReport fit_pipeline(const NoisyFunction& f, const QuanticsGrid& grid, const FitPlan& plan,
                       std::uint64_t rng_seed);

/// JSON summary of a report (costs, bond dims, ledger size, seed).
std::string fit_report_json(const FitReport& report);

}  // namespace qttfit
