#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "qttfit/fit.hpp"
#include "qttfit/pite.hpp"
#include "qttfit/qsim.hpp"

namespace qttfit {

/// Parameters of every command. Table-1 values are the defaults; fields left
/// unset pick a command-specific default.
struct RunConfig {
  double lambda = 1.2;
  double beta = 1.0;
  double tau = 2.0;
  double T = 2.0;
  std::optional<int> R;      ///< 8 for the correlator commands, 12 for sine-demo
  double tci_tol = 1e-5;     ///< kernel interpolation tolerance
  int trotter_steps = 100;
  long shots = 15000;        ///< 0 = exact probabilities
  int iters = 500;
  double e_halfwidth = 2.0;
  int e_steps = 40;

  int n_site = 2;
  std::optional<int> chi_tilde;  ///< 4/6/10 for n_site 2/4/6, 6 for sine-demo
  std::optional<int> chi;        ///< 2/4/8 for n_site 2/4/6, 2 for sine-demo
  double sigma = 0.1;

  std::string method = "all";    ///< proposed | qtci | mc | all
  long mc_num = 0;               ///< 0 = matched to the mean ledger size (767 when mc runs alone)
  long mc_den = 0;               ///< 0 = matched (742 when mc runs alone)
  int downsample = 50;
  std::vector<int> sites{2, 4, 6};
  double svd_tol = 1e-10;
  int scan_max_chi = 12;

  std::uint64_t seed = 1;
  int trials = 20;
  std::string out = "out";

  int resolved_R(int fallback) const { return R.value_or(fallback); }
  void validate() const;
};

/// Fully resolved config for the given command.
nlohmann::ordered_json config_json(const RunConfig& cfg, const std::string& command);

/// Trial seeds fan out from the master seed: derive_seed(master, {trial}).
std::uint64_t trial_seed(std::uint64_t master, int trial);

/// Per-size defaults for the correlator fits.
int default_chi_tilde(int n_site);
int default_chi(int n_site);

ShotConfig shot_config(const RunConfig& cfg, std::uint64_t seed);

// ---- sine demo --------------------------------------------------------------

struct SineTrial {
  std::uint64_t seed;
  double tci_error;
  std::size_t n_tci;
  double err_itpl, err_init, err_opt, err_opt_nocompress;  ///< mean |F - f| over the grid
};

struct SineSummary {
  std::vector<SineTrial> trials;
  double mean_tci_error = 0;
  double mean_err_itpl = 0, mean_err_init = 0, mean_err_opt = 0, mean_err_opt_nocompress = 0;
};

SineSummary run_sine_demo(const RunConfig& cfg);

// ---- correlators ------------------------------------------------------------

/// Two-time correlator of the Hamiltonian (numerator) or the identity
/// (denominator) on the (t, t') grid, measured with the Hadamard test.
struct CorrelatorProblem {
  PauliHamiltonian h;
  PauliHamiltonian observable;
  QuanticsGrid grid;
  ShotConfig shots;

  Evaluator evaluator() const;
};

QuanticsGrid time_grid(const RunConfig& cfg);

/// Exact correlator on every grid point, row-major over (m_t, m_t').
std::vector<cplx> exact_correlation_grid(const PauliHamiltonian& h, const PauliHamiltonian& observable,
                                         const QuanticsGrid& grid);

/// Values of a train on every grid point, row-major over the integer coordinates.
std::vector<cplx> tt_on_grid(const TensorTrain& tt, const QuanticsGrid& grid);

struct CorrelatorFits {
  FitReport numerator, denominator;
};

/// Fits numerator and denominator correlators for one trial.
CorrelatorFits learn_correlators(const RunConfig& cfg, std::uint64_t seed);

struct CorrLearnSummary {
  std::vector<double> mean_err_itpl_num, mean_err_opt_num, mean_err_itpl_den, mean_err_opt_den;  ///< per grid point
  double frac_opt_better_num = 0, frac_opt_better_den = 0;
  double mean_n_tci_num = 0, mean_n_tci_den = 0;
};

CorrLearnSummary run_corr_learn(const RunConfig& cfg);

// ---- ground-state energy -----------------------------------------------------

struct GsTrial {
  std::string method;
  std::uint64_t seed;
  double estimate;
  double rel_error;
  long n_num, n_den;
};

struct GsSummary {
  double exact_energy = 0;
  std::vector<GsTrial> trials;
  std::vector<std::string> methods;
  std::vector<double> mean_abs_rel_error;  ///< per method, same order
  long mc_num = 0, mc_den = 0;
  double mean_n_tci_num = 0, mean_n_tci_den = 0;

  double mean_for(const std::string& method) const;
};

GsSummary run_gs_energy(const RunConfig& cfg);

// ---- bond dimensions ---------------------------------------------------------

struct BondDimRow {
  int n_site;
  std::string observable;
  double tol;
  int max_bond;
};

struct ChiScanRow {
  int chi_tilde;
  double mean_tci_error;
  double mean_tci_error_exact;
  double mean_n_tci;
};

struct BondDimSummary {
  std::vector<BondDimRow> bonds;
  std::vector<ChiScanRow> scan;
};

BondDimSummary run_bonddim_scan(const RunConfig& cfg);

}  // namespace qttfit
