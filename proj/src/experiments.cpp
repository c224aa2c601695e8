#include "qttfit/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include "qttfit/csv.hpp"
#include "qttfit/rng.hpp"

namespace qttfit {

namespace fs = std::filesystem;

void RunConfig::validate() const {
  KernelParams{beta, tau, T}.validate();
  if (R && (*R < 1 || *R > 20)) throw std::invalid_argument("R must be in 1..20");
  if (tci_tol < 0) throw std::invalid_argument("tci-tol must be >= 0");
  if (trotter_steps < 1) throw std::invalid_argument("trotter-steps must be >= 1");
  if (shots < 0) throw std::invalid_argument("shots must be >= 0 (0 = exact)");
  if (iters < 1) throw std::invalid_argument("iters must be >= 1");
  if (!(e_halfwidth > 0)) throw std::invalid_argument("e-halfwidth must be positive");
  if (e_steps < 1) throw std::invalid_argument("e-steps must be >= 1");
  if (n_site < 2 || n_site > kMaxDenseSites) throw std::invalid_argument("n-site must be in 2..12");
  if (chi_tilde && *chi_tilde < 1) throw std::invalid_argument("chi-tilde must be >= 1");
  if (chi && *chi < 1) throw std::invalid_argument("chi must be >= 1");
  if (sigma < 0) throw std::invalid_argument("sigma must be >= 0");
  if (method != "all" && method != "proposed" && method != "qtci" && method != "mc")
    throw std::invalid_argument("method must be one of proposed, qtci, mc, all");
  if (mc_num < 0 || mc_den < 0) throw std::invalid_argument("MC budgets must be >= 0");
  if (downsample < 1) throw std::invalid_argument("downsample must be >= 1");
  for (int n : sites)
    if (n < 2 || n > 8) throw std::invalid_argument("bond-dimension scan sites must be in 2..8");
  if (!(svd_tol >= 0)) throw std::invalid_argument("svd-tol must be >= 0");
  if (scan_max_chi < 1) throw std::invalid_argument("scan-max-chi must be >= 1");
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
}

int default_chi_tilde(int n_site) { return n_site <= 2 ? 4 : n_site <= 4 ? 6 : 10; }
int default_chi(int n_site) { return n_site <= 2 ? 2 : n_site <= 4 ? 4 : 8; }

nlohmann::ordered_json config_json(const RunConfig& c, const std::string& command) {
  const bool sine = command == "sine-demo";
  nlohmann::ordered_json j;
  j["command"] = command;
  j["seed"] = c.seed;
  j["trials"] = c.trials;
  j["R"] = c.resolved_R(sine ? 12 : 8);
  j["iters"] = c.iters;
  if (sine) {
    j["sigma"] = c.sigma;
    j["chi_tilde"] = c.chi_tilde.value_or(6);
    j["chi"] = c.chi.value_or(2);
    return j;
  }
  j["lambda"] = c.lambda;
  j["beta"] = c.beta;
  j["tau"] = c.tau;
  j["T"] = c.T;
  j["tci_tol"] = c.tci_tol;
  j["trotter_steps"] = c.trotter_steps;
  j["shots"] = c.shots;
  j["n_site"] = c.n_site;
  j["chi_tilde"] = c.chi_tilde.value_or(default_chi_tilde(c.n_site));
  j["chi"] = c.chi.value_or(default_chi(c.n_site));
  if (command == "gs-energy") {
    j["e_halfwidth"] = c.e_halfwidth;
    j["e_steps"] = c.e_steps;
    j["method"] = c.method;
    j["mc_num"] = c.mc_num;
    j["mc_den"] = c.mc_den;
  }
  if (command == "corr-learn") j["downsample"] = c.downsample;
  if (command == "bonddim-scan") {
    j["sites"] = c.sites;
    j["svd_tol"] = c.svd_tol;
    j["scan_max_chi"] = c.scan_max_chi;
  }
  return j;
}

std::uint64_t trial_seed(std::uint64_t master, int trial) {
  return derive_seed(master, {static_cast<std::uint64_t>(trial)});
}

ShotConfig shot_config(const RunConfig& cfg, std::uint64_t seed) {
  ShotConfig s;
  if (cfg.shots > 0) s.shots = cfg.shots;
  s.trotter_steps = cfg.trotter_steps;
  s.seed = seed;
  return s;
}

namespace {

fs::path ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw std::runtime_error("cannot create output directory " + p.string());
  return p;
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

std::string trial_name(const std::string& stem, int trial, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%02d", trial);
  return stem + buf + ext;
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Values of the train at every grid point, ordered by integer coordinates with
// variable 0 slowest.
std::vector<cplx> values_by_coords(const TensorTrain& tt, const QuanticsGrid& grid) {
  const std::vector<cplx> dense = tt.to_dense();
  std::vector<cplx> out(dense.size());
  const std::size_t L = grid.length();
  MultiIndex idx(L);
  for (std::size_t p = 0; p < dense.size(); ++p) {
    for (std::size_t l = 0; l < L; ++l) idx[l] = static_cast<int>((p >> (L - 1 - l)) & 1u);
    const auto m = grid.ints_from_index(idx);
    std::size_t flat = 0;
    for (auto v : m) flat = flat * grid.points_per_var() + v;
    out[flat] = dense[p];
  }
  return out;
}

// Inverse of values_by_coords: coordinate-ordered values -> interleaved dense tensor.
std::vector<cplx> interleaved_dense(const std::vector<cplx>& by_coords, const QuanticsGrid& grid) {
  std::vector<cplx> out(by_coords.size());
  const std::size_t L = grid.length();
  MultiIndex idx(L);
  for (std::size_t p = 0; p < out.size(); ++p) {
    for (std::size_t l = 0; l < L; ++l) idx[l] = static_cast<int>((p >> (L - 1 - l)) & 1u);
    const auto m = grid.ints_from_index(idx);
    std::size_t flat = 0;
    for (auto v : m) flat = flat * grid.points_per_var() + v;
    out[p] = by_coords[flat];
  }
  return out;
}

FitPlan correlator_plan(const RunConfig& cfg) {
  FitPlan plan;
  plan.chi_tilde = cfg.chi_tilde.value_or(default_chi_tilde(cfg.n_site));
  plan.chi = cfg.chi.value_or(default_chi(cfg.n_site));
  plan.n_itr = cfg.iters;
  return plan;
}

}  // namespace

std::vector<cplx> tt_on_grid(const TensorTrain& tt, const QuanticsGrid& grid) { return values_by_coords(tt, grid); }

// ---- sine demo --------------------------------------------------------------

SineSummary run_sine_demo(const RunConfig& cfg) {
  cfg.validate();
  const int R = cfg.resolved_R(12);
  if (R > 20) throw std::invalid_argument("sine-demo: R too large");
  const fs::path dir = ensure_dir(fs::path(cfg.out) / "sine_demo");
  const QuanticsGrid grid(1, R, 0.0, 1.0);
  FitPlan plan;
  plan.chi_tilde = cfg.chi_tilde.value_or(6);
  plan.chi = cfg.chi.value_or(2);
  plan.n_itr = cfg.iters;
  FitPlan ablation = plan;
  ablation.compress = false;

  const double sigma = cfg.sigma;
  const NoisyFunction f = [sigma](std::span<const double> x, std::uint64_t point_seed) {
    std::mt19937_64 rng(point_seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    return cplx{std::sin(2 * std::numbers::pi * x[0]) * (1 + sigma * noise(rng)), 0.0};
  };

  const std::size_t n = grid.points_per_var();
  std::vector<double> exact(n);
  for (std::size_t m = 0; m < n; ++m) exact[m] = std::sin(2 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n));

  // Running sums for per-point mean / variance / mean abs error over trials.
  constexpr int kVariants = 4;  // itpl, init, opt, opt_nocompress
  std::vector<std::vector<double>> sum(kVariants, std::vector<double>(n)), sum2 = sum, abs_err = sum;

  SineSummary summary;
  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t seed = trial_seed(cfg.seed, trial);
    const FitReport r = fit_pipeline(f, grid, plan, seed);
    if (!r.failure.empty()) throw std::runtime_error("sine-demo trial " + std::to_string(trial) + ": " + r.failure);
    const FitReport r_abl = fit_pipeline(f, grid, ablation, seed);
    if (!r_abl.failure.empty()) throw std::runtime_error("sine-demo ablation trial " + std::to_string(trial) + ": " + r_abl.failure);

    const std::vector<cplx> vals[kVariants] = {tt_on_grid(*r.tt_itpl, grid), tt_on_grid(*r.tt_init, grid),
                                               tt_on_grid(*r.tt_opt, grid), tt_on_grid(*r_abl.tt_opt, grid)};
    double err[kVariants] = {0, 0, 0, 0};
    CsvWriter csv((dir / trial_name("trial", trial, ".csv")).string(),
                  {"x", "exact", "itpl", "init", "opt", "opt_nocompress"});
    for (std::size_t m = 0; m < n; ++m) {
      for (int v = 0; v < kVariants; ++v) {
        const double y = vals[v][m].real();
        const double e = std::abs(vals[v][m] - exact[m]);
        err[v] += e;
        sum[v][m] += y;
        sum2[v][m] += y * y;
        abs_err[v][m] += e;
      }
      csv.row(static_cast<double>(m) / static_cast<double>(n), exact[m], vals[0][m].real(), vals[1][m].real(),
              vals[2][m].real(), vals[3][m].real());
    }
    const double dn = static_cast<double>(n);
    summary.trials.push_back({seed, r.tci_error, r.ledger.size(), err[0] / dn, err[1] / dn, err[2] / dn, err[3] / dn});
  }

  const double nt = static_cast<double>(cfg.trials);
  {
    CsvWriter csv((dir / "stats.csv").string(),
                  {"x", "exact", "mean_itpl", "var_itpl", "mean_init", "var_init", "mean_opt", "var_opt",
                   "mean_opt_nocompress", "var_opt_nocompress", "abserr_itpl", "abserr_init", "abserr_opt",
                   "abserr_opt_nocompress"});
    for (std::size_t m = 0; m < n; ++m) {
      double mu[kVariants], var[kVariants];
      for (int v = 0; v < kVariants; ++v) {
        mu[v] = sum[v][m] / nt;
        var[v] = std::max(0.0, sum2[v][m] / nt - mu[v] * mu[v]);
      }
      csv.row(static_cast<double>(m) / static_cast<double>(n), exact[m], mu[0], var[0], mu[1], var[1], mu[2], var[2],
              mu[3], var[3], abs_err[0][m] / nt, abs_err[1][m] / nt, abs_err[2][m] / nt, abs_err[3][m] / nt);
    }
  }

  std::vector<double> eps, ei, e0, eo, ea;
  for (const auto& t : summary.trials) {
    eps.push_back(t.tci_error);
    ei.push_back(t.err_itpl);
    e0.push_back(t.err_init);
    eo.push_back(t.err_opt);
    ea.push_back(t.err_opt_nocompress);
  }
  summary.mean_tci_error = mean(eps);
  summary.mean_err_itpl = mean(ei);
  summary.mean_err_init = mean(e0);
  summary.mean_err_opt = mean(eo);
  summary.mean_err_opt_nocompress = mean(ea);

  nlohmann::ordered_json j;
  j["config"] = config_json(cfg, "sine-demo");
  j["mean_tci_error"] = summary.mean_tci_error;
  j["mean_abs_err"] = {{"itpl", summary.mean_err_itpl},
                       {"init", summary.mean_err_init},
                       {"opt", summary.mean_err_opt},
                       {"opt_nocompress", summary.mean_err_opt_nocompress}};
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (const auto& t : summary.trials)
    per.push_back({{"seed", t.seed},
                   {"tci_error", t.tci_error},
                   {"n_tci", t.n_tci},
                   {"err_itpl", t.err_itpl},
                   {"err_init", t.err_init},
                   {"err_opt", t.err_opt},
                   {"err_opt_nocompress", t.err_opt_nocompress}});
  j["trials"] = per;
  write_json(dir / "summary.json", j);
  return summary;
}

// ---- correlators ------------------------------------------------------------

Evaluator CorrelatorProblem::evaluator() const {
  return tensorize(grid, [h = h, obs = observable, cfg = shots](std::span<const double> x) {
    return correlation(h, obs, x[0], x[1], cfg);
  });
}

QuanticsGrid time_grid(const RunConfig& cfg) { return QuanticsGrid(2, cfg.resolved_R(8), -cfg.T, cfg.T); }

std::vector<cplx> exact_correlation_grid(const PauliHamiltonian& h, const PauliHamiltonian& observable,
                                         const QuanticsGrid& grid) {
  if (grid.n_vars() != 2) throw std::domain_error("exact_correlation_grid: expected a (t, t') grid");
  const ExactEvolver ev(h);
  const MatrixC O = observable.dense();
  const std::size_t n = grid.points_per_var();
  const double a = grid.domains()[0].first, dt = grid.spacing(0);
  const double ap = grid.domains()[1].first, dtp = grid.spacing(1);
  MatrixC U(ev.initial_state().size(), static_cast<Eigen::Index>(n));
  MatrixC Up(ev.initial_state().size(), static_cast<Eigen::Index>(n));
  for (std::size_t m = 0; m < n; ++m) {
    U.col(static_cast<Eigen::Index>(m)) = ev.evolve(a + dt * static_cast<double>(m));
    Up.col(static_cast<Eigen::Index>(m)) = ev.evolve(ap + dtp * static_cast<double>(m));
  }
  const MatrixC C = Up.adjoint() * (O * U);  // C(m', m) = <u(t'_m')| O |u(t_m)>
  std::vector<cplx> out(n * n);
  for (std::size_t m = 0; m < n; ++m)
    for (std::size_t mp = 0; mp < n; ++mp)
      out[m * n + mp] = C(static_cast<Eigen::Index>(mp), static_cast<Eigen::Index>(m));
  return out;
}

CorrelatorFits learn_correlators(const RunConfig& cfg, std::uint64_t seed) {
  const PauliHamiltonian h = build_tfim(cfg.n_site, cfg.lambda);
  const QuanticsGrid grid = time_grid(cfg);
  const FitPlan plan = correlator_plan(cfg);
  const CorrelatorProblem num{h, h, grid, shot_config(cfg, derive_seed(seed, {0}))};
  const CorrelatorProblem den{h, PauliHamiltonian::identity(cfg.n_site), grid, shot_config(cfg, derive_seed(seed, {1}))};
  const auto dims = grid.local_dims();
  CorrelatorFits fits{fit_pipeline(num.evaluator(), dims, plan), fit_pipeline(den.evaluator(), dims, plan)};
  fits.numerator.seed = seed;
  fits.denominator.seed = seed;
  if (!fits.numerator.failure.empty()) throw std::runtime_error("numerator fit: " + fits.numerator.failure);
  if (!fits.denominator.failure.empty()) throw std::runtime_error("denominator fit: " + fits.denominator.failure);
  return fits;
}

CorrLearnSummary run_corr_learn(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.n_site > 8) throw std::invalid_argument("corr-learn: n-site above 8 is too large for the statevector runs");
  const fs::path dir = ensure_dir(fs::path(cfg.out) / "corr_learn");
  const PauliHamiltonian h = build_tfim(cfg.n_site, cfg.lambda);
  const QuanticsGrid grid = time_grid(cfg);
  const auto exact_num = exact_correlation_grid(h, h, grid);
  const auto exact_den = exact_correlation_grid(h, PauliHamiltonian::identity(cfg.n_site), grid);
  const std::size_t N = exact_num.size();

  CorrLearnSummary s;
  s.mean_err_itpl_num.assign(N, 0.0);
  s.mean_err_opt_num.assign(N, 0.0);
  s.mean_err_itpl_den.assign(N, 0.0);
  s.mean_err_opt_den.assign(N, 0.0);
  std::vector<double> n_num, n_den;
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t seed = trial_seed(cfg.seed, trial);
    const CorrelatorFits fits = learn_correlators(cfg, seed);
    const auto in = tt_on_grid(*fits.numerator.tt_itpl, grid), on = tt_on_grid(*fits.numerator.tt_opt, grid);
    const auto id = tt_on_grid(*fits.denominator.tt_itpl, grid), od = tt_on_grid(*fits.denominator.tt_opt, grid);
    for (std::size_t k = 0; k < N; ++k) {
      s.mean_err_itpl_num[k] += std::abs(in[k] - exact_num[k]);
      s.mean_err_opt_num[k] += std::abs(on[k] - exact_num[k]);
      s.mean_err_itpl_den[k] += std::abs(id[k] - exact_den[k]);
      s.mean_err_opt_den[k] += std::abs(od[k] - exact_den[k]);
    }
    n_num.push_back(static_cast<double>(fits.numerator.ledger.size()));
    n_den.push_back(static_cast<double>(fits.denominator.ledger.size()));
    per.push_back({{"seed", seed},
                   {"n_tci_num", fits.numerator.ledger.size()},
                   {"n_tci_den", fits.denominator.ledger.size()},
                   {"tci_error_num", fits.numerator.tci_error},
                   {"tci_error_den", fits.denominator.tci_error},
                   {"final_cost_num", fits.numerator.final_cost},
                   {"final_cost_den", fits.denominator.final_cost}});
  }
  const double nt = static_cast<double>(cfg.trials);
  std::size_t better_num = 0, better_den = 0;
  for (std::size_t k = 0; k < N; ++k) {
    s.mean_err_itpl_num[k] /= nt;
    s.mean_err_opt_num[k] /= nt;
    s.mean_err_itpl_den[k] /= nt;
    s.mean_err_opt_den[k] /= nt;
    better_num += s.mean_err_opt_num[k] < s.mean_err_itpl_num[k];
    better_den += s.mean_err_opt_den[k] < s.mean_err_itpl_den[k];
  }
  s.frac_opt_better_num = static_cast<double>(better_num) / static_cast<double>(N);
  s.frac_opt_better_den = static_cast<double>(better_den) / static_cast<double>(N);
  s.mean_n_tci_num = mean(n_num);
  s.mean_n_tci_den = mean(n_den);

  {
    CsvWriter csv((dir / "abs_err.csv").string(),
                  {"k", "t", "t_prime", "err_itpl_num", "err_opt_num", "err_itpl_den", "err_opt_den"});
    const std::size_t n = grid.points_per_var();
    for (std::size_t k = 0; k < N; k += static_cast<std::size_t>(cfg.downsample)) {
      const std::size_t m[2] = {k / n, k % n};
      const auto x = grid.coords_from_ints(m);
      csv.row(k, x[0], x[1], s.mean_err_itpl_num[k], s.mean_err_opt_num[k], s.mean_err_itpl_den[k],
              s.mean_err_opt_den[k]);
    }
  }
  nlohmann::ordered_json j;
  j["config"] = config_json(cfg, "corr-learn");
  j["mean_abs_err"] = {{"itpl_num", mean(s.mean_err_itpl_num)},
                       {"opt_num", mean(s.mean_err_opt_num)},
                       {"itpl_den", mean(s.mean_err_itpl_den)},
                       {"opt_den", mean(s.mean_err_opt_den)}};
  j["frac_points_opt_better"] = {{"num", s.frac_opt_better_num}, {"den", s.frac_opt_better_den}};
  j["mean_n_tci"] = {{"num", s.mean_n_tci_num}, {"den", s.mean_n_tci_den}};
  j["trials"] = per;
  write_json(dir / "summary.json", j);
  return s;
}

// ---- ground-state energy -----------------------------------------------------

double GsSummary::mean_for(const std::string& method) const {
  for (std::size_t k = 0; k < methods.size(); ++k)
    if (methods[k] == method) return mean_abs_rel_error[k];
  throw std::out_of_range("no results for method " + method);
}

GsSummary run_gs_energy(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.n_site > 8) throw std::invalid_argument("gs-energy: n-site above 8 is too large for the statevector runs");
  const fs::path dir = ensure_dir(fs::path(cfg.out) / "gs_energy");
  const PauliHamiltonian h = build_tfim(cfg.n_site, cfg.lambda);
  const QuanticsGrid grid = time_grid(cfg);
  const KernelParams kp{cfg.beta, cfg.tau, cfg.T};

  GsSummary s;
  s.exact_energy = exact_ground_energy(h);
  const EnergyScan scan{s.exact_energy, cfg.e_halfwidth, cfg.e_steps};
  const bool want_tt = cfg.method != "mc";
  const bool want_mc = cfg.method == "mc" || cfg.method == "all";
  s.methods = cfg.method == "all" ? std::vector<std::string>{"proposed", "qtci", "mc"}
                                  : std::vector<std::string>{cfg.method};

  auto record = [&](const std::string& method, std::uint64_t seed, int trial, const EnergyScanResult& r, long nn,
                    long nd) {
    if (!r.valid) throw std::runtime_error(method + ": every E0 point had a vanishing denominator");
    s.trials.push_back({method, seed, r.estimate, (r.estimate - s.exact_energy) / s.exact_energy, nn, nd});
    write_scan_csv((dir / trial_name("scan_" + method, trial, ".csv")).string(), r);
  };

  std::vector<double> n_num, n_den;
  if (want_tt) {
    const TciResult kernel = learn_kernel_tt(kp, grid, cfg.tci_tol);
    for (int trial = 0; trial < cfg.trials; ++trial) {
      const std::uint64_t seed = trial_seed(cfg.seed, trial);
      const CorrelatorFits fits = learn_correlators(cfg, seed);
      const long nn = static_cast<long>(fits.numerator.ledger.size());
      const long nd = static_cast<long>(fits.denominator.ledger.size());
      n_num.push_back(static_cast<double>(nn));
      n_den.push_back(static_cast<double>(nd));
      if (cfg.method == "all" || cfg.method == "proposed")
        record("proposed", seed, trial,
               energy_scan(*fits.numerator.tt_opt, *fits.denominator.tt_opt, kernel.tt, scan, grid), nn, nd);
      if (cfg.method == "all" || cfg.method == "qtci")
        record("qtci", seed, trial,
               energy_scan(*fits.numerator.tt_itpl, *fits.denominator.tt_itpl, kernel.tt, scan, grid), nn, nd);
    }
    s.mean_n_tci_num = mean(n_num);
    s.mean_n_tci_den = mean(n_den);
  }

  if (want_mc) {
    s.mc_num = cfg.mc_num > 0 ? cfg.mc_num : want_tt ? std::lround(s.mean_n_tci_num) : 767;
    s.mc_den = cfg.mc_den > 0 ? cfg.mc_den : want_tt ? std::lround(s.mean_n_tci_den) : 742;
    const PauliHamiltonian id = PauliHamiltonian::identity(cfg.n_site);
    for (int trial = 0; trial < cfg.trials; ++trial) {
      const std::uint64_t seed = trial_seed(cfg.seed, trial);
      const ShotConfig sn = shot_config(cfg, derive_seed(seed, {0}));
      const ShotConfig sd = shot_config(cfg, derive_seed(seed, {1}));
      const McSamples num = mc_sample([&](double t, double tp) { return correlation(h, h, t, tp, sn); }, kp, s.mc_num,
                                      derive_seed(seed, {2}));
      const McSamples den = mc_sample([&](double t, double tp) { return correlation(h, id, t, tp, sd); }, kp,
                                      s.mc_den, derive_seed(seed, {3}));
      record("mc", seed, trial, mc_energy_scan(num, den, scan), s.mc_num, s.mc_den);
    }
  }

  for (const auto& m : s.methods) {
    double acc = 0;
    int cnt = 0;
    for (const auto& t : s.trials)
      if (t.method == m) {
        acc += std::abs(t.rel_error);
        ++cnt;
      }
    s.mean_abs_rel_error.push_back(cnt ? acc / cnt : 0.0);
  }

  {
    CsvWriter csv((dir / "estimates.csv").string(), {"method", "trial_seed", "estimate", "rel_error", "n_num", "n_den"});
    for (const auto& t : s.trials) csv.row(t.method, t.seed, t.estimate, t.rel_error, t.n_num, t.n_den);
  }
  nlohmann::ordered_json j;
  j["config"] = config_json(cfg, "gs-energy");
  j["exact_energy"] = s.exact_energy;
  nlohmann::ordered_json res;
  for (std::size_t k = 0; k < s.methods.size(); ++k) {
    std::vector<double> est;
    for (const auto& t : s.trials)
      if (t.method == s.methods[k]) est.push_back(t.estimate);
    const double mu = mean(est);
    double var = 0;
    for (double e : est) var += (e - mu) * (e - mu);
    var = est.size() > 1 ? var / static_cast<double>(est.size() - 1) : 0.0;
    res[s.methods[k]] = {{"mean_estimate", mu},
                         {"std_estimate", std::sqrt(var)},
                         {"mean_abs_rel_error", s.mean_abs_rel_error[k]}};
  }
  j["results"] = res;
  j["budgets"] = {{"mean_n_tci_num", s.mean_n_tci_num},
                  {"mean_n_tci_den", s.mean_n_tci_den},
                  {"mc_num", s.mc_num},
                  {"mc_den", s.mc_den}};
  write_json(dir / "summary.json", j);
  return s;
}

// ---- bond dimensions ---------------------------------------------------------

BondDimSummary run_bonddim_scan(const RunConfig& cfg) {
  cfg.validate();
  const fs::path dir = ensure_dir(fs::path(cfg.out) / "bonddim_scan");
  const QuanticsGrid grid = time_grid(cfg);
  const auto dims = grid.local_dims();
  BondDimSummary s;

  for (int n : cfg.sites) {
    const PauliHamiltonian h = build_tfim(n, cfg.lambda);
    const std::pair<std::string, PauliHamiltonian> observables[] = {{"hamiltonian", h},
                                                                   {"identity", PauliHamiltonian::identity(n)}};
    for (const auto& [name, obs] : observables) {
      const auto dense = interleaved_dense(exact_correlation_grid(h, obs, grid), grid);
      for (double tol : {cfg.svd_tol, 1e-2}) {
        const TensorTrain tt = TensorTrain::from_dense(dense, dims, tol, TruncationSpec::kUnlimited);
        s.bonds.push_back({n, name, tol, tt.max_bond()});
      }
    }
  }
  {
    CsvWriter csv((dir / "bond_dims.csv").string(), {"n_site", "observable", "svd_tol", "max_bond"});
    for (const auto& r : s.bonds) csv.row(r.n_site, r.observable, r.tol, r.max_bond);
  }

  // epsilon_TCI against chi~ for the noisy numerator correlator of the configured size.
  const PauliHamiltonian h = build_tfim(cfg.n_site, cfg.lambda);
  const ShotConfig exact_shots{std::nullopt, cfg.trotter_steps, 0};
  for (int chi = 1; chi <= cfg.scan_max_chi; ++chi) {
    TciOptions opts;
    opts.max_bond = chi;
    std::vector<double> eps, eps_exact, counts;
    for (int trial = 0; trial < cfg.trials; ++trial) {
      const std::uint64_t seed = trial_seed(cfg.seed, trial);
      const CorrelatorProblem noisy{h, h, grid, shot_config(cfg, derive_seed(seed, {0}))};
      const TciResult r = cross_interpolate(noisy.evaluator(), dims, opts);
      eps.push_back(r.error_estimate);
      counts.push_back(static_cast<double>(r.ledger.size()));
    }
    const CorrelatorProblem clean{h, h, grid, exact_shots};
    eps_exact.push_back(cross_interpolate(clean.evaluator(), dims, opts).error_estimate);
    s.scan.push_back({chi, mean(eps), mean(eps_exact), mean(counts)});
  }
  {
    CsvWriter csv((dir / "tci_error_scan.csv").string(), {"chi_tilde", "mean_tci_error", "tci_error_noise_free", "mean_n_tci"});
    for (const auto& r : s.scan) csv.row(r.chi_tilde, r.mean_tci_error, r.mean_tci_error_exact, r.mean_n_tci);
  }
  nlohmann::ordered_json j;
  j["config"] = config_json(cfg, "bonddim-scan");
  nlohmann::ordered_json b = nlohmann::ordered_json::array();
  for (const auto& r : s.bonds) b.push_back({{"n_site", r.n_site}, {"observable", r.observable}, {"svd_tol", r.tol}, {"max_bond", r.max_bond}});
  j["bond_dims"] = b;
  nlohmann::ordered_json sc = nlohmann::ordered_json::array();
  for (const auto& r : s.scan)
    sc.push_back({{"chi_tilde", r.chi_tilde}, {"mean_tci_error", r.mean_tci_error},
                  {"tci_error_noise_free", r.mean_tci_error_exact}, {"mean_n_tci", r.mean_n_tci}});
  j["tci_error_scan"] = sc;
  write_json(dir / "summary.json", j);
  return s;
}

}  // namespace qttfit
