// qttfit command-line driver.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "qttfit/experiments.hpp"

namespace {

using qttfit::RunConfig;

void add_common(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--seed", c.seed, "Master seed; trial seeds derive from it");
  cmd->add_option("--trials", c.trials, "Number of independent trials");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--iters", c.iters, "Optimizer iteration cap n_itr");
  cmd->add_option("--R", c.R, "Bits per variable");
  cmd->add_option("--chi-tilde", c.chi_tilde, "Bond cap of the interpolation step");
  cmd->add_option("--chi", c.chi, "Bond cap after compression");
}

void add_physics(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--lambda", c.lambda, "Transverse field");
  cmd->add_option("--n-site", c.n_site, "Number of spins");
  cmd->add_option("--beta", c.beta, "Imaginary time");
  cmd->add_option("--tau", c.tau, "Gaussian width of the kernel");
  cmd->add_option("--T", c.T, "Integration half-range");
  cmd->add_option("--tci-tol", c.tci_tol, "Kernel interpolation tolerance");
  cmd->add_option("--trotter-steps", c.trotter_steps, "Trotter steps N_t");
  cmd->add_option("--shots", c.shots, "Shots M_s per Pauli term and part (0 = exact)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noisy-function fitting of quantics tensor trains and ground-state energy experiments"};
  app.set_config("--config", "", "key=value file; flags on the command line take precedence");
  app.require_subcommand(1);

  RunConfig cfg;

  auto* sine = app.add_subcommand("sine-demo", "Fit sin(2 pi x) under multiplicative Gaussian noise");
  add_common(sine, cfg);
  sine->add_option("--sigma", cfg.sigma, "Noise standard deviation");

  auto* corr = app.add_subcommand("corr-learn", "Learn two-time correlators against the quantum simulator");
  add_common(corr, cfg);
  add_physics(corr, cfg);
  corr->add_option("--downsample", cfg.downsample, "Keep every k-th point of the flattened error series");

  auto* gs = app.add_subcommand("gs-energy", "Ground-state energy by the E0 scan");
  add_common(gs, cfg);
  add_physics(gs, cfg);
  gs->add_option("--e-halfwidth", cfg.e_halfwidth, "Half-width E of the E0 scan");
  gs->add_option("--e-steps", cfg.e_steps, "Number of E0 steps N_E0");
  gs->add_option("--method", cfg.method, "proposed | qtci | mc | all")
      ->check(CLI::IsMember({"proposed", "qtci", "mc", "all"}));
  gs->add_option("--mc-num", cfg.mc_num, "Monte Carlo samples for the numerator (0 = matched)");
  gs->add_option("--mc-den", cfg.mc_den, "Monte Carlo samples for the denominator (0 = matched)");

  auto* bond = app.add_subcommand("bonddim-scan", "Bond dimensions of exact correlators and the TCI error scan");
  add_common(bond, cfg);
  add_physics(bond, cfg);
  bond->add_option("--sites", cfg.sites, "System sizes for the exact compression");
  bond->add_option("--svd-tol", cfg.svd_tol, "SVD tolerance");
  bond->add_option("--scan-max-chi", cfg.scan_max_chi, "Largest chi~ of the TCI error scan");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sine) {
      const auto s = qttfit::run_sine_demo(cfg);
      std::printf("mean eps_TCI %.4g | mean abs err itpl %.4g init %.4g opt %.4g opt(no compression) %.4g\n",
                  s.mean_tci_error, s.mean_err_itpl, s.mean_err_init, s.mean_err_opt, s.mean_err_opt_nocompress);
    } else if (*corr) {
      const auto s = qttfit::run_corr_learn(cfg);
      std::printf("points where opt beats itpl: numerator %.3f denominator %.3f\n", s.frac_opt_better_num,
                  s.frac_opt_better_den);
    } else if (*gs) {
      const auto s = qttfit::run_gs_energy(cfg);
      std::printf("exact E_g %.8f\n", s.exact_energy);
      for (std::size_t k = 0; k < s.methods.size(); ++k)
        std::printf("%-9s mean |rel err| %.4g\n", s.methods[k].c_str(), s.mean_abs_rel_error[k]);
    } else if (*bond) {
      const auto s = qttfit::run_bonddim_scan(cfg);
      for (const auto& r : s.bonds)
        std::printf("n_site %d %-11s tol %.0e max bond %d\n", r.n_site, r.observable.c_str(), r.tol, r.max_bond);
      for (const auto& r : s.scan)
        std::printf("chi~ %2d eps_TCI %.4g (noise-free %.3g)\n", r.chi_tilde, r.mean_tci_error, r.mean_tci_error_exact);
    }
  } catch (const std::exception& e) {
    std::cerr << "qttfit: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
