#include "qttfit/fit.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

#include "qttfit/rng.hpp"

namespace qttfit {

void FitPlan::validate() const {
  if (chi < 1) throw std::invalid_argument("FitPlan: chi must be >= 1");
  if (chi_tilde < 1) throw std::invalid_argument("FitPlan: chi_tilde must be >= 1");
  if (compress && chi > chi_tilde) throw std::invalid_argument("FitPlan: chi must not exceed chi_tilde");
  if (n_itr < 1) throw std::invalid_argument("FitPlan: n_itr must be >= 1");
}

ParameterVector to_parameters(const TensorTrain& tt) {
  ParameterVector theta;
  theta.reserve(2 * tt.parameter_count());
  for (const auto& c : tt.cores())
    for (auto v : c.data()) {
      theta.push_back(v.real());
      theta.push_back(v.imag());
    }
  return theta;
}

TensorTrain from_parameters(std::span<const double> theta, const TensorTrain& shape) {
  if (theta.size() != 2 * shape.parameter_count())
    throw std::invalid_argument("from_parameters: parameter count does not match shape");
  std::vector<Core3> cores;
  std::size_t k = 0;
  for (const auto& c : shape.cores()) {
    std::vector<cplx> data(c.size());
    for (auto& v : data) {
      v = {theta[k], theta[k + 1]};
      k += 2;
    }
    cores.emplace_back(c.left(), c.dim(), c.right(), std::move(data));
  }
  return TensorTrain(std::move(cores));
}

namespace {

struct CoreShape {
  int left, dim, right;
  std::size_t offset;  // complex offset into the flat parameter block
};

// Cost and gradient of sum_i |z_i - tt(s_i)|^2 with the cores read straight
// from a flat parameter block.
class LedgerObjective {
 public:
  LedgerObjective(const TensorTrain& shape, const MeasurementLedger& ledger) : ledger_(ledger) {
    if (ledger.empty()) throw std::domain_error("cost: empty ledger");
    std::size_t off = 0;
    for (const auto& c : shape.cores()) {
      shapes_.push_back({c.left(), c.dim(), c.right(), off});
      off += c.size();
    }
    n_complex_ = off;
    for (const auto& e : ledger.entries())
      if (e.index.size() != shapes_.size())
        throw std::domain_error("cost: ledger index arity does not match the train length");
    left_.resize(shapes_.size() + 1);
    right_.resize(shapes_.size() + 1);
  }

  std::size_t n_complex() const noexcept { return n_complex_; }

  double operator()(const cplx* params, cplx* grad) {
    const std::size_t L = shapes_.size();
    if (grad) std::fill(grad, grad + n_complex_, cplx{0.0, 0.0});
    double total = 0.0;
    for (const auto& e : ledger_.entries()) {
      const auto& idx = e.index;
      left_[0].assign(1, cplx{1.0, 0.0});
      for (std::size_t l = 0; l < L; ++l) {
        const auto& sh = shapes_[l];
        const int s = idx[l];
        if (s < 0 || s >= sh.dim) throw std::domain_error("cost: ledger index out of range");
        auto& out = left_[l + 1];
        out.assign(static_cast<std::size_t>(sh.right), cplx{0.0, 0.0});
        for (int a = 0; a < sh.left; ++a) {
          const cplx va = left_[l][static_cast<std::size_t>(a)];
          const cplx* row = params + sh.offset + (static_cast<std::size_t>(a) * sh.dim + s) * sh.right;
          for (int b = 0; b < sh.right; ++b) out[static_cast<std::size_t>(b)] += va * row[b];
        }
      }
      const cplx r = left_[L][0] - e.value;
      total += std::norm(r);
      if (!grad) continue;
      right_[L].assign(1, cplx{1.0, 0.0});
      for (std::size_t l = L; l-- > 0;) {
        const auto& sh = shapes_[l];
        const int s = idx[l];
        auto& out = right_[l];
        out.assign(static_cast<std::size_t>(sh.left), cplx{0.0, 0.0});
        for (int a = 0; a < sh.left; ++a) {
          const cplx* row = params + sh.offset + (static_cast<std::size_t>(a) * sh.dim + s) * sh.right;
          cplx acc{0.0, 0.0};
          for (int b = 0; b < sh.right; ++b) acc += row[b] * right_[l + 1][static_cast<std::size_t>(b)];
          out[static_cast<std::size_t>(a)] = acc;
        }
      }
      // d|r|^2/d(re) + i d|r|^2/d(im) = 2 r conj(dr/dA).
      const cplx two_r = 2.0 * r;
      for (std::size_t l = 0; l < L; ++l) {
        const auto& sh = shapes_[l];
        const int s = idx[l];
        for (int a = 0; a < sh.left; ++a) {
          const cplx la = two_r * std::conj(left_[l][static_cast<std::size_t>(a)]);
          cplx* row = grad + sh.offset + (static_cast<std::size_t>(a) * sh.dim + s) * sh.right;
          for (int b = 0; b < sh.right; ++b) row[b] += la * std::conj(right_[l + 1][static_cast<std::size_t>(b)]);
        }
      }
    }
    return total;
  }

 private:
  const MeasurementLedger& ledger_;
  std::vector<CoreShape> shapes_;
  std::size_t n_complex_ = 0;
  std::vector<std::vector<cplx>> left_, right_;
};

const cplx* as_complex(const double* p) { return reinterpret_cast<const cplx*>(p); }
cplx* as_complex(double* p) { return reinterpret_cast<cplx*>(p); }

}  // namespace

double cost(const TensorTrain& tt, const MeasurementLedger& ledger) {
  LedgerObjective obj(tt, ledger);
  const ParameterVector theta = to_parameters(tt);
  return obj(as_complex(theta.data()), nullptr);
}

ParameterVector gradient(const TensorTrain& tt, const MeasurementLedger& ledger) {
  LedgerObjective obj(tt, ledger);
  const ParameterVector theta = to_parameters(tt);
  ParameterVector g(theta.size());
  obj(as_complex(theta.data()), as_complex(g.data()));
  return g;
}

OptimizeResult optimize(const TensorTrain& tt_init, const MeasurementLedger& ledger, const FitPlan& plan) {
  if (plan.n_itr < 1) throw std::invalid_argument("optimize: n_itr must be >= 1");
  LedgerObjective obj(tt_init, ledger);
  const ParameterVector theta0 = to_parameters(tt_init);
  Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(theta0.data(), static_cast<Eigen::Index>(theta0.size()));

  Objective f = [&obj](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.resize(x.size());
    return obj(as_complex(x.data()), as_complex(g.data()));
  };
  LbfgsOptions opts;
  opts.max_iterations = plan.n_itr;
  opts.rel_decrease_tol = plan.convergence_tol;
  LbfgsResult r = minimize_lbfgs(f, std::move(x0), opts);

  OptimizeResult out{from_parameters(std::span<const double>(r.x.data(), static_cast<std::size_t>(r.x.size())), tt_init),
                     std::move(r.trace), r.iterations, r.line_search_failed, r.converged};
  return out;
}

Evaluator noisy_evaluator(const QuanticsGrid& grid, NoisyFunction f, std::uint64_t seed) {
  return [grid, f = std::move(f), seed](std::span<const int> idx) {
    const auto m = grid.ints_from_index(idx);
    std::uint64_t key = 0;
    for (auto v : m) key = splitmix64(key ^ static_cast<std::uint64_t>(v));
    const auto x = grid.coords_from_ints(m);
    return f(x, derive_seed(seed, {key}));
  };
}

FitReport fit_pipeline(const Evaluator& f, std::span<const int> dims, const FitPlan& plan) {
  plan.validate();
  FitReport report;
  TciOptions topts;
  topts.max_bond = plan.chi_tilde;
  topts.tolerance = plan.tci_tolerance;
  topts.max_sweeps = plan.tci_max_sweeps;
  topts.pivot_seed = plan.pivot_seed;
  try {
    TciResult tci = cross_interpolate(f, dims, topts);
    report.ledger = std::move(tci.ledger);
    report.tci_error = tci.error_estimate;
    report.tci_sweeps = tci.sweeps;
    report.tt_itpl = std::move(tci.tt);
  } catch (const TciError& e) {
    report.ledger = e.ledger;
    report.failure = std::string("interpolation: ") + e.what();
    return report;
  }
  report.cost_itpl = cost(*report.tt_itpl, report.ledger);

  report.tt_init = plan.compress ? svd_truncate(*report.tt_itpl, TruncationSpec::bond(plan.chi)) : *report.tt_itpl;
  report.cost_init = cost(*report.tt_init, report.ledger);

  try {
    OptimizeResult opt = optimize(*report.tt_init, report.ledger, plan);
    report.cost_trace = std::move(opt.cost_trace);
    report.iterations = opt.iterations;
    report.line_search_failed = opt.line_search_failed;
    report.tt_opt = std::move(opt.tt);
    report.final_cost = cost(*report.tt_opt, report.ledger);
  } catch (const std::exception& e) {
    report.failure = std::string("optimization: ") + e.what();
  }
  return report;
}

FitReport fit_pipeline(const NoisyFunction& f, const QuanticsGrid& grid, const FitPlan& plan, std::uint64_t rng_seed) {
  const auto dims = grid.local_dims();
  FitReport r = fit_pipeline(noisy_evaluator(grid, f, rng_seed), dims, plan);
  r.seed = rng_seed;
  return r;
}

std::string fit_report_json(const FitReport& report) {
  nlohmann::ordered_json j;
  j["seed"] = report.seed;
  j["n_tci"] = report.ledger.size();
  j["tci_error"] = report.tci_error;
  j["tci_sweeps"] = report.tci_sweeps;
  if (report.tt_itpl) j["bond_dims_itpl"] = report.tt_itpl->bond_dims();
  if (report.tt_init) j["bond_dims_init"] = report.tt_init->bond_dims();
  if (report.tt_opt) j["bond_dims_opt"] = report.tt_opt->bond_dims();
  j["cost_itpl"] = report.cost_itpl;
  j["cost_init"] = report.cost_init;
  j["final_cost"] = report.final_cost;
  j["iterations"] = report.iterations;
  j["line_search_failed"] = report.line_search_failed;
  j["cost_trace"] = report.cost_trace;
  if (!report.failure.empty()) j["failure"] = report.failure;
  return j.dump(2);
}

}  // namespace qttfit
