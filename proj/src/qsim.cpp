#include "qttfit/qsim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "qttfit/rng.hpp"

namespace qttfit {

namespace {

void check_pauli_string(const std::string& ops, int n) {
  if (static_cast<int>(ops.size()) != n)
    throw std::domain_error("Pauli string '" + ops + "' does not act on " + std::to_string(n) + " sites");
  for (char c : ops)
    if (c != 'I' && c != 'X' && c != 'Y' && c != 'Z')
      throw std::domain_error("Pauli string '" + ops + "' is not a product of I/X/Y/Z");
}

struct PauliMasks {
  std::uint64_t x = 0;  // bit flips (X or Y)
  std::uint64_t z = 0;  // sign flips (Z or Y)
  int n_y = 0;
};

PauliMasks masks_of(const std::string& ops, int first_qubit) {
  PauliMasks m;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const std::uint64_t bit = std::uint64_t{1} << (first_qubit + static_cast<int>(i));
    switch (ops[i]) {
      case 'X': m.x |= bit; break;
      case 'Y': m.x |= bit; m.z |= bit; ++m.n_y; break;
      case 'Z': m.z |= bit; break;
      default: break;
    }
  }
  return m;
}

// P|b> = phase(b) |b ^ x>, phase(b) = i^{n_y} (-1)^{popcount(b & z)}.
cplx pauli_phase(const PauliMasks& m, std::uint64_t b) {
  static constexpr cplx kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const cplx base = kIPow[m.n_y % 4];
  return (std::popcount(b & m.z) & 1) ? -base : base;
}

bool is_diagonal(const std::string& ops) {
  return std::all_of(ops.begin(), ops.end(), [](char c) { return c == 'I' || c == 'Z'; });
}

}  // namespace

PauliHamiltonian::PauliHamiltonian(int n_sites, std::vector<PauliTerm> terms)
    : n_sites_(n_sites), terms_(std::move(terms)) {
  if (n_sites < 1) throw std::domain_error("PauliHamiltonian: need at least one site");
  for (const auto& t : terms_) {
    check_pauli_string(t.ops, n_sites);
    if (!std::isfinite(t.coeff)) throw std::domain_error("PauliHamiltonian: non-finite coefficient");
  }
}

PauliHamiltonian PauliHamiltonian::identity(int n_sites) {
  return PauliHamiltonian(n_sites, {{1.0, std::string(static_cast<std::size_t>(n_sites), 'I')}});
}

MatrixC PauliHamiltonian::dense() const {
  if (n_sites_ > kMaxDenseSites) throw std::domain_error("PauliHamiltonian::dense: too many sites");
  const std::size_t dim = std::size_t{1} << n_sites_;
  MatrixC m = MatrixC::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (const auto& t : terms_) {
    const PauliMasks pm = masks_of(t.ops, 0);
    for (std::uint64_t b = 0; b < dim; ++b)
      m(static_cast<Eigen::Index>(b ^ pm.x), static_cast<Eigen::Index>(b)) += t.coeff * pauli_phase(pm, b);
  }
  return m;
}

PauliHamiltonian build_tfim(int n_site, double lambda) {
  if (n_site < 2) throw std::domain_error("build_tfim: n_site must be >= 2");
  std::vector<PauliTerm> terms;
  const double j = 2.0 - lambda;
  if (j != 0.0)
    for (int i = 0; i + 1 < n_site; ++i) {
      std::string s(static_cast<std::size_t>(n_site), 'I');
      s[static_cast<std::size_t>(i)] = s[static_cast<std::size_t>(i) + 1] = 'Z';
      terms.push_back({-j, s});
    }
  if (lambda != 0.0)
    for (int i = 0; i < n_site; ++i) {
      std::string s(static_cast<std::size_t>(n_site), 'I');
      s[static_cast<std::size_t>(i)] = 'X';
      terms.push_back({-lambda, s});
    }
  return PauliHamiltonian(n_site, std::move(terms));
}

double exact_ground_energy(const PauliHamiltonian& h) {
  if (h.n_sites() > kMaxDenseSites) throw std::domain_error("exact_ground_energy: too many sites for dense diagonalization");
  Eigen::SelfAdjointEigenSolver<MatrixC> es(h.dense(), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

StateVector::StateVector(int n_qubits) : n_qubits_(n_qubits) {
  if (n_qubits < 1 || n_qubits > 24) throw std::domain_error("StateVector: unsupported qubit count");
  amps_.assign(std::size_t{1} << n_qubits, cplx{0.0, 0.0});
  amps_[0] = 1.0;
}

void StateVector::apply_h(int q) {
  const std::size_t bit = std::size_t{1} << q;
  const double r = 1.0 / std::sqrt(2.0);
  for (std::size_t b = 0; b < amps_.size(); ++b) {
    if (b & bit) continue;
    const cplx a0 = amps_[b], a1 = amps_[b | bit];
    amps_[b] = r * (a0 + a1);
    amps_[b | bit] = r * (a0 - a1);
  }
}

void StateVector::apply_x(int q) {
  const std::size_t bit = std::size_t{1} << q;
  for (std::size_t b = 0; b < amps_.size(); ++b)
    if (!(b & bit)) std::swap(amps_[b], amps_[b | bit]);
}

void StateVector::apply_s_dag(int q) {
  const std::size_t bit = std::size_t{1} << q;
  for (std::size_t b = 0; b < amps_.size(); ++b)
    if (b & bit) amps_[b] *= cplx{0.0, -1.0};
}

void StateVector::apply_pauli(const std::string& ops, int first_qubit, int control) {
  if (first_qubit + static_cast<int>(ops.size()) > n_qubits_) throw std::domain_error("apply_pauli: register overflow");
  const PauliMasks m = masks_of(ops, first_qubit);
  const std::uint64_t cbit = control >= 0 ? std::uint64_t{1} << control : 0;
  std::vector<cplx> out = amps_;
  for (std::uint64_t b = 0; b < amps_.size(); ++b) {
    if (cbit && !(b & cbit)) continue;
    out[b ^ m.x] = pauli_phase(m, b) * amps_[b];
  }
  amps_.swap(out);
}

void StateVector::apply_pauli_rotation(const std::string& ops, double theta, int first_qubit, int control) {
  if (first_qubit + static_cast<int>(ops.size()) > n_qubits_) throw std::domain_error("apply_pauli_rotation: register overflow");
  const PauliMasks m = masks_of(ops, first_qubit);
  const std::uint64_t cbit = control >= 0 ? std::uint64_t{1} << control : 0;
  const double c = std::cos(theta), s = std::sin(theta);
  const cplx mis{0.0, -s};
  for (std::uint64_t b = 0; b < amps_.size(); ++b) {
    if (cbit && !(b & cbit)) continue;
    if (m.x == 0) {
      amps_[b] *= c + mis * pauli_phase(m, b);
      continue;
    }
    const std::uint64_t o = b ^ m.x;
    if (o < b) continue;
    const cplx ab = amps_[b], ao = amps_[o];
    // (P psi)_b = phase(o) psi_o, (P psi)_o = phase(b) psi_b
    amps_[b] = c * ab + mis * pauli_phase(m, o) * ao;
    amps_[o] = c * ao + mis * pauli_phase(m, b) * ab;
  }
}

double StateVector::prob_zero(int q) const {
  const std::size_t bit = std::size_t{1} << q;
  double p = 0.0;
  for (std::size_t b = 0; b < amps_.size(); ++b)
    if (!(b & bit)) p += std::norm(amps_[b]);
  return p;
}

double StateVector::norm() const {
  double n = 0.0;
  for (auto a : amps_) n += std::norm(a);
  return std::sqrt(n);
}

std::vector<PauliRotation> trotter_step_sequence(const PauliHamiltonian& h, double t, int n_steps) {
  if (n_steps < 1) throw std::domain_error("trotter_step_sequence: N_t must be >= 1");
  std::vector<PauliTerm> ordered;
  for (const auto& term : h.terms())
    if (is_diagonal(term.ops)) ordered.push_back(term);
  for (const auto& term : h.terms())
    if (!is_diagonal(term.ops)) ordered.push_back(term);
  std::vector<PauliRotation> seq;
  if (t == 0.0) return seq;
  const double dt = t / n_steps;
  seq.reserve(ordered.size() * static_cast<std::size_t>(n_steps));
  for (int k = 0; k < n_steps; ++k)
    for (const auto& term : ordered)
      seq.push_back({term.ops, term.coeff * dt, false});
  return seq;
}

std::vector<PauliRotation> controlled(std::vector<PauliRotation> gates) {
  for (auto& g : gates) g.controlled = true;
  return gates;
}

void apply_sequence(StateVector& psi, const std::vector<PauliRotation>& gates, int first_qubit, int control) {
  for (const auto& g : gates) psi.apply_pauli_rotation(g.ops, g.theta, first_qubit, g.controlled ? control : -1);
}

namespace {

// Register state just before the controlled-O gate:
// (|0> V(t')|Psi> + |1> V(t)|Psi>) / sqrt(2).
StateVector prepare_pre_observable(const PauliHamiltonian& h, double t, double t_prime, int trotter_steps) {
  const int n = h.n_sites();
  StateVector psi(n + 1);
  psi.apply_h(0);
  for (int q = 1; q <= n; ++q) psi.apply_h(q);
  apply_sequence(psi, controlled(trotter_step_sequence(h, t, trotter_steps)), 1, 0);
  psi.apply_x(0);
  apply_sequence(psi, controlled(trotter_step_sequence(h, t_prime, trotter_steps)), 1, 0);
  psi.apply_x(0);
  return psi;
}

double measure(StateVector psi, Part part, const ShotConfig& cfg, double t, double t_prime, std::uint64_t key) {
  if (part == Part::Im) psi.apply_s_dag(0);
  psi.apply_h(0);
  const double p0 = std::clamp(psi.prob_zero(0), 0.0, 1.0);
  if (!cfg.shots) return 2.0 * p0 - 1.0;
  if (*cfg.shots < 1) throw std::domain_error("ShotConfig: shots must be >= 1");
  std::mt19937_64 rng(derive_seed(cfg.seed, {bits_of(t), bits_of(t_prime), key, part == Part::Re ? 0u : 1u}));
  std::binomial_distribution<long> dist(*cfg.shots, p0);
  return 2.0 * static_cast<double>(dist(rng)) / static_cast<double>(*cfg.shots) - 1.0;
}

}  // namespace

double hadamard_test(const PauliHamiltonian& h, const std::string& O, double t, double t_prime, Part part,
                     const ShotConfig& cfg, std::uint64_t stream_key) {
  check_pauli_string(O, h.n_sites());
  if (!std::isfinite(t) || !std::isfinite(t_prime)) throw std::domain_error("hadamard_test: non-finite time");
  StateVector psi = prepare_pre_observable(h, t, t_prime, cfg.trotter_steps);
  psi.apply_pauli(O, 1, 0);
  return measure(std::move(psi), part, cfg, t, t_prime, stream_key);
}

cplx correlation(const PauliHamiltonian& h, const PauliHamiltonian& observable, double t, double t_prime,
                 const ShotConfig& cfg) {
  if (observable.n_sites() != h.n_sites()) throw std::domain_error("correlation: observable size mismatch");
  if (!std::isfinite(t) || !std::isfinite(t_prime)) throw std::domain_error("correlation: non-finite time");
  const StateVector pre = prepare_pre_observable(h, t, t_prime, cfg.trotter_steps);
  cplx total{0.0, 0.0};
  for (std::size_t k = 0; k < observable.terms().size(); ++k) {
    const auto& term = observable.terms()[k];
    StateVector psi = pre;
    psi.apply_pauli(term.ops, 1, 0);
    const double a = measure(psi, Part::Re, cfg, t, t_prime, k);
    const double b = measure(psi, Part::Im, cfg, t, t_prime, k);
    total += term.coeff * cplx{a, b};
  }
  return total;
}

ExactEvolver::ExactEvolver(const PauliHamiltonian& h) {
  if (h.n_sites() > kMaxDenseSites) throw std::domain_error("ExactEvolver: too many sites for dense evolution");
  Eigen::SelfAdjointEigenSolver<MatrixC> es(h.dense());
  evals_ = es.eigenvalues();
  evecs_ = es.eigenvectors();
  const Eigen::Index dim = evecs_.rows();
  psi0_ = VectorC::Constant(dim, cplx{1.0 / std::sqrt(static_cast<double>(dim)), 0.0});
  coeffs_ = evecs_.adjoint() * psi0_;
}

VectorC ExactEvolver::evolve(double t) const {
  VectorC c = coeffs_;
  for (Eigen::Index k = 0; k < c.size(); ++k) c(k) *= std::exp(cplx{0.0, -evals_(k) * t});
  return evecs_ * c;
}

cplx ExactEvolver::correlation(const MatrixC& observable, double t, double t_prime) const {
  return evolve(t_prime).dot(observable * evolve(t));
}

cplx exact_correlation(const PauliHamiltonian& h, const PauliHamiltonian& observable, double t, double t_prime) {
  if (observable.n_sites() != h.n_sites()) throw std::domain_error("exact_correlation: observable size mismatch");
  return ExactEvolver(h).correlation(observable.dense(), t, t_prime);
}

}  // namespace qttfit
