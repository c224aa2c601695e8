#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "qttfit/common.hpp"
#include "qttfit/tensor_train.hpp"

namespace qttfit {

/// Largest system handled by the dense routines.
inline constexpr int kMaxDenseSites = 12;

/// coeff * P with P a Pauli string; letter i acts on site i.
struct PauliTerm {
  double coeff;
  std::string ops;
};

class PauliHamiltonian {
 public:
  PauliHamiltonian(int n_sites, std::vector<PauliTerm> terms);
  static PauliHamiltonian identity(int n_sites);

  int n_sites() const noexcept { return n_sites_; }
  const std::vector<PauliTerm>& terms() const noexcept { return terms_; }
  /// 2^n x 2^n matrix; basis bit i is site i.
  MatrixC dense() const;

 private:
  int n_sites_;
  std::vector<PauliTerm> terms_;
};

/// -(2 - lambda) sum_i Z_i Z_{i+1} - lambda sum_i X_i on an open chain.
PauliHamiltonian build_tfim(int n_site, double lambda);

double exact_ground_energy(const PauliHamiltonian& h);

/// Dense statevector; basis bit q is qubit q. Qubit 0 is the ancilla in the
/// Hadamard-test circuits.
class StateVector {
 public:
  explicit StateVector(int n_qubits);

  int n_qubits() const noexcept { return n_qubits_; }
  const std::vector<cplx>& amplitudes() const noexcept { return amps_; }
  std::vector<cplx>& amplitudes() noexcept { return amps_; }

  void apply_h(int q);
  void apply_x(int q);
  void apply_s_dag(int q);
  /// Pauli string on qubits first_qubit.., optionally controlled on `control`.
  void apply_pauli(const std::string& ops, int first_qubit, int control = -1);
  /// exp(-i theta P), optionally controlled.
  void apply_pauli_rotation(const std::string& ops, double theta, int first_qubit, int control = -1);

  double prob_zero(int q) const;
  double norm() const;

 private:
  int n_qubits_;
  std::vector<cplx> amps_;
};

/// exp(-i theta P); `controlled` gates act only where the ancilla is |1>.
struct PauliRotation {
  std::string ops;
  double theta;
  bool controlled = false;
};

/// First-order Trotterization of exp(-i H t): N_t repetitions of the
/// diagonal (Z-type) terms followed by the remaining terms, theta = coeff * t / N_t.
std::vector<PauliRotation> trotter_step_sequence(const PauliHamiltonian& h, double t, int n_steps);
std::vector<PauliRotation> controlled(std::vector<PauliRotation> gates);
/// Applies gates to the register starting at first_qubit; controlled gates use `control`.
void apply_sequence(StateVector& psi, const std::vector<PauliRotation>& gates, int first_qubit, int control);

struct ShotConfig {
  std::optional<long> shots;  ///< nullopt = exact probabilities
  int trotter_steps = 100;
  std::uint64_t seed = 0;

  static ShotConfig exact(int trotter_steps = 100) { return {std::nullopt, trotter_steps, 0}; }
};

enum class Part { Re, Im };

/// Hadamard-test estimate of Re or Im <Psi|V(t')^dag O V(t)|Psi> with
/// |Psi> = H^n|0>. Finite shots draw Binomial(M_s, P0) from a stream keyed by
/// (seed, t, t', stream_key, part).
double hadamard_test(const PauliHamiltonian& h, const std::string& O, double t, double t_prime, Part part,
                     const ShotConfig& cfg, std::uint64_t stream_key = 0);

/// sum_k c_k (a_k + i b_k) over the Pauli terms of `observable`, each measured
/// with its own Hadamard test. No E0 phase.
cplx correlation(const PauliHamiltonian& h, const PauliHamiltonian& observable, double t, double t_prime,
                 const ShotConfig& cfg);

/// Dense exact evolution from the uniform superposition, via eigendecomposition.
class ExactEvolver {
 public:
  explicit ExactEvolver(const PauliHamiltonian& h);

  VectorC evolve(double t) const;  ///< exp(-i H t)|Psi>
  cplx correlation(const MatrixC& observable, double t, double t_prime) const;
  const Eigen::VectorXd& eigenvalues() const noexcept { return evals_; }
  const MatrixC& eigenvectors() const noexcept { return evecs_; }
  const VectorC& initial_state() const noexcept { return psi0_; }

 private:
  Eigen::VectorXd evals_;
  MatrixC evecs_;
  VectorC psi0_;
  VectorC coeffs_;  // evecs^dag psi0
};

/// <Psi|exp(iHt') O exp(-iHt)|Psi> with no Trotter error and no shots.
cplx exact_correlation(const PauliHamiltonian& h, const PauliHamiltonian& observable, double t, double t_prime);

}  // namespace qttfit
