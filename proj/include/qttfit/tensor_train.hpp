#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "qttfit/common.hpp"

namespace qttfit {

using MatrixC = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic>;
using RowMatrixC = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorC = Eigen::Matrix<cplx, Eigen::Dynamic, 1>;

/// Order-3 core of shape (left x dim x right), stored row-major.
class Core3 {
 public:
  Core3() = default;
  Core3(int left, int dim, int right);
  Core3(int left, int dim, int right, std::vector<cplx> data);

  int left() const noexcept { return left_; }
  int dim() const noexcept { return dim_; }
  int right() const noexcept { return right_; }
  std::size_t size() const noexcept { return data_.size(); }

  cplx& operator()(int a, int s, int b) noexcept { return data_[(static_cast<std::size_t>(a) * dim_ + s) * right_ + b]; }
  cplx operator()(int a, int s, int b) const noexcept { return data_[(static_cast<std::size_t>(a) * dim_ + s) * right_ + b]; }

  std::span<const cplx> data() const noexcept { return data_; }
  std::span<cplx> data() noexcept { return data_; }

  /// Slice for one local index as a (left x right) matrix.
  MatrixC slice(int s) const;
  /// (left*dim) x right unfolding.
  RowMatrixC left_unfolding() const;
  /// left x (dim*right) unfolding.
  RowMatrixC right_unfolding() const;

  static Core3 from_left_unfolding(const RowMatrixC& m, int left, int dim);
  static Core3 from_right_unfolding(const RowMatrixC& m, int dim, int right);

 private:
  int left_ = 0;
  int dim_ = 0;
  int right_ = 0;
  std::vector<cplx> data_;
};

/// Chain of order-3 cores with matching bonds and unit boundary bonds.
class TensorTrain {
 public:
  TensorTrain() = default;
  explicit TensorTrain(std::vector<Core3> cores);

  /// Every entry equals `value`; bond dimension 1.
  static TensorTrain constant(std::span<const int> dims, cplx value);
  /// Rank-1 train from per-site factor vectors: value(s) = prod_l factors[l][s_l].
  static TensorTrain product(const std::vector<std::vector<cplx>>& factors);
  /// Exact (or tolerance-truncated) decomposition of a dense row-major tensor.
  static TensorTrain from_dense(std::span<const cplx> dense, std::span<const int> dims,
                                double tolerance = 0.0,
                                int max_bond = std::numeric_limits<int>::max());

  std::size_t length() const noexcept { return cores_.size(); }
  const std::vector<Core3>& cores() const noexcept { return cores_; }
  const Core3& core(std::size_t l) const { return cores_.at(l); }

  std::vector<int> local_dims() const;
  /// Internal bonds chi_1..chi_{L-1}.
  std::vector<int> bond_dims() const;
  int max_bond() const;
  std::size_t parameter_count() const;

  cplx operator()(std::span<const int> index) const;

  /// Full tensor in row-major order (first site slowest). Only for small trains.
  std::vector<cplx> to_dense() const;

  double norm() const;

 private:
  std::vector<Core3> cores_;
};

/// Truncation for svd_truncate. max_bond bounds each bond; tolerance bounds the
/// relative squared Frobenius error |A - A'|^2_F / |A|^2_F.
struct TruncationSpec {
  static constexpr int kUnlimited = std::numeric_limits<int>::max();

  int max_bond = kUnlimited;
  double tolerance = 0.0;

  static TruncationSpec none() { return {}; }
  static TruncationSpec bond(int chi) { return {chi, 0.0}; }
  static TruncationSpec relative(double tol, int chi = kUnlimited) { return {chi, tol}; }

  bool is_exact() const noexcept { return max_bond == kUnlimited && tolerance == 0.0; }
  void validate() const;
};

cplx evaluate(const TensorTrain& tt, std::span<const int> index);

/// Left-canonical SVD recompression. Bonds are capped at spec.max_bond and the
/// discarded singular-value energy stays within spec.tolerance * |tt|^2_F
/// (split evenly over the bonds). All cores but the last are left-orthonormal.
TensorTrain svd_truncate(const TensorTrain& tt, const TruncationSpec& spec);

/// Element-wise (Hadamard) product through a diagonal MPO built from `a`.
/// Bonds of the raw product are chi_a * chi_b; the result is recompressed with
/// `spec` unless spec is exact.
TensorTrain elementwise_multiply(const TensorTrain& a, const TensorTrain& b,
                                 const TruncationSpec& spec = TruncationSpec::none());

/// cell_volume * sum over all entries, by contraction with all-ones vectors.
cplx integrate(const TensorTrain& tt, double cell_volume);

/// max |tt(s)| over the sample set.
double max_abs_sampled(const TensorTrain& tt, std::span<const MultiIndex> samples);

/// Scale the first core by `factor`.
TensorTrain scaled(const TensorTrain& tt, cplx factor);

// Serialization. Layout (all little-endian):
//   8 bytes  magic "QTTCORE1"
//   u64      L
//   L x (u64 left, u64 dim, u64 right)
//   per core, row-major (left, dim, right): f64 re, f64 im
void write_tensor_train(std::ostream& out, const TensorTrain& tt);
TensorTrain read_tensor_train(std::istream& in);
void save_tensor_train(const std::string& path, const TensorTrain& tt);
TensorTrain load_tensor_train(const std::string& path);

}  // namespace qttfit
