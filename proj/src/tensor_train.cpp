#include "qttfit/tensor_train.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <Eigen/QR>
#include <Eigen/SVD>

namespace qttfit {

Core3::Core3(int left, int dim, int right)
    : Core3(left, dim, right,
            std::vector<cplx>(static_cast<std::size_t>(left) * dim * right, cplx{0.0, 0.0})) {}

Core3::Core3(int left, int dim, int right, std::vector<cplx> data)
    : left_(left), dim_(dim), right_(right), data_(std::move(data)) {
  if (left < 1 || dim < 1 || right < 1)
    throw std::invalid_argument("Core3: all extents must be >= 1");
  if (data_.size() != static_cast<std::size_t>(left) * dim * right)
    throw std::invalid_argument("Core3: data size does not match shape");
}

MatrixC Core3::slice(int s) const {
  MatrixC m(left_, right_);
  for (int a = 0; a < left_; ++a)
    for (int b = 0; b < right_; ++b) m(a, b) = (*this)(a, s, b);
  return m;
}

RowMatrixC Core3::left_unfolding() const {
  return Eigen::Map<const RowMatrixC>(data_.data(), static_cast<Eigen::Index>(left_) * dim_, right_);
}

RowMatrixC Core3::right_unfolding() const {
  return Eigen::Map<const RowMatrixC>(data_.data(), left_, static_cast<Eigen::Index>(dim_) * right_);
}

Core3 Core3::from_left_unfolding(const RowMatrixC& m, int left, int dim) {
  if (m.rows() != static_cast<Eigen::Index>(left) * dim)
    throw std::invalid_argument("Core3::from_left_unfolding: row count mismatch");
  std::vector<cplx> data(m.data(), m.data() + m.size());
  return Core3(left, dim, static_cast<int>(m.cols()), std::move(data));
}

Core3 Core3::from_right_unfolding(const RowMatrixC& m, int dim, int right) {
  if (m.cols() != static_cast<Eigen::Index>(dim) * right)
    throw std::invalid_argument("Core3::from_right_unfolding: column count mismatch");
  std::vector<cplx> data(m.data(), m.data() + m.size());
  return Core3(static_cast<int>(m.rows()), dim, right, std::move(data));
}

TensorTrain::TensorTrain(std::vector<Core3> cores) : cores_(std::move(cores)) {
  if (cores_.empty()) throw std::invalid_argument("TensorTrain: need at least one core");
  if (cores_.front().left() != 1 || cores_.back().right() != 1)
    throw std::invalid_argument("TensorTrain: boundary bonds must be 1");
  for (std::size_t l = 0; l + 1 < cores_.size(); ++l)
    if (cores_[l].right() != cores_[l + 1].left())
      throw std::invalid_argument("TensorTrain: bond mismatch between cores " + std::to_string(l) +
                                  " and " + std::to_string(l + 1));
}

TensorTrain TensorTrain::constant(std::span<const int> dims, cplx value) {
  std::vector<std::vector<cplx>> factors;
  for (std::size_t l = 0; l < dims.size(); ++l)
    factors.emplace_back(static_cast<std::size_t>(dims[l]), l == 0 ? value : cplx{1.0, 0.0});
  return product(factors);
}

TensorTrain TensorTrain::product(const std::vector<std::vector<cplx>>& factors) {
  std::vector<Core3> cores;
  cores.reserve(factors.size());
  for (const auto& f : factors) cores.emplace_back(1, static_cast<int>(f.size()), 1, f);
  return TensorTrain(std::move(cores));
}

namespace {

// Number of singular values to keep: drop the smallest while the dropped
// squared energy stays within `budget`, then cap at max_bond. At least one is kept.
int truncation_rank(const Eigen::VectorXd& s, double budget, int max_bond) {
  int keep = static_cast<int>(s.size());
  double dropped = 0.0;
  while (keep > 1) {
    double next = dropped + s(keep - 1) * s(keep - 1);
    if (next > budget) break;
    dropped = next;
    --keep;
  }
  return std::max(1, std::min(keep, max_bond));
}

}  // namespace

TensorTrain TensorTrain::from_dense(std::span<const cplx> dense, std::span<const int> dims,
                                    double tolerance, int max_bond) {
  if (dims.empty()) throw std::invalid_argument("from_dense: empty dims");
  std::size_t total = 1;
  for (int d : dims) {
    if (d < 1) throw std::invalid_argument("from_dense: local dims must be >= 1");
    total *= static_cast<std::size_t>(d);
  }
  if (dense.size() != total) throw std::invalid_argument("from_dense: size mismatch");
  if (!(tolerance >= 0.0)) throw std::invalid_argument("from_dense: tolerance must be >= 0");
  if (max_bond < 1) throw std::invalid_argument("from_dense: max_bond must be >= 1");

  double norm2 = 0.0;
  for (auto v : dense) norm2 += std::norm(v);
  const double budget = dims.size() > 1 ? tolerance * norm2 / static_cast<double>(dims.size() - 1) : 0.0;

  std::vector<Core3> cores;
  RowMatrixC rest = Eigen::Map<const RowMatrixC>(dense.data(), 1, static_cast<Eigen::Index>(total));
  int left = 1;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int d = dims[l];
    const Eigen::Index cols = rest.size() / (static_cast<Eigen::Index>(left) * d);
    RowMatrixC m = Eigen::Map<RowMatrixC>(rest.data(), static_cast<Eigen::Index>(left) * d, cols);
    Eigen::BDCSVD<MatrixC> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const int r = truncation_rank(svd.singularValues(), budget, max_bond);
    RowMatrixC u = svd.matrixU().leftCols(r);
    cores.push_back(Core3::from_left_unfolding(u, left, d));
    rest = svd.singularValues().head(r).asDiagonal() * svd.matrixV().leftCols(r).adjoint();
    left = r;
  }
  cores.push_back(Core3::from_left_unfolding(
      Eigen::Map<RowMatrixC>(rest.data(), static_cast<Eigen::Index>(left) * dims.back(), 1), left,
      dims.back()));
  return TensorTrain(std::move(cores));
}

std::vector<int> TensorTrain::local_dims() const {
  std::vector<int> d;
  d.reserve(cores_.size());
  for (const auto& c : cores_) d.push_back(c.dim());
  return d;
}

std::vector<int> TensorTrain::bond_dims() const {
  std::vector<int> b;
  for (std::size_t l = 0; l + 1 < cores_.size(); ++l) b.push_back(cores_[l].right());
  return b;
}

int TensorTrain::max_bond() const {
  int m = 1;
  for (const auto& c : cores_) m = std::max({m, c.left(), c.right()});
  return m;
}

std::size_t TensorTrain::parameter_count() const {
  std::size_t n = 0;
  for (const auto& c : cores_) n += c.size();
  return n;
}

cplx TensorTrain::operator()(std::span<const int> index) const {
  if (index.size() != cores_.size())
    throw std::domain_error("TensorTrain: index length " + std::to_string(index.size()) +
                            " != " + std::to_string(cores_.size()));
  // Row vector sweep left to right.
  std::vector<cplx> v{cplx{1.0, 0.0}}, next;
  for (std::size_t l = 0; l < cores_.size(); ++l) {
    const Core3& c = cores_[l];
    const int s = index[l];
    if (s < 0 || s >= c.dim()) throw std::domain_error("TensorTrain: local index out of range");
    next.assign(static_cast<std::size_t>(c.right()), cplx{0.0, 0.0});
    for (int a = 0; a < c.left(); ++a) {
      const cplx va = v[static_cast<std::size_t>(a)];
      const cplx* row = &c.data()[(static_cast<std::size_t>(a) * c.dim() + s) * c.right()];
      for (int b = 0; b < c.right(); ++b) next[static_cast<std::size_t>(b)] += va * row[b];
    }
    v.swap(next);
  }
  return v[0];
}

std::vector<cplx> TensorTrain::to_dense() const {
  // (prefix states) x bond, grown one site at a time.
  RowMatrixC acc = RowMatrixC::Ones(1, 1);
  for (const auto& c : cores_) {
    RowMatrixC next(acc.rows() * c.dim(), c.right());
    for (int s = 0; s < c.dim(); ++s) {
      MatrixC sl = c.slice(s);
      RowMatrixC block = acc * sl;
      for (Eigen::Index p = 0; p < acc.rows(); ++p) next.row(p * c.dim() + s) = block.row(p);
    }
    acc.swap(next);
  }
  return std::vector<cplx>(acc.data(), acc.data() + acc.size());
}

double TensorTrain::norm() const {
  // Contract <tt|tt> via the transfer matrix.
  MatrixC env = MatrixC::Ones(1, 1);
  for (const auto& c : cores_) {
    MatrixC next = MatrixC::Zero(c.right(), c.right());
    for (int s = 0; s < c.dim(); ++s) {
      MatrixC sl = c.slice(s);
      next.noalias() += sl.adjoint() * env * sl;
    }
    env.swap(next);
  }
  return std::sqrt(std::max(0.0, env(0, 0).real()));
}

void TruncationSpec::validate() const {
  if (max_bond < 1) throw std::invalid_argument("TruncationSpec: max_bond must be >= 1");
  if (!(tolerance >= 0.0) || !std::isfinite(tolerance))
    throw std::invalid_argument("TruncationSpec: tolerance must be finite and >= 0");
}

cplx evaluate(const TensorTrain& tt, std::span<const int> index) { return tt(index); }

TensorTrain svd_truncate(const TensorTrain& tt, const TruncationSpec& spec) {
  spec.validate();
  std::vector<Core3> cores = tt.cores();
  const std::size_t L = cores.size();
  if (L == 1) return TensorTrain(std::move(cores));

  // Right-to-left QR sweep: cores 1..L-1 become right-orthonormal so the
  // discarded singular values at each bond are the exact local error.
  for (std::size_t l = L - 1; l > 0; --l) {
    RowMatrixC m = cores[l].right_unfolding();
    MatrixC mt = m.adjoint();  // (dim*right) x left
    Eigen::HouseholderQR<MatrixC> qr(mt);
    const Eigen::Index k = std::min(mt.rows(), mt.cols());
    MatrixC q = qr.householderQ() * MatrixC::Identity(mt.rows(), k);
    MatrixC r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    RowMatrixC newcore = q.adjoint();  // k x (dim*right)
    cores[l] = Core3::from_right_unfolding(newcore, cores[l].dim(), cores[l].right());
    // Absorb R^dagger into the left neighbour.
    RowMatrixC prev = cores[l - 1].left_unfolding();
    RowMatrixC absorbed = prev * r.adjoint();
    cores[l - 1] = Core3::from_left_unfolding(absorbed, cores[l - 1].left(), cores[l - 1].dim());
  }

  // After the sweep the whole norm sits in core 0.
  double norm2 = 0.0;
  for (auto v : cores[0].data()) norm2 += std::norm(v);
  const double budget = spec.tolerance * norm2 / static_cast<double>(L - 1);

  for (std::size_t l = 0; l + 1 < L; ++l) {
    RowMatrixC m = cores[l].left_unfolding();
    Eigen::BDCSVD<MatrixC> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const int r = truncation_rank(svd.singularValues(), budget, spec.max_bond);
    RowMatrixC u = svd.matrixU().leftCols(r);
    RowMatrixC sv = svd.singularValues().head(r).asDiagonal() * svd.matrixV().leftCols(r).adjoint();
    cores[l] = Core3::from_left_unfolding(u, cores[l].left(), cores[l].dim());
    RowMatrixC next = sv * cores[l + 1].right_unfolding();
    cores[l + 1] = Core3::from_right_unfolding(next, cores[l + 1].dim(), cores[l + 1].right());
  }
  return TensorTrain(std::move(cores));
}

TensorTrain elementwise_multiply(const TensorTrain& a, const TensorTrain& b, const TruncationSpec& spec) {
  if (a.length() != b.length() || a.local_dims() != b.local_dims())
    throw std::domain_error("elementwise_multiply: shape mismatch");
  std::vector<Core3> cores;
  cores.reserve(a.length());
  for (std::size_t l = 0; l < a.length(); ++l) {
    const Core3& ca = a.core(l);
    const Core3& cb = b.core(l);
    // MPO core of a is diagonal in (s, s'); contracting it with b leaves
    // c[(ia,ib), s, (ja,jb)] = a[ia,s,ja] * b[ib,s,jb].
    Core3 c(ca.left() * cb.left(), ca.dim(), ca.right() * cb.right());
    for (int ia = 0; ia < ca.left(); ++ia)
      for (int ib = 0; ib < cb.left(); ++ib)
        for (int s = 0; s < ca.dim(); ++s)
          for (int ja = 0; ja < ca.right(); ++ja) {
            const cplx av = ca(ia, s, ja);
            for (int jb = 0; jb < cb.right(); ++jb)
              c(ia * cb.left() + ib, s, ja * cb.right() + jb) = av * cb(ib, s, jb);
          }
    cores.push_back(std::move(c));
  }
  TensorTrain raw(std::move(cores));
  if (spec.is_exact()) return raw;
  return svd_truncate(raw, spec);
}

cplx integrate(const TensorTrain& tt, double cell_volume) {
  std::vector<cplx> v{cplx{1.0, 0.0}}, next;
  for (const auto& c : tt.cores()) {
    next.assign(static_cast<std::size_t>(c.right()), cplx{0.0, 0.0});
    for (int a = 0; a < c.left(); ++a)
      for (int s = 0; s < c.dim(); ++s)
        for (int b = 0; b < c.right(); ++b) next[static_cast<std::size_t>(b)] += v[static_cast<std::size_t>(a)] * c(a, s, b);
    v.swap(next);
  }
  return cell_volume * v[0];
}

double max_abs_sampled(const TensorTrain& tt, std::span<const MultiIndex> samples) {
  if (samples.empty()) throw std::domain_error("max_abs_sampled: empty sample set");
  double m = 0.0;
  for (const auto& s : samples) m = std::max(m, std::abs(tt(s)));
  return m;
}

TensorTrain scaled(const TensorTrain& tt, cplx factor) {
  std::vector<Core3> cores = tt.cores();
  for (auto& v : cores.front().data()) v *= factor;
  return TensorTrain(std::move(cores));
}

namespace {

constexpr char kMagic[8] = {'Q', 'T', 'T', 'C', 'O', 'R', 'E', '1'};

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(sizeof(T) == 8);
  std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) throw std::runtime_error("read_tensor_train: truncated input");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

}  // namespace

void write_tensor_train(std::ostream& out, const TensorTrain& tt) {
  out.write(kMagic, sizeof kMagic);
  put_le<std::uint64_t>(out, tt.length());
  for (const auto& c : tt.cores()) {
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(c.left()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(c.dim()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(c.right()));
  }
  for (const auto& c : tt.cores())
    for (auto v : c.data()) {
      put_le<double>(out, v.real());
      put_le<double>(out, v.imag());
    }
  if (!out) throw std::runtime_error("write_tensor_train: stream error");
}

TensorTrain read_tensor_train(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("read_tensor_train: bad magic");
  const auto L = get_le<std::uint64_t>(in);
  if (L == 0 || L > (1u << 20)) throw std::runtime_error("read_tensor_train: bad length");
  std::vector<std::array<std::uint64_t, 3>> shapes(L);
  for (auto& s : shapes)
    for (auto& e : s) {
      e = get_le<std::uint64_t>(in);
      if (e == 0 || e > (1u << 24)) throw std::runtime_error("read_tensor_train: bad core shape");
    }
  std::vector<Core3> cores;
  for (const auto& s : shapes) {
    std::vector<cplx> data(s[0] * s[1] * s[2]);
    for (auto& v : data) {
      const double re = get_le<double>(in);
      const double im = get_le<double>(in);
      v = {re, im};
    }
    cores.emplace_back(static_cast<int>(s[0]), static_cast<int>(s[1]), static_cast<int>(s[2]), std::move(data));
  }
  return TensorTrain(std::move(cores));
}

void save_tensor_train(const std::string& path, const TensorTrain& tt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_tensor_train(out, tt);
}

TensorTrain load_tensor_train(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_tensor_train(in);
}

}  // namespace qttfit
