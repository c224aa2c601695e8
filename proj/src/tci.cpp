#include "qttfit/tci.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>

#include <Eigen/LU>

namespace qttfit {

void TciOptions::validate() const {
  if (max_bond < 1) throw std::invalid_argument("TciOptions: max_bond must be >= 1");
  if (!(tolerance >= 0.0)) throw std::invalid_argument("TciOptions: tolerance must be >= 0");
  if (max_sweeps < 1) throw std::invalid_argument("TciOptions: max_sweeps must be >= 1");
  if (global_search_starts < 0) throw std::invalid_argument("TciOptions: global_search_starts must be >= 0");
}

std::optional<cplx> MeasurementLedger::find(const MultiIndex& index) const {
  auto it = lookup_.find(index);
  if (it == lookup_.end()) return std::nullopt;
  return entries_[it->second].value;
}

void MeasurementLedger::record(MultiIndex index, cplx value) {
  auto [it, inserted] = lookup_.emplace(index, entries_.size());
  if (!inserted) throw std::logic_error("MeasurementLedger: duplicate index");
  max_abs_ = std::max(max_abs_, std::abs(value));
  entries_.push_back({std::move(index), value});
}

void MeasurementLedger::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  const std::size_t L = entries_.empty() ? 0 : entries_.front().index.size();
  for (std::size_t l = 0; l < L; ++l) out << 's' << (l + 1) << ',';
  out << "re,im\n" << std::setprecision(17);
  for (const auto& e : entries_) {
    for (int s : e.index) out << s << ',';
    out << e.value.real() << ',' << e.value.imag() << '\n';
  }
}

namespace {

// Residuals below this fraction of max|F| are treated as roundoff and never
// become pivots.
constexpr double kPivotFloor = 1e-12;

// A globally found pivot is spliced in only if every enlarged pivot matrix
// keeps a Schur complement above this fraction of max|F|.
constexpr double kGlobalSchurFloor = 1e-10;

MultiIndex concat(const MultiIndex& left, int s, const MultiIndex& right) {
  MultiIndex out;
  out.reserve(left.size() + 1 + right.size());
  out.insert(out.end(), left.begin(), left.end());
  out.push_back(s);
  out.insert(out.end(), right.begin(), right.end());
  return out;
}

MultiIndex concat2(const MultiIndex& left, int s1, int s2, const MultiIndex& right) {
  MultiIndex out;
  out.reserve(left.size() + 2 + right.size());
  out.insert(out.end(), left.begin(), left.end());
  out.push_back(s1);
  out.push_back(s2);
  out.insert(out.end(), right.begin(), right.end());
  return out;
}

class CrossInterpolator {
 public:
  CrossInterpolator(const Evaluator& f, std::span<const int> dims, const TciOptions& opts)
      : f_(f), dims_(dims.begin(), dims.end()), opts_(opts), L_(dims.size()) {}

  TciResult run() {
    MultiIndex p0 = first_pivot();
    TciResult result;
    if (std::abs(eval(p0)) == 0.0) {
      // Identically zero as far as we can see: rank-1 zero train.
      result.tt = TensorTrain::constant(dims_, cplx{0.0, 0.0});
      result.row_pivots.assign(L_ > 0 ? L_ - 1 : 0, {});
      result.col_pivots.assign(L_ > 0 ? L_ - 1 : 0, {});
      for (std::size_t b = 0; b + 1 < L_; ++b) {
        result.row_pivots[b].emplace_back(p0.begin(), p0.begin() + static_cast<long>(b) + 1);
        result.col_pivots[b].emplace_back(p0.begin() + static_cast<long>(b) + 1, p0.end());
      }
      result.ledger = std::move(ledger_);
      result.converged = true;
      return result;
    }
    init_sets(p0);

    for (int sweep = 0; sweep < opts_.max_sweeps; ++sweep) {
      const bool forward = sweep % 2 == 0;
      double sweep_err = 0.0;
      int added = 0;
      for (std::size_t k = 0; k + 1 < L_; ++k) {
        const std::size_t b = forward ? k : L_ - 2 - k;
        auto [err, n] = update_bond(b);
        sweep_err = std::max(sweep_err, err);
        added += n;
      }
      result.sweep_errors.push_back(sweep_err);
      result.sweeps = sweep + 1;
      if (added == 0) {
        if (opts_.global_search_starts > 0) {
          const auto [found, inserted] = add_global_pivots();
          if (inserted > 0) continue;
          // Points above tolerance that no bond can take: stuck, not done.
          result.converged = found == 0;
          break;
        }
        result.converged = true;
        break;
      }
    }

    result.tt = build_train();
    for (std::size_t b = 0; b + 1 < L_; ++b) {
      result.row_pivots.push_back(iset_[b + 1]);
      result.col_pivots.push_back(jset_[b]);
    }
    result.error_estimate = error_estimate(result.tt, ledger_);
    result.ledger = std::move(ledger_);
    return result;
  }

 private:
  struct Parent {
    int outer;  // position in the neighbouring set
    int s;      // local index
  };

  cplx eval(const MultiIndex& idx) {
    if (auto v = ledger_.find(idx)) return *v;
    cplx z;
    try {
      z = f_(idx);
    } catch (const std::exception& e) {
      throw TciError(std::string("evaluator failed: ") + e.what(), ledger_);
    }
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
      throw TciError("evaluator returned a non-finite value", ledger_);
    ledger_.record(idx, z);
    return z;
  }

  // Greedy coordinate search for a large |f| starting from the seed.
  MultiIndex first_pivot() {
    MultiIndex p = opts_.pivot_seed.empty() ? MultiIndex(L_, 0) : opts_.pivot_seed;
    if (p.size() != L_) throw std::invalid_argument("cross_interpolate: pivot_seed has wrong length");
    for (std::size_t l = 0; l < L_; ++l)
      if (p[l] < 0 || p[l] >= dims_[l]) throw std::invalid_argument("cross_interpolate: pivot_seed out of range");
    double best = std::abs(eval(p));
    for (int pass = 0; pass < 2; ++pass) {
      bool improved = false;
      for (std::size_t l = 0; l < L_; ++l) {
        for (int s = 0; s < dims_[l]; ++s) {
          if (s == p[l]) continue;
          MultiIndex q = p;
          q[l] = s;
          const double v = std::abs(eval(q));
          if (v > best) {
            best = v;
            p = std::move(q);
            improved = true;
          }
        }
      }
      if (!improved) break;
    }
    return p;
  }

  void init_sets(const MultiIndex& p0) {
    iset_.assign(L_, {});
    jset_.assign(L_, {});
    iparent_.assign(L_, {});
    jparent_.assign(L_, {});
    for (std::size_t l = 0; l < L_; ++l) {
      iset_[l].emplace_back(p0.begin(), p0.begin() + static_cast<long>(l));
      jset_[l].emplace_back(p0.begin() + static_cast<long>(l) + 1, p0.end());
      if (l > 0) iparent_[l].push_back({0, p0[l - 1]});
      if (l + 1 < L_) jparent_[l].push_back({0, p0[l + 1]});
    }
  }

  // Returns (normalized max residual before adding, number of pivots added).
  std::pair<double, int> update_bond(std::size_t b) {
    const auto& rows_in = iset_[b];
    const auto& cols_in = jset_[b + 1];
    const int nI = static_cast<int>(rows_in.size());
    const int nJ = static_cast<int>(cols_in.size());
    const int d1 = dims_[b];
    const int d2 = dims_[b + 1];
    const Eigen::Index nr = static_cast<Eigen::Index>(nI) * d1;
    const Eigen::Index nc = static_cast<Eigen::Index>(d2) * nJ;

    MatrixC M(nr, nc);
    for (int i = 0; i < nI; ++i)
      for (int s1 = 0; s1 < d1; ++s1)
        for (int s2 = 0; s2 < d2; ++s2)
          for (int j = 0; j < nJ; ++j)
            M(i * d1 + s1, s2 * nJ + j) = eval(concat2(rows_in[i], s1, s2, cols_in[j]));

    const auto& ip = iparent_[b + 1];
    const auto& jp = jparent_[b];
    const Eigen::Index chi = static_cast<Eigen::Index>(ip.size());
    std::vector<Eigen::Index> prow(ip.size()), pcol(jp.size());
    for (std::size_t k = 0; k < ip.size(); ++k) prow[k] = ip[k].outer * d1 + ip[k].s;
    for (std::size_t k = 0; k < jp.size(); ++k) pcol[k] = jp[k].s * nJ + jp[k].outer;

    MatrixC P(chi, chi), Mc(nr, chi), Mr(chi, nc);
    for (Eigen::Index k = 0; k < chi; ++k) {
      Mc.col(k) = M.col(pcol[k]);
      Mr.row(k) = M.row(prow[k]);
    }
    for (Eigen::Index a = 0; a < chi; ++a)
      for (Eigen::Index c = 0; c < chi; ++c) P(a, c) = M(prow[a], pcol[c]);
    MatrixC R = M - Mc * P.partialPivLu().solve(Mr);

    std::vector<char> row_used(static_cast<std::size_t>(nr), 0), col_used(static_cast<std::size_t>(nc), 0);
    for (auto r : prow) row_used[static_cast<std::size_t>(r)] = 1;
    for (auto c : pcol) col_used[static_cast<std::size_t>(c)] = 1;

    const long cap = std::min<long>({opts_.max_bond, static_cast<long>(nr), static_cast<long>(nc)});
    const double fmax = ledger_.max_abs();
    const double threshold = std::max(opts_.tolerance, kPivotFloor);
    double first_err = -1.0;
    int added = 0;
    while (true) {
      Eigen::Index bi = -1, bj = -1;
      double best = -1.0;
      for (Eigen::Index j = 0; j < nc; ++j) {
        if (col_used[static_cast<std::size_t>(j)]) continue;
        for (Eigen::Index i = 0; i < nr; ++i) {
          if (row_used[static_cast<std::size_t>(i)]) continue;
          const double v = std::abs(R(i, j));
          if (v > best) {
            best = v;
            bi = i;
            bj = j;
          }
        }
      }
      if (bi < 0) {
        if (first_err < 0.0) first_err = 0.0;
        break;
      }
      const double err = fmax > 0.0 ? best / fmax : 0.0;
      if (first_err < 0.0) first_err = err;
      if (static_cast<long>(iset_[b + 1].size()) >= cap || err <= threshold) break;

      const int i = static_cast<int>(bi / d1), s1 = static_cast<int>(bi % d1);
      const int s2 = static_cast<int>(bj / nJ), j = static_cast<int>(bj % nJ);
      iset_[b + 1].push_back(concat(rows_in[i], s1, {}));
      iparent_[b + 1].push_back({i, s1});
      MultiIndex right;
      right.reserve(cols_in[j].size() + 1);
      right.push_back(s2);
      right.insert(right.end(), cols_in[j].begin(), cols_in[j].end());
      jset_[b].push_back(std::move(right));
      jparent_[b].push_back({j, s2});
      ++added;

      // Schur complement update of the residual.
      const cplx pivot = R(bi, bj);
      VectorC colv = R.col(bj);
      Eigen::Matrix<cplx, 1, Eigen::Dynamic> rowv = R.row(bi);
      R.noalias() -= colv * (rowv / pivot);
      row_used[static_cast<std::size_t>(bi)] = 1;
      col_used[static_cast<std::size_t>(bj)] = 1;
    }
    return {first_err, added};
  }

  static int find(const std::vector<MultiIndex>& set, const MultiIndex& x) {
    for (std::size_t k = 0; k < set.size(); ++k)
      if (set[k] == x) return static_cast<int>(k);
    return -1;
  }

  static MultiIndex slice(const MultiIndex& p, std::size_t from, std::size_t to) {
    return MultiIndex(p.begin() + static_cast<long>(from), p.begin() + static_cast<long>(to));
  }

  // Greedy coordinate ascent of |f - tt| from random starts. Points whose
  // error exceeds the tolerance are spliced into every bond's pivot sets.
  // Returns (points found, points inserted).
  std::pair<int, int> add_global_pivots() {
    const TensorTrain tt = build_train();
    const double fmax = ledger_.max_abs();
    if (fmax == 0.0) return {0, 0};
    const double threshold = std::max(opts_.tolerance, kPivotFloor) * fmax;
    std::mt19937_64 rng(0x9e3779b97f4a7c15ULL ^ ledger_.size());
    auto err_at = [&](const MultiIndex& q) { return std::abs(eval(q) - tt(q)); };

    std::vector<std::pair<double, MultiIndex>> found;
    for (int k = 0; k < opts_.global_search_starts; ++k) {
      MultiIndex q(L_);
      for (std::size_t l = 0; l < L_; ++l) q[l] = static_cast<int>(rng() % static_cast<std::uint64_t>(dims_[l]));
      double err = err_at(q);
      for (int pass = 0; pass < 2; ++pass) {
        bool improved = false;
        for (std::size_t l = 0; l < L_; ++l)
          for (int s = 0; s < dims_[l]; ++s) {
            if (s == q[l]) continue;
            MultiIndex c = q;
            c[l] = s;
            const double e = err_at(c);
            if (e > err) {
              err = e;
              q = std::move(c);
              improved = true;
            }
          }
        if (!improved) break;
      }
      if (err > threshold && std::none_of(found.begin(), found.end(), [&](const auto& f) { return f.second == q; }))
        found.emplace_back(err, q);
    }
    std::stable_sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    int added = 0;
    for (const auto& [err, p] : found) added += insert_global_pivot(p, kGlobalSchurFloor * fmax) ? 1 : 0;
    return {static_cast<int>(found.size()), added};
  }

  // Adds p on the bonds where neither its prefix nor its suffix is a pivot
  // yet. That range is contiguous, and splicing whole chains keeps both
  // families nested.
  bool insert_global_pivot(const MultiIndex& p, double threshold) {
    std::vector<char> pre_new(L_ - 1), suf_new(L_ - 1);
    for (std::size_t b = 0; b + 1 < L_; ++b) {
      pre_new[b] = find(iset_[b + 1], slice(p, 0, b + 1)) < 0;
      suf_new[b] = find(jset_[b], slice(p, b + 1, L_)) < 0;
    }
    std::size_t lo = L_, hi = 0;
    for (std::size_t b = 0; b + 1 < L_; ++b)
      if (pre_new[b] && suf_new[b]) {
        lo = std::min(lo, b);
        hi = b;
      }
    if (lo == L_) return false;
    for (std::size_t b = 0; b + 1 < L_; ++b) {
      const bool inside = b >= lo && b <= hi;
      if (inside != (pre_new[b] && suf_new[b])) return false;
      if (b < lo && pre_new[b]) return false;
      if (b > hi && suf_new[b]) return false;
    }
    for (std::size_t b = lo; b <= hi; ++b) {
      if (static_cast<int>(iset_[b + 1].size()) >= opts_.max_bond) return false;
      // Schur complement of the enlarged pivot matrix; a tiny one would make
      // the cross ill-conditioned.
      const auto& I = iset_[b + 1];
      const auto& J = jset_[b];
      const auto n = static_cast<Eigen::Index>(I.size());
      const MultiIndex pre = slice(p, 0, b + 1), suf = slice(p, b + 1, L_);
      MatrixC P(n, n);
      VectorC c(n), r(n);
      auto join = [](MultiIndex a, const MultiIndex& z) {
        a.insert(a.end(), z.begin(), z.end());
        return a;
      };
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) P(i, j) = eval(join(I[i], J[j]));
        c(i) = eval(join(I[i], suf));
        r(i) = eval(join(pre, J[i]));
      }
      const VectorC sol = P.partialPivLu().solve(c);
      const cplx schur = eval(p) - r.cwiseProduct(sol).sum();
      if (!(std::abs(schur) > threshold)) return false;
    }
    for (std::size_t b = lo; b <= hi; ++b) {
      const int outer = b == 0 ? 0 : find(iset_[b], slice(p, 0, b));
      iset_[b + 1].push_back(slice(p, 0, b + 1));
      iparent_[b + 1].push_back({outer, p[b]});
    }
    for (std::size_t b = hi + 1; b-- > lo;) {
      const int outer = b + 2 >= L_ ? 0 : find(jset_[b + 1], slice(p, b + 2, L_));
      jset_[b].push_back(slice(p, b + 1, L_));
      jparent_[b].push_back({outer, p[b + 1]});
    }
    return true;
  }

  TensorTrain build_train() {
    std::vector<Core3> cores;
    cores.reserve(L_);
    for (std::size_t l = 0; l < L_; ++l) {
      const auto& I = iset_[l];
      const auto& J = jset_[l];
      const int d = dims_[l];
      MatrixC T(static_cast<Eigen::Index>(I.size()) * d, static_cast<Eigen::Index>(J.size()));
      for (std::size_t i = 0; i < I.size(); ++i)
        for (int s = 0; s < d; ++s)
          for (std::size_t j = 0; j < J.size(); ++j)
            T(static_cast<Eigen::Index>(i) * d + s, static_cast<Eigen::Index>(j)) = eval(concat(I[i], s, J[j]));
      RowMatrixC core;
      if (l + 1 < L_) {
        const auto& Inext = iset_[l + 1];
        MatrixC P(static_cast<Eigen::Index>(Inext.size()), static_cast<Eigen::Index>(J.size()));
        for (std::size_t a = 0; a < Inext.size(); ++a)
          for (std::size_t c = 0; c < J.size(); ++c) {
            MultiIndex full = Inext[a];
            full.insert(full.end(), J[c].begin(), J[c].end());
            P(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)) = eval(full);
          }
        // core = T P^{-1}, i.e. P^T core^T = T^T.
        core = P.transpose().partialPivLu().solve(T.transpose()).transpose();
      } else {
        core = T;
      }
      cores.push_back(Core3::from_left_unfolding(core, static_cast<int>(I.size()), d));
    }
    return TensorTrain(std::move(cores));
  }

  const Evaluator& f_;
  std::vector<int> dims_;
  TciOptions opts_;
  std::size_t L_;
  MeasurementLedger ledger_;
  std::vector<std::vector<MultiIndex>> iset_, jset_;
  std::vector<std::vector<Parent>> iparent_, jparent_;
};

}  // namespace

TciResult cross_interpolate(const Evaluator& f, std::span<const int> dims, const TciOptions& opts) {
  opts.validate();
  if (dims.empty()) throw std::invalid_argument("cross_interpolate: dims must be nonempty");
  for (int d : dims)
    if (d < 1) throw std::invalid_argument("cross_interpolate: local dims must be >= 1");
  if (dims.size() == 1) {
    // Single core: just tabulate.
    MeasurementLedger ledger;
    std::vector<cplx> vals;
    for (int s = 0; s < dims[0]; ++s) {
      MultiIndex idx{s};
      cplx z;
      try {
        z = f(idx);
      } catch (const std::exception& e) {
        throw TciError(std::string("evaluator failed: ") + e.what(), ledger);
      }
      ledger.record(idx, z);
      vals.push_back(z);
    }
    TciResult r;
    r.tt = TensorTrain::product({vals});
    r.ledger = std::move(ledger);
    r.converged = true;
    return r;
  }
  return CrossInterpolator(f, dims, opts).run();
}

double error_estimate(const TensorTrain& tt, const MeasurementLedger& ledger) {
  const double fmax = ledger.max_abs();
  if (fmax == 0.0) return 0.0;
  double err = 0.0;
  for (const auto& e : ledger.entries()) err = std::max(err, std::abs(e.value - tt(e.index)));
  return err / fmax;
}

std::vector<MultiIndex> pivot_cross_indices(const TciResult& result, std::span<const int> dims) {
  const std::size_t L = dims.size();
  std::vector<MultiIndex> out;
  for (std::size_t l = 0; l < L; ++l) {
    const std::vector<MultiIndex> empty{MultiIndex{}};
    const auto& I = l == 0 ? empty : result.row_pivots.at(l - 1);
    const auto& J = l + 1 == L ? empty : result.col_pivots.at(l);
    for (const auto& left : I)
      for (int s = 0; s < dims[l]; ++s)
        for (const auto& right : J) out.push_back(concat(left, s, right));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace qttfit
