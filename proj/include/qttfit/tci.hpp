#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "qttfit/common.hpp"
#include "qttfit/tensor_train.hpp"

namespace qttfit {

struct TciOptions {
  int max_bond = 8;          ///< chi~, the cap on every bond
  double tolerance = 0.0;    ///< tau_TCI, compared with the normalized max pivot residual
  int max_sweeps = 40;       ///< half-sweeps (one direction each)
  MultiIndex pivot_seed;     ///< starting index; empty means all zeros
  /// Random starts of the greedy search for badly interpolated indices run
  /// whenever a sweep adds no pivot. Needed for targets whose 2-site blocks
  /// look rank-1 around the pivots (separable functions in interleaved
  /// order). On noisy data it mostly chases noise, so it is off by default.
  int global_search_starts = 0;

  void validate() const;
};

/// Every index the interpolation evaluated, with its value, in evaluation order.
/// Each index is stored once.
class MeasurementLedger {
 public:
  struct Entry {
    MultiIndex index;
    cplx value;
  };

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::optional<cplx> find(const MultiIndex& index) const;
  bool contains(const MultiIndex& index) const { return lookup_.count(index) != 0; }
  /// Records a new entry. Throws if the index is already present.
  void record(MultiIndex index, cplx value);
  double max_abs() const noexcept { return max_abs_; }

  /// CSV with header s1..sL,re,im and one row per entry.
  void write_csv(const std::string& path) const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<MultiIndex, std::size_t, MultiIndexHash> lookup_;
  double max_abs_ = 0.0;
};

struct TciResult {
  TensorTrain tt;
  MeasurementLedger ledger;
  /// row_pivots[l] are the left multi-indices (sites 0..l) on bond l, l = 0..L-2.
  std::vector<std::vector<MultiIndex>> row_pivots;
  /// col_pivots[l] are the right multi-indices (sites l+1..L-1) on bond l.
  std::vector<std::vector<MultiIndex>> col_pivots;
  double error_estimate = 0.0;  ///< eps_TCI over the ledger
  std::vector<double> sweep_errors;  ///< normalized max pivot residual per half-sweep
  int sweeps = 0;
  bool converged = false;
};

/// Thrown when the evaluator fails mid-run; carries what was measured so far.
class TciError : public std::runtime_error {
 public:
  TciError(const std::string& what, MeasurementLedger partial)
      : std::runtime_error(what), ledger(std::move(partial)) {}
  MeasurementLedger ledger;
};

/// Two-site cross interpolation with nested pivot sets. On every bond the
/// candidate block is (I_l x s_l) x (s_{l+1} x J_{l+1}); new pivots are the
/// largest residuals of the current cross in that block, so pivot sets only
/// grow and stay nested. The returned train is T_0 P_0^{-1} T_1 ... T_{L-1}.
TciResult cross_interpolate(const Evaluator& f, std::span<const int> dims, const TciOptions& opts);

/// max over ledger of |z - tt(s)| / max |z|; 0 for an all-zero ledger.
double error_estimate(const TensorTrain& tt, const MeasurementLedger& ledger);

/// Every index of the form I + s + J with I a row pivot of bond l-1 (or the
/// empty prefix), s a local index and J a column pivot of bond l (or the empty
/// suffix). The interpolating train reproduces f exactly on these.
std::vector<MultiIndex> pivot_cross_indices(const TciResult& result, std::span<const int> dims);

}  // namespace qttfit
