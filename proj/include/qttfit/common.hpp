#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace qttfit {

using cplx = std::complex<double>;

/// Multi-index into a tensor train, one local index per core.
using MultiIndex = std::vector<int>;

/// Point-wise access to a tensor: multi-index -> value.
using Evaluator = std::function<cplx(std::span<const int>)>;

struct MultiIndexHash {
  std::size_t operator()(const MultiIndex& idx) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (int v : idx) {
      h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v));
      h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace qttfit
