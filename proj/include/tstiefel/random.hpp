#pragma once

#include <cstdint>
#include <random>

#include "tstiefel/tensor3.hpp"

namespace tstiefel {

using Rng = std::mt19937_64;

/// splitmix64 step; used to expand a master seed into independent trial seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of trial `index` under `master`: the (index+1)-th splitmix64 output.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t state = master + index * 0x9e3779b97f4a7c15ULL;
  return splitmix64(state);
}

/// Tensor with i.i.d. standard normal entries.
inline Tensor3d randn(Index n, Index p, Index l, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor3d a(n, p, l);
  for (Index i = 0; i < a.size(); ++i) a.vec()[i] = dist(rng);
  return a;
}

}  // namespace tstiefel
