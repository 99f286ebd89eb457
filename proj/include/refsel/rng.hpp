#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace refsel {

using Engine = std::mt19937_64;

/// SplitMix64 finaliser; used to decorrelate derived seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed of the stream addressed by `path` under `master`. Each element of the
/// path is mixed in turn, so (seed, {cell, rep}) and (seed, {rep, cell}) differ.
std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> path) noexcept;

inline Engine make_stream(std::uint64_t master,
                          std::initializer_list<std::uint64_t> path = {}) {
  return Engine(derive_seed(master, path));
}

double sample_normal(Engine& eng);
double sample_uniform(Engine& eng);
/// Gamma with the given shape and unit scale.
double sample_gamma(Engine& eng, double shape);
/// Inverse-gamma with density proportional to x^{-shape-1} exp(-scale / x).
double sample_inv_gamma(Engine& eng, double shape, double scale);

}  // namespace refsel
