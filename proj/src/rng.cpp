#include "refsel/rng.hpp"

namespace refsel {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t s = splitmix64(master);
  for (std::uint64_t p : path) s = splitmix64(s ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

double sample_normal(Engine& eng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(eng);
}

double sample_uniform(Engine& eng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  return dist(eng);
}

double sample_gamma(Engine& eng, double shape) {
  std::gamma_distribution<double> dist(shape, 1.0);
  return dist(eng);
}

double sample_inv_gamma(Engine& eng, double shape, double scale) {
  return scale / sample_gamma(eng, shape);
}

}  // namespace refsel
