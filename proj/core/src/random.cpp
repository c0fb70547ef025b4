#include "aoimix/random.hpp"

#include <cmath>

namespace aoimix {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, Stream stream,
                          std::initializer_list<std::uint64_t> indices) {
  std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(stream)));
  for (auto idx : indices) h = splitmix64(h ^ splitmix64(idx + 0x632be59bd9b4e019ULL));
  return h;
}

Vector sample_ball(Rng& rng, Eigen::Index dim, double radius) {
  Vector v = Vector::Zero(dim);
  if (radius <= 0.0 || dim == 0) return v;
  std::normal_distribution<double> normal(0.0, 1.0);
  double norm = 0.0;
  // A zero direction has probability zero; redraw just in case.
  while (norm == 0.0) {
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = normal(rng);
    norm = v.norm();
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = radius * std::pow(unit(rng), 1.0 / static_cast<double>(dim));
  return v * (r / norm);
}

}  // namespace aoimix
