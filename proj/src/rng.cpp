#include "lmpanel/rng.hpp"

#include <cmath>

namespace lmpanel {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::mt19937_64 derive_stream(std::uint64_t seed, std::uint64_t salt,
                              std::uint64_t index) {
  return std::mt19937_64(splitmix64(splitmix64(seed ^ salt) + index));
}

double uniform01(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

double uniform_range(std::mt19937_64& eng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(eng);
}

int uniform_int(std::mt19937_64& eng, int lo, int hi) {
  const int span = hi - lo + 1;
  const int draw = lo + static_cast<int>(uniform01(eng) * span);
  return draw > hi ? hi : draw;
}

bool bernoulli(std::mt19937_64& eng, double p) { return uniform01(eng) < p; }

int categorical(std::mt19937_64& eng, const Vector& probs) {
  const double u = uniform01(eng) * probs.sum();
  double acc = 0.0;
  for (Index c = 0; c < probs.size(); ++c) {
    acc += probs[c];
    if (u < acc) return static_cast<int>(c);
  }
  return static_cast<int>(probs.size() - 1);
}

double normal01(std::mt19937_64& eng) {
  const double u1 = 1.0 - uniform01(eng); // keep log() away from 0
  const double u2 = uniform01(eng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

const char* rng_description() {
  return "mt19937_64 streams via splitmix64(splitmix64(seed^salt)+index)";
}

} // namespace lmpanel
