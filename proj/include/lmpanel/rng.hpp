#pragma once

#include <cstdint>
#include <random>

#include "lmpanel/types.hpp"

namespace lmpanel {

// Stream-splitting salts; streams are derived as
// mt19937_64(splitmix64(splitmix64(seed ^ salt) + index)).
inline constexpr std::uint64_t kSaltSimulate = 0x53494d554c415445ull;
inline constexpr std::uint64_t kSaltMultiStart = 0x4d554c5449535441ull;

std::uint64_t splitmix64(std::uint64_t x);

std::mt19937_64 derive_stream(std::uint64_t seed, std::uint64_t salt,
                              std::uint64_t index);

// Uniform on [0, 1) from the top 53 bits; identical across platforms.
double uniform01(std::mt19937_64& eng);
double uniform_range(std::mt19937_64& eng, double lo, double hi);
int uniform_int(std::mt19937_64& eng, int lo, int hi); // inclusive
bool bernoulli(std::mt19937_64& eng, double p);
int categorical(std::mt19937_64& eng, const Vector& probs); // 0-based
double normal01(std::mt19937_64& eng);                      // Box-Muller

const char* rng_description();

} // namespace lmpanel
