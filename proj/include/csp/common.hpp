#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>

namespace csp {

// Error taxonomy. Everything user-facing throws one of these.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct TrainingFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::uint64_t offset_)
      : std::runtime_error(what + " (offset " + std::to_string(offset_) + ")"),
        offset(offset_) {}
  std::uint64_t offset = 0;
};

using Rng = std::mt19937_64;

// splitmix64 finalizer; good avalanche for deriving stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed,
                              std::initializer_list<std::uint64_t> stream) {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t s : stream) h = mix64(h ^ mix64(s));
  return h;
}

inline Rng make_rng(std::uint64_t seed,
                    std::initializer_list<std::uint64_t> stream = {}) {
  return Rng(mix_seed(seed, stream));
}

// Stream tags used to derive independent RNG substreams from one run seed.
namespace tag {
constexpr std::uint64_t kTaskInit = 0x01;
constexpr std::uint64_t kCritic = 0x02;
constexpr std::uint64_t kTrain = 0x03;
constexpr std::uint64_t kEval = 0x04;
constexpr std::uint64_t kDecision = 0x05;
constexpr std::uint64_t kObsMask = 0x06;
constexpr std::uint64_t kActMask = 0x07;
constexpr std::uint64_t kEnv = 0x08;
constexpr std::uint64_t kAct = 0x09;
constexpr std::uint64_t kAlpha = 0x0a;
constexpr std::uint64_t kEpisode = 0x0b;
constexpr std::uint64_t kLandscape = 0x0c;
constexpr std::uint64_t kProbe = 0x0d;
constexpr std::uint64_t kSolo = 0x0e;
constexpr std::uint64_t kOracle = 0x0f;
}  // namespace tag

}  // namespace csp
