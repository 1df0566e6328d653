#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (bad arguments, bad file content).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A numeric routine produced or received non-finite values, or failed to converge.
class NumericError : public Error {
 public:
  using Error::Error;
};

inline void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidArgument(message);
}

/// splitmix64 step; used to derive independent seed streams from one base seed.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace cc
