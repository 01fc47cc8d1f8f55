#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace stgls {

/// Coordinates in R^D. For space-time quantities the last component is time.
template <int D>
using Point = std::array<double, D>;

/// Integer cell or lattice coordinates.
template <int D>
using IntPoint = std::array<std::int64_t, D>;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A requested size does not fit the index types used by the mesh or node lattice.
class CapacityError : public Error {
public:
  using Error::Error;
};

/// Refinement was requested for an element that is not a leaf.
class InvalidMarkError : public Error {
public:
  using Error::Error;
};

/// An operation was called on input that violates its documented precondition.
class PreconditionError : public Error {
public:
  using Error::Error;
};

/// A point or parameter lies outside the admissible set.
class DomainError : public Error {
public:
  using Error::Error;
};

/// The requested quantity cannot be computed for the given input (e.g. no exact solution).
class UnsupportedError : public Error {
public:
  using Error::Error;
};

/// A linear solve failed inside a higher-level driver.
class SolverError : public Error {
public:
  using Error::Error;
};

constexpr std::int64_t ipow(std::int64_t base, int exp) {
  std::int64_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

inline void check_degree(int k) {
  if (k < 1 || k > 3)
    throw PreconditionError("polynomial degree must be 1, 2 or 3 (got " + std::to_string(k) + ")");
}

} // namespace stgls
