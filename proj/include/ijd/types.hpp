#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ijd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Chart Jacobian lost full column rank at an evaluation point.
struct DegenerateChartError : Error {
  using Error::Error;
};

/// Gauss-Newton chart inversion did not converge within the iteration cap.
struct NoConvergenceError : Error {
  using Error::Error;
};

/// A jump-measure integral failed the shell-decay criterion near zero.
struct NonIntegrableError : Error {
  using Error::Error;
};

/// Event sampling was requested on a region of infinite measure.
struct InfiniteMassError : Error {
  using Error::Error;
};

/// Declared model data is internally inconsistent.
struct ModelError : Error {
  using Error::Error;
};

/// A point left the invertible neighborhood of the active chart.
struct ChartEscapeError : Error {
  using Error::Error;
};

/// An operation requiring the jump decomposition was called without one.
struct MissingDecompositionError : Error {
  using Error::Error;
};

/// Unknown builtin example name.
struct UnknownExampleError : Error {
  using Error::Error;
};

/// Model specification file failed schema validation.
struct SpecError : Error {
  using Error::Error;
};

namespace num {
inline constexpr double eps = 2.220446049250313e-16;
/// Central first-difference step factor, cbrt(eps).
inline const double fd_step = 6.055454452393343e-06;
/// Central second-difference step factor, eps^(1/4).
inline const double fd2_step = 1.220703125e-04;
}  // namespace num

/// FNV-1a 64-bit hash, used for report provenance.
inline std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Deterministic per-path seed derivation (splitmix64 over the pair).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace ijd
