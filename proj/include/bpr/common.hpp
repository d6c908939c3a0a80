#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace bpr {

using Real = double;
using Complex = std::complex<Real>;

using Eigen::ArrayXd;
using Eigen::ArrayXcd;
using Eigen::ArrayXXcd;
using Eigen::ArrayXXd;
using Eigen::Index;

inline constexpr Real kPi = 3.141592653589793238462643383279502884;

/// Default floor applied to time-frequency magnitudes before powering,
/// so that divergences and gradients stay finite at silent bins.
inline constexpr Real kDefaultEpsilon = 1e-8;

// ---------------------------------------------------------------------------
// Error taxonomy
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A parameter combination that can never be valid (window length, beta, ...).
struct ConfigError : Error {
  using Error::Error;
};

/// Runtime inputs that do not match the configured shapes/lengths.
struct InputError : Error {
  using Error::Error;
};

/// A value outside the mathematical domain of the requested operation.
struct DomainError : Error {
  using Error::Error;
};

/// A (family, direction, d) combination with no supported implementation.
struct UnsupportedError : Error {
  using Error::Error;
};

/// A numeric self-check failed (e.g. imaginary residual above tolerance).
struct IntegrityError : Error {
  using Error::Error;
};

/// A metric is undefined for the given inputs (e.g. zero reference energy).
struct MetricError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Core signal type
// ---------------------------------------------------------------------------

struct TimeSignal {
  ArrayXd samples;
  int sample_rate = 22050;

  Index size() const { return samples.size(); }
};

inline void require(bool cond, const char* msg) {
  if (!cond) throw InputError(msg);
}

// ---------------------------------------------------------------------------
// Deterministic random number generation
// ---------------------------------------------------------------------------

/// splitmix64 step, used both as a generator and to derive stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// FNV-1a over an arbitrary byte string; used for stream derivation and
/// for hashing shared initializations in reports.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(s.data(), s.size(), h);
}

/// Seedable generator with explicit, portable output mapping.
/// Distinct logical streams are derived by mixing tag strings into the seed,
/// so adding a consumer never perturbs the draws of existing ones.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ^ 0x2545f4914f6cdd1dULL) {
    // Warm up so that near-zero seeds decorrelate immediately.
    for (int i = 0; i < 4; ++i) splitmix64(state_);
  }

  static Rng for_stream(std::uint64_t seed, const std::string& tag) {
    return Rng(seed ^ fnv1a(tag));
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  /// Uniform on [0, 1) with 53 random bits.
  Real uniform() { return static_cast<Real>(next_u64() >> 11) * 0x1.0p-53; }

  Real uniform(Real lo, Real hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (no stdlib distribution, so the stream
  /// is identical across standard libraries).
  Real gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    Real u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const Real u2 = uniform();
    const Real mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * kPi * u2);
    have_spare_ = true;
    return mag * std::cos(2.0 * kPi * u2);
  }

  ArrayXd gaussian_vector(Index n) {
    ArrayXd out(n);
    for (Index i = 0; i < n; ++i) out[i] = gaussian();
    return out;
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  Real spare_ = 0.0;
};

}  // namespace bpr
