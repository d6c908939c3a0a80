#pragma once

#include "bpr/common.hpp"
#include "bpr/stft.hpp"

namespace bpr {

// ---------------------------------------------------------------------------
// Divergence family
// ---------------------------------------------------------------------------

enum class Family { quadratic, kl, is, beta };

enum class Direction { right, left };

inline const char* to_string(Direction d) { return d == Direction::right ? "right" : "left"; }

struct DivergenceSpec {
  Family family = Family::quadratic;
  Real beta = 2.0;

  static DivergenceSpec quadratic() { return {Family::quadratic, 2.0}; }
  static DivergenceSpec kl() { return {Family::kl, 1.0}; }
  static DivergenceSpec is() { return {Family::is, 0.0}; }

  /// General beta divergence. beta in {0, 1} is rejected: those limits are
  /// the named IS and KL families and must be selected by name.
  static DivergenceSpec beta_div(Real beta) {
    if (!std::isfinite(beta)) throw ConfigError("beta divergence: beta must be finite");
    if (std::abs(beta) < 1e-9)
      throw ConfigError("beta divergence: beta = 0 is the Itakura-Saito limit; use the IS family");
    if (std::abs(beta - 1.0) < 1e-9)
      throw ConfigError("beta divergence: beta = 1 is the Kullback-Leibler limit; use the KL family");
    return {Family::beta, beta};
  }

  bool operator==(const DivergenceSpec&) const = default;
};

inline const char* family_name(const DivergenceSpec& s) {
  switch (s.family) {
    case Family::quadratic: return "quadratic";
    case Family::kl: return "kl";
    case Family::is: return "is";
    case Family::beta: return "beta";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Generating functions (scalar kernels)
// ---------------------------------------------------------------------------

namespace detail {

/// psi(z) with the continuous extension at z = 0 where it exists.
template <typename Scalar>
Scalar psi(const DivergenceSpec& s, Scalar z) {
  switch (s.family) {
    case Family::quadratic:
      return Scalar(0.5) * z * z;
    case Family::kl:
      return z > Scalar(0) ? z * std::log(z) : Scalar(0);
    case Family::is:
      if (z <= Scalar(0)) throw DomainError("is: psi undefined at z <= 0");
      return -std::log(z);
    case Family::beta: {
      const Scalar b = static_cast<Scalar>(s.beta);
      if (z < Scalar(0)) throw DomainError("beta: psi undefined at z < 0");
      if (z == Scalar(0) && b < Scalar(0)) throw DomainError("beta: psi undefined at z = 0");
      return std::pow(z, b) / (b * (b - 1)) - z / (b - 1) + Scalar(1) / b;
    }
  }
  throw DomainError("psi: unknown family");
}

template <typename Scalar>
Scalar psi_prime(const DivergenceSpec& s, Scalar z) {
  switch (s.family) {
    case Family::quadratic:
      return z;
    case Family::kl:
      if (z <= Scalar(0)) throw DomainError("kl: psi' undefined at z <= 0");
      return Scalar(1) + std::log(z);
    case Family::is:
      if (z <= Scalar(0)) throw DomainError("is: psi' undefined at z <= 0");
      return -Scalar(1) / z;
    case Family::beta: {
      const Scalar b = static_cast<Scalar>(s.beta);
      if (z < Scalar(0) || (z == Scalar(0) && b < Scalar(1)))
        throw DomainError("beta: psi' undefined here");
      return (std::pow(z, b - 1) - Scalar(1)) / (b - 1);
    }
  }
  throw DomainError("psi': unknown family");
}

template <typename Scalar>
Scalar psi_second(const DivergenceSpec& s, Scalar z) {
  switch (s.family) {
    case Family::quadratic:
      return Scalar(1);
    case Family::kl:
      if (z <= Scalar(0)) throw DomainError("kl: psi'' undefined at z <= 0");
      return Scalar(1) / z;
    case Family::is:
      if (z <= Scalar(0)) throw DomainError("is: psi'' undefined at z <= 0");
      return Scalar(1) / (z * z);
    case Family::beta: {
      const Scalar b = static_cast<Scalar>(s.beta);
      if (z < Scalar(0) || (z == Scalar(0) && b < Scalar(2)))
        throw DomainError("beta: psi'' undefined here");
      return std::pow(z, b - 2);
    }
  }
  throw DomainError("psi'': unknown family");
}

/// Entrywise divergence term d(y|z) = psi(y) - psi(z) - psi'(z)(y - z),
/// in simplified per-family form. Assumes z > 0 where required.
template <typename Scalar>
Scalar bregman_term(const DivergenceSpec& s, Scalar y, Scalar z) {
  switch (s.family) {
    case Family::quadratic: {
      const Scalar d = y - z;
      return Scalar(0.5) * d * d;
    }
    case Family::kl:
      return (y > Scalar(0) ? y * (std::log(y) - std::log(z)) : Scalar(0)) - (y - z);
    case Family::is: {
      const Scalar q = y / z;
      return q - std::log(q) - Scalar(1);  // +inf at y = 0, as it should be
    }
    case Family::beta: {
      const Scalar b = static_cast<Scalar>(s.beta);
      return std::pow(y, b) / (b * (b - 1)) + std::pow(z, b) / b -
             y * std::pow(z, b - 1) / (b - 1);
    }
  }
  throw DomainError("bregman_term: unknown family");
}

/// True when evaluating the family at (or near) zero is undefined, so the
/// measurement slot has to be floored.
inline bool needs_positive_arguments(const DivergenceSpec& s) {
  switch (s.family) {
    case Family::quadratic: return false;
    case Family::kl: return true;
    case Family::is: return true;
    case Family::beta: return s.beta < 1.0;
  }
  return false;
}

}  // namespace detail

struct GeneratorValues {
  Real psi;
  Real psi_prime;
  Real psi_second;
};

/// The (psi, psi', psi'') triple at z. Errors when any of the three diverges
/// there (a z = 0 reaching this point means a missing magnitude floor
/// upstream).
inline GeneratorValues generator_eval(const DivergenceSpec& s, Real z) {
  if (!(z >= 0.0)) throw DomainError("generator_eval: z must be nonnegative");
  if (z == 0.0) {
    const bool diverges = s.family == Family::kl || s.family == Family::is ||
                          (s.family == Family::beta && s.beta < 2.0);
    if (diverges)
      throw DomainError("generator_eval: derivative diverges at z = 0 (missing epsilon floor?)");
  }
  return {detail::psi(s, z), detail::psi_prime(s, z), detail::psi_second(s, z)};
}

/// D_psi(y|z) = sum_k psi(y_k) - psi(z_k) - psi'(z_k)(y_k - z_k).
/// y must be nonnegative, z positive wherever the family requires it.
template <typename DerivedY, typename DerivedZ>
Real bregman_div(const DivergenceSpec& s, const Eigen::ArrayBase<DerivedY>& y,
                 const Eigen::ArrayBase<DerivedZ>& z) {
  if (y.rows() != z.rows() || y.cols() != z.cols())
    throw InputError("bregman_div: shape mismatch");
  Real acc = 0.0;
  for (Index j = 0; j < y.cols(); ++j)
    for (Index i = 0; i < y.rows(); ++i) {
      const Real yk = y(i, j);
      const Real zk = z(i, j);
      if (!(yk >= 0.0) || !(zk >= 0.0)) throw DomainError("bregman_div: negative entry");
      if (zk == 0.0 && s.family != Family::quadratic &&
          !(s.family == Family::beta && s.beta >= 2.0))
        throw DomainError("bregman_div: z = 0 requires an epsilon floor for this family");
      acc += detail::bregman_term(s, yk, zk);
    }
  return std::max(acc, 0.0);  // guard tiny negative rounding
}

// ---------------------------------------------------------------------------
// Phase-retrieval objective
// ---------------------------------------------------------------------------

/// Right PR minimizes D(r | |Ax|^d); left PR minimizes D(|Ax|^d | r).
struct ProblemSpec {
  DivergenceSpec divergence;
  Direction direction = Direction::right;
  int d = 1;
  Real epsilon = kDefaultEpsilon;

  void validate() const {
    if (d != 1 && d != 2) throw ConfigError("ProblemSpec: d must be 1 or 2");
    if (!(epsilon > 0.0)) throw ConfigError("ProblemSpec: epsilon must be positive");
  }
};

/// Nonnegative measurements r ~ |Ax*|^d together with the power they were
/// taken at.
struct Measurements {
  ArrayXXd values;
  int d = 1;

  void validate() const {
    if (!values.allFinite() || (values < 0.0).any())
      throw DomainError("Measurements: entries must be finite and nonnegative");
    if (d != 1 && d != 2) throw ConfigError("Measurements: d must be 1 or 2");
  }
};

namespace detail {

inline ArrayXXd floored_power(const ArrayXXcd& x, Real eps, int d) {
  ArrayXXd a = x.abs().max(eps);
  return d == 2 ? ArrayXXd(a.square()) : a;
}

/// Measurements as used inside objectives: floored at eps^d (the magnitude-
/// domain floor, re-powered) for families that need strictly positive
/// arguments; untouched otherwise.
inline ArrayXXd floored_measurements(const ProblemSpec& p, const Measurements& r) {
  if (!needs_positive_arguments(p.divergence)) return r.values;
  const Real floor = std::pow(p.epsilon, p.d);
  return r.values.max(floor);
}

template <typename Func>
Real weighted_term_sum(const ArrayXXd& y, const ArrayXXd& z, Index fft_size, Func term) {
  const ArrayXd w = tf_row_weights(fft_size);
  Real acc = 0.0;
  for (Index j = 0; j < y.cols(); ++j)
    for (Index i = 0; i < y.rows(); ++i) acc += w[i] * term(y(i, j), z(i, j));
  return acc / static_cast<Real>(fft_size);
}

}  // namespace detail

/// Number of measurement entries that sit below the positivity floor and get
/// clamped when this problem's formulas evaluate at r.
inline long count_floored(const ProblemSpec& p, const Measurements& r) {
  if (!detail::needs_positive_arguments(p.divergence)) return 0;
  const Real floor = std::pow(p.epsilon, p.d);
  return (r.values < floor).count();
}

/// Objective value J(x) evaluated at X = stft(x). Magnitudes are floored at
/// epsilon before powering; the divergence sum runs over the logical full
/// M x N grid and carries the transform's 1/M weight, which makes
/// objective_grad below its exact gradient.
inline Real objective_value(const ProblemSpec& p, const Measurements& r, const TfMatrix& X) {
  p.validate();
  if (r.values.rows() != X.h.rows() || r.values.cols() != X.h.cols())
    throw InputError("objective_value: measurement shape does not match spectrum");
  if (r.d != p.d) throw InputError("objective_value: measurement power differs from problem d");
  const ArrayXXd zd = detail::floored_power(X.h, p.epsilon, p.d);
  const ArrayXXd rf = detail::floored_measurements(p, r);
  const auto term = [&](Real a, Real b) { return detail::bregman_term(p.divergence, a, b); };
  const Real value = (p.direction == Direction::right)
                         ? detail::weighted_term_sum(rf, zd, X.fft_size, term)
                         : detail::weighted_term_sum(zd, rf, X.fft_size, term);
  return std::max(value, 0.0);
}

/// Overload taking the time-domain iterate (must carry the plan's padding).
inline Real objective_value(const ProblemSpec& p, const Measurements& r, const TimeSignal& x,
                            const StftPlan& plan) {
  return objective_value(p, r, stft(plan, x));
}

/// Gradient evaluated from a precomputed spectrum X = stft(x):
///
///   g = d * Re{ iSTFT( X |X|^(d-2) Z ) },   with a = max(|X|, eps) and
///   Z = psi''(a^d) (a^d - r)   for right PR,
///   Z = psi'(a^d) - psi'(r)    for left PR.
///
/// This is the exact real gradient of the 1/M-weighted objective; the
/// classical Wirtinger-gradient factor 2 is already included, so with the
/// quadratic loss, d = 1 and unit step the update x - g reproduces one
/// Griffin-Lim iteration.
inline ArrayXd objective_grad_tf(const ProblemSpec& p, const Measurements& r, const TfMatrix& X,
                                 const StftPlan& plan, Real* imag_residual = nullptr) {
  p.validate();
  check_tf_shape(plan, X, "objective_grad");
  if (r.values.rows() != X.h.rows() || r.values.cols() != X.h.cols())
    throw InputError("objective_grad: measurement shape does not match plan");
  if (r.d != p.d) throw InputError("objective_grad: measurement power differs from problem d");

  const ArrayXXd a = X.h.abs().max(p.epsilon);
  const ArrayXXd zd = (p.d == 2) ? ArrayXXd(a.square()) : a;
  const ArrayXXd rf = detail::floored_measurements(p, r);

  ArrayXXd z_term(zd.rows(), zd.cols());
  const DivergenceSpec& s = p.divergence;
  if (p.direction == Direction::right) {
    for (Index j = 0; j < zd.cols(); ++j)
      for (Index i = 0; i < zd.rows(); ++i)
        z_term(i, j) = detail::psi_second(s, zd(i, j)) * (zd(i, j) - rf(i, j));
  } else {
    for (Index j = 0; j < zd.cols(); ++j)
      for (Index i = 0; i < zd.rows(); ++i)
        z_term(i, j) = detail::psi_prime(s, zd(i, j)) - detail::psi_prime(s, rf(i, j));
  }

  TfMatrix G;
  G.fft_size = X.fft_size;
  G.h = (p.d == 2) ? ArrayXXcd(X.h * z_term) : ArrayXXcd(X.h * (z_term / a));
  TimeSignal g = istft(plan, G, imag_residual);
  return static_cast<Real>(p.d) * g.samples;
}

/// Gradient of objective_value with respect to the (real, padded) signal.
inline ArrayXd objective_grad(const ProblemSpec& p, const Measurements& r, const TimeSignal& x,
                              const StftPlan& plan, Real* imag_residual = nullptr) {
  return objective_grad_tf(p, r, stft(plan, x), plan, imag_residual);
}

}  // namespace bpr
