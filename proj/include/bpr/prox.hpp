#pragma once

#include "bpr/common.hpp"
#include "bpr/divergence.hpp"

namespace bpr {

// ---------------------------------------------------------------------------
// Lambert W (principal branch, nonnegative arguments)
// ---------------------------------------------------------------------------

namespace detail {

/// Halley iteration for w e^w = z, z >= 0 assumed representable.
template <typename Scalar>
Scalar lambert_w0_impl(Scalar z) {
  if (z == Scalar(0)) return Scalar(0);
  const Scalar e = std::exp(Scalar(1));
  Scalar w = (z < e) ? std::log1p(z) : std::log(z) - std::log(std::log(z));
  const Scalar tol = Scalar(1e-13) * (Scalar(1) + z);
  for (int it = 0; it < 50; ++it) {
    const Scalar ew = std::exp(w);
    const Scalar f = w * ew - z;
    if (std::abs(f) <= tol) break;
    const Scalar df = ew * (w + Scalar(1));
    const Scalar d2f = ew * (w + Scalar(2));
    w -= f / (df - f * d2f / (Scalar(2) * df));
  }
  return w;
}

/// Solves w + log w = log_z (i.e. W(e^{log_z})) for large log_z, where
/// forming e^{log_z} itself would overflow.
template <typename Scalar>
Scalar lambert_w0_from_log_impl(Scalar log_z) {
  Scalar w = log_z - std::log(log_z);
  for (int it = 0; it < 50; ++it) {
    const Scalar f = w + std::log(w) - log_z;
    if (std::abs(f) <= Scalar(1e-14) * (Scalar(1) + std::abs(log_z))) break;
    w -= f * w / (w + Scalar(1));
  }
  return w;
}

}  // namespace detail

/// W(z) for z >= 0, satisfying |W e^W - z| <= 1e-12 (1 + z).
inline Real lambert_w0(Real z) {
  if (!(z >= 0.0)) throw DomainError("lambert_w0: argument must be nonnegative");
  if (z > 1e300) return detail::lambert_w0_from_log_impl(std::log(z));
  return detail::lambert_w0_impl(z);
}

/// W(e^L) without forming e^L; valid for L >= 1.
inline Real lambert_w0_from_log(Real log_z) {
  if (!(log_z >= 1.0)) throw DomainError("lambert_w0_from_log: log argument must be >= 1");
  return detail::lambert_w0_from_log_impl(log_z);
}

// ---------------------------------------------------------------------------
// Proximal operators of the closed-form divergences
// ---------------------------------------------------------------------------

/// The four forms with known closed-form prox. "left"/"right" refers to the
/// slot the prox variable occupies in the divergence: kl_left is the prox of
/// u -> D_KL(u | r), kl_right of u -> D_KL(r | u).
enum class ProxForm { quadratic, kl_right, kl_left, is_left };

struct ProxSpec {
  ProxForm form = ProxForm::quadratic;
  Real rho = 1.0;

  /// Only {quadratic (either direction), KL right, KL left, IS left} exist in
  /// closed form; anything else is refused here so that an unsupported pair
  /// can never be constructed.
  static ProxSpec make(const DivergenceSpec& divergence, Direction direction, Real rho) {
    if (!(rho > 0.0)) throw ConfigError("ProxSpec: rho must be positive");
    switch (divergence.family) {
      case Family::quadratic:
        return {ProxForm::quadratic, rho};
      case Family::kl:
        return {direction == Direction::right ? ProxForm::kl_right : ProxForm::kl_left, rho};
      case Family::is:
        if (direction == Direction::left) return {ProxForm::is_left, rho};
        throw UnsupportedError("prox: no closed form for the IS divergence in its second slot");
      case Family::beta:
        throw UnsupportedError("prox: no closed form for the general beta divergence");
    }
    throw UnsupportedError("prox: unknown family");
  }
};

namespace detail {

template <typename Scalar>
Scalar prox_quadratic(Scalar rho, Scalar r, Scalar y) {
  return std::max(Scalar(0), (rho * y + r) / (rho + Scalar(1)));
}

/// Positive root of rho u^2 + (1 - rho y) u - r = 0 (stationarity of
/// D_KL(r|u) + rho/2 (u-y)^2), evaluated in the cancellation-free form.
template <typename Scalar>
Scalar prox_kl_right(Scalar rho, Scalar r, Scalar y) {
  const Scalar b = Scalar(1) - rho * y;
  const Scalar disc = std::sqrt(b * b + Scalar(4) * rho * r);
  return b > Scalar(0) ? (Scalar(2) * r) / (b + disc) : (disc - b) / (Scalar(2) * rho);
}

template <typename Scalar>
Scalar prox_kl_left(Scalar rho, Scalar r, Scalar y) {
  if (r == Scalar(0)) return Scalar(0);
  const Scalar log_arg = std::log(rho) + std::log(r) + rho * y;
  if (log_arg > Scalar(690)) return lambert_w0_from_log_impl(log_arg) / rho;
  return lambert_w0_impl(rho * r * std::exp(rho * y)) / rho;
}

/// Positive root of rho u^2 + (1/r - rho y) u - 1 = 0.
template <typename Scalar>
Scalar prox_is_left(Scalar rho, Scalar r, Scalar y) {
  const Scalar b = Scalar(1) / r - rho * y;
  const Scalar disc = std::sqrt(b * b + Scalar(4) * rho);
  return b > Scalar(0) ? Scalar(2) / (b + disc) : (disc - b) / (Scalar(2) * rho);
}

}  // namespace detail

/// Entrywise minimizer of D(...) + (rho/2)(u - y)^2 for the spec's form.
/// r must be nonnegative (it is floored at eps for the IS-left form, whose
/// expression divides by r); outputs are always nonnegative, including for
/// negative y.
template <typename DerivedR, typename DerivedY>
ArrayXXd prox_div(const ProxSpec& spec, const Eigen::ArrayBase<DerivedR>& r,
                  const Eigen::ArrayBase<DerivedY>& y, Real eps = kDefaultEpsilon) {
  if (r.rows() != y.rows() || r.cols() != y.cols()) throw InputError("prox_div: shape mismatch");
  ArrayXXd out(r.rows(), r.cols());
  const Real rho = spec.rho;
  for (Index j = 0; j < r.cols(); ++j)
    for (Index i = 0; i < r.rows(); ++i) {
      const Real rk = r(i, j);
      const Real yk = y(i, j);
      if (!(rk >= 0.0) || !std::isfinite(rk) || !std::isfinite(yk))
        throw DomainError("prox_div: invalid entry");
      switch (spec.form) {
        case ProxForm::quadratic: out(i, j) = detail::prox_quadratic(rho, rk, yk); break;
        case ProxForm::kl_right: out(i, j) = detail::prox_kl_right(rho, rk, yk); break;
        case ProxForm::kl_left: out(i, j) = detail::prox_kl_left(rho, rk, yk); break;
        case ProxForm::is_left: out(i, j) = detail::prox_is_left(rho, std::max(rk, eps), yk); break;
      }
    }
  return out;
}

}  // namespace bpr
