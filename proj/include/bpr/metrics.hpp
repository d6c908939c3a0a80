#pragma once

#include "bpr/common.hpp"
#include "bpr/divergence.hpp"
#include "bpr/fft.hpp"
#include "bpr/stft.hpp"

#include <vector>

namespace bpr {

/// SNR values at or above this are reported as the cap (exact recovery).
inline constexpr Real kSnrCapDb = 140.0;

/// SC(r, x) = || r^(1/d) - |stft(x)| || / || r ||, as conventionally defined.
/// Note the denominator is ||r|| itself, so for d = 2 numerator and
/// denominator are on different scales; reported as-is and flagged in the
/// harness metadata.
inline Real spectral_convergence(const Measurements& r, const TimeSignal& x,
                                 const StftPlan& plan) {
  r.validate();
  if (r.values.rows() != plan.num_bins() || r.values.cols() != plan.num_frames())
    throw InputError("spectral_convergence: measurement shape does not match plan");
  const Real denom = tf_norm(r.values, plan.fft_size());
  if (denom == 0.0) throw MetricError("spectral_convergence: zero measurement norm");
  const TfMatrix X = stft(plan, x);
  const ArrayXXd mag_target = (r.d == 2) ? ArrayXXd(r.values.sqrt()) : r.values;
  const ArrayXXd diff = mag_target - X.h.abs();
  return tf_norm(diff, plan.fft_size()) / denom;
}

struct Alignment {
  Index shift = 0;     // samples the estimate was advanced by (est[i - shift])
  Real scale = 1.0;    // real gain applied after shifting (sign allowed)
  Real correlation = 0.0;
};

struct SnrResult {
  Real snr_db = 0.0;
  Alignment alignment;
};

namespace detail {

/// Dense cross-correlation c[tau] = sum_i ref[i] est[i - tau] for all integer
/// lags, via FFT. Index: lags[tau + (L-1)] for tau in [-(L-1), L-1].
inline std::vector<Real> cross_correlation(const ArrayXd& ref, const ArrayXd& est) {
  const Index L = ref.size();
  const Index p = fft::next_pow2(2 * L - 1);
  fft::Plan plan(p);
  fft::Scratch scratch;
  std::vector<Complex> a(static_cast<std::size_t>(p), Complex(0, 0));
  std::vector<Complex> b(static_cast<std::size_t>(p), Complex(0, 0));
  for (Index i = 0; i < L; ++i) {
    a[static_cast<std::size_t>(i)] = Complex(ref[i], 0);
    b[static_cast<std::size_t>(i)] = Complex(est[i], 0);
  }
  plan.forward(a.data(), scratch);
  plan.forward(b.data(), scratch);
  for (Index i = 0; i < p; ++i) a[static_cast<std::size_t>(i)] *= std::conj(b[static_cast<std::size_t>(i)]);
  plan.inverse(a.data(), scratch);
  std::vector<Real> lags(static_cast<std::size_t>(2 * L - 1));
  for (Index tau = -(L - 1); tau <= L - 1; ++tau) {
    const Index idx = (tau % p + p) % p;
    lags[static_cast<std::size_t>(tau + L - 1)] = a[static_cast<std::size_t>(idx)].real();
  }
  return lags;
}

}  // namespace detail

/// SNR after the estimate is integer-shifted and rescaled to maximally
/// correlate with the reference: the lag search runs over every integer lag
/// (FFT cross-correlation), the winning lag is re-evaluated with exact
/// time-domain sums, and SNR = 20 log10(||ref|| / ||ref - c * shift(est)||),
/// capped at +140 dB. A zero estimate yields the -inf sentinel.
inline SnrResult align_and_snr(const TimeSignal& reference, const TimeSignal& estimate) {
  const Index L = reference.size();
  if (estimate.size() != L) throw InputError("align_and_snr: signals must have equal length");
  const ArrayXd& ref = reference.samples;
  const ArrayXd& est = estimate.samples;
  const Real ref_norm2 = ref.square().sum();
  if (ref_norm2 == 0.0) throw MetricError("align_and_snr: reference is identically zero");
  const Real est_norm2 = est.square().sum();
  if (est_norm2 == 0.0)
    return {-std::numeric_limits<Real>::infinity(), Alignment{0, 0.0, 0.0}};

  const std::vector<Real> corr = detail::cross_correlation(ref, est);

  // Energy of the estimate that survives each shift's truncation:
  // prefix[k] = sum of est[0..k-1]^2.
  ArrayXd prefix(L + 1);
  prefix[0] = 0.0;
  for (Index i = 0; i < L; ++i) prefix[i + 1] = prefix[i] + est[i] * est[i];

  Index best_tau = 0;
  Real best_score = -1.0;
  for (Index tau = -(L - 1); tau <= L - 1; ++tau) {
    // shift(est, tau)[i] = est[i - tau]; overlap is est[max(0,-tau) .. L-1-max(0,tau)]
    const Real n2 = (tau >= 0) ? prefix[L - tau] : prefix[L] - prefix[-tau];
    if (n2 <= est_norm2 * 1e-24) continue;
    const Real c = corr[static_cast<std::size_t>(tau + L - 1)];
    const Real score = c * c / n2;
    if (score > best_score) {
      best_score = score;
      best_tau = tau;
    }
  }

  // Exact re-evaluation at the winning lag.
  const Index tau = best_tau;
  Real dot = 0.0, n2 = 0.0;
  for (Index i = std::max<Index>(0, tau); i < L + std::min<Index>(0, tau); ++i) {
    const Real s = est[i - tau];
    dot += ref[i] * s;
    n2 += s * s;
  }
  if (n2 == 0.0) return {-std::numeric_limits<Real>::infinity(), Alignment{0, 0.0, 0.0}};
  const Real scale = dot / n2;
  Real resid2 = 0.0;
  for (Index i = 0; i < L; ++i) {
    const Index j = i - tau;
    const Real aligned = (j >= 0 && j < L) ? scale * est[j] : 0.0;
    const Real d = ref[i] - aligned;
    resid2 += d * d;
  }
  Alignment al{tau, scale, dot / std::sqrt(ref_norm2 * n2)};
  if (resid2 <= 0.0) return {kSnrCapDb, al};
  const Real snr = 10.0 * std::log10(ref_norm2 / resid2);
  return {std::min(snr, kSnrCapDb), al};
}

/// SNR gain of the final estimate over the initial one, both independently
/// aligned against the reference.
inline Real snr_improvement_db(const TimeSignal& reference, const TimeSignal& initial,
                               const TimeSignal& final_estimate) {
  return align_and_snr(reference, final_estimate).snr_db -
         align_and_snr(reference, initial).snr_db;
}

}  // namespace bpr
