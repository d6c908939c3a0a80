#pragma once

#include "bpr/common.hpp"
#include "bpr/fft.hpp"

#include <memory>

namespace bpr {

// ---------------------------------------------------------------------------
// Windows and duality
// ---------------------------------------------------------------------------

enum class WindowKind { sine_bell, custom };

struct Window {
  ArrayXd coefficients;
  WindowKind kind = WindowKind::custom;

  Index length() const { return coefficients.size(); }
};

/// w(t) = sin(pi*(t+0.5)/T). Self-dual at 50% overlap (H = T/2).
inline Window sine_bell_window(Index frame_length) {
  if (frame_length < 2 || frame_length % 2 != 0)
    throw ConfigError("sine_bell_window: frame length must be even and >= 2");
  Window w;
  w.kind = WindowKind::sine_bell;
  w.coefficients.resize(frame_length);
  for (Index t = 0; t < frame_length; ++t)
    w.coefficients[t] =
        std::sin(kPi * (static_cast<Real>(t) + 0.5) / static_cast<Real>(frame_length));
  return w;
}

inline Window custom_window(ArrayXd coefficients) {
  if (coefficients.size() < 1) throw ConfigError("custom_window: length must be >= 1");
  if (!coefficients.allFinite()) throw ConfigError("custom_window: non-finite coefficient");
  return Window{std::move(coefficients), WindowKind::custom};
}

struct DualityCheck {
  bool is_dual = false;
  Real max_deviation = 0.0;
};

/// Checks sum_n w(l - nH) v(l - nH) == 1 over the interior (every position
/// that sees the full complement of overlapping frames). The sum is
/// H-periodic there, so it suffices to scan one hop of offsets.
inline DualityCheck check_duality(const Window& w, const Window& v, Index hop) {
  if (w.length() != v.length())
    throw ConfigError("check_duality: windows must have the same length");
  if (hop < 1) throw ConfigError("check_duality: hop must be >= 1");
  const Index T = w.length();
  DualityCheck out;
  for (Index offset = 0; offset < hop; ++offset) {
    Real s = 0.0;
    for (Index t = offset; t < T; t += hop) s += w.coefficients[t] * v.coefficients[t];
    out.max_deviation = std::max(out.max_deviation, std::abs(s - 1.0));
  }
  out.is_dual = out.max_deviation <= 1e-10;
  return out;
}

// ---------------------------------------------------------------------------
// Plan
// ---------------------------------------------------------------------------

/// Immutable analysis/synthesis plan. The same window is used on both sides
/// ("self-dual" usage); construction records whether the pair actually
/// satisfies the duality condition at this hop.
///
/// Padding convention: the signal is zero-padded with T-H zeros up front and
/// enough zeros at the tail that every original sample sits in the interior
/// region, giving L = T + (N-1)*H total samples and perfect reconstruction
/// at the borders.
class StftPlan {
 public:
  StftPlan(Window window, Index hop, Index fft_size, Index signal_length)
      : window_(std::move(window)),
        hop_(hop),
        fft_size_(fft_size),
        signal_length_(signal_length),
        fft_(std::make_shared<fft::Plan>(fft_size > 0 ? fft_size : 1)) {
    const Index T = window_.length();
    if (hop_ < 1 || hop_ > T) throw ConfigError("StftPlan: hop must satisfy 1 <= H <= T");
    if (fft_size_ < T) throw ConfigError("StftPlan: fft size must satisfy M >= T");
    if (signal_length_ < 1) throw ConfigError("StftPlan: signal length must be >= 1");
    num_frames_ = (signal_length_ + T - hop_ + hop_ - 1) / hop_;  // ceil((L0+T-H)/H)
    padded_length_ = T + (num_frames_ - 1) * hop_;
    const auto dual = check_duality(window_, window_, hop_);
    self_dual_ = dual.is_dual;
    duality_deviation_ = dual.max_deviation;
  }

  const Window& window() const { return window_; }
  Index frame_length() const { return window_.length(); }
  Index hop() const { return hop_; }
  Index fft_size() const { return fft_size_; }
  Index num_frames() const { return num_frames_; }
  Index signal_length() const { return signal_length_; }
  Index padded_length() const { return padded_length_; }
  /// Number of stored nonnegative-frequency bins, floor(M/2)+1.
  Index num_bins() const { return fft_size_ / 2 + 1; }
  bool self_dual() const { return self_dual_; }
  Real duality_deviation() const { return duality_deviation_; }
  const fft::Plan& fft() const { return *fft_; }

 private:
  Window window_;
  Index hop_;
  Index fft_size_;
  Index signal_length_;
  Index num_frames_ = 0;
  Index padded_length_ = 0;
  bool self_dual_ = false;
  Real duality_deviation_ = 0.0;
  std::shared_ptr<const fft::Plan> fft_;
};

// ---------------------------------------------------------------------------
// Time-frequency matrices (stored as the floor(M/2)+1 nonnegative rows)
// ---------------------------------------------------------------------------

/// Complex time-frequency matrix. Only the nonnegative-frequency rows are
/// stored and processed; the remaining rows of the logical M x N matrix are
/// determined by conjugate symmetry and can be materialized with full().
struct TfMatrix {
  ArrayXXcd h;          // num_bins x num_frames
  Index fft_size = 0;   // M

  Index num_bins() const { return h.rows(); }
  Index num_frames() const { return h.cols(); }
};

inline TfMatrix make_tf_zero(const StftPlan& plan) {
  TfMatrix x;
  x.fft_size = plan.fft_size();
  x.h = ArrayXXcd::Zero(plan.num_bins(), plan.num_frames());
  return x;
}

inline void check_tf_shape(const StftPlan& plan, const TfMatrix& x, const char* who) {
  if (x.fft_size != plan.fft_size() || x.num_bins() != plan.num_bins() ||
      x.num_frames() != plan.num_frames())
    throw InputError(std::string(who) + ": time-frequency matrix does not match plan");
}

/// Per-row multiplicity of the stored bins in the logical full matrix:
/// 1 for DC and (even M) Nyquist, 2 for every other stored row.
inline ArrayXd tf_row_weights(Index fft_size) {
  const Index bins = fft_size / 2 + 1;
  ArrayXd w = ArrayXd::Constant(bins, 2.0);
  w[0] = 1.0;
  if (fft_size % 2 == 0 && bins > 1) w[bins - 1] = 1.0;
  return w;
}

/// Materializes the logical M x N matrix ([X]_{m,n} = conj([X]_{(M-m) mod M, n})).
inline ArrayXXcd tf_full(const TfMatrix& x) {
  const Index M = x.fft_size;
  ArrayXXcd full(M, x.num_frames());
  full.topRows(x.num_bins()) = x.h;
  for (Index m = x.num_bins(); m < M; ++m) full.row(m) = x.h.row(M - m).conjugate();
  return full;
}

/// Frobenius inner product over the logical full matrix, scaled by 1/M so
/// that synthesis is the exact adjoint of analysis (and the transform is an
/// isometry for a self-dual window). Real part returned.
inline Real tf_inner(const TfMatrix& a, const TfMatrix& b) {
  require(a.fft_size == b.fft_size && a.h.rows() == b.h.rows() && a.h.cols() == b.h.cols(),
          "tf_inner: shape mismatch");
  const ArrayXd w = tf_row_weights(a.fft_size);
  const ArrayXXd re = (a.h * b.h.conjugate()).real();
  return (re.colwise() * w).sum() / static_cast<Real>(a.fft_size);
}

inline Real tf_norm(const TfMatrix& a) {
  const ArrayXd w = tf_row_weights(a.fft_size);
  const ArrayXXd sq = a.h.abs2();
  return std::sqrt((sq.colwise() * w).sum() / static_cast<Real>(a.fft_size));
}

/// Same 1/M-weighted Frobenius norm for a real-valued half-spectrum field
/// (measurements, magnitude differences, ...).
inline Real tf_norm(const ArrayXXd& values, Index fft_size) {
  const ArrayXd w = tf_row_weights(fft_size);
  return std::sqrt((values.square().colwise() * w).sum() / static_cast<Real>(fft_size));
}

inline Real tf_weighted_sum(const ArrayXXd& values, Index fft_size) {
  const ArrayXd w = tf_row_weights(fft_size);
  return (values.colwise() * w).sum() / static_cast<Real>(fft_size);
}

// ---------------------------------------------------------------------------
// Border padding
// ---------------------------------------------------------------------------

/// Applies the border zero-padding convention for the plan. Idempotent: a
/// signal that already has the plan's padded length is returned unchanged.
inline TimeSignal pad_signal(const TimeSignal& x, const StftPlan& plan) {
  if (x.size() == plan.padded_length()) return x;
  if (x.size() != plan.signal_length())
    throw InputError("pad_signal: signal length matches neither the plan's raw nor padded length");
  TimeSignal out;
  out.sample_rate = x.sample_rate;
  out.samples = ArrayXd::Zero(plan.padded_length());
  const Index lead = plan.frame_length() - plan.hop();
  out.samples.segment(lead, x.size()) = x.samples;
  return out;
}

/// Drops the border padding again, returning the original-length signal.
inline TimeSignal unpad_signal(const TimeSignal& x, const StftPlan& plan) {
  if (x.size() == plan.signal_length()) return x;
  if (x.size() != plan.padded_length())
    throw InputError("unpad_signal: signal length matches neither the plan's raw nor padded length");
  TimeSignal out;
  out.sample_rate = x.sample_rate;
  out.samples = x.samples.segment(plan.frame_length() - plan.hop(), plan.signal_length());
  return out;
}

// ---------------------------------------------------------------------------
// Analysis / synthesis
// ---------------------------------------------------------------------------

/// [X](m,n) = sum_t x(t + nH) w(t) e^{-i 2 pi m t / M}. The input must
/// already carry the plan's border padding.
inline TfMatrix stft(const StftPlan& plan, const TimeSignal& x) {
  if (x.size() != plan.padded_length())
    throw InputError("stft: signal length does not match plan (pad_signal first)");
  if (!x.samples.allFinite()) throw InputError("stft: non-finite sample");

  const Index T = plan.frame_length();
  const Index M = plan.fft_size();
  const Index N = plan.num_frames();
  const Index H = plan.hop();
  const ArrayXd& w = plan.window().coefficients;

  TfMatrix out;
  out.fft_size = M;
  out.h.resize(plan.num_bins(), N);

  fft::Scratch scratch;
  std::vector<Complex> frame(static_cast<std::size_t>(M));
  for (Index n = 0; n < N; ++n) {
    for (Index t = 0; t < T; ++t)
      frame[static_cast<std::size_t>(t)] = Complex(x.samples[n * H + t] * w[t], 0.0);
    std::fill(frame.begin() + T, frame.end(), Complex(0, 0));
    plan.fft().forward(frame.data(), scratch);
    for (Index m = 0; m < plan.num_bins(); ++m) out.h(m, n) = frame[static_cast<std::size_t>(m)];
  }
  return out;
}

/// Overlap-add synthesis, (1/M) sum_{n,m} c(m,n) v(l-nH) e^{i 2 pi m (l-nH)/M},
/// with the full spectrum reconstituted from the stored rows by conjugate
/// symmetry. The synthesized signal is real; the residual imaginary energy
/// (relative L2) is checked against `imag_tolerance` and optionally reported
/// through `imag_residual`.
inline TimeSignal istft(const StftPlan& plan, const TfMatrix& X, Real* imag_residual = nullptr,
                        Real imag_tolerance = 1e-8) {
  check_tf_shape(plan, X, "istft");
  if (!X.h.allFinite()) throw InputError("istft: non-finite entry");

  const Index T = plan.frame_length();
  const Index M = plan.fft_size();
  const Index N = plan.num_frames();
  const Index H = plan.hop();
  const Index bins = plan.num_bins();
  const ArrayXd& v = plan.window().coefficients;

  ArrayXd out_re = ArrayXd::Zero(plan.padded_length());
  ArrayXd out_im = ArrayXd::Zero(plan.padded_length());

  fft::Scratch scratch;
  std::vector<Complex> col(static_cast<std::size_t>(M));
  for (Index n = 0; n < N; ++n) {
    for (Index m = 0; m < bins; ++m) col[static_cast<std::size_t>(m)] = X.h(m, n);
    for (Index m = bins; m < M; ++m) col[static_cast<std::size_t>(m)] = std::conj(X.h(M - m, n));
    plan.fft().inverse(col.data(), scratch);
    for (Index t = 0; t < T; ++t) {
      const Complex y = col[static_cast<std::size_t>(t)] * v[t];
      out_re[n * H + t] += y.real();
      out_im[n * H + t] += y.imag();
    }
  }

  const Real re_norm = std::sqrt(out_re.square().sum());
  const Real im_norm = std::sqrt(out_im.square().sum());
  const Real residual = im_norm / std::max(re_norm, std::numeric_limits<Real>::min());
  if (imag_residual) *imag_residual = residual;
  if (im_norm > 0 && residual > imag_tolerance)
    throw IntegrityError("istft: imaginary residual " + std::to_string(residual) +
                         " exceeds tolerance (input not frequency-Hermitian?)");

  TimeSignal out;
  out.samples = std::move(out_re);
  return out;
}

}  // namespace bpr
