#pragma once

#include "bpr/common.hpp"

#include <vector>

namespace bpr::fft {

inline bool is_pow2(Index n) { return n > 0 && (n & (n - 1)) == 0; }

inline Index next_pow2(Index n) {
  Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace detail {

/// Iterative radix-2 Cooley-Tukey on a power-of-two buffer.
/// `tw` holds e^{-2*pi*i*k/n} for k < n/2; pass `inverse` to conjugate.
inline void radix2_inplace(Complex* a, Index n, const std::vector<Index>& bitrev,
                           const std::vector<Complex>& tw, bool inverse) {
  for (Index i = 0; i < n; ++i) {
    const Index j = bitrev[i];
    if (j > i) std::swap(a[i], a[j]);
  }
  for (Index len = 2; len <= n; len <<= 1) {
    const Index half = len >> 1;
    const Index step = n / len;
    for (Index start = 0; start < n; start += len) {
      for (Index k = 0; k < half; ++k) {
        Complex w = tw[k * step];
        if (inverse) w = std::conj(w);
        const Complex u = a[start + k];
        const Complex v = a[start + k + half] * w;
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
    }
  }
}

}  // namespace detail

struct Scratch;

/// Precomputed state for a fixed-size complex DFT. Power-of-two sizes run the
/// radix-2 kernel directly; other sizes go through Bluestein's chirp
/// transform on an embedded power-of-two plan. The plan is immutable after
/// construction and safe to share across threads; per-call workspace lives in
/// a caller-owned Scratch.
class Plan {
 public:
  explicit Plan(Index n) : n_(n) {
    if (n <= 0) throw ConfigError("fft: size must be positive");
    if (is_pow2(n_)) {
      init_pow2_tables(n_);
    } else {
      // Bluestein: chirp a_k = e^{-i*pi*k^2/n}; convolve with its conjugate.
      conv_n_ = next_pow2(2 * n_ - 1);
      init_pow2_tables(conv_n_);
      chirp_.resize(n_);
      for (Index k = 0; k < n_; ++k) {
        // Reduce k^2 mod 2n before scaling to keep the angle accurate.
        const Index k2 = (k * k) % (2 * n_);
        const Real ang = -kPi * static_cast<Real>(k2) / static_cast<Real>(n_);
        chirp_[k] = Complex(std::cos(ang), std::sin(ang));
      }
      chirp_fft_.assign(conv_n_, Complex(0, 0));
      chirp_fft_[0] = std::conj(chirp_[0]);
      for (Index k = 1; k < n_; ++k) {
        chirp_fft_[k] = std::conj(chirp_[k]);
        chirp_fft_[conv_n_ - k] = std::conj(chirp_[k]);
      }
      detail::radix2_inplace(chirp_fft_.data(), conv_n_, bitrev_, twiddle_, false);
    }
  }

  Index size() const { return n_; }

  void forward(Complex* data, Scratch& scratch) const { transform(data, scratch, false); }
  void inverse(Complex* data, Scratch& scratch) const {
    transform(data, scratch, true);
    const Real s = Real(1) / static_cast<Real>(n_);
    for (Index i = 0; i < n_; ++i) data[i] *= s;
  }

 private:
  friend struct Scratch;

  void init_pow2_tables(Index n) {
    twiddle_.resize(n / 2);
    for (Index k = 0; k < n / 2; ++k) {
      const Real ang = -2.0 * kPi * static_cast<Real>(k) / static_cast<Real>(n);
      twiddle_[k] = Complex(std::cos(ang), std::sin(ang));
    }
    bitrev_.assign(n, 0);
    Index bits = 0;
    while ((Index(1) << bits) < n) ++bits;
    for (Index i = 0; i < n; ++i) {
      Index r = 0;
      for (Index b = 0; b < bits; ++b)
        if (i & (Index(1) << b)) r |= Index(1) << (bits - 1 - b);
      bitrev_[i] = r;
    }
  }

  void transform(Complex* data, Scratch& scratch, bool inverse) const;

  Index n_;
  Index conv_n_ = 0;  // nonzero only on the Bluestein path
  std::vector<Complex> twiddle_;
  std::vector<Index> bitrev_;
  std::vector<Complex> chirp_;
  std::vector<Complex> chirp_fft_;
};

/// Per-call workspace; reusable across calls on the same plan.
struct Scratch {
  std::vector<Complex> buf;

  void ensure(const Plan& plan) {
    const std::size_t need = static_cast<std::size_t>(plan.conv_n_ ? plan.conv_n_ : 0);
    if (buf.size() < need) buf.resize(need);
  }
};

inline void Plan::transform(Complex* data, Scratch& scratch, bool inverse) const {
  if (conv_n_ == 0) {
    detail::radix2_inplace(data, n_, bitrev_, twiddle_, inverse);
    return;
  }
  // Bluestein path. An inverse transform of x equals the conjugate of the
  // forward transform of conj(x); the caller applies the 1/n factor.
  scratch.ensure(*this);
  Complex* work = scratch.buf.data();
  for (Index k = 0; k < n_; ++k) {
    const Complex x = inverse ? std::conj(data[k]) : data[k];
    work[k] = x * chirp_[k];
  }
  std::fill(work + n_, work + conv_n_, Complex(0, 0));
  detail::radix2_inplace(work, conv_n_, bitrev_, twiddle_, false);
  for (Index k = 0; k < conv_n_; ++k) work[k] *= chirp_fft_[k];
  detail::radix2_inplace(work, conv_n_, bitrev_, twiddle_, true);
  const Real s = Real(1) / static_cast<Real>(conv_n_);
  for (Index k = 0; k < n_; ++k) {
    Complex y = work[k] * s * chirp_[k];
    data[k] = inverse ? std::conj(y) : y;
  }
}

}  // namespace bpr::fft
