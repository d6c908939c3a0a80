#include "bpr/stft.hpp"

#include <doctest.h>

using namespace bpr;

namespace {

TimeSignal random_signal(Index n, Rng& rng, int rate = 22050) {
  TimeSignal x;
  x.sample_rate = rate;
  x.samples = rng.gaussian_vector(n);
  return x;
}

Real rel_err(const ArrayXd& a, const ArrayXd& b) {
  return std::sqrt((a - b).square().sum() / std::max(b.square().sum(), 1e-300));
}

}  // namespace

TEST_CASE("sine bell window values and validation") {
  const Window w = sine_bell_window(4);
  // Direct evaluation of sin(pi*(t+0.5)/4).
  CHECK(w.coefficients[0] == doctest::Approx(0.3826834323650898).epsilon(1e-14));
  CHECK(w.coefficients[1] == doctest::Approx(0.9238795325112867).epsilon(1e-14));
  CHECK(w.coefficients[2] == doctest::Approx(0.9238795325112867).epsilon(1e-14));
  CHECK(w.coefficients[3] == doctest::Approx(0.3826834323650898).epsilon(1e-14));
  CHECK(sine_bell_window(1024).length() == 1024);

  CHECK_THROWS_AS(sine_bell_window(5), ConfigError);
  CHECK_THROWS_AS(sine_bell_window(0), ConfigError);
  CHECK_THROWS_AS(sine_bell_window(-2), ConfigError);
}

TEST_CASE("sine bell is self-dual at 50% overlap for any even length") {
  for (Index T : {2, 4, 16, 1024}) {
    const Window w = sine_bell_window(T);
    const auto check = check_duality(w, w, T / 2);
    CAPTURE(T);
    CHECK(check.is_dual);
    CHECK(check.max_deviation <= 1e-12);
  }
}

TEST_CASE("duality of rectangular windows") {
  Window ones = custom_window(ArrayXd::Ones(8));
  CHECK(check_duality(ones, ones, 8).is_dual);          // one term per position
  const auto half = check_duality(ones, ones, 4);       // two overlapping unit terms
  CHECK_FALSE(half.is_dual);
  CHECK(half.max_deviation == doctest::Approx(1.0));
  CHECK_THROWS_AS(check_duality(ones, custom_window(ArrayXd::Ones(4)), 2), ConfigError);
  CHECK_THROWS_AS(check_duality(ones, ones, 0), ConfigError);
}

TEST_CASE("plan geometry follows the border padding convention") {
  // 2 s at 22050 Hz with T=1024, H=512.
  StftPlan plan(sine_bell_window(1024), 512, 1024, 44100);
  CHECK(plan.num_frames() == 88);
  CHECK(plan.padded_length() == 1024 + (plan.num_frames() - 1) * 512);
  CHECK(plan.num_bins() == 513);
  CHECK(plan.self_dual());

  CHECK_THROWS_AS(StftPlan(sine_bell_window(1024), 2048, 1024, 44100), ConfigError);  // H > T
  CHECK_THROWS_AS(StftPlan(sine_bell_window(1024), 512, 512, 44100), ConfigError);    // M < T
  CHECK_THROWS_AS(StftPlan(sine_bell_window(1024), 0, 1024, 44100), ConfigError);
}

TEST_CASE("pad is idempotent and unpad inverts it") {
  StftPlan plan(sine_bell_window(16), 8, 16, 100);
  Rng rng(11);
  TimeSignal x = random_signal(100, rng);
  TimeSignal p1 = pad_signal(x, plan);
  CHECK(p1.size() == plan.padded_length());
  CHECK((p1.samples.head(8) == 0.0).all());
  TimeSignal p2 = pad_signal(p1, plan);
  CHECK((p2.samples == p1.samples).all());
  TimeSignal u = unpad_signal(p1, plan);
  CHECK((u.samples == x.samples).all());
  TimeSignal bad = random_signal(57, rng);
  CHECK_THROWS_AS(pad_signal(bad, plan), InputError);
}

TEST_CASE("stft of zero is zero; length mismatches are rejected") {
  StftPlan plan(sine_bell_window(16), 8, 16, 64);
  TimeSignal zero;
  zero.samples = ArrayXd::Zero(plan.padded_length());
  const TfMatrix X = stft(plan, zero);
  CHECK((X.h.abs() == 0.0).all());
  TimeSignal wrong;
  wrong.samples = ArrayXd::Zero(plan.padded_length() + 1);
  CHECK_THROWS_AS(stft(plan, wrong), InputError);

  const TimeSignal back = istft(plan, X);
  CHECK((back.samples == 0.0).all());
}

TEST_CASE("unit impulse through a single rectangular frame gives a row of ones") {
  // H = T makes a signal of length T a single frame with no border padding.
  const Index T = 8;
  StftPlan plan(custom_window(ArrayXd::Ones(T)), T, T, T);
  CHECK(plan.num_frames() == 1);
  CHECK(plan.padded_length() == T);
  TimeSignal impulse;
  impulse.samples = ArrayXd::Zero(T);
  impulse.samples[0] = 1.0;
  const TfMatrix X = stft(plan, impulse);
  const ArrayXXcd full = tf_full(X);
  CHECK(full.rows() == T);
  for (Index m = 0; m < T; ++m) {
    CHECK(full(m, 0).real() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(std::abs(full(m, 0).imag()) < 1e-13);
  }
}

TEST_CASE("round trip, Parseval and linearity on random signals") {
  StftPlan plan(sine_bell_window(64), 32, 64, 500);
  Rng rng(42);
  for (int rep = 0; rep < 20; ++rep) {
    TimeSignal x = pad_signal(random_signal(500, rng), plan);
    const TfMatrix X = stft(plan, x);
    Real residual = 0;
    const TimeSignal back = istft(plan, X, &residual);
    CHECK(rel_err(back.samples, x.samples) <= 1e-10);
    CHECK(residual <= 1e-10);

    // Parseval frame: the 1/M-weighted norm equals the signal norm.
    const Real nx = std::sqrt(x.samples.square().sum());
    CHECK(tf_norm(X) == doctest::Approx(nx).epsilon(1e-10));
  }

  TimeSignal x = pad_signal(random_signal(500, rng), plan);
  TimeSignal y = pad_signal(random_signal(500, rng), plan);
  const Real a = -0.7, b = 2.3;
  TimeSignal mix;
  mix.samples = a * x.samples + b * y.samples;
  const TfMatrix lhs = stft(plan, mix);
  const ArrayXXcd rhs = a * stft(plan, x).h + b * stft(plan, y).h;
  const Real num = std::sqrt((lhs.h - rhs).abs2().sum());
  const Real den = std::sqrt(rhs.abs2().sum());
  CHECK(num / den <= 1e-12);
}

TEST_CASE("stft of a real signal is frequency-Hermitian on the full grid") {
  StftPlan plan(sine_bell_window(32), 16, 32, 200);
  Rng rng(5);
  const TimeSignal x = pad_signal(random_signal(200, rng), plan);
  const ArrayXXcd full = tf_full(stft(plan, x));
  const Index M = full.rows();
  Real worst = 0;
  Real scale = full.abs().maxCoeff();
  for (Index n = 0; n < full.cols(); ++n)
    for (Index m = 0; m < M; ++m) {
      const Complex mirror = std::conj(full((M - m) % M, n));
      worst = std::max(worst, std::abs(full(m, n) - mirror));
    }
  CHECK(worst / scale <= 1e-12);
}

TEST_CASE("istft of a random Hermitian matrix is real and adjoint to stft") {
  StftPlan plan(sine_bell_window(32), 16, 32, 200);
  Rng rng(9);

  // Construct a random frequency-Hermitian matrix in half-spectrum storage:
  // free complex interior rows, real DC/Nyquist rows.
  TfMatrix Y = make_tf_zero(plan);
  for (Index n = 0; n < Y.num_frames(); ++n)
    for (Index m = 0; m < Y.num_bins(); ++m) {
      const bool self_conj = (m == 0) || (m == Y.num_bins() - 1);
      Y.h(m, n) = self_conj ? Complex(rng.uniform(-1, 1), 0.0)
                            : Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    }

  Real residual = 1;
  const TimeSignal y = istft(plan, Y, &residual);
  CHECK(residual <= 1e-10);

  const TimeSignal x = pad_signal(random_signal(200, rng), plan);
  const TfMatrix X = stft(plan, x);
  const Real lhs = tf_inner(X, Y);
  const Real rhs = (x.samples * y.samples).sum();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("istft rejects non-Hermitian DC rows via the integrity check") {
  StftPlan plan(sine_bell_window(16), 8, 16, 64);
  TfMatrix Y = make_tf_zero(plan);
  Y.h(0, 0) = Complex(0.0, 1.0);  // imaginary DC cannot come from a real signal
  CHECK_THROWS_AS(istft(plan, Y), IntegrityError);

  TfMatrix wrong = make_tf_zero(plan);
  wrong.h.conservativeResize(wrong.h.rows(), wrong.h.cols() + 1);
  CHECK_THROWS_AS(istft(plan, wrong), InputError);
}
