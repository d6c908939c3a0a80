#include "bpr/harness/synth.hpp"

namespace bpr::harness {

SynthKind parse_synth_kind(const std::string& name) {
  if (name == "multisine") return SynthKind::multisine;
  if (name == "chirp") return SynthKind::chirp;
  if (name == "noise-burst" || name == "noise_burst") return SynthKind::noise_burst;
  throw ConfigError("unknown synthetic signal kind: " + name +
                    " (expected multisine, chirp or noise-burst)");
}

const char* to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::multisine: return "multisine";
    case SynthKind::chirp: return "chirp";
    case SynthKind::noise_burst: return "noise-burst";
  }
  return "?";
}

namespace {

// Recorded audio always carries a broadband noise floor; without one, the
// exactly-silent bins of pure synthetic tones behave unlike any real
// spectrogram (divergences with z^(beta-2) weights blow up there).
ArrayXd noise_bed(Index n, Real level, Rng& rng) {
  ArrayXd bed(n);
  for (Index i = 0; i < n; ++i) bed[i] = level * rng.gaussian();
  return bed;
}

ArrayXd multisine(Index n, int rate, Rng& rng) {
  const Real f0 = rng.uniform(110.0, 220.0);
  const int partials = 8;
  ArrayXd x = ArrayXd::Zero(n);
  for (int k = 1; k <= partials; ++k) {
    const Real amp = 1.0 / k;
    const Real phase = rng.uniform(0.0, 2.0 * kPi);
    const Real w = 2.0 * kPi * f0 * k / rate;
    for (Index i = 0; i < n; ++i) x[i] += amp * std::sin(w * static_cast<Real>(i) + phase);
  }
  // Slow tremolo so frames differ and the signal is less stationary.
  const Real trem_rate = rng.uniform(2.0, 5.0);
  const Real trem_phase = rng.uniform(0.0, 2.0 * kPi);
  for (Index i = 0; i < n; ++i)
    x[i] *= 1.0 + 0.3 * std::sin(2.0 * kPi * trem_rate * static_cast<Real>(i) / rate + trem_phase);
  x += noise_bed(n, 0.04 * x.abs().maxCoeff(), rng);
  return x;
}

ArrayXd chirp(Index n, int rate, Rng& rng) {
  const Real f_lo = 100.0, f_hi = 6000.0;
  const Real phase0 = rng.uniform(0.0, 2.0 * kPi);
  const Real k = std::log(f_hi / f_lo);
  ArrayXd x(n);
  const Real T = static_cast<Real>(n) / rate;
  for (Index i = 0; i < n; ++i) {
    const Real t = static_cast<Real>(i) / rate;
    // phase(t) = 2*pi*f_lo*T/k * (e^{k t/T} - 1)
    const Real ph = 2.0 * kPi * f_lo * T / k * (std::exp(k * t / T) - 1.0);
    x[i] = std::sin(ph + phase0);
  }
  x += noise_bed(n, 0.04, rng);
  return x;
}

ArrayXd noise_burst(Index n, int rate, Rng& rng) {
  ArrayXd x(n);
  Real state = 0.0;
  for (Index i = 0; i < n; ++i) {  // one-pole lowpass on white noise
    state = 0.7 * state + 0.3 * rng.gaussian();
    x[i] = state;
  }
  // Three bursts separated by short triangular dips. The dips bottom out at
  // 0.05 rather than zero and are shorter than one analysis frame, so nearly
  // every frame keeps energy.
  ArrayXd env = ArrayXd::Ones(n);
  const Index gap = std::min<Index>(rate / 80, n / 16);  // ~12 ms half-width
  for (Real center : {0.33, 0.66}) {
    const Index mid = static_cast<Index>(center * static_cast<Real>(n));
    for (Index i = std::max<Index>(0, mid - gap); i < std::min(n, mid + gap); ++i) {
      const Real u = static_cast<Real>(i - (mid - gap)) / static_cast<Real>(2 * gap);
      env[i] = 0.25 + 0.75 * std::abs(2.0 * u - 1.0);
    }
  }
  return x * env;
}

}  // namespace

TimeSignal synth_signal(SynthKind kind, Real duration_s, int sample_rate, std::uint64_t seed) {
  if (!(duration_s > 0)) throw ConfigError("synth_signal: duration must be positive");
  if (sample_rate < 1) throw ConfigError("synth_signal: sample rate must be positive");
  const Index n = static_cast<Index>(duration_s * sample_rate + 0.5);
  if (n < 2048)
    throw ConfigError("synth_signal: duration too short (need at least two analysis frames, "
                      ">= 2048 samples)");

  Rng rng = Rng::for_stream(seed, std::string("synth|") + to_string(kind));
  ArrayXd x;
  switch (kind) {
    case SynthKind::multisine: x = multisine(n, sample_rate, rng); break;
    case SynthKind::chirp: x = chirp(n, sample_rate, rng); break;
    case SynthKind::noise_burst: x = noise_burst(n, sample_rate, rng); break;
  }
  const Real peak = x.abs().maxCoeff();
  if (peak > 0) x /= peak;
  return TimeSignal{std::move(x), sample_rate};
}

}  // namespace bpr::harness
