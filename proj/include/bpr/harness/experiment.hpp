#pragma once

#include "bpr/divergence.hpp"
#include "bpr/harness/synth.hpp"
#include "bpr/solvers.hpp"
#include "bpr/stft.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bpr::harness {

// ---------------------------------------------------------------------------
// Measurement acquisition
// ---------------------------------------------------------------------------

/// R = |stft(x)|^d. The signal is border-padded on the fly (idempotent).
Measurements measure(const TimeSignal& x, const StftPlan& plan, int d);

/// Modified-spectrogram pipeline: white Gaussian noise is scaled so the
/// realized input SNR matches input_snr_db exactly, an oracle Wiener mask
/// G = |S|^2 / (|S|^2 + |N|^2 + 1e-12) built from the true clean and noise
/// spectra is applied to the mixture, and R = |G * stft(x + n)| (d = 1).
/// Passing +inf skips the degradation and returns measure(x, plan, 1).
/// Deterministic given the seed; the same plan is used throughout. The
/// realized noise is exposed through noise_out for diagnostics.
Measurements degrade(const TimeSignal& x, Real input_snr_db, const StftPlan& plan,
                     std::uint64_t seed, ArrayXd* noise_out = nullptr);

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct InputSpec {
  enum class Kind { wav_file, synthetic } kind = Kind::synthetic;
  std::string path;  // wav_file
  SynthKind synth = SynthKind::multisine;
  Real duration_s = 2.0;

  static InputSpec wav(std::string p) { return {Kind::wav_file, std::move(p), {}, 0}; }
  static InputSpec synth_spec(SynthKind k, Real duration) {
    return {Kind::synthetic, {}, k, duration};
  }
};

struct StftSettings {
  int win_len = 1024;
  int hop = 512;
  int fft_size = 0;  // 0: same as win_len
  int sample_rate = 22050;
};

enum class Protocol { exact, degraded };

/// Per-field overrides applied on top of a code's grid defaults.
struct SetupOverride {
  std::optional<Real> mu, rho, gamma;
  std::optional<int> iterations;
};

struct ExperimentConfig {
  std::vector<InputSpec> inputs;
  Protocol protocol = Protocol::exact;
  std::vector<Real> input_snr_db;  // degraded protocol conditions
  std::vector<std::string> algorithms;
  StftSettings stft;
  int iterations = 2500;
  int trace_period = 1;
  std::uint64_t seed = 1;
  Real epsilon = kDefaultEpsilon;
  SetupOverride override;                          // applied to every code
  std::map<std::string, SetupOverride> per_code;   // applied per code

  std::string csv_path;    // write CSV here when nonempty
  std::string json_path;   // write JSON here when nonempty
  std::string wav_dir;     // write reconstructed WAVs here when nonempty
  std::string trace_dir;   // write per-run loss traces here when nonempty
};

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct ReportRow {
  std::string input;
  std::string algo;
  std::string family;     // quadratic | kl | is | beta(0.5) | indicator | na
  std::string direction;  // right | left | na
  std::string d;          // 1 | 2 | na
  int iters = 0;
  std::string condition;  // "exact" or "+10dB" style
  Real sc = 0.0;      // as printed: uses the row's own measurement power d
  Real sc_mag = 0.0;  // magnitude-domain SC (d = 1), comparable across rows
  Real snr_db = 0.0;
  Real snr_improvement_db = 0.0;
  Real wall_ms = 0.0;
  std::uint64_t seed = 0;
  bool diverged = false;
  // JSON-only extras
  long floored_entries = 0;
  Real max_imag_residual = 0.0;
  std::string init_hash;
};

struct ExperimentResult {
  std::vector<ReportRow> rows;
  std::string csv;
  std::string json;
  bool all_diverged = false;
};

/// The full benchmark grid: 11 gradient setups, 3 ADMM setups, GLA, FGLA,
/// GLADMM, and the INIT baseline.
const std::vector<std::string>& benchmark_codes();

/// Canonical CSV rendering (fixed column order, header always present).
std::string render_csv(const std::vector<ReportRow>& rows);

/// JSON rendering: rows plus config echo, version and metadata notes.
std::string render_json(const std::vector<ReportRow>& rows, const ExperimentConfig& config);

/// Loads {code: {mu/rho/gamma/iterations}} overrides from a JSON setup file.
std::map<std::string, SetupOverride> load_setup_overrides(const std::string& path);

/// Runs every (input x condition x algorithm) cell. Within one (input,
/// condition) every algorithm consumes the same random-phase init; rows are
/// sorted by (input, condition, algo) before emission; per-run divergence is
/// recorded in the row, never aborting the batch.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace bpr::harness
