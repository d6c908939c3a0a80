// bpr: reconstruct audio signals from magnitude/power spectrograms by
// minimizing Bregman divergences (gradient descent and ADMM), with
// Griffin-Lim-family baselines and a benchmarking harness.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "bpr/harness/experiment.hpp"
#include "bpr/harness/wav.hpp"
#include "bpr/metrics.hpp"
#include "bpr/solvers.hpp"

namespace {

using namespace bpr;
using namespace bpr::harness;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitAllDiverged = 4;

struct CommonOpts {
  int win_len = 1024;
  int hop = 512;
  int fft_size = 0;
  int sample_rate = 22050;
  int iterations = 2500;
  std::uint64_t seed = 1;
  double epsilon = kDefaultEpsilon;
  std::optional<double> step, rho, gamma;
  std::optional<int> d_override;
  std::string setups_path;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--win-len", o.win_len, "analysis window length (samples)");
  cmd->add_option("--hop", o.hop, "hop size (samples)");
  cmd->add_option("--fft-size", o.fft_size, "FFT size (default: window length)");
  cmd->add_option("--sample-rate", o.sample_rate, "expected sample rate (Hz)");
  cmd->add_option("--iters", o.iterations, "iteration count");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--epsilon", o.epsilon, "magnitude floor");
  cmd->add_option("--step", [&o](const CLI::results_t& r) { o.step = std::stod(r[0]); return true; },
                  "gradient step size override");
  cmd->add_option("--rho", [&o](const CLI::results_t& r) { o.rho = std::stod(r[0]); return true; },
                  "ADMM penalty override");
  cmd->add_option("--gamma", [&o](const CLI::results_t& r) { o.gamma = std::stod(r[0]); return true; },
                  "acceleration parameter override");
  cmd->add_option("--d", [&o](const CLI::results_t& r) { o.d_override = std::stoi(r[0]); return true; },
                  "measurement power override (1 or 2)");
  cmd->add_option("--setups", o.setups_path, "JSON file with per-code hyperparameter overrides");
}

std::vector<InputSpec> gather_inputs(const std::vector<std::string>& wavs,
                                     const std::vector<std::string>& synths, double duration) {
  std::vector<InputSpec> inputs;
  for (const std::string& w : wavs) inputs.push_back(InputSpec::wav(w));
  for (const std::string& s : synths) {
    if (s == "all") {
      for (auto k : {SynthKind::multisine, SynthKind::chirp, SynthKind::noise_burst})
        inputs.push_back(InputSpec::synth_spec(k, duration));
    } else {
      inputs.push_back(InputSpec::synth_spec(parse_synth_kind(s), duration));
    }
  }
  return inputs;
}

ExperimentConfig make_config(const CommonOpts& o, std::vector<InputSpec> inputs,
                             std::vector<std::string> algos) {
  ExperimentConfig cfg;
  cfg.inputs = std::move(inputs);
  cfg.algorithms = std::move(algos);
  cfg.stft = StftSettings{o.win_len, o.hop, o.fft_size, o.sample_rate};
  cfg.iterations = o.iterations;
  cfg.seed = o.seed;
  cfg.epsilon = o.epsilon;
  cfg.override.mu = o.step;
  cfg.override.rho = o.rho;
  cfg.override.gamma = o.gamma;
  if (!o.setups_path.empty()) cfg.per_code = load_setup_overrides(o.setups_path);
  return cfg;
}

std::vector<std::string> resolve_algos(std::vector<std::string> algos) {
  if (algos.size() == 1 && algos[0] == "all") return benchmark_codes();
  for (std::string& a : algos) a = parse_algorithm_code(a).canonical;
  return algos;
}

int run_bench(const CommonOpts& o, ExperimentConfig cfg) {
  const ExperimentResult result = run_experiment(cfg);
  (void)o;
  if (cfg.csv_path.empty()) std::fputs(result.csv.c_str(), stdout);
  int diverged = 0;
  for (const auto& row : result.rows) diverged += row.diverged ? 1 : 0;
  if (diverged > 0)
    std::fprintf(stderr, "note: %d run(s) diverged (flagged in the report)\n", diverged);
  return result.all_diverged ? kExitAllDiverged : kExitOk;
}

int cmd_reconstruct(const CommonOpts& o, const std::string& in_wav, const std::string& synth,
                    double duration, const std::string& algo, const std::string& out_wav,
                    const std::string& trace_path) {
  const AlgorithmCode code = parse_algorithm_code(algo);
  if (code.kind == SolverKind::init && out_wav.empty())
    throw ConfigError("reconstruct: INIT writes no reconstruction; give a solver code");

  TimeSignal x_star;
  if (!in_wav.empty()) {
    x_star = load_wav(in_wav);
    expect_rate(x_star, o.sample_rate, in_wav);
  } else if (!synth.empty()) {
    x_star = synth_signal(parse_synth_kind(synth), duration, o.sample_rate, o.seed);
  } else {
    throw ConfigError("reconstruct: provide --in or --synth");
  }

  StftPlan plan(sine_bell_window(o.win_len), o.hop, o.fft_size ? o.fft_size : o.win_len,
                x_star.size());
  const int d = o.d_override.value_or(code.d);
  const Measurements r1 = measure(x_star, plan, 1);
  const Measurements rd = d == 2 ? Measurements{ArrayXXd(r1.values.square()), 2} : r1;
  const InitState init = random_phase_init(r1, plan, o.seed, o.sample_rate);

  SolverConfig sc = default_config(code);
  sc.iterations = o.iterations;
  sc.seed = o.seed;
  sc.epsilon = o.epsilon;
  if (o.step) sc.mu = *o.step;
  if (o.rho) sc.rho = *o.rho;
  if (o.gamma) sc.gamma = *o.gamma;
  ProblemSpec problem = problem_for(code, o.epsilon);
  problem.d = d;

  RunReport report;
  bool diverged = false;
  try {
    switch (code.kind) {
      case SolverKind::gradient: report = run_gradient(problem, rd, plan, sc, init); break;
      case SolverKind::admm: report = run_admm(problem, rd, plan, sc, init); break;
      case SolverKind::gla: report = run_gla(rd, plan, sc, init); break;
      case SolverKind::fgla: report = run_fgla(rd, plan, sc, init); break;
      case SolverKind::gladmm: report = run_gladmm(rd, plan, sc, init); break;
      case SolverKind::init:
        report.final_x = init.x0;
        break;
    }
  } catch (const DivergedError& e) {
    report = e.report;
    diverged = true;
    if (report.final_x.size() == 0) report.final_x = init.x0;
  }

  const Real sc_final = spectral_convergence(rd, pad_signal(report.final_x, plan), plan);
  const auto snr = align_and_snr(x_star, report.final_x);
  const Real snr_init = align_and_snr(x_star, init.x0).snr_db;
  std::printf("algo=%s iters=%d sc=%.6g snr_db=%.4f snr_improvement_db=%.4f diverged=%d\n",
              code.canonical.c_str(), report.iterations_run, sc_final, snr.snr_db,
              snr.snr_db - snr_init, diverged ? 1 : 0);

  if (!out_wav.empty()) write_wav(out_wav, report.final_x);
  if (!trace_path.empty()) {
    std::string trace = "iteration,objective\n";
    char buf[64];
    for (const auto& [it, loss] : report.loss_trace) {
      std::snprintf(buf, sizeof(buf), "%d,%.10g\n", it, loss);
      trace += buf;
    }
    std::ofstream out(trace_path);
    if (!out) throw IoError(IoCode::write_failed, "cannot write " + trace_path);
    out << trace;
  }
  return diverged ? kExitAllDiverged : kExitOk;
}

int cmd_metrics(const CommonOpts& o, const std::string& ref_path, const std::string& est_path) {
  const TimeSignal ref = load_wav(ref_path);
  const TimeSignal est = load_wav(est_path);
  if (ref.sample_rate != est.sample_rate)
    throw IoError(IoCode::rate_mismatch, "metrics: the two files have different sample rates");
  if (ref.size() != est.size())
    throw ConfigError("metrics: signals must have equal length (got " +
                      std::to_string(ref.size()) + " and " + std::to_string(est.size()) + ")");

  StftPlan plan(sine_bell_window(o.win_len), o.hop, o.fft_size ? o.fft_size : o.win_len,
                ref.size());
  const int d = o.d_override.value_or(1);
  const Measurements r = measure(ref, plan, d);
  const Real sc = spectral_convergence(r, pad_signal(est, plan), plan);
  const auto snr = align_and_snr(ref, est);
  std::printf("sc=%.6g snr_db=%.4f shift=%ld scale=%.6g\n", sc, snr.snr_db,
              static_cast<long>(snr.alignment.shift), snr.alignment.scale);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectrogram inversion with Bregman divergences"};
  app.require_subcommand(1);

  CommonOpts opt;

  // reconstruct
  auto* rec = app.add_subcommand("reconstruct", "recover one signal with one algorithm");
  std::string rec_in, rec_synth, rec_algo = "GLA", rec_out, rec_trace;
  double rec_duration = 2.0;
  rec->add_option("--in", rec_in, "input WAV file");
  rec->add_option("--synth", rec_synth, "synthetic input: multisine|chirp|noise-burst");
  rec->add_option("--duration", rec_duration, "synthetic input duration (s)");
  rec->add_option("--algo", rec_algo, "algorithm code (e.g. G.KL.L1, A.QD.1, GLA)");
  rec->add_option("--out", rec_out, "output WAV path");
  rec->add_option("--trace", rec_trace, "write the loss trace CSV here");
  add_common(rec, opt);

  // bench exact / bench degrade
  auto* bench = app.add_subcommand("bench", "run the benchmark grid");
  bench->require_subcommand(1);
  std::vector<std::string> bench_wavs, bench_synths{"all"}, bench_algos{"all"};
  double bench_duration = 2.0;
  std::vector<double> bench_snrs;
  std::string bench_csv, bench_json, bench_wav_dir, bench_trace_dir;

  auto add_bench_common = [&](CLI::App* cmd) {
    cmd->add_option("--in", bench_wavs, "input WAV files");
    cmd->add_option("--synth", bench_synths, "synthetic inputs (or 'all')");
    cmd->add_option("--duration", bench_duration, "synthetic input duration (s)");
    cmd->add_option("--algos", bench_algos, "algorithm codes (or 'all')");
    cmd->add_option("--out", bench_csv, "CSV report path (stdout when omitted)");
    cmd->add_option("--json", bench_json, "JSON report path");
    cmd->add_option("--wav-dir", bench_wav_dir, "write reconstructed WAVs to this directory");
    cmd->add_option("--trace", bench_trace_dir, "write per-run loss traces to this directory");
    add_common(cmd, opt);
  };
  auto* bench_exact = bench->add_subcommand("exact", "exact-spectrogram protocol");
  add_bench_common(bench_exact);
  auto* bench_degrade = bench->add_subcommand("degrade", "noise + oracle-Wiener protocol");
  add_bench_common(bench_degrade);
  bench_degrade->add_option("--snr", bench_snrs, "input SNRs in dB")->required();

  // metrics
  auto* met = app.add_subcommand("metrics", "compare two WAV files");
  std::string met_ref, met_est;
  met->add_option("--ref", met_ref, "reference WAV")->required();
  met->add_option("--est", met_est, "estimate WAV")->required();
  add_common(met, opt);

  // setups
  auto* setups = app.add_subcommand("setups", "print the benchmark grid defaults");

  CLI11_PARSE(app, argc, argv);

  try {
    if (rec->parsed())
      return cmd_reconstruct(opt, rec_in, rec_synth, rec_duration, rec_algo, rec_out, rec_trace);
    if (bench->parsed()) {
      ExperimentConfig cfg = make_config(
          opt, gather_inputs(bench_wavs, bench_synths, bench_duration), resolve_algos(bench_algos));
      cfg.csv_path = bench_csv;
      cfg.json_path = bench_json;
      cfg.wav_dir = bench_wav_dir;
      cfg.trace_dir = bench_trace_dir;
      cfg.protocol = bench_exact->parsed() ? Protocol::exact : Protocol::degraded;
      cfg.input_snr_db.assign(bench_snrs.begin(), bench_snrs.end());
      return run_bench(opt, std::move(cfg));
    }
    if (met->parsed()) return cmd_metrics(opt, met_ref, met_est);
    if (setups->parsed()) {
      std::printf("%-8s %-9s %-10s %-5s %-2s %-8s %-6s\n", "code", "kind", "family", "dir", "d",
                  "mu", "rho");
      for (const std::string& text : benchmark_codes()) {
        const AlgorithmCode code = parse_algorithm_code(text);
        const SolverConfig cfg = default_config(code);
        const bool grad = code.kind == SolverKind::gradient;
        const bool admm = code.kind == SolverKind::admm;
        const char* kind = grad    ? "gradient"
                           : admm  ? "admm"
                           : code.kind == SolverKind::gla    ? "gla"
                           : code.kind == SolverKind::fgla   ? "fgla"
                           : code.kind == SolverKind::gladmm ? "gladmm"
                                                             : "init";
        std::printf("%-8s %-9s %-10s %-5s %-2d %-8g %-6g\n", code.canonical.c_str(), kind,
                    code.kind == SolverKind::init ? "na" : family_name(code.family),
                    code.has_direction() ? to_string(code.direction) : "na", code.d,
                    grad ? cfg.mu : 0.0, admm ? cfg.rho : 0.0);
      }
      return kExitOk;
    }
  } catch (const bpr::harness::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const bpr::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const bpr::UnsupportedError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const bpr::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}
