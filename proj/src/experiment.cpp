#include "bpr/harness/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "bpr/harness/wav.hpp"
#include "bpr/metrics.hpp"

namespace bpr::harness {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Measurement acquisition
// ---------------------------------------------------------------------------

Measurements measure(const TimeSignal& x, const StftPlan& plan, int d) {
  if (d != 1 && d != 2) throw ConfigError("measure: d must be 1 or 2");
  const ArrayXXd mags = stft(plan, pad_signal(x, plan)).h.abs();
  return Measurements{d == 2 ? ArrayXXd(mags.square()) : mags, d};
}

Measurements degrade(const TimeSignal& x, Real input_snr_db, const StftPlan& plan,
                     std::uint64_t seed, ArrayXd* noise_out) {
  if (std::isinf(input_snr_db) && input_snr_db > 0) {
    if (noise_out) *noise_out = ArrayXd::Zero(x.size());
    return measure(x, plan, 1);
  }
  const Real energy = x.samples.square().sum();
  if (energy == 0.0) throw DomainError("degrade: signal is identically zero");

  Rng rng = Rng::for_stream(seed, "degrade-noise");
  ArrayXd noise = rng.gaussian_vector(x.size());
  const Real gain = std::sqrt(energy / noise.square().sum()) *
                    std::pow(10.0, -input_snr_db / 20.0);
  noise *= gain;
  if (noise_out) *noise_out = noise;

  TimeSignal n{noise, x.sample_rate};
  TimeSignal mix{x.samples + noise, x.sample_rate};
  const ArrayXXd s2 = stft(plan, pad_signal(x, plan)).h.abs2();
  const ArrayXXd n2 = stft(plan, pad_signal(n, plan)).h.abs2();
  const TfMatrix xm = stft(plan, pad_signal(mix, plan));
  const ArrayXXd mask = s2 / (s2 + n2 + 1e-12);
  return Measurements{ArrayXXd(mask * xm.h.abs()), 1};
}

// ---------------------------------------------------------------------------
// Grid and formatting
// ---------------------------------------------------------------------------

const std::vector<std::string>& benchmark_codes() {
  static const std::vector<std::string> codes = {
      "G.05.R1", "G.05.L1", "G.KL.R1", "G.KL.L1", "G.QD.1",  "G.IS.R2",
      "G.05.R2", "G.05.L2", "G.KL.R2", "G.KL.L2", "G.QD.2",  "A.IS.L1",
      "A.KL.L1", "A.QD.1",  "GLA",     "FGLA",    "GLADMM",  "INIT",
  };
  return codes;
}

namespace {

std::string fmt_real(Real v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string family_label(const AlgorithmCode& code) {
  switch (code.kind) {
    case SolverKind::gla:
    case SolverKind::fgla: return "quadratic";
    case SolverKind::gladmm: return "indicator";
    case SolverKind::init: return "na";
    default: break;
  }
  if (code.family.family == Family::beta) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "beta(%g)", code.family.beta);
    return buf;
  }
  return family_name(code.family);
}

std::string direction_label(const AlgorithmCode& code) {
  if (!code.has_direction()) return "na";
  return to_string(code.direction);
}

std::string d_label(const AlgorithmCode& code) {
  if (code.kind == SolverKind::init) return "na";
  return std::to_string(code.d);
}

std::string condition_label(Protocol protocol, Real snr_db) {
  if (protocol == Protocol::exact) return "exact";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+gdB", snr_db);
  return buf;
}

std::string sanitize(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
  return out;
}

std::string hash_hex(const ArrayXd& x) {
  const std::uint64_t h = fnv1a(x.data(), static_cast<std::size_t>(x.size()) * sizeof(Real));
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(IoCode::write_failed, "cannot write " + path);
  out << content;
  if (!out) throw IoError(IoCode::write_failed, "write failed for " + path);
}

SolverConfig resolve_config(const ExperimentConfig& cfg, const AlgorithmCode& code) {
  SolverConfig sc = default_config(code);
  sc.iterations = cfg.iterations;
  sc.trace_period = cfg.trace_period;
  sc.seed = cfg.seed;
  sc.epsilon = cfg.epsilon;
  auto apply = [&](const SetupOverride& ov) {
    if (ov.mu) sc.mu = *ov.mu;
    if (ov.rho) sc.rho = *ov.rho;
    if (ov.gamma) sc.gamma = *ov.gamma;
    if (ov.iterations) sc.iterations = *ov.iterations;
  };
  apply(cfg.override);
  if (auto it = cfg.per_code.find(code.canonical); it != cfg.per_code.end()) apply(it->second);
  return sc;
}

struct ResolvedInput {
  std::string id;
  TimeSignal signal;
};

std::vector<ResolvedInput> resolve_inputs(const ExperimentConfig& cfg) {
  if (cfg.inputs.empty()) throw ConfigError("experiment: at least one input is required");
  std::vector<ResolvedInput> out;
  std::map<std::string, int> seen;
  for (const InputSpec& spec : cfg.inputs) {
    std::string id;
    TimeSignal signal;
    if (spec.kind == InputSpec::Kind::wav_file) {
      id = std::filesystem::path(spec.path).stem().string();
      signal = load_wav(spec.path);
      expect_rate(signal, cfg.stft.sample_rate, spec.path);
    } else {
      id = to_string(spec.synth);
    }
    const int n = seen[id]++;
    if (n > 0) id += "-" + std::to_string(n + 1);
    if (spec.kind == InputSpec::Kind::synthetic)
      signal = synth_signal(spec.synth, spec.duration_s, cfg.stft.sample_rate,
                            cfg.seed ^ fnv1a("input|" + id));
    out.push_back({std::move(id), std::move(signal)});
  }
  return out;
}

}  // namespace

std::string render_csv(const std::vector<ReportRow>& rows) {
  std::string out =
      "input,algo,family,direction,d,iters,condition,sc,snr_db,snr_improvement_db,"
      "wall_ms,seed,diverged\n";
  for (const ReportRow& r : rows) {
    out += r.input + ',' + r.algo + ',' + r.family + ',' + r.direction + ',' + r.d + ',' +
           std::to_string(r.iters) + ',' + r.condition + ',' + fmt_real(r.sc) + ',' +
           fmt_real(r.snr_db) + ',' + fmt_real(r.snr_improvement_db) + ',' +
           fmt_real(r.wall_ms) + ',' + std::to_string(r.seed) + ',' +
           (r.diverged ? "1" : "0") + '\n';
  }
  return out;
}

namespace {

json real_or_sentinel(Real v) {
  if (std::isfinite(v)) return v;
  return fmt_real(v);  // "-inf"/"inf"/"nan" as strings, since json lacks them
}

}  // namespace

std::string render_json(const std::vector<ReportRow>& rows, const ExperimentConfig& config) {
  json j;
  j["version"] = "0.1.0";
  json cfg;
  cfg["protocol"] = config.protocol == Protocol::exact ? "exact" : "degraded";
  cfg["iterations"] = config.iterations;
  cfg["seed"] = config.seed;
  cfg["epsilon"] = config.epsilon;
  cfg["algorithms"] = config.algorithms;
  cfg["stft"] = {{"win_len", config.stft.win_len},
                 {"hop", config.stft.hop},
                 {"fft_size", config.stft.fft_size ? config.stft.fft_size : config.stft.win_len},
                 {"sample_rate", config.stft.sample_rate}};
  if (config.protocol == Protocol::degraded) {
    json snrs = json::array();
    for (Real s : config.input_snr_db) snrs.push_back(real_or_sentinel(s));
    cfg["input_snr_db"] = snrs;
  }
  json inputs = json::array();
  for (const InputSpec& in : config.inputs) {
    if (in.kind == InputSpec::Kind::wav_file)
      inputs.push_back({{"wav", in.path}});
    else
      inputs.push_back({{"synth", to_string(in.synth)}, {"duration_s", in.duration_s}});
  }
  cfg["inputs"] = inputs;
  j["config"] = cfg;
  j["notes"] = {
      {"snr_cap_db", kSnrCapDb},
      {"sc_definition",
       "||r^(1/d) - |stft(x)||| / ||r||; for d = 2 rows the numerator and denominator are on "
       "different scales"},
      {"borders", "zero-padded border frames are included in all metrics"},
      {"degradation", "noise injection, Wiener mask and reconstruction share one stft plan"},
      {"shared_init",
       "within one (input, condition) every algorithm consumes the same random-phase init; "
       "init_hash identifies it"},
  };
  json rows_json = json::array();
  for (const ReportRow& r : rows) {
    json row;
    row["input"] = r.input;
    row["algo"] = r.algo;
    row["family"] = r.family;
    row["direction"] = r.direction;
    row["d"] = r.d;
    row["iters"] = r.iters;
    row["condition"] = r.condition;
    row["sc"] = real_or_sentinel(r.sc);
    row["sc_mag"] = real_or_sentinel(r.sc_mag);
    row["snr_db"] = real_or_sentinel(r.snr_db);
    row["snr_improvement_db"] = real_or_sentinel(r.snr_improvement_db);
    row["wall_ms"] = r.wall_ms;
    row["seed"] = r.seed;
    row["diverged"] = r.diverged;
    row["floored_entries"] = r.floored_entries;
    row["max_imag_residual"] = r.max_imag_residual;
    row["init_hash"] = r.init_hash;
    rows_json.push_back(row);
  }
  j["rows"] = rows_json;
  return j.dump(2) + "\n";
}

std::map<std::string, SetupOverride> load_setup_overrides(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoCode::open_failed, "cannot open setup file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(IoCode::malformed, "setup file " + path + ": " + e.what());
  }
  std::map<std::string, SetupOverride> out;
  if (!j.contains("setups") || !j["setups"].is_array())
    throw IoError(IoCode::malformed, "setup file " + path + ": missing setups array");
  for (const json& entry : j["setups"]) {
    if (!entry.contains("code")) continue;
    SetupOverride ov;
    if (entry.contains("mu")) ov.mu = entry["mu"].get<Real>();
    if (entry.contains("rho")) ov.rho = entry["rho"].get<Real>();
    if (entry.contains("gamma")) ov.gamma = entry["gamma"].get<Real>();
    if (entry.contains("iterations")) ov.iterations = entry["iterations"].get<int>();
    out[parse_algorithm_code(entry["code"].get<std::string>()).canonical] = ov;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batch runner
// ---------------------------------------------------------------------------

ExperimentResult run_experiment(const ExperimentConfig& config) {
  if (config.algorithms.empty()) throw ConfigError("experiment: at least one algorithm");
  if (config.protocol == Protocol::degraded && config.input_snr_db.empty())
    throw ConfigError("experiment: the degraded protocol needs at least one input SNR");
  if (config.iterations < 1) throw ConfigError("experiment: iterations must be >= 1");

  const std::vector<ResolvedInput> inputs = resolve_inputs(config);
  const std::vector<Real> conditions =
      config.protocol == Protocol::exact ? std::vector<Real>{0.0} : config.input_snr_db;

  const Window window = sine_bell_window(config.stft.win_len);
  const int fft_size = config.stft.fft_size ? config.stft.fft_size : config.stft.win_len;

  ExperimentResult result;
  int runnable = 0, diverged_count = 0;

  for (const ResolvedInput& input : inputs) {
    StftPlan plan(window, config.stft.hop, fft_size, input.signal.size());
    if (plan.num_frames() < 2)
      throw ConfigError("experiment: input '" + input.id + "' is shorter than two frames");

    for (Real snr : conditions) {
      const std::string condition = condition_label(config.protocol, snr);
      const std::uint64_t cond_seed =
          config.seed ^ fnv1a("condition|" + input.id + "|" + condition);

      const Measurements r1 = config.protocol == Protocol::exact
                                  ? measure(input.signal, plan, 1)
                                  : degrade(input.signal, snr, plan, cond_seed);
      const InitState init =
          random_phase_init(r1, plan, cond_seed, config.stft.sample_rate);
      const std::string init_hash = hash_hex(init.x0.samples);
      const Real init_sc = spectral_convergence(r1, pad_signal(init.x0, plan), plan);
      const Real init_snr = align_and_snr(input.signal, init.x0).snr_db;

      for (const std::string& code_text : config.algorithms) {
        const AlgorithmCode code = parse_algorithm_code(code_text);
        ReportRow row;
        row.input = input.id;
        row.algo = code.canonical;
        row.family = family_label(code);
        row.direction = direction_label(code);
        row.d = d_label(code);
        row.condition = condition;
        row.seed = config.seed;
        row.init_hash = init_hash;

        if (code.kind == SolverKind::init) {
          row.iters = 0;
          row.sc = init_sc;
          row.sc_mag = init_sc;
          row.snr_db = init_snr;
          row.snr_improvement_db = 0.0;
          result.rows.push_back(std::move(row));
          continue;
        }

        const SolverConfig solver_config = resolve_config(config, code);
        const Measurements rd =
            code.d == 2 ? Measurements{ArrayXXd(r1.values.square()), 2} : r1;
        const ProblemSpec problem = problem_for(code, config.epsilon);

        RunReport report;
        ++runnable;
        try {
          switch (code.kind) {
            case SolverKind::gradient:
              report = run_gradient(problem, rd, plan, solver_config, init);
              break;
            case SolverKind::admm:
              report = run_admm(problem, rd, plan, solver_config, init);
              break;
            case SolverKind::gla:
              report = run_gla(rd, plan, solver_config, init);
              break;
            case SolverKind::fgla:
              report = run_fgla(rd, plan, solver_config, init);
              break;
            case SolverKind::gladmm:
              report = run_gladmm(rd, plan, solver_config, init);
              break;
            case SolverKind::init: break;  // handled above
          }
        } catch (const DivergedError& e) {
          report = e.report;
          ++diverged_count;
        }
        if (report.final_x.size() == 0) report.final_x = init.x0;  // diverged immediately

        row.iters = report.iterations_run;
        row.diverged = report.diverged;
        row.wall_ms = report.wall_ms;
        row.floored_entries = report.floored_entry_count;
        row.max_imag_residual = report.max_imag_residual;
        const TimeSignal padded_final = pad_signal(report.final_x, plan);
        row.sc = spectral_convergence(rd, padded_final, plan);
        row.sc_mag = code.d == 1 ? row.sc : spectral_convergence(r1, padded_final, plan);
        row.snr_db = align_and_snr(input.signal, report.final_x).snr_db;
        row.snr_improvement_db = row.snr_db - init_snr;

        if (!config.wav_dir.empty()) {
          const std::string name =
              sanitize(input.id + "__" + condition + "__" + code.canonical) + ".wav";
          write_wav((std::filesystem::path(config.wav_dir) / name).string(), report.final_x);
        }
        if (!config.trace_dir.empty()) {
          std::string trace = "iteration,objective\n";
          for (const auto& [it, loss] : report.loss_trace)
            trace += std::to_string(it) + ',' + fmt_real(loss) + '\n';
          const std::string name =
              sanitize(input.id + "__" + condition + "__" + code.canonical) + ".csv";
          write_text((std::filesystem::path(config.trace_dir) / name).string(), trace);
        }
        result.rows.push_back(std::move(row));
      }
    }
  }

  std::sort(result.rows.begin(), result.rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.input, a.condition, a.algo) < std::tie(b.input, b.condition, b.algo);
  });
  result.all_diverged = runnable > 0 && diverged_count == runnable;
  result.csv = render_csv(result.rows);
  result.json = render_json(result.rows, config);
  if (!config.csv_path.empty()) write_text(config.csv_path, result.csv);
  if (!config.json_path.empty()) write_text(config.json_path, result.json);
  return result;
}

}  // namespace bpr::harness
