#pragma once

#include "bpr/common.hpp"
#include "bpr/divergence.hpp"
#include "bpr/prox.hpp"
#include "bpr/stft.hpp"

#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace bpr {

// ---------------------------------------------------------------------------
// Algorithm codes
// ---------------------------------------------------------------------------

enum class SolverKind { gradient, admm, gla, fgla, gladmm, init };

/// A setup code such as "G.KL.L1", "A.QD.1", "GLA". The middle-dot form
/// ("G·KL·L1") is accepted as input and canonicalized to ASCII dots.
struct AlgorithmCode {
  SolverKind kind = SolverKind::gla;
  DivergenceSpec family = DivergenceSpec::quadratic();
  Direction direction = Direction::right;  // ignored for the quadratic loss
  int d = 1;
  std::string canonical = "GLA";

  bool has_direction() const {
    return (kind == SolverKind::gradient || kind == SolverKind::admm) &&
           family.family != Family::quadratic;
  }
};

inline AlgorithmCode parse_algorithm_code(const std::string& text) {
  // Normalize: middle dots to '.', lowercase to uppercase.
  std::string s;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (c == 0xC2 && i + 1 < text.size() &&
        static_cast<unsigned char>(text[i + 1]) == 0xB7) {  // UTF-8 middle dot
      s.push_back('.');
      ++i;
    } else {
      s.push_back(static_cast<char>(std::toupper(c)));
    }
  }

  AlgorithmCode code;
  code.canonical = s;
  if (s == "GLA") {
    code.kind = SolverKind::gla;
    return code;
  }
  if (s == "FGLA") {
    code.kind = SolverKind::fgla;
    return code;
  }
  if (s == "GLADMM") {
    code.kind = SolverKind::gladmm;
    return code;
  }
  if (s == "INIT") {
    code.kind = SolverKind::init;
    return code;
  }

  std::vector<std::string> tok;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t dot = s.find('.', pos);
    if (dot == std::string::npos) {
      tok.push_back(s.substr(pos));
      break;
    }
    tok.push_back(s.substr(pos, dot - pos));
    pos = dot + 1;
  }
  if (tok.size() != 3) throw ConfigError("unknown algorithm code: " + text);

  if (tok[0] == "G")
    code.kind = SolverKind::gradient;
  else if (tok[0] == "A")
    code.kind = SolverKind::admm;
  else
    throw ConfigError("unknown algorithm kind in code: " + text);

  if (tok[1] == "QD")
    code.family = DivergenceSpec::quadratic();
  else if (tok[1] == "KL")
    code.family = DivergenceSpec::kl();
  else if (tok[1] == "IS")
    code.family = DivergenceSpec::is();
  else if (tok[1] == "05")
    code.family = DivergenceSpec::beta_div(0.5);
  else
    throw ConfigError("unknown loss family in code: " + text);

  std::string tail = tok[2];
  if (code.family.family == Family::quadratic) {
    code.direction = Direction::right;  // the two directions coincide
  } else {
    if (tail.empty() || (tail[0] != 'R' && tail[0] != 'L'))
      throw ConfigError("code must carry a direction (R/L): " + text);
    code.direction = (tail[0] == 'R') ? Direction::right : Direction::left;
    tail = tail.substr(1);
  }
  if (tail == "1")
    code.d = 1;
  else if (tail == "2")
    code.d = 2;
  else
    throw ConfigError("code must end with the power d in {1,2}: " + text);
  return code;
}

inline ProblemSpec problem_for(const AlgorithmCode& code, Real epsilon = kDefaultEpsilon) {
  return ProblemSpec{code.family, code.direction, code.d, epsilon};
}

// ---------------------------------------------------------------------------
// Config and report
// ---------------------------------------------------------------------------

struct SolverConfig {
  AlgorithmCode algorithm;
  Real mu = 1.0;        // gradient step size
  Real gamma = 0.99;    // acceleration parameter, in [0, 1)
  Real rho = 0.1;       // ADMM penalty
  int iterations = 2500;
  std::uint64_t seed = 0;
  int trace_period = 1;
  Real epsilon = kDefaultEpsilon;  // magnitude floor (GLA-family projections)
  bool capture_iterates = false;   // record the signal after every iteration

  void validate() const {
    if (iterations < 0) throw ConfigError("SolverConfig: iterations must be >= 0");
    if (trace_period < 1) throw ConfigError("SolverConfig: trace_period must be >= 1");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("SolverConfig: gamma must be in [0,1)");
    if (!(epsilon > 0.0)) throw ConfigError("SolverConfig: epsilon must be positive");
  }
};

/// Benchmark-grid default hyperparameters. Gradient codes outside the grid
/// get a zero (unset) step size and must be given one explicitly.
inline SolverConfig default_config(const AlgorithmCode& code);

struct RunReport {
  TimeSignal final_x;
  std::vector<std::pair<int, Real>> loss_trace;  // (iteration, objective)
  Real wall_ms = 0.0;
  long floored_entry_count = 0;
  Real max_imag_residual = 0.0;  // largest pre-truncation imaginary residual seen
  int iterations_run = 0;
  bool diverged = false;
  SolverConfig config;
  std::vector<ArrayXd> iterates;  // x_1 .. x_T when config.capture_iterates
};

/// Thrown when a run blows up (non-finite iterate or objective exploding past
/// 1e6 x its initial value). Carries the report up to the last finite state.
struct DivergedError : Error {
  DivergedError(const std::string& msg, RunReport partial_report)
      : Error(msg), report(std::move(partial_report)) {}
  RunReport report;
};

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

struct InitState {
  TfMatrix X0;
  TimeSignal x0;
};

/// X0 = r^(1/d) * e^{i phi} with phi i.i.d. uniform on [0, 2pi) over the
/// stored nonnegative-frequency bins (column-major draw order). The DC and
/// Nyquist rows are snapped to the nearer of {0, pi} so the full matrix stays
/// exactly frequency-Hermitian without changing any magnitude. Deterministic
/// given the seed.
///
/// The returned signal is the synthesized init with the border padding
/// trimmed: solvers iterate on raw-length signals and re-pad for analysis,
/// which keeps synthesis the exact adjoint of analysis on their domain.
inline InitState random_phase_init(const Measurements& r, const StftPlan& plan,
                                   std::uint64_t seed, int sample_rate) {
  r.validate();
  if (r.values.rows() != plan.num_bins() || r.values.cols() != plan.num_frames())
    throw InputError("random_phase_init: measurement shape does not match plan");
  const ArrayXXd mag = (r.d == 2) ? ArrayXXd(r.values.sqrt()) : r.values;

  Rng rng = Rng::for_stream(seed, "phase-init");
  const Index M = plan.fft_size();
  const Index bins = plan.num_bins();
  InitState init;
  init.X0.fft_size = M;
  init.X0.h.resize(bins, plan.num_frames());
  for (Index n = 0; n < plan.num_frames(); ++n)
    for (Index m = 0; m < bins; ++m) {
      const Real phi = rng.uniform(0.0, 2.0 * kPi);
      const bool self_conjugate = (m == 0) || (M % 2 == 0 && m == bins - 1);
      init.X0.h(m, n) =
          self_conjugate
              ? Complex(std::cos(phi) >= 0.0 ? mag(m, n) : -mag(m, n), 0.0)
              : mag(m, n) * Complex(std::cos(phi), std::sin(phi));
    }
  init.x0 = unpad_signal(istft(plan, init.X0), plan);
  init.x0.sample_rate = sample_rate;
  return init;
}

// ---------------------------------------------------------------------------
// Shared pieces
// ---------------------------------------------------------------------------

/// P_M: rescales every bin to the target magnitude, r * X / max(|X|, eps).
inline TfMatrix magnitude_projection(const ArrayXXd& magnitudes, const TfMatrix& X, Real eps) {
  require(magnitudes.rows() == X.h.rows() && magnitudes.cols() == X.h.cols(),
          "magnitude_projection: shape mismatch");
  TfMatrix out;
  out.fft_size = X.fft_size;
  out.h = X.h * (magnitudes / X.h.abs().max(eps));
  return out;
}

namespace detail {

inline TimeSignal repad(const StftPlan& plan, const ArrayXd& x, int rate) {
  return pad_signal(TimeSignal{x, rate}, plan);
}

/// Trace recording, divergence watchdog and wall-clock bookkeeping shared by
/// every run_* loop.
class RunTracker {
 public:
  RunTracker(const SolverConfig& config, int sample_rate, long floored)
      : config_(config), sample_rate_(sample_rate), start_(std::chrono::steady_clock::now()) {
    report_.config = config;
    report_.floored_entry_count = floored;
  }

  void note_residual(Real imag_residual) {
    report_.max_imag_residual = std::max(report_.max_imag_residual, imag_residual);
  }

  /// Call once per iteration with the state x_t and its objective J(x_t).
  void observe(int iteration, Real objective, const ArrayXd& x) {
    const bool finite = std::isfinite(objective) && x.allFinite();
    if (!finite) {
      diverge(iteration, "non-finite iterate");
    }
    if (iteration == 0) initial_objective_ = objective;
    if (objective > 1e6 * std::max(initial_objective_, 1.0))
      diverge(iteration, "objective exploded");
    if (iteration % config_.trace_period == 0 || iteration == config_.iterations)
      report_.loss_trace.emplace_back(iteration, objective);
    if (config_.capture_iterates && iteration > 0) report_.iterates.push_back(x);
    last_finite_ = x;
    report_.iterations_run = iteration;
  }

  [[noreturn]] void diverge(int iteration, const std::string& why) {
    report_.diverged = true;
    report_.iterations_run = iteration;
    finalize(last_finite_);
    throw DivergedError("solver diverged at iteration " + std::to_string(iteration) + ": " + why,
                        std::move(report_));
  }

  RunReport take(const ArrayXd& x) {
    finalize(x);
    return std::move(report_);
  }

 private:
  void finalize(const ArrayXd& x) {
    report_.final_x.samples = x;
    report_.final_x.sample_rate = sample_rate_;
    report_.wall_ms =
        std::chrono::duration<Real, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

  SolverConfig config_;
  int sample_rate_;
  std::chrono::steady_clock::time_point start_;
  RunReport report_;
  Real initial_objective_ = 0.0;
  ArrayXd last_finite_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Accelerated gradient descent
// ---------------------------------------------------------------------------

/// Nesterov-style accelerated descent on the Bregman objective:
/// y_{t+1} = x_t - mu * grad J(x_t); x_{t+1} = y_{t+1} + gamma (y_{t+1} - y_t).
/// The momentum buffer starts at the init signal, which makes the first
/// extrapolation neutral and keeps an init at the true solution stationary.
inline RunReport run_gradient(const ProblemSpec& problem, const Measurements& r,
                              const StftPlan& plan, const SolverConfig& config,
                              const InitState& init) {
  problem.validate();
  config.validate();
  if (config.algorithm.kind != SolverKind::gradient)
    throw ConfigError("run_gradient: config does not hold a gradient code");
  if (!(config.mu > 0.0)) throw ConfigError("run_gradient: step size must be positive");
  if (r.d != problem.d) throw InputError("run_gradient: measurement power differs from problem");

  detail::RunTracker tracker(config, init.x0.sample_rate, count_floored(problem, r));
  const int rate = init.x0.sample_rate;
  ArrayXd x = init.x0.samples;
  ArrayXd y_old = x;

  for (int t = 0; t <= config.iterations; ++t) {
    if (!x.allFinite()) tracker.diverge(t, "non-finite iterate");
    const TfMatrix X = stft(plan, detail::repad(plan, x, rate));
    tracker.observe(t, objective_value(problem, r, X), x);
    if (t == config.iterations) break;
    Real residual = 0.0;
    const ArrayXd g_full = objective_grad_tf(problem, r, X, plan, &residual);
    tracker.note_residual(residual);
    const ArrayXd g = unpad_signal(TimeSignal{g_full, rate}, plan).samples;
    const ArrayXd y = x - config.mu * g;
    x = y + config.gamma * (y - y_old);
    y_old = y;
  }
  return tracker.take(x);
}

// ---------------------------------------------------------------------------
// ADMM
// ---------------------------------------------------------------------------

/// Splitting on Z = U e^{i Theta} ~ stft(x) with multipliers Lambda:
/// H = X + Lambda/rho; Theta = angle(H); U = prox(|H|); x = istft(Z - Lambda/rho);
/// Lambda += rho (stft(x) - Z). Supports d = 1 with the quadratic, KL-left
/// and IS-left proximal operators; Lambda starts at zero.
inline RunReport run_admm(const ProblemSpec& problem, const Measurements& r,
                          const StftPlan& plan, const SolverConfig& config,
                          const InitState& init) {
  problem.validate();
  config.validate();
  if (config.algorithm.kind != SolverKind::admm)
    throw ConfigError("run_admm: config does not hold an ADMM code");
  if (problem.d != 1)
    throw UnsupportedError("run_admm: only d = 1 is supported (the d-th root of the x-update "
                           "has unresolved branches otherwise)");
  if (r.d != 1) throw InputError("run_admm: measurements must be magnitudes (d = 1)");
  if (!(config.rho > 0.0)) throw ConfigError("run_admm: rho must be positive");
  const ProxSpec prox = ProxSpec::make(problem.divergence, problem.direction, config.rho);

  const long floored =
      (prox.form == ProxForm::is_left) ? long((r.values < problem.epsilon).count()) : 0L;
  detail::RunTracker tracker(config, init.x0.sample_rate, floored);
  const Real rho = config.rho;

  const int rate = init.x0.sample_rate;
  ArrayXd x = init.x0.samples;
  TfMatrix X = stft(plan, detail::repad(plan, x, rate));
  ArrayXXcd lambda = ArrayXXcd::Zero(X.h.rows(), X.h.cols());

  for (int t = 0; t <= config.iterations; ++t) {
    if (!x.allFinite() || !X.h.allFinite() || !lambda.allFinite())
      tracker.diverge(t, "non-finite iterate");
    tracker.observe(t, objective_value(problem, r, X), x);
    if (t == config.iterations) break;

    const ArrayXXcd h = X.h + lambda / rho;
    const ArrayXXcd phase = h.unaryExpr([](Complex v) {
      const Real a = std::abs(v);
      return a == 0.0 ? Complex(1.0, 0.0) : v / a;  // angle(0) := 0
    });
    const ArrayXXd u = prox_div(prox, r.values, ArrayXXd(h.abs()), problem.epsilon);
    const ArrayXXcd z = u.cast<Complex>() * phase;

    TfMatrix synth;
    synth.fft_size = X.fft_size;
    synth.h = z - lambda / rho;
    Real residual = 0.0;
    x = unpad_signal(istft(plan, synth, &residual), plan).samples;
    tracker.note_residual(residual);
    X = stft(plan, detail::repad(plan, x, rate));
    lambda += rho * (X.h - z);
  }
  return tracker.take(x);
}

// ---------------------------------------------------------------------------
// Griffin-Lim family
// ---------------------------------------------------------------------------

/// Classic alternating projections: x_{t+1} = istft(P_M(stft(x_t))). The
/// traced quadratic loss is non-increasing.
inline RunReport run_gla(const Measurements& r, const StftPlan& plan, const SolverConfig& config,
                         const InitState& init) {
  config.validate();
  if (r.d != 1) throw InputError("run_gla: measurements must be magnitudes (d = 1)");
  const ProblemSpec quad{DivergenceSpec::quadratic(), Direction::right, 1, config.epsilon};

  detail::RunTracker tracker(config, init.x0.sample_rate, 0);
  const int rate = init.x0.sample_rate;
  ArrayXd x = init.x0.samples;
  TfMatrix X = stft(plan, detail::repad(plan, x, rate));
  for (int t = 0; t <= config.iterations; ++t) {
    tracker.observe(t, objective_value(quad, r, X), x);
    if (t == config.iterations) break;
    Real residual = 0.0;
    x = unpad_signal(istft(plan, magnitude_projection(r.values, X, config.epsilon), &residual),
                     plan)
            .samples;
    tracker.note_residual(residual);
    X = stft(plan, detail::repad(plan, x, rate));
  }
  return tracker.take(x);
}

/// Fast Griffin-Lim: time-frequency momentum over the consistent iterate,
/// T_{t+1} = P_C(P_M(S_t)), S_{t+1} = T_{t+1} + gamma (T_{t+1} - T_t), with
/// the momentum buffer starting at zero. gamma = 0 reduces exactly to GLA.
inline RunReport run_fgla(const Measurements& r, const StftPlan& plan, const SolverConfig& config,
                          const InitState& init) {
  config.validate();
  if (r.d != 1) throw InputError("run_fgla: measurements must be magnitudes (d = 1)");
  const ProblemSpec quad{DivergenceSpec::quadratic(), Direction::right, 1, config.epsilon};

  detail::RunTracker tracker(config, init.x0.sample_rate, 0);
  const int rate = init.x0.sample_rate;
  ArrayXd x = init.x0.samples;
  TfMatrix S = stft(plan, detail::repad(plan, x, rate));
  TfMatrix T = S;
  ArrayXXcd t_old = ArrayXXcd::Zero(S.h.rows(), S.h.cols());

  for (int t = 0; t <= config.iterations; ++t) {
    if (!S.h.allFinite()) tracker.diverge(t, "non-finite iterate");
    tracker.observe(t, objective_value(quad, r, T), x);
    if (t == config.iterations) break;
    Real residual = 0.0;
    x = unpad_signal(istft(plan, magnitude_projection(r.values, S, config.epsilon), &residual),
                     plan)
            .samples;
    tracker.note_residual(residual);
    T = stft(plan, detail::repad(plan, x, rate));
    S.h = T.h + config.gamma * (T.h - t_old);
    t_old = T.h;
  }
  return tracker.take(x);
}

/// Consistency/magnitude splitting with a scaled dual variable:
/// X_{t+1} = P_M(Y_t - W_t); Y_{t+1} = P_C(X_{t+1} + W_t);
/// W_{t+1} = W_t + X_{t+1} - Y_{t+1}, starting from W = 0. The synthesized
/// output is the consistent iterate istft(Y).
inline RunReport run_gladmm(const Measurements& r, const StftPlan& plan,
                            const SolverConfig& config, const InitState& init) {
  config.validate();
  if (r.d != 1) throw InputError("run_gladmm: measurements must be magnitudes (d = 1)");
  const ProblemSpec quad{DivergenceSpec::quadratic(), Direction::right, 1, config.epsilon};

  detail::RunTracker tracker(config, init.x0.sample_rate, 0);
  const int rate = init.x0.sample_rate;
  ArrayXd x = init.x0.samples;
  TfMatrix Y = stft(plan, detail::repad(plan, x, rate));
  ArrayXXcd w = ArrayXXcd::Zero(Y.h.rows(), Y.h.cols());

  for (int t = 0; t <= config.iterations; ++t) {
    if (!Y.h.allFinite() || !w.allFinite()) tracker.diverge(t, "non-finite iterate");
    tracker.observe(t, objective_value(quad, r, Y), x);
    if (t == config.iterations) break;
    TfMatrix Xm;
    Xm.fft_size = Y.fft_size;
    Xm.h = Y.h - w;
    Xm = magnitude_projection(r.values, Xm, config.epsilon);
    TfMatrix pre_c;
    pre_c.fft_size = Y.fft_size;
    pre_c.h = Xm.h + w;
    Real residual = 0.0;
    x = unpad_signal(istft(plan, pre_c, &residual), plan).samples;
    tracker.note_residual(residual);
    Y = stft(plan, detail::repad(plan, x, rate));
    w += Xm.h - Y.h;
  }
  return tracker.take(x);
}

// ---------------------------------------------------------------------------
// Benchmark grid defaults
// ---------------------------------------------------------------------------

inline SolverConfig default_config(const AlgorithmCode& code) {
  SolverConfig cfg;
  cfg.algorithm = code;
  cfg.iterations = 2500;
  cfg.gamma = 0.99;
  cfg.rho = 0.1;
  cfg.mu = 0.0;  // unset; only grid codes below carry a tuned step
  static const std::pair<const char*, Real> step_table[] = {
      {"G.05.R1", 1e-1}, {"G.05.L1", 1e-6}, {"G.KL.R1", 1e-4}, {"G.KL.L1", 1e-1},
      {"G.QD.1", 1e-0},  {"G.IS.R2", 1e-7}, {"G.05.R2", 1e-3}, {"G.05.L2", 1e-5},
      {"G.KL.R2", 1e-1}, {"G.KL.L2", 1e-1}, {"G.QD.2", 1e-5},
  };
  for (const auto& [name, mu] : step_table)
    if (code.canonical == name) cfg.mu = mu;
  return cfg;
}

}  // namespace bpr
