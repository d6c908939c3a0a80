#include "bpr/divergence.hpp"

#include <doctest.h>

#include <vector>

#include "bpr/solvers.hpp"

using namespace bpr;

namespace {

// Central finite differences of objective_value, the independent oracle for
// objective_grad. Step 1e-6 per coordinate.
ArrayXd fd_gradient(const ProblemSpec& p, const Measurements& r, const TimeSignal& x,
                    const StftPlan& plan, Real h = 1e-6) {
  ArrayXd g(x.size());
  TimeSignal probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    probe.samples[i] = x.samples[i] + h;
    const Real up = objective_value(p, r, probe, plan);
    probe.samples[i] = x.samples[i] - h;
    const Real dn = objective_value(p, r, probe, plan);
    probe.samples[i] = x.samples[i];
    g[i] = (up - dn) / (2 * h);
  }
  return g;
}

// Draws a signal whose spectrum magnitudes stay well away from the epsilon
// floor, so the objective is smooth across the finite-difference stencil.
TimeSignal fd_safe_signal(const StftPlan& plan, Rng& rng) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    TimeSignal x;
    x.samples = rng.gaussian_vector(plan.signal_length());
    x = pad_signal(x, plan);
    const ArrayXXd mags = stft(plan, x).h.abs();
    if (mags.minCoeff() > 0.05 * mags.mean()) return x;
  }
  throw std::runtime_error("fd_safe_signal: no draw with bounded-away spectrum");
}

StftPlan small_plan() { return StftPlan(sine_bell_window(16), 8, 16, 64); }

}  // namespace

TEST_CASE("generator triples match the closed forms") {
  const auto q = generator_eval(DivergenceSpec::quadratic(), 3.0);
  CHECK(q.psi == doctest::Approx(4.5).epsilon(1e-14));
  CHECK(q.psi_prime == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(q.psi_second == doctest::Approx(1.0).epsilon(1e-14));

  const auto is = generator_eval(DivergenceSpec::is(), 1.0);
  CHECK(is.psi == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(is.psi_prime == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(is.psi_second == doctest::Approx(1.0).epsilon(1e-14));

  const auto kl = generator_eval(DivergenceSpec::kl(), 1.0);
  CHECK(kl.psi == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(kl.psi_prime == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(kl.psi_second == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("generator domain errors at zero flag a missing floor") {
  CHECK_NOTHROW(generator_eval(DivergenceSpec::quadratic(), 0.0));
  CHECK_THROWS_AS(generator_eval(DivergenceSpec::kl(), 0.0), DomainError);
  CHECK_THROWS_AS(generator_eval(DivergenceSpec::is(), 0.0), DomainError);
  CHECK_THROWS_AS(generator_eval(DivergenceSpec::beta_div(0.5), 0.0), DomainError);
  CHECK_NOTHROW(generator_eval(DivergenceSpec::beta_div(2.5), 0.0));
  CHECK_THROWS_AS(generator_eval(DivergenceSpec::kl(), -1.0), DomainError);
}

TEST_CASE("beta values 0 and 1 are rejected in favor of the named families") {
  CHECK_THROWS_AS(DivergenceSpec::beta_div(0.0), ConfigError);
  CHECK_THROWS_AS(DivergenceSpec::beta_div(1.0), ConfigError);
  CHECK_THROWS_AS(DivergenceSpec::beta_div(1.0 + 1e-12), ConfigError);
  CHECK_THROWS_AS(DivergenceSpec::beta_div(-1e-12), ConfigError);
  CHECK_NOTHROW(DivergenceSpec::beta_div(0.5));
  CHECK_NOTHROW(DivergenceSpec::beta_div(2.0));
}

TEST_CASE("bregman divergence values") {
  ArrayXd y(1), z(1);
  y << 3.0;
  z << 1.0;
  CHECK(bregman_div(DivergenceSpec::quadratic(), y, z) == doctest::Approx(2.0).epsilon(1e-14));

  y << 2.0;
  CHECK(bregman_div(DivergenceSpec::kl(), y, z) ==
        doctest::Approx(0.3862943611198906).epsilon(1e-13));

  Rng rng(1);
  for (const auto& spec : {DivergenceSpec::quadratic(), DivergenceSpec::kl(), DivergenceSpec::is(),
                           DivergenceSpec::beta_div(0.5), DivergenceSpec::beta_div(1.7)}) {
    ArrayXd v = 0.5 + rng.gaussian_vector(16).abs();
    CHECK(bregman_div(spec, v, v) == doctest::Approx(0.0).epsilon(1e-12));
  }

  ArrayXd wrong(2);
  wrong << 1.0, 2.0;
  CHECK_THROWS_AS(bregman_div(DivergenceSpec::kl(), y, wrong), InputError);
  ArrayXd neg(1);
  neg << -0.5;
  CHECK_THROWS_AS(bregman_div(DivergenceSpec::quadratic(), neg, z), DomainError);
}

TEST_CASE("bregman divergence is nonnegative and zero only at equality") {
  Rng rng(17);
  for (const auto& spec : {DivergenceSpec::quadratic(), DivergenceSpec::kl(), DivergenceSpec::is(),
                           DivergenceSpec::beta_div(0.5)}) {
    for (int rep = 0; rep < 200; ++rep) {
      ArrayXd y = 0.01 + 5.0 * ArrayXd::NullaryExpr(8, [&](Index) { return rng.uniform(); });
      ArrayXd z = 0.01 + 5.0 * ArrayXd::NullaryExpr(8, [&](Index) { return rng.uniform(); });
      const Real d = bregman_div(spec, y, z);
      CHECK(d >= 0.0);
      if ((y - z).abs().maxCoeff() > 1e-3) CHECK(d > 0.0);
    }
  }
}

TEST_CASE("bregman divergence is convex in its first argument") {
  Rng rng(23);
  for (const auto& spec : {DivergenceSpec::quadratic(), DivergenceSpec::kl(), DivergenceSpec::is(),
                           DivergenceSpec::beta_div(0.5)}) {
    for (int rep = 0; rep < 100; ++rep) {
      ArrayXd y1 = 0.05 + 4.0 * ArrayXd::NullaryExpr(6, [&](Index) { return rng.uniform(); });
      ArrayXd y2 = 0.05 + 4.0 * ArrayXd::NullaryExpr(6, [&](Index) { return rng.uniform(); });
      ArrayXd z = 0.05 + 4.0 * ArrayXd::NullaryExpr(6, [&](Index) { return rng.uniform(); });
      const Real lam = rng.uniform();
      const Real lhs = bregman_div(spec, lam * y1 + (1 - lam) * y2, z);
      const Real rhs =
          lam * bregman_div(spec, y1, z) + (1 - lam) * bregman_div(spec, y2, z);
      CHECK(lhs <= rhs + 1e-10);
    }
  }
}

TEST_CASE("beta aliases agree with the named families on divergences and gradients") {
  // psi itself is only defined up to an affine term, which cancels in every
  // divergence value and every gradient; those are what must agree.
  Rng rng(31);
  const auto b2 = DivergenceSpec::beta_div(2.0);
  const auto qd = DivergenceSpec::quadratic();
  for (int rep = 0; rep < 100; ++rep) {
    ArrayXd y = 0.05 + 4.0 * ArrayXd::NullaryExpr(6, [&](Index) { return rng.uniform(); });
    ArrayXd z = 0.05 + 4.0 * ArrayXd::NullaryExpr(6, [&](Index) { return rng.uniform(); });
    CHECK(bregman_div(b2, y, z) == doctest::Approx(bregman_div(qd, y, z)).epsilon(1e-10));
    // second derivatives agree exactly; first-derivative differences too
    const Real za = 0.1 + 3.0 * rng.uniform();
    const Real zb = 0.1 + 3.0 * rng.uniform();
    CHECK(generator_eval(b2, za).psi_second ==
          doctest::Approx(generator_eval(qd, za).psi_second).epsilon(1e-12));
    const Real diff_beta = generator_eval(b2, za).psi_prime - generator_eval(b2, zb).psi_prime;
    const Real diff_named = generator_eval(qd, za).psi_prime - generator_eval(qd, zb).psi_prime;
    CHECK(diff_beta == doctest::Approx(diff_named).epsilon(1e-10));
  }

  StftPlan plan = small_plan();
  TimeSignal x = fd_safe_signal(plan, rng);
  TimeSignal xs = fd_safe_signal(plan, rng);
  Measurements r{stft(plan, xs).h.abs(), 1};
  for (Direction dir : {Direction::right, Direction::left}) {
    const ProblemSpec pb{b2, dir, 1, kDefaultEpsilon};
    const ProblemSpec pq{qd, dir, 1, kDefaultEpsilon};
    CHECK(objective_value(pb, r, x, plan) ==
          doctest::Approx(objective_value(pq, r, x, plan)).epsilon(1e-10));
    const ArrayXd gb = objective_grad(pb, r, x, plan);
    const ArrayXd gq = objective_grad(pq, r, x, plan);
    CHECK(std::sqrt((gb - gq).square().sum()) <= 1e-10 * std::sqrt(gq.square().sum()));
  }
}

TEST_CASE("objective is zero on exact measurements, for every family and direction") {
  StftPlan plan = small_plan();
  Rng rng(3);
  const TimeSignal x = fd_safe_signal(plan, rng);
  for (int d : {1, 2}) {
    const ArrayXXd mags = stft(plan, x).h.abs();
    Measurements r{d == 2 ? ArrayXXd(mags.square()) : mags, d};
    for (const auto& spec : {DivergenceSpec::quadratic(), DivergenceSpec::kl(),
                             DivergenceSpec::is(), DivergenceSpec::beta_div(0.5)}) {
      for (Direction dir : {Direction::right, Direction::left}) {
        const ProblemSpec p{spec, dir, d, kDefaultEpsilon};
        CHECK(objective_value(p, r, x, plan) <= 1e-12);
      }
    }
  }
}

TEST_CASE("quadratic objective collapses the two directions") {
  StftPlan plan = small_plan();
  Rng rng(13);
  const TimeSignal x = fd_safe_signal(plan, rng);
  const TimeSignal xs = fd_safe_signal(plan, rng);
  for (int d : {1, 2}) {
    const ArrayXXd mags = stft(plan, xs).h.abs();
    Measurements r{d == 2 ? ArrayXXd(mags.square()) : mags, d};
    const ProblemSpec right{DivergenceSpec::quadratic(), Direction::right, d, kDefaultEpsilon};
    const ProblemSpec left{DivergenceSpec::quadratic(), Direction::left, d, kDefaultEpsilon};
    const Real jr = objective_value(right, r, x, plan);
    const Real jl = objective_value(left, r, x, plan);
    CHECK(jr == doctest::Approx(jl).epsilon(1e-12));
    const ArrayXd gr = objective_grad(right, r, x, plan);
    const ArrayXd gl = objective_grad(left, r, x, plan);
    CHECK(((gr - gl).abs().maxCoeff()) <= 1e-12 * gr.abs().maxCoeff());
  }
}

TEST_CASE("IS right objective value on a one-bin example") {
  // One rectangular frame of length 1: a single TF bin with |X| = 1.
  StftPlan plan(custom_window(ArrayXd::Ones(1)), 1, 1, 1);
  TimeSignal x;
  x.samples = ArrayXd::Ones(1);
  Measurements r{ArrayXXd::Constant(1, 1, std::exp(1.0)), 1};
  const ProblemSpec p{DivergenceSpec::is(), Direction::right, 1, kDefaultEpsilon};
  CHECK(objective_value(p, r, x, plan) ==
        doctest::Approx(std::exp(1.0) - 2.0).epsilon(1e-13));
}

TEST_CASE("gradient vanishes at exact measurements") {
  StftPlan plan = small_plan();
  Rng rng(7);
  const TimeSignal x = fd_safe_signal(plan, rng);
  for (int d : {1, 2}) {
    const ArrayXXd mags = stft(plan, x).h.abs();
    Measurements r{d == 2 ? ArrayXXd(mags.square()) : mags, d};
    for (const auto& spec : {DivergenceSpec::quadratic(), DivergenceSpec::kl(),
                             DivergenceSpec::is(), DivergenceSpec::beta_div(0.5)}) {
      for (Direction dir : {Direction::right, Direction::left}) {
        const ProblemSpec p{spec, dir, d, kDefaultEpsilon};
        const ArrayXd g = objective_grad(p, r, x, plan);
        CHECK(std::sqrt(g.square().sum()) <= 1e-8 * std::sqrt(x.samples.square().sum()));
      }
    }
  }
}

TEST_CASE("analytic gradients match central finite differences for all grid setups") {
  StftPlan plan = small_plan();
  Rng rng(1234);
  const char* codes[] = {"G.05.R1", "G.05.L1", "G.KL.R1", "G.KL.L1", "G.QD.1", "G.IS.R2",
                         "G.05.R2", "G.05.L2", "G.KL.R2", "G.KL.L2", "G.QD.2"};
  for (const char* code_text : codes) {
    const AlgorithmCode code = parse_algorithm_code(code_text);
    const ProblemSpec p = problem_for(code);
    for (int rep = 0; rep < 3; ++rep) {
      const TimeSignal x = fd_safe_signal(plan, rng);
      const TimeSignal xs = fd_safe_signal(plan, rng);
      const ArrayXXd mags = stft(plan, xs).h.abs();
      Measurements r{p.d == 2 ? ArrayXXd(mags.square()) : mags, p.d};
      const ArrayXd analytic = objective_grad(p, r, x, plan);
      const ArrayXd numeric = fd_gradient(p, r, x, plan);
      const Real rel = std::sqrt((analytic - numeric).square().sum()) /
                       std::sqrt(numeric.square().sum());
      CAPTURE(code_text);
      CAPTURE(rep);
      CHECK(rel <= 1e-5);
    }
  }
}

TEST_CASE("left problems floor zero measurements instead of failing") {
  StftPlan plan = small_plan();
  Rng rng(77);
  const TimeSignal x = fd_safe_signal(plan, rng);
  Measurements r{ArrayXXd::Zero(plan.num_bins(), plan.num_frames()), 1};
  const ProblemSpec p{DivergenceSpec::kl(), Direction::left, 1, kDefaultEpsilon};
  CHECK_NOTHROW(objective_grad(p, r, x, plan));
  CHECK(count_floored(p, r) == plan.num_bins() * plan.num_frames());
  const ProblemSpec q{DivergenceSpec::quadratic(), Direction::right, 1, kDefaultEpsilon};
  CHECK(count_floored(q, r) == 0);
}
