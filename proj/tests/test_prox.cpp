#include "bpr/prox.hpp"

#include <doctest.h>

using namespace bpr;

namespace {

Real prox_objective(ProxForm form, Real rho, Real r, Real y, Real u) {
  Real div = 0;
  switch (form) {
    case ProxForm::quadratic: div = 0.5 * (u - r) * (u - r); break;
    case ProxForm::kl_right:  // D_KL(r | u)
      div = (r > 0 ? r * (std::log(r) - std::log(u)) : 0.0) - (r - u);
      break;
    case ProxForm::kl_left:  // D_KL(u | r)
      div = (u > 0 ? u * (std::log(u) - std::log(r)) : 0.0) - (u - r);
      break;
    case ProxForm::is_left:  // D_IS(u | r)
      div = u / r - std::log(u / r) - 1.0;
      break;
  }
  return div + 0.5 * rho * (u - y) * (u - y);
}

// Brute-force scalar minimization oracle (golden section) on [lo, hi].
Real golden_section(ProxForm form, Real rho, Real r, Real y) {
  const Real lo0 = (form == ProxForm::quadratic || form == ProxForm::kl_right) ? 0.0 : 1e-12;
  Real lo = lo0;
  Real hi = std::max(y, 0.0) + r + 10.0;
  const Real inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  Real a = hi - inv_phi * (hi - lo);
  Real b = lo + inv_phi * (hi - lo);
  Real fa = prox_objective(form, rho, r, y, a);
  Real fb = prox_objective(form, rho, r, y, b);
  while (hi - lo > 1e-10) {
    if (fa < fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - inv_phi * (hi - lo);
      fa = prox_objective(form, rho, r, y, a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + inv_phi * (hi - lo);
      fb = prox_objective(form, rho, r, y, b);
    }
  }
  return 0.5 * (lo + hi);
}

Real closed_form(ProxForm form, Real rho, Real r, Real y, Real eps = kDefaultEpsilon) {
  ProxSpec spec{form, rho};
  ArrayXXd rr(1, 1), yy(1, 1);
  rr(0, 0) = r;
  yy(0, 0) = y;
  return prox_div(spec, rr, yy, eps)(0, 0);
}

}  // namespace

TEST_CASE("lambert w identity on the fixed grid") {
  const Real grid[] = {0.0, 1e-8, 1.0, std::exp(1.0), 10.0, 1e3, 1e8};
  for (Real z : grid) {
    const Real w = lambert_w0(z);
    CAPTURE(z);
    CHECK(std::abs(w * std::exp(w) - z) <= 1e-12 * (1.0 + z));
    CHECK(w >= 0.0);
  }
  CHECK(lambert_w0(0.0) == 0.0);
  CHECK(lambert_w0(std::exp(1.0)) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(lambert_w0(1.0) == doctest::Approx(0.5671432904097838).epsilon(1e-13));
  CHECK_THROWS_AS(lambert_w0(-1e-9), DomainError);
}

TEST_CASE("lambert w log-domain variant handles huge composite arguments") {
  // w + log w = L checked directly, plus consistency with the direct branch.
  for (Real L : {1.0, 10.0, 700.0, 1e5, 1e7}) {
    const Real w = lambert_w0_from_log(L);
    CHECK(std::abs(w + std::log(w) - L) <= 1e-10 * (1.0 + L));
  }
  const Real direct = lambert_w0(1e8);
  const Real via_log = lambert_w0_from_log(std::log(1e8));
  CHECK(direct == doctest::Approx(via_log).epsilon(1e-12));
}

TEST_CASE("prox spec construction enforces the supported set") {
  CHECK_NOTHROW(ProxSpec::make(DivergenceSpec::quadratic(), Direction::right, 1.0));
  CHECK_NOTHROW(ProxSpec::make(DivergenceSpec::quadratic(), Direction::left, 1.0));
  CHECK(ProxSpec::make(DivergenceSpec::kl(), Direction::right, 1.0).form == ProxForm::kl_right);
  CHECK(ProxSpec::make(DivergenceSpec::kl(), Direction::left, 1.0).form == ProxForm::kl_left);
  CHECK(ProxSpec::make(DivergenceSpec::is(), Direction::left, 1.0).form == ProxForm::is_left);
  CHECK_THROWS_AS(ProxSpec::make(DivergenceSpec::is(), Direction::right, 1.0), UnsupportedError);
  CHECK_THROWS_AS(ProxSpec::make(DivergenceSpec::beta_div(0.5), Direction::left, 1.0),
                  UnsupportedError);
  CHECK_THROWS_AS(ProxSpec::make(DivergenceSpec::quadratic(), Direction::right, 0.0), ConfigError);
}

TEST_CASE("prox closed-form spot values") {
  CHECK(closed_form(ProxForm::quadratic, 1.0, 0.0, 2.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(closed_form(ProxForm::kl_left, 1.0, 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(closed_form(ProxForm::is_left, 1.0, 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  // y = r is a fixed point of every form.
  Rng rng(5);
  for (auto form :
       {ProxForm::quadratic, ProxForm::kl_right, ProxForm::kl_left, ProxForm::is_left}) {
    for (int rep = 0; rep < 20; ++rep) {
      const Real rho = std::pow(10.0, rng.uniform(-2, 1));
      const Real r = 0.1 + 9.9 * rng.uniform();
      CHECK(closed_form(form, rho, r, r) == doctest::Approx(r).epsilon(1e-10));
    }
  }
}

TEST_CASE("prox matches the golden-section oracle and stays nonnegative") {
  Rng rng(99);
  for (auto form :
       {ProxForm::quadratic, ProxForm::kl_right, ProxForm::kl_left, ProxForm::is_left}) {
    for (int rep = 0; rep < 1000; ++rep) {
      const Real rho = std::pow(10.0, rng.uniform(-2, 1));
      Real r = 10.0 * rng.uniform();
      const Real y = rng.uniform(-10, 10);
      if (form == ProxForm::is_left) r = std::max(r, kDefaultEpsilon);
      if (form == ProxForm::kl_left && r == 0.0) r = 1e-3;
      const Real u = closed_form(form, rho, r, y);
      const Real oracle = golden_section(form, rho, r, y);
      CAPTURE(static_cast<int>(form));
      CAPTURE(rho);
      CAPTURE(r);
      CAPTURE(y);
      CHECK(u >= 0.0);
      CHECK(std::abs(u - oracle) <= 1e-6);
    }
  }
}

TEST_CASE("prox output is nonnegative even for negative anchors") {
  Rng rng(7);
  for (auto form :
       {ProxForm::quadratic, ProxForm::kl_right, ProxForm::kl_left, ProxForm::is_left}) {
    for (int rep = 0; rep < 200; ++rep) {
      const Real rho = std::pow(10.0, rng.uniform(-2, 1));
      const Real r = (form == ProxForm::is_left ? 0.01 : 0.0) + 10.0 * rng.uniform();
      const Real y = rng.uniform(-20, -0.1);
      CHECK(closed_form(form, rho, r, y) >= 0.0);
    }
  }
}

TEST_CASE("prox operators are nonexpansive") {
  Rng rng(13);
  for (auto form :
       {ProxForm::quadratic, ProxForm::kl_right, ProxForm::kl_left, ProxForm::is_left}) {
    for (int rep = 0; rep < 200; ++rep) {
      const Real rho = std::pow(10.0, rng.uniform(-2, 1));
      const Real r = 0.05 + 10.0 * rng.uniform();
      const Real y1 = rng.uniform(-10, 10);
      const Real y2 = rng.uniform(-10, 10);
      const Real u1 = closed_form(form, rho, r, y1);
      const Real u2 = closed_form(form, rho, r, y2);
      CHECK(std::abs(u1 - u2) <= std::abs(y1 - y2) + 1e-12);
    }
  }
}

TEST_CASE("prox tends to the identity as rho grows") {
  Rng rng(21);
  const Real rho = 1e6;
  for (auto form :
       {ProxForm::quadratic, ProxForm::kl_right, ProxForm::kl_left, ProxForm::is_left}) {
    for (int rep = 0; rep < 50; ++rep) {
      const Real r = 0.1 + 9.9 * rng.uniform();
      const Real y = 0.1 + 9.9 * rng.uniform();  // inside the divergence domain
      CHECK(closed_form(form, rho, r, y) == doctest::Approx(y).epsilon(1e-3));
    }
  }
}

TEST_CASE("prox input validation") {
  ProxSpec spec{ProxForm::quadratic, 1.0};
  ArrayXXd r(1, 2), y(1, 1);
  r.setZero();
  y.setZero();
  CHECK_THROWS_AS(prox_div(spec, r, y), InputError);
  ArrayXXd rneg(1, 1), y1(1, 1);
  rneg(0, 0) = -1.0;
  y1(0, 0) = 0.5;
  CHECK_THROWS_AS(prox_div(spec, rneg, y1), DomainError);
}
