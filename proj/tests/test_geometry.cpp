#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "subspec/geometry.hpp"
#include "support.hpp"

using namespace subspec;

namespace {

template <class F>
void expect_throws_kind(F&& f, ErrorKind kind) {
  try {
    f();
    FAIL("expected an Error");
  } catch (const Error& e) {
    CHECK(e.kind() == kind);
  }
}

}  // namespace

TEST_CASE("analytic warp derivatives match central differences") {
  const std::vector<WarpFunction> warps = {
      WarpFunction::constant(2.0),        WarpFunction::exponential(1.5, -0.7),
      WarpFunction::gaussian(1.0, -0.3),  WarpFunction::cosh(0.5, 1.2),
      WarpFunction::sinh(1.0, 0.8)};
  const double h = 1e-4;
  for (const auto& w : warps) {
    for (double r : {0.3, 0.9, 1.7}) {
      const double d1 = (w.value(r + h) - w.value(r - h)) / (2 * h);
      const double d2 = (w.value(r + h) - 2 * w.value(r) + w.value(r - h)) / (h * h);
      CHECK(w.d1(r) == doctest::Approx(d1).epsilon(1e-7));
      CHECK(w.d2(r) == doctest::Approx(d2).epsilon(1e-5));
      CHECK(w.log_derivative(r) == doctest::Approx(w.d1(r) / w.value(r)));
      const double ld1 = (w.log_derivative(r + h) - w.log_derivative(r - h)) / (2 * h);
      CHECK(w.log_derivative_d1(r) == doctest::Approx(ld1).epsilon(1e-6));
    }
  }
}

TEST_CASE("tabulated warp reproduces a quadratic at the nodes") {
  std::vector<double> nodes, samples;
  for (int i = 0; i <= 10; ++i) {
    const double r = 0.2 * i;
    nodes.push_back(r);
    samples.push_back(1.0 + r * r);
  }
  const auto w = WarpFunction::tabulated(nodes, samples);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    CHECK(w.value(nodes[i]) == doctest::Approx(samples[i]));
    CHECK(w.d1(nodes[i]) == doctest::Approx(2 * nodes[i]).epsilon(1e-12));
    CHECK(w.d2(nodes[i]) == doctest::Approx(2.0).epsilon(1e-10));
  }
  CHECK(w.value(0.1) == doctest::Approx(0.5 * (1.0 + 1.04)));
  expect_throws_kind([&] { (void)w.value(2.5); }, ErrorKind::invalid_warp);
}

TEST_CASE("invalid warps and fibers are rejected") {
  expect_throws_kind([] { (void)WarpFunction::constant(0.0); }, ErrorKind::invalid_warp);
  expect_throws_kind([] { (void)WarpFunction::sinh(1.0, 0.0); }, ErrorKind::invalid_warp);
  expect_throws_kind([] { (void)WarpFunction::tabulated({0, 1, 2, 3}, {1, 1, -1, 1}); },
                     ErrorKind::invalid_warp);
  expect_throws_kind([] { (void)WarpFunction::tabulated({0, 1, 1, 3}, {1, 1, 1, 1}); },
                     ErrorKind::invalid_warp);
  expect_throws_kind([] { (void)FiberSpec::circle(-1.0); }, ErrorKind::invalid_fiber);
  expect_throws_kind([] { (void)FiberSpec::explicit_spectrum(1, 1.0, {0.0, 0.0, 1.0}); },
                     ErrorKind::invalid_fiber);
  expect_throws_kind([] { (void)FiberSpec::explicit_spectrum(1, 1.0, {0.5, 1.0}); },
                     ErrorKind::invalid_fiber);
  expect_throws_kind([] { (void)FiberSpec::noncompact(0.25, 2).volume(); }, ErrorKind::invalid_fiber);
}

TEST_CASE("sinh vanishes only at zero") {
  const auto w = WarpFunction::sinh(1.0, 1.0);
  CHECK(w.vanishes_at(0.0));
  CHECK_FALSE(w.vanishes_at(0.5));
  CHECK_FALSE(WarpFunction::cosh(1.0, 1.0).vanishes_at(0.0));
}

TEST_CASE("circle and sphere spectra with multiplicities") {
  const auto circle = FiberSpec::circle(2.0);
  CHECK(circle.volume() == doctest::Approx(4 * std::numbers::pi));
  const auto cm = circle.first_modes(4);
  REQUIRE(cm.size() == 4);
  CHECK(cm[0].nu == 0.0);
  CHECK(cm[0].multiplicity == 1);
  for (int j = 1; j < 4; ++j) {
    CHECK(cm[j].nu == doctest::Approx(j * j / 4.0));
    CHECK(cm[j].multiplicity == 2);
  }
  const auto s2 = FiberSpec::sphere(2);
  CHECK(s2.volume() == doctest::Approx(4 * std::numbers::pi));
  const auto sm = s2.first_modes(4);
  for (int l = 0; l < 4; ++l) {
    CHECK(sm[l].nu == doctest::Approx(l * (l + 1.0)));
    CHECK(sm[l].multiplicity == 2 * l + 1);
  }
  CHECK(FiberSpec::sphere(3).volume() == doctest::Approx(2 * std::numbers::pi * std::numbers::pi));
}

TEST_CASE("flat torus and explicit spectra") {
  const auto t = FiberSpec::flat_torus({2 * std::numbers::pi, 2 * std::numbers::pi});
  const auto modes = t.modes_up_to(2.0);
  REQUIRE(modes.size() == 3);
  CHECK(modes[0].multiplicity == 1);
  CHECK(modes[1].nu == doctest::Approx(1.0));
  CHECK(modes[1].multiplicity == 4);
  CHECK(modes[2].nu == doctest::Approx(2.0));
  CHECK(modes[2].multiplicity == 4);
  CHECK(t.volume() == doctest::Approx(4 * std::numbers::pi * std::numbers::pi));

  const auto e = FiberSpec::explicit_spectrum(2, 3.0, {0.0, 1.0, 1.0, 2.5});
  const auto em = e.first_modes(5);
  REQUIRE(em.size() == 3);
  CHECK(em[1].multiplicity == 2);
  CHECK(em[2].nu == 2.5);
  CHECK(e.lambda0() == 0.0);

  const auto nc = FiberSpec::noncompact(0.25, 2);
  CHECK_FALSE(nc.closed());
  CHECK(nc.lambda0() == 0.25);
}

TEST_CASE("weighted interval validation") {
  auto iv = WeightedInterval::hyperbolic(2, 5.0);
  CHECK_NOTHROW(iv.validate());
  CHECK(iv.is_pole(0.0));
  CHECK(iv.weight(1.0) == doctest::Approx(std::sinh(1.0)));
  iv.left.condition = EndCondition::dirichlet;
  expect_throws_kind([&] { iv.validate(); }, ErrorKind::invalid_case);
  expect_throws_kind([] { WeightedInterval::uniform(1.0, 1.0).validate(); }, ErrorKind::degenerate_range);
  auto tr = WeightedInterval::uniform(-2.0, 2.0, EndCondition::neumann);
  tr.left.truncated = true;
  expect_throws_kind([&] { tr.validate(); }, ErrorKind::invalid_case);
  expect_throws_kind([] { (void)WeightedInterval::hyperbolic(1, 3.0); }, ErrorKind::invalid_model);
}

TEST_CASE("case validation") {
  auto c = testing::interval_case(0.0, 1.0, 100, WarpFunction::constant(1.0));
  CHECK_NOTHROW(c.validate());
  c.warp = WarpFunction::exponential(1.0, 1.0);
  expect_throws_kind([&] { c.validate(); }, ErrorKind::invalid_case);
  c.kind = SubmersionKind::warped;
  CHECK_NOTHROW(c.validate());
  c.resolution = 4;
  expect_throws_kind([&] { c.validate(); }, ErrorKind::invalid_case);
  auto line = testing::line_case(5.0, 100, WarpFunction::constant(1.0));
  line.base.right.position = 4.0;
  expect_throws_kind([&] { line.validate(); }, ErrorKind::invalid_case);
}

TEST_CASE("truncation keeps the spacing") {
  const auto c = testing::line_case(5.0, 100, WarpFunction::constant(1.0)).with_truncation(10.0);
  CHECK(c.truncation == 10.0);
  CHECK(c.base.left.position == -10.0);
  CHECK(c.base.right.position == 10.0);
  CHECK(c.resolution == 200);
  const auto b = testing::interval_case(0, 1, 50, WarpFunction::constant(1.0));
  CHECK(b.with_truncation(3.0).resolution == 50);
}

TEST_CASE("mean curvature bound") {
  auto c = testing::line_case(10.0, 100, WarpFunction::exponential(1.0, -1.0));
  auto C = mean_curvature_bound(c);
  CHECK(C.bounded);
  CHECK(C.value == doctest::Approx(1.0));
  c.fiber = FiberSpec::sphere(2);
  CHECK(mean_curvature_bound(c).value == doctest::Approx(2.0));

  auto g = testing::line_case(3.0, 100, WarpFunction::gaussian(1.0, -1.0));
  CHECK_FALSE(mean_curvature_bound(g).bounded);
  auto gb = testing::interval_case(-2.0, 1.0, 100, WarpFunction::gaussian(1.0, -1.0));
  CHECK(mean_curvature_bound(gb).value == doctest::Approx(4.0));

  auto ch = testing::interval_case(-2.0, 2.0, 100, WarpFunction::cosh(1.0, 1.0));
  CHECK(mean_curvature_bound(ch).value == doctest::Approx(std::tanh(2.0)));
  auto chl = testing::line_case(4.0, 100, WarpFunction::cosh(1.0, 0.5));
  CHECK(mean_curvature_bound(chl).value == doctest::Approx(0.5));

  ch.curvature_override = 0.0;
  CHECK(mean_curvature_bound(ch).value == 0.0);
}

TEST_CASE("Schrodinger potential: closed forms and the vector-field identity") {
  // psi = e^{-r}, k = 1: sqrt V = e^{-r/2}, potential -1/4 + ... = 1/4 constant.
  auto cusp = testing::line_case(10.0, 100, WarpFunction::exponential(1.0, -1.0));
  const SchrodingerPotential sp(cusp);
  for (double r : {-3.0, 0.0, 2.5}) CHECK(sp(r) == doctest::Approx(0.25));

  // psi = e^{-r^2}: potential r^2 - 1.
  auto gauss = testing::line_case(5.0, 100, WarpFunction::gaussian(1.0, -1.0));
  const SchrodingerPotential gp(gauss);
  for (double r : {-1.5, 0.0, 0.7}) CHECK(gp(r) == doctest::Approx(r * r - 1.0));

  // The two expressions agree wherever both are defined.
  std::vector<SubmersionCase> cases = {cusp, gauss};
  auto hc = testing::hyperbolic_case(3, 6.0, 100);
  hc.kind = SubmersionKind::warped;
  hc.warp = WarpFunction::cosh(1.0, 0.5);
  hc.fiber = FiberSpec::sphere(2);
  cases.push_back(hc);
  for (const auto& c : cases) {
    const SchrodingerPotential p(c);
    for (double r : {0.4, 1.1, 2.3}) CHECK(p(r) == doctest::Approx(p.vector_field_form(r)).epsilon(1e-10));
  }
  // At the pole the limit is finite and matches nearby values.
  const SchrodingerPotential hp(hc);
  CHECK(hp(0.0) == doctest::Approx(hp(1e-4)).epsilon(1e-3));
}

TEST_CASE("S is undefined or singular where it must be") {
  auto nc = testing::hyperbolic_case(2, 5.0, 100);
  nc.fiber = FiberSpec::noncompact(0.25, 1);
  expect_throws_kind([&] { SchrodingerPotential p(nc); }, ErrorKind::s_undefined);

  auto bad = testing::hyperbolic_case(2, 5.0, 100);
  bad.kind = SubmersionKind::warped;
  bad.warp = WarpFunction::exponential(1.0, 1.0);
  expect_throws_kind([&] { SchrodingerPotential p(bad); }, ErrorKind::singular_potential);
}

TEST_CASE("fiber bottom profile") {
  auto c = testing::hyperbolic_case(2, 4.0, 100);
  c.kind = SubmersionKind::warped;
  c.warp = WarpFunction::cosh(1.0, 1.0);
  c.fiber = FiberSpec::noncompact(1.0, 1);
  const auto p = fiber_lambda0_profile(c, {0.0, 1.0, 2.0});
  CHECK(p.values[0] == doctest::Approx(1.0));
  CHECK(p.values[2] == doctest::Approx(1.0 / std::pow(std::cosh(2.0), 2)));
  CHECK(p.infimum == p.values[2]);
  CHECK(p.spread > 0.0);

  c.fiber = FiberSpec::circle(1.0);
  const auto q = fiber_lambda0_profile(c, {0.0, 1.0});
  CHECK(q.infimum == 0.0);
  CHECK(q.spread == 0.0);
}

TEST_CASE("model-space bottoms") {
  CHECK(model_lambda0({ModelKind::hyperbolic, 2}).value == doctest::Approx(0.25));
  CHECK(model_lambda0({ModelKind::hyperbolic, 3}).value == doctest::Approx(1.0));
  CHECK(model_lambda0({ModelKind::kh, 2, 2}).value == doctest::Approx(1.0));
  CHECK(model_lambda0({ModelKind::kh, 4, 4}).value == doctest::Approx(9.0));
  CHECK(model_lambda0({ModelKind::kh, 2, 8}).value == doctest::Approx(16.0));
  expect_throws_kind([] { (void)model_lambda0({ModelKind::kh, 3, 8}); }, ErrorKind::invalid_model);
  expect_throws_kind([] { (void)model_lambda0({ModelKind::kh, 3, 3}); }, ErrorKind::invalid_model);

  // mu = 4: branch at mu_gamma = 2.
  CHECK(model_lambda0({ModelKind::quotient, 4, 2, 1.0}).value == doctest::Approx(4.0));
  CHECK(model_lambda0({ModelKind::quotient, 4, 2, 2.0}).value == doctest::Approx(4.0));
  CHECK(model_lambda0({ModelKind::quotient, 4, 2, 3.0}).value == doctest::Approx(3.0));
  CHECK(model_lambda0({ModelKind::quotient, 4, 2, 4.0}).value == doctest::Approx(0.0));
  expect_throws_kind([] { (void)model_lambda0({ModelKind::quotient, 4, 2, 5.0}); }, ErrorKind::invalid_model);

  const auto mk = model_lambda0({ModelKind::mckean, 3, 1, 0.0, 2.0});
  CHECK(mk.value == doctest::Approx(4.0));
  CHECK(mk.lower_bound);
  expect_throws_kind([] { (void)model_lambda0({ModelKind::hyperbolic, 1}); }, ErrorKind::invalid_model);
}

TEST_CASE("fiber volume and total density") {
  auto c = testing::hyperbolic_case(2, 4.0, 100);
  c.kind = SubmersionKind::warped;
  c.warp = WarpFunction::cosh(1.0, 1.0);
  c.fiber = FiberSpec::sphere(2);
  CHECK(c.fiber_volume(1.0) == doctest::Approx(4 * std::numbers::pi * std::pow(std::cosh(1.0), 2)));
  CHECK(c.total_density(1.0) == doctest::Approx(std::sinh(1.0) * c.fiber_volume(1.0)));
}
