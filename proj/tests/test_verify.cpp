#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "subspec/runner.hpp"
#include "subspec/verify.hpp"
#include "support.hpp"

using namespace subspec;

namespace {

std::map<std::string, Verdict> bundled_verdicts(const std::string& name) {
  CaseConfig cfg = resolve(testing::bundled_config(name), {});
  cfg.sweeps.clear();
  const PointResult pr = run_point(cfg, 0, {});
  REQUIRE(pr.failures.empty());
  std::map<std::string, Verdict> out;
  for (const auto& r : pr.reports) {
    CHECK(r.verdict == r.recompute());
    out[r.theorem] = r.verdict;
  }
  return out;
}

constexpr auto holds = Verdict::holds;
constexpr auto equality = Verdict::holds_with_equality;
constexpr auto violated = Verdict::violated_beyond_tolerance;
constexpr auto unmet = Verdict::hypotheses_not_met;

}  // namespace

TEST_CASE("check verdicts") {
  CHECK(inequality("x", 1, 2, 1.0, 1e-3).verdict() == holds);
  CHECK(inequality("x", 1, 1, 5e-4, 1e-3).verdict() == equality);
  CHECK(inequality("x", 1, 1, -5e-4, 1e-3).verdict() == equality);
  CHECK(inequality("x", 2, 1, -1.0, 1e-3).verdict() == violated);
  CHECK(inequality("x", 0, 0, NAN, 1e-3).verdict() == violated);
  CHECK(identity_check("id", 1e-14, 1e-12).verdict() == holds);
  CHECK(identity_check("id", 1e-11, 1e-12).verdict() == violated);
  CHECK(to_string(equality) == "holds-with-equality");
  CHECK(to_string(unmet) == "hypotheses-not-met");
}

TEST_CASE("report verdict recomputes from hypotheses and checks") {
  TheoremReport r;
  r.checks.push_back(inequality("primary", 1, 1, 0.0, 1e-6));
  r.checks.push_back(inequality("secondary", 1, 3, 2.0, 1e-6));
  CHECK(r.recompute() == equality);
  r.checks[0].slack = 1.0;
  CHECK(r.recompute() == holds);
  r.checks[1].slack = -1.0;
  CHECK(r.recompute() == violated);
  r.hypotheses.push_back({"h", false, ""});
  CHECK(r.recompute() == unmet);
}

TEST_CASE("bundled verdicts: product cases") {
  const auto cyl = bundled_verdicts("cylinder");
  CHECK(cyl.at("lower_bound") == equality);
  CHECK(cyl.at("schrodinger_comparison") == equality);
  CHECK(cyl.at("upper_bounds") == equality);
  CHECK(cyl.at("lift_identities") == holds);

  const auto flat = bundled_verdicts("flat_cylinder");
  CHECK(flat.at("lower_bound") == equality);
  CHECK(flat.at("discreteness") == holds);

  const auto h3 = bundled_verdicts("hyperbolic3");
  CHECK(h3.at("lower_bound") == equality);
  CHECK(h3.at("upper_bounds") == equality);

  const auto nc = bundled_verdicts("hyperbolic2_noncompact");
  CHECK(nc.at("lower_bound") == equality);
}

TEST_CASE("bundled verdicts: warped cases") {
  const auto cusp = bundled_verdicts("cusp");
  CHECK(cusp.at("lower_bound") == unmet);
  CHECK(cusp.at("schrodinger_comparison") == equality);
  CHECK(cusp.at("upper_bounds") == equality);
  CHECK(cusp.at("lift_identities") == holds);

  const auto g = bundled_verdicts("gaussian_cusp");
  CHECK(g.at("schrodinger_comparison") == equality);
  CHECK(g.at("discreteness") == unmet);

  const auto osc = bundled_verdicts("oscillator_line");
  CHECK(osc.at("discreteness") == unmet);

  const auto ch = bundled_verdicts("cosh");
  CHECK(ch.at("schrodinger_comparison") == equality);
  CHECK(ch.at("upper_bounds") == holds);
  CHECK(ch.at("pushdown") == equality);
  CHECK(ch.at("lift_identities") == holds);

  const auto hc = bundled_verdicts("hyperbolic2_cosh");
  CHECK(hc.at("lower_bound") == holds);
  CHECK(hc.at("pushdown") == equality);

  const auto half = bundled_verdicts("half_cusp");
  CHECK(half.at("discreteness") == holds);
  CHECK(half.at("upper_bounds") == equality);

  const auto v = bundled_verdicts("violation");
  CHECK(v.at("upper_bounds") == violated);
}

TEST_CASE("hypothesis gating") {
  auto c = testing::hyperbolic_case(2, 6.0, 600);
  c.fiber = FiberSpec::sphere(2);
  const auto push = check_pushdown_inequalities(c);
  CHECK(push.verdict == unmet);
  CHECK(push.checks.empty());

  // A collapsing warp has no Schrodinger reduction.
  auto s = testing::hyperbolic_case(2, 4.0, 400);
  s.kind = SubmersionKind::warped;
  s.warp = WarpFunction::sinh(1.0, 1.0);
  try {
    (void)check_schrodinger_comparison(s);
    FAIL("expected singular_potential");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::singular_potential);
  }
}

TEST_CASE("a flipped curvature term is detected") {
  const auto c = testing::bundled("cosh");
  const GridPtr g = build_grid(c.base, c.resolution, c.grading);
  const TensorOperator t = assemble_total_tensor(c, g, 32);
  const SLOperator base = assemble_base_operator(c.base, nullptr, g);
  const double C = mean_curvature_bound(c).value;
  TrialRng rng(5);
  int detected = 0, honest = 0;
  const int trials = 20;
  for (int i = 0; i < trials; ++i) {
    const auto f = random_tensor_function(t, rng);
    const auto ok = evaluate_pushdown(c, t, base, f, C, 1.0);
    const auto bad = evaluate_pushdown(c, t, base, f, C, 1.0, true);
    honest += ok.nodewise_violations == 0 && ok.rayleigh_total >= ok.global_rhs - ok.global_allowance;
    detected += bad.nodewise_violations > 0;
  }
  CHECK(honest == trials);
  // A single trial can miss; the suite must not.
  CHECK(detected >= trials / 2);
}

TEST_CASE("a wrong mean-curvature bound is detected") {
  auto c = testing::interval_case(0.0, 3.14159, 400, WarpFunction::exponential(1.0, -1.0));
  CHECK(check_upper_bounds(c).verdict != violated);
  c.curvature_override = 0.0;
  CHECK(check_upper_bounds(c).verdict == violated);
}

TEST_CASE("seeded trials are reproducible") {
  const auto c = testing::bundled("cosh");
  VerifyOptions o;
  o.trials = 10;
  o.seed = 42;
  const auto a = check_pushdown_inequalities(c, o);
  const auto b = check_pushdown_inequalities(c, o);
  REQUIRE(a.checks.size() == b.checks.size());
  for (std::size_t i = 0; i < a.checks.size(); ++i) {
    CHECK(a.checks[i].lhs == b.checks[i].lhs);
    CHECK(a.checks[i].rhs == b.checks[i].rhs);
  }
  o.seed = 43;
  const auto d = check_pushdown_inequalities(c, o);
  CHECK(d.checks[1].lhs != a.checks[1].lhs);

  TrialRng r1(9), r2(9);
  for (int i = 0; i < 50; ++i) CHECK(r1.uniform() == r2.uniform());
  TrialRng r3(9);
  const double u = r3.uniform(-2.0, 3.0);
  CHECK(u >= -2.0);
  CHECK(u < 3.0);
}
