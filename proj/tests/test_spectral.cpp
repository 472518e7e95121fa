#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "subspec/spectral.hpp"
#include "support.hpp"

using namespace subspec;

namespace {

double solve_total(const SubmersionCase& c) { return total_solver()(c).value; }
double solve_base(const SubmersionCase& c) { return base_solver()(c).value; }

}  // namespace

TEST_CASE("Sturm count matches a dense solver") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  const int n = 40;
  std::vector<double> diag(n), off(n - 1);
  for (auto& x : diag) x = d(rng);
  for (auto& x : off) x = d(rng);
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) T(i, i) = diag[i];
  for (int i = 0; i + 1 < n; ++i) T(i, i + 1) = T(i + 1, i) = off[i];
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(T).eigenvalues();
  for (double x : {-3.0, -1.0, -0.1, 0.0, 0.7, 2.5, 10.0}) {
    std::size_t expect = 0;
    for (int i = 0; i < n; ++i) expect += ev[i] < x ? 1 : 0;
    CHECK(sturm_count(diag, off, x) == expect);
  }
}

TEST_CASE("uniform Dirichlet interval reproduces the discrete sine spectrum") {
  const int n = 64;
  const auto c = testing::interval_case(0.0, 1.0, n, WarpFunction::constant(1.0));
  const GridPtr g = build_grid(c.base, n, Grading::uniform);
  const auto op = assemble_base_operator(c.base, nullptr, g);
  const double h = 1.0 / n;
  for (std::size_t dense : {std::size_t{200}, std::size_t{10}}) {
    SolverOptions opts;
    opts.dense_cutoff = dense;
    const auto pairs = lowest_eigenpairs(op, 5, opts);
    REQUIRE(pairs.size() == 5);
    for (int k = 1; k <= 5; ++k) {
      const double exact = 4.0 / (h * h) * std::pow(std::sin(k * std::numbers::pi * h / 2), 2);
      CHECK(pairs[k - 1].value == doctest::Approx(exact).epsilon(1e-10));
      CHECK(pairs[k - 1].residual < 1e-7 * exact);
      CHECK(op.norm2(pairs[k - 1].vector) == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("hyperbolic radial bottoms") {
  const auto h2 = estimate_bottom(testing::hyperbolic_case(2, 12.0, 2400), base_solver(), "base");
  CHECK(h2.estimate == doctest::Approx(0.25).epsilon(0.03));
  const auto h3 = estimate_bottom(testing::hyperbolic_case(3, 10.0, 1600), base_solver(), "base");
  CHECK(h3.estimate == doctest::Approx(1.0).epsilon(0.03));
  CHECK(h3.lambda0 >= 1.0);

  // Curvature -4: bottom at least 4 for m = 3.
  auto mk = testing::hyperbolic_case(3, 5.0, 1600);
  mk.base.profile = WarpFunction::sinh(1.0, 2.0);
  const auto mv = model_lambda0({ModelKind::mckean, 3, 1, 0.0, 2.0});
  CHECK(solve_base(mk) >= mv.value - 1e-6);
}

TEST_CASE("refinement ratio is second order") {
  auto check_ratio = [](const SubmersionCase& c) {
    const double a = solve_total(c.with_resolution(100));
    const double b = solve_total(c.with_resolution(200));
    const double d = solve_total(c.with_resolution(400));
    const double ratio = (a - b) / (b - d);
    CHECK(ratio > 3.5);
    CHECK(ratio < 4.5);
  };
  check_ratio(testing::interval_case(-2.0, 2.0, 100, WarpFunction::cosh(1.0, 1.0)));
  check_ratio(testing::interval_case(0.0, 3.0, 100, WarpFunction::exponential(1.0, -1.0)));
  auto h = testing::hyperbolic_case(2, 4.0, 100);
  h.kind = SubmersionKind::warped;
  h.warp = WarpFunction::cosh(1.0, 0.5);
  check_ratio(h);
}

TEST_CASE("Dirichlet domain monotonicity") {
  const auto c = testing::line_case(4.0, 800, WarpFunction::gaussian(1.0, 0.5));
  const auto h = testing::hyperbolic_case(2, 4.0, 400);
  double prev_c = INFINITY, prev_h = INFINITY;
  for (double R : {2.0, 3.0, 4.0, 6.0, 8.0}) {
    const double vc = solve_total(c.with_truncation(R));
    const double vh = solve_base(h.with_truncation(R));
    CHECK(vc <= prev_c);
    CHECK(vh <= prev_h);
    prev_c = vc;
    prev_h = vh;
  }
}

TEST_CASE("gaussian warp: harmonic oscillator ladder") {
  const auto c = testing::line_case(8.0, 1600, WarpFunction::gaussian(1.0, -1.0));
  const auto rep = low_spectrum(c, 3);
  REQUIRE(rep.eigenvalues.size() == 3);
  CHECK(std::abs(rep.eigenvalues[0]) < 2e-3);
  CHECK(std::abs(rep.eigenvalues[1] - 2.0) < 2e-3);
  CHECK(std::abs(rep.eigenvalues[2] - 4.0) < 2e-3);
  for (const auto& t : rep.tags) CHECK(t.index == 0);
}

TEST_CASE("cylinder spectrum with multiplicities") {
  const auto c = testing::interval_case(0.0, std::numbers::pi, 400, WarpFunction::constant(1.0));
  const auto rep = low_spectrum(c, 11);
  const std::vector<double> expect{1, 2, 2, 4, 5, 5, 5, 5, 8, 8, 9};
  REQUIRE(rep.eigenvalues.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) {
    CHECK(rep.eigenvalues[i] == doctest::Approx(expect[i]).epsilon(1e-4));
  }
  CHECK(rep.tags[0].index == 0);
  CHECK(rep.tags[1].index == 1);
  CHECK(rep.tags[1].multiplicity == 2);
  CHECK(rep.lambda0 == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("tensor and separated discretizations agree") {
  std::vector<SubmersionCase> cases;
  cases.push_back(testing::interval_case(0.0, std::numbers::pi, 80, WarpFunction::constant(1.0)));
  cases.push_back(testing::interval_case(0.0, 4.0, 80, WarpFunction::exponential(1.0, -1.0)));
  cases.push_back(testing::interval_case(-2.0, 2.0, 80, WarpFunction::cosh(1.0, 1.0)));
  cases.push_back(testing::interval_case(-2.0, 2.0, 80, WarpFunction::gaussian(1.0, -0.5)));
  auto s = testing::interval_case(0.5, 2.5, 80, WarpFunction::sinh(1.0, 1.0));
  s.fiber = FiberSpec::circle(0.7);
  cases.push_back(s);
  for (const auto& c : cases) {
    CAPTURE(to_string(c.warp.family()));
    const auto sep = low_spectrum(c, 3);
    const auto ten = low_spectrum_tensor(c, 3, 32);
    REQUIRE(ten.eigenvalues.size() == 3);
    for (int i = 0; i < 3; ++i) {
      CHECK(ten.eigenvalues[i] == doctest::Approx(sep.eigenvalues[i]).epsilon(0.01));
    }
    const auto bottom = low_spectrum_tensor(c, 1, 32);
    CHECK(bottom.lambda0 == doctest::Approx(sep.lambda0).epsilon(0.01));
  }
}

TEST_CASE("estimate_bottom bookkeeping") {
  const auto c = testing::line_case(6.0, 1200, WarpFunction::exponential(1.0, -1.0));
  const auto rep = estimate_bottom(c, schrodinger_solver(), "schrodinger");
  CHECK(rep.fine == rep.lambda0);
  CHECK(rep.discretization == doctest::Approx(std::abs(rep.fine - rep.coarse) / 3.0).epsilon(0.05));
  CHECK(rep.extended <= rep.lambda0);
  CHECK(rep.estimate == doctest::Approx(0.25).epsilon(0.01));
  CHECK(rep.budget() >= rep.truncation_sensitivity);
  CHECK(extrapolate_length(1.0, 4.0, 2.0, 1.0) == doctest::Approx(0.0));
  CHECK(extrapolate_length(1.0, 5.0, 2.0, 2.0) == doctest::Approx(1.0));
}

TEST_CASE("exhaustion probes separate discrete from continuous spectra") {
  const std::vector<double> radii{1.0, 2.0, 3.0, 4.0, 5.0};
  const auto osc = testing::line_case(8.0, 1600, WarpFunction::gaussian(1.0, -1.0));
  const auto p1 = exhaustion_probe(osc, ProbeTarget::schrodinger, radii);
  REQUIRE(p1.values.size() == radii.size());
  for (std::size_t i = 1; i < p1.values.size(); ++i) CHECK(p1.values[i] > p1.values[i - 1]);
  CHECK(discreteness_verdict(p1).discrete);

  const auto cusp = testing::line_case(10.0, 2000, WarpFunction::exponential(1.0, -1.0));
  const auto v2 = discreteness_verdict(exhaustion_probe(cusp, ProbeTarget::total, radii));
  CHECK_FALSE(v2.discrete);
  CHECK(v2.limit == doctest::Approx(0.25).epsilon(0.02));

  const auto flat = testing::line_case(10.0, 1000, WarpFunction::constant(1.0));
  const auto v3 = discreteness_verdict(exhaustion_probe(flat, ProbeTarget::total, radii));
  CHECK_FALSE(v3.discrete);
  CHECK(std::abs(v3.limit) < 0.01);
}
