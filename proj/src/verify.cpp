#include "subspec/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

namespace subspec {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::holds: return "holds";
    case Verdict::holds_with_equality: return "holds-with-equality";
    case Verdict::violated_beyond_tolerance: return "violated-beyond-tolerance";
    case Verdict::hypotheses_not_met: return "hypotheses-not-met";
  }
  return "?";
}

Verdict Check::verdict() const {
  if (!(slack >= -budget)) return Verdict::violated_beyond_tolerance;
  if (!identity && std::abs(slack) <= budget) return Verdict::holds_with_equality;
  return Verdict::holds;
}

Check inequality(std::string name, double lhs, double rhs, double slack, double budget) {
  return Check{std::move(name), lhs, rhs, slack, budget, false};
}

Check identity_check(std::string name, double defect, double limit) {
  return Check{std::move(name), defect, limit, limit - defect, 0.0, true};
}

bool TheoremReport::hypotheses_met() const {
  return std::all_of(hypotheses.begin(), hypotheses.end(),
                     [](const HypothesisCheck& h) { return h.satisfied; });
}

Verdict TheoremReport::recompute() const {
  if (!hypotheses_met()) return Verdict::hypotheses_not_met;
  bool equality = false;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const Verdict v = checks[i].verdict();
    if (v == Verdict::violated_beyond_tolerance) return v;
    if (i == 0 && v == Verdict::holds_with_equality) equality = true;
  }
  return equality ? Verdict::holds_with_equality : Verdict::holds;
}

namespace {

GridPtr case_grid(const SubmersionCase& c) { return build_grid(c.base, c.resolution, c.grading); }

// Half-width of f over [x - b, x + b] with arguments clamped at 0.
template <class F>
double spread(const F& f, double x, double b) {
  const double mid = f(x);
  return std::max(std::abs(f(x + b) - mid), std::abs(mid - f(std::max(0.0, x - b))));
}

double floor_budget(const SubmersionCase& c) { return c.tolerances.budget_floor; }

SolverOptions solver_for(const SubmersionCase& c, const VerifyOptions& o) {
  SolverOptions s = o.solver;
  s.tol = c.tolerances.solver;
  return s;
}

// The angular stiffness scales like 1/psi^2, so the tensor matrix is only
// usable in double precision for a moderate warp range.
constexpr double tensor_warp_range = 1e6;

bool tensor_supported(const SubmersionCase& c) {
  if (c.fiber.kind() != FiberKind::circle || c.warp.vanishes_at(c.base.left.position) ||
      c.warp.vanishes_at(c.base.right.position)) {
    return false;
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (int i = 0; i <= 512; ++i) {
    const double r = c.base.left.position + c.base.length() * i / 512.0;
    const double v = c.warp.value(r);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return hi <= tensor_warp_range * lo;
}

std::vector<double> sqrt_volume(const SubmersionCase& c, const Grid& g) {
  std::vector<double> out(g.nodes.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(c.fiber_volume(g.nodes[i]));
  return out;
}

struct ProbeSet {
  ExhaustionProbe probe;
  DiscretenessVerdict verdict;
};

ProbeSet run_probe(const SubmersionCase& c, ProbeTarget t, const std::vector<double>& radii,
                   const VerifyOptions& o) {
  ProbeSet p;
  p.probe = exhaustion_probe(c, t, radii, solver_for(c, o));
  p.probe.slope_threshold = o.slope_threshold;
  p.probe.plateau_floor = o.plateau_floor;
  p.verdict = discreteness_verdict(p.probe);
  return p;
}

double probe_sensitivity(const ExhaustionProbe& p) {
  return std::abs(p.extended.back() - p.extrapolated.back());
}

void add_probe_metrics(TheoremReport& rep, const std::string& tag, const ProbeSet& p) {
  rep.metrics.push_back({tag + ".slope", p.verdict.slope});
  rep.metrics.push_back({tag + ".discrete", p.verdict.discrete ? 1.0 : 0.0});
  rep.metrics.push_back({tag + ".limit", p.verdict.discrete ? -1.0 : p.verdict.limit});
  rep.metrics.push_back({tag + ".last", p.probe.extrapolated.back()});
}

HypothesisCheck closed_fiber(const SubmersionCase& c) {
  return {"closed fiber", c.fiber.closed(), std::string(to_string(c.fiber.kind()))};
}

}  // namespace

std::vector<double> default_probe_radii(const SubmersionCase& c) {
  const bool two = c.base.left.truncated && c.base.right.truncated;
  const double reach = two ? 0.5 * c.base.length() : c.base.length();
  std::vector<double> r;
  for (int k = 1; k <= 6; ++k) r.push_back(reach * k / 12.0);
  return r;
}

// ---------------------------------------------------------------------------

TheoremReport check_lower_bound(const SubmersionCase& c, const VerifyOptions& o) {
  TheoremReport rep;
  rep.theorem = "lower_bound";
  rep.case_id = c.id;
  const CurvatureBound C = mean_curvature_bound(c);
  rep.hypotheses.push_back({"bounded mean curvature", C.bounded,
                            C.bounded ? fmt::format("C = {:.6g}", C.value) : "C unbounded"});
  const SolverOptions so = solver_for(c, o);
  const SpectrumReport base = estimate_bottom(c, base_solver(so), "base");
  rep.spectra.push_back(base);
  rep.metrics.push_back({"lambda0_base", base.estimate});
  if (!C.bounded) {
    rep.finalize();
    return rep;
  }
  rep.metrics.push_back({"C", C.value});
  const double l1 = base.estimate;
  const double b1 = base.budget(floor_budget(c));
  const bool gate = C.value <= 2.0 * std::sqrt(std::max(0.0, l1 + b1));
  rep.hypotheses.push_back({"C <= 2 sqrt(lambda0(M1))", gate,
                            fmt::format("C = {:.6g}, 2 sqrt(lambda0) = {:.6g}", C.value,
                                        2.0 * std::sqrt(std::max(0.0, l1)))});
  if (!gate) {
    rep.finalize();
    return rep;
  }
  const SpectrumReport total = estimate_bottom(c, total_solver(so), "total");
  rep.spectra.push_back(total);
  const GridPtr grid = case_grid(c);
  const FiberProfile prof = fiber_lambda0_profile(c, grid->nodes);
  const double half = 0.5 * C.value;
  const auto rhs = [&](double l) {
    const double t = std::max(0.0, std::sqrt(std::max(0.0, l)) - half);
    return t * t + prof.infimum;
  };
  const double r = rhs(l1);
  const double budget = total.budget(floor_budget(c)) + spread(rhs, l1, b1);
  rep.checks.push_back(inequality("lambda0(M2) >= (sqrt(lambda0(M1)) - C/2)^2 + inf lambda0(F_x)",
                                  total.estimate, r, total.estimate - r, budget));
  rep.metrics.push_back({"lambda0_total", total.estimate});
  rep.metrics.push_back({"inf_fiber_lambda0", prof.infimum});
  rep.metrics.push_back({"fiber_profile_spread", prof.spread});
  if (c.kind == SubmersionKind::warped) {
    rep.notes.push_back(prof.spread == 0.0 ? "fiber bottom profile is flat"
                                           : "fiber bottom profile varies along the base");
  }
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------

TheoremReport check_schrodinger_comparison(const SubmersionCase& c, const VerifyOptions& o) {
  TheoremReport rep;
  rep.theorem = "schrodinger_comparison";
  rep.case_id = c.id;
  rep.hypotheses.push_back(closed_fiber(c));
  if (!c.fiber.closed()) {
    rep.finalize();
    return rep;
  }
  const SolverOptions so = solver_for(c, o);
  const SpectrumReport total = estimate_bottom(c, total_solver(so), "total");
  const SpectrumReport s = estimate_bottom(c, schrodinger_solver(so), "schrodinger");
  rep.spectra.push_back(total);
  rep.spectra.push_back(s);
  const double fl = floor_budget(c);
  rep.checks.push_back(inequality("lambda0(M2) <= lambda0(S)", total.estimate, s.estimate,
                                  s.estimate - total.estimate, total.budget(fl) + s.budget(fl)));
  rep.metrics.push_back({"lambda0_total", total.estimate});
  rep.metrics.push_back({"lambda0_S", s.estimate});

  if (c.truncated()) {
    const auto radii = o.probe_radii.empty() ? default_probe_radii(c) : o.probe_radii;
    const ProbeSet pt = run_probe(c, ProbeTarget::total, radii, o);
    const ProbeSet ps = run_probe(c, ProbeTarget::schrodinger, radii, o);
    add_probe_metrics(rep, "probe_total", pt);
    add_probe_metrics(rep, "probe_S", ps);
    if (ps.verdict.discrete) {
      rep.notes.push_back("S has discrete spectrum indicated; essential comparison is vacuous");
    } else {
      const double lhs = pt.verdict.discrete ? pt.probe.extrapolated.back() : pt.verdict.limit;
      const double budget = probe_sensitivity(pt.probe) + probe_sensitivity(ps.probe) +
                            total.discretization + s.discretization + fl;
      rep.checks.push_back(inequality("lambda0ess(M2) <= lambda0ess(S)", lhs, ps.verdict.limit,
                                      ps.verdict.limit - lhs, budget));
    }
  }

  // Spectral inclusion through the conjugated mode-0 operator.
  const int K = o.spectrum_count;
  auto inclusion = [&](const SubmersionCase& cc, bool with_tensor) {
    const GridPtr grid = case_grid(cc);
    const SLOperator mode0 = std::move(assemble_total_family(cc, grid, 1).modes.front());
    const SLOperator sform = schrodinger_form(mode0, sqrt_volume(cc, *grid));
    const auto a = lowest_eigenpairs(sform, K, so);
    const auto b = lowest_eigenpairs(mode0, K, so);
    double defect = 0.0;
    std::vector<double> svals;
    for (std::size_t i = 0; i < a.size(); ++i) {
      defect = std::max(defect, std::abs(a[i].value - b[i].value) / std::max(1.0, std::abs(b[i].value)));
      svals.push_back(a[i].value);
    }
    if (!with_tensor) {
      rep.checks.push_back(identity_check("sigma(S) in sigma(M2): mode-0 identity", defect, 1e-10));
      return;
    }
    const TensorOperator top = assemble_total_tensor(cc, grid, o.n_theta);
    double worst = 0.0;
    for (double sv : svals) {
      // A Rayleigh quotient with residual r has a true eigenvalue within r.
      const TensorSpectrum t = tensor_eigenvalue_near(top, sv, 1e-9);
      const double gap = std::abs(t.values[0] - sv) + t.residuals[0];
      worst = std::max(worst, gap / std::max(std::abs(sv), 1e-2));
    }
    rep.checks.push_back(identity_check("sigma(S) in sigma(M2): tensor path", worst, 0.01));
  };
  inclusion(c, false);
  if (tensor_supported(c)) {
    inclusion(c.with_resolution(std::min(c.resolution, 800)), true);
  } else {
    rep.notes.push_back("tensor path skipped for this fiber");
  }

  // Residual identity between lifted and renormalized residuals.
  {
    const GridPtr grid = case_grid(c);
    const SLOperator mode0 = std::move(assemble_total_family(c, grid, 1).modes.front());
    const auto sv = sqrt_volume(c, *grid);
    const SLOperator sform = schrodinger_form(mode0, sv);
    const double lambda = lambda0(mode0, so).value;
    TrialRng rng(o.seed);
    double worst = 0.0;
    const int trials = std::max(1, std::min(o.trials, 20));
    for (int t = 0; t < trials; ++t) {
      const BaseFunction f = random_base_function(sform, rng);
      std::vector<double> u(f.values.size());
      for (std::size_t i = 0; i < u.size(); ++i) u[i] = f.values[i] / sv[i];
      const auto uu = mode0.from_grid(u);
      const auto ff = sform.from_grid(f.values);
      auto au = mode0.apply(uu);
      auto sf = sform.apply(ff);
      for (std::size_t i = 0; i < au.size(); ++i) {
        au[i] -= lambda * uu[i];
        sf[i] -= lambda * ff[i];
      }
      const double r1 = std::sqrt(mode0.norm2(au));
      const double r2 = std::sqrt(sform.norm2(sf));
      worst = std::max(worst, std::abs(r1 - r2) / std::max({r1, r2, 1e-300}));
    }
    rep.checks.push_back(identity_check("lifted residual equals renormalized residual", worst, 1e-10));
  }
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------

TheoremReport check_upper_bounds(const SubmersionCase& c, const VerifyOptions& o) {
  TheoremReport rep;
  rep.theorem = "upper_bounds";
  rep.case_id = c.id;
  rep.hypotheses.push_back(closed_fiber(c));
  const CurvatureBound C = c.fiber.closed() ? mean_curvature_bound(c) : CurvatureBound{0.0, false};
  rep.hypotheses.push_back({"bounded mean curvature", C.bounded,
                            C.bounded ? fmt::format("C = {:.6g}", C.value) : "C unbounded"});
  if (!rep.hypotheses_met()) {
    rep.finalize();
    return rep;
  }
  const SolverOptions so = solver_for(c, o);
  const double fl = floor_budget(c);
  const SpectrumReport base = estimate_bottom(c, base_solver(so), "base");
  const SpectrumReport total = estimate_bottom(c, total_solver(so), "total");
  const SpectrumReport s = estimate_bottom(c, schrodinger_solver(so), "schrodinger");
  rep.spectra = {base, total, s};
  const double half = 0.5 * C.value;
  const auto rhs = [&](double l) {
    const double t = std::sqrt(std::max(0.0, l)) + half;
    return t * t;
  };
  const double l1 = base.estimate;
  const double r = rhs(l1);
  const double rb = spread(rhs, l1, base.budget(fl));
  rep.checks.push_back(inequality("lambda0(M2) <= (sqrt(lambda0(M1)) + C/2)^2", total.estimate, r,
                                  r - total.estimate, total.budget(fl) + rb));
  rep.checks.push_back(inequality("lambda0(S) <= (sqrt(lambda0(M1)) + C/2)^2", s.estimate, r,
                                  r - s.estimate, s.budget(fl) + rb));
  rep.metrics.push_back({"C", C.value});
  rep.metrics.push_back({"lambda0_base", l1});
  rep.metrics.push_back({"lambda0_total", total.estimate});
  rep.metrics.push_back({"lambda0_S", s.estimate});
  rep.metrics.push_back({"rhs", r});

  if (c.truncated()) {
    const auto radii = o.probe_radii.empty() ? default_probe_radii(c) : o.probe_radii;
    const ProbeSet pb = run_probe(c, ProbeTarget::base, radii, o);
    const ProbeSet pt = run_probe(c, ProbeTarget::total, radii, o);
    add_probe_metrics(rep, "probe_base", pb);
    add_probe_metrics(rep, "probe_total", pt);
    if (pb.verdict.discrete) {
      rep.notes.push_back("base has discrete spectrum indicated; essential bound is vacuous");
    } else {
      const double er = rhs(pb.verdict.limit);
      const double lhs = pt.verdict.discrete ? pt.probe.extrapolated.back() : pt.verdict.limit;
      const double budget = probe_sensitivity(pt.probe) +
                            spread(rhs, pb.verdict.limit, probe_sensitivity(pb.probe)) +
                            total.discretization + base.discretization + fl;
      rep.checks.push_back(inequality("lambda0ess(M2) <= (sqrt(lambda0ess(M1)) + C/2)^2", lhs, er,
                                      er - lhs, budget));
    }
  }
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------

TheoremReport check_discreteness_equivalence(const SubmersionCase& c, const VerifyOptions& o) {
  TheoremReport rep;
  rep.theorem = "discreteness";
  rep.case_id = c.id;
  rep.hypotheses.push_back(closed_fiber(c));
  if (!c.fiber.closed()) {
    rep.finalize();
    return rep;
  }
  const CurvatureBound C = mean_curvature_bound(c);
  rep.hypotheses.push_back({"bounded mean curvature", C.bounded,
                            C.bounded ? fmt::format("C = {:.6g}", C.value) : "C unbounded"});
  if (!c.truncated()) {
    rep.notes.push_back("bounded base: both spectra discrete");
    rep.checks.push_back(identity_check("discreteness(M1) == discreteness(M2)", 0.0, 0.5));
    rep.finalize();
    return rep;
  }
  const auto radii = o.probe_radii.empty() ? default_probe_radii(c) : o.probe_radii;
  const ProbeSet pb = run_probe(c, ProbeTarget::base, radii, o);
  const ProbeSet ps = run_probe(c, ProbeTarget::schrodinger, radii, o);
  const ProbeSet pt = run_probe(c, ProbeTarget::total, radii, o);
  add_probe_metrics(rep, "probe_base", pb);
  add_probe_metrics(rep, "probe_S", ps);
  add_probe_metrics(rep, "probe_total", pt);
  if (!pb.verdict.discrete && pt.verdict.discrete) {
    rep.notes.push_back("pattern: base essential spectrum, total space discrete");
  }
  const auto mismatch = [](const ProbeSet& a, const ProbeSet& b) {
    return a.verdict.discrete == b.verdict.discrete ? 0.0 : 1.0;
  };
  rep.checks.push_back(identity_check("discreteness(S) == discreteness(M2)", mismatch(ps, pt), 0.5));
  rep.checks.push_back(identity_check("discreteness(M1) == discreteness(M2)", mismatch(pb, pt), 0.5));
  if (!C.bounded) {
    rep.finalize();
    return rep;
  }
  // Complement bound at each radius past the gate, with a refinement budget.
  const SolverOptions so = solver_for(c, o);
  const SubmersionCase coarse = c.with_resolution(std::max(8, c.resolution / 2));
  const auto gb = complement_bottoms(assemble_base_operator(coarse.base, nullptr, case_grid(coarse)),
                                     coarse.base, radii, so);
  const auto gt = complement_bottoms(total_bottom_operator(coarse, case_grid(coarse)), coarse.base,
                                     radii, so);
  const double half = 0.5 * C.value;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double lb = pb.probe.values[i];
    if (2.0 * std::sqrt(std::max(0.0, lb)) < C.value) continue;
    const auto f = [&](double l) {
      const double t = std::max(0.0, std::sqrt(std::max(0.0, l)) - half);
      return t * t;
    };
    const double r = f(lb);
    const double lhs = pt.probe.values[i];
    const double budget = std::abs(lhs - gt[i]) + spread(f, lb, std::abs(lb - gb[i])) +
                          floor_budget(c);
    rep.checks.push_back(inequality(fmt::format("complement bound at r = {:.4g}", radii[i]), lhs, r,
                                    lhs - r, budget));
  }
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------
// Trial functions

namespace {

double bump(double x) {
  if (std::abs(x) >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - x * x));
}

struct Profile {
  double c[2];
  double s[2];
  double a[2];

  double operator()(double r) const {
    return a[0] * bump((r - c[0]) / s[0]) + a[1] * bump((r - c[1]) / s[1]);
  }
};

Profile random_profile(double lo, double hi, TrialRng& rng) {
  Profile p{};
  const double len = hi - lo;
  for (int m = 0; m < 2; ++m) {
    p.s[m] = len * rng.uniform(0.08, 0.45);
    const double a = lo + p.s[m];
    const double b = hi - p.s[m];
    p.c[m] = a + (b - a) * rng.uniform();
    p.a[m] = rng.uniform(0.3, 1.0) * (m == 0 ? 1.0 : (rng.uniform() < 0.5 ? -1.0 : 1.0));
  }
  return p;
}

}  // namespace

BaseFunction random_base_function(const SLOperator& op, TrialRng& rng) {
  const auto& nodes = op.grid()->nodes;
  // Support strictly between the nodes adjacent to the unknown range.
  const double lo = op.first() > 0 ? nodes[op.first() - 1] : nodes.front();
  const double hi = op.last() + 1 < nodes.size() ? nodes[op.last() + 1] : nodes.back();
  const Profile p = random_profile(lo, hi, rng);
  BaseFunction f{op.grid(), std::vector<double>(nodes.size(), 0.0)};
  for (std::size_t i = op.first(); i <= op.last(); ++i) f.values[i] = p(nodes[i]);
  if (std::all_of(f.values.begin(), f.values.end(), [](double v) { return v == 0.0; })) {
    f.values[(op.first() + op.last()) / 2] = 1.0;
  }
  return f;
}

TensorFunction random_tensor_function(const TensorOperator& op, TrialRng& rng) {
  const auto& nodes = op.grid().base->nodes;
  const double lo = op.first() > 0 ? nodes[op.first() - 1] : nodes.front();
  const double hi = op.last() + 1 < nodes.size() ? nodes[op.last() + 1] : nodes.back();
  const Profile p = random_profile(lo, hi, rng);
  const double b1 = rng.uniform(-0.6, 0.6);
  const double b2 = rng.uniform(-0.4, 0.4);
  const double p1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double p2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  // Phases drift along r so that f does not separate.
  const double w1 = rng.uniform(-std::numbers::pi, std::numbers::pi);
  const double w2 = rng.uniform(-std::numbers::pi, std::numbers::pi);
  const int nt = op.grid().n_theta;
  const double dth = op.grid().dtheta();
  TensorFunction f{op.grid(), std::vector<double>(nodes.size() * nt, 0.0)};
  for (std::size_t i = op.first(); i <= op.last(); ++i) {
    const double radial = p(nodes[i]);
    const double t = (nodes[i] - lo) / (hi - lo);
    for (int l = 0; l < nt; ++l) {
      const double th = l * dth;
      f.values[i * nt + l] = radial * (1.0 + b1 * std::cos(th + p1 + w1 * t) +
                                       b2 * std::cos(2.0 * th + p2 + w2 * t));
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Pushdown estimates

PushdownTrial evaluate_pushdown(const SubmersionCase& c, const TensorOperator& tensor,
                                const SLOperator& base, const TensorFunction& f, double curvature,
                                double allowance_constant, bool flip_curvature) {
  const Grid& g = *tensor.grid().base;
  const std::size_t nn = g.nodes.size();
  const int nt = tensor.grid().n_theta;
  const double rho = tensor.grid().radius;
  const double dth = tensor.grid().dtheta();
  const double k = c.fiber.dim();
  const double sign = flip_curvature ? -1.0 : 1.0;
  const BaseFunction push = pushdown(f, c);

  // Nodal second differences, zero outside the grid.
  std::vector<double> d2(nn * nt, 0.0);
  for (std::size_t i = 1; i + 1 < nn; ++i) {
    const double hl = g.cell(i - 1);
    const double hr = g.cell(i);
    for (int l = 0; l < nt; ++l) {
      const double fl = f.at(i - 1, l), fc = f.at(i, l), fr = f.at(i + 1, l);
      d2[i * nt + l] = 2.0 * ((fr - fc) / hr - (fc - fl) / hl) / (hl + hr);
    }
  }

  PushdownTrial out;
  double scale = 0.0;
  std::vector<double> lhs(nn - 1), rhs(nn - 1), allow(nn - 1);
  double a_glob = 0.0;
  double fm_glob = 0.0;
  for (std::size_t i = 0; i + 1 < nn; ++i) {
    const double h = g.cell(i);
    const double mid = g.midpoint(i);
    const double psi = c.warp.value(mid);
    const double L = c.warp.log_derivative(mid);
    const double L1 = c.warp.log_derivative_d1(mid);
    const double line = rho * dth * psi;
    double r = 0.0;
    double a_sum = 0.0;
    double fm2 = 0.0;
    for (int l = 0; l < nt; ++l) {
      const double D1 = (f.at(i + 1, l) - f.at(i, l)) / h;
      const double fm = 0.5 * (f.at(i + 1, l) + f.at(i, l));
      const double D2 = 0.5 * (d2[i * nt + l] + d2[(i + 1) * nt + l]);
      const double D3 = (d2[(i + 1) * nt + l] - d2[i * nt + l]) / h;
      const double a = D1 + sign * 0.5 * k * L * fm;
      const double delta = std::abs(D3) + std::abs(L) * std::abs(D2) +
                           (L * L + std::abs(L1)) * (std::abs(D1) + std::abs(fm)) +
                           std::abs(L) * (L * L + std::abs(L1)) * std::abs(fm);
      r += line * a * a;
      a_sum += line * (2.0 * std::abs(a) * delta + h * h * delta * delta);
      fm2 += line * fm * fm;
    }
    const double dg = (push.values[i + 1] - push.values[i]) / h;
    lhs[i] = dg * dg;
    rhs[i] = r;
    allow[i] = allowance_constant * h * h * a_sum;
    scale = std::max(scale, r);
    const double wm = c.base.weight(mid) * h;
    a_glob += wm * allow[i];
    fm_glob += wm * fm2;
  }
  if (!(scale > 0.0)) scale = 1.0;
  // Violations count on every cell; the reported worst cell is the one with
  // the smallest relative margin among cells above 1e-10 of the peak.
  double worst = std::numeric_limits<double>::infinity();
  out.worst_lhs = out.worst_rhs = out.worst_allowance = 0.0;
  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (std::size_t i = 0; i + 1 < nn; ++i) {
    if (lhs[i] == 0.0 && rhs[i] == 0.0) continue;
    const double room = rhs[i] + allow[i];
    if (lhs[i] > room + 64.0 * eps * (lhs[i] + rhs[i])) ++out.nodewise_violations;
    if (room < 1e-10 * scale) continue;
    const double margin = (room - lhs[i]) / room;
    if (margin < worst) {
      worst = margin;
      out.worst_lhs = lhs[i] / scale;
      out.worst_rhs = rhs[i] / scale;
      out.worst_allowance = allow[i] / scale;
    }
  }
  out.nodewise_margin = std::isfinite(worst) ? worst : 0.0;

  const Eigen::VectorXd u = tensor.from_grid(f.values);
  const double norm2 = tensor.norm2(u);
  if (!(norm2 > 0.0)) throw Error(ErrorKind::zero_function, "pushdown trial of the zero function");
  out.rayleigh_total = tensor.energy(u) / norm2;
  out.rayleigh_pushdown = rayleigh(base, push);
  // Vertical energy from the angular conductances, reconstructed from the mass.
  double vert = 0.0;
  for (std::size_t i = tensor.first(); i <= tensor.last(); ++i) {
    const Eigen::Index row = static_cast<Eigen::Index>((i - tensor.first()) * nt);
    const double m = tensor.mass()[row];
    const double psi_rho_dth = c.warp.value(g.nodes[i]) * rho * dth;
    const double kth = m / (psi_rho_dth * psi_rho_dth);
    for (int l = 0; l < nt; ++l) {
      const double d = f.at(i, (l + 1) % nt) - f.at(i, l);
      vert += kth * d * d;
    }
  }
  out.vertical = vert / norm2;

  const double half = 0.5 * curvature;
  const double t = std::max(0.0, std::sqrt(out.rayleigh_pushdown) - half);
  out.global_rhs = t * t;
  const double ratio = std::sqrt(fm_glob / norm2);
  const double tt = std::max(0.0, std::sqrt(std::max(0.0, out.rayleigh_pushdown - a_glob / norm2)) -
                                      half * std::max(1.0, ratio));
  out.global_allowance = std::max(0.0, out.global_rhs - tt * tt) +
                         1e-10 * std::max(1.0, out.rayleigh_total);
  return out;
}

TheoremReport check_pushdown_inequalities(const SubmersionCase& c, const VerifyOptions& o) {
  TheoremReport rep;
  rep.theorem = "pushdown";
  rep.case_id = c.id;
  rep.hypotheses.push_back({"circle fiber without collapse", tensor_supported(c),
                            std::string(to_string(c.fiber.kind()))});
  const CurvatureBound C = mean_curvature_bound(c);
  rep.hypotheses.push_back({"bounded mean curvature", C.bounded,
                            C.bounded ? fmt::format("C = {:.6g}", C.value) : "C unbounded"});
  if (!rep.hypotheses_met()) {
    rep.finalize();
    return rep;
  }
  const SolverOptions so = solver_for(c, o);
  const SpectrumReport base_rep = estimate_bottom(c, base_solver(so), "base");
  rep.spectra.push_back(base_rep);
  const double l1 = base_rep.estimate + base_rep.budget(floor_budget(c));
  const bool gate = C.value <= 2.0 * std::sqrt(std::max(0.0, l1));
  rep.hypotheses.push_back({"C <= 2 sqrt(lambda0(M1))", gate,
                            fmt::format("C = {:.6g}, lambda0(M1) = {:.6g}", C.value, base_rep.estimate)});
  if (!gate) {
    rep.finalize();
    return rep;
  }
  const GridPtr grid = case_grid(c);
  const TensorOperator tensor = assemble_total_tensor(c, grid, o.n_theta);
  const SLOperator base = assemble_base_operator(c.base, nullptr, grid);
  TrialRng rng(o.seed);
  PushdownTrial worst_node;
  worst_node.nodewise_margin = std::numeric_limits<double>::infinity();
  Check worst_global = inequality("R(f) >= (sqrt(R(g)) - C/2)^2", 0, 0,
                                  std::numeric_limits<double>::infinity(), 0);
  int violations = 0;
  for (int t = 0; t < o.trials; ++t) {
    const TensorFunction f = random_tensor_function(tensor, rng);
    const PushdownTrial tr = evaluate_pushdown(c, tensor, base, f, C.value, o.pushdown_constant);
    violations += tr.nodewise_violations;
    if (tr.nodewise_margin < worst_node.nodewise_margin) worst_node = tr;
    const double slack = tr.rayleigh_total - tr.global_rhs;
    if (slack + tr.global_allowance < worst_global.slack + worst_global.budget) {
      worst_global = inequality("R(f) >= (sqrt(R(g)) - C/2)^2", tr.rayleigh_total, tr.global_rhs,
                                slack, tr.global_allowance);
    }
  }
  rep.checks.push_back(inequality("|grad g|^2 <= fiber integral |(grad f)^h - f H/2|^2",
                                  worst_node.worst_lhs, worst_node.worst_rhs,
                                  worst_node.worst_rhs - worst_node.worst_lhs,
                                  worst_node.worst_allowance));
  rep.checks.push_back(worst_global);
  rep.metrics.push_back({"trials", static_cast<double>(o.trials)});
  rep.metrics.push_back({"nodewise_violations", static_cast<double>(violations)});
  rep.metrics.push_back({"worst_nodewise_margin", worst_node.nodewise_margin});
  rep.metrics.push_back({"C", C.value});
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------

TheoremReport check_lift_identities(const SubmersionCase& c, const VerifyOptions& o) {
  TheoremReport rep;
  rep.theorem = "lift_identities";
  rep.case_id = c.id;
  rep.hypotheses.push_back(closed_fiber(c));
  if (!c.fiber.closed()) {
    rep.finalize();
    return rep;
  }
  const GridPtr grid = case_grid(c);
  const SLOperator mode0 = std::move(assemble_total_family(c, grid, 1).modes.front());
  const SLOperator ren = assemble_renormalized(c.base, [&c](double r) { return c.fiber_volume(r); }, grid);
  rep.checks.push_back(identity_check("mode-0 operator equals S_sqrtV bitwise",
                                      mode0.identical(ren) ? 0.0 : 1.0, 0.5));
  const auto sv = sqrt_volume(c, *grid);
  const SLOperator sform = schrodinger_form(ren, sv);
  std::optional<TensorOperator> tensor;
  if (tensor_supported(c)) tensor.emplace(assemble_total_tensor(c, grid, o.n_theta));

  TrialRng rng(o.seed);
  double three_way = 0.0;
  double horizontal = 0.0;
  for (int t = 0; t < o.trials; ++t) {
    const BaseFunction f = random_base_function(ren, rng);
    BaseFunction g{grid, f.values};
    for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] *= sv[i];
    const double r_ren = rayleigh(ren, f);
    const double r_s = rayleigh(sform, g);
    double r_lift = rayleigh(mode0, f);
    if (tensor) {
      const TensorFunction lf = lift(f, tensor->grid());
      r_lift = rayleigh(*tensor, lf);
      const Eigen::VectorXd u = tensor->from_grid(lf.values);
      const double e_t = tensor->energy(u);
      const double e_b = mode0.energy(mode0.from_grid(f.values));
      horizontal = std::max(horizontal, std::abs(e_t - e_b) / std::max(std::abs(e_b), 1e-300));
    }
    const double scale = std::max(1.0, std::abs(r_ren));
    three_way = std::max({three_way, std::abs(r_lift - r_ren) / scale, std::abs(r_s - r_ren) / scale});
  }
  rep.checks.push_back(identity_check("R(lift f) = R_{S_sqrtV}(f) = R_S(f sqrtV)", three_way, 1e-12));
  if (tensor) {
    rep.checks.push_back(identity_check("|grad lift f| = |grad f| on the tensor grid", horizontal, 1e-12));
  } else {
    rep.notes.push_back("tensor path skipped for this fiber");
  }
  rep.metrics.push_back({"trials", static_cast<double>(o.trials)});
  rep.metrics.push_back({"three_way_defect", three_way});
  rep.finalize();
  return rep;
}

}  // namespace subspec
