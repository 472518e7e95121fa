#include "subspec/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

namespace subspec {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

CaseConfig resolve(CaseConfig cfg, const RunOptions& o) {
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.verify.seed = *o.seed;
  }
  if (o.tol) {
    if (!(*o.tol > 0.0)) throw Error(ErrorKind::invalid_config, "--tol must be > 0");
    cfg.base_case.tolerances.solver = *o.tol;
    cfg.verify.solver.tol = *o.tol;
  }
  if (o.workers) {
    if (*o.workers < 1) throw Error(ErrorKind::invalid_config, "--workers must be >= 1");
    cfg.workers = *o.workers;
  }
  if (o.out_dir) cfg.output.dir = *o.out_dir;
  if (cfg.needs_seed() && !cfg.seed) {
    throw Error(ErrorKind::invalid_config,
                fmt::format("{}: seed: required when random trials are requested", cfg.source));
  }
  if (o.axis) {
    const SweepSpec* s = cfg.sweep(*o.axis);
    if (!s) {
      throw Error(ErrorKind::invalid_config,
                  fmt::format("{}: sweep.{} is not declared", cfg.source, to_string(*o.axis)));
    }
    if (s->values.empty()) {
      throw Error(ErrorKind::invalid_config,
                  fmt::format("{}: sweep.{} is empty", cfg.source, to_string(*o.axis)));
    }
  }
  return cfg;
}

std::vector<std::map<SweepAxis, double>> sweep_points(const CaseConfig& cfg,
                                                      std::optional<SweepAxis> axis) {
  std::vector<std::map<SweepAxis, double>> pts(1);
  for (const SweepSpec& s : cfg.sweeps) {
    if (axis && s.axis != *axis) continue;
    std::vector<std::map<SweepAxis, double>> next;
    for (const auto& p : pts) {
      for (double v : s.values) {
        auto q = p;
        q[s.axis] = v;
        next.push_back(std::move(q));
      }
    }
    pts = std::move(next);
  }
  return pts;
}

namespace {

template <class F>
void guarded(PointResult& pr, const std::string& step, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    pr.failures.push_back({step, e.what()});
  }
}

}  // namespace

PointResult run_point(const CaseConfig& cfg, int index, const std::map<SweepAxis, double>& point) {
  PointResult pr;
  pr.index = index;
  pr.point = point;
  try {
    pr.c = apply_point(cfg, point);
  } catch (const std::exception& e) {
    pr.c = cfg.base_case;
    pr.failures.push_back({"case", e.what()});
    return pr;
  }
  const SubmersionCase& c = pr.c;
  SolverOptions so = cfg.verify.solver;
  so.tol = c.tolerances.solver;

  guarded(pr, "bottom:base", [&] { pr.base = estimate_bottom(c, base_solver(so), "base"); });
  if (c.fiber.closed()) {
    guarded(pr, "bottom:schrodinger",
            [&] { pr.schrodinger = estimate_bottom(c, schrodinger_solver(so), "schrodinger"); });
  }
  guarded(pr, "bottom:total", [&] { pr.total = estimate_bottom(c, total_solver(so), "total"); });

  for (const std::string& name : cfg.checks) {
    guarded(pr, name, [&] {
      if (name == "spectrum") {
        pr.spectrum = low_spectrum(c, cfg.verify.spectrum_count, so);
        pr.spectrum->label = "low_spectrum";
      } else if (name == "lower_bound") {
        pr.reports.push_back(check_lower_bound(c, cfg.verify));
      } else if (name == "schrodinger_comparison") {
        pr.reports.push_back(check_schrodinger_comparison(c, cfg.verify));
      } else if (name == "upper_bounds") {
        pr.reports.push_back(check_upper_bounds(c, cfg.verify));
      } else if (name == "discreteness") {
        pr.reports.push_back(check_discreteness_equivalence(c, cfg.verify));
      } else if (name == "pushdown") {
        pr.reports.push_back(check_pushdown_inequalities(c, cfg.verify));
      } else if (name == "lift_identities") {
        pr.reports.push_back(check_lift_identities(c, cfg.verify));
      }
    });
  }
  return pr;
}

RunResult execute(const CaseConfig& cfg, const RunOptions& options) {
  const auto pts = sweep_points(cfg, options.axis);
  RunResult res;
  res.points.resize(pts.size());
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers =
      std::min<std::size_t>({static_cast<std::size_t>(cfg.workers), pts.size(), hw});
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < pts.size(); i = next++) {
      res.points[i] = run_point(cfg, static_cast<int>(i), pts[i]);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& p : res.points) {
    res.failures += static_cast<int>(p.failures.size());
    for (const auto& r : p.reports) {
      if (r.verdict == Verdict::violated_beyond_tolerance) ++res.violated;
    }
  }
  res.exit_status = res.violated > 0 ? 1 : 0;
  res.reports = render_reports(cfg, res.points);
  res.plot = render_plot(res.points);
  res.summary = render_summary(cfg, res.points, res.exit_status);
  return res;
}

// ---------------------------------------------------------------------------
// Records

namespace {

json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

json nums(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

json parameters(const SubmersionCase& c) {
  json p;
  p["R"] = num(c.truncation);
  p["n"] = c.resolution;
  p["a"] = num(c.warp.a());
  return p;
}

json spectrum_json(const SpectrumReport& s) {
  json j;
  j["label"] = s.label;
  j["lambda0"] = num(s.lambda0);
  j["estimate"] = num(s.estimate);
  j["budget"] = num(s.budget());
  j["eigenvalues"] = nums(s.eigenvalues);
  json tags = json::array();
  for (const ModeTag& t : s.tags) tags.push_back({{"mode", t.index}, {"nu", num(t.nu)}, {"multiplicity", t.multiplicity}});
  j["tags"] = tags;
  j["residuals"] = nums(s.residuals);
  j["residual"] = num(s.residual);
  j["resolution"] = s.resolution;
  j["spacing"] = num(s.spacing);
  j["truncation"] = num(s.truncation);
  j["mode_cutoff"] = s.mode_cutoff;
  j["coarse"] = num(s.coarse);
  j["fine"] = num(s.fine);
  j["richardson"] = num(s.richardson);
  j["discretization"] = num(s.discretization);
  j["extended"] = num(s.extended);
  j["extrapolated"] = num(s.extrapolated);
  j["truncation_sensitivity"] = num(s.truncation_sensitivity);
  return j;
}

json theorem_json(const TheoremReport& r) {
  json j;
  j["theorem"] = r.theorem;
  j["verdict"] = std::string(to_string(r.verdict));
  json hyp = json::array();
  for (const auto& h : r.hypotheses) {
    hyp.push_back({{"name", h.name}, {"satisfied", h.satisfied}, {"detail", h.detail}});
  }
  j["hypotheses"] = hyp;
  json checks = json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name},
                      {"lhs", num(c.lhs)},
                      {"rhs", num(c.rhs)},
                      {"slack", num(c.slack)},
                      {"budget", num(c.budget)},
                      {"identity", c.identity},
                      {"verdict", std::string(to_string(c.verdict()))}});
  }
  j["checks"] = checks;
  json metrics = json::object();
  for (const auto& m : r.metrics) metrics[m.name] = num(m.value);
  j["metrics"] = metrics;
  j["notes"] = r.notes;
  json spectra = json::array();
  for (const auto& s : r.spectra) spectra.push_back(spectrum_json(s));
  j["spectra"] = spectra;
  return j;
}

json case_json(const CaseConfig& cfg) {
  const SubmersionCase& c = cfg.base_case;
  json j;
  j["type"] = "case";
  j["case"] = c.id;
  j["description"] = cfg.description;
  j["kind"] = std::string(to_string(c.kind));
  json base;
  base["left"] = {{"position", num(c.base.left.position)},
                  {"condition", std::string(to_string(c.base.left.condition))},
                  {"truncated", c.base.left.truncated}};
  base["right"] = {{"position", num(c.base.right.position)},
                   {"condition", std::string(to_string(c.base.right.condition))},
                   {"truncated", c.base.right.truncated}};
  base["profile"] = {{"family", std::string(to_string(c.base.profile.family()))},
                     {"c", num(c.base.profile.c())},
                     {"a", num(c.base.profile.a())}};
  base["power"] = num(c.base.power);
  j["base"] = base;
  j["warp"] = {{"family", std::string(to_string(c.warp.family()))},
               {"c", num(c.warp.c())},
               {"a", num(c.warp.a())},
               {"nodes", nums(c.warp.nodes())},
               {"samples", nums(c.warp.samples())}};
  json fiber;
  fiber["kind"] = std::string(to_string(c.fiber.kind()));
  fiber["dim"] = c.fiber.dim();
  fiber["lambda0"] = num(c.fiber.lambda0());
  fiber["volume"] = c.fiber.closed() ? num(c.fiber.volume()) : json(nullptr);
  j["fiber"] = fiber;
  j["grid"] = {{"n", c.resolution},
               {"grading", std::string(to_string(c.grading))},
               {"truncation", num(c.truncation)},
               {"mode_cutoff", c.mode_cutoff}};
  j["tolerances"] = {{"solver", num(c.tolerances.solver)}, {"budget_floor", num(c.tolerances.budget_floor)}};
  j["curvature_override"] = c.curvature_override ? num(*c.curvature_override) : json(nullptr);
  j["checks"] = cfg.checks;
  j["seed"] = cfg.seed ? json(*cfg.seed) : json(nullptr);
  j["trials"] = cfg.verify.trials;
  return j;
}

}  // namespace

std::string render_reports(const CaseConfig& cfg, const std::vector<PointResult>& points) {
  std::string out = case_json(cfg).dump() + "\n";
  for (const PointResult& p : points) {
    auto head = [&](const char* type) {
      json j;
      j["type"] = type;
      j["case"] = p.c.id;
      j["point"] = p.index;
      j["parameters"] = parameters(p.c);
      return j;
    };
    for (const auto* s : {&p.base, &p.schrodinger, &p.total, &p.spectrum}) {
      if (!*s) continue;
      json j = head("spectrum");
      j.update(spectrum_json(**s));
      out += j.dump() + "\n";
    }
    for (const auto& r : p.reports) {
      json j = head("theorem");
      j.update(theorem_json(r));
      out += j.dump() + "\n";
    }
    for (const auto& f : p.failures) {
      json j = head("failure");
      j["step"] = f.step;
      j["error"] = f.message;
      out += j.dump() + "\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Plot data

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

std::string cell(double v) { return std::isfinite(v) ? fmt::format("{:.12g}", v) : "nan"; }

double fine(const std::optional<SpectrumReport>& s) { return s ? s->fine : nan; }
double est(const std::optional<SpectrumReport>& s) { return s ? s->estimate : nan; }
double resid(const std::optional<SpectrumReport>& s) { return s ? s->residual : 0.0; }

const TheoremReport* find(const PointResult& p, const std::string& name) {
  for (const auto& r : p.reports) {
    if (r.theorem == name) return &r;
  }
  return nullptr;
}

int severity(Verdict v) {
  switch (v) {
    case Verdict::holds: return 0;
    case Verdict::holds_with_equality: return 1;
    case Verdict::hypotheses_not_met: return 2;
    case Verdict::violated_beyond_tolerance: return 3;
  }
  return 0;
}

bool differs_only_in(const PointResult& a, const PointResult& b, SweepAxis axis) {
  if (a.point.size() != b.point.size() || !a.point.count(axis) || !b.point.count(axis)) return false;
  for (const auto& [k, v] : a.point) {
    if (k == axis) continue;
    auto it = b.point.find(k);
    if (it == b.point.end() || it->second != v) return false;
  }
  return a.point.at(axis) != b.point.at(axis);
}

}  // namespace

std::string render_plot(const std::vector<PointResult>& points) {
  std::string out =
      "point\tR\tn\ta\tlambda0_base\tlambda0_S\tlambda0_total\testimate_base\testimate_S\t"
      "estimate_total\tbudget_total\tlower_bound\tupper_bound\tslack\tverdict\tratio_total\t"
      "monotone\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const PointResult& p = points[i];
    const TheoremReport* lb = find(p, "lower_bound");
    const TheoremReport* ub = find(p, "upper_bounds");
    double slack = nan;
    std::string verdict = "-";
    int worst = -1;
    for (const auto& r : p.reports) {
      if (const Check* c = r.primary(); c && r.hypotheses_met()) {
        slack = std::isnan(slack) ? c->slack : std::min(slack, c->slack);
      }
      if (severity(r.verdict) > worst) {
        worst = severity(r.verdict);
        verdict = std::string(to_string(r.verdict));
      }
    }
    if (!p.failures.empty() && worst < 0) verdict = "failure";

    std::string ratio = "-";
    if (i >= 2 && differs_only_in(points[i - 1], p, SweepAxis::n) &&
        differs_only_in(points[i - 2], points[i - 1], SweepAxis::n)) {
      const double d1 = fine(points[i - 2].total) - fine(points[i - 1].total);
      const double d2 = fine(points[i - 1].total) - fine(p.total);
      ratio = cell(d2 != 0.0 ? d1 / d2 : nan);
    }

    std::string mono = "-";
    if (i >= 1 && differs_only_in(points[i - 1], p, SweepAxis::R) &&
        p.point.at(SweepAxis::R) > points[i - 1].point.at(SweepAxis::R)) {
      std::string bad;
      const PointResult& q = points[i - 1];
      auto test = [&](const char* name, const std::optional<SpectrumReport>& now,
                      const std::optional<SpectrumReport>& before) {
        if (!now || !before) return;
        const double tol = resid(now) + resid(before) + 1e-9 * std::max(1.0, std::abs(before->fine));
        if (now->fine > before->fine + tol) bad += (bad.empty() ? "" : ",") + std::string(name);
      };
      test("base", p.base, q.base);
      test("S", p.schrodinger, q.schrodinger);
      test("total", p.total, q.total);
      mono = bad.empty() ? "ok" : "violated:" + bad;
    }

    out += fmt::format(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", p.index,
        cell(p.c.truncation), p.c.resolution, cell(p.c.warp.a()), cell(fine(p.base)),
        cell(fine(p.schrodinger)), cell(fine(p.total)), cell(est(p.base)), cell(est(p.schrodinger)),
        cell(est(p.total)), cell(p.total ? p.total->budget(p.c.tolerances.budget_floor) : nan),
        cell(lb && lb->primary() ? lb->primary()->rhs : nan),
        cell(ub && ub->primary() ? ub->primary()->rhs : nan), cell(slack), verdict, ratio, mono);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Summary

std::string render_summary(const CaseConfig& cfg, const std::vector<PointResult>& points,
                           int exit_status) {
  const SubmersionCase& c = cfg.base_case;
  std::string out = fmt::format("case {}", c.id);
  if (!cfg.description.empty()) out += fmt::format(": {}", cfg.description);
  out += "\n";
  std::string checks;
  for (const auto& n : cfg.checks) checks += (checks.empty() ? "" : ", ") + n;
  out += fmt::format("points {}  checks {}\n", points.size(), checks);

  std::map<Verdict, int> tally;
  int failures = 0;
  auto g = [](double v) { return std::isfinite(v) ? fmt::format("{:.6g}", v) : std::string("nan"); };
  for (const PointResult& p : points) {
    out += fmt::format("\npoint {}  R={} n={} a={}\n", p.index, g(p.c.truncation), p.c.resolution,
                       g(p.c.warp.a()));
    out += fmt::format("  bottom  base {}  S {}  total {}\n", g(est(p.base)), g(est(p.schrodinger)),
                       g(est(p.total)));
    if (p.spectrum) {
      std::string vals;
      for (std::size_t i = 0; i < p.spectrum->eigenvalues.size(); ++i) {
        vals += fmt::format("{}{}[{}]", i ? " " : "", g(p.spectrum->eigenvalues[i]),
                            p.spectrum->tags[i].index);
      }
      out += fmt::format("  spectrum  {}\n", vals);
    }
    for (const auto& r : p.reports) {
      ++tally[r.verdict];
      out += fmt::format("  {:<24}{}\n", r.theorem, to_string(r.verdict));
      for (const auto& h : r.hypotheses) {
        if (!h.satisfied) out += fmt::format("    hypothesis not met: {} ({})\n", h.name, h.detail);
      }
      for (const auto& ch : r.checks) {
        out += fmt::format("    {}: lhs {} rhs {} slack {} budget {} -> {}\n", ch.name, g(ch.lhs),
                           g(ch.rhs), g(ch.slack), g(ch.budget), to_string(ch.verdict()));
      }
      for (const auto& n : r.notes) out += fmt::format("    note: {}\n", n);
    }
    for (const auto& f : p.failures) {
      ++failures;
      out += fmt::format("  failure in {}: {}\n", f.step, f.message);
    }
  }
  out += fmt::format("\nverdicts: holds {}, holds-with-equality {}, violated-beyond-tolerance {}, "
                     "hypotheses-not-met {}; failures {}\n",
                     tally[Verdict::holds], tally[Verdict::holds_with_equality],
                     tally[Verdict::violated_beyond_tolerance], tally[Verdict::hypotheses_not_met],
                     failures);
  out += fmt::format("exit status {}\n", exit_status);
  return out;
}

// ---------------------------------------------------------------------------

void write_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  const fs::path tmp = target.parent_path() / ("." + target.filename().string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorKind::invalid_config, fmt::format("cannot write {}", tmp.string()));
    f << content;
    f.flush();
    if (!f) throw Error(ErrorKind::invalid_config, fmt::format("write failed: {}", tmp.string()));
  }
  fs::rename(tmp, target);
}

namespace {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

int run_command(const std::string& config_path, const RunOptions& options, std::ostream& out,
                std::ostream& err) {
  CaseConfig cfg;
  try {
    cfg = resolve(load_config(config_path), options);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return 2;
  }
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res = execute(cfg, options);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json header;
  header["tool"] = "subspec";
  header["created"] = utc_now();
  header["verb"] = options.verb;
  header["config"] = config_path;
  header["points"] = res.points.size();
  header["workers"] = cfg.workers;
  header["elapsed_seconds"] = elapsed;
  header["exit_status"] = res.exit_status;
  try {
    fs::create_directories(cfg.output.dir);
    const fs::path dir(cfg.output.dir);
    write_atomic((dir / cfg.output.reports).string(), res.reports);
    write_atomic((dir / cfg.output.plot).string(), res.plot);
    write_atomic((dir / cfg.output.summary).string(), res.summary);
    write_atomic((dir / cfg.output.header).string(), header.dump(2) + "\n");
  } catch (const std::exception& e) {
    err << "output: " << e.what() << "\n";
    return 2;
  }
  out << res.summary;
  if (res.failures > 0) err << res.failures << " step(s) failed; see " << cfg.output.summary << "\n";
  return res.exit_status;
}

std::vector<CaseListing> list_cases(const std::string& dir) {
  std::vector<CaseListing> out;
  if (!fs::is_directory(dir)) throw Error(ErrorKind::invalid_config, fmt::format("{}: not a directory", dir));
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".case") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    CaseListing l;
    l.file = f.filename().string();
    try {
      const CaseConfig cfg = load_config(f.string());
      l.id = cfg.base_case.id;
      l.description = cfg.description;
      for (const auto& n : cfg.checks) l.checks += (l.checks.empty() ? "" : ",") + n;
    } catch (const Error& e) {
      l.id = "?";
      l.description = e.what();
    }
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace subspec
