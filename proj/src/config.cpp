#include "subspec/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace subspec {

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::R: return "R";
    case SweepAxis::n: return "n";
    case SweepAxis::a: return "a";
  }
  return "?";
}

std::optional<SweepAxis> parse_axis(std::string_view name) {
  if (name == "R") return SweepAxis::R;
  if (name == "n") return SweepAxis::n;
  if (name == "a") return SweepAxis::a;
  return std::nullopt;
}

const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> names = {
      "spectrum",     "lower_bound", "schrodinger_comparison", "upper_bounds",
      "discreteness", "pushdown",    "lift_identities"};
  return names;
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "case.id",          "case.kind",         "case.description",
      "base.model",       "base.dim",          "base.left",
      "base.right",       "base.left_condition", "base.right_condition",
      "base.profile",     "base.profile_c",    "base.profile_a",
      "base.power",       "warp.family",       "warp.c",
      "warp.a",           "warp.nodes",        "warp.samples",
      "fiber.kind",       "fiber.radius",      "fiber.dim",
      "fiber.lengths",    "fiber.volume",      "fiber.eigenvalues",
      "fiber.lambda0",    "grid.n",            "grid.grading",
      "grid.truncation",  "grid.mode_cutoff",  "solver.tol",
      "solver.max_inverse_steps", "solver.dense_cutoff", "solver.budget_floor",
      "modes.count",      "modes.n_theta",     "run.checks",
      "run.trials",       "run.probe_radii",   "run.slope_threshold",
      "run.plateau_floor", "run.pushdown_constant", "run.workers",
      "sweep.R",          "sweep.n",           "sweep.a",
      "sweep.fixed_spacing", "output.dir",     "output.reports",
      "output.plot",      "output.summary",    "output.header",
      "override.mean_curvature_bound",         "seed"};
  return keys;
}

bool CaseConfig::needs_seed() const {
  if (verify.trials <= 0) return false;
  for (const auto& c : checks) {
    if (c == "schrodinger_comparison" || c == "pushdown" || c == "lift_identities") return true;
  }
  return false;
}

const SweepSpec* CaseConfig::sweep(SweepAxis axis) const {
  for (const auto& s : sweeps) {
    if (s.axis == axis) return &s;
  }
  return nullptr;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool parse_plain(const std::string& s, double& out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return errno == 0 && end == s.c_str() + s.size() && std::isfinite(out);
}

struct Entry {
  std::string value;
  int line = 0;
};

class Reader {
 public:
  Reader(std::string source, std::map<std::string, Entry> entries)
      : source_(std::move(source)), entries_(std::move(entries)) {}

  [[noreturn]] void fail(int line, const std::string& msg) const {
    if (line <= 0) throw Error(ErrorKind::invalid_config, fmt::format("{}: {}", source_, msg));
    throw Error(ErrorKind::invalid_config, fmt::format("{}:{}: {}", source_, line, msg));
  }
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    fail(line(key), fmt::format("{}: {}", key, msg));
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  int line(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

  std::string text(const std::string& key, const std::string& def) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? def : it->second.value;
  }

  double number(const std::string& key, double def) const {
    if (!has(key)) return def;
    try {
      return parse_number(entries_.at(key).value);
    } catch (const Error&) {
      fail(key, fmt::format("not a number: '{}'", entries_.at(key).value));
    }
  }

  int integer(const std::string& key, int def) const {
    if (!has(key)) return def;
    const double v = number(key, def);
    if (v != std::floor(v) || std::abs(v) > 1e9) fail(key, "expected an integer");
    return static_cast<int>(v);
  }

  bool boolean(const std::string& key, bool def) const {
    if (!has(key)) return def;
    const std::string v = entries_.at(key).value;
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    fail(key, fmt::format("expected true or false, got '{}'", v));
  }

  std::vector<std::string> words(const std::string& key) const {
    std::vector<std::string> out;
    if (!has(key)) return out;
    std::stringstream ss(entries_.at(key).value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) fail(key, "empty list item");
      out.push_back(item);
    }
    return out;
  }

  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    for (const auto& w : words(key)) {
      try {
        out.push_back(parse_number(w));
      } catch (const Error&) {
        fail(key, fmt::format("not a number: '{}'", w));
      }
    }
    return out;
  }

  template <class T>
  T choice(const std::string& key, const std::vector<std::pair<std::string, T>>& options,
           T def) const {
    if (!has(key)) return def;
    const std::string v = entries_.at(key).value;
    for (const auto& [name, value] : options) {
      if (name == v) return value;
    }
    std::string allowed;
    for (const auto& o : options) allowed += (allowed.empty() ? "" : ", ") + o.first;
    fail(key, fmt::format("'{}' is not one of {}", v, allowed));
  }

  const std::string& source() const { return source_; }

 private:
  std::string source_;
  std::map<std::string, Entry> entries_;
};

EndCondition end_condition(const Reader& r, const std::string& key) {
  return r.choice<EndCondition>(key,
                                {{"dirichlet", EndCondition::dirichlet},
                                 {"neumann", EndCondition::neumann},
                                 {"pole", EndCondition::pole_regular}},
                                EndCondition::dirichlet);
}

WarpFunction analytic(WarpFamily fam, double c, double a) {
  switch (fam) {
    case WarpFamily::constant: return WarpFunction::constant(c);
    case WarpFamily::exponential: return WarpFunction::exponential(c, a);
    case WarpFamily::gaussian: return WarpFunction::gaussian(c, a);
    case WarpFamily::cosh: return WarpFunction::cosh(c, a);
    case WarpFamily::sinh: return WarpFunction::sinh(c, a);
    case WarpFamily::tabulated: break;
  }
  throw Error(ErrorKind::invalid_config, "tabulated warp has no parameter a");
}

const std::vector<std::pair<std::string, WarpFamily>> families = {
    {"constant", WarpFamily::constant}, {"exponential", WarpFamily::exponential},
    {"gaussian", WarpFamily::gaussian}, {"cosh", WarpFamily::cosh},
    {"sinh", WarpFamily::sinh},         {"tabulated", WarpFamily::tabulated}};

WeightedInterval read_base(const Reader& r, double& truncation) {
  const std::string model = r.choice<std::string>(
      "base.model", {{"interval", "interval"}, {"hyperbolic", "hyperbolic"}}, "interval");
  truncation = r.number("grid.truncation", 0.0);
  if (model == "hyperbolic") {
    for (const char* k : {"base.left", "base.right", "base.left_condition", "base.right_condition",
                          "base.profile", "base.profile_c", "base.profile_a", "base.power"}) {
      if (r.has(k)) r.fail(k, "not allowed with base.model = hyperbolic");
    }
    if (!r.has("base.dim")) r.fail(0, "base.dim: required with base.model = hyperbolic");
    if (!(truncation > 0.0)) r.fail(r.line("grid.truncation"), "grid.truncation: hyperbolic base needs R > 0");
    return WeightedInterval::hyperbolic(r.integer("base.dim", 2), truncation);
  }
  if (r.has("base.dim")) r.fail("base.dim", "only used with base.model = hyperbolic");
  if (!r.has("base.left") || !r.has("base.right")) r.fail(0, "base.left and base.right are required");
  WeightedInterval iv;
  const double lo = r.number("base.left", 0.0);
  const double hi = r.number("base.right", 0.0);
  iv.left.condition = end_condition(r, "base.left_condition");
  iv.right.condition = end_condition(r, "base.right_condition");
  iv.left.position = lo;
  iv.right.position = hi;
  const bool any_infinite = std::isinf(lo) || std::isinf(hi);
  if (any_infinite && !(truncation > 0.0)) {
    r.fail(r.line(std::isinf(lo) ? "base.left" : "base.right"),
           "infinite end needs grid.truncation > 0");
  }
  if (!any_infinite && r.has("grid.truncation")) {
    r.fail("grid.truncation", "only used with an infinite base end");
  }
  if (std::isinf(lo)) {
    if (lo > 0) r.fail("base.left", "left end cannot be +inf");
    if (r.has("base.left_condition")) r.fail("base.left_condition", "infinite ends are truncated with Dirichlet");
    iv.left = {-truncation, EndCondition::dirichlet, true};
  }
  if (std::isinf(hi)) {
    if (hi < 0) r.fail("base.right", "right end cannot be -inf");
    if (r.has("base.right_condition")) r.fail("base.right_condition", "infinite ends are truncated with Dirichlet");
    iv.right = {truncation, EndCondition::dirichlet, true};
  }
  const WarpFamily pf = r.choice<WarpFamily>("base.profile", families, WarpFamily::constant);
  if (pf == WarpFamily::tabulated) r.fail("base.profile", "tabulated profiles are not supported");
  iv.profile = analytic(pf, r.number("base.profile_c", 1.0), r.number("base.profile_a", 1.0));
  iv.power = r.number("base.power", 0.0);
  return iv;
}

WarpFunction read_warp(const Reader& r) {
  const WarpFamily fam = r.choice<WarpFamily>("warp.family", families, WarpFamily::constant);
  if (fam == WarpFamily::tabulated) {
    if (r.has("warp.c") || r.has("warp.a")) r.fail(r.has("warp.c") ? "warp.c" : "warp.a", "not used by a tabulated warp");
    auto nodes = r.numbers("warp.nodes");
    auto samples = r.numbers("warp.samples");
    if (nodes.size() != samples.size() || nodes.size() < 4) {
      r.fail("warp.samples", "needs as many samples as nodes (at least 4)");
    }
    return WarpFunction::tabulated(std::move(nodes), std::move(samples));
  }
  for (const char* k : {"warp.nodes", "warp.samples"}) {
    if (r.has(k)) r.fail(k, "only used by a tabulated warp");
  }
  if (fam == WarpFamily::constant && r.has("warp.a")) r.fail("warp.a", "constant warp has no parameter a");
  return analytic(fam, r.number("warp.c", 1.0), r.number("warp.a", 0.0));
}

FiberSpec read_fiber(const Reader& r) {
  const std::string kind = r.choice<std::string>("fiber.kind",
                                                 {{"circle", "circle"},
                                                  {"sphere", "sphere"},
                                                  {"torus", "torus"},
                                                  {"explicit", "explicit"},
                                                  {"noncompact", "noncompact"}},
                                                 "circle");
  auto need = [&](const char* key) {
    if (!r.has(key)) r.fail(r.line("fiber.kind"), fmt::format("{}: required for fiber.kind = {}", key, kind));
  };
  auto forbid = [&](std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
      if (r.has(k)) r.fail(k, fmt::format("not used by fiber.kind = {}", kind));
    }
  };
  if (kind == "circle") {
    forbid({"fiber.dim", "fiber.lengths", "fiber.volume", "fiber.eigenvalues", "fiber.lambda0"});
    return FiberSpec::circle(r.number("fiber.radius", 1.0));
  }
  if (kind == "sphere") {
    forbid({"fiber.lengths", "fiber.volume", "fiber.eigenvalues", "fiber.lambda0"});
    need("fiber.dim");
    return FiberSpec::sphere(r.integer("fiber.dim", 2), r.number("fiber.radius", 1.0));
  }
  if (kind == "torus") {
    forbid({"fiber.radius", "fiber.dim", "fiber.volume", "fiber.eigenvalues", "fiber.lambda0"});
    need("fiber.lengths");
    return FiberSpec::flat_torus(r.numbers("fiber.lengths"));
  }
  if (kind == "explicit") {
    forbid({"fiber.radius", "fiber.lengths", "fiber.lambda0"});
    need("fiber.dim");
    need("fiber.volume");
    need("fiber.eigenvalues");
    return FiberSpec::explicit_spectrum(r.integer("fiber.dim", 1), r.number("fiber.volume", 1.0),
                                        r.numbers("fiber.eigenvalues"));
  }
  forbid({"fiber.radius", "fiber.lengths", "fiber.volume", "fiber.eigenvalues"});
  need("fiber.dim");
  need("fiber.lambda0");
  return FiberSpec::noncompact(r.number("fiber.lambda0", 0.0), r.integer("fiber.dim", 1));
}

}  // namespace

namespace {
CaseConfig build_config(const Reader& r);
}  // namespace

double parse_number(const std::string& raw) {
  const std::string s = trim(raw);
  double v = 0.0;
  if (parse_plain(s, v)) return v;
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  // [coef]pi[/div]
  const auto p = s.find("pi");
  if (p != std::string::npos) {
    std::string coef = s.substr(0, p);
    std::string rest = s.substr(p + 2);
    double cv = 1.0;
    if (coef == "-") {
      cv = -1.0;
    } else if (!coef.empty() && coef != "+") {
      if (coef.back() == '*') coef.pop_back();
      if (!parse_plain(coef, cv)) throw Error(ErrorKind::invalid_config, "bad number " + s);
    }
    double dv = 1.0;
    if (!rest.empty()) {
      if (rest[0] != '/' || !parse_plain(rest.substr(1), dv) || dv == 0.0) {
        throw Error(ErrorKind::invalid_config, "bad number " + s);
      }
    }
    return cv * M_PI / dv;
  }
  throw Error(ErrorKind::invalid_config, "bad number " + s);
}

CaseConfig parse_config(const std::string& text, const std::string& source) {
  std::map<std::string, Entry> entries;
  const auto& keys = known_keys();
  std::stringstream ss(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(ss, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::invalid_config,
                  fmt::format("{}:{}: expected 'key = value'", source, lineno));
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw Error(ErrorKind::invalid_config, fmt::format("{}:{}: unknown key '{}'", source, lineno, key));
    }
    if (value.empty()) {
      throw Error(ErrorKind::invalid_config, fmt::format("{}:{}: {}: empty value", source, lineno, key));
    }
    if (entries.count(key)) {
      throw Error(ErrorKind::invalid_config,
                  fmt::format("{}:{}: duplicate key '{}' (first set on line {})", source, lineno,
                              key, entries[key].line));
    }
    entries[key] = {value, lineno};
  }
  const Reader r(source, std::move(entries));
  try {
    return build_config(r);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::invalid_config) throw;
    r.fail(0, e.what());
  }
}

namespace {

CaseConfig build_config(const Reader& r) {
  const std::string& source = r.source();
  CaseConfig cfg;
  cfg.source = source;
  if (!r.has("case.id")) r.fail(0, "case.id: required");
  SubmersionCase& c = cfg.base_case;
  c.id = r.text("case.id", "");
  cfg.description = r.text("case.description", "");
  c.kind = r.choice<SubmersionKind>(
      "case.kind", {{"warped", SubmersionKind::warped}, {"product", SubmersionKind::product}},
      SubmersionKind::warped);

  double truncation = 0.0;
  c.base = read_base(r, truncation);
  c.truncation = c.truncated() ? truncation : 0.0;
  c.warp = read_warp(r);
  c.fiber = read_fiber(r);
  c.resolution = r.integer("grid.n", 400);
  c.grading = r.choice<Grading>(
      "grid.grading", {{"uniform", Grading::uniform}, {"tanh", Grading::tanh_clustered}},
      Grading::uniform);
  c.mode_cutoff = r.integer("grid.mode_cutoff", 0);
  c.tolerances.solver = r.number("solver.tol", 1e-9);
  c.tolerances.budget_floor = r.number("solver.budget_floor", 1e-10);
  if (r.has("override.mean_curvature_bound")) {
    c.curvature_override = r.number("override.mean_curvature_bound", 0.0);
  }

  VerifyOptions& v = cfg.verify;
  v.solver.tol = c.tolerances.solver;
  v.solver.max_inverse_steps = r.integer("solver.max_inverse_steps", 12);
  v.solver.dense_cutoff = static_cast<std::size_t>(std::max(0, r.integer("solver.dense_cutoff", 200)));
  v.spectrum_count = r.integer("modes.count", 4);
  v.n_theta = r.integer("modes.n_theta", 32);
  v.trials = r.integer("run.trials", 100);
  v.probe_radii = r.numbers("run.probe_radii");
  v.slope_threshold = r.number("run.slope_threshold", 0.5);
  v.plateau_floor = r.number("run.plateau_floor", 1e-5);
  v.pushdown_constant = r.number("run.pushdown_constant", 1.0);
  if (v.spectrum_count < 1) r.fail("modes.count", "must be >= 1");
  if (v.n_theta < 4) r.fail("modes.n_theta", "must be >= 4");
  if (v.trials < 0) r.fail("run.trials", "must be >= 0");
  if (!(c.tolerances.solver > 0.0)) r.fail("solver.tol", "must be > 0");

  cfg.checks = r.has("run.checks") ? r.words("run.checks") : std::vector<std::string>{"spectrum"};
  {
    std::set<std::string> seen;
    std::vector<std::string> ordered;
    for (const auto& name : cfg.checks) {
      const auto& kc = known_checks();
      if (std::find(kc.begin(), kc.end(), name) == kc.end()) {
        r.fail("run.checks", fmt::format("unknown check '{}'", name));
      }
      if (!seen.insert(name).second) r.fail("run.checks", fmt::format("'{}' listed twice", name));
    }
    for (const auto& name : known_checks()) {
      if (seen.count(name)) ordered.push_back(name);
    }
    cfg.checks = ordered;
  }
  cfg.workers = r.integer("run.workers", 1);
  if (cfg.workers < 1) r.fail("run.workers", "must be >= 1");

  if (r.has("seed")) {
    const double s = r.number("seed", 0.0);
    if (s < 0 || s != std::floor(s) || s > 9.007199254740992e15) r.fail("seed", "expected a non-negative integer");
    cfg.seed = static_cast<std::uint64_t>(s);
    v.seed = *cfg.seed;
  }

  for (SweepAxis axis : {SweepAxis::R, SweepAxis::n, SweepAxis::a}) {
    const std::string key = fmt::format("sweep.{}", to_string(axis));
    if (!r.has(key)) continue;
    SweepSpec s{axis, r.numbers(key)};
    for (double x : s.values) {
      if (axis == SweepAxis::R && !(x > 0.0)) r.fail(key, "radii must be > 0");
      if (axis == SweepAxis::n && (x < 8 || x != std::floor(x))) r.fail(key, "resolutions must be integers >= 8");
    }
    if (axis == SweepAxis::R && !c.truncated()) r.fail(key, "R-sweep needs an infinite base end");
    if (axis == SweepAxis::a &&
        (c.warp.family() == WarpFamily::constant || c.warp.family() == WarpFamily::tabulated)) {
      r.fail(key, "a-sweep needs an analytic nonconstant warp");
    }
    cfg.sweeps.push_back(std::move(s));
  }
  cfg.fixed_spacing = r.boolean("sweep.fixed_spacing", true);

  cfg.output.dir = r.text("output.dir", cfg.output.dir);
  cfg.output.reports = r.text("output.reports", cfg.output.reports);
  cfg.output.plot = r.text("output.plot", cfg.output.plot);
  cfg.output.summary = r.text("output.summary", cfg.output.summary);
  cfg.output.header = r.text("output.header", cfg.output.header);
  for (const char* k : {"output.reports", "output.plot", "output.summary", "output.header"}) {
    const std::string name = r.text(k, "x");
    if (name.find('/') != std::string::npos) r.fail(k, "file names only; use output.dir for the directory");
  }

  try {
    c.validate();
  } catch (const Error& e) {
    r.fail(0, fmt::format("invalid case: {}", e.what()));
  }
  return cfg;
}

}  // namespace

CaseConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::invalid_config, fmt::format("{}: cannot read", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

SubmersionCase apply_point(const CaseConfig& cfg, const std::map<SweepAxis, double>& point) {
  SubmersionCase c = cfg.base_case;
  if (auto it = point.find(SweepAxis::n); it != point.end()) {
    c.resolution = static_cast<int>(it->second);
  }
  if (auto it = point.find(SweepAxis::R); it != point.end()) {
    const int n = c.resolution;
    c = c.with_truncation(it->second);
    if (!cfg.fixed_spacing) c.resolution = n;
  }
  if (auto it = point.find(SweepAxis::a); it != point.end()) {
    c.warp = analytic(c.warp.family(), c.warp.c(), it->second);
  }
  c.validate();
  return c;
}

}  // namespace subspec
