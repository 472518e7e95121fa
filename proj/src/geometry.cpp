#include "subspec/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace subspec {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_warp: return "invalid-warp";
    case ErrorKind::invalid_fiber: return "invalid-fiber";
    case ErrorKind::invalid_case: return "invalid-case";
    case ErrorKind::invalid_model: return "invalid-model";
    case ErrorKind::s_undefined: return "S-undefined";
    case ErrorKind::singular_potential: return "singular-potential";
    case ErrorKind::degenerate_range: return "degenerate-range";
    case ErrorKind::assembly: return "assembly";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::grid_mismatch: return "grid-mismatch";
    case ErrorKind::zero_function: return "zero-function";
    case ErrorKind::solver: return "solver";
    case ErrorKind::probe: return "probe";
    case ErrorKind::invariant_violation: return "invariant-violation";
    case ErrorKind::invalid_config: return "invalid-config";
  }
  return "unknown";
}

std::string_view to_string(WarpFamily family) {
  switch (family) {
    case WarpFamily::constant: return "constant";
    case WarpFamily::exponential: return "exponential";
    case WarpFamily::gaussian: return "gaussian";
    case WarpFamily::cosh: return "cosh";
    case WarpFamily::sinh: return "sinh";
    case WarpFamily::tabulated: return "tabulated";
  }
  return "unknown";
}

std::string_view to_string(FiberKind kind) {
  switch (kind) {
    case FiberKind::circle: return "circle";
    case FiberKind::sphere: return "sphere";
    case FiberKind::flat_torus: return "flat-torus";
    case FiberKind::explicit_list: return "explicit";
    case FiberKind::noncompact: return "noncompact";
  }
  return "unknown";
}

std::string_view to_string(EndCondition condition) {
  switch (condition) {
    case EndCondition::dirichlet: return "dirichlet";
    case EndCondition::neumann: return "neumann";
    case EndCondition::pole_regular: return "pole-regular";
  }
  return "unknown";
}

std::string_view to_string(SubmersionKind kind) {
  return kind == SubmersionKind::product ? "product" : "warped";
}

std::string_view to_string(Grading grading) {
  return grading == Grading::uniform ? "uniform" : "tanh-clustered";
}

// ---------------------------------------------------------------------------
// WarpFunction

namespace {

void require_positive_scale(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw Error(ErrorKind::invalid_warp, "warp scale c must be positive and finite");
  }
}

// Fornberg weights for the derivative of order `order` at x0 from `xs`.
std::vector<double> fd_weights(double x0, const std::vector<double>& xs, int order) {
  const int n = static_cast<int>(xs.size()) - 1;
  std::vector<std::vector<double>> c(n + 1, std::vector<double>(order + 1, 0.0));
  double c1 = 1.0;
  double c4 = xs[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    const int mn = std::min(i, order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = xs[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = xs[i] - xs[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) {
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        }
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) {
        c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      }
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n + 1);
  for (int i = 0; i <= n; ++i) w[i] = c[i][order];
  return w;
}

double stencil(const std::vector<double>& nodes, const std::vector<double>& values,
               std::size_t first, std::size_t count, std::size_t at, int order) {
  std::vector<double> xs(nodes.begin() + first, nodes.begin() + first + count);
  const auto w = fd_weights(nodes[at], xs, order);
  double acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) acc += w[i] * values[first + i];
  return acc;
}

}  // namespace

WarpFunction WarpFunction::constant(double c) {
  require_positive_scale(c);
  return {WarpFamily::constant, c, 0.0};
}

WarpFunction WarpFunction::exponential(double c, double a) {
  require_positive_scale(c);
  return {WarpFamily::exponential, c, a};
}

WarpFunction WarpFunction::gaussian(double c, double a) {
  require_positive_scale(c);
  return {WarpFamily::gaussian, c, a};
}

WarpFunction WarpFunction::cosh(double c, double a) {
  require_positive_scale(c);
  return {WarpFamily::cosh, c, a};
}

WarpFunction WarpFunction::sinh(double c, double a) {
  require_positive_scale(c);
  if (a == 0.0) throw Error(ErrorKind::invalid_warp, "sinh warp needs a != 0");
  return {WarpFamily::sinh, c, a};
}

WarpFunction WarpFunction::tabulated(std::vector<double> nodes, std::vector<double> samples) {
  if (nodes.size() != samples.size() || nodes.size() < 4) {
    throw Error(ErrorKind::invalid_warp, "tabulated warp needs >= 4 matching nodes and samples");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!(samples[i] > 0.0) || !std::isfinite(samples[i])) {
      throw Error(ErrorKind::invalid_warp, "tabulated warp sample " + std::to_string(i) +
                                               " is not positive");
    }
    if (i > 0 && !(nodes[i] > nodes[i - 1])) {
      throw Error(ErrorKind::invalid_warp, "tabulated warp nodes must increase strictly");
    }
  }
  WarpFunction w(WarpFamily::tabulated, 1.0, 0.0);
  const std::size_t n = nodes.size();
  w.node_d1_.resize(n);
  w.node_d2_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) {
      w.node_d1_[i] = stencil(nodes, samples, 0, 3, 0, 1);
      w.node_d2_[i] = stencil(nodes, samples, 0, 4, 0, 2);
    } else if (i == n - 1) {
      w.node_d1_[i] = stencil(nodes, samples, n - 3, 3, i, 1);
      w.node_d2_[i] = stencil(nodes, samples, n - 4, 4, i, 2);
    } else {
      w.node_d1_[i] = stencil(nodes, samples, i - 1, 3, i, 1);
      w.node_d2_[i] = stencil(nodes, samples, i - 1, 3, i, 2);
    }
  }
  w.nodes_ = std::move(nodes);
  w.samples_ = std::move(samples);
  return w;
}

std::size_t WarpFunction::locate(double r) const {
  if (r < nodes_.front() || r > nodes_.back()) {
    throw Error(ErrorKind::invalid_warp, "tabulated warp evaluated outside its nodes");
  }
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), r);
  std::size_t j = static_cast<std::size_t>(it - nodes_.begin());
  if (j == 0) j = 1;
  if (j >= nodes_.size()) j = nodes_.size() - 1;
  return j - 1;
}

double WarpFunction::interpolate(const std::vector<double>& values, double r) const {
  const std::size_t i = locate(r);
  const double t = (r - nodes_[i]) / (nodes_[i + 1] - nodes_[i]);
  return (1.0 - t) * values[i] + t * values[i + 1];
}

double WarpFunction::value(double r) const {
  switch (family_) {
    case WarpFamily::constant: return c_;
    case WarpFamily::exponential: return c_ * std::exp(a_ * r);
    case WarpFamily::gaussian: return c_ * std::exp(a_ * r * r);
    case WarpFamily::cosh: return c_ * std::cosh(a_ * r);
    case WarpFamily::sinh: return c_ * std::sinh(a_ * r);
    case WarpFamily::tabulated: return interpolate(samples_, r);
  }
  return 0.0;
}

double WarpFunction::d1(double r) const {
  switch (family_) {
    case WarpFamily::constant: return 0.0;
    case WarpFamily::exponential: return a_ * value(r);
    case WarpFamily::gaussian: return 2.0 * a_ * r * value(r);
    case WarpFamily::cosh: return c_ * a_ * std::sinh(a_ * r);
    case WarpFamily::sinh: return c_ * a_ * std::cosh(a_ * r);
    case WarpFamily::tabulated: return interpolate(node_d1_, r);
  }
  return 0.0;
}

double WarpFunction::d2(double r) const {
  switch (family_) {
    case WarpFamily::constant: return 0.0;
    case WarpFamily::exponential: return a_ * a_ * value(r);
    case WarpFamily::gaussian: return (2.0 * a_ + 4.0 * a_ * a_ * r * r) * value(r);
    case WarpFamily::cosh:
    case WarpFamily::sinh: return a_ * a_ * value(r);
    case WarpFamily::tabulated: return interpolate(node_d2_, r);
  }
  return 0.0;
}

double WarpFunction::log_derivative(double r) const {
  switch (family_) {
    case WarpFamily::constant: return 0.0;
    case WarpFamily::exponential: return a_;
    case WarpFamily::gaussian: return 2.0 * a_ * r;
    case WarpFamily::cosh: return a_ * std::tanh(a_ * r);
    case WarpFamily::sinh: return a_ / std::tanh(a_ * r);
    case WarpFamily::tabulated: return d1(r) / value(r);
  }
  return 0.0;
}

double WarpFunction::log_derivative_d1(double r) const {
  switch (family_) {
    case WarpFamily::constant:
    case WarpFamily::exponential: return 0.0;
    case WarpFamily::gaussian: return 2.0 * a_;
    case WarpFamily::cosh: {
      const double ch = std::cosh(a_ * r);
      return a_ * a_ / (ch * ch);
    }
    case WarpFamily::sinh: {
      const double sh = std::sinh(a_ * r);
      return -a_ * a_ / (sh * sh);
    }
    case WarpFamily::tabulated: {
      const double v = value(r);
      const double l = d1(r) / v;
      return d2(r) / v - l * l;
    }
  }
  return 0.0;
}

bool WarpFunction::vanishes_at(double r) const {
  return family_ == WarpFamily::sinh && r == 0.0;
}

WarpFunction WarpFunction::scaled(double factor) const {
  require_positive_scale(factor);
  WarpFunction w = *this;
  if (family_ == WarpFamily::tabulated) {
    for (auto& s : w.samples_) s *= factor;
    for (auto& s : w.node_d1_) s *= factor;
    for (auto& s : w.node_d2_) s *= factor;
  } else {
    w.c_ *= factor;
  }
  return w;
}

// ---------------------------------------------------------------------------
// FiberSpec

namespace {

double binomial(int n, int k) {
  if (k < 0 || n < k) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

std::vector<FiberMode> group_sorted(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::vector<FiberMode> modes;
  for (double v : values) {
    if (!modes.empty() && std::abs(v - modes.back().nu) <= 1e-12 * std::max(1.0, std::abs(v))) {
      ++modes.back().multiplicity;
    } else {
      modes.push_back({static_cast<int>(modes.size()), v, 1});
    }
  }
  return modes;
}

}  // namespace

FiberSpec FiberSpec::circle(double radius) {
  if (!(radius > 0.0)) throw Error(ErrorKind::invalid_fiber, "circle radius must be positive");
  FiberSpec f;
  f.kind_ = FiberKind::circle;
  f.dim_ = 1;
  f.radius_ = radius;
  f.volume_ = 2.0 * std::numbers::pi * radius;
  return f;
}

FiberSpec FiberSpec::sphere(int dim, double radius) {
  if (dim < 1) throw Error(ErrorKind::invalid_fiber, "sphere dimension must be >= 1");
  if (!(radius > 0.0)) throw Error(ErrorKind::invalid_fiber, "sphere radius must be positive");
  FiberSpec f;
  f.kind_ = FiberKind::sphere;
  f.dim_ = dim;
  f.radius_ = radius;
  const double half = 0.5 * (dim + 1);
  f.volume_ = 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half) * std::pow(radius, dim);
  return f;
}

FiberSpec FiberSpec::flat_torus(std::vector<double> lengths) {
  if (lengths.empty()) throw Error(ErrorKind::invalid_fiber, "torus needs at least one length");
  FiberSpec f;
  f.kind_ = FiberKind::flat_torus;
  f.dim_ = static_cast<int>(lengths.size());
  f.volume_ = 1.0;
  for (double l : lengths) {
    if (!(l > 0.0)) throw Error(ErrorKind::invalid_fiber, "torus lengths must be positive");
    f.volume_ *= l;
  }
  f.lengths_ = std::move(lengths);
  return f;
}

FiberSpec FiberSpec::explicit_spectrum(int dim, double volume, std::vector<double> eigenvalues) {
  if (dim < 1) throw Error(ErrorKind::invalid_fiber, "fiber dimension must be >= 1");
  if (!(volume > 0.0)) throw Error(ErrorKind::invalid_fiber, "fiber volume must be positive");
  if (eigenvalues.empty() || eigenvalues.front() != 0.0) {
    throw Error(ErrorKind::invalid_fiber, "closed connected fiber spectrum must start at 0");
  }
  if (!std::is_sorted(eigenvalues.begin(), eigenvalues.end())) {
    throw Error(ErrorKind::invalid_fiber, "fiber eigenvalues must be nondecreasing");
  }
  if (eigenvalues.size() > 1 && eigenvalues[1] == 0.0) {
    throw Error(ErrorKind::invalid_fiber, "a connected fiber has a simple zero eigenvalue");
  }
  FiberSpec f;
  f.kind_ = FiberKind::explicit_list;
  f.dim_ = dim;
  f.volume_ = volume;
  f.listed_ = std::move(eigenvalues);
  return f;
}

FiberSpec FiberSpec::noncompact(double lambda0, int dim) {
  if (dim < 1) throw Error(ErrorKind::invalid_fiber, "fiber dimension must be >= 1");
  if (!(lambda0 >= 0.0)) throw Error(ErrorKind::invalid_fiber, "fiber lambda0 must be >= 0");
  FiberSpec f;
  f.kind_ = FiberKind::noncompact;
  f.dim_ = dim;
  f.lambda0_ = lambda0;
  return f;
}

double FiberSpec::volume() const {
  if (!closed()) throw Error(ErrorKind::invalid_fiber, "noncompact fiber has no finite volume");
  return volume_;
}

double FiberSpec::lambda0() const { return closed() ? 0.0 : lambda0_; }

std::vector<FiberMode> FiberSpec::modes_up_to(double nu_max) const {
  std::vector<FiberMode> out;
  switch (kind_) {
    case FiberKind::noncompact:
      throw Error(ErrorKind::invalid_fiber, "noncompact fiber has no discrete mode list");
    case FiberKind::circle:
    case FiberKind::sphere: {
      const int k = dim_;
      const double r2 = radius_ * radius_;
      for (int l = 0;; ++l) {
        const double nu = l * (l + k - 1.0) / r2;
        if (nu > nu_max) break;
        const int mult = static_cast<int>(binomial(l + k, k) - binomial(l + k - 2, k));
        out.push_back({l, nu, mult});
      }
      return out;
    }
    case FiberKind::flat_torus: {
      std::vector<int> bound(lengths_.size());
      for (std::size_t i = 0; i < lengths_.size(); ++i) {
        bound[i] = static_cast<int>(
            std::floor(lengths_[i] * std::sqrt(std::max(nu_max, 0.0)) / (2.0 * std::numbers::pi)));
      }
      std::vector<double> values;
      std::vector<int> n(lengths_.size());
      for (std::size_t i = 0; i < n.size(); ++i) n[i] = -bound[i];
      while (true) {
        double nu = 0.0;
        for (std::size_t i = 0; i < n.size(); ++i) {
          const double t = 2.0 * std::numbers::pi * n[i] / lengths_[i];
          nu += t * t;
        }
        if (nu <= nu_max * (1.0 + 1e-14)) values.push_back(nu);
        std::size_t i = 0;
        while (i < n.size() && n[i] == bound[i]) {
          n[i] = -bound[i];
          ++i;
        }
        if (i == n.size()) break;
        ++n[i];
      }
      return group_sorted(std::move(values));
    }
    case FiberKind::explicit_list: {
      std::vector<double> values;
      for (double v : listed_) {
        if (v <= nu_max) values.push_back(v);
      }
      return group_sorted(std::move(values));
    }
  }
  return out;
}

std::vector<FiberMode> FiberSpec::first_modes(int count) const {
  if (count < 1) return {};
  switch (kind_) {
    case FiberKind::circle:
    case FiberKind::sphere: {
      const double l = count - 1;
      return modes_up_to(l * (l + dim_ - 1.0) / (radius_ * radius_));
    }
    case FiberKind::explicit_list: {
      auto all = modes_up_to(std::numeric_limits<double>::infinity());
      if (static_cast<int>(all.size()) > count) all.resize(count);
      return all;
    }
    case FiberKind::flat_torus: {
      double lmax = *std::max_element(lengths_.begin(), lengths_.end());
      double nu_max = std::pow(2.0 * std::numbers::pi / lmax, 2);
      while (true) {
        auto modes = modes_up_to(nu_max);
        if (static_cast<int>(modes.size()) >= count) {
          modes.resize(count);
          return modes;
        }
        nu_max *= 2.0;
      }
    }
    case FiberKind::noncompact:
      break;
  }
  throw Error(ErrorKind::invalid_fiber, "noncompact fiber has no discrete mode list");
}

// ---------------------------------------------------------------------------
// WeightedInterval

double WeightedInterval::weight(double r) const {
  if (power == 0.0) return 1.0;
  return std::pow(profile.value(r), power);
}

double WeightedInterval::log_weight_derivative(double r) const {
  if (power == 0.0) return 0.0;
  return power * profile.log_derivative(r);
}

bool WeightedInterval::is_pole(double r) const { return power > 0.0 && profile.vanishes_at(r); }

void WeightedInterval::validate() const {
  if (!(right.position > left.position) || !std::isfinite(left.position) ||
      !std::isfinite(right.position)) {
    throw Error(ErrorKind::degenerate_range, "interval needs finite a < b");
  }
  for (const IntervalEnd* end : {&left, &right}) {
    if (is_pole(end->position) && end->condition != EndCondition::pole_regular) {
      throw Error(ErrorKind::invalid_case, "weight vanishes at an end not flagged pole-regular");
    }
    if (end->truncated && end->condition != EndCondition::dirichlet) {
      throw Error(ErrorKind::invalid_case, "truncated ends carry the outer Dirichlet condition");
    }
  }
  constexpr int samples = 257;
  for (int i = 1; i < samples; ++i) {
    const double r = left.position + (right.position - left.position) * i / samples;
    const double w = weight(r);
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw Error(ErrorKind::invalid_case, "base weight is not positive in the interior");
    }
  }
}

WeightedInterval WeightedInterval::uniform(double a, double b, EndCondition left,
                                           EndCondition right) {
  WeightedInterval iv;
  iv.left = {a, left, false};
  iv.right = {b, right, false};
  return iv;
}

WeightedInterval WeightedInterval::hyperbolic(int m, double radius) {
  if (m < 2) throw Error(ErrorKind::invalid_model, "hyperbolic surrogate needs m >= 2");
  WeightedInterval iv;
  iv.left = {0.0, EndCondition::pole_regular, false};
  iv.right = {radius, EndCondition::dirichlet, true};
  iv.profile = WarpFunction::sinh(1.0, 1.0);
  iv.power = m - 1.0;
  return iv;
}

// ---------------------------------------------------------------------------
// SubmersionCase

void SubmersionCase::validate() const {
  base.validate();
  if (resolution < 8) throw Error(ErrorKind::invalid_case, "resolution must be >= 8");
  if (kind == SubmersionKind::product && warp.family() != WarpFamily::constant) {
    throw Error(ErrorKind::invalid_case, "product case requires a constant warp");
  }
  if (truncated() && !(truncation > 0.0)) {
    throw Error(ErrorKind::invalid_case, "truncated ends need a positive truncation radius");
  }
  if (base.left.truncated && base.left.position != -truncation) {
    throw Error(ErrorKind::invalid_case, "truncated left end must sit at -R");
  }
  if (base.right.truncated && base.right.position != truncation) {
    throw Error(ErrorKind::invalid_case, "truncated right end must sit at R");
  }
  if (warp.family() == WarpFamily::tabulated &&
      (warp.nodes().front() > base.left.position || warp.nodes().back() < base.right.position)) {
    throw Error(ErrorKind::invalid_warp, "tabulated warp does not cover the case range");
  }
  for (const IntervalEnd* end : {&base.left, &base.right}) {
    const bool pole = base.is_pole(end->position) || warp.vanishes_at(end->position);
    if (end->condition == EndCondition::pole_regular && !pole) {
      throw Error(ErrorKind::invalid_case, "pole-regular end where the total density is positive");
    }
    if (warp.vanishes_at(end->position) && end->condition != EndCondition::pole_regular) {
      throw Error(ErrorKind::invalid_warp, "warp vanishes at an end not flagged pole-regular");
    }
    if (!warp.vanishes_at(end->position)) {
      const double v = warp.value(end->position);
      if (!(v > 0.0)) throw Error(ErrorKind::invalid_warp, "warp is not positive at an end");
    }
  }
  constexpr int samples = 257;
  for (int i = 1; i < samples; ++i) {
    const double r = base.left.position + base.length() * i / samples;
    const double v = warp.value(r);
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorKind::invalid_warp, "warp is not positive on the case domain");
    }
  }
}

double SubmersionCase::fiber_volume(double r) const {
  return fiber.volume() * std::pow(warp.value(r), fiber.dim());
}

double SubmersionCase::total_density(double r) const { return base.weight(r) * fiber_volume(r); }

SubmersionCase SubmersionCase::with_truncation(double radius) const {
  SubmersionCase c = *this;
  if (!truncated()) return c;
  const double old_length = base.length();
  if (c.base.left.truncated) c.base.left.position = -radius;
  if (c.base.right.truncated) c.base.right.position = radius;
  c.truncation = radius;
  c.resolution = std::max(8, static_cast<int>(std::lround(resolution * c.base.length() / old_length)));
  return c;
}

SubmersionCase SubmersionCase::with_resolution(int n) const {
  SubmersionCase c = *this;
  c.resolution = n;
  return c;
}

// ---------------------------------------------------------------------------
// Closed forms

CurvatureBound mean_curvature_bound(const SubmersionCase& c) {
  if (c.curvature_override) return {*c.curvature_override, std::isfinite(*c.curvature_override)};
  const double k = c.fiber.dim();
  const double lo = c.base.left.position;
  const double hi = c.base.right.position;
  const bool unbounded_domain = c.truncated();
  const WarpFunction& w = c.warp;
  const double a = std::abs(w.a());

  auto probe_positive = [&](double r) {
    if (w.vanishes_at(r)) return;
    if (!(w.value(r) > 0.0)) throw Error(ErrorKind::invalid_warp, "nonpositive warp sample");
  };
  probe_positive(lo);
  probe_positive(hi);

  switch (w.family()) {
    case WarpFamily::constant: return {0.0, true};
    case WarpFamily::exponential: return {k * a, true};
    case WarpFamily::gaussian:
      if (a == 0.0) return {0.0, true};
      if (unbounded_domain) return {std::numeric_limits<double>::infinity(), false};
      return {k * 2.0 * a * std::max(std::abs(lo), std::abs(hi)), true};
    case WarpFamily::cosh:
      if (unbounded_domain) return {k * a, true};
      return {k * a * std::max(std::abs(std::tanh(w.a() * lo)), std::abs(std::tanh(w.a() * hi))),
              true};
    case WarpFamily::sinh: {
      if (lo < 0.0 && hi > 0.0) throw Error(ErrorKind::invalid_warp, "sinh warp changes sign");
      const double closest = std::min(std::abs(lo), std::abs(hi));
      if (closest == 0.0) return {std::numeric_limits<double>::infinity(), false};
      return {k * a / std::tanh(a * closest), true};
    }
    case WarpFamily::tabulated: {
      double sup = 0.0;
      for (std::size_t i = 0; i < w.nodes().size(); ++i) {
        const double r = w.nodes()[i];
        if (r < lo || r > hi) continue;
        if (!(w.samples()[i] > 0.0)) throw Error(ErrorKind::invalid_warp, "nonpositive sample");
        sup = std::max(sup, std::abs(w.log_derivative(r)));
      }
      sup = std::max({sup, std::abs(w.log_derivative(lo)), std::abs(w.log_derivative(hi))});
      return {k * sup, true};
    }
  }
  return {0.0, true};
}

SchrodingerPotential::SchrodingerPotential(const SubmersionCase& c)
    : warp_(c.warp), base_(c.base), k_(c.fiber.dim()) {
  if (!c.fiber.closed()) {
    throw Error(ErrorKind::s_undefined, "S needs closed fibers (finite fiber volume)");
  }
  for (const IntervalEnd* end : {&c.base.left, &c.base.right}) {
    const double r = end->position;
    if (warp_.vanishes_at(r)) {
      throw Error(ErrorKind::singular_potential, "fiber volume vanishes at an end of the domain");
    }
    if (base_.is_pole(r) && std::abs(warp_.log_derivative(r)) > 1e-12) {
      throw Error(ErrorKind::singular_potential,
                  "base pole without a warp regular there (psi'(pole) != 0)");
    }
  }
}

double SchrodingerPotential::operator()(double r) const {
  const double half = 0.5 * k_;
  const double psi = warp_.value(r);
  const double l = warp_.d1(r) / psi;
  const double phi_ratio_1 = half * l;
  const double phi_ratio_2 = half * (half - 1.0) * l * l + half * warp_.d2(r) / psi;
  double drift;
  if (base_.is_pole(r)) {
    // w'/w ~ p/(r - r0) against phi'/phi ~ (k/2) L'(r0) (r - r0).
    drift = base_.power * half * warp_.log_derivative_d1(r);
  } else {
    drift = base_.log_weight_derivative(r) * phi_ratio_1;
  }
  return phi_ratio_2 + drift;
}

double SchrodingerPotential::vector_field(double r) const {
  return -k_ * warp_.log_derivative(r);
}

double SchrodingerPotential::vector_field_form(double r) const {
  const double x = vector_field(r);
  const double dx = -k_ * warp_.log_derivative_d1(r);
  const double transport =
      base_.is_pole(r) ? base_.power * dx : base_.log_weight_derivative(r) * x;
  const double div = dx + transport;
  return 0.25 * x * x - 0.5 * div;
}

SchrodingerPotential schrodinger_potential(const SubmersionCase& c) {
  return SchrodingerPotential(c);
}

FiberProfile fiber_lambda0_profile(const SubmersionCase& c, const std::vector<double>& nodes) {
  FiberProfile p;
  p.nodes = nodes;
  p.values.resize(nodes.size(), 0.0);
  if (!c.fiber.closed()) {
    const double l0 = c.fiber.lambda0();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double psi = c.warp.value(nodes[i]);
      p.values[i] = l0 / (psi * psi);
    }
  }
  if (!p.values.empty()) {
    const auto [lo, hi] = std::minmax_element(p.values.begin(), p.values.end());
    p.infimum = *lo;
    p.spread = *hi - *lo;
  }
  return p;
}

ModelValue model_lambda0(const ModelSpace& model) {
  if (model.m < 2) throw Error(ErrorKind::invalid_model, "model dimension m must be >= 2");
  auto check_division_algebra = [&] {
    if (model.d != 1 && model.d != 2 && model.d != 4 && model.d != 8) {
      throw Error(ErrorKind::invalid_model, "d must be 1, 2, 4 or 8");
    }
    if (model.d == 8 && model.m != 2) {
      throw Error(ErrorKind::invalid_model, "Cayley hyperbolic plane needs m = 2");
    }
  };
  switch (model.kind) {
    case ModelKind::hyperbolic: {
      const double s = model.m - 1.0;
      return {s * s / 4.0, false};
    }
    case ModelKind::kh: {
      check_division_algebra();
      const double mu = model.m + model.d - 2.0;
      return {mu * mu / 4.0, false};
    }
    case ModelKind::quotient: {
      check_division_algebra();
      const double mu = model.m + model.d - 2.0;
      const double g = model.mu_gamma;
      if (!(g >= 0.0) || g > mu) {
        throw Error(ErrorKind::invalid_model, "exponential growth of the group out of [0, mu]");
      }
      if (g <= mu / 2.0) return {mu * mu / 4.0, false};
      return {g * (mu - g), false};
    }
    case ModelKind::mckean: {
      if (!(model.a > 0.0)) throw Error(ErrorKind::invalid_model, "curvature bound a must be > 0");
      const double s = (model.m - 1.0) * model.a;
      return {s * s / 4.0, true};
    }
  }
  throw Error(ErrorKind::invalid_model, "unknown model");
}

}  // namespace subspec
