#include "subspec/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

namespace subspec {

double Grid::max_cell() const {
  double m = 0.0;
  for (std::size_t i = 0; i < cells(); ++i) m = std::max(m, cell(i));
  return m;
}

double Grid::min_cell() const {
  double m = cell(0);
  for (std::size_t i = 1; i < cells(); ++i) m = std::min(m, cell(i));
  return m;
}

GridPtr build_grid(double a, double b, int n, Grading grading) {
  if (n < 1) throw Error(ErrorKind::degenerate_range, "grid needs at least one cell");
  if (!(b > a) || !std::isfinite(a) || !std::isfinite(b)) {
    throw Error(ErrorKind::degenerate_range, "grid range must satisfy a < b");
  }
  auto g = std::make_shared<Grid>();
  g->grading = grading;
  g->nodes.resize(static_cast<std::size_t>(n) + 1);
  constexpr double beta = 2.0;
  const double tb = std::tanh(beta);
  for (int i = 0; i <= n; ++i) {
    const double s = static_cast<double>(i) / n;
    double t = s;
    if (grading == Grading::tanh_clustered) t = 0.5 * (1.0 + std::tanh(beta * (2.0 * s - 1.0)) / tb);
    g->nodes[i] = a + (b - a) * t;
  }
  g->nodes.front() = a;
  g->nodes.back() = b;
  return g;
}

GridPtr build_grid(const WeightedInterval& interval, int n, Grading grading) {
  if (n < 8) throw Error(ErrorKind::degenerate_range, "grid needs n >= 8 cells");
  return build_grid(interval.left.position, interval.right.position, n, grading);
}

// ---------------------------------------------------------------------------
// SLOperator

SLOperator::SLOperator(GridPtr grid, std::size_t first, std::size_t last, std::vector<double> mass,
                       std::vector<double> edges, double left_edge, double right_edge,
                       std::vector<double> potential)
    : grid_(std::move(grid)),
      first_(first),
      last_(last),
      mass_(std::move(mass)),
      edges_(std::move(edges)),
      left_edge_(left_edge),
      right_edge_(right_edge),
      potential_(std::move(potential)) {
  if (mass_.size() != last_ - first_ + 1 || potential_.size() != mass_.size() ||
      edges_.size() + 1 != mass_.size()) {
    throw Error(ErrorKind::assembly, "inconsistent operator storage");
  }
  for (double m : mass_) {
    if (!(m > 0.0) || !std::isfinite(m)) throw Error(ErrorKind::assembly, "nonpositive mass");
  }
}

std::vector<double> SLOperator::coordinates() const {
  return {grid_->nodes.begin() + static_cast<std::ptrdiff_t>(first_),
          grid_->nodes.begin() + static_cast<std::ptrdiff_t>(last_) + 1};
}

std::vector<double> SLOperator::apply(std::span<const double> u) const {
  const std::size_t n = size();
  if (u.size() != n) throw Error(ErrorKind::grid_mismatch, "vector length does not match operator");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = mass_[i] * potential_[i] * u[i];
    if (i == 0) acc += left_edge_ * u[i];
    if (i + 1 == n) acc += right_edge_ * u[i];
    if (i > 0) acc += edges_[i - 1] * (u[i] - u[i - 1]);
    if (i + 1 < n) acc += edges_[i] * (u[i] - u[i + 1]);
    out[i] = acc / mass_[i];
  }
  return out;
}

double SLOperator::energy(std::span<const double> u) const {
  const std::size_t n = size();
  if (u.size() != n) throw Error(ErrorKind::grid_mismatch, "vector length does not match operator");
  long double e = left_edge_ * u[0] * u[0] + right_edge_ * u[n - 1] * u[n - 1];
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double d = u[i + 1] - u[i];
    e += static_cast<long double>(edges_[i]) * d * d;
  }
  for (std::size_t i = 0; i < n; ++i) e += static_cast<long double>(mass_[i]) * potential_[i] * u[i] * u[i];
  return static_cast<double>(e);
}

double SLOperator::inner(std::span<const double> u, std::span<const double> v) const {
  if (u.size() != size() || v.size() != size()) {
    throw Error(ErrorKind::grid_mismatch, "vector length does not match operator");
  }
  long double acc = 0.0;
  for (std::size_t i = 0; i < size(); ++i) acc += static_cast<long double>(mass_[i]) * u[i] * v[i];
  return static_cast<double>(acc);
}

void SLOperator::symmetric_tridiagonal(std::vector<double>& diag, std::vector<double>& off) const {
  const std::size_t n = size();
  diag.assign(n, 0.0);
  off.assign(n > 0 ? n - 1 : 0, 0.0);
  std::vector<double> root(n);
  for (std::size_t i = 0; i < n; ++i) root[i] = std::sqrt(mass_[i]);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    if (i == 0) s += left_edge_;
    if (i + 1 == n) s += right_edge_;
    if (i > 0) s += edges_[i - 1];
    if (i + 1 < n) s += edges_[i];
    diag[i] = s / mass_[i] + potential_[i];
  }
  // Divide separately by each root: the product of masses can underflow for
  // strongly decaying densities.
  for (std::size_t i = 0; i + 1 < n; ++i) off[i] = -edges_[i] / root[i] / root[i + 1];
}

double SLOperator::symmetry_defect(unsigned seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  double worst = 0.0;
  std::vector<double> u(size()), v(size());
  for (int trial = 0; trial < 4; ++trial) {
    for (auto& x : u) x = dist(rng);
    for (auto& x : v) x = dist(rng);
    const auto au = apply(u);
    const auto av = apply(v);
    const double lhs = inner(au, v);
    const double rhs = inner(u, av);
    const double scale = std::sqrt(norm2(au) * norm2(v)) + std::sqrt(norm2(u) * norm2(av));
    if (scale > 0.0) worst = std::max(worst, std::abs(lhs - rhs) / scale);
  }
  return worst;
}

SLOperator SLOperator::restrict_to(std::size_t lo, std::size_t hi) const {
  if (lo > hi || hi >= size()) throw Error(ErrorKind::grid_mismatch, "restriction out of range");
  std::vector<double> mass(mass_.begin() + lo, mass_.begin() + hi + 1);
  std::vector<double> pot(potential_.begin() + lo, potential_.begin() + hi + 1);
  std::vector<double> edges(edges_.begin() + lo, edges_.begin() + hi);
  const double le = lo == 0 ? left_edge_ : edges_[lo - 1];
  const double re = hi + 1 == size() ? right_edge_ : edges_[hi];
  SLOperator out(grid_, first_ + lo, first_ + hi, std::move(mass), std::move(edges), le, re,
                 std::move(pot));
  out.mode_ = mode_;
  return out;
}

std::vector<double> SLOperator::to_grid(std::span<const double> u) const {
  if (u.size() != size()) throw Error(ErrorKind::grid_mismatch, "vector length mismatch");
  std::vector<double> f(grid_->nodes.size(), 0.0);
  std::copy(u.begin(), u.end(), f.begin() + static_cast<std::ptrdiff_t>(first_));
  return f;
}

std::vector<double> SLOperator::from_grid(std::span<const double> f) const {
  if (f.size() != grid_->nodes.size()) throw Error(ErrorKind::grid_mismatch, "grid length mismatch");
  return {f.begin() + static_cast<std::ptrdiff_t>(first_),
          f.begin() + static_cast<std::ptrdiff_t>(last_) + 1};
}

bool SLOperator::identical(const SLOperator& other) const {
  return first_ == other.first_ && last_ == other.last_ && mass_ == other.mass_ &&
         edges_ == other.edges_ && left_edge_ == other.left_edge_ &&
         right_edge_ == other.right_edge_ && potential_ == other.potential_ &&
         grid_->nodes == other.grid_->nodes;
}

void SLOperator::export_triplets(std::ostream& out) const {
  const std::size_t n = size();
  out << "# stiffness: row col value\n";
  for (std::size_t i = 0; i < n; ++i) {
    double d = mass_[i] * potential_[i];
    if (i == 0) d += left_edge_;
    if (i + 1 == n) d += right_edge_;
    if (i > 0) d += edges_[i - 1];
    if (i + 1 < n) d += edges_[i];
    if (i > 0) out << i << ' ' << i - 1 << ' ' << -edges_[i - 1] << '\n';
    out << i << ' ' << i << ' ' << d << '\n';
    if (i + 1 < n) out << i << ' ' << i + 1 << ' ' << -edges_[i] << '\n';
  }
  out << "# mass: row col value\n";
  for (std::size_t i = 0; i < n; ++i) out << i << ' ' << i << ' ' << mass_[i] << '\n';
}

// ---------------------------------------------------------------------------
// Assembly

namespace {

double dual_length(const Grid& g, std::size_t i) {
  const std::size_t n = g.cells();
  if (i == 0) return 0.5 * g.cell(0);
  if (i == n) return 0.5 * g.cell(n - 1);
  return 0.5 * (g.cell(i - 1) + g.cell(i));
}

// Density integrated over the dual cell of node i. Pole nodes use the
// midpoint of their half cell since the nodal density vanishes.
double dual_density(const Grid& g, std::size_t i, const ScalarField& density, bool pole) {
  if (!pole) return density(g.nodes[i]) * dual_length(g, i);
  const std::size_t n = g.cells();
  const double h = i == 0 ? g.cell(0) : g.cell(n - 1);
  const double r = i == 0 ? g.nodes[0] + 0.25 * h : g.nodes[n] - 0.25 * h;
  return density(r) * 0.5 * h;
}

EndTreatment base_treatment(const WeightedInterval& base, const IntervalEnd& end) {
  switch (end.condition) {
    case EndCondition::dirichlet: return EndTreatment::eliminate;
    case EndCondition::neumann: return EndTreatment::natural;
    case EndCondition::pole_regular:
      // Only the warp vanishes here; the open base keeps the Friedrichs
      // (Dirichlet) condition.
      return base.is_pole(end.position) ? EndTreatment::pole : EndTreatment::eliminate;
  }
  return EndTreatment::eliminate;
}

EndTreatment total_treatment(const SubmersionCase& c, const IntervalEnd& end, double nu) {
  switch (end.condition) {
    case EndCondition::dirichlet: return EndTreatment::eliminate;
    case EndCondition::neumann: return EndTreatment::natural;
    case EndCondition::pole_regular:
      if (c.warp.vanishes_at(end.position) && nu > 0.0) return EndTreatment::eliminate;
      return EndTreatment::pole;
  }
  return EndTreatment::eliminate;
}

}  // namespace

SLOperator assemble_weighted(const GridPtr& grid, const ScalarField& density,
                             const ScalarField& potential, EndTreatment left, EndTreatment right) {
  const Grid& g = *grid;
  const std::size_t n = g.cells();
  const std::size_t first = left == EndTreatment::eliminate ? 1 : 0;
  const std::size_t last = right == EndTreatment::eliminate ? n - 1 : n;
  if (last < first + 1) throw Error(ErrorKind::assembly, "fewer than two unknown nodes");

  std::vector<double> kappa(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double rho = density(g.midpoint(i));
    if (!(rho > 0.0) || !std::isfinite(rho)) {
      throw Error(ErrorKind::assembly, "density is not positive at a cell midpoint");
    }
    kappa[i] = rho / g.cell(i);
  }
  const std::size_t count = last - first + 1;
  std::vector<double> mass(count), pot(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = first + k;
    const bool pole = (i == 0 && left == EndTreatment::pole) || (i == n && right == EndTreatment::pole);
    if (!pole && i != 0 && i != n) {
      const double rho = density(g.nodes[i]);
      if (!(rho > 0.0)) throw Error(ErrorKind::assembly, "weight <= 0 at an interior node");
    }
    mass[k] = dual_density(g, i, density, pole);
    pot[k] = potential ? potential(g.nodes[i]) : 0.0;
  }
  std::vector<double> edges(kappa.begin() + static_cast<std::ptrdiff_t>(first),
                            kappa.begin() + static_cast<std::ptrdiff_t>(last));
  const double le = first == 1 ? kappa.front() : 0.0;
  const double re = last == n - 1 ? kappa.back() : 0.0;
  return SLOperator(grid, first, last, std::move(mass), std::move(edges), le, re, std::move(pot));
}

SLOperator assemble_base_operator(const WeightedInterval& base, const ScalarField& potential,
                                  const GridPtr& grid) {
  return assemble_weighted(
      grid, [&](double r) { return base.weight(r); }, potential,
      base_treatment(base, base.left), base_treatment(base, base.right));
}

SLOperator assemble_renormalized(const WeightedInterval& base, const ScalarField& phi_squared,
                                 const GridPtr& grid) {
  const auto treat = [&](const IntervalEnd& end) {
    if (end.condition == EndCondition::dirichlet) return EndTreatment::eliminate;
    if (end.condition == EndCondition::neumann) return EndTreatment::natural;
    return EndTreatment::pole;
  };
  return assemble_weighted(
      grid, [&](double r) { return base.weight(r) * phi_squared(r); }, nullptr, treat(base.left),
      treat(base.right));
}

SLOperator renormalize(const SLOperator& op, std::span<const double> phi, double lambda) {
  const Grid& g = *op.grid();
  if (phi.size() != g.nodes.size()) throw Error(ErrorKind::grid_mismatch, "phi length mismatch");
  const std::size_t n = op.size();
  const std::size_t f = op.first();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(phi[f + i] > 0.0)) throw Error(ErrorKind::assembly, "renormalizer must be positive");
  }
  std::vector<double> mass(n), edges(n - 1), extra(n, 0.0), pot(n);
  for (std::size_t i = 0; i < n; ++i) mass[i] = op.mass()[i] * phi[f + i] * phi[f + i];
  for (std::size_t e = 0; e + 1 < n; ++e) {
    const double a = phi[f + e];
    const double b = phi[f + e + 1];
    const double k = op.edges()[e];
    edges[e] = k * a * b;
    extra[e] += k * (a * a - a * b);
    extra[e + 1] += k * (b * b - a * b);
  }
  double le = 0.0;
  double re = 0.0;
  if (op.left_edge() != 0.0) {
    const double a = phi[f];
    const double b = phi[f - 1];
    le = op.left_edge() * a * b;
    extra[0] += op.left_edge() * (a * a - a * b);
  }
  if (op.right_edge() != 0.0) {
    const double a = phi[f + n - 1];
    const double b = phi[f + n];
    re = op.right_edge() * a * b;
    extra[n - 1] += op.right_edge() * (a * a - a * b);
  }
  for (std::size_t i = 0; i < n; ++i) pot[i] = op.potential()[i] + extra[i] / mass[i] - lambda;
  SLOperator out(op.grid(), op.first(), op.last(), std::move(mass), std::move(edges), le, re,
                 std::move(pot));
  if (op.mode()) out.set_mode(*op.mode());
  return out;
}

SLOperator schrodinger_form(const SLOperator& renormalized, std::span<const double> sqrt_volume) {
  std::vector<double> inv(sqrt_volume.size());
  for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0 / sqrt_volume[i];
  return renormalize(renormalized, inv, 0.0);
}

SLOperator assemble_schrodinger(const SubmersionCase& c, const GridPtr& grid) {
  const SchrodingerPotential q(c);
  return assemble_base_operator(c.base, [&](double r) { return q(r); }, grid);
}

TotalFamily assemble_total_family(const SubmersionCase& c, const GridPtr& grid, int mode_count) {
  if (!c.fiber.closed()) {
    throw Error(ErrorKind::unsupported, "noncompact fiber: use the tensor/product path");
  }
  if (mode_count < 1) throw Error(ErrorKind::invalid_case, "mode cutoff J must be >= 1");
  TotalFamily fam;
  auto modes = c.fiber.first_modes(mode_count + 1);
  double max_psi2 = 0.0;
  for (double r : grid->nodes) max_psi2 = std::max(max_psi2, std::pow(c.warp.value(r), 2));
  if (static_cast<int>(modes.size()) > mode_count) {
    fam.excluded_floor = modes[mode_count].nu / max_psi2;
    modes.resize(mode_count);
  } else {
    fam.excluded_floor = std::numeric_limits<double>::infinity();
  }
  for (const FiberMode& m : modes) {
    ScalarField potential;
    if (m.nu > 0.0) {
      potential = [&c, nu = m.nu](double r) {
        const double psi = c.warp.value(r);
        return nu / (psi * psi);
      };
    }
    SLOperator op;
    if (m.nu == 0.0) {
      op = assemble_renormalized(c.base, [&c](double r) { return c.fiber_volume(r); }, grid);
    } else {
      op = assemble_weighted(
          grid, [&c](double r) { return c.base.weight(r) * c.fiber_volume(r); }, potential,
          total_treatment(c, c.base.left, m.nu), total_treatment(c, c.base.right, m.nu));
    }
    op.set_mode({m.index, m.nu, m.multiplicity});
    fam.modes.push_back(std::move(op));
  }
  fam.fiber_modes = std::move(modes);
  return fam;
}

std::optional<int> auto_mode_cutoff(const SubmersionCase& c, const Grid& grid, double window_top,
                                    int max_modes) {
  double max_psi2 = 0.0;
  for (double r : grid.nodes) max_psi2 = std::max(max_psi2, std::pow(c.warp.value(r), 2));
  const auto modes = c.fiber.first_modes(max_modes + 1);
  for (std::size_t j = 1; j < modes.size(); ++j) {
    if (modes[j].nu / max_psi2 > 4.0 * window_top) return static_cast<int>(j);
  }
  if (static_cast<int>(modes.size()) <= max_modes) return static_cast<int>(modes.size());
  return std::nullopt;
}

SLOperator assemble_noncompact_total(const SubmersionCase& c, const GridPtr& grid) {
  if (c.fiber.closed()) throw Error(ErrorKind::unsupported, "closed fiber: use the mode family");
  const int k = c.fiber.dim();
  const double l0 = c.fiber.lambda0();
  ScalarField potential;
  if (l0 > 0.0) {
    potential = [&c, l0](double r) {
      const double psi = c.warp.value(r);
      return l0 / (psi * psi);
    };
  }
  return assemble_weighted(
      grid, [&c, k](double r) { return c.base.weight(r) * std::pow(c.warp.value(r), k); },
      potential, total_treatment(c, c.base.left, l0), total_treatment(c, c.base.right, l0));
}

// ---------------------------------------------------------------------------
// Tensor path

double TensorGrid::dtheta() const { return 2.0 * std::numbers::pi / n_theta; }

TensorOperator::TensorOperator(TensorGrid tensor, std::size_t first, std::size_t last,
                               Eigen::VectorXd mass, Eigen::SparseMatrix<double> stiffness,
                               Eigen::VectorXd boundary)
    : tensor_(std::move(tensor)),
      first_(first),
      last_(last),
      mass_(std::move(mass)),
      stiffness_(std::move(stiffness)),
      boundary_(std::move(boundary)) {}

Eigen::VectorXd TensorOperator::apply(const Eigen::VectorXd& u) const {
  return (stiffness_ * u).cwiseQuotient(mass_);
}

// Edge form, free of the cancellation in the assembled diagonal.
double TensorOperator::energy(const Eigen::VectorXd& u) const {
  long double e = 0.0;
  for (Eigen::Index k = 0; k < stiffness_.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(stiffness_, k); it; ++it) {
      if (it.index() > k) {
        const double d = u[k] - u[it.index()];
        e -= static_cast<long double>(it.value()) * d * d;
      }
    }
    e += static_cast<long double>(boundary_[k]) * u[k] * u[k];
  }
  return static_cast<double>(e);
}

double TensorOperator::norm2(const Eigen::VectorXd& u) const {
  long double acc = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) acc += static_cast<long double>(mass_[i]) * u[i] * u[i];
  return static_cast<double>(acc);
}

double TensorOperator::symmetry_defect(unsigned seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  double worst = 0.0;
  Eigen::VectorXd u(size()), v(size());
  for (int trial = 0; trial < 4; ++trial) {
    for (Eigen::Index i = 0; i < size(); ++i) {
      u[i] = dist(rng);
      v[i] = dist(rng);
    }
    const Eigen::VectorXd au = apply(u);
    const Eigen::VectorXd av = apply(v);
    const double lhs = au.cwiseProduct(mass_).dot(v);
    const double rhs = u.cwiseProduct(mass_).dot(av);
    const double scale = std::sqrt(norm2(au) * norm2(v)) + std::sqrt(norm2(u) * norm2(av));
    worst = std::max(worst, std::abs(lhs - rhs) / scale);
  }
  return worst;
}

Eigen::VectorXd TensorOperator::from_grid(std::span<const double> values) const {
  const std::size_t nt = static_cast<std::size_t>(tensor_.n_theta);
  if (values.size() != tensor_.base->nodes.size() * nt) {
    throw Error(ErrorKind::grid_mismatch, "tensor function does not match the grid");
  }
  Eigen::VectorXd u(size());
  for (std::size_t i = first_; i <= last_; ++i) {
    for (std::size_t l = 0; l < nt; ++l) u[static_cast<Eigen::Index>((i - first_) * nt + l)] = values[i * nt + l];
  }
  return u;
}

TensorOperator assemble_total_tensor(const SubmersionCase& c, const GridPtr& base_grid,
                                     int n_theta) {
  if (c.fiber.kind() != FiberKind::circle) {
    throw Error(ErrorKind::unsupported, "tensor path supports circle fibers only");
  }
  if (n_theta < 4) throw Error(ErrorKind::invalid_case, "tensor path needs n_theta >= 4");
  for (const IntervalEnd* end : {&c.base.left, &c.base.right}) {
    if (c.warp.vanishes_at(end->position)) {
      throw Error(ErrorKind::unsupported, "tensor path cannot resolve a collapsing fiber");
    }
  }
  const Grid& g = *base_grid;
  const std::size_t n = g.cells();
  const auto treat = [&](const IntervalEnd& end) {
    if (end.condition == EndCondition::dirichlet) return EndTreatment::eliminate;
    if (end.condition == EndCondition::neumann) return EndTreatment::natural;
    return EndTreatment::pole;
  };
  const EndTreatment left = treat(c.base.left);
  const EndTreatment right = treat(c.base.right);
  const std::size_t first = left == EndTreatment::eliminate ? 1 : 0;
  const std::size_t last = right == EndTreatment::eliminate ? n - 1 : n;
  const std::size_t nr = last - first + 1;
  const int nt = n_theta;
  const double rho = c.fiber.radius();
  TensorGrid tensor{base_grid, n_theta, rho};
  const double dth = tensor.dtheta();
  const auto weight = [&c](double r) { return c.base.weight(r); };

  Eigen::VectorXd mass(static_cast<Eigen::Index>(nr * nt));
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(nr * nt * 5);
  auto index = [&](std::size_t i, int l) {
    return static_cast<Eigen::Index>((i - first) * nt + ((l % nt) + nt) % nt);
  };
  std::vector<double> diag(nr * nt, 0.0);
  Eigen::VectorXd boundary = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nr * nt));
  for (std::size_t i = first; i <= last; ++i) {
    const bool pole = (i == 0 && left == EndTreatment::pole) || (i == n && right == EndTreatment::pole);
    const double wd = dual_density(g, i, weight, pole);
    double at = g.nodes[i];
    if (pole) at = i == 0 ? g.nodes[0] + 0.25 * g.cell(0) : g.nodes[n] - 0.25 * g.cell(n - 1);
    const double psi = c.warp.value(at);
    const double k_theta = wd / (psi * rho * dth);
    for (int l = 0; l < nt; ++l) {
      mass[index(i, l)] = wd * psi * rho * dth;
      // angular edge (l, l+1)
      const Eigen::Index a = index(i, l);
      const Eigen::Index b = index(i, l + 1);
      trips.emplace_back(a, b, -k_theta);
      trips.emplace_back(b, a, -k_theta);
      diag[a] += k_theta;
      diag[b] += k_theta;
    }
  }
  for (std::size_t cell = 0; cell < n; ++cell) {
    const double mid = g.midpoint(cell);
    const double k_r = c.base.weight(mid) * c.warp.value(mid) * rho * dth / g.cell(cell);
    const bool lo_in = cell >= first && cell <= last;
    const bool hi_in = cell + 1 >= first && cell + 1 <= last;
    for (int l = 0; l < nt; ++l) {
      if (lo_in) diag[index(cell, l)] += k_r;
      if (hi_in) diag[index(cell + 1, l)] += k_r;
      if (lo_in && hi_in) {
        trips.emplace_back(index(cell, l), index(cell + 1, l), -k_r);
        trips.emplace_back(index(cell + 1, l), index(cell, l), -k_r);
      } else if (lo_in) {
        boundary[index(cell, l)] += k_r;
      } else if (hi_in) {
        boundary[index(cell + 1, l)] += k_r;
      }
    }
  }
  for (std::size_t k = 0; k < diag.size(); ++k) {
    trips.emplace_back(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k), diag[k]);
  }
  Eigen::SparseMatrix<double> stiff(mass.size(), mass.size());
  stiff.setFromTriplets(trips.begin(), trips.end());
  return TensorOperator(std::move(tensor), first, last, std::move(mass), std::move(stiff),
                        std::move(boundary));
}

// ---------------------------------------------------------------------------
// Transfer maps and Rayleigh quotients

namespace {

void require_same_grid(const Grid& a, const Grid& b) {
  if (&a != &b && a.nodes != b.nodes) throw Error(ErrorKind::grid_mismatch, "grids differ");
}

void require_circle_match(const TensorGrid& t, const SubmersionCase& c) {
  if (c.fiber.kind() != FiberKind::circle) {
    throw Error(ErrorKind::unsupported, "fiber transfer maps need a circle fiber");
  }
  if (t.radius != c.fiber.radius()) throw Error(ErrorKind::grid_mismatch, "fiber radius differs");
}

}  // namespace

TensorFunction lift(const BaseFunction& f, const TensorGrid& tensor) {
  require_same_grid(*f.grid, *tensor.base);
  if (f.values.size() != f.grid->nodes.size()) {
    throw Error(ErrorKind::grid_mismatch, "base function does not match its grid");
  }
  TensorFunction out{tensor, std::vector<double>(f.values.size() * tensor.n_theta)};
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    for (int l = 0; l < tensor.n_theta; ++l) out.values[i * tensor.n_theta + l] = f.values[i];
  }
  return out;
}

BaseFunction average(const TensorFunction& f, const SubmersionCase& c) {
  require_circle_match(f.grid, c);
  const auto& nodes = f.grid.base->nodes;
  if (f.values.size() != nodes.size() * f.grid.n_theta) {
    throw Error(ErrorKind::grid_mismatch, "tensor function does not match its grid");
  }
  BaseFunction out{f.grid.base, std::vector<double>(nodes.size(), 0.0)};
  const double dth = f.grid.dtheta();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double line = c.warp.value(nodes[i]) * f.grid.radius * dth;
    double acc = 0.0;
    for (int l = 0; l < f.grid.n_theta; ++l) acc += f.at(i, l);
    out.values[i] = acc * line;
  }
  return out;
}

BaseFunction pushdown(const TensorFunction& f, const SubmersionCase& c) {
  require_circle_match(f.grid, c);
  const auto& nodes = f.grid.base->nodes;
  if (f.values.size() != nodes.size() * f.grid.n_theta) {
    throw Error(ErrorKind::grid_mismatch, "tensor function does not match its grid");
  }
  BaseFunction out{f.grid.base, std::vector<double>(nodes.size(), 0.0)};
  const double dth = f.grid.dtheta();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double line = c.warp.value(nodes[i]) * f.grid.radius * dth;
    double acc = 0.0;
    for (int l = 0; l < f.grid.n_theta; ++l) acc += f.at(i, l) * f.at(i, l);
    out.values[i] = std::sqrt(acc * line);
  }
  return out;
}

double rayleigh(const SLOperator& op, std::span<const double> unknowns) {
  const double den = op.norm2(unknowns);
  if (!(den > 0.0)) throw Error(ErrorKind::zero_function, "Rayleigh quotient of the zero function");
  return op.energy(unknowns) / den;
}

double rayleigh(const SLOperator& op, const BaseFunction& f) {
  require_same_grid(*f.grid, *op.grid());
  const auto& v = f.values;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if ((i < op.first() || i > op.last()) && v[i] != 0.0) {
      throw Error(ErrorKind::invalid_case, "test function violates a Dirichlet condition");
    }
  }
  return rayleigh(op, op.from_grid(v));
}

double rayleigh(const TensorOperator& op, const TensorFunction& f) {
  require_same_grid(*f.grid.base, *op.grid().base);
  const std::size_t nt = static_cast<std::size_t>(op.grid().n_theta);
  for (std::size_t i = 0; i < f.grid.base->nodes.size(); ++i) {
    if (i >= op.first() && i <= op.last()) continue;
    for (std::size_t l = 0; l < nt; ++l) {
      if (f.values[i * nt + l] != 0.0) {
        throw Error(ErrorKind::invalid_case, "test function violates a Dirichlet condition");
      }
    }
  }
  const Eigen::VectorXd u = op.from_grid(f.values);
  const double den = op.norm2(u);
  if (!(den > 0.0)) throw Error(ErrorKind::zero_function, "Rayleigh quotient of the zero function");
  return op.energy(u) / den;
}

}  // namespace subspec
