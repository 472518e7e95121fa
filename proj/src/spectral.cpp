#include "subspec/spectral.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

namespace subspec {

namespace {

constexpr double eps = std::numeric_limits<double>::epsilon();

double tridiagonal_norm(const std::vector<double>& d, const std::vector<double>& e) {
  double m = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double row = std::abs(d[i]);
    if (i > 0) row += std::abs(e[i - 1]);
    if (i < e.size()) row += std::abs(e[i]);
    m = std::max(m, row);
  }
  return m;
}

double pivot_floor(const std::vector<double>& e) {
  double m = 1.0;
  for (double x : e) m = std::max(m, x * x);
  return std::numeric_limits<double>::min() * m / eps;
}

std::size_t sturm(const std::vector<double>& d, const std::vector<double>& e, double x,
                  double pivmin) {
  std::size_t count = 0;
  double q = d[0] - x;
  if (std::abs(q) < pivmin) q = -pivmin;
  if (q < 0.0) ++count;
  for (std::size_t i = 1; i < d.size(); ++i) {
    q = d[i] - x - e[i - 1] * e[i - 1] / q;
    if (std::abs(q) < pivmin) q = -pivmin;
    if (q < 0.0) ++count;
  }
  return count;
}

// Lower end of the spectrum (Gershgorin).
double gershgorin_low(const std::vector<double>& d, const std::vector<double>& e) {
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < d.size(); ++i) {
    double r = 0.0;
    if (i > 0) r += std::abs(e[i - 1]);
    if (i < e.size()) r += std::abs(e[i]);
    lo = std::min(lo, d[i] - r);
  }
  return lo;
}

// j-th smallest eigenvalue (0-based) by bisection.
double bisect(const std::vector<double>& d, const std::vector<double>& e, std::size_t j,
              double pivmin, double scale) {
  double lo = gershgorin_low(d, e);
  lo -= 1e-3 * std::max(1.0, std::abs(lo));
  double step = std::max(1.0, std::abs(lo));
  double hi = lo + step;
  int guard = 0;
  while (sturm(d, e, hi, pivmin) <= j) {
    lo = hi;
    step *= 2.0;
    hi = lo + step;
    if (++guard > 2100) throw Error(ErrorKind::solver, "bisection failed to bracket eigenvalue");
  }
  const double atol = 4.0 * eps * scale + pivmin;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= atol + 2.0 * eps * std::max(std::abs(lo), std::abs(hi))) return mid;
    if (mid <= lo || mid >= hi) return mid;
    if (sturm(d, e, mid, pivmin) <= j) lo = mid;
    else hi = mid;
  }
  throw Error(ErrorKind::solver, fmt::format("bisection did not converge for eigenvalue {}", j));
}

// Solves (T - sigma) x = b in place by elimination with partial pivoting.
class ShiftedTridiagonal {
 public:
  ShiftedTridiagonal(const std::vector<double>& d, const std::vector<double>& e, double sigma,
                     double tiny)
      : n_(d.size()), u0_(n_), u1_(n_, 0.0), u2_(n_, 0.0), l_(n_, 0.0), swap_(n_, false) {
    double cd = d[0] - sigma;
    double ce = n_ > 1 ? e[0] : 0.0;
    double cf = 0.0;
    for (std::size_t i = 0; i + 1 < n_; ++i) {
      const double nd = e[i];
      const double ne = d[i + 1] - sigma;
      const double nf = i + 2 < n_ ? e[i + 1] : 0.0;
      if (std::abs(cd) >= std::abs(nd)) {
        if (cd == 0.0) cd = tiny;
        const double m = nd / cd;
        u0_[i] = cd;
        u1_[i] = ce;
        u2_[i] = cf;
        l_[i] = m;
        cd = ne - m * ce;
        ce = nf - m * cf;
        cf = 0.0;
      } else {
        const double m = cd / nd;
        u0_[i] = nd;
        u1_[i] = ne;
        u2_[i] = nf;
        l_[i] = m;
        swap_[i] = true;
        cd = ce - m * ne;
        ce = cf - m * nf;
        cf = 0.0;
      }
    }
    u0_[n_ - 1] = cd == 0.0 ? tiny : cd;
    for (auto& p : u0_) {
      if (std::abs(p) < tiny) p = p < 0.0 ? -tiny : tiny;
    }
  }

  void solve(std::vector<double>& y) const {
    for (std::size_t i = 0; i + 1 < n_; ++i) {
      if (swap_[i]) {
        const double t = y[i];
        y[i] = y[i + 1];
        y[i + 1] = t - l_[i] * y[i];
      } else {
        y[i + 1] -= l_[i] * y[i];
      }
    }
    for (std::size_t k = n_; k-- > 0;) {
      double acc = y[k];
      if (k + 1 < n_) acc -= u1_[k] * y[k + 1];
      if (k + 2 < n_) acc -= u2_[k] * y[k + 2];
      y[k] = acc / u0_[k];
    }
  }

 private:
  std::size_t n_;
  std::vector<double> u0_, u1_, u2_, l_;
  std::vector<bool> swap_;
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

void normalize(std::vector<double>& y) {
  double m = 0.0;
  for (double x : y) m = std::max(m, std::abs(x));
  if (m == 0.0 || !std::isfinite(m)) throw Error(ErrorKind::solver, "inverse iteration broke down");
  for (double& x : y) x /= m;
  const double n = std::sqrt(dot(y, y));
  for (double& x : y) x /= n;
}

// mu-residual |(A - lambda) v|_mu / |v|_mu, evaluated in the difference form.
double mu_residual(const SLOperator& op, const std::vector<double>& v, double lambda) {
  auto av = op.apply(v);
  for (std::size_t i = 0; i < v.size(); ++i) av[i] -= lambda * v[i];
  return std::sqrt(op.norm2(av) / op.norm2(v));
}

Eigenpair finish_pair(const SLOperator& op, const std::vector<double>& y) {
  Eigenpair p;
  p.vector.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) p.vector[i] = y[i] / std::sqrt(op.mass()[i]);
  const double n = std::sqrt(op.norm2(p.vector));
  for (double& x : p.vector) x /= n;
  p.value = op.energy(p.vector);
  p.residual = mu_residual(op, p.vector, p.value);
  return p;
}

void check_residual(const Eigenpair& p, double tol, double scale, int index) {
  const double limit = std::max(tol * std::max(1.0, std::abs(p.value)), 256.0 * eps * scale);
  if (!(p.residual <= limit)) {
    throw Error(ErrorKind::solver,
                fmt::format("eigenpair {} residual {:.3e} exceeds {:.3e} (lambda = {:.12g})", index,
                            p.residual, limit, p.value));
  }
}

}  // namespace

std::size_t sturm_count(const std::vector<double>& diag, const std::vector<double>& off, double x) {
  return sturm(diag, off, x, pivot_floor(off));
}

std::vector<Eigenpair> lowest_eigenpairs(const SLOperator& op, int count,
                                         const SolverOptions& options) {
  if (count < 1) throw Error(ErrorKind::solver, "need at least one eigenpair");
  std::vector<double> d, e;
  op.symmetric_tridiagonal(d, e);
  const std::size_t n = d.size();
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(count), n);
  const double scale = tridiagonal_norm(d, e);
  std::vector<Eigenpair> out;
  out.reserve(k);

  if (n <= options.dense_cutoff) {
    Eigen::VectorXd dv = Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(n));
    Eigen::VectorXd ev(static_cast<Eigen::Index>(n > 0 ? n - 1 : 0));
    for (std::size_t i = 0; i + 1 < n; ++i) ev[static_cast<Eigen::Index>(i)] = e[i];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(dv, ev, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) throw Error(ErrorKind::solver, "dense eigensolver failed");
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<double> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        y[i] = solver.eigenvectors()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
      out.push_back(finish_pair(op, y));
      check_residual(out.back(), options.tol, scale, static_cast<int>(j));
    }
    return out;
  }

  const double pivmin = pivot_floor(e);
  std::vector<std::vector<double>> basis;
  for (std::size_t j = 0; j < k; ++j) {
    const double lambda = bisect(d, e, j, pivmin, scale);
    const ShiftedTridiagonal lu(d, e, lambda, eps * scale);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = 1.0 + 0.1 * std::sin(0.7 * static_cast<double>(i) + j);
    normalize(y);
    Eigenpair best;
    best.residual = std::numeric_limits<double>::infinity();
    for (int step = 0; step < options.max_inverse_steps; ++step) {
      lu.solve(y);
      for (const auto& b : basis) {
        const double c = dot(b, y);
        for (std::size_t i = 0; i < n; ++i) y[i] -= c * b[i];
      }
      normalize(y);
      Eigenpair p = finish_pair(op, y);
      if (p.residual < best.residual) best = std::move(p);
      if (step >= 1 && best.residual <= std::max(options.tol * 1e-3 * std::max(1.0, std::abs(lambda)),
                                                 16.0 * eps * scale)) {
        break;
      }
    }
    check_residual(best, options.tol, scale, static_cast<int>(j));
    basis.push_back(y);
    out.push_back(std::move(best));
  }
  std::sort(out.begin(), out.end(), [](const Eigenpair& a, const Eigenpair& b) { return a.value < b.value; });
  return out;
}

Eigenpair lambda0(const SLOperator& op, const SolverOptions& options) {
  return std::move(lowest_eigenpairs(op, 1, options).front());
}

TensorSpectrum tensor_low_spectrum(const TensorOperator& op, int count, double tol,
                                   int max_iterations) {
  using Eigen::Index;
  const Index n = op.size();
  const Index k = std::min<Index>(count, n);
  const Index p = std::min<Index>(n, std::max<Index>(2 * k, k + 6));
  const Eigen::VectorXd& mass = op.mass();
  Eigen::SparseMatrix<double> shifted = op.stiffness();
  for (Index i = 0; i < n; ++i) shifted.coeffRef(i, i) += mass[i];
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::solver, "tensor factorization failed");

  Eigen::MatrixXd x(n, p);
  for (Index j = 0; j < p; ++j) {
    for (Index i = 0; i < n; ++i) {
      x(i, j) = std::cos(0.37 * static_cast<double>(i) * (j + 1) + 0.1 * j) + (j == 0 ? 1.0 : 0.0);
    }
  }
  TensorSpectrum out;
  for (int it = 1; it <= max_iterations; ++it) {
    Eigen::MatrixXd y = ldlt.solve(mass.asDiagonal() * x);
    // M-orthonormalize before Rayleigh-Ritz for conditioning.
    Eigen::MatrixXd gram = y.transpose() * mass.asDiagonal() * y;
    Eigen::LLT<Eigen::MatrixXd> chol(gram);
    y = chol.matrixU().solve<Eigen::OnTheRight>(y);
    const Eigen::MatrixXd sy = op.stiffness() * y;
    Eigen::MatrixXd small = y.transpose() * sy;
    small = 0.5 * (small + small.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(small);
    x = y * ritz.eigenvectors();
    const Eigen::MatrixXd sx = sy * ritz.eigenvectors();
    out.values.assign(static_cast<std::size_t>(k), 0.0);
    out.residuals.assign(static_cast<std::size_t>(k), 0.0);
    bool done = true;
    for (Index j = 0; j < k; ++j) {
      const double lam = ritz.eigenvalues()[j];
      const Eigen::VectorXd r = (sx.col(j) - lam * mass.cwiseProduct(x.col(j))).cwiseQuotient(mass);
      const double res = std::sqrt(r.cwiseProduct(mass).dot(r) / x.col(j).cwiseProduct(mass).dot(x.col(j)));
      out.values[static_cast<std::size_t>(j)] = lam;
      out.residuals[static_cast<std::size_t>(j)] = res;
      if (res > tol * std::max(1.0, std::abs(lam))) done = false;
    }
    out.iterations = it;
    if (done) return out;
  }
  throw Error(ErrorKind::solver,
              fmt::format("tensor subspace iteration stalled: residual {:.3e} after {} steps",
                          *std::max_element(out.residuals.begin(), out.residuals.end()),
                          max_iterations));
}

namespace {

Eigen::VectorXd start_vector(Eigen::Index n) {
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = 1.0 + 0.25 * std::cos(0.91 * static_cast<double>(i));
  return x;
}

double tensor_residual(const TensorOperator& op, const Eigen::VectorXd& x, double lam) {
  const Eigen::VectorXd r = (op.stiffness() * x - lam * op.mass().cwiseProduct(x)).cwiseQuotient(op.mass());
  return std::sqrt(op.norm2(r) / op.norm2(x));
}

Eigen::SparseMatrix<double> shifted_matrix(const TensorOperator& op, double sigma) {
  Eigen::SparseMatrix<double> a = op.stiffness();
  for (Eigen::Index i = 0; i < a.rows(); ++i) a.coeffRef(i, i) -= sigma * op.mass()[i];
  return a;
}

}  // namespace

TensorSpectrum tensor_lambda0(const TensorOperator& op, double tol) {
  // Upper bound from a short block iteration (Ritz values bound from above).
  double hi = 0.0;
  {
    const Eigen::VectorXd& mass = op.mass();
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(shifted_matrix(op, -1.0));
    if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::solver, "tensor factorization failed");
    Eigen::VectorXd x = start_vector(op.size());
    for (int it = 0; it < 20; ++it) {
      x = ldlt.solve(mass.cwiseProduct(x));
      x /= std::sqrt(op.norm2(x));
    }
    hi = op.energy(x) / op.norm2(x);
  }
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
  Eigen::SparseMatrix<double> a = shifted_matrix(op, 0.0);
  llt.analyzePattern(a);
  auto definite = [&](double sigma) {
    llt.factorize(shifted_matrix(op, sigma));
    return llt.info() == Eigen::Success;
  };
  double lo = -1e-9 * std::max(1.0, hi);
  int guard = 0;
  while (!definite(lo)) {
    lo = lo * 2.0 - 1.0;
    if (++guard > 60) throw Error(ErrorKind::solver, "no definite shift below the tensor spectrum");
  }
  for (int it = 0; it < 200 && hi - lo > 0.25 * tol * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (definite(mid)) lo = mid;
    else hi = mid;
  }
  if (!definite(lo)) throw Error(ErrorKind::solver, "lost definiteness at the lower bracket");
  Eigen::VectorXd x = start_vector(op.size());
  TensorSpectrum out;
  double lam = hi;
  double res = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 40; ++it) {
    x = llt.solve(op.mass().cwiseProduct(x));
    x /= std::sqrt(op.norm2(x));
    lam = op.energy(x);
    res = tensor_residual(op, x, lam);
    out.iterations = it + 1;
    if (res <= tol * std::max(1.0, std::abs(lam))) break;
  }
  if (!(res <= tol * std::max(1.0, std::abs(lam)))) {
    throw Error(ErrorKind::solver, fmt::format("tensor bottom residual {:.3e} above tolerance", res));
  }
  out.values = {lam};
  out.residuals = {res};
  return out;
}

TensorSpectrum tensor_eigenvalue_near(const TensorOperator& op, double sigma, double tol,
                                      int max_iterations) {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(shifted_matrix(op, sigma));
  if (ldlt.info() != Eigen::Success) {
    ldlt.compute(shifted_matrix(op, sigma - 1e-7 * std::max(1.0, std::abs(sigma))));
  }
  if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::solver, "shifted tensor factorization failed");
  Eigen::VectorXd x = start_vector(op.size());
  TensorSpectrum out;
  double lam = sigma;
  double res = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iterations; ++it) {
    x = ldlt.solve(op.mass().cwiseProduct(x));
    x /= std::sqrt(op.norm2(x));
    lam = op.energy(x);
    res = tensor_residual(op, x, lam);
    out.iterations = it + 1;
    if (res <= tol * std::max(1.0, std::abs(lam))) break;
  }
  out.values = {lam};
  out.residuals = {res};
  return out;
}

// ---------------------------------------------------------------------------

double SpectrumReport::budget(double floor) const {
  return std::max(floor, residual + discretization + truncation_sensitivity);
}

double extrapolate_length(double l1, double v1, double l2, double v2) {
  const double a = l1 * l1;
  const double b = l2 * l2;
  return (b * v2 - a * v1) / (b - a);
}

SpectrumReport estimate_bottom(const SubmersionCase& c, const CaseSolver& solve,
                               std::string label) {
  SpectrumReport rep;
  rep.label = std::move(label);
  const Solve fine = solve(c);
  const Solve coarse = solve(c.with_resolution(std::max(8, c.resolution / 2)));
  rep.lambda0 = fine.value;
  rep.eigenvalues = {fine.value};
  rep.residuals = {fine.residual};
  rep.residual = std::max(fine.residual, coarse.residual);
  rep.resolution = c.resolution;
  rep.spacing = c.base.length() / c.resolution;
  rep.truncation = c.truncation;
  rep.fine = fine.value;
  rep.coarse = coarse.value;
  rep.richardson = fine.value + (fine.value - coarse.value) / 3.0;
  rep.discretization = std::abs(fine.value - coarse.value);
  rep.estimate = fine.value;
  rep.extended = fine.value;
  rep.extrapolated = fine.value;
  if (c.truncated()) {
    const SubmersionCase wide = c.with_truncation(2.0 * c.truncation);
    const Solve ext = solve(wide);
    rep.residual = std::max(rep.residual, ext.residual);
    rep.extended = ext.value;
    rep.extrapolated = extrapolate_length(c.base.length(), fine.value, wide.base.length(), ext.value);
    rep.truncation_sensitivity = std::abs(ext.value - rep.extrapolated);
    rep.estimate = rep.extrapolated;
  }
  return rep;
}

namespace {

GridPtr case_grid(const SubmersionCase& c) { return build_grid(c.base, c.resolution, c.grading); }

Solve solve_op(const SLOperator& op, const SolverOptions& options) {
  const Eigenpair p = lambda0(op, options);
  return {p.value, p.residual};
}

}  // namespace

CaseSolver base_solver(const SolverOptions& options) {
  return [options](const SubmersionCase& c) {
    return solve_op(assemble_base_operator(c.base, nullptr, case_grid(c)), options);
  };
}

CaseSolver schrodinger_solver(const SolverOptions& options) {
  return [options](const SubmersionCase& c) {
    return solve_op(assemble_schrodinger(c, case_grid(c)), options);
  };
}

SLOperator total_bottom_operator(const SubmersionCase& c, const GridPtr& grid) {
  if (!c.fiber.closed()) return assemble_noncompact_total(c, grid);
  return std::move(assemble_total_family(c, grid, 1).modes.front());
}

CaseSolver total_solver(const SolverOptions& options) {
  return [options](const SubmersionCase& c) {
    return solve_op(total_bottom_operator(c, case_grid(c)), options);
  };
}

SpectrumReport low_spectrum(const SubmersionCase& c, int count, const SolverOptions& options) {
  if (count < 1) throw Error(ErrorKind::solver, "low_spectrum needs K >= 1");
  const GridPtr grid = case_grid(c);
  SpectrumReport rep;
  rep.label = "total";
  rep.resolution = c.resolution;
  rep.spacing = c.base.length() / c.resolution;
  rep.truncation = c.truncation;

  struct Entry {
    double value;
    ModeTag tag;
    double residual;
  };
  std::vector<Entry> merged;
  auto merge_family = [&](const std::vector<SLOperator>& ops) {
    merged.clear();
    for (const SLOperator& op : ops) {
      const auto pairs = lowest_eigenpairs(op, count, options);
      const ModeTag tag = op.mode().value_or(ModeTag{});
      for (const auto& p : pairs) {
        for (int m = 0; m < tag.multiplicity; ++m) merged.push_back({p.value, tag, p.residual});
      }
    }
    std::stable_sort(merged.begin(), merged.end(),
                     [](const Entry& a, const Entry& b) { return a.value < b.value; });
    if (merged.size() > static_cast<std::size_t>(count)) merged.resize(static_cast<std::size_t>(count));
  };

  if (!c.fiber.closed()) {
    SLOperator op = assemble_noncompact_total(c, grid);
    op.set_mode({0, c.fiber.lambda0(), 1});
    merge_family({op});
    rep.mode_cutoff = 1;
  } else {
    int j = c.mode_cutoff;
    bool settled = false;
    for (int attempt = 0; attempt < 2 && !settled; ++attempt) {
      if (j < 1) {
        const SLOperator mode0 = std::move(assemble_total_family(c, grid, 1).modes.front());
        const double window = lowest_eigenpairs(mode0, count, options).back().value;
        const auto cut = auto_mode_cutoff(c, *grid, window);
        if (!cut) {
          throw Error(ErrorKind::solver,
                      fmt::format("window top {:.6g} exceeds the mode cutoff guarantee", window));
        }
        j = *cut;
      }
      const TotalFamily fam = assemble_total_family(c, grid, j);
      merge_family(fam.modes);
      const double window = merged.back().value;
      if (fam.excluded_floor > 4.0 * window) {
        settled = true;
        rep.mode_cutoff = j;
      } else {
        j = 0;
      }
    }
    if (!settled) {
      throw Error(ErrorKind::solver, "spectral window exceeds the mode cutoff guarantee");
    }
  }
  for (const Entry& e : merged) {
    rep.eigenvalues.push_back(e.value);
    rep.tags.push_back(e.tag);
    rep.residuals.push_back(e.residual);
    rep.residual = std::max(rep.residual, e.residual);
  }
  rep.lambda0 = rep.eigenvalues.front();
  rep.fine = rep.coarse = rep.richardson = rep.estimate = rep.extended = rep.extrapolated = rep.lambda0;
  return rep;
}

SpectrumReport low_spectrum_tensor(const SubmersionCase& c, int count, int n_theta, double tol) {
  const GridPtr grid = case_grid(c);
  const TensorOperator op = assemble_total_tensor(c, grid, n_theta);
  const TensorSpectrum ts = count == 1 ? tensor_lambda0(op, tol) : tensor_low_spectrum(op, count, tol);
  SpectrumReport rep;
  rep.label = "tensor";
  rep.eigenvalues = ts.values;
  rep.residuals = ts.residuals;
  rep.residual = *std::max_element(ts.residuals.begin(), ts.residuals.end());
  rep.lambda0 = ts.values.front();
  rep.resolution = c.resolution;
  rep.spacing = c.base.length() / c.resolution;
  rep.truncation = c.truncation;
  rep.fine = rep.coarse = rep.richardson = rep.estimate = rep.extended = rep.extrapolated = rep.lambda0;
  return rep;
}

// ---------------------------------------------------------------------------
// Exhaustion probes

std::string_view to_string(ProbeTarget target) {
  switch (target) {
    case ProbeTarget::base: return "base";
    case ProbeTarget::schrodinger: return "schrodinger";
    case ProbeTarget::total: return "total";
  }
  return "?";
}

namespace {

struct Piece {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double length = 0.0;
};

std::vector<Piece> complement_pieces(const SLOperator& op, const WeightedInterval& base,
                                     double radius) {
  const bool lt = base.left.truncated;
  const bool rt = base.right.truncated;
  if (!lt && !rt) throw Error(ErrorKind::probe, "exhaustion probe needs a truncated end");
  const double a = base.left.position;
  const double b = base.right.position;
  double core_lo = a;
  double core_hi = b;
  if (lt && rt) {
    const double mid = 0.5 * (a + b);
    core_lo = mid - radius;
    core_hi = mid + radius;
  } else if (rt) {
    core_hi = a + radius;
  } else {
    core_lo = b - radius;
  }
  const auto& nodes = op.grid()->nodes;
  const std::size_t f = op.first();
  const std::size_t n = op.size();
  std::vector<Piece> pieces;
  if (rt) {
    std::size_t lo = n;
    for (std::size_t k = 0; k < n; ++k) {
      if (nodes[f + k] > core_hi) {
        lo = k;
        break;
      }
    }
    if (lo + 8 > n) throw Error(ErrorKind::probe, fmt::format("complement beyond r = {} has < 8 nodes", radius));
    if (lo == 0) throw Error(ErrorKind::probe, "probe core does not fit inside the domain");
    pieces.push_back({lo, n - 1, b - nodes[f + lo - 1]});
  }
  if (lt) {
    std::size_t hi = n;
    for (std::size_t k = n; k-- > 0;) {
      if (nodes[f + k] < core_lo) {
        hi = k;
        break;
      }
    }
    if (hi == n || hi + 1 < 8) {
      throw Error(ErrorKind::probe, fmt::format("complement before r = {} has < 8 nodes", radius));
    }
    pieces.push_back({0, hi, nodes[f + hi + 1] - a});
  }
  return pieces;
}

SLOperator probe_operator(const SubmersionCase& c, ProbeTarget target) {
  const GridPtr grid = case_grid(c);
  switch (target) {
    case ProbeTarget::base: return assemble_base_operator(c.base, nullptr, grid);
    case ProbeTarget::schrodinger: return assemble_schrodinger(c, grid);
    case ProbeTarget::total: return total_bottom_operator(c, grid);
  }
  throw Error(ErrorKind::probe, "unknown probe target");
}

}  // namespace

std::vector<double> complement_bottoms(const SLOperator& op, const WeightedInterval& base,
                                       const std::vector<double>& radii,
                                       const SolverOptions& options) {
  std::vector<double> out;
  for (double r : radii) {
    double v = std::numeric_limits<double>::infinity();
    for (const Piece& p : complement_pieces(op, base, r)) {
      v = std::min(v, lambda0(op.restrict_to(p.lo, p.hi), options).value);
    }
    out.push_back(v);
  }
  return out;
}

ExhaustionProbe exhaustion_probe(const SubmersionCase& c, ProbeTarget target,
                                 const std::vector<double>& radii, const SolverOptions& options) {
  if (radii.empty()) throw Error(ErrorKind::probe, "no probe radii");
  for (std::size_t i = 1; i < radii.size(); ++i) {
    if (!(radii[i] > radii[i - 1])) throw Error(ErrorKind::probe, "probe radii must increase");
  }
  const double reach = (c.base.left.truncated && c.base.right.truncated) ? 0.5 * c.base.length()
                                                                          : c.base.length();
  if (!(radii.front() > 0.0) || radii.back() >= reach) {
    throw Error(ErrorKind::probe, "probe radii must lie inside the truncated domain");
  }
  ExhaustionProbe probe;
  probe.target = target;
  probe.radii = radii;
  const SLOperator near = probe_operator(c, target);
  const SubmersionCase wide_case = c.with_truncation(2.0 * c.truncation);
  const SLOperator wide = probe_operator(wide_case, target);
  for (double r : radii) {
    double v1 = std::numeric_limits<double>::infinity();
    double v2 = v1;
    double vx = v1;
    const auto p1 = complement_pieces(near, c.base, r);
    const auto p2 = complement_pieces(wide, wide_case.base, r);
    for (std::size_t k = 0; k < p1.size(); ++k) {
      const double a = lambda0(near.restrict_to(p1[k].lo, p1[k].hi), options).value;
      const double b = lambda0(wide.restrict_to(p2[k].lo, p2[k].hi), options).value;
      v1 = std::min(v1, a);
      v2 = std::min(v2, b);
      vx = std::min(vx, extrapolate_length(p1[k].length, a, p2[k].length, b));
    }
    probe.values.push_back(v1);
    probe.extended.push_back(v2);
    probe.extrapolated.push_back(vx);
  }
  return probe;
}

DiscretenessVerdict discreteness_verdict(const ExhaustionProbe& probe) {
  const std::size_t n = probe.values.size();
  if (n < 4 || probe.radii.size() != n) {
    throw Error(ErrorKind::probe, "discreteness verdict needs at least 4 probe points");
  }
  for (std::size_t i = 1; i < n; ++i) {
    const double slack = 1e-9 * std::max(1.0, std::abs(probe.values[i - 1]));
    if (probe.values[i] < probe.values[i - 1] - slack) {
      throw Error(ErrorKind::invariant_violation,
                  fmt::format("complement bottoms decrease at r = {}: {} < {}", probe.radii[i],
                              probe.values[i], probe.values[i - 1]));
    }
  }
  const auto& series = probe.extrapolated.size() == n ? probe.extrapolated : probe.values;
  DiscretenessVerdict v;
  const double last = series.back();
  if (last <= probe.plateau_floor) {
    v.limit = std::max(0.0, last);
    return v;
  }
  std::vector<double> lx, ly;
  for (std::size_t i = n / 2; i < n; ++i) {
    if (series[i] <= 0.0) continue;
    lx.push_back(std::log(probe.radii[i]));
    ly.push_back(std::log(series[i]));
  }
  if (lx.size() >= 2) {
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    v.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  }
  v.discrete = v.slope > probe.slope_threshold;
  v.limit = v.discrete ? std::numeric_limits<double>::infinity() : last;
  return v;
}

}  // namespace subspec
