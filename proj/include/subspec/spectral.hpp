#pragma once

// Eigenvalue extraction for the discrete operators, merged total-space
// spectra, truncation/refinement estimates and exhaustion probes.

#include <functional>
#include <string>
#include <vector>

#include "subspec/discretize.hpp"

namespace subspec {

struct Eigenpair {
  double value = 0.0;
  /// Values on the operator's unknown nodes, unit mu-norm.
  std::vector<double> vector;
  /// |(A - lambda) v|_mu / |v|_mu.
  double residual = 0.0;
};

struct SolverOptions {
  double tol = 1e-9;
  int max_inverse_steps = 12;
  std::size_t dense_cutoff = 200;
};

/// Eigenvalues below x of the symmetric tridiagonal (diag, off).
std::size_t sturm_count(const std::vector<double>& diag, const std::vector<double>& off, double x);

/// The `count` smallest eigenpairs: Sturm bisection, inverse iteration and a
/// Rayleigh-quotient polish in the operator's energy form.
std::vector<Eigenpair> lowest_eigenpairs(const SLOperator& op, int count,
                                         const SolverOptions& options = {});

Eigenpair lambda0(const SLOperator& op, const SolverOptions& options = {});

struct TensorSpectrum {
  std::vector<double> values;
  std::vector<double> residuals;
  int iterations = 0;
};

/// Shift-invert block subspace iteration for the smallest eigenvalues.
TensorSpectrum tensor_low_spectrum(const TensorOperator& op, int count, double tol = 1e-9,
                                   int max_iterations = 400);

/// Bottom eigenvalue bracketed by Cholesky success of S - sigma M (a
/// positive-definiteness certificate) and polished by inverse iteration.
TensorSpectrum tensor_lambda0(const TensorOperator& op, double tol = 1e-9);

/// Eigenpair nearest to sigma by shift-invert iteration.
TensorSpectrum tensor_eigenvalue_near(const TensorOperator& op, double sigma, double tol = 1e-9,
                                      int max_iterations = 60);

struct SpectrumReport {
  std::string label;
  double lambda0 = 0.0;
  std::vector<double> eigenvalues;
  std::vector<ModeTag> tags;
  std::vector<double> residuals;
  double residual = 0.0;

  int resolution = 0;
  double spacing = 0.0;
  double truncation = 0.0;
  int mode_cutoff = 0;

  double coarse = 0.0;
  double fine = 0.0;
  double richardson = 0.0;
  double discretization = 0.0;

  /// Values at R and 2R (same spacing) and the 1/L^2 extrapolation.
  double extended = 0.0;
  double extrapolated = 0.0;
  double truncation_sensitivity = 0.0;

  /// Best estimate of the untruncated, continuum bottom.
  double estimate = 0.0;

  double budget(double floor = 0.0) const;
};

struct Solve {
  double value = 0.0;
  double residual = 0.0;
};

using CaseSolver = std::function<Solve(const SubmersionCase&)>;

/// Solves at n and n/2, and at R and 2R when truncated.
SpectrumReport estimate_bottom(const SubmersionCase& c, const CaseSolver& solve,
                               std::string label);

/// lambda0 extrapolated to infinite length from lengths l1 < l2.
double extrapolate_length(double l1, double v1, double l2, double v2);

CaseSolver base_solver(const SolverOptions& options = {});
CaseSolver schrodinger_solver(const SolverOptions& options = {});
/// Mode 0 for closed fibers, the lambda0(F)/psi^2 operator otherwise.
CaseSolver total_solver(const SolverOptions& options = {});

SLOperator total_bottom_operator(const SubmersionCase& c, const GridPtr& grid);

/// First `count` eigenvalues of the total space with mode tags, complete
/// below the window under the mode cutoff rule.
SpectrumReport low_spectrum(const SubmersionCase& c, int count, const SolverOptions& options = {});

/// Same for the tensor discretization of a circle-fiber case.
SpectrumReport low_spectrum_tensor(const SubmersionCase& c, int count, int n_theta,
                                   double tol = 1e-9);

enum class ProbeTarget { base, schrodinger, total };

std::string_view to_string(ProbeTarget target);

struct ExhaustionProbe {
  ProbeTarget target = ProbeTarget::total;
  std::vector<double> radii;
  /// lambda0 of the complement at truncation R.
  std::vector<double> values;
  /// Same complement at 2R, and the per-piece length extrapolation.
  std::vector<double> extended;
  std::vector<double> extrapolated;
  double slope_threshold = 0.5;
  double plateau_floor = 1e-5;
};

/// Complements of growing cores [c - r, c + r] (two-sided) or [a, a + r]
/// (one-sided) with Dirichlet on the inner boundary.
ExhaustionProbe exhaustion_probe(const SubmersionCase& c, ProbeTarget target,
                                 const std::vector<double>& radii,
                                 const SolverOptions& options = {});

/// Complement bottoms of a single assembled operator (no extrapolation).
std::vector<double> complement_bottoms(const SLOperator& op, const WeightedInterval& base,
                                       const std::vector<double>& radii,
                                       const SolverOptions& options = {});

struct DiscretenessVerdict {
  bool discrete = false;
  /// Essential-bottom estimate when not discrete.
  double limit = 0.0;
  double slope = 0.0;
};

DiscretenessVerdict discreteness_verdict(const ExhaustionProbe& probe);

}  // namespace subspec
