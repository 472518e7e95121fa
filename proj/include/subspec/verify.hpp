#pragma once

// Inequality and identity checks with hypothesis gating and tolerance
// accounting. Each report keeps enough fields to recompute its verdict.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "subspec/spectral.hpp"

namespace subspec {

enum class Verdict { holds, holds_with_equality, violated_beyond_tolerance, hypotheses_not_met };

std::string_view to_string(Verdict v);

struct HypothesisCheck {
  std::string name;
  bool satisfied = false;
  std::string detail;
};

/// One inequality instance. slack is oriented so that slack >= 0 means the
/// inequality is satisfied.
struct Check {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  double budget = 0.0;
  /// Identity checks report "holds" inside the budget instead of equality.
  bool identity = false;

  Verdict verdict() const;
};

Check inequality(std::string name, double lhs, double rhs, double slack, double budget);
/// defect <= limit.
Check identity_check(std::string name, double defect, double limit);

struct Metric {
  std::string name;
  double value = 0.0;
};

struct TheoremReport {
  std::string theorem;
  std::string case_id;
  std::vector<HypothesisCheck> hypotheses;
  std::vector<Check> checks;
  std::vector<Metric> metrics;
  std::vector<std::string> notes;
  std::vector<SpectrumReport> spectra;
  Verdict verdict = Verdict::holds;

  /// The primary check (first), or zeros when absent.
  const Check* primary() const { return checks.empty() ? nullptr : &checks.front(); }
  bool hypotheses_met() const;
  /// Pure function of hypotheses and checks.
  Verdict recompute() const;
  void finalize() { verdict = recompute(); }
};

struct VerifyOptions {
  SolverOptions solver;
  int trials = 100;
  std::uint64_t seed = 1;
  int spectrum_count = 4;
  int n_theta = 32;
  /// Empty selects six radii up to half the reach of the truncated end.
  std::vector<double> probe_radii;
  double slope_threshold = 0.5;
  double plateau_floor = 1e-5;
  /// Multiplier of the O(h^2) allowance in the pushdown checks.
  double pushdown_constant = 1.0;
};

TheoremReport check_lower_bound(const SubmersionCase& c, const VerifyOptions& options = {});
TheoremReport check_schrodinger_comparison(const SubmersionCase& c, const VerifyOptions& options = {});
TheoremReport check_upper_bounds(const SubmersionCase& c, const VerifyOptions& options = {});
TheoremReport check_discreteness_equivalence(const SubmersionCase& c,
                                             const VerifyOptions& options = {});
TheoremReport check_pushdown_inequalities(const SubmersionCase& c,
                                          const VerifyOptions& options = {});
TheoremReport check_lift_identities(const SubmersionCase& c, const VerifyOptions& options = {});

std::vector<double> default_probe_radii(const SubmersionCase& c);

/// Uniform doubles in [0, 1) from the top 53 bits of mt19937_64, which is
/// bit-reproducible across standard libraries.
class TrialRng {
 public:
  explicit TrialRng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 engine_;
};

/// Sum of smooth compactly supported bumps inside the unknown range of `op`.
BaseFunction random_base_function(const SLOperator& op, TrialRng& rng);

/// Bump profile in r times a random low-order trigonometric factor in theta.
TensorFunction random_tensor_function(const TensorOperator& op, TrialRng& rng);

struct PushdownTrial {
  /// min over significant cells of 1 - lhs_i / (rhs_i + allowance_i);
  /// negative means a nodewise violation beyond allowance.
  double nodewise_margin = 0.0;
  int nodewise_violations = 0;
  /// The worst cell, normalized by the largest rhs_i.
  double worst_lhs = 0.0;
  double worst_rhs = 0.0;
  double worst_allowance = 0.0;
  double rayleigh_total = 0.0;
  double rayleigh_pushdown = 0.0;
  double vertical = 0.0;
  double global_rhs = 0.0;
  double global_allowance = 0.0;
};

/// Evaluates the nodewise pushdown estimate and the global Rayleigh bound;
/// `flip_curvature` reverses the sign of the mean-curvature term.
PushdownTrial evaluate_pushdown(const SubmersionCase& c, const TensorOperator& tensor,
                                const SLOperator& base, const TensorFunction& f, double curvature,
                                double allowance_constant, bool flip_curvature = false);

}  // namespace subspec
