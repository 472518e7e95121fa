#pragma once

// Submersion case descriptions: warping profiles, fibers, base intervals,
// and the closed forms (mean curvature, fiber-volume potential, model-space
// bottoms of spectrum) that depend only on them.

#include <optional>
#include <string>
#include <vector>

#include "subspec/error.hpp"

namespace subspec {

enum class WarpFamily { constant, exponential, gaussian, cosh, sinh, tabulated };

std::string_view to_string(WarpFamily family);

/// Positive profile psi(r) with first and second derivatives.
///
/// Analytic families are parametrized as c*exp(a r), c*exp(a r^2),
/// c*cosh(a r), c*sinh(a r). The tabulated family stores samples on a node
/// set; derivatives at nodes come from second-order differences (centered in
/// the interior, one-sided at the ends) and off-node values are linearly
/// interpolated.
class WarpFunction {
 public:
  static WarpFunction constant(double c);
  static WarpFunction exponential(double c, double a);
  static WarpFunction gaussian(double c, double a);
  static WarpFunction cosh(double c, double a);
  static WarpFunction sinh(double c, double a);
  static WarpFunction tabulated(std::vector<double> nodes, std::vector<double> samples);

  WarpFamily family() const { return family_; }
  double a() const { return a_; }
  double c() const { return c_; }

  double value(double r) const;
  double d1(double r) const;
  double d2(double r) const;
  /// psi'/psi.
  double log_derivative(double r) const;
  /// (psi'/psi)'.
  double log_derivative_d1(double r) const;

  /// True where psi itself vanishes (sinh family at r = 0).
  bool vanishes_at(double r) const;

  WarpFunction scaled(double factor) const;

  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& samples() const { return samples_; }

 private:
  WarpFunction(WarpFamily family, double c, double a) : family_(family), c_(c), a_(a) {}

  std::size_t locate(double r) const;
  double interpolate(const std::vector<double>& values, double r) const;

  WarpFamily family_;
  double c_ = 1.0;
  double a_ = 0.0;
  std::vector<double> nodes_;
  std::vector<double> samples_;
  std::vector<double> node_d1_;
  std::vector<double> node_d2_;
};

enum class FiberKind { circle, sphere, flat_torus, explicit_list, noncompact };

std::string_view to_string(FiberKind kind);

/// One distinct fiber eigenvalue with its multiplicity; index 0 is the
/// constant mode of a closed fiber.
struct FiberMode {
  int index = 0;
  double nu = 0.0;
  int multiplicity = 1;
};

class FiberSpec {
 public:
  static FiberSpec circle(double radius);
  static FiberSpec sphere(int dim, double radius = 1.0);
  static FiberSpec flat_torus(std::vector<double> lengths);
  /// `eigenvalues` listed with repetition, nondecreasing, starting at 0.
  static FiberSpec explicit_spectrum(int dim, double volume, std::vector<double> eigenvalues);
  static FiberSpec noncompact(double lambda0, int dim);

  FiberKind kind() const { return kind_; }
  int dim() const { return dim_; }
  bool closed() const { return kind_ != FiberKind::noncompact; }
  double radius() const { return radius_; }
  const std::vector<double>& lengths() const { return lengths_; }
  const std::vector<double>& listed_eigenvalues() const { return listed_; }

  /// Throws for noncompact fibers.
  double volume() const;
  double lambda0() const;

  /// Distinct eigenvalues not exceeding nu_max, ascending.
  std::vector<FiberMode> modes_up_to(double nu_max) const;
  /// The first `count` distinct eigenvalues (fewer for finite explicit lists).
  std::vector<FiberMode> first_modes(int count) const;

 private:
  FiberSpec() = default;

  FiberKind kind_ = FiberKind::circle;
  int dim_ = 1;
  double radius_ = 1.0;
  double volume_ = 0.0;
  double lambda0_ = 0.0;
  std::vector<double> lengths_;
  std::vector<double> listed_;
};

enum class EndCondition { dirichlet, neumann, pole_regular };

std::string_view to_string(EndCondition condition);

struct IntervalEnd {
  double position = 0.0;
  EndCondition condition = EndCondition::dirichlet;
  /// The end stands for an infinite end cut off at the truncation radius.
  bool truncated = false;
};

/// Base interval with density w(r) = profile(r)^power.
///
/// Radial surrogates of model spaces use profile sinh(a r) and power m - 1.
/// A pole-regular end must sit where w vanishes, and only there.
struct WeightedInterval {
  IntervalEnd left;
  IntervalEnd right;
  WarpFunction profile = WarpFunction::constant(1.0);
  double power = 0.0;

  double weight(double r) const;
  /// w'/w; at a pole this is singular and callers must use limits.
  double log_weight_derivative(double r) const;
  bool is_pole(double r) const;
  double length() const { return right.position - left.position; }
  void validate() const;

  static WeightedInterval uniform(double a, double b, EndCondition left = EndCondition::dirichlet,
                                  EndCondition right = EndCondition::dirichlet);
  /// Radial part of hyperbolic m-space on (0, R): w = sinh(r)^(m-1).
  static WeightedInterval hyperbolic(int m, double radius);
};

enum class SubmersionKind { product, warped };
enum class Grading { uniform, tanh_clustered };

std::string_view to_string(SubmersionKind kind);
std::string_view to_string(Grading grading);

struct Tolerances {
  double solver = 1e-9;
  double budget_floor = 1e-10;
};

/// One submersion M2 -> M1 over a 1-D base plus its discretization policy.
struct SubmersionCase {
  std::string id;
  SubmersionKind kind = SubmersionKind::warped;
  WeightedInterval base;
  WarpFunction warp = WarpFunction::constant(1.0);
  FiberSpec fiber = FiberSpec::circle(1.0);
  /// Radius at which truncated ends are placed; 0 when no end is truncated.
  double truncation = 0.0;
  int resolution = 400;
  Grading grading = Grading::uniform;
  /// 0 selects the automatic cutoff rule.
  int mode_cutoff = 0;
  Tolerances tolerances;
  /// Replaces the computed mean-curvature bound (used to build synthetic
  /// violations).
  std::optional<double> curvature_override;

  void validate() const;
  bool truncated() const { return base.left.truncated || base.right.truncated; }

  /// V(r) = vol(F) * psi(r)^k.
  double fiber_volume(double r) const;
  /// Volume density of the total space per unit base length: w(r) V(r).
  double total_density(double r) const;

  SubmersionCase with_truncation(double radius) const;
  SubmersionCase with_resolution(int n) const;
};

struct CurvatureBound {
  double value = 0.0;
  bool bounded = true;
};

/// k * sup |psi'/psi| over the case domain (infinite where truncated ends are
/// really unbounded and the log-derivative grows).
CurvatureBound mean_curvature_bound(const SubmersionCase& c);

/// Potential of S = Delta - Delta(sqrt V)/sqrt V on the weighted base.
class SchrodingerPotential {
 public:
  explicit SchrodingerPotential(const SubmersionCase& c);

  /// -(Delta phi)/phi with phi = psi^(k/2) and Delta = -(w phi')'/w.
  double operator()(double r) const;
  /// 1/4 |X|^2 - 1/2 div X with X = -k psi'/psi.
  double vector_field_form(double r) const;
  /// X(r).
  double vector_field(double r) const;

 private:
  WarpFunction warp_;
  WeightedInterval base_;
  int k_;
};

SchrodingerPotential schrodinger_potential(const SubmersionCase& c);

struct FiberProfile {
  std::vector<double> nodes;
  std::vector<double> values;
  double infimum = 0.0;
  /// Max minus min of the profile; zero means flat.
  double spread = 0.0;
};

/// x -> lambda0(F_x) sampled on `nodes`.
FiberProfile fiber_lambda0_profile(const SubmersionCase& c, const std::vector<double>& nodes);

enum class ModelKind { hyperbolic, kh, quotient, mckean };

struct ModelSpace {
  ModelKind kind = ModelKind::hyperbolic;
  int m = 2;
  int d = 1;
  double mu_gamma = 0.0;
  double a = 1.0;
};

struct ModelValue {
  double value = 0.0;
  /// McKean gives only a lower bound.
  bool lower_bound = false;
};

ModelValue model_lambda0(const ModelSpace& model);

}  // namespace subspec
