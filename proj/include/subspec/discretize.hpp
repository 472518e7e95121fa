#pragma once

// Conservative second-order finite differences for weighted Sturm-Liouville
// operators on a 1-D base, the separated fiber-mode family of a submersion,
// and a 2-D tensor discretization for circle fibers used as a cross-check.

#include <Eigen/SparseCore>

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "subspec/geometry.hpp"

namespace subspec {

struct Grid {
  std::vector<double> nodes;
  Grading grading = Grading::uniform;

  std::size_t cells() const { return nodes.size() - 1; }
  double cell(std::size_t i) const { return nodes[i + 1] - nodes[i]; }
  double midpoint(std::size_t i) const { return 0.5 * (nodes[i] + nodes[i + 1]); }
  double max_cell() const;
  double min_cell() const;
};

using GridPtr = std::shared_ptr<const Grid>;

/// n cells on [a, b]; tanh clustering refines both ends.
GridPtr build_grid(double a, double b, int n, Grading grading);
GridPtr build_grid(const WeightedInterval& interval, int n, Grading grading);

using ScalarField = std::function<double(double)>;

struct ModeTag {
  int index = 0;
  double nu = 0.0;
  int multiplicity = 1;
};

/// Discrete Sturm-Liouville operator A = M^{-1} E on the unknown nodes
/// [first, last] of a grid, where the quadratic form is
///
///   E(u) = sum_e kappa_e (u_{e+1} - u_e)^2 + kappa_L u_first^2
///          + kappa_R u_last^2 + sum_i mu_i q_i u_i^2.
///
/// kappa_L / kappa_R couple to eliminated Dirichlet nodes. A is self-adjoint
/// in <u, v>_mu = sum mu_i u_i v_i.
class SLOperator {
 public:
  SLOperator() = default;
  SLOperator(GridPtr grid, std::size_t first, std::size_t last, std::vector<double> mass,
             std::vector<double> edges, double left_edge, double right_edge,
             std::vector<double> potential);

  const GridPtr& grid() const { return grid_; }
  std::size_t first() const { return first_; }
  std::size_t last() const { return last_; }
  std::size_t size() const { return mass_.size(); }

  const std::vector<double>& mass() const { return mass_; }
  const std::vector<double>& edges() const { return edges_; }
  const std::vector<double>& potential() const { return potential_; }
  double left_edge() const { return left_edge_; }
  double right_edge() const { return right_edge_; }

  const std::optional<ModeTag>& mode() const { return mode_; }
  void set_mode(ModeTag tag) { mode_ = tag; }

  /// Unknown-node coordinates.
  std::vector<double> coordinates() const;

  std::vector<double> apply(std::span<const double> u) const;
  double energy(std::span<const double> u) const;
  double inner(std::span<const double> u, std::span<const double> v) const;
  double norm2(std::span<const double> u) const { return inner(u, u); }

  /// Entries of the symmetrized matrix M^{-1/2} E M^{-1/2}.
  void symmetric_tridiagonal(std::vector<double>& diag, std::vector<double>& off) const;

  /// max |<Au,v>_mu - <u,Av>_mu| / (|Au| |v|) over a few seeded vector pairs.
  double symmetry_defect(unsigned seed = 7) const;

  /// Principal sub-operator on unknowns [lo, hi] (indices into this
  /// operator); dropped neighbours become Dirichlet nodes.
  SLOperator restrict_to(std::size_t lo, std::size_t hi) const;

  /// Embeds unknown values into a full grid vector (zeros at eliminated nodes).
  std::vector<double> to_grid(std::span<const double> u) const;
  std::vector<double> from_grid(std::span<const double> f) const;

  bool identical(const SLOperator& other) const;

  /// Coordinate triplets "row col value" of the stiffness matrix E, then the
  /// mass diagonal as "row row mu" in a second block.
  void export_triplets(std::ostream& out) const;

 private:
  GridPtr grid_;
  std::size_t first_ = 0;
  std::size_t last_ = 0;
  std::vector<double> mass_;
  std::vector<double> edges_;
  double left_edge_ = 0.0;
  double right_edge_ = 0.0;
  std::vector<double> potential_;
  std::optional<ModeTag> mode_;
};

/// How an end is treated during assembly.
enum class EndTreatment { eliminate, natural, pole };

/// Low-level assembly of the weighted form with density rho and potential q.
SLOperator assemble_weighted(const GridPtr& grid, const ScalarField& density,
                             const ScalarField& potential, EndTreatment left, EndTreatment right);

/// -(w u')'/w + q on the base interval.
SLOperator assemble_base_operator(const WeightedInterval& base, const ScalarField& potential,
                                  const GridPtr& grid);

/// Weighted Laplacian with density w * phi^2 (the renormalized form S_phi
/// when phi^2 is supplied as `phi_squared`).
SLOperator assemble_renormalized(const WeightedInterval& base, const ScalarField& phi_squared,
                                 const GridPtr& grid);

/// Operator with quadratic form E'(f) = E(phi f) - lambda |phi f|^2 in the
/// measure mu phi^2; `phi` holds positive values at every grid node.
SLOperator renormalize(const SLOperator& op, std::span<const double> phi, double lambda);

/// Discrete S obtained from S_{sqrt V} by conjugating with sqrt V.
SLOperator schrodinger_form(const SLOperator& renormalized, std::span<const double> sqrt_volume);

/// S with the analytic fiber-volume potential.
SLOperator assemble_schrodinger(const SubmersionCase& c, const GridPtr& grid);

struct TotalFamily {
  std::vector<SLOperator> modes;
  std::vector<FiberMode> fiber_modes;
  /// nu_J / max psi^2 for the first excluded mode.
  double excluded_floor = 0.0;
};

/// Separated family: operator j has density w V and potential nu_j / psi^2.
TotalFamily assemble_total_family(const SubmersionCase& c, const GridPtr& grid, int mode_count);

/// Smallest J whose excluded mode clears 4 * window_top, capped at max_modes.
std::optional<int> auto_mode_cutoff(const SubmersionCase& c, const Grid& grid, double window_top,
                                    int max_modes = 512);

/// Noncompact fiber: bottom of the total spectrum over the fiber's bottom,
/// density w psi^k and potential lambda0(F) / psi^2.
SLOperator assemble_noncompact_total(const SubmersionCase& c, const GridPtr& grid);

struct TensorGrid {
  GridPtr base;
  int n_theta = 32;
  double radius = 1.0;

  double dtheta() const;
};

/// Five-point discretization of the Laplacian of dr^2 + psi^2 rho^2 dtheta^2
/// (with base density w) on unknown radial nodes x periodic angle.
class TensorOperator {
 public:
  /// `boundary` holds the diagonal part not balanced by off-diagonal
  /// entries (conductances to eliminated Dirichlet nodes).
  TensorOperator(TensorGrid tensor, std::size_t first, std::size_t last, Eigen::VectorXd mass,
                 Eigen::SparseMatrix<double> stiffness, Eigen::VectorXd boundary);

  const TensorGrid& grid() const { return tensor_; }
  std::size_t first() const { return first_; }
  std::size_t last() const { return last_; }
  std::size_t radial_size() const { return last_ - first_ + 1; }
  Eigen::Index size() const { return mass_.size(); }
  const Eigen::VectorXd& mass() const { return mass_; }
  const Eigen::SparseMatrix<double>& stiffness() const { return stiffness_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& u) const;
  double energy(const Eigen::VectorXd& u) const;
  double norm2(const Eigen::VectorXd& u) const;
  double symmetry_defect(unsigned seed = 7) const;

  Eigen::VectorXd from_grid(std::span<const double> values) const;

 private:
  TensorGrid tensor_;
  std::size_t first_ = 0;
  std::size_t last_ = 0;
  Eigen::VectorXd mass_;
  Eigen::SparseMatrix<double> stiffness_;
  Eigen::VectorXd boundary_;
};

TensorOperator assemble_total_tensor(const SubmersionCase& c, const GridPtr& base_grid,
                                     int n_theta);

/// Values on every node of a base grid.
struct BaseFunction {
  GridPtr grid;
  std::vector<double> values;
};

/// Values on every node of a tensor grid, index i * n_theta + l.
struct TensorFunction {
  TensorGrid grid;
  std::vector<double> values;

  double at(std::size_t i, int l) const { return values[i * grid.n_theta + l]; }
};

TensorFunction lift(const BaseFunction& f, const TensorGrid& tensor);
/// Fiber quadrature of f over F_x (measure psi(x) rho dtheta).
BaseFunction average(const TensorFunction& f, const SubmersionCase& c);
/// sqrt of the fiber quadrature of f^2.
BaseFunction pushdown(const TensorFunction& f, const SubmersionCase& c);

double rayleigh(const SLOperator& op, std::span<const double> unknowns);
double rayleigh(const SLOperator& op, const BaseFunction& f);
double rayleigh(const TensorOperator& op, const TensorFunction& f);

}  // namespace subspec
