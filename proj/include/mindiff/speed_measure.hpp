#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mindiff/target_law.hpp"

namespace mindiff {

struct SpeedAtom {
  double x = 0.0;
  double mass = 0.0;      // ignored when infinite
  bool infinite = false;  // absorbing endpoint
};

/// Density of m on [left, right]. rho may be unbounded at either end; knots
/// lists interior points where rho is not smooth (quadrature splits there).
struct SpeedDensity {
  double left = 0.0;
  double right = 0.0;
  std::function<double(double)> rho;
  std::vector<double> knots;
};

/// Piecewise-linear density through the given nodes.
SpeedDensity node_density(std::vector<DensityNode> nodes);

/// Nonnegative measure m on an interval with endpoints a < b (possibly infinite).
class SpeedMeasure {
 public:
  SpeedMeasure() = default;
  SpeedMeasure(double a, double b, std::vector<SpeedAtom> atoms, std::vector<SpeedDensity> pieces,
                std::string name = "");

  double left() const { return a_; }
  double right() const { return b_; }
  const std::vector<SpeedAtom>& atoms() const { return atoms_; }
  const std::vector<SpeedDensity>& pieces() const { return pieces_; }
  const std::string& name() const { return name_; }

  bool infinite_left() const;
  bool infinite_right() const;
  /// Density at x (0 outside every piece).
  double density(double x) const;
  double sigma2(double x) const { return 1.0 / density(x); }
  /// Finite atom mass at x, +inf for an infinite atom, 0 otherwise.
  double atom_mass(double x) const;
  /// Integral of g against the density part over [lo, hi].
  double integrate_density(const std::function<double(double)>& g, double lo, double hi) const;
  /// m([lo, hi]) counting atoms in the closed interval; +inf if an infinite atom is inside.
  double mass(double lo, double hi) const;
  /// Support hull of m (smallest interval holding all mass).
  double hull_left() const;
  double hull_right() const;
  /// Atom positions, piece ends and knots, sorted and unique.
  std::vector<double> breakpoints() const;

 private:
  double a_ = 0.0, b_ = 1.0;
  std::vector<SpeedAtom> atoms_;
  std::vector<SpeedDensity> pieces_;
  std::string name_;
};

struct DiffusionSpec {
  TargetLaw law;
  double x0 = 0.0;
  double lambda = 1.0;
  double kappa = 0.0;
  SpeedMeasure speed;

  double wronskian() const { return 2.0 / kappa; }
};

enum class Behaviour { Absorbing, Reflecting, StickyReflecting, Inaccessible };

std::string to_string(Behaviour b);

struct EndpointReport {
  bool entrance = false;
  Behaviour behaviour = Behaviour::Reflecting;
  bool exact_entrance = false;    // from the potential equality test
  bool numeric_entrance = false;  // from the tail-integral test on m
  double shell_ratio = 0.0;       // near/far shell mass ratio used by the numeric test
};

struct BoundaryReport {
  EndpointReport left;
  EndpointReport right;
  bool minimal = false;
  bool martingale = true;
  bool strict_local_martingale = false;
  bool exact_available = false;  // false when produced from a bare speed measure
};

/// Relative tolerance for the potential equality tests.
double equality_tolerance(const TargetLaw& law);

/// m(dx) = mu(dx) / (2 lambda den(x)), den = P(x) - P(x0) + kappa/2 below x0
/// and C(x) - C(x0) + kappa/2 above.
SpeedMeasure from_law(const TargetLaw& law, double x0, double lambda, double kappa);
DiffusionSpec make_spec(const TargetLaw& law, double x0, double lambda, double kappa);

/// u_lambda(x0, y), cross-checked against kappa - V(y).
double lambda_potential(const DiffusionSpec& spec, double y);

BoundaryReport classify(const DiffusionSpec& spec);
/// Numeric tail-integral tests only.
BoundaryReport classify_speed(const SpeedMeasure& speed, double x0);

DiffusionSpec minimalize(const TargetLaw& law, double x0, double lambda);
DiffusionSpec martingale_version(const TargetLaw& law, double lambda);

/// mu(dx) = lambda u_lambda(x0, x) m(dx), with absorbed endpoint masses from
/// hitting Laplace transforms. Implemented on top of the eigen solver.
TargetLaw to_law(const SpeedMeasure& speed, double x0, double lambda);

}  // namespace mindiff
