#pragma once

#include <optional>
#include <vector>

#include "mindiff/speed_measure.hpp"

namespace mindiff {

enum class BoundaryCondition { Auto, Absorbing, Reflecting };

struct EigenOptions {
  BoundaryCondition left = BoundaryCondition::Auto;
  BoundaryCondition right = BoundaryCondition::Auto;
  /// Truncation distance at singular finite endpoints.
  double eps = 1e-3;
  /// Truncation point of infinite endpoints (times max(1, |x0|)).
  double far_field = 1e3;
  /// Endpoints are also pulled in until the WKB growth exponent from x0 reaches this.
  double growth_cap = 300.0;
  double h_base = 1e-3;
  /// Step bound theta / sqrt(2 lambda rho).
  double theta = 0.02;
  double residual_target = 1e-8;
  double min_step = 1e-6;
  bool check_truncation = true;
  double truncation_tolerance = 1e-6;
};

/// Increasing (varphi) and decreasing (phi) lambda-eigenfunctions on a grid,
/// both normalised to 1 at x0. Derivatives are one-sided: *_dl is the left
/// derivative and *_dr the right derivative at each grid point.
struct EigenSolution {
  SpeedMeasure speed;
  double x0 = 0.0;
  double lambda = 1.0;
  std::vector<double> grid;
  std::vector<double> varphi, varphi_dl, varphi_dr;
  std::vector<double> phi, phi_dl, phi_dr;
  double wronskian = 0.0;
  double wronskian_spread = 0.0;
  double residual = 0.0;
  double truncation_sensitivity = 0.0;
  bool left_absorbing = false;
  bool right_absorbing = false;
  std::size_t x0_index = 0;

  double left() const { return grid.front(); }
  double right() const { return grid.back(); }
  double varphi_at(double x) const;
  double phi_at(double x) const;
  /// One-sided derivatives by Hermite interpolation (right derivative unless x is an atom's left side).
  double varphi_slope(double x) const;
  double phi_slope(double x) const;
};

EigenSolution solve(const SpeedMeasure& speed, double x0, double lambda, const EigenOptions& options = {});

/// E_x[exp(-lambda H_y)].
double hitting_laplace(const EigenSolution& sol, double x, double y);

struct GridFunction {
  std::vector<double> x;
  std::vector<double> f;
  /// Derivative at the anchor (right derivative at x.front(), or left derivative
  /// at x.back() when anchored at the back); fitted by least squares when absent.
  std::optional<double> slope;
  /// Integrate from x.back() instead; better conditioned for decreasing functions.
  bool anchor_back = false;
};

/// max_k |f(x_k) - f(c) - f'(c)(x_k - c) - 2 lambda int_(c, x_k] (x_k - y) f(y) m(dy)| / max|f|.
double ode_residual(const GridFunction& f, const SpeedMeasure& speed, double lambda);

/// Speed measure whose eigenfunctions are varphi + delta below x0 and phi + delta above.
SpeedMeasure shift_family(const EigenSolution& sol, double delta);

}  // namespace mindiff
