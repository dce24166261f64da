#include "mindiff/eigen.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mindiff/error.hpp"
#include "mindiff/numeric.hpp"

namespace mindiff {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

struct EndPlan {
  double x = 0.0;
  bool absorbing = false;
};

// Point where int sqrt(2 lambda rho) from x0 towards the end reaches cap, or
// the end candidate itself if the cap is never reached.
double growth_limit(const SpeedMeasure& m, double x0, double lambda, double end, double cap) {
  const int n = 4000;
  const double dir = end < x0 ? -1.0 : 1.0;
  double acc = 0.0;
  double prev = x0;
  const double span = std::abs(end - x0);
  for (int i = 1; i <= n; ++i) {
    // geometric refinement towards the end
    const double t = 1.0 - std::pow(1e-12, static_cast<double>(i) / n);
    const double x = x0 + dir * span * t;
    const double mid = 0.5 * (prev + x);
    const double rho = m.density(mid);
    if (std::isfinite(rho)) acc += std::sqrt(2.0 * lambda * rho) * std::abs(x - prev);
    if (acc >= cap) return x;
    prev = x;
  }
  return end;
}

EndPlan plan_end(const SpeedMeasure& m, const BoundaryReport& rep, double x0, double lambda,
                 const EigenOptions& opt, bool left) {
  const EndpointReport& er = left ? rep.left : rep.right;
  const double end = left ? m.left() : m.right();
  const double hull = left ? m.hull_left() : m.hull_right();
  const bool inf_atom = left ? m.infinite_left() : m.infinite_right();
  const double dir = left ? 1.0 : -1.0;  // inward
  EndPlan p;
  if (inf_atom) {
    p.x = end;
    p.absorbing = true;
  } else if (std::isfinite(end)) {
    if (er.numeric_entrance) {
      p.x = end;
      p.absorbing = false;
    } else {
      const double cand = end + dir * opt.eps;
      p.x = left ? std::max(hull, cand) : std::min(hull, cand);
      p.absorbing = true;
    }
  } else {
    const double far = -dir * opt.far_field * std::max(1.0, std::abs(x0));
    p.x = std::isfinite(hull) ? hull : (left ? std::min(far, x0 - 1.0) : std::max(far, x0 + 1.0));
    p.absorbing = !er.numeric_entrance;
  }
  if (!inf_atom) {
    const double g = growth_limit(m, x0, lambda, p.x, opt.growth_cap);
    p.x = left ? std::max(p.x, g) : std::min(p.x, g);
  }
  const BoundaryCondition bc = left ? opt.left : opt.right;
  if (bc == BoundaryCondition::Absorbing) p.absorbing = true;
  if (bc == BoundaryCondition::Reflecting) p.absorbing = false;
  if (!(left ? p.x < x0 : p.x > x0)) throw NumericalError("truncated interval does not contain x0");
  return p;
}

// Hard breaks: atoms and density-piece ends (where f' or f'' may jump).
std::vector<double> hard_breaks(const SpeedMeasure& m) {
  std::vector<double> out;
  for (const SpeedAtom& a : m.atoms()) out.push_back(a.x);
  for (const SpeedDensity& p : m.pieces()) {
    out.push_back(p.left);
    out.push_back(p.right);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Density inside the cell [lo, hi], evaluated away from the cell ends so that
// piece selection and endpoint singularities are handled.
double cell_density(const SpeedMeasure& m, double x, double lo, double hi) {
  const double tiny = 1e-12 * (hi - lo);
  const double v = m.density(std::clamp(x, lo + tiny, hi - tiny));
  return std::isfinite(v) ? v : 0.0;
}

std::vector<double> build_grid(const SpeedMeasure& m, double lo, double hi, double x0, double lambda,
                               double h_base, double theta) {
  std::vector<double> stops{lo, hi, x0};
  for (double b : m.breakpoints())
    if (b > lo && b < hi) stops.push_back(b);
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
  std::vector<double> grid{stops.front()};
  for (std::size_t i = 0; i + 1 < stops.size(); ++i) {
    const double p = stops[i], q = stops[i + 1];
    double x = p;
    while (x < q) {
      double h = h_base * std::max(1.0, std::abs(x));
      for (int it = 0; it < 4; ++it) {
        const double r = std::max(cell_density(m, x, p, q), cell_density(m, std::min(x + h, q), p, q));
        if (r > 0.0) h = std::min(h, theta / std::sqrt(2.0 * lambda * r));
      }
      if (x + 1.25 * h >= q) {
        x = q;
      } else {
        x += h;
      }
      grid.push_back(x);
    }
  }
  return grid;
}

struct March {
  std::vector<double> f, dl, dr;
};

// RK4 march of f'' = 2 lambda rho f across the grid with atom kinks.
March march(const SpeedMeasure& m, const std::vector<double>& grid, double lambda, bool forward, bool absorbing) {
  const std::size_t n = grid.size();
  March out;
  out.f.assign(n, 0.0);
  out.dl.assign(n, 0.0);
  out.dr.assign(n, 0.0);
  const double c = 2.0 * lambda;
  auto atom = [&](std::size_t k) {
    const double a = m.atom_mass(grid[k]);
    return std::isfinite(a) ? a : 0.0;
  };
  auto rescale = [&](double& f, double& g, std::size_t upto_from, std::size_t upto_to) {
    const double s = 0x1.0p-600;
    f *= s;
    g *= s;
    for (std::size_t j = upto_from; j <= upto_to; ++j) {
      out.f[j] *= s;
      out.dl[j] *= s;
      out.dr[j] *= s;
    }
  };
  if (forward) {
    double f = absorbing ? 0.0 : 1.0;
    double g = absorbing ? 1.0 : 0.0;  // left derivative at the start
    out.f[0] = f;
    out.dl[0] = g;
    g += c * f * atom(0);
    out.dr[0] = g;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const double lo = grid[k], hi = grid[k + 1], h = hi - lo;
      const double r0 = c * cell_density(m, lo, lo, hi);
      const double rm = c * cell_density(m, lo + 0.5 * h, lo, hi);
      const double r1 = c * cell_density(m, hi, lo, hi);
      const double k1f = g, k1g = r0 * f;
      const double k2f = g + 0.5 * h * k1g, k2g = rm * (f + 0.5 * h * k1f);
      const double k3f = g + 0.5 * h * k2g, k3g = rm * (f + 0.5 * h * k2f);
      const double k4f = g + h * k3g, k4g = r1 * (f + h * k3f);
      f += h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
      g += h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
      out.f[k + 1] = f;
      out.dl[k + 1] = g;
      g += c * f * atom(k + 1);
      out.dr[k + 1] = g;
      if (std::abs(f) > 0x1.0p600 || std::abs(g) > 0x1.0p600) rescale(f, g, 0, k + 1);
    }
  } else {
    double f = absorbing ? 0.0 : 1.0;
    double g = absorbing ? -1.0 : 0.0;  // right derivative at the start
    out.f[n - 1] = f;
    out.dr[n - 1] = g;
    g -= c * f * atom(n - 1);
    out.dl[n - 1] = g;
    for (std::size_t k = n - 1; k > 0; --k) {
      const double lo = grid[k - 1], hi = grid[k], h = lo - hi;  // negative step
      const double r0 = c * cell_density(m, hi, lo, hi);
      const double rm = c * cell_density(m, hi + 0.5 * h, lo, hi);
      const double r1 = c * cell_density(m, lo, lo, hi);
      const double k1f = g, k1g = r0 * f;
      const double k2f = g + 0.5 * h * k1g, k2g = rm * (f + 0.5 * h * k1f);
      const double k3f = g + 0.5 * h * k2g, k3g = rm * (f + 0.5 * h * k2f);
      const double k4f = g + h * k3g, k4g = r1 * (f + h * k3f);
      f += h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
      g += h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
      out.f[k - 1] = f;
      out.dr[k - 1] = g;
      g -= c * f * atom(k - 1);
      out.dl[k - 1] = g;
      if (std::abs(f) > 0x1.0p600 || std::abs(g) > 0x1.0p600) rescale(f, g, k - 1, n - 1);
    }
  }
  return out;
}

double hermite(const std::vector<double>& grid, const std::vector<double>& f, const std::vector<double>& dr,
               const std::vector<double>& dl, double x, double* slope) {
  if (!(x >= grid.front() && x <= grid.back()))
    throw DomainError("x=" + fmt(x) + " outside the eigen grid [" + fmt(grid.front()) + ", " + fmt(grid.back()) + "]");
  auto it = std::upper_bound(grid.begin(), grid.end(), x);
  std::size_t k = it == grid.begin() ? 0 : static_cast<std::size_t>(it - grid.begin()) - 1;
  if (k + 1 >= grid.size()) k = grid.size() - 2;
  const double h = grid[k + 1] - grid[k];
  const double t = (x - grid[k]) / h;
  const double m0 = dr[k] * h, m1 = dl[k + 1] * h;
  const double t2 = t * t, t3 = t2 * t;
  if (slope) {
    *slope = ((6 * t2 - 6 * t) * f[k] + (3 * t2 - 4 * t + 1) * m0 + (-6 * t2 + 6 * t) * f[k + 1] + (3 * t2 - 2 * t) * m1) / h;
  }
  return (2 * t3 - 3 * t2 + 1) * f[k] + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * f[k + 1] + (t3 - t2) * m1;
}

// Integrated-form residual, anchored at the front (forward) or back of the grid.
double residual_impl(const std::vector<double>& x, const std::vector<double>& f, std::optional<double> slope,
                     const SpeedMeasure& m, double lambda, bool forward) {
  const std::size_t n = x.size();
  if (n < 2 || f.size() != n) throw DomainError("grid function needs at least two matching samples");
  const std::vector<double> hb = hard_breaks(m);
  auto is_break = [&](double v) { return std::binary_search(hb.begin(), hb.end(), v); };
  // Smooth runs are delimited by grid points that are hard breaks; a cell's
  // interpolation stencil never leaves its run.
  std::vector<std::size_t> cuts{0};
  for (std::size_t k = 1; k + 1 < n; ++k)
    if (is_break(x[k])) cuts.push_back(k);
  cuts.push_back(n - 1);
  std::vector<std::size_t> cell_lo(n), cell_hi(n);
  for (std::size_t j = 0; j + 1 < cuts.size(); ++j)
    for (std::size_t k = cuts[j]; k < cuts[j + 1]; ++k) {
      cell_lo[k] = cuts[j];
      cell_hi[k] = cuts[j + 1];
    }
  auto atom = [&](std::size_t k) {
    const double a = m.atom_mass(x[k]);
    return std::isfinite(a) ? a : 0.0;
  };
  // Cubic (or lower) Lagrange interpolant of f on cell k.
  auto interp = [&](std::size_t k, double y) {
    const std::size_t lo = cell_lo[k], hi = cell_hi[k];
    const std::size_t top = hi >= lo + 3 ? hi - 3 : lo;
    const std::size_t a = std::clamp(k > 0 ? k - 1 : 0, lo, top);
    const std::size_t b = std::min(a + 3, hi);
    double s = 0.0;
    for (std::size_t i = a; i <= b; ++i) {
      double w = f[i];
      for (std::size_t j = a; j <= b; ++j)
        if (j != i) w *= (y - x[j]) / (x[i] - x[j]);
      s += w;
    }
    return s;
  };
  const double c2 = 2.0 * lambda;
  std::vector<double> b(n, 0.0), d(n, 0.0);
  using GL = boost::math::quadrature::gauss<double, 10>;
  if (forward) {
    double I = 0.0, J = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const double lo = x[k], hi = x[k + 1];
      const double cell0 = GL::integrate([&](double y) { return interp(k, y) * cell_density(m, y, lo, hi); }, lo, hi);
      const double cell1 =
          GL::integrate([&](double y) { return (hi - y) * interp(k, y) * cell_density(m, y, lo, hi); }, lo, hi);
      I += (hi - lo) * J + cell1;
      J += cell0 + atom(k + 1) * f[k + 1];
      b[k + 1] = f[k + 1] - f[0] - c2 * I;
      d[k + 1] = x[k + 1] - x[0];
    }
  } else {
    double I = 0.0, J = 0.0;
    for (std::size_t k = n - 1; k > 0; --k) {
      const double lo = x[k - 1], hi = x[k];
      const std::size_t cell = k - 1;
      const double cell0 = GL::integrate([&](double y) { return interp(cell, y) * cell_density(m, y, lo, hi); }, lo, hi);
      const double cell1 =
          GL::integrate([&](double y) { return (y - lo) * interp(cell, y) * cell_density(m, y, lo, hi); }, lo, hi);
      I += (hi - lo) * J + cell1;
      J += cell0 + atom(k - 1) * f[k - 1];
      b[k - 1] = f[k - 1] - f[n - 1] - c2 * I;
      d[k - 1] = x[k - 1] - x[n - 1];
    }
  }
  double s;
  if (slope) {
    s = *slope;
  } else {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      num += b[k] * d[k];
      den += d[k] * d[k];
    }
    s = den > 0.0 ? num / den : 0.0;
  }
  double worst = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    worst = std::max(worst, std::abs(b[k] - s * d[k]));
    scale = std::max(scale, std::abs(f[k]));
  }
  return scale > 0.0 ? worst / scale : worst;
}

EigenSolution solve_once(const SpeedMeasure& speed, double x0, double lambda, const EigenOptions& opt,
                         const BoundaryReport& rep) {
  const EndPlan L = plan_end(speed, rep, x0, lambda, opt, true);
  const EndPlan R = plan_end(speed, rep, x0, lambda, opt, false);
  double h = opt.h_base, theta = opt.theta;
  std::vector<double> profile;
  while (true) {
    EigenSolution sol;
    sol.speed = speed;
    sol.x0 = x0;
    sol.lambda = lambda;
    sol.left_absorbing = L.absorbing;
    sol.right_absorbing = R.absorbing;
    sol.grid = build_grid(speed, L.x, R.x, x0, lambda, h, theta);
    const March up = march(speed, sol.grid, lambda, true, L.absorbing);
    const March down = march(speed, sol.grid, lambda, false, R.absorbing);
    sol.x0_index = static_cast<std::size_t>(std::lower_bound(sol.grid.begin(), sol.grid.end(), x0) - sol.grid.begin());
    const double nu = up.f[sol.x0_index], nd = down.f[sol.x0_index];
    if (!(nu > 0.0) || !(nd > 0.0) || !std::isfinite(nu) || !std::isfinite(nd))
      throw NumericalError("eigenfunction vanished or overflowed at x0");
    sol.varphi = up.f;
    sol.varphi_dl = up.dl;
    sol.varphi_dr = up.dr;
    sol.phi = down.f;
    sol.phi_dl = down.dl;
    sol.phi_dr = down.dr;
    for (std::size_t k = 0; k < sol.grid.size(); ++k) {
      sol.varphi[k] /= nu;
      sol.varphi_dl[k] /= nu;
      sol.varphi_dr[k] /= nu;
      sol.phi[k] /= nd;
      sol.phi_dl[k] /= nd;
      sol.phi_dr[k] /= nd;
    }
    const std::size_t i0 = sol.x0_index;
    sol.wronskian = sol.varphi_dr[i0] * sol.phi[i0] - sol.varphi[i0] * sol.phi_dr[i0];
    if (!(sol.wronskian > 0.0)) throw NumericalError("non-positive Wronskian " + fmt(sol.wronskian));
    double spread = 0.0;
    for (std::size_t k = 0; k < sol.grid.size(); ++k) {
      const double u = sol.varphi[k], v = sol.phi[k];
      if (!(u > 1e-250 && v > 1e-250 && u < 1e250 && v < 1e250)) continue;
      const double w = sol.varphi_dr[k] * v - u * sol.phi_dr[k];
      spread = std::max(spread, std::abs(w - sol.wronskian) / sol.wronskian);
    }
    sol.wronskian_spread = spread;
    for (std::size_t k = 0; k + 1 < sol.grid.size(); ++k) {
      if (sol.varphi[k + 1] < sol.varphi[k] * (1.0 - 1e-12) || sol.phi[k + 1] > sol.phi[k] * (1.0 + 1e-12))
        throw NumericalError("eigenfunction lost monotonicity at x=" + fmt(sol.grid[k]));
    }
    const double r1 = residual_impl(sol.grid, sol.varphi, sol.varphi_dr.front(), speed, lambda, true);
    const double r2 = residual_impl(sol.grid, sol.phi, sol.phi_dl.back(), speed, lambda, false);
    sol.residual = std::max(r1, r2);
    profile.push_back(sol.residual);
    if (sol.residual < opt.residual_target) return sol;
    h *= 0.5;
    theta *= 0.5;
    if (h < opt.min_step)
      throw NumericalError("eigen solver did not reach residual " + fmt(opt.residual_target) + " (last " +
                               fmt(sol.residual) + ")",
                           profile);
  }
}

}  // namespace

double EigenSolution::varphi_at(double x) const { return hermite(grid, varphi, varphi_dr, varphi_dl, x, nullptr); }
double EigenSolution::phi_at(double x) const { return hermite(grid, phi, phi_dr, phi_dl, x, nullptr); }

double EigenSolution::varphi_slope(double x) const {
  double s = 0.0;
  hermite(grid, varphi, varphi_dr, varphi_dl, x, &s);
  return s;
}

double EigenSolution::phi_slope(double x) const {
  double s = 0.0;
  hermite(grid, phi, phi_dr, phi_dl, x, &s);
  return s;
}

EigenSolution solve(const SpeedMeasure& speed, double x0, double lambda, const EigenOptions& options) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be positive");
  if (!(x0 > speed.left() && x0 < speed.right())) throw DomainError("x0 must lie inside the speed interval");
  const BoundaryReport rep = classify_speed(speed, x0);
  EigenSolution sol = solve_once(speed, x0, lambda, options, rep);
  const bool truncated = !(sol.left() == speed.left() && sol.right() == speed.right());
  if (options.check_truncation && truncated) {
    EigenOptions alt = options;
    alt.eps *= 0.5;
    alt.far_field *= 2.0;
    alt.growth_cap *= 2.0;
    alt.check_truncation = false;
    const EigenSolution other = solve_once(speed, x0, lambda, alt, rep);
    double worst = std::abs(other.wronskian - sol.wronskian) / sol.wronskian;
    // interior: ten truncation distances away from a cut finite end, a tenth of the way out to a cut infinite end
    double lo = sol.left(), hi = sol.right();
    if (sol.left() != speed.left())
      lo = std::isfinite(speed.left()) ? speed.left() + 10.0 * (sol.left() - speed.left()) : x0 - (x0 - sol.left()) / 10.0;
    if (sol.right() != speed.right())
      hi = std::isfinite(speed.right()) ? speed.right() - 10.0 * (speed.right() - sol.right()) : x0 + (sol.right() - x0) / 10.0;
    for (std::size_t k = 0; k < sol.grid.size(); ++k) {
      const double x = sol.grid[k];
      const double u = sol.varphi[k], v = sol.phi[k];
      if (!(u < 1e4 && v < 1e4)) continue;
      if (x < lo || x > hi || x < other.left() || x > other.right()) continue;
      // measured against the normalisation scale f(x0) = 1
      worst = std::max(worst, std::abs(other.varphi_at(x) - u) / std::max(1.0, u));
      worst = std::max(worst, std::abs(other.phi_at(x) - v) / std::max(1.0, v));
    }
    sol.truncation_sensitivity = worst;
    if (worst > options.truncation_tolerance)
      throw NumericalError("eigenfunctions sensitive to truncation: " + fmt(worst), {worst});
  }
  return sol;
}

double hitting_laplace(const EigenSolution& sol, double x, double y) {
  if (x <= y) return sol.varphi_at(x) / sol.varphi_at(y);
  return sol.phi_at(x) / sol.phi_at(y);
}

double ode_residual(const GridFunction& f, const SpeedMeasure& speed, double lambda) {
  return residual_impl(f.x, f.f, f.slope, speed, lambda, !f.anchor_back);
}

SpeedMeasure shift_family(const EigenSolution& sol, double delta) {
  const double fl = sol.varphi.front(), fr = sol.phi.back();
  const double lo_val = std::min(fl, fr);
  const double snap = 1e-7 * std::max(1.0, std::abs(delta));
  if (delta < -lo_val - snap)
    throw PreconditionError("shift " + fmt(delta) + " makes an eigenfunction negative (min endpoint value " +
                            fmt(lo_val) + ")");
  // A shift that cancels an endpoint value is taken as exact, so f + delta is
  // formed as a difference of grid values and keeps its relative accuracy.
  const bool snap_left = std::abs(delta + fl) <= snap;
  const bool snap_right = std::abs(delta + fr) <= snap;
  auto shifted_ratio = [sol, delta, snap_left, snap_right](double x) {
    double f, g;
    if (x <= sol.x0) {
      f = sol.varphi_at(x);
      g = snap_left ? f - sol.varphi.front() : f + delta;
    } else {
      f = sol.phi_at(x);
      g = snap_right ? f - sol.phi.back() : f + delta;
    }
    if (!(g > 0.0)) return kInf;
    return f / g;
  };
  const double lo = sol.left(), hi = sol.right();
  std::vector<SpeedDensity> pieces;
  for (const SpeedDensity& p : sol.speed.pieces()) {
    const double l = std::max(lo, p.left), r = std::min(hi, p.right);
    if (!(r > l)) continue;
    SpeedDensity q;
    q.left = l;
    q.right = r;
    for (double k : p.knots)
      if (k > l && k < r) q.knots.push_back(k);
    if (sol.x0 > l && sol.x0 < r) q.knots.push_back(sol.x0);
    std::sort(q.knots.begin(), q.knots.end());
    auto rho = p.rho;
    q.rho = [rho, shifted_ratio](double x) {
      const double base = rho(x);
      if (base == 0.0) return 0.0;
      return base * shifted_ratio(x);
    };
    pieces.push_back(std::move(q));
  }
  std::vector<SpeedAtom> atoms;
  const double c = 2.0 * sol.lambda;
  for (const SpeedAtom& a : sol.speed.atoms()) {
    if (a.x < lo || a.x > hi) continue;
    if (a.infinite) continue;
    atoms.push_back(SpeedAtom{a.x, a.mass * shifted_ratio(a.x), false});
  }
  // Absorbing ends turn into sticky atoms carrying the slope of the eigenfunction.
  auto end_atom = [&](double x, bool absorbing, bool was_infinite, double slope) {
    if (!absorbing) return;
    for (SpeedAtom& a : atoms)
      if (a.x == x) return;
    if (delta == 0.0) {
      if (was_infinite) atoms.push_back(SpeedAtom{x, 0.0, true});
      return;
    }
    atoms.push_back(SpeedAtom{x, std::abs(slope) / (c * delta), false});
  };
  end_atom(lo, sol.left_absorbing, sol.speed.infinite_left() && lo == sol.speed.left(), sol.varphi_dr.front());
  end_atom(hi, sol.right_absorbing, sol.speed.infinite_right() && hi == sol.speed.right(), sol.phi_dl.back());
  return SpeedMeasure(lo, hi, std::move(atoms), std::move(pieces), sol.speed.name());
}

TargetLaw to_law(const SpeedMeasure& speed, double x0, double lambda) {
  const EigenSolution sol = solve(speed, x0, lambda);
  const double scale = lambda * 2.0 / sol.wronskian;
  auto u = [&](std::size_t k) { return k <= sol.x0_index ? sol.varphi[k] : sol.phi[k]; };
  const auto& grid = sol.grid;
  std::vector<Atom> atoms;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double a = speed.atom_mass(grid[k]);
    if (a > 0.0 && std::isfinite(a)) atoms.push_back({grid[k], scale * u(k) * a});
  }
  // Absorbed mass at the ends: E_x0[exp(-lambda H_end)].
  if (sol.left_absorbing) {
    const double p = 1.0 / sol.phi.front();
    if (p > 0.0) {
      bool merged = false;
      for (Atom& a : atoms)
        if (a.x == grid.front()) a.mass += p, merged = true;
      if (!merged) atoms.push_back({grid.front(), p});
    }
  }
  if (sol.right_absorbing) {
    const double p = 1.0 / sol.varphi.back();
    if (p > 0.0) {
      bool merged = false;
      for (Atom& a : atoms)
        if (a.x == grid.back()) a.mass += p, merged = true;
      if (!merged) atoms.push_back({grid.back(), p});
    }
  }
  std::vector<DensityPiece> pieces;
  for (const SpeedDensity& p : speed.pieces()) {
    DensityPiece piece;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double x = grid[k];
      if (x < p.left || x > p.right) continue;
      const double lo = k > 0 ? std::max(grid[k - 1], p.left) : x;
      const double hi = k + 1 < grid.size() ? std::min(grid[k + 1], p.right) : x;
      // one-sided limit from inside the piece
      double r;
      if (x == p.right && lo < x)
        r = p.rho(x - 1e-12 * (x - lo));
      else if (x == p.left && hi > x)
        r = p.rho(x + 1e-12 * (hi - x));
      else
        r = p.rho(x);
      if (!std::isfinite(r)) r = 0.0;
      piece.nodes.push_back({x, scale * u(k) * r});
    }
    if (piece.nodes.size() >= 2) pieces.push_back(std::move(piece));
  }
  std::vector<Atom> filtered;
  for (const Atom& a : atoms)
    if (a.mass > 1e-300) filtered.push_back(a);
  double total = 0.0;
  for (const Atom& a : filtered) total += a.mass;
  for (const DensityPiece& p : pieces)
    for (std::size_t j = 0; j + 1 < p.nodes.size(); ++j)
      total += 0.5 * (p.nodes[j].f + p.nodes[j + 1].f) * (p.nodes[j + 1].x - p.nodes[j].x);
  if (std::abs(total - 1.0) > 1e-3)
    throw NumericalError("recovered law has mass " + fmt(total), {total, sol.residual});
  TargetLaw::Options opt;
  opt.discretized = true;
  opt.mass_tolerance = 1e-3;
  opt.name = speed.name();
  const double a = std::isfinite(speed.left()) ? speed.left() : std::min(speed.left(), grid.front());
  const double b = std::isfinite(speed.right()) ? speed.right() : std::max(speed.right(), grid.back());
  return TargetLaw(a, b, std::move(filtered), std::move(pieces), opt);
}

}  // namespace mindiff
