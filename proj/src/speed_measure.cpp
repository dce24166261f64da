#include "mindiff/speed_measure.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "mindiff/error.hpp"

namespace mindiff {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

double interpolate(const std::vector<DensityNode>& nodes, double x) {
  if (x <= nodes.front().x) return nodes.front().f;
  if (x >= nodes.back().x) return nodes.back().f;
  auto it = std::upper_bound(nodes.begin(), nodes.end(), x,
                             [](double v, const DensityNode& n) { return v < n.x; });
  const DensityNode& n0 = *(it - 1);
  const DensityNode& n1 = *it;
  return n0.f + (n1.f - n0.f) * (x - n0.x) / (n1.x - n0.x);
}

double integrate_smooth(const std::function<double(double)>& f, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, lo, hi, 8, 1e-13);
}

}  // namespace

std::string to_string(Behaviour b) {
  switch (b) {
    case Behaviour::Absorbing: return "absorbing";
    case Behaviour::Reflecting: return "reflecting";
    case Behaviour::StickyReflecting: return "sticky-reflecting";
    case Behaviour::Inaccessible: return "inaccessible";
  }
  return "unknown";
}

SpeedDensity node_density(std::vector<DensityNode> nodes) {
  if (nodes.size() < 2) throw InputError("density piece needs at least two nodes");
  SpeedDensity d;
  d.left = nodes.front().x;
  d.right = nodes.back().x;
  for (std::size_t i = 1; i + 1 < nodes.size(); ++i) d.knots.push_back(nodes[i].x);
  auto shared = std::make_shared<const std::vector<DensityNode>>(std::move(nodes));
  d.rho = [shared](double x) { return interpolate(*shared, x); };
  return d;
}

SpeedMeasure::SpeedMeasure(double a, double b, std::vector<SpeedAtom> atoms, std::vector<SpeedDensity> pieces,
                           std::string name)
    : a_(a), b_(b), atoms_(std::move(atoms)), pieces_(std::move(pieces)), name_(std::move(name)) {
  if (!(a < b)) throw InputError("speed measure interval must satisfy a < b");
  std::sort(atoms_.begin(), atoms_.end(), [](const SpeedAtom& p, const SpeedAtom& q) { return p.x < q.x; });
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    const SpeedAtom& at = atoms_[i];
    if (!std::isfinite(at.x) || at.x < a || at.x > b) throw InputError("speed atom at " + fmt(at.x) + " outside the interval");
    if (i > 0 && atoms_[i - 1].x == at.x) throw InputError("duplicate speed atom at " + fmt(at.x));
    if (at.infinite) {
      if (at.x != a && at.x != b) throw InputError("infinite atoms are only allowed at the endpoints");
    } else if (!(at.mass > 0.0) || !std::isfinite(at.mass)) {
      throw InputError("speed atom mass must be positive");
    }
  }
  std::sort(pieces_.begin(), pieces_.end(), [](const SpeedDensity& p, const SpeedDensity& q) { return p.left < q.left; });
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const SpeedDensity& p = pieces_[i];
    if (!(p.left < p.right) || p.left < a || p.right > b) throw InputError("speed density piece outside the interval");
    if (!p.rho) throw InputError("speed density piece without a density");
    if (i > 0 && p.left < pieces_[i - 1].right) throw InputError("speed density pieces overlap");
    std::sort(pieces_[i].knots.begin(), pieces_[i].knots.end());
  }
  if (atoms_.empty() && pieces_.empty()) throw InputError("speed measure must be non-zero");
}

bool SpeedMeasure::infinite_left() const { return !atoms_.empty() && atoms_.front().infinite && atoms_.front().x == a_; }
bool SpeedMeasure::infinite_right() const { return !atoms_.empty() && atoms_.back().infinite && atoms_.back().x == b_; }

double SpeedMeasure::density(double x) const {
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const SpeedDensity& p = pieces_[i];
    if (x >= p.left && x < p.right) return p.rho(x);
    if (x == p.right && (i + 1 == pieces_.size() || pieces_[i + 1].left > x)) return p.rho(x);
  }
  return 0.0;
}

double SpeedMeasure::atom_mass(double x) const {
  auto it = std::lower_bound(atoms_.begin(), atoms_.end(), x, [](const SpeedAtom& a, double v) { return a.x < v; });
  if (it == atoms_.end() || it->x != x) return 0.0;
  return it->infinite ? kInf : it->mass;
}

double SpeedMeasure::integrate_density(const std::function<double(double)>& g, double lo, double hi) const {
  double total = 0.0;
  for (const SpeedDensity& p : pieces_) {
    const double l = std::max(lo, p.left);
    const double r = std::min(hi, p.right);
    if (!(r > l)) continue;
    auto f = [&](double x) { return g(x) * p.rho(x); };
    if (p.knots.empty()) {
      total += integrate_smooth(f, l, r);
      continue;
    }
    // Between knots the density is smooth at the knot scale; a fixed rule suffices.
    auto first = std::upper_bound(p.knots.begin(), p.knots.end(), l);
    double cur = l;
    for (auto it = first; it != p.knots.end() && *it < r; ++it) {
      total += std::isfinite(cur) ? gauss_integrate(f, cur, *it) : integrate_smooth(f, cur, *it);
      cur = *it;
    }
    total += std::isfinite(r) ? gauss_integrate(f, cur, r) : integrate_smooth(f, cur, r);
  }
  return total;
}

double SpeedMeasure::mass(double lo, double hi) const {
  double total = integrate_density([](double) { return 1.0; }, lo, hi);
  for (const SpeedAtom& at : atoms_)
    if (at.x >= lo && at.x <= hi) total += at.infinite ? kInf : at.mass;
  return total;
}

double SpeedMeasure::hull_left() const {
  double h = kInf;
  if (!atoms_.empty()) h = atoms_.front().x;
  if (!pieces_.empty()) h = std::min(h, pieces_.front().left);
  return h;
}

double SpeedMeasure::hull_right() const {
  double h = -kInf;
  if (!atoms_.empty()) h = atoms_.back().x;
  for (const SpeedDensity& p : pieces_) h = std::max(h, p.right);
  return h;
}

std::vector<double> SpeedMeasure::breakpoints() const {
  std::vector<double> out;
  for (const SpeedAtom& at : atoms_) out.push_back(at.x);
  for (const SpeedDensity& p : pieces_) {
    if (std::isfinite(p.left)) out.push_back(p.left);
    if (std::isfinite(p.right)) out.push_back(p.right);
    out.insert(out.end(), p.knots.begin(), p.knots.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double equality_tolerance(const TargetLaw& law) { return law.discretized() ? 1e-9 : 1e-12; }

namespace {

void check_inputs(const TargetLaw& law, double x0, double lambda) {
  if (!(x0 > law.support_left() && x0 < law.support_right()))
    throw DomainError("x0=" + fmt(x0) + " must lie in the open support interval");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be positive");
}

}  // namespace

SpeedMeasure from_law(const TargetLaw& law, double x0, double lambda, double kappa) {
  check_inputs(law, x0, lambda);
  const double k0 = kappa0(law, x0);
  const double tol = equality_tolerance(law);
  if (!std::isfinite(kappa) || kappa < k0 * (1.0 - tol))
    throw PreconditionError("inconsistent Wronskian: kappa=" + fmt(kappa) + " is below kappa0=" + fmt(k0));
  const double px0 = law.put(x0);
  const double cx0 = law.call(x0);
  auto den = [law, x0, kappa, px0, cx0](double x) {
    return x <= x0 ? law.put(x) - px0 + kappa / 2.0 : law.call(x) - cx0 + kappa / 2.0;
  };

  const double a = law.left_tail().mass > 0.0 ? law.support_left() : law.hull_left();
  const double b = law.right_tail().mass > 0.0 ? law.support_right() : law.hull_right();
  if (!(a < b)) throw PreconditionError("law is a point mass; no diffusion interval");

  std::vector<SpeedAtom> atoms;
  for (const Atom& at : law.atoms()) {
    const double d = den(at.x);
    if (d <= tol * kappa) {
      if (at.x != a && at.x != b)
        throw NumericalError("speed denominator vanishes at interior point " + fmt(at.x));
      atoms.push_back(SpeedAtom{at.x, 0.0, true});
    } else {
      atoms.push_back(SpeedAtom{at.x, at.mass / (2.0 * lambda * d), false});
    }
  }

  std::vector<SpeedDensity> pieces;
  for (const DensityPiece& piece : law.density()) {
    auto nodes = std::make_shared<const std::vector<DensityNode>>(piece.nodes);
    SpeedDensity sd;
    sd.left = piece.left();
    sd.right = piece.right();
    for (std::size_t i = 1; i + 1 < piece.nodes.size(); ++i) sd.knots.push_back(piece.nodes[i].x);
    if (x0 > sd.left && x0 < sd.right) sd.knots.push_back(x0);
    sd.rho = [nodes, den, lambda](double x) {
      const double f = interpolate(*nodes, x);
      if (f == 0.0) return 0.0;
      const double d = den(x);
      return d > 0.0 ? f / (2.0 * lambda * d) : kInf;
    };
    pieces.push_back(std::move(sd));
  }
  return SpeedMeasure(a, b, std::move(atoms), std::move(pieces), law.name());
}

DiffusionSpec make_spec(const TargetLaw& law, double x0, double lambda, double kappa) {
  SpeedMeasure m = from_law(law, x0, lambda, kappa);
  return DiffusionSpec{law, x0, lambda, kappa, std::move(m)};
}

double lambda_potential(const DiffusionSpec& spec, double y) {
  const TargetLaw& law = spec.law;
  const double u = y <= spec.x0 ? 2.0 * (law.put(y) - law.put(spec.x0)) + spec.kappa
                                : 2.0 * (law.call(y) - law.call(spec.x0)) + spec.kappa;
  const double w = spec.kappa - v_mu(law, spec.x0, y);
  const double scale = std::max({1.0, spec.kappa, std::abs(spec.x0) + std::abs(y)});
  if (std::abs(u - w) > 1e-12 * scale)
    throw NumericalError("lambda-potential branches disagree at y=" + fmt(y));
  return u;
}

namespace {

struct TailTest {
  bool divergent = false;
  double ratio = 0.0;
};

// Dyadic shell comparison of int g dm near an endpoint. A ratio near/far of at
// least 0.9 means the shell masses are not shrinking geometrically, i.e. the
// integral diverges at the endpoint.
TailTest shell_test(const SpeedMeasure& m, bool left_end, double x0, const std::function<double(double)>& g) {
  double lo1, hi1, lo2, hi2;  // near shell, far shell
  const double end = left_end ? m.left() : m.right();
  if (std::isfinite(end)) {
    const double hull = left_end ? m.hull_left() : m.hull_right();
    double h = std::abs(hull - end);
    if (!(h > 0.0)) h = std::abs(x0 - end) * 0x1.0p-20;
    const double s = left_end ? 1.0 : -1.0;
    lo1 = end + s * h;
    hi1 = end + s * 2.0 * h;
    lo2 = hi1;
    hi2 = end + s * 4.0 * h;
  } else {
    const double hull = left_end ? m.hull_left() : m.hull_right();
    double M = std::isfinite(hull) ? std::abs(hull) : 0x1.0p20 * std::max(1.0, std::abs(x0));
    const double s = left_end ? -1.0 : 1.0;
    lo1 = s * M / 2.0;
    hi1 = s * M;
    lo2 = s * M / 4.0;
    hi2 = s * M / 2.0;
  }
  if (lo1 > hi1) std::swap(lo1, hi1);
  if (lo2 > hi2) std::swap(lo2, hi2);
  auto shell = [&](double lo, double hi) {
    double v = m.integrate_density(g, lo, hi);
    for (const SpeedAtom& at : m.atoms())
      if (at.x > lo && at.x < hi && at.x != end) v += g(at.x) * (at.infinite ? kInf : at.mass);
    return v;
  };
  const double near = shell(lo1, hi1);
  const double far = shell(lo2, hi2);
  TailTest t;
  if (near == 0.0) return t;
  t.ratio = far > 0.0 ? near / far : kInf;
  t.divergent = t.ratio >= 0.9;
  return t;
}

EndpointReport numeric_endpoint(const SpeedMeasure& m, bool left_end, double x0, bool& kotani_divergent) {
  EndpointReport r;
  const double end = left_end ? m.left() : m.right();
  const bool inf_atom = left_end ? m.infinite_left() : m.infinite_right();
  kotani_divergent = true;
  if (inf_atom) {
    r.numeric_entrance = false;
    r.shell_ratio = kInf;
    r.behaviour = Behaviour::Absorbing;
  } else {
    const TailTest t = shell_test(m, left_end, x0, [](double x) { return std::abs(x) + 1.0; });
    r.numeric_entrance = !t.divergent;
    r.shell_ratio = t.ratio;
    if (!std::isfinite(end)) {
      r.behaviour = Behaviour::Inaccessible;
      kotani_divergent = shell_test(m, left_end, x0, [](double x) { return std::abs(x); }).divergent;
    } else if (t.divergent) {
      const TailTest exit = shell_test(m, left_end, x0, [end](double x) { return std::abs(x - end); });
      r.behaviour = exit.divergent ? Behaviour::Inaccessible : Behaviour::Absorbing;
    } else {
      const double at = m.atom_mass(end);
      r.behaviour = at > 0.0 ? Behaviour::StickyReflecting : Behaviour::Reflecting;
    }
  }
  r.entrance = r.numeric_entrance;
  return r;
}

}  // namespace

BoundaryReport classify_speed(const SpeedMeasure& speed, double x0) {
  BoundaryReport rep;
  bool kl = true, kr = true;
  rep.left = numeric_endpoint(speed, true, x0, kl);
  rep.right = numeric_endpoint(speed, false, x0, kr);
  rep.minimal = !(rep.left.entrance && rep.right.entrance);
  rep.martingale = kl && kr;
  rep.strict_local_martingale = !rep.martingale;
  return rep;
}

BoundaryReport classify(const DiffusionSpec& spec) {
  BoundaryReport rep = classify_speed(spec.speed, spec.x0);
  const double tol = equality_tolerance(spec.law);
  const double half = spec.kappa / 2.0;
  const double p = spec.law.put(spec.x0);
  const double c = spec.law.call(spec.x0);
  auto same = [tol](double u, double v) { return std::abs(u - v) <= tol * std::max(std::abs(u), std::abs(v)); };
  rep.left.exact_entrance = !same(half, p);
  rep.right.exact_entrance = !same(half, c);
  rep.exact_available = true;
  if (rep.left.exact_entrance != rep.left.numeric_entrance || rep.right.exact_entrance != rep.right.numeric_entrance) {
    std::ostringstream os;
    os << "boundary tests disagree: left exact=" << rep.left.exact_entrance << " numeric=" << rep.left.numeric_entrance
       << " (ratio " << rep.left.shell_ratio << "), right exact=" << rep.right.exact_entrance
       << " numeric=" << rep.right.numeric_entrance << " (ratio " << rep.right.shell_ratio << ")";
    throw NumericalError(os.str(), {rep.left.shell_ratio, rep.right.shell_ratio});
  }
  rep.left.entrance = rep.left.exact_entrance;
  rep.right.entrance = rep.right.exact_entrance;
  rep.minimal = same(half, std::max(p, c));
  if (rep.minimal != !(rep.left.entrance && rep.right.entrance))
    throw NumericalError("minimality flag inconsistent with the entrance count");
  return rep;
}

DiffusionSpec minimalize(const TargetLaw& law, double x0, double lambda) {
  check_inputs(law, x0, lambda);
  return make_spec(law, x0, lambda, kappa0(law, x0));
}

DiffusionSpec martingale_version(const TargetLaw& law, double lambda) {
  const double xbar = law.mean();
  if (law.atom_at(xbar) > 0.0)
    throw PreconditionError("law has an atom at its mean " + fmt(xbar) + "; no martingale version");
  check_inputs(law, xbar, lambda);
  const double kappa = 2.0 * std::max(law.call(xbar), law.put(xbar));
  return make_spec(law, xbar, lambda, kappa);
}

}  // namespace mindiff
