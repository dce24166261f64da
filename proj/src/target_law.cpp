#include "mindiff/target_law.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mindiff/error.hpp"

namespace mindiff {

namespace {

// One row per breakpoint. The segment [x_k, x_{k+1}) carries density f + s (x - x_k).
struct Row {
  double x = 0.0;
  double atom = 0.0;
  bool tail = false;  // pseudo-atom standing in for a truncated tail
  double F = 0.0;     // mu((-inf, x_k])
  double G = 0.0;     // mu([x_k, inf))
  double P = 0.0;
  double C = 0.0;
  double f = 0.0;
  double s = 0.0;
};

// Taylor shift of a cubic from anchor a to anchor a + h.
void shift_cubic(double c[4], double h) {
  const double c0 = c[0] + h * (c[1] + h * (c[2] + h * c[3]));
  const double c1 = c[1] + h * (2.0 * c[2] + 3.0 * h * c[3]);
  const double c2 = c[2] + 3.0 * h * c[3];
  c[0] = c0;
  c[1] = c1;
  c[2] = c2;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

struct TargetLaw::Data {
  double a = 0.0, b = 0.0;
  std::vector<Atom> atoms;
  std::vector<DensityPiece> density;
  TailRecord left_tail, right_tail;
  bool discretized = false;
  std::string name;
  double normalization = 1.0;
  double mean = 0.0;
  std::vector<Row> rows;
  std::size_t first_real = 0, last_real = 0;

  // Index k with rows[k].x <= x < rows[k+1].x; npos-like -1 below the table.
  long locate(double x) const {
    auto it = std::upper_bound(rows.begin(), rows.end(), x,
                               [](double v, const Row& r) { return v < r.x; });
    return static_cast<long>(it - rows.begin()) - 1;
  }

  double put(double x) const {
    const long k = locate(x);
    if (k < 0) return 0.0;
    const Row& r = rows[k];
    const double t = x - r.x;
    if (static_cast<std::size_t>(k) + 1 == rows.size()) return r.P + r.F * t;
    return r.P + t * (r.F + t * (r.f / 2.0 + t * r.s / 6.0));
  }

  double call(double x) const {
    const long k = locate(x);
    if (k < 0) return rows.front().C + (rows.front().x - x) * rows.front().G;
    if (static_cast<std::size_t>(k) + 1 == rows.size()) return x == rows.back().x ? rows.back().C : 0.0;
    const Row& r = rows[k];
    const Row& n = rows[k + 1];
    const double tau = n.x - x;
    const double fend = r.f + r.s * (n.x - r.x);
    return n.C + tau * (n.G + tau * (fend / 2.0 - tau * r.s / 6.0));
  }

  double cdf(double x) const {
    const long k = locate(x);
    if (k < 0) return 0.0;
    const Row& r = rows[k];
    const double t = x - r.x;
    return std::min(1.0, r.F + t * (r.f + t * r.s / 2.0));
  }
};

double PotentialProfile::operator()(double x) const {
  auto it = std::upper_bound(segments.begin(), segments.end(), x,
                             [](double v, const PotentialSegment& s) { return v < s.left; });
  if (it == segments.begin()) return segments.front()(x);
  return (*(it - 1))(x);
}

TargetLaw::TargetLaw(double a, double b, std::vector<Atom> atoms, std::vector<DensityPiece> density,
                     Options options) {
  if (!(a < b) || std::isnan(a) || std::isnan(b)) throw InputError("law support must satisfy a < b");
  auto d = std::make_shared<Data>();
  d->a = a;
  d->b = b;
  d->left_tail = options.left_tail;
  d->right_tail = options.right_tail;
  d->discretized = options.discretized;
  d->name = options.name;

  std::sort(atoms.begin(), atoms.end(), [](const Atom& p, const Atom& q) { return p.x < q.x; });
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const Atom& at = atoms[i];
    if (!std::isfinite(at.x) || at.x < a || at.x > b) throw InputError("atom at " + fmt(at.x) + " outside the support");
    if (!(at.mass > 0.0) || !std::isfinite(at.mass)) throw InputError("atom mass must be positive and finite");
    if (i > 0 && atoms[i - 1].x == at.x) throw InputError("duplicate atom at " + fmt(at.x));
  }

  std::sort(density.begin(), density.end(), [](const DensityPiece& p, const DensityPiece& q) {
    return p.nodes.empty() || (!q.nodes.empty() && p.left() < q.left());
  });
  for (std::size_t i = 0; i < density.size(); ++i) {
    const auto& nodes = density[i].nodes;
    if (nodes.size() < 2) throw InputError("density piece needs at least two nodes");
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      if (!std::isfinite(nodes[j].x) || !std::isfinite(nodes[j].f))
        throw InputError("density node must be finite (nonintegrable density is rejected)");
      if (nodes[j].f < 0.0) throw InputError("negative density at " + fmt(nodes[j].x));
      if (j > 0 && !(nodes[j].x > nodes[j - 1].x)) throw InputError("density nodes must be strictly increasing");
    }
    if (nodes.front().x < a || nodes.back().x > b) throw InputError("density piece outside the support");
    if (i > 0 && density[i].left() < density[i - 1].right()) throw InputError("density pieces overlap");
  }
  for (const TailRecord* t : {&d->left_tail, &d->right_tail})
    if (t->mass < 0.0 || !std::isfinite(t->mass) || !std::isfinite(t->moment))
      throw InputError("invalid tail record");

  double total = d->left_tail.mass + d->right_tail.mass;
  double body = 0.0;
  for (const Atom& at : atoms) body += at.mass;
  for (const auto& p : density)
    for (std::size_t j = 0; j + 1 < p.nodes.size(); ++j)
      body += 0.5 * (p.nodes[j].f + p.nodes[j + 1].f) * (p.nodes[j + 1].x - p.nodes[j].x);
  total += body;
  if (!(body > 0.0)) throw InputError("law carries no mass");
  if (std::abs(total - 1.0) > options.mass_tolerance)
    throw InputError("total mass " + fmt(total) + " differs from 1");
  const double scale = (1.0 - d->left_tail.mass - d->right_tail.mass) / body;
  d->normalization = scale;
  for (Atom& at : atoms) at.mass *= scale;
  for (auto& p : density)
    for (auto& n : p.nodes) n.f *= scale;

  // Merge atoms, tail pseudo-atoms and density nodes into one breakpoint table.
  std::vector<Row> rows;
  for (const Atom& at : atoms) rows.push_back(Row{at.x, at.mass});
  if (d->left_tail.mass > 0.0) rows.push_back(Row{d->left_tail.centre(), d->left_tail.mass, true});
  if (d->right_tail.mass > 0.0) rows.push_back(Row{d->right_tail.centre(), d->right_tail.mass, true});
  for (const auto& p : density)
    for (const auto& n : p.nodes) rows.push_back(Row{n.x, 0.0});
  std::stable_sort(rows.begin(), rows.end(), [](const Row& p, const Row& q) { return p.x < q.x; });
  std::vector<Row> merged;
  for (const Row& r : rows) {
    if (!merged.empty() && merged.back().x == r.x) {
      merged.back().atom += r.atom;
      merged.back().tail = merged.back().tail || r.tail;
    } else {
      merged.push_back(r);
    }
  }
  rows.swap(merged);

  // Segment densities: each open segment lies inside at most one linear part of one piece.
  std::size_t pi = 0;
  for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
    const double lo = rows[k].x, hi = rows[k + 1].x;
    while (pi < density.size() && density[pi].right() <= lo) ++pi;
    if (pi == density.size() || density[pi].left() >= hi) continue;
    const auto& nodes = density[pi].nodes;
    auto it = std::upper_bound(nodes.begin(), nodes.end(), lo,
                               [](double v, const DensityNode& n) { return v < n.x; });
    const DensityNode& n0 = *(it - 1);
    const DensityNode& n1 = *it;
    const double slope = (n1.f - n0.f) / (n1.x - n0.x);
    rows[k].f = n0.f + slope * (lo - n0.x);
    rows[k].s = slope;
  }

  // Cumulate F and P from the left, G and C from the right.
  double F = 0.0, P = 0.0, M = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    Row& r = rows[k];
    if (k > 0) {
      const Row& q = rows[k - 1];
      const double h = r.x - q.x;
      P = q.P + h * (q.F + h * (q.f / 2.0 + h * q.s / 6.0));
      F = q.F + h * (q.f + h * q.s / 2.0);
      M += q.x * h * (q.f + h * q.s / 2.0) + h * h * (q.f / 2.0 + h * q.s / 3.0);
    }
    F += r.atom;
    M += r.atom * r.x;
    r.F = F;
    r.P = P;
  }
  double G = 0.0, C = 0.0;
  for (std::size_t k = rows.size(); k-- > 0;) {
    Row& r = rows[k];
    if (k + 1 < rows.size()) {
      const Row& n = rows[k + 1];
      const double h = n.x - r.x;
      const double fend = r.f + r.s * h;
      C = n.C + h * (n.G + h * (fend / 2.0 - h * r.s / 6.0));
      G = n.G + h * (r.f + h * r.s / 2.0);
    }
    G += r.atom;
    r.G = G;
    r.C = C;
  }
  d->mean = M;
  d->rows = std::move(rows);
  d->first_real = 0;
  while (d->first_real + 1 < d->rows.size() && d->rows[d->first_real].tail) ++d->first_real;
  d->last_real = d->rows.size() - 1;
  while (d->last_real > 0 && d->rows[d->last_real].tail) --d->last_real;
  d->atoms = std::move(atoms);
  d->density = std::move(density);
  data_ = std::move(d);
}

double TargetLaw::support_left() const { return data_->a; }
double TargetLaw::support_right() const { return data_->b; }
double TargetLaw::hull_left() const { return data_->rows[data_->first_real].x; }
double TargetLaw::hull_right() const { return data_->rows[data_->last_real].x; }
const std::vector<Atom>& TargetLaw::atoms() const { return data_->atoms; }
const std::vector<DensityPiece>& TargetLaw::density() const { return data_->density; }
const TailRecord& TargetLaw::left_tail() const { return data_->left_tail; }
const TailRecord& TargetLaw::right_tail() const { return data_->right_tail; }
bool TargetLaw::discretized() const { return data_->discretized; }
const std::string& TargetLaw::name() const { return data_->name; }
double TargetLaw::normalization() const { return data_->normalization; }
double TargetLaw::mean() const { return data_->mean; }

void TargetLaw::require_in_support(double x, const char* what) const {
  if (!(x >= data_->a && x <= data_->b))
    throw DomainError(std::string(what) + ": x=" + fmt(x) + " outside [" + fmt(data_->a) + ", " + fmt(data_->b) + "]");
}

double TargetLaw::call(double x) const {
  require_in_support(x, "call_price");
  return data_->call(x);
}

double TargetLaw::put(double x) const {
  require_in_support(x, "put_price");
  return data_->put(x);
}

double TargetLaw::potential(double x) const {
  require_in_support(x, "potential");
  return data_->call(x) + data_->put(x);
}

PotentialProfile TargetLaw::profile(PotentialKind kind) const {
  const auto& rows = data_->rows;
  PotentialProfile out;
  out.kind = kind;
  const bool want_put = kind != PotentialKind::Call;
  const bool want_call = kind != PotentialKind::Put;
  for (const Row& r : rows)
    if (r.atom > 0.0) out.kinks.push_back(r.x);

  if (data_->a < rows.front().x) {
    PotentialSegment s{data_->a, rows.front().x, rows.front().x, {0, 0, 0, 0}};
    if (want_call) {
      s.c[0] += rows.front().C;
      s.c[1] -= 1.0;
    }
    out.segments.push_back(s);
  }
  for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
    const Row& r = rows[k];
    const Row& n = rows[k + 1];
    const double h = n.x - r.x;
    PotentialSegment s{r.x, n.x, r.x, {0, 0, 0, 0}};
    if (want_put) {
      s.c[0] += r.P;
      s.c[1] += r.F;
      s.c[2] += r.f / 2.0;
      s.c[3] += r.s / 6.0;
    }
    if (want_call) {
      double c[4] = {n.C, -n.G, (r.f + r.s * h) / 2.0, r.s / 6.0};
      shift_cubic(c, -h);
      for (int i = 0; i < 4; ++i) s.c[i] += c[i];
    }
    out.segments.push_back(s);
  }
  {
    const Row& r = rows.back();
    PotentialSegment s{r.x, data_->b, r.x, {0, 0, 0, 0}};
    if (want_put) {
      s.c[0] += r.P;
      s.c[1] += 1.0;
    }
    out.segments.push_back(s);
  }
  return out;
}

double TargetLaw::cdf(double x) const { return data_->cdf(x); }

double TargetLaw::cdf_left(double x) const {
  const long k = data_->locate(x);
  if (k < 0) return 0.0;
  if (data_->rows[k].x == x) return data_->rows[k].F - data_->rows[k].atom;
  return data_->cdf(x);
}

double TargetLaw::atom_at(double x) const {
  auto it = std::lower_bound(data_->atoms.begin(), data_->atoms.end(), x,
                             [](const Atom& a, double v) { return a.x < v; });
  return it != data_->atoms.end() && it->x == x ? it->mass : 0.0;
}

double TargetLaw::density_at(double x) const {
  const long k = data_->locate(x);
  if (k < 0 || static_cast<std::size_t>(k) + 1 == data_->rows.size()) return 0.0;
  const Row& r = data_->rows[k];
  return r.f + r.s * (x - r.x);
}

double TargetLaw::mass_between(double lo, double hi) const {
  if (!(hi > lo)) return 0.0;
  return std::max(0.0, cdf_left(hi) - cdf_left(lo));
}

double TargetLaw::quantile(double u) const {
  const auto& rows = data_->rows;
  if (!(u >= 0.0)) u = 0.0;
  auto it = std::upper_bound(rows.begin(), rows.end(), u, [](double v, const Row& r) { return v < r.F; });
  if (it == rows.end()) return rows.back().x;
  const std::size_t k = static_cast<std::size_t>(it - rows.begin());
  if (rows[k].F - rows[k].atom <= u || k == 0) return rows[k].x;
  const Row& r = rows[k - 1];
  const double h = rows[k].x - r.x;
  const double rem = u - r.F;
  double t;
  if (r.s == 0.0) {
    t = r.f > 0.0 ? rem / r.f : 0.0;
  } else {
    const double disc = std::max(0.0, r.f * r.f + 2.0 * r.s * rem);
    const double den = r.f + std::sqrt(disc);
    t = den > 0.0 ? 2.0 * rem / den : 0.0;
  }
  return r.x + std::clamp(t, 0.0, h);
}

std::vector<double> TargetLaw::breakpoints() const {
  std::vector<double> out;
  for (const Row& r : data_->rows)
    if (!r.tail) out.push_back(r.x);
  return out;
}

double mean(const TargetLaw& law) { return law.mean(); }
double call_price(const TargetLaw& law, double x) { return law.call(x); }
double put_price(const TargetLaw& law, double x) { return law.put(x); }
double potential(const TargetLaw& law, double x) { return law.potential(x); }
PotentialProfile call_price(const TargetLaw& law) { return law.profile(PotentialKind::Call); }
PotentialProfile put_price(const TargetLaw& law) { return law.profile(PotentialKind::Put); }
PotentialProfile potential(const TargetLaw& law) { return law.profile(PotentialKind::Potential); }

namespace {

void require_start(const TargetLaw& law, double x0) {
  if (!(x0 > law.support_left() && x0 < law.support_right()))
    throw DomainError("x0=" + fmt(x0) + " must lie in the open support interval");
}

}  // namespace

double v_mu_kernel(const TargetLaw& law, double x0, double x) {
  require_start(law, x0);
  return law.potential(x0) - law.potential(x) + std::abs(x0 - x);
}

double v_mu(const TargetLaw& law, double x0, double x) {
  require_start(law, x0);
  const double v = x <= x0 ? 2.0 * (law.put(x0) - law.put(x)) : 2.0 * (law.call(x0) - law.call(x));
  const double w = v_mu_kernel(law, x0, x);
  const double scale = std::max({1.0, std::abs(x0) + std::abs(x), law.potential(x0)});
  if (std::abs(v - w) > 1e-12 * scale)
    throw NumericalError("V branches disagree at x=" + fmt(x) + ": " + fmt(v) + " vs " + fmt(w));
  return v;
}

double kappa0(const TargetLaw& law, double x0) {
  require_start(law, x0);
  const double k = std::max(2.0 * law.call(x0), 2.0 * law.put(x0));
  // V is piecewise monotone between breakpoints and flat beyond the extreme ones.
  std::vector<double> xs = law.breakpoints();
  if (law.left_tail().mass > 0.0) xs.push_back(law.left_tail().centre());
  if (law.right_tail().mass > 0.0) xs.push_back(law.right_tail().centre());
  double sup = 0.0;
  for (double x : xs) sup = std::max(sup, v_mu(law, x0, x));
  if (std::abs(sup - k) > 1e-10 * std::max(1.0, k))
    throw NumericalError("kappa0 disagrees with sup V: " + fmt(k) + " vs " + fmt(sup));
  return k;
}

double sample(const TargetLaw& law, Rng& rng) { return law.quantile(rng.uniform()); }

}  // namespace mindiff
