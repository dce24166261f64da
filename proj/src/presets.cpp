#include "mindiff/presets.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>

#include "mindiff/error.hpp"

namespace mindiff {

namespace bessel {

namespace {
const double kSinh1 = std::sinh(1.0);
const double kE = std::exp(1.0);
const double kMean = 1.0 - 1.0 / kE;
}  // namespace

double density(double x) {
  if (x <= 0.0) return 0.0;
  if (x <= 1.0) return kSinh1 * std::exp(-1.0 / x) / (x * x * x);
  return std::sinh(1.0 / x) / (kE * x * x * x);
}

double put(double x) {
  if (x <= 0.0) return 0.0;
  if (x <= 1.0) return kSinh1 * x * std::exp(-1.0 / x);
  return call(x) + x - kMean;
}

double call(double x) {
  if (x >= 1.0) return (x * std::sinh(1.0 / x) - 1.0) / kE;
  return put(x) - x + kMean;
}

double wronskian() { return kE / kSinh1; }
double varphi(double x) { return x * std::exp(1.0 - 1.0 / x); }
double phi(double x) { return x * std::sinh(1.0 / x) / kSinh1; }

}  // namespace bessel

TargetLaw jump3_law() {
  TargetLaw::Options opt;
  opt.name = "jump3";
  return TargetLaw(0.0, 1.0, {{0.0, 1.0 / 3.0}, {0.5, 1.0 / 3.0}, {1.0, 1.0 / 3.0}}, {}, opt);
}

namespace {

// t cosh t - sinh t, accurate for small t.
double tcosh_minus_sinh(double t) {
  if (t > 1e-2) return t * std::cosh(t) - std::sinh(t);
  const double t2 = t * t;
  return t * t2 * (1.0 / 3.0 + t2 * (1.0 / 30.0 + t2 * (1.0 / 840.0 + t2 / 45360.0)));
}

}  // namespace

TargetLaw inverse_bessel_law(double eps_tail) {
  if (!(eps_tail > 0.0 && eps_tail < 0.1)) throw DomainError("eps_tail must lie in (0, 0.1)");
  using boost::math::tools::bisect;
  using boost::math::tools::eps_tolerance;
  const double s1 = std::sinh(1.0);
  const double e = std::exp(1.0);

  // Left tail below eps: sinh(1) (1/eps + 1) exp(-1/eps).
  auto left_mass = [s1](double t) { return s1 * (t + 1.0) * std::exp(-t); };
  auto lr = bisect([&](double t) { return left_mass(t) - eps_tail; }, 1.0, 200.0, eps_tolerance<double>(50));
  const double tl = 0.5 * (lr.first + lr.second);
  TailRecord left{1.0 / tl, left_mass(tl), s1 * std::exp(-tl)};

  // Right tail above M: (t cosh t - sinh t)/e with t = 1/M.
  auto rr = bisect([&](double t) { return tcosh_minus_sinh(t) / e - eps_tail; }, 1e-8, 1.0, eps_tolerance<double>(50));
  const double tr = 0.5 * (rr.first + rr.second);
  const double moment = 2.0 * std::pow(std::sinh(tr / 2.0), 2) / e;
  TailRecord right{1.0 / tr, tcosh_minus_sinh(tr) / e, moment};

  std::vector<DensityNode> nodes;
  const double lo = left.cut, hi = right.cut;
  double x = lo;
  while (x < hi) {
    nodes.push_back({x, bessel::density(x)});
    double step = std::min(1e-3 * x * x, 3e-4 * x);
    if (x < 1.0 && x + step > 1.0) step = 1.0 - x;
    x = std::min(hi, x + step);
    if (hi - x < 1e-9 * hi) x = hi;
  }
  nodes.push_back({hi, bessel::density(hi)});

  TargetLaw::Options opt;
  opt.name = "inverse-bessel";
  opt.discretized = true;
  opt.mass_tolerance = 1e-5;
  opt.left_tail = left;
  opt.right_tail = right;
  return TargetLaw(0.0, kInf, {}, {DensityPiece{std::move(nodes)}}, opt);
}

TargetLaw kimura_exp_law(double step) {
  const int n = static_cast<int>(std::lround(0.5 / step));
  std::vector<DensityNode> nodes;
  for (int i = 0; i <= 2 * n; ++i) {
    const double x = static_cast<double>(i) / (2 * n);
    const double f = x <= 0.5 ? 1.0 / (3.0 * std::pow(1.0 - x, 3)) : 1.0 / (3.0 * x * x * x);
    nodes.push_back({x, f});
  }
  TargetLaw::Options opt;
  opt.name = "kimura-exp-law";
  opt.discretized = true;
  opt.mass_tolerance = 1e-5;
  return TargetLaw(0.0, 1.0, {}, {DensityPiece{std::move(nodes)}}, opt);
}

SpeedMeasure lebesgue_speed(double a, double b) {
  return SpeedMeasure(a, b, {}, {SpeedDensity{a, b, [](double) { return 1.0; }, {}}}, "lebesgue");
}

SpeedMeasure kimura_speed() {
  auto rho = [](double x) {
    const double q = x * (1.0 - x);
    return q > 0.0 ? 1.0 / (q * q) : kInf;
  };
  return SpeedMeasure(0.0, 1.0, {}, {SpeedDensity{0.0, 1.0, rho, {}}}, "kimura");
}

SpeedMeasure inverse_bessel_speed() {
  auto rho = [](double x) { return x > 0.0 ? 1.0 / (x * x * x * x) : kInf; };
  return SpeedMeasure(0.0, kInf, {}, {SpeedDensity{0.0, kInf, rho, {}}}, "inverse-bessel");
}

TargetLaw law_preset(const std::string& name) {
  if (name == "jump3") return jump3_law();
  if (name == "inverse-bessel") return inverse_bessel_law();
  if (name == "kimura-exp-law") return kimura_exp_law();
  throw InputError("unknown law preset '" + name + "'");
}

SpeedMeasure speed_preset(const std::string& name) {
  if (name == "lebesgue") return lebesgue_speed();
  if (name == "reflected-cosh") {
    SpeedMeasure m = lebesgue_speed();
    return SpeedMeasure(m.left(), m.right(), {}, m.pieces(), "reflected-cosh");
  }
  if (name == "kimura") return kimura_speed();
  if (name == "inverse-bessel") return inverse_bessel_speed();
  throw InputError("unknown speed preset '" + name + "'");
}

std::vector<std::string> law_preset_names() { return {"jump3", "inverse-bessel", "kimura-exp-law"}; }
std::vector<std::string> speed_preset_names() { return {"lebesgue", "reflected-cosh", "kimura", "inverse-bessel"}; }

}  // namespace mindiff
