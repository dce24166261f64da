#include "mindiff/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mindiff/error.hpp"

namespace mindiff {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void require_uncensored(const EmpiricalLaw& e) {
  if (e.size() == 0) throw VerificationError("empirical law has no uncensored samples");
  if (e.censored_fraction() >= 0.01)
    throw VerificationError("censored fraction " + fmt(e.censored_fraction()) + " exceeds 1%");
}

// Put potential extended to the whole line: int_{-inf}^x F.
double put_anywhere(const TargetLaw& law, double x) {
  const double a = law.support_left(), b = law.support_right();
  if (x <= a) return 0.0;
  if (x >= b) return law.put(b) + (x - b);
  return law.put(x);
}

// int_l^r |c - F(x)| dx, with F continuous and nondecreasing on (l, r).
double abs_gap(const TargetLaw& law, double c, double l, double r) {
  if (!(r > l)) return 0.0;
  const double fl = law.cdf(l), fr = law.cdf_left(r);
  const double area = put_anywhere(law, r) - put_anywhere(law, l);
  if (c <= fl) return area - c * (r - l);
  if (c >= fr) return c * (r - l) - area;
  double lo = l, hi = r;
  for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (law.cdf(mid) < c ? lo : hi) = mid;
  }
  const double s = 0.5 * (lo + hi);
  const double below = put_anywhere(law, s) - put_anywhere(law, l);
  const double above = area - below;
  return (c * (s - l) - below) + (above - c * (r - s));
}

}  // namespace

std::string to_string(Relation r) {
  switch (r) {
    case Relation::Near: return "near";
    case Relation::AtMost: return "at_most";
    case Relation::AtLeast: return "at_least";
    case Relation::Holds: return "holds";
  }
  return "near";
}

Check Check::near(std::string name, double statistic, double expected, double tolerance, std::string reference) {
  return {std::move(name), statistic, expected, tolerance, std::abs(statistic - expected) <= tolerance,
          Relation::Near, std::move(reference), false};
}

Check Check::at_most(std::string name, double statistic, double limit, std::string reference) {
  return {std::move(name), statistic, limit, limit, statistic <= limit, Relation::AtMost, std::move(reference), false};
}

Check Check::at_least(std::string name, double statistic, double limit, std::string reference) {
  return {std::move(name), statistic, limit, limit, statistic >= limit, Relation::AtLeast, std::move(reference),
          false};
}

Check Check::holds(std::string name, bool ok, std::string reference) {
  return {std::move(name), ok ? 1.0 : 0.0, 1.0, 0.0, ok, Relation::Holds, std::move(reference), false};
}

EmpiricalLaw EmpiricalLaw::from_values(std::vector<double> values, std::uint64_t censored) {
  EmpiricalLaw e;
  std::sort(values.begin(), values.end());
  for (double v : values) {
    if (!std::isfinite(v)) throw InputError("empirical sample contains a non-finite value");
    if (!e.tallies.empty() && e.tallies.back().first == v)
      ++e.tallies.back().second;
    else
      e.tallies.emplace_back(v, 1);
  }
  e.values = std::move(values);
  e.censored = censored;
  return e;
}

EmpiricalLaw EmpiricalLaw::from_batch(const Batch& batch) {
  std::vector<double> v;
  v.reserve(batch.outcomes.size());
  std::uint64_t censored = 0;
  for (const EmbeddingOutcome& o : batch.outcomes) {
    if (o.censored)
      ++censored;
    else
      v.push_back(o.value);
  }
  return from_values(std::move(v), censored);
}

double EmpiricalLaw::censored_fraction() const {
  return paths() > 0 ? static_cast<double>(censored) / static_cast<double>(paths()) : 0.0;
}

double EmpiricalLaw::cdf(double x) const {
  if (values.empty()) return 0.0;
  const auto k = std::upper_bound(values.begin(), values.end(), x) - values.begin();
  return static_cast<double>(k) / static_cast<double>(values.size());
}

double EmpiricalLaw::frequency(double x) const {
  auto it = std::lower_bound(tallies.begin(), tallies.end(), x,
                             [](const std::pair<double, std::uint64_t>& t, double v) { return t.first < v; });
  if (it == tallies.end() || it->first != x) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(values.size());
}

double ks_distance(const EmpiricalLaw& emp, const TargetLaw& law) {
  require_uncensored(emp);
  const double n = static_cast<double>(emp.size());
  double d = 0.0, below = 0.0;
  std::uint64_t seen = 0;
  for (const auto& [x, count] : emp.tallies) {
    seen += count;
    const double above = static_cast<double>(seen) / n;
    d = std::max({d, std::abs(below - law.cdf_left(x)), std::abs(above - law.cdf(x))});
    below = above;
  }
  return d;
}

double wasserstein1(const EmpiricalLaw& emp, const TargetLaw& law) {
  require_uncensored(emp);
  std::vector<double> cuts = law.breakpoints();
  for (const auto& t : emp.tallies) cuts.push_back(t.first);
  if (std::isfinite(law.support_left())) cuts.push_back(law.support_left());
  if (std::isfinite(law.support_right())) cuts.push_back(law.support_right());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  const double n = static_cast<double>(emp.size());
  // Outside [cuts.front(), cuts.back()] both distribution functions are 0 or 1,
  // except for unbounded law support, where the tail integrals are the potentials.
  double w = put_anywhere(law, cuts.front());
  const double last = cuts.back();
  w += std::isfinite(law.support_right()) && last >= law.support_right() ? 0.0 : law.call(last);
  std::size_t t = 0;
  std::uint64_t seen = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    while (t < emp.tallies.size() && emp.tallies[t].first <= cuts[i]) seen += emp.tallies[t++].second;
    w += abs_gap(law, static_cast<double>(seen) / n, cuts[i], cuts[i + 1]);
  }
  return w;
}

double kolmogorov_survival(double t) {
  if (t <= 0.0) return 1.0;
  double s = 0.0;
  if (t < 1.0) {
    // Jacobi-transformed series, fast for small t.
    const double pi2 = M_PI * M_PI;
    for (int k = 1; k <= 50; ++k) {
      const double term = std::exp(-(2 * k - 1) * (2 * k - 1) * pi2 / (8.0 * t * t));
      s += term;
      if (term < 1e-18 * s) break;
    }
    return std::clamp(1.0 - std::sqrt(2.0 * M_PI) / t * s, 0.0, 1.0);
  }
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * t * t);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

TwoSampleTest ks_two_sample(const EmpiricalLaw& a, const EmpiricalLaw& b) {
  require_uncensored(a);
  require_uncensored(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  TwoSampleTest r;
  std::size_t i = 0, j = 0;
  std::uint64_t ca = 0, cb = 0;
  while (i < a.tallies.size() || j < b.tallies.size()) {
    const double xa = i < a.tallies.size() ? a.tallies[i].first : kInf;
    const double xb = j < b.tallies.size() ? b.tallies[j].first : kInf;
    const double x = std::min(xa, xb);
    if (xa == x) ca += a.tallies[i++].second;
    if (xb == x) cb += b.tallies[j++].second;
    r.statistic = std::max(r.statistic, std::abs(static_cast<double>(ca) / na - static_cast<double>(cb) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  r.p_value = kolmogorov_survival((ne + 0.12 + 0.11 / ne) * r.statistic);
  return r;
}

std::vector<ProbeEstimate> local_time_profile(const Batch& batch, const std::vector<double>& probes, double z,
                                              std::uint64_t min_paths) {
  if (batch.probes.size() != probes.size())
    throw InputError("batch carries " + std::to_string(batch.probes.size()) + " probes, " +
                     std::to_string(probes.size()) + " requested");
  std::vector<ProbeEstimate> out;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const RunningStats& s = batch.probes[i];
    if (s.count() < min_paths)
      throw PreconditionError("local-time profile needs at least " + std::to_string(min_paths) + " paths, got " +
                              std::to_string(s.count()));
    ProbeEstimate e;
    e.x = probes[i];
    e.mean = s.mean();
    e.std_error = s.std_error();
    e.half_width = z * e.std_error;
    e.paths = s.count();
    out.push_back(e);
  }
  return out;
}

bool MinimalityReport::pass() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

double mc_tolerance(double want, double std_error) { return std::max(0.03 * std::abs(want), 3.0 * std_error); }

MinimalityReport minimality_suite(const TargetLaw& law, double x0, double lambda, const std::vector<double>& kappas,
                                  const WalkConfig& cfg, double rel_tol, double z, double ci_z) {
  MinimalityReport rep;
  rep.kappa0 = kappa0(law, x0);
  const double tol = equality_tolerance(law) * std::max(1.0, rep.kappa0);
  std::vector<double> ks = kappas;
  std::sort(ks.begin(), ks.end());
  if (ks.size() < 3 || std::abs(ks.front() - rep.kappa0) > tol || !(ks[1] > ks[0] + tol))
    throw PreconditionError("kappa list must contain kappa0 = " + fmt(rep.kappa0) + " and at least two larger values");
  ks.front() = rep.kappa0;

  // Common path streams across kappa make the differences low-variance.
  std::vector<Batch> runs;
  for (double k : ks) runs.push_back(run_exp(from_law(law, x0, lambda, k), x0, lambda, cfg));
  for (std::size_t i = 0; i < ks.size(); ++i) {
    MinimalityRow row;
    row.kappa = ks[i];
    row.mean = runs[i].l_x0.mean();
    row.std_error = runs[i].l_x0.std_error();
    RunningStats d;
    for (std::size_t p = 0; p < cfg.paths; ++p) {
      const EmbeddingOutcome &u = runs[i].outcomes[p], &v = runs[0].outcomes[p];
      if (!u.censored && !v.censored) d.add(u.l_x0 - v.l_x0);
    }
    row.shift = d.mean();
    row.shift_error = i == 0 ? 0.0 : d.std_error();
    rep.rows.push_back(row);
  }

  for (std::size_t i = 0; i + 1 < rep.rows.size(); ++i) {
    const MinimalityRow &lo = rep.rows[i], &hi = rep.rows[i + 1];
    const double step = hi.shift - lo.shift;
    const double slack = z * std::hypot(hi.shift_error, lo.shift_error);
    rep.checks.push_back(Check::at_least("nondecreasing E[L^x0] from kappa=" + fmt(lo.kappa) + " to " + fmt(hi.kappa),
                                         step, -slack, "monte carlo"));
  }
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    const MinimalityRow& r = rep.rows[i];
    const double want = r.kappa - rep.kappa0;
    const double t = std::max(rel_tol * want, ci_z * r.shift_error);
    rep.checks.push_back(
        Check::near("shift E[L^x0](" + fmt(r.kappa) + ") - E[L^x0](kappa0)", r.shift, want, t, "monte carlo"));
  }
  double lowest = kInf;
  for (std::size_t i = 1; i < rep.rows.size(); ++i) lowest = std::min(lowest, rep.rows[i].shift);
  rep.checks.push_back(Check::at_least("kappa0 run attains the minimum (smallest paired shift)", lowest, 0.0, "monte carlo"));
  const MinimalityRow& base = rep.rows.front();
  const double level = x0 <= law.mean() ? 2.0 * law.call(x0) : 2.0 * law.put(x0);
  rep.checks.push_back(
      Check::near("E[L^x0](kappa0) equals the kappa0 level", base.mean, level,
                  std::max(rel_tol * level, ci_z * base.std_error), "monte carlo"));
  return rep;
}

}  // namespace mindiff
