#include "mindiff/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>
#include <type_traits>

#include "mindiff/error.hpp"

namespace mindiff {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Frame {
  double a = 0.0, b = 0.0, delta = 1.0;
  std::int64_t n = 0, x0_site = 0;
  bool left_artificial = false, right_artificial = false;
};

// Truncation [a', b'] defaults to the hull of the mass; walls there are exact
// because the walk accumulates nothing beyond the hull.
Frame make_frame(double hull_left, double hull_right, double x0, const WalkConfig& cfg) {
  if (!(cfg.delta > 0.0) || !std::isfinite(cfg.delta)) throw InputError("walk step delta must be positive");
  Frame f;
  f.a = std::isnan(cfg.left) ? std::min(hull_left, x0) : cfg.left;
  f.b = std::isnan(cfg.right) ? std::max(hull_right, x0) : cfg.right;
  if (!std::isfinite(f.a) || !std::isfinite(f.b))
    throw InputError("infinite domain: a finite truncation [left, right] is required");
  if (!(f.a < f.b)) throw InputError("empty walk domain [" + fmt(f.a) + ", " + fmt(f.b) + "]");
  if (!(x0 >= f.a && x0 <= f.b)) throw InputError("x0 = " + fmt(x0) + " outside the walk domain");
  const double cells = (f.b - f.a) / cfg.delta;
  f.n = std::llround(cells);
  if (f.n < 1 || std::abs(cells - static_cast<double>(f.n)) > 1e-6 * std::max(1.0, cells))
    throw InputError("delta = " + fmt(cfg.delta) + " does not divide [" + fmt(f.a) + ", " + fmt(f.b) + "]");
  f.delta = (f.b - f.a) / static_cast<double>(f.n);
  f.x0_site = std::llround((x0 - f.a) / f.delta);
  f.left_artificial = f.a > hull_left;
  f.right_artificial = f.b < hull_right;
  return f;
}

std::int64_t nearest_site(const Frame& f, double x) { return std::llround((x - f.a) / f.delta); }

WalkGrid compress(const Frame& f, const std::vector<double>& cell, const WalkConfig& cfg) {
  WalkGrid g;
  g.a = f.a;
  g.delta = f.delta;
  g.n = f.n;
  g.left_wall_artificial = f.left_artificial;
  g.right_wall_artificial = f.right_artificial;
  std::vector<std::int64_t> probe_sites;
  for (double p : cfg.probes) {
    const std::int64_t k = nearest_site(f, p);
    if (k < 0 || k > f.n) throw InputError("probe " + fmt(p) + " outside the walk domain");
    probe_sites.push_back(k);
  }
  for (std::int64_t k = 0; k <= f.n; ++k) {
    const bool keep = k == 0 || k == f.n || k == f.x0_site || cell[static_cast<std::size_t>(k)] > 0.0 ||
                      std::find(probe_sites.begin(), probe_sites.end(), k) != probe_sites.end();
    if (!keep) continue;
    if (k == f.x0_site) g.x0_index = g.sites.size();
    g.sites.push_back(k);
    g.mass.push_back(cell[static_cast<std::size_t>(k)]);
  }
  for (std::int64_t k : probe_sites)
    g.probe_index.push_back(static_cast<std::size_t>(std::lower_bound(g.sites.begin(), g.sites.end(), k) - g.sites.begin()));
  return g;
}

std::uint64_t geometric(Rng& rng, double p) {
  if (p >= 1.0) return 1;
  const double k = std::floor(std::log(rng.uniform_pos()) / std::log1p(-p));
  return k >= 0x1.0p62 ? (std::uint64_t{1} << 62) : 1 + static_cast<std::uint64_t>(k);
}

// Smallest k >= 1 with a + k b > 0, or 0 if none within K visits.
std::uint64_t first_crossing(double a, double b, std::uint64_t K) {
  if (!(b > 0.0)) return 0;
  const double k = std::max(1.0, std::floor(-a / b) + 1.0);
  return k <= static_cast<double>(K) ? static_cast<std::uint64_t>(k) : 0;
}

struct Walk {
  std::size_t j = 0;
  double gamma = 0.0, l_x0 = 0.0;
  std::uint64_t steps = 0;
  bool censored = false, wall = false;
  std::vector<double> local;
};

// stop_at(j, K, walk) returns the visit (1..K) at which the walk stops at site j, or 0.
// at_x0(K, walk), when given, books the K visits to x0 itself and returns the
// stopping visit or 0.
struct NoX0 {};

template <typename StopAt, typename AtX0 = NoX0>
Walk walk(const WalkGrid& g, const WalkConfig& cfg, Rng& rng, StopAt&& stop_at, AtX0&& at_x0 = {}) {
  Walk w;
  w.j = g.x0_index;
  w.local.assign(g.sites.size(), 0.0);
  const std::size_t last = g.sites.size() - 1;
  while (true) {
    const std::size_t j = w.j;
    const double m = g.mass[j];
    if ((j == 0 && g.left_wall_artificial) || (j == last && g.right_wall_artificial)) w.wall = true;
    if (std::isinf(m)) {
      w.gamma = kInf;
      stop_at(j, std::uint64_t{1}, w);
      return w;
    }
    const double pl = j > 0 ? 0.5 / static_cast<double>(g.sites[j] - g.sites[j - 1]) : 0.0;
    const double pr = j < last ? 0.5 / static_cast<double>(g.sites[j + 1] - g.sites[j]) : 0.0;
    const double p = pl + pr;
    std::uint64_t K = geometric(rng, p);
    bool censor = false;
    if (w.steps + K > cfg.max_steps) {
      K = cfg.max_steps - w.steps;
      censor = true;
    }
    if constexpr (!std::is_same_v<std::decay_t<AtX0>, NoX0>) {
      if (j == g.x0_index) {
        const std::uint64_t k = at_x0(K, w);
        w.steps += k > 0 ? k : K;
        if (k > 0) return w;
        if (censor) {
          w.censored = true;
          return w;
        }
        w.j = rng.uniform() * p < pl ? j - 1 : j + 1;
        continue;
      }
    }
    const std::uint64_t k = stop_at(j, K, w);
    const std::uint64_t use = k > 0 ? k : K;
    const double dl = static_cast<double>(use) * g.delta;
    w.local[j] += dl;
    w.gamma += dl * m;
    if (j == g.x0_index) w.l_x0 += dl;
    w.steps += use;
    if (k > 0) return w;
    if (censor) {
      w.censored = true;
      return w;
    }
    w.j = rng.uniform() * p < pl ? j - 1 : j + 1;
  }
}

EmbeddingOutcome outcome(const WalkGrid& g, const WalkConfig& cfg, const Walk& w, StopRule rule) {
  EmbeddingOutcome o;
  o.value = g.site_x(g.sites[w.j]);
  o.rule = rule;
  o.gamma = w.gamma;
  o.l_x0 = w.l_x0;
  o.steps = w.steps;
  o.censored = w.censored;
  o.wall_contact = w.wall;
  for (std::size_t i : g.probe_index) o.probe_local_time.push_back(w.local[i]);
  if (cfg.keep_local_time)
    for (std::size_t i = 0; i < g.sites.size(); ++i) o.local_time.emplace_back(g.site_x(g.sites[i]), w.local[i]);
  return o;
}

void check_blj(const TargetLaw& law, double x0, double kappa, double lambda) {
  if (!(lambda > 0.0)) throw InputError("lambda must be positive");
  if (law.atom_at(x0) > 0.0)
    throw PreconditionError("the stopping rule needs mu({x0}) = 0; the law has an atom of mass " +
                            fmt(law.atom_at(x0)) + " at x0");
  const double k0 = kappa0(law, x0);
  if (kappa < k0 * (1.0 - equality_tolerance(law)))
    throw PreconditionError("kappa = " + fmt(kappa) + " is below kappa0 = " + fmt(k0));
}

unsigned thread_count(const WalkConfig& cfg) {
  unsigned t = cfg.threads > 0 ? cfg.threads : std::thread::hardware_concurrency();
  t = std::max(t, 1u);
  return static_cast<unsigned>(std::min<std::size_t>(t, std::max<std::size_t>(cfg.paths, 1)));
}

template <typename Fn>
void parallel_paths(const WalkConfig& cfg, Fn&& fn) {
  const unsigned t = thread_count(cfg);
  if (t == 1) {
    for (std::size_t i = 0; i < cfg.paths; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(t);
  for (unsigned s = 0; s < t; ++s) {
    pool.emplace_back([&, s] {
      try {
        for (std::size_t i = s; i < cfg.paths; i += t) fn(i);
      } catch (...) {
        errors[s] = std::current_exception();
      }
    });
  }
  for (std::thread& th : pool) th.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

Batch summarize(std::vector<EmbeddingOutcome> outs, std::size_t probes) {
  Batch b;
  b.probes.resize(probes);
  for (const EmbeddingOutcome& o : outs) {
    if (o.wall_contact) ++b.wall_contacts;
    if (o.censored) {
      ++b.censored;
      continue;
    }
    b.l_x0.add(o.l_x0);
    for (std::size_t i = 0; i < probes; ++i) b.probes[i].add(o.probe_local_time[i]);
  }
  b.outcomes = std::move(outs);
  return b;
}

}  // namespace

std::string to_string(StopRule r) { return r == StopRule::Blj ? "blj" : "exp-time"; }

double WalkGrid::mass_at(double x) const {
  const std::int64_t k = std::llround((x - a) / delta);
  auto it = std::lower_bound(sites.begin(), sites.end(), k);
  if (it == sites.end() || *it != k) return 0.0;
  return mass[static_cast<std::size_t>(it - sites.begin())];
}

WalkGrid WalkGrid::from_speed(const SpeedMeasure& m, double x0, const WalkConfig& cfg) {
  const Frame f = make_frame(m.hull_left(), m.hull_right(), x0, cfg);
  std::vector<double> cell(static_cast<std::size_t>(f.n) + 1, 0.0);
  for (std::int64_t k = 0; k <= f.n; ++k) {
    const double x = f.a + static_cast<double>(k) * f.delta;
    const double lo = std::max(f.a, x - 0.5 * f.delta), hi = std::min(f.b, x + 0.5 * f.delta);
    const double v = m.integrate_density([](double) { return 1.0; }, lo, hi);
    cell[static_cast<std::size_t>(k)] = std::isfinite(v) ? v : kInf;
  }
  for (const SpeedAtom& at : m.atoms()) {
    const std::int64_t k = nearest_site(f, at.x);
    if (k < 0 || k > f.n) continue;
    cell[static_cast<std::size_t>(k)] += at.infinite ? kInf : at.mass;
  }
  // Exit and natural finite ends absorb the walk.
  const BoundaryReport rep = classify_speed(m, x0);
  auto absorb = [&](double end, const EndpointReport& r, std::int64_t k) {
    if (!std::isfinite(end) || std::abs(f.a + static_cast<double>(k) * f.delta - end) > 0.5 * f.delta) return;
    if (r.behaviour == Behaviour::Absorbing || r.behaviour == Behaviour::Inaccessible)
      cell[static_cast<std::size_t>(k)] = kInf;
  };
  absorb(m.left(), rep.left, 0);
  absorb(m.right(), rep.right, f.n);
  if (std::isinf(cell[static_cast<std::size_t>(f.x0_site)]))
    throw PreconditionError("x0 sits on an absorbing site");
  return compress(f, cell, cfg);
}

WalkGrid WalkGrid::from_law(const TargetLaw& law, double x0, double lambda, double kappa, const WalkConfig& cfg) {
  const Frame f = make_frame(law.hull_left(), law.hull_right(), x0, cfg);
  const double tol = equality_tolerance(law) * kappa;
  auto gap = [&](double y) { return kappa - v_mu(law, x0, y); };
  std::vector<double> cell(static_cast<std::size_t>(f.n) + 1, 0.0);
  for (const Atom& at : law.atoms()) {
    const std::int64_t k = nearest_site(f, at.x);
    if (k < 0 || k > f.n) continue;
    const double d = gap(at.x);
    cell[static_cast<std::size_t>(k)] += d <= tol ? kInf : at.mass / (lambda * d);
  }
  const std::vector<double> cuts = law.breakpoints();
  for (const DensityPiece& p : law.density()) {
    const std::int64_t k_lo = std::max<std::int64_t>(0, nearest_site(f, p.left()));
    const std::int64_t k_hi = std::min<std::int64_t>(f.n, nearest_site(f, p.right()));
    for (std::int64_t k = k_lo; k <= k_hi; ++k) {
      const double x = f.a + static_cast<double>(k) * f.delta;
      const double lo = std::max({f.a, p.left(), x - 0.5 * f.delta});
      const double hi = std::min({f.b, p.right(), x + 0.5 * f.delta});
      if (!(hi > lo)) continue;
      double& c = cell[static_cast<std::size_t>(k)];
      // A vanishing denominator where the density is positive is not integrable.
      bool singular = false;
      for (double e : {p.left(), p.right()})
        if (e >= lo && e <= hi && law.density_at(e) > 0.0 && gap(e) <= tol) singular = true;
      if (singular) {
        c = kInf;
        continue;
      }
      auto g = [&](double y) { return law.density_at(y) / (lambda * gap(y)); };
      double s = lo;
      for (auto it = std::upper_bound(cuts.begin(), cuts.end(), lo); it != cuts.end() && *it < hi; ++it) {
        c += gauss_integrate(g, s, *it);
        s = *it;
      }
      c += gauss_integrate(g, s, hi);
    }
  }
  return compress(f, cell, cfg);
}

EmbeddingOutcome blj_stop(const WalkGrid& g, double lambda, double kappa, const WalkConfig& cfg, Rng& rng) {
  const double lk = lambda * kappa;
  const std::size_t i0 = g.x0_index;
  const double m0 = g.mass[i0];
  // Each return to x0 separates excursions of height >= delta; Brownian local
  // time between two such excursions is exponential with mean delta. A fixed
  // delta per visit biases the crossing of lk Gamma over L^x0 by O(sqrt(delta)).
  auto at_x0 = [&](std::uint64_t K, Walk& w) -> std::uint64_t {
    if (!(m0 > 0.0)) {
      const double dl = g.delta * (K == 1 ? rng.exponential(1.0) : rng.gamma(static_cast<double>(K)));
      w.local[i0] += dl;
      w.l_x0 += dl;
      return 0;
    }
    for (std::uint64_t k = 1; k <= K; ++k) {
      const double dl = g.delta * rng.exponential(1.0);
      w.local[i0] += dl;
      w.l_x0 += dl;
      w.gamma += g.delta * m0;
      if (lk * w.gamma > w.l_x0) return k;
    }
    return 0;
  };
  Walk w = walk(
      g, cfg, rng,
      [&](std::size_t j, std::uint64_t K, const Walk& s) -> std::uint64_t {
        if (std::isinf(g.mass[j])) return 1;
        return first_crossing(lk * s.gamma - s.l_x0, g.delta * lk * g.mass[j], K);
      },
      at_x0);
  return outcome(g, cfg, w, StopRule::Blj);
}

EmbeddingOutcome exp_time_stop(const WalkGrid& g, double lambda, const WalkConfig& cfg, Rng& rng) {
  if (!(lambda > 0.0)) throw InputError("lambda must be positive");
  const double T = rng.exponential(lambda);
  Walk w = walk(g, cfg, rng, [&](std::size_t j, std::uint64_t K, const Walk& s) -> std::uint64_t {
    if (std::isinf(g.mass[j])) return 1;
    return first_crossing(s.gamma - T, g.delta * g.mass[j], K);
  });
  return outcome(g, cfg, w, StopRule::ExpTime);
}

EmbeddingOutcome blj_stop(const TargetLaw& law, double x0, double kappa, double lambda, const WalkConfig& cfg,
                          Rng& rng) {
  check_blj(law, x0, kappa, lambda);
  return blj_stop(WalkGrid::from_law(law, x0, lambda, kappa, cfg), lambda, kappa, cfg, rng);
}

EmbeddingOutcome exp_time_stop(const SpeedMeasure& speed, double x0, double lambda, const WalkConfig& cfg,
                               Rng& rng) {
  return exp_time_stop(WalkGrid::from_speed(speed, x0, cfg), lambda, cfg, rng);
}

PathSample diffusion_path(const WalkGrid& g, const std::vector<double>& times, const WalkConfig& cfg, Rng& rng) {
  if (!std::is_sorted(times.begin(), times.end())) throw InputError("path times must be sorted");
  if (!times.empty() && !std::isfinite(times.back())) throw InputError("path horizon must be finite");
  PathSample out;
  out.times = times;
  out.values.assign(times.size(), std::numeric_limits<double>::quiet_NaN());
  if (times.empty()) return out;
  std::size_t next = 0;
  const Walk w = walk(g, cfg, rng, [&](std::size_t j, std::uint64_t K, const Walk& s) -> std::uint64_t {
    const double x = g.site_x(g.sites[j]);
    if (std::isinf(g.mass[j])) {
      for (; next < times.size(); ++next) out.values[next] = x;
      return 1;
    }
    std::uint64_t k = 0;
    while (next < times.size()) {
      k = first_crossing(s.gamma - times[next], g.delta * g.mass[j], K);
      if (k == 0) break;
      out.values[next++] = x;
    }
    return next == times.size() ? std::max<std::uint64_t>(k, 1) : 0;
  });
  out.steps = w.steps;
  out.censored = w.censored;
  return out;
}

PathSample diffusion_path(const SpeedMeasure& speed, double x0, double horizon, std::size_t samples,
                          const WalkConfig& cfg, Rng& rng) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InputError("path horizon must be finite and positive");
  std::vector<double> times;
  for (std::size_t i = 0; i <= samples; ++i) times.push_back(horizon * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(samples, 1)));
  return diffusion_path(WalkGrid::from_speed(speed, x0, cfg), times, cfg, rng);
}

void RunningStats::add(double x) {
  ++n_;
  const double d = x - mean_;
  mean_ += d / static_cast<double>(n_);
  m2_ += d * (x - mean_);
}

void RunningStats::merge(const RunningStats& o) {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  const double n = static_cast<double>(n_ + o.n_);
  const double d = o.mean_ - mean_;
  mean_ += d * static_cast<double>(o.n_) / n;
  m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
  n_ += o.n_;
}

double RunningStats::std_error() const {
  return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : kInf;
}

Batch run_blj(const TargetLaw& law, double x0, double kappa, double lambda, const WalkConfig& cfg) {
  check_blj(law, x0, kappa, lambda);
  const WalkGrid g = WalkGrid::from_law(law, x0, lambda, kappa, cfg);
  std::vector<EmbeddingOutcome> outs(cfg.paths);
  parallel_paths(cfg, [&](std::size_t i) {
    Rng rng(cfg.seed, i);
    outs[i] = blj_stop(g, lambda, kappa, cfg, rng);
  });
  return summarize(std::move(outs), g.probe_index.size());
}

Batch run_exp(const SpeedMeasure& speed, double x0, double lambda, const WalkConfig& cfg) {
  const WalkGrid g = WalkGrid::from_speed(speed, x0, cfg);
  std::vector<EmbeddingOutcome> outs(cfg.paths);
  parallel_paths(cfg, [&](std::size_t i) {
    Rng rng(cfg.seed, i);
    outs[i] = exp_time_stop(g, lambda, cfg, rng);
  });
  return summarize(std::move(outs), g.probe_index.size());
}

std::vector<PathSample> run_paths(const SpeedMeasure& speed, double x0, double horizon, std::size_t samples,
                                  const WalkConfig& cfg) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InputError("path horizon must be finite and positive");
  const WalkGrid g = WalkGrid::from_speed(speed, x0, cfg);
  std::vector<double> times;
  for (std::size_t i = 0; i <= samples; ++i)
    times.push_back(horizon * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(samples, 1)));
  std::vector<PathSample> out(cfg.paths);
  parallel_paths(cfg, [&](std::size_t i) {
    Rng rng(cfg.seed, i);
    out[i] = diffusion_path(g, times, cfg, rng);
  });
  return out;
}

}  // namespace mindiff
