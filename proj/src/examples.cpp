#include "mindiff/examples.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "mindiff/eigen.hpp"
#include "mindiff/error.hpp"
#include "mindiff/io.hpp"
#include "mindiff/presets.hpp"

namespace mindiff {

namespace {

const char* const kClosed = "closed form";
const char* const kRoute = "independent route";
const char* const kMc = "monte carlo";

const char* const kDet = "determinism";

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

class Pipeline {
 public:
  Pipeline(ExampleReport& r, const ExampleOptions& o, double delta, std::size_t paths) : r_(r), o_(o) {
    r_.delta = o.delta > 0.0 ? o.delta : delta;
    r_.paths = o.paths > 0 ? o.paths : paths;
    r_.seed = o.seed;
  }

  void use(const char* op) {
    if (std::find(r_.operations.begin(), r_.operations.end(), op) == r_.operations.end()) r_.operations.push_back(op);
  }
  void add(Check c) { r_.checks.push_back(std::move(c)); }
  void info(Check c) {
    c.informational = true;
    add(std::move(c));
  }
  void add_all(const std::vector<Check>& cs, const std::string& prefix) {
    for (Check c : cs) {
      c.name = prefix + c.name;
      add(std::move(c));
    }
  }

  WalkConfig walk() const {
    WalkConfig cfg;
    cfg.delta = r_.delta;
    cfg.paths = r_.paths;
    cfg.seed = r_.seed;
    cfg.threads = o_.threads;
    return cfg;
  }

  // Censoring, plus wall statistics when the domain was truncated.
  void health(const std::string& tag, const Batch& b, const WalkConfig& cfg) {
    const double n = static_cast<double>(b.outcomes.size());
    add(Check::at_most(tag + ": censored fraction", static_cast<double>(b.censored) / n, 1e-3, kMc));
    if (!std::isnan(cfg.right)) {
      std::size_t at_wall = 0;
      for (const EmbeddingOutcome& o : b.outcomes)
        if (!o.censored && o.value >= cfg.right - 0.5 * cfg.delta) ++at_wall;
      add(Check::at_most(tag + ": fraction stopped on the truncation wall", static_cast<double>(at_wall) / n, 1e-3,
                         kMc));
      info(Check::at_most(tag + ": fraction touching the truncation wall", static_cast<double>(b.wall_contacts) / n,
                          1e-3, kMc));
    }
  }

  void local_time(const std::string& tag, const Batch& b, const std::vector<double>& probes, const TargetLaw& law,
                  double x0, double kappa) {
    use("local_time_profile");
    use("v_mu");
    for (const ProbeEstimate& e : local_time_profile(b, probes)) {
      const double want = kappa - v_mu(law, x0, e.x);
      add(Check::near(tag + ": mean L^x at x=" + fmt(e.x) + " vs kappa - V(x)", e.mean, want, mc_tolerance(want, e.std_error),
                      kMc));
    }
  }

  void atom_frequencies(const std::string& tag, const EmpiricalLaw& e, const std::vector<double>& atoms,
                        double target) {
    for (double x : atoms)
      add(Check::near(tag + ": frequency of " + fmt(x), e.frequency(x), target, 0.01, kMc));
  }

  void distances(const std::string& tag, const EmpiricalLaw& e, const TargetLaw& law, double w1_tol) {
    use("wasserstein1");
    add(Check::at_most(tag + ": W1 to the target law", wasserstein1(e, law), w1_tol, kMc));
  }

  void two_sample(const std::string& tag, const EmpiricalLaw& a, const EmpiricalLaw& b) {
    use("ks_two_sample");
    use("kolmogorov_survival");
    add(Check::at_least(tag + ": two-sample KS p-value", ks_two_sample(a, b).p_value, 0.01, kMc));
  }

  // Fails on unexpected throws instead of aborting the whole report.
  void guarded(const std::string& stage, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const Error& e) {
      add(Check::holds(stage + " raised: " + e.what(), false, kRoute));
    }
  }

  ExampleReport& report() { return r_; }

 private:
  ExampleReport& r_;
  const ExampleOptions& o_;
};

double max_abs(const std::vector<double>& xs, const std::function<double(double)>& f) {
  double d = 0.0;
  for (double x : xs) d = std::max(d, std::abs(f(x)));
  return d;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v;
  for (int i = 0; i <= n; ++i) v.push_back(lo + (hi - lo) * i / n);
  return v;
}

GridFunction increasing_of(const EigenSolution& sol) {
  return GridFunction{sol.grid, sol.varphi, sol.varphi_dr.front()};
}

GridFunction decreasing_of(const EigenSolution& sol) {
  GridFunction g{sol.grid, sol.phi, sol.phi_dl.back()};
  g.anchor_back = true;
  return g;
}

// Both eigenfunctions solve the equation they were produced for.
void eigen_residuals(Pipeline& p, const std::string& tag, const EigenSolution& sol) {
  p.use("ode_residual");
  p.add(Check::at_most(tag + ": residual of varphi", ode_residual(increasing_of(sol), sol.speed, sol.lambda), 1e-8,
                       kRoute));
  p.add(Check::at_most(tag + ": residual of phi", ode_residual(decreasing_of(sol), sol.speed, sol.lambda), 1e-8,
                       kRoute));
}

void lambda_potential_routes(Pipeline& p, const std::string& tag, const DiffusionSpec& spec,
                             const std::vector<double>& xs) {
  p.use("lambda_potential");
  p.use("v_mu_kernel");
  const double d = max_abs(xs, [&](double y) { return lambda_potential(spec, y) - (spec.kappa - v_mu_kernel(spec.law, spec.x0, y)); });
  p.add(Check::at_most(tag + ": max |u_lambda - (kappa - V)|", d, 1e-12, kRoute));
}

// ---------------------------------------------------------------- jump3

void jump3(Pipeline& p) {
  const double x0 = 0.5, lambda = 1.0;
  const TargetLaw law = law_preset("jump3");

  p.use("law_to_json");
  p.use("law_from_json");
  const TargetLaw copy = law_from_json(law_to_json(law));
  p.add(Check::at_most("law JSON round trip: max cdf difference",
                       max_abs(linspace(0, 1, 8), [&](double x) { return copy.cdf(x) - law.cdf(x); }), 0.0, kDet));

  p.use("mean");
  p.use("call_price");
  p.use("put_price");
  p.use("potential");
  p.use("kappa0");
  p.add(Check::near("mean", mean(law), 0.5, 1e-15, kClosed));
  p.add(Check::near("C(3/4)", call_price(law, 0.75), 1.0 / 12.0, 1e-15, kClosed));
  p.add(Check::near("P(1/4)", put_price(law, 0.25), 1.0 / 12.0, 1e-15, kClosed));
  p.add(Check::near("U(1/2)", potential(law, 0.5), 1.0 / 3.0, 1e-15, kClosed));
  p.add(Check::near("kappa0 at x0=1/2", kappa0(law, x0), 1.0 / 3.0, 1e-15, kClosed));
  p.use("v_mu");
  p.use("v_mu_kernel");
  p.add(Check::at_most("V from call/put vs potential kernel",
                       max_abs(linspace(0, 1, 200), [&](double x) { return v_mu(law, x0, x) - v_mu_kernel(law, x0, x); }),
                       1e-12, kRoute));

  p.use("from_law");
  for (double W : {4.0, 5.0, 6.0}) {
    const SpeedMeasure m = from_law(law, x0, lambda, 2.0 / W);
    const std::string tag = "W=" + fmt(W);
    p.add(Check::near(tag + ": 2 lambda m({1/2}) = W/3", 2 * lambda * m.atom_mass(0.5), W / 3.0, 1e-12, kClosed));
    if (W < 6.0) {
      const double want = 2.0 / (6.0 / W - 1.0);
      p.add(Check::near(tag + ": 2 lambda m({0}) = 2/(6/W-1)", 2 * lambda * m.atom_mass(0.0), want, 1e-12, kClosed));
      p.add(Check::near(tag + ": 2 lambda m({1}) = 2/(6/W-1)", 2 * lambda * m.atom_mass(1.0), want, 1e-12, kClosed));
    } else {
      p.add(Check::holds(tag + ": infinite atoms at 0 and 1",
                         std::isinf(m.atom_mass(0.0)) && std::isinf(m.atom_mass(1.0)), kClosed));
    }
  }

  p.use("make_spec");
  p.use("classify");
  p.use("classify_speed");
  const DiffusionSpec s6 = make_spec(law, x0, lambda, 1.0 / 3.0);
  const DiffusionSpec s5 = make_spec(law, x0, lambda, 0.4);
  const DiffusionSpec s4 = make_spec(law, x0, lambda, 0.5);
  const BoundaryReport r6 = classify(s6);
  p.add(Check::holds("W=6: absorbing at both ends and minimal",
                     r6.left.behaviour == Behaviour::Absorbing && r6.right.behaviour == Behaviour::Absorbing && r6.minimal,
                     kClosed));
  for (const DiffusionSpec* s : {&s5, &s4}) {
    const BoundaryReport r = classify(*s);
    const BoundaryReport q = classify_speed(s->speed, x0);
    const std::string tag = "W=" + fmt(s->wronskian());
    p.add(Check::holds(tag + ": sticky-reflecting at both ends and not minimal",
                       r.left.behaviour == Behaviour::StickyReflecting &&
                           r.right.behaviour == Behaviour::StickyReflecting && !r.minimal,
                       kClosed));
    p.add(Check::holds(tag + ": speed-only classification agrees",
                       q.left.behaviour == r.left.behaviour && q.right.behaviour == r.right.behaviour, kRoute));
  }
  lambda_potential_routes(p, "W=6", s6, linspace(0, 1, 200));
  lambda_potential_routes(p, "W=4", s4, linspace(0, 1, 200));

  p.use("solve");
  const EigenSolution sol = solve(s5.speed, x0, lambda);
  p.add(Check::near("W=5: solver Wronskian", sol.wronskian, 5.0, 5e-6, kClosed));
  eigen_residuals(p, "W=5", sol);
  p.use("hitting_laplace");
  p.add(Check::near("W=5: E_0[exp(-H_1/2)] = varphi(0)/varphi(1/2)", hitting_laplace(sol, 0.0, 0.5),
                    sol.varphi_at(0.0) / sol.varphi_at(0.5), 1e-12, kRoute));

  p.use("to_law");
  for (const DiffusionSpec* s : {&s6, &s5, &s4}) {
    const TargetLaw back = to_law(s->speed, x0, lambda);
    for (double x : {0.0, 0.5, 1.0})
      p.add(Check::near("W=" + fmt(s->wronskian()) + ": round trip atom at " + fmt(x), back.atom_at(x), 1.0 / 3.0,
                        1e-6, kRoute));
  }

  p.use("speed_to_json");
  p.use("speed_from_json");
  const SpeedMeasure reread = speed_from_json(speed_to_json(s5, law_to_json(law)));
  p.add(Check::at_most("speed JSON round trip: max atom difference",
                       max_abs({0.0, 0.5, 1.0}, [&](double x) { return reread.atom_mass(x) - s5.speed.atom_mass(x); }),
                       0.0, kDet));

  WalkConfig cfg = p.walk();
  cfg.probes = {0.1, 0.25, 0.5, 0.75, 0.9};
  p.use("run_exp");
  p.use("exp_time_stop");
  p.use("ks_distance");
  for (const DiffusionSpec* s : {&s6, &s4}) {
    const std::string tag = "exp-time kappa=" + fmt(s->kappa);
    const Batch b = run_exp(s->speed, x0, lambda, cfg);
    p.health(tag, b, cfg);
    const EmpiricalLaw e = EmpiricalLaw::from_batch(b);
    p.atom_frequencies(tag, e, {0.0, 0.5, 1.0}, 1.0 / 3.0);
    p.add(Check::near(tag + ": E[L^x0]", b.l_x0.mean(), s->kappa, mc_tolerance(s->kappa, b.l_x0.std_error()), kMc));
    p.local_time(tag, b, cfg.probes, law, x0, s->kappa);
    p.add(Check::at_most(tag + ": KS distance to the target law", ks_distance(e, law), 0.01, kMc));
    p.distances(tag, e, law, 0.01);
    if (s == &s6) {
      p.use("sample");
      Rng rng(cfg.seed, cfg.paths + 1);
      std::vector<double> direct;
      for (std::size_t i = 0; i < cfg.paths; ++i) direct.push_back(sample(law, rng));
      p.two_sample(tag + " vs direct draws", e, EmpiricalLaw::from_values(std::move(direct)));
      const double n = static_cast<double>(e.size());
      p.info(Check::at_least(tag + ": one-sample KS p-value", kolmogorov_survival(std::sqrt(n) * ks_distance(e, law)),
                             0.01, kMc));
      Rng one(cfg.seed, 0);
      const EmbeddingOutcome o = exp_time_stop(s->speed, x0, lambda, cfg, one);
      p.add(Check::holds(tag + ": single-path call reproduces batch path 0",
                         o.value == b.outcomes[0].value && o.gamma == b.outcomes[0].gamma &&
                             o.steps == b.outcomes[0].steps,
                         kDet));
    }
  }

  // The stopping rule built from local times needs mu({x0}) = 0.
  p.use("run_blj");
  p.use("blj_stop");
  const double x1 = 0.4;
  for (double kappa : {kappa0(law, x1), 0.5}) {
    const std::string tag = "x0=0.4 kappa=" + fmt(kappa);
    WalkConfig c = p.walk();
    const Batch blj = run_blj(law, x1, kappa, lambda, c);
    const Batch exp = run_exp(from_law(law, x1, lambda, kappa), x1, lambda, c);
    p.health(tag + " blj", blj, c);
    const EmpiricalLaw eb = EmpiricalLaw::from_batch(blj), ee = EmpiricalLaw::from_batch(exp);
    p.atom_frequencies(tag + " blj", eb, {0.0, 0.5, 1.0}, 1.0 / 3.0);
    p.two_sample(tag + " blj vs exp-time", eb, ee);
    Rng one(c.seed, 0);
    const EmbeddingOutcome o = blj_stop(law, x1, kappa, lambda, c, one);
    p.add(Check::holds(tag + ": single-path call reproduces batch path 0",
                       o.value == blj.outcomes[0].value && o.gamma == blj.outcomes[0].gamma, kDet));
  }

  p.use("run_paths");
  p.use("diffusion_path");
  WalkConfig pc = p.walk();
  pc.paths = std::min<std::size_t>(pc.paths, 500);
  bool only_atoms = true, frozen = true;
  for (const PathSample& ps : run_paths(s5.speed, x0, 5.0, 50, pc))
    for (double x : ps.values) only_atoms = only_atoms && (x == 0.0 || x == 0.5 || x == 1.0);
  p.add(Check::holds("W=5 paths visit only {0, 1/2, 1}", only_atoms, kClosed));
  for (std::size_t i = 0; i < 200; ++i) {
    Rng rng(pc.seed, 1000000 + i);
    const PathSample ps = diffusion_path(s6.speed, x0, 5.0, 50, pc, rng);
    for (std::size_t k = 1; k < ps.values.size(); ++k)
      if (ps.values[k - 1] == 0.0 || ps.values[k - 1] == 1.0) frozen = frozen && ps.values[k] == ps.values[k - 1];
  }
  p.add(Check::holds("W=6 paths stay at 0 or 1 once they arrive", frozen, kClosed));

  p.use("minimality_suite");
  p.add_all(minimality_suite(law, x0, lambda, {1.0 / 3.0, 0.4, 0.5}, p.walk(), 0.03, 1.96, 3.0).checks, "minimality: ");
}

// ---------------------------------------------------------------- inverse Bessel

WalkConfig truncated(Pipeline& p, double right) {
  WalkConfig cfg = p.walk();
  cfg.left = 0.0;
  cfg.right = right;
  return cfg;
}

void inverse_bessel(Pipeline& p) {
  const double x0 = 1.0, lambda = bessel::kLambda;
  const TargetLaw law = law_preset("inverse-bessel");
  p.use("mean");
  p.use("call_price");
  p.use("put_price");
  p.add(Check::near("mean", mean(law), 1.0 - std::exp(-1.0), 1e-6, kClosed));
  for (double x : {0.5, 1.0, 2.0}) {
    p.add(Check::near("C(" + fmt(x) + ")", call_price(law, x), bessel::call(x), 1e-6, kClosed));
    p.add(Check::near("P(" + fmt(x) + ")", put_price(law, x), bessel::put(x), 1e-6, kClosed));
  }

  p.use("minimalize");
  const DiffusionSpec spec = minimalize(law, x0, lambda);
  p.add(Check::near("minimal Wronskian", spec.wronskian(), bessel::wronskian(), 1e-6, kClosed));
  p.add(Check::at_most("max |x^4 m'(x) - 1| on [0.1, 40]",
                       max_abs({0.1, 0.3, 0.7, 1.0, 1.5, 3.0, 10.0, 40.0},
                               [&](double x) { return spec.speed.density(x) * std::pow(x, 4) - 1.0; }),
                       1e-6, kClosed));
  p.use("classify");
  const BoundaryReport r = classify(spec);
  p.add(Check::holds("minimal", r.minimal, kClosed));
  p.add(Check::holds("not a martingale (strict local martingale)", !r.martingale && r.strict_local_martingale, kClosed));
  p.add(Check::holds("right end is an entrance, left end is not", r.right.entrance && !r.left.entrance, kClosed));
  p.use("classify_speed");
  const BoundaryReport q = classify_speed(inverse_bessel_speed(), x0);
  p.add(Check::holds("speed-only classification: right entrance, not a martingale",
                     q.right.entrance && !q.left.entrance && !q.martingale, kRoute));
  lambda_potential_routes(p, "minimal", spec, linspace(0.05, 5.0, 200));

  p.use("solve");
  p.use("hitting_laplace");
  const EigenSolution sol = solve(inverse_bessel_speed(), x0, lambda);
  p.add(Check::near("solver Wronskian", sol.wronskian, bessel::wronskian(), 1e-7, kClosed));
  const std::vector<double> pts{0.1, 0.3, 0.7, 1.0, 2.0, 10.0, 100.0};
  p.add(Check::at_most("max |varphi / closed form - 1|",
                       max_abs(pts, [&](double x) { return sol.varphi_at(x) / bessel::varphi(x) - 1.0; }), 1e-6,
                       kClosed));
  p.add(Check::at_most("max |phi / closed form - 1|",
                       max_abs(pts, [&](double x) { return sol.phi_at(x) / bessel::phi(x) - 1.0; }), 1e-6, kClosed));
  p.add(Check::near("E_2[exp(-H_1/2)]", hitting_laplace(sol, 2.0, 1.0), 2 * std::sinh(0.5) / std::sinh(1.0), 1e-7,
                    kClosed));
  p.add(Check::near("E_0.5[exp(-H_1/2)]", hitting_laplace(sol, 0.5, 1.0), 0.5 * std::exp(-1.0), 1e-7, kClosed));
  p.add(Check::at_most("solver residual", sol.residual, 1e-8, kRoute));

  p.use("to_law");
  const TargetLaw back = to_law(inverse_bessel_speed(), x0, lambda);
  p.add(Check::at_most("to_law density vs closed form, max relative error",
                       max_abs({0.2, 0.5, 1.0, 2.0, 5.0},
                               [&](double x) { return back.density_at(x) / bessel::density(x) - 1.0; }),
                       1e-4, kClosed));

  WalkConfig cfg = truncated(p, 20.0);
  cfg.probes = {0.5, 1.0, 2.0};
  p.use("run_exp");
  p.use("exp_time_stop");
  const Batch b = run_exp(inverse_bessel_speed(), x0, lambda, cfg);
  p.health("exp-time", b, cfg);
  const EmpiricalLaw e = EmpiricalLaw::from_batch(b);
  p.add(Check::near("exp-time: E[L^x0]", b.l_x0.mean(), spec.kappa, mc_tolerance(spec.kappa, b.l_x0.std_error()), kMc));
  p.local_time("exp-time", b, cfg.probes, law, x0, spec.kappa);
  p.distances("exp-time", e, law, 0.5 * cfg.delta + 0.01);

  p.use("run_blj");
  WalkConfig bc = truncated(p, 20.0);
  const Batch blj = run_blj(law, x0, spec.kappa, lambda, bc);
  p.health("blj", blj, bc);
  p.two_sample("blj vs exp-time", EmpiricalLaw::from_batch(blj), e);
}

void bessel_martingale(Pipeline& p) {
  const double lambda = bessel::kLambda;
  const TargetLaw law = law_preset("inverse-bessel");
  p.use("martingale_version");
  const DiffusionSpec spec = martingale_version(law, lambda);
  const double xbar = 1.0 - std::exp(-1.0);
  p.add(Check::near("starting point is the mean", spec.x0, xbar, 1e-6, kClosed));
  p.add(Check::at_most("max |x^4 m'(x) - 1| below the mean",
                       max_abs({0.08, 0.2, 0.4, 0.6}, [&](double x) { return spec.speed.density(x) * std::pow(x, 4) - 1.0; }),
                       1e-6, kClosed));
  const double s1 = std::sinh(1.0);
  p.add(Check::at_most("max relative error of the density between the mean and 1",
                       max_abs({0.65, 0.8, 0.95},
                               [&](double x) {
                                 const double middle = s1 * std::exp(-1.0 / x) /
                                                       (x * x * x * (s1 * x * std::exp(-1.0 / x) + xbar - x));
                                 return spec.speed.density(x) / middle - 1.0;
                               }),
                       1e-6, kClosed));
  p.use("classify");
  const BoundaryReport r = classify(spec);
  p.add(Check::holds("martingale, no entrance at either end", r.martingale && !r.left.entrance && !r.right.entrance,
                     kClosed));
  p.use("kappa0");
  p.add(Check::near("kappa equals kappa0 at the mean", spec.kappa, kappa0(law, spec.x0), 1e-9 * spec.kappa, kClosed));
  lambda_potential_routes(p, "martingale version", spec, linspace(0.05, 5.0, 200));

  p.use("speed_to_json");
  p.use("speed_from_json");
  p.use("law_to_json");
  const SpeedMeasure reread = speed_from_json(speed_to_json(spec, law_to_json(law)));
  p.add(Check::at_most("speed JSON round trip: max relative density difference",
                       max_abs(linspace(0.05, 5.0, 50),
                               [&](double x) { return reread.density(x) / spec.speed.density(x) - 1.0; }),
                       1e-10, kDet));

  p.use("solve");
  const EigenSolution sol = solve(spec.speed, spec.x0, lambda);
  p.add(Check::near("solver Wronskian vs 2/kappa", sol.wronskian, spec.wronskian(), 1e-6 * spec.wronskian(), kRoute));
  eigen_residuals(p, "martingale version", sol);

  WalkConfig cfg = truncated(p, 20.0);
  cfg.probes = {0.3, spec.x0, 1.5};
  p.use("run_exp");
  const Batch b = run_exp(spec.speed, spec.x0, lambda, cfg);
  p.health("exp-time", b, cfg);
  const EmpiricalLaw e = EmpiricalLaw::from_batch(b);
  p.add(Check::near("exp-time: E[L^x0]", b.l_x0.mean(), spec.kappa, mc_tolerance(spec.kappa, b.l_x0.std_error()), kMc));
  p.local_time("exp-time", b, cfg.probes, law, spec.x0, spec.kappa);
  p.distances("exp-time", e, law, 0.5 * cfg.delta + 0.01);

  p.use("minimality_suite");
  const double k0 = spec.kappa;
  p.add_all(minimality_suite(law, spec.x0, lambda, {k0, 1.2 * k0, 1.5 * k0}, truncated(p, 20.0), 0.03, 1.96, 3.0).checks,
            "minimality: ");
}

// ---------------------------------------------------------------- Kimura

double kimura_up(double x) { return 2 * x * x / (1 - x); }
double kimura_down(double x) { return 2 * (1 - x) * (1 - x) / x; }

void kimura(Pipeline& p) {
  const double x0 = 0.5, lambda = 1.0, kappa = 1.0 / 6.0;
  const SpeedMeasure m = speed_preset("kimura");
  const TargetLaw law = law_preset("kimura-exp-law");

  p.use("mean");
  p.use("kappa0");
  p.add(Check::near("mean", mean(law), 0.5, 1e-9, kClosed));
  // The bundled law is a node density, so its kappa0 is 1/6 to discretization accuracy.
  const double k0 = kappa0(law, x0);
  p.add(Check::near("kappa0 at 1/2 = 2/W", k0, kappa, 1e-6, kClosed));

  p.use("solve");
  EigenOptions opt;
  opt.eps = 1e-4;
  const EigenSolution sol = solve(m, x0, lambda, opt);
  p.add(Check::near("solver Wronskian", sol.wronskian, 12.0, 1e-6, kClosed));
  p.add(Check::at_most("solver residual", sol.residual, 1e-8, kRoute));
  const std::vector<double> pts{0.1, 0.25, 0.5, 0.7, 0.9};
  p.add(Check::at_most("max scaled |varphi - 2x^2/(1-x)|",
                       max_abs(pts, [&](double x) { return (sol.varphi_at(x) - kimura_up(x)) / std::max(1.0, kimura_up(x)); }),
                       1e-6, kClosed));
  p.add(Check::at_most("max scaled |phi - 2(1-x)^2/x|",
                       max_abs(pts, [&](double x) { return (sol.phi_at(x) - kimura_down(x)) / std::max(1.0, kimura_down(x)); }),
                       1e-6, kClosed));

  // The closed forms on the solver grid, checked against the equation directly.
  p.use("ode_residual");
  GridFunction up{sol.grid, {}, {}}, down{sol.grid, {}, {}};
  for (double x : sol.grid) {
    up.f.push_back(kimura_up(x));
    down.f.push_back(kimura_down(x));
  }
  const double a = sol.left(), c = 1 - a;
  up.slope = 4 * a / c + 2 * a * a / (c * c);
  down.slope = -4 * a / c - 2 * a * a / (c * c);
  down.anchor_back = true;
  p.add(Check::at_most("residual of 2x^2/(1-x)", ode_residual(up, m, lambda), 1e-8, kRoute));
  p.add(Check::at_most("residual of 2(1-x)^2/x", ode_residual(down, m, lambda), 1e-8, kRoute));

  p.use("shift_family");
  for (double delta : {0.0, 1.0, 5.0}) {
    const SpeedMeasure s = shift_family(sol, delta);
    const std::string tag = "shift " + fmt(delta);
    p.add(Check::at_most(tag + ": max relative error of sigma^2 = ((d/2)(1-x)+x^2)(1-x)^2",
                         max_abs({0.05, 0.2, 0.4},
                                 [&](double x) {
                                   const double s2 = (delta / 2 * (1 - x) + x * x) * (1 - x) * (1 - x);
                                   return 1.0 / s.density(x) / s2 - 1.0;
                                 }),
                         1e-6, kClosed));
    GridFunction g;
    for (double x : linspace(0.02, 0.5, 2000)) {
      g.x.push_back(x);
      g.f.push_back(kimura_up(x) + delta);
    }
    g.slope = 4 * 0.02 / 0.98 + 2 * 0.02 * 0.02 / (0.98 * 0.98);
    p.add(Check::at_most(tag + ": residual of varphi + shift", ode_residual(g, s, lambda), 1e-8, kRoute));
  }

  p.use("from_law");
  p.use("make_spec");
  const DiffusionSpec spec = make_spec(law, x0, lambda, k0);
  p.add(Check::at_most("speed from the law: max |x^2 (1-x)^2 m'(x) - 1|",
                       max_abs({0.1, 0.3, 0.45, 0.55, 0.7, 0.9},
                               [&](double x) { return spec.speed.density(x) * std::pow(x * (1 - x), 2) - 1.0; }),
                       1e-4, kClosed));
  p.use("classify");
  p.use("classify_speed");
  const BoundaryReport r = classify(spec);
  const BoundaryReport q = classify_speed(m, x0);
  p.add(Check::holds("minimal martingale", r.minimal && r.martingale, kClosed));
  p.add(Check::holds("neither end is an entrance", !q.left.entrance && !q.right.entrance, kRoute));
  lambda_potential_routes(p, "from law", spec, linspace(0.01, 0.99, 200));

  p.use("to_law");
  const TargetLaw back = to_law(m, x0, lambda);
  p.add(Check::at_most("to_law cdf vs bundled law",
                       max_abs(linspace(0.0, 1.0, 100), [&](double x) { return back.cdf(x) - law.cdf(x); }), 1e-4,
                       kRoute));

  WalkConfig cfg = p.walk();
  cfg.probes = {0.2, 0.35, 0.5, 0.65, 0.8};
  p.use("run_exp");
  const Batch b = run_exp(m, x0, lambda, cfg);
  p.health("exp-time", b, cfg);
  const EmpiricalLaw e = EmpiricalLaw::from_batch(b);
  p.add(Check::near("exp-time: E[L^x0]", b.l_x0.mean(), kappa, mc_tolerance(kappa, b.l_x0.std_error()), kMc));
  p.local_time("exp-time", b, cfg.probes, law, x0, kappa);
  p.distances("exp-time", e, law, 0.5 * cfg.delta + 0.01);

  p.use("run_blj");
  const Batch blj = run_blj(law, x0, k0, lambda, p.walk());
  p.health("blj", blj, p.walk());
  p.two_sample("blj vs exp-time", EmpiricalLaw::from_batch(blj), e);

  p.use("minimality_suite");
  p.add_all(minimality_suite(law, x0, lambda, {k0, 0.2, 0.25}, p.walk(), 0.03, 1.96, 3.0).checks, "minimality: ");
}

// ---------------------------------------------------------------- reflected Brownian motion

void reflected_cosh(Pipeline& p) {
  const double x0 = 1.5, lambda = 0.5;
  const SpeedMeasure m = speed_preset("reflected-cosh");
  p.use("solve");
  const EigenSolution sol = solve(m, x0, lambda);
  const std::vector<double> grid = linspace(0.0, 2.0, 2000);
  p.add(Check::at_most("max |varphi - cosh(x)/cosh(x0)|",
                       max_abs(grid, [&](double x) { return sol.varphi_at(x) - std::cosh(x) / std::cosh(x0); }), 1e-6,
                       kClosed));
  p.add(Check::at_most("max |phi - cosh(2-x)/cosh(2-x0)|",
                       max_abs(grid, [&](double x) { return sol.phi_at(x) - std::cosh(2 - x) / std::cosh(2 - x0); }),
                       1e-6, kClosed));
  p.add(Check::at_most("Wronskian spread", sol.wronskian_spread, 1e-8, kRoute));
  const double W = std::tanh(x0) + std::tanh(2 - x0);
  p.add(Check::near("Wronskian", sol.wronskian, W, 1e-9, kClosed));
  eigen_residuals(p, "Lebesgue", sol);
  p.use("hitting_laplace");
  p.add(Check::near("E_1[exp(-H_1.5/2)]", hitting_laplace(sol, 1.0, x0), std::cosh(1.0) / std::cosh(1.5), 1e-6,
                    kClosed));

  p.use("to_law");
  const TargetLaw law = to_law(m, x0, lambda);
  const double kappa = 2.0 / W;
  p.add(Check::at_most("to_law density vs lambda (2/W) u",
                       max_abs({0.0, 0.5, 1.0, 1.5, 1.8},
                               [&](double x) {
                                 const double u = x <= x0 ? std::cosh(x) / std::cosh(x0)
                                                          : std::cosh(2 - x) / std::cosh(2 - x0);
                                 return law.density_at(x) - lambda * kappa * u;
                               }),
                       1e-6, kClosed));

  p.use("make_spec");
  p.use("classify");
  const DiffusionSpec spec = make_spec(law, x0, lambda, kappa);
  const BoundaryReport r = classify(spec);
  p.add(Check::holds("reflecting at both ends and not minimal",
                     r.left.behaviour == Behaviour::Reflecting && r.right.behaviour == Behaviour::Reflecting &&
                         !r.minimal,
                     kClosed));
  p.add(Check::at_most("speed from the law: max |m'(x) - 1|",
                       max_abs(linspace(0.05, 1.95, 40), [&](double x) { return spec.speed.density(x) - 1.0; }), 1e-4,
                       kClosed));

  p.use("minimalize");
  const DiffusionSpec minimal = minimalize(law, x0, lambda);
  p.add(Check::at_most("minimal version: max |sigma^2 - (1 - 1/cosh x)| on [0, x0]",
                       max_abs({0.1, 0.5, 1.0, 1.4},
                               [&](double x) { return minimal.speed.sigma2(x) - (1.0 - 1.0 / std::cosh(x)); }),
                       1e-4, kClosed));
  p.add(Check::holds("minimal version is minimal", classify(minimal).minimal, kClosed));

  p.use("shift_family");
  p.use("classify_speed");
  const double eta = 1.0 / std::cosh(x0);
  const SpeedMeasure s = shift_family(sol, -eta);
  p.add(Check::at_most("shift -1/cosh(x0): max |sigma^2 - (1 - 1/cosh x)| on [0, x0]",
                       max_abs({0.05, 0.3, 0.8, 1.2, 1.45},
                               [&](double x) { return 1.0 / s.density(x) - (1.0 - 1.0 / std::cosh(x)); }),
                       1e-6, kClosed));
  GridFunction g;
  for (double x : linspace(0.05, x0, 2000)) {
    g.x.push_back(x);
    g.f.push_back(std::cosh(x) / std::cosh(x0) - eta);
  }
  g.slope = std::sinh(0.05) / std::cosh(x0);
  p.use("ode_residual");
  p.add(Check::at_most("shift -1/cosh(x0): residual of varphi - eta", ode_residual(g, s, lambda), 1e-8, kRoute));
  p.add(Check::holds("shifted measure: left end is not an entrance", !classify_speed(s, x0).left.entrance, kRoute));

  WalkConfig cfg = p.walk();
  cfg.probes = {0.25, 0.75, 1.25, 1.5, 1.75};
  p.use("run_exp");
  const Batch b = run_exp(m, x0, lambda, cfg);
  p.health("exp-time", b, cfg);
  const EmpiricalLaw e = EmpiricalLaw::from_batch(b);
  p.add(Check::near("exp-time: E[L^x0]", b.l_x0.mean(), kappa, mc_tolerance(kappa, b.l_x0.std_error()), kMc));
  p.local_time("exp-time", b, cfg.probes, law, x0, kappa);
  p.distances("exp-time", e, law, 0.5 * cfg.delta + 0.01);

  p.use("run_blj");
  const Batch blj = run_blj(law, x0, kappa, lambda, p.walk());
  p.health("blj", blj, p.walk());
  p.two_sample("blj vs exp-time", EmpiricalLaw::from_batch(blj), e);
}

struct Entry {
  double delta;
  std::size_t paths;
  void (*run)(Pipeline&);
};

const std::map<std::string, Entry>& registry() {
  static const std::map<std::string, Entry> r{
      {"jump3", {1.0 / 400.0, 100000, jump3}},
      {"inverse-bessel", {0.05, 10000, inverse_bessel}},
      {"bessel-martingale", {0.02, 10000, bessel_martingale}},
      {"kimura", {0.01, 20000, kimura}},
      {"reflected-cosh", {0.02, 20000, reflected_cosh}},
  };
  return r;
}

}  // namespace

bool ExampleReport::pass() const {
  bool any = false;
  for (const Check& c : checks) {
    if (c.informational) continue;
    if (!c.pass) return false;
    any = true;
  }
  return any;
}

std::vector<std::string> example_names() {
  return {"jump3", "inverse-bessel", "bessel-martingale", "kimura", "reflected-cosh"};
}

std::vector<std::string> public_operations() {
  return {"mean",         "call_price",    "put_price",     "potential",         "v_mu",
          "v_mu_kernel",  "kappa0",        "sample",        "from_law",          "make_spec",
          "lambda_potential", "classify",  "classify_speed", "minimalize",       "martingale_version",
          "to_law",       "solve",         "hitting_laplace", "ode_residual",    "shift_family",
          "blj_stop",     "exp_time_stop", "diffusion_path", "run_blj",          "run_exp",
          "run_paths",    "ks_distance",   "wasserstein1",  "ks_two_sample",     "kolmogorov_survival",
          "local_time_profile", "minimality_suite", "law_to_json", "law_from_json", "speed_to_json",
          "speed_from_json"};
}

ExampleReport run_example(const std::string& name, const ExampleOptions& options) {
  const auto it = registry().find(name);
  if (it == registry().end()) throw InputError("unknown example '" + name + "'");
  ExampleReport r;
  r.name = name;
  Pipeline p(r, options, it->second.delta, it->second.paths);
  p.guarded(name, [&] { it->second.run(p); });
  return r;
}

}  // namespace mindiff
