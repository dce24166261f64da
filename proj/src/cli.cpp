#include "mindiff/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "mindiff/eigen.hpp"
#include "mindiff/error.hpp"
#include "mindiff/examples.hpp"
#include "mindiff/io.hpp"
#include "mindiff/presets.hpp"
#include "mindiff/simulate.hpp"
#include "mindiff/speed_measure.hpp"
#include "mindiff/target_law.hpp"
#include "mindiff/verify.hpp"

namespace mindiff {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct RunConfig {
  std::string command;
  std::string rule;
  std::string example;
  std::string law, speed;
  Json law_data, speed_data;
  double x0 = kNaN;
  double lambda = 1.0;
  std::string kappa = "min";
  std::size_t paths = 1000;
  double delta = 1.0 / 400.0;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::uint64_t max_steps = 100'000'000;
  double left = kNaN, right = kNaN;
  std::vector<double> probes;
  double horizon = 1.0;
  std::size_t samples = 100;
  std::size_t points = 201;
  double from = kNaN, to = kNaN;
  std::string format;
  std::string out;
  std::string config;
  // Flags set on the command line or by --config.
  std::set<std::string> given;

  bool has(const std::string& key) const { return given.count(key) > 0; }
};

double parse_number(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw InputError(what + ": expected a number, got '" + s + "'");
  return v;
}

// Fills every field the command line left unset from a resolved config object.
void apply_config(RunConfig& c, const Json& j) {
  auto take = [&](const char* key) { return j.contains(key) && !c.has(key); };
  auto num = [&](const char* key, double& field) {
    if (take(key)) {
      field = j.at(key).is_null() ? kNaN : number_from_json(j.at(key), key);
      c.given.insert(key);
    }
  };
  auto str = [&](const char* key, std::string& field) {
    if (take(key)) {
      field = j.at(key).get<std::string>();
      c.given.insert(key);
    }
  };
  if (take("law")) {
    c.law = j.at("law").get<std::string>();
    if (j.contains("law_data")) c.law_data = j.at("law_data");
    c.given.insert("law");
  }
  if (take("speed")) {
    c.speed = j.at("speed").get<std::string>();
    if (j.contains("speed_data")) c.speed_data = j.at("speed_data");
    c.given.insert("speed");
  }
  str("rule", c.rule);
  str("example", c.example);
  num("x0", c.x0);
  num("lambda", c.lambda);
  if (take("kappa")) {
    const Json& k = j.at("kappa");
    c.kappa = k.is_string() ? k.get<std::string>() : format_number(k.get<double>());
    c.given.insert("kappa");
  }
  if (j.contains("walk")) {
    const Json& w = j.at("walk");
    auto wnum = [&](const char* key, double& field) {
      if (w.contains(key) && !c.has(key)) {
        field = w.at(key).is_null() ? kNaN : number_from_json(w.at(key), key);
        c.given.insert(key);
      }
    };
    auto wint = [&](const char* key, auto& field) {
      if (w.contains(key) && !c.has(key)) {
        field = w.at(key).get<std::remove_reference_t<decltype(field)>>();
        c.given.insert(key);
      }
    };
    wnum("delta", c.delta);
    wint("paths", c.paths);
    wint("seed", c.seed);
    wint("max_steps", c.max_steps);
    wnum("left", c.left);
    wnum("right", c.right);
    if (w.contains("probes") && !c.has("probes")) {
      c.probes.clear();
      for (const Json& p : w.at("probes")) c.probes.push_back(number_from_json(p, "probes"));
      c.given.insert("probes");
    }
  }
  // run-example records these at the top level ("default" when unset).
  if (take("seed") && j.at("seed").is_number()) {
    c.seed = j.at("seed").get<std::uint64_t>();
    c.given.insert("seed");
  }
  if (take("paths") && j.at("paths").is_number()) {
    c.paths = j.at("paths").get<std::size_t>();
    c.given.insert("paths");
  }
  if (take("delta") && j.at("delta").is_number()) num("delta", c.delta);
  num("horizon", c.horizon);
  if (take("samples")) {
    c.samples = j.at("samples").get<std::size_t>();
    c.given.insert("samples");
  }
  if (take("points")) {
    c.points = j.at("points").get<std::size_t>();
    c.given.insert("points");
  }
  num("from", c.from);
  num("to", c.to);
  str("format", c.format);
  str("out", c.out);
}

// Resolves inputs on first use and records each one in the embedded config.
class Context {
 public:
  explicit Context(RunConfig& c) : c_(c) {
    resolved_["command"] = c.command;
    if (!c.rule.empty()) resolved_["rule"] = c.rule;
  }

  RunConfig& cfg() { return c_; }
  Json& resolved() { return resolved_; }

  bool has_law() const { return c_.has("law"); }
  bool has_speed() const { return c_.has("speed"); }

  const TargetLaw& law() {
    if (!law_) {
      if (!has_law()) throw InputError("--law is required");
      Json data;
      if (!c_.law_data.is_null()) {
        data = c_.law_data;
        law_ = law_from_json(data);
      } else {
        law_ = load_law(c_.law, &data);
      }
      resolved_["law"] = c_.law;
      resolved_["law_data"] = data;
      law_json_ = data;
    }
    return *law_;
  }
  const Json& law_json() {
    law();
    return law_json_;
  }

  const SpeedMeasure& speed() {
    if (!speed_) {
      if (!has_speed()) throw InputError("--speed is required");
      Json data;
      if (!c_.speed_data.is_null()) {
        data = c_.speed_data;
        speed_ = speed_from_json(data);
      } else {
        speed_ = load_speed(c_.speed, &data);
      }
      resolved_["speed"] = c_.speed;
      resolved_["speed_data"] = data;
    }
    return *speed_;
  }

  /// Defaults to the mean of the law when a law is given.
  double x0() {
    if (!x0_) {
      if (!std::isnan(c_.x0))
        x0_ = c_.x0;
      else if (has_law())
        x0_ = mean(law());
      else
        throw InputError("--x0 is required");
      resolved_["x0"] = number_to_json(*x0_);
    }
    return *x0_;
  }

  double lambda() {
    if (!lambda_) {
      if (!(c_.lambda > 0.0) || !std::isfinite(c_.lambda)) throw InputError("--lambda must be positive");
      lambda_ = c_.lambda;
      resolved_["lambda"] = number_to_json(c_.lambda);
    }
    return *lambda_;
  }

  double kappa() {
    if (!kappa_) {
      const double x = x0();
      if (c_.kappa == "min") {
        kappa_ = kappa0(law(), x);
        resolved_["kappa"] = "min";
      } else {
        kappa_ = parse_number(c_.kappa, "--kappa");
        resolved_["kappa"] = number_to_json(*kappa_);
      }
      resolved_["kappa_value"] = number_to_json(*kappa_);
    }
    return *kappa_;
  }

  DiffusionSpec spec() {
    const double x = x0(), l = lambda(), k = kappa();
    return make_spec(law(), x, l, k);
  }

  WalkConfig walk() {
    if (!c_.has("seed")) throw InputError("--seed is required for simulation commands");
    if (!(c_.delta > 0.0)) throw InputError("--delta must be positive");
    if (c_.paths == 0) throw InputError("--paths must be positive");
    WalkConfig w;
    w.delta = c_.delta;
    w.paths = c_.paths;
    w.seed = c_.seed;
    w.threads = c_.threads;
    w.max_steps = c_.max_steps;
    w.left = c_.left;
    w.right = c_.right;
    w.probes = c_.probes;
    // Thread count is left out: results do not depend on it.
    Json probes = Json::array();
    for (double p : c_.probes) probes.push_back(p);
    resolved_["walk"] = Json{{"delta", w.delta},
                             {"paths", w.paths},
                             {"seed", w.seed},
                             {"max_steps", w.max_steps},
                             {"left", number_to_json(w.left)},
                             {"right", number_to_json(w.right)},
                             {"probes", probes}};
    return w;
  }

  void record(const char* key, Json value) { resolved_[key] = std::move(value); }

 private:
  RunConfig& c_;
  Json resolved_ = Json::object();
  std::optional<TargetLaw> law_;
  Json law_json_;
  std::optional<SpeedMeasure> speed_;
  std::optional<double> x0_, lambda_, kappa_;
};

std::string format_of(Context& ctx, const std::string& fallback, bool csv_allowed) {
  std::string f = ctx.cfg().format.empty() ? fallback : ctx.cfg().format;
  if (f != "csv" && f != "json") throw InputError("--format must be csv or json");
  if (f == "csv" && !csv_allowed) throw InputError(ctx.cfg().command + " writes JSON reports only");
  ctx.record("format", f);
  ctx.record("out", ctx.cfg().out);
  return f;
}

std::string json_document(Context& ctx, const Json& body) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["command"] = ctx.cfg().command;
  doc["config"] = ctx.resolved();
  for (const auto& [k, v] : body.items()) doc[k] = v;
  return doc.dump(2) + "\n";
}

std::string csv_document(Context& ctx, const CsvWriter& csv) {
  return "# schema_version: " + std::to_string(kSchemaVersion) + "\n# config: " + ctx.resolved().dump() + "\n" +
         csv.str();
}

Json check_json(const Check& c) {
  return Json{{"name", c.name},
              {"relation", to_string(c.relation)},
              {"statistic", number_to_json(c.statistic)},
              {"expected", number_to_json(c.expected)},
              {"tolerance", number_to_json(c.tolerance)},
              {"reference", c.reference},
              {"informational", c.informational},
              {"pass", c.pass}};
}

bool all_pass(const std::vector<Check>& checks) {
  for (const Check& c : checks)
    if (!c.informational && !c.pass) return false;
  return true;
}

struct Result {
  std::string text;
  int code = kExitPass;
};

// ---------------------------------------------------------------- commands

Result cmd_build_speed(Context& ctx) {
  const std::string f = format_of(ctx, "json", false);
  (void)f;
  const DiffusionSpec spec = ctx.spec();
  return {json_document(ctx, speed_to_json(spec, ctx.law_json()))};
}

Result cmd_to_law(Context& ctx) {
  format_of(ctx, "json", false);
  const SpeedMeasure& m = ctx.speed();
  const double x0 = ctx.x0(), lambda = ctx.lambda();
  return {json_document(ctx, law_to_json(to_law(m, x0, lambda)))};
}

Result cmd_kappa0(Context& ctx) {
  format_of(ctx, "json", false);
  const TargetLaw& law = ctx.law();
  const double x0 = ctx.x0();
  return {json_document(ctx, Json{{"kappa0", kappa0(law, x0)}, {"mean", mean(law)}, {"potential_x0", potential(law, x0)}})};
}

Json endpoint_json(const EndpointReport& e) {
  return Json{{"behaviour", to_string(e.behaviour)},
              {"entrance", e.entrance},
              {"exact_entrance", e.exact_entrance},
              {"numeric_entrance", e.numeric_entrance},
              {"shell_ratio", number_to_json(e.shell_ratio)}};
}

Result cmd_classify(Context& ctx) {
  format_of(ctx, "json", false);
  BoundaryReport r;
  if (ctx.has_law()) {
    r = classify(ctx.spec());
  } else {
    const SpeedMeasure& m = ctx.speed();
    r = classify_speed(m, ctx.x0());
  }
  return {json_document(ctx, Json{{"left", to_string(r.left.behaviour)},
                                  {"right", to_string(r.right.behaviour)},
                                  {"minimal", r.minimal},
                                  {"martingale", r.martingale},
                                  {"strict_local_martingale", r.strict_local_martingale},
                                  {"exact", r.exact_available},
                                  {"endpoints", Json{{"left", endpoint_json(r.left)}, {"right", endpoint_json(r.right)}}}})};
}

Result cmd_eigen(Context& ctx) {
  const std::string f = format_of(ctx, "csv", true);
  const SpeedMeasure& m = ctx.speed();
  const double x0 = ctx.x0(), lambda = ctx.lambda();
  const EigenSolution s = solve(m, x0, lambda);
  if (f == "csv") {
    CsvWriter csv({"x", "varphi", "phi"});
    for (std::size_t i = 0; i < s.grid.size(); ++i) csv.row({s.grid[i], s.varphi[i], s.phi[i]});
    return {csv_document(ctx, csv)};
  }
  return {json_document(ctx, Json{{"wronskian", s.wronskian},
                                  {"wronskian_spread", s.wronskian_spread},
                                  {"residual", s.residual},
                                  {"truncation_sensitivity", s.truncation_sensitivity},
                                  {"left_absorbing", s.left_absorbing},
                                  {"right_absorbing", s.right_absorbing},
                                  {"x", s.grid},
                                  {"varphi", s.varphi},
                                  {"phi", s.phi}})};
}

// The speed for exponential-time runs: --speed, or the one built from --law.
SpeedMeasure exp_speed(Context& ctx) {
  if (ctx.has_speed()) return ctx.speed();
  return ctx.spec().speed;
}

Json batch_summary(const Batch& b, const WalkConfig& w) {
  Json probes = Json::array();
  for (std::size_t i = 0; i < w.probes.size() && i < b.probes.size(); ++i)
    probes.push_back(Json{{"x", w.probes[i]}, {"mean", b.probes[i].mean()}, {"std_error", b.probes[i].std_error()}});
  return Json{{"paths", b.outcomes.size()},
              {"censored", b.censored},
              {"wall_contacts", b.wall_contacts},
              {"mean_l_x0", b.l_x0.mean()},
              {"l_x0_std_error", b.l_x0.std_error()},
              {"probes", probes}};
}

Result cmd_simulate(Context& ctx) {
  RunConfig& c = ctx.cfg();
  const std::string f = format_of(ctx, "csv", true);
  if (c.rule == "path") {
    const SpeedMeasure m = exp_speed(ctx);
    const double x0 = ctx.x0();
    if (!(c.horizon > 0.0) || c.samples < 2) throw InputError("--horizon must be positive and --samples at least 2");
    ctx.record("horizon", c.horizon);
    ctx.record("samples", c.samples);
    const WalkConfig w = ctx.walk();
    const std::vector<PathSample> paths = run_paths(m, x0, c.horizon, c.samples, w);
    if (f == "csv") {
      CsvWriter csv({"path", "t", "x"});
      for (std::size_t p = 0; p < paths.size(); ++p)
        for (std::size_t i = 0; i < paths[p].times.size(); ++i)
          csv.row({static_cast<double>(p), paths[p].times[i], paths[p].values[i]});
      return {csv_document(ctx, csv)};
    }
    Json rows = Json::array();
    for (std::size_t p = 0; p < paths.size(); ++p)
      rows.push_back(Json{{"path", p}, {"censored", paths[p].censored}, {"t", paths[p].times}, {"x", paths[p].values}});
    return {json_document(ctx, Json{{"paths", rows}})};
  }

  Batch b;
  WalkConfig w;
  if (c.rule == "blj") {
    const TargetLaw& law = ctx.law();
    const double x0 = ctx.x0(), lambda = ctx.lambda(), kappa = ctx.kappa();
    w = ctx.walk();
    b = run_blj(law, x0, kappa, lambda, w);
  } else {
    const SpeedMeasure m = exp_speed(ctx);
    const double x0 = ctx.x0(), lambda = ctx.lambda();
    w = ctx.walk();
    b = run_exp(m, x0, lambda, w);
  }
  if (f == "csv") {
    std::vector<std::string> header{"path", "value", "gamma", "l_x0", "steps", "censored"};
    for (double p : w.probes) header.push_back("l_at_" + format_number(p));
    CsvWriter csv(header);
    for (std::size_t p = 0; p < b.outcomes.size(); ++p) {
      const EmbeddingOutcome& o = b.outcomes[p];
      std::vector<double> row{static_cast<double>(p), o.value, o.gamma, o.l_x0, static_cast<double>(o.steps),
                              o.censored ? 1.0 : 0.0};
      for (double l : o.probe_local_time) row.push_back(l);
      csv.row(row);
    }
    return {csv_document(ctx, csv)};
  }
  Json rows = Json::array();
  for (std::size_t p = 0; p < b.outcomes.size(); ++p) {
    const EmbeddingOutcome& o = b.outcomes[p];
    rows.push_back(Json{{"path", p},
                        {"value", o.value},
                        {"gamma", number_to_json(o.gamma)},
                        {"l_x0", o.l_x0},
                        {"steps", o.steps},
                        {"censored", o.censored},
                        {"probe_local_time", o.probe_local_time}});
  }
  return {json_document(ctx, Json{{"summary", batch_summary(b, w)}, {"outcomes", rows}})};
}

Result cmd_plot_data(Context& ctx) {
  RunConfig& c = ctx.cfg();
  const std::string f = format_of(ctx, "csv", true);
  const DiffusionSpec spec = ctx.spec();
  const double lo = std::isnan(c.from) ? spec.law.hull_left() : c.from;
  const double hi = std::isnan(c.to) ? spec.law.hull_right() : c.to;
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) throw InputError("plot range must be finite with from < to");
  if (c.points < 2) throw InputError("--points must be at least 2");
  ctx.record("from", lo);
  ctx.record("to", hi);
  ctx.record("points", c.points);
  std::vector<double> xs, u, w;
  for (std::size_t i = 0; i < c.points; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(c.points - 1);
    xs.push_back(x);
    u.push_back(lambda_potential(spec, x));
    w.push_back(spec.kappa - v_mu_kernel(spec.law, spec.x0, x));
  }
  if (f == "csv") {
    CsvWriter csv({"x", "u", "kappa_minus_v"});
    for (std::size_t i = 0; i < xs.size(); ++i) csv.row({xs[i], u[i], w[i]});
    return {csv_document(ctx, csv)};
  }
  return {json_document(ctx, Json{{"x", xs}, {"u", u}, {"kappa_minus_v", w}})};
}

Result cmd_verify(Context& ctx) {
  RunConfig& c = ctx.cfg();
  format_of(ctx, "json", false);
  const std::string rule = c.rule.empty() ? "both" : c.rule;
  if (rule != "blj" && rule != "exp" && rule != "both") throw InputError("--rule must be blj, exp or both");
  const TargetLaw& law = ctx.law();
  const double x0 = ctx.x0(), lambda = ctx.lambda(), kappa = ctx.kappa();
  const WalkConfig w = ctx.walk();
  ctx.record("rule", rule);

  std::vector<Check> checks;
  std::vector<EmpiricalLaw> samples;
  const bool atoms_only = law.density().empty();
  auto assess = [&](const std::string& tag, const Batch& b) {
    const double n = static_cast<double>(b.outcomes.size());
    checks.push_back(Check::at_most(tag + ": censored fraction", static_cast<double>(b.censored) / n, 1e-3, "monte carlo"));
    checks.push_back(
        Check::near(tag + ": E[L^x0]", b.l_x0.mean(), kappa, mc_tolerance(kappa, b.l_x0.std_error()), "monte carlo"));
    for (std::size_t i = 0; i < w.probes.size(); ++i) {
      const double want = kappa - v_mu(law, x0, w.probes[i]);
      checks.push_back(Check::near(tag + ": mean L^x at x=" + format_number(w.probes[i]) + " vs kappa - V(x)",
                                   b.probes[i].mean(), want, mc_tolerance(want, b.probes[i].std_error()),
                                   "monte carlo"));
    }
    const EmpiricalLaw e = EmpiricalLaw::from_batch(b);
    checks.push_back(Check::at_most(tag + ": W1 to the target law", wasserstein1(e, law), 0.5 * w.delta + 0.01, "monte carlo"));
    if (atoms_only) {
      checks.push_back(Check::at_most(tag + ": KS distance to the target law", ks_distance(e, law), 0.01, "monte carlo"));
      for (const Atom& a : law.atoms())
        checks.push_back(
            Check::near(tag + ": frequency of " + format_number(a.x), e.frequency(a.x), a.mass, 0.01, "monte carlo"));
    }
    samples.push_back(e);
  };
  if (rule != "exp") assess("blj", run_blj(law, x0, kappa, lambda, w));
  if (rule != "blj") assess("exp-time", run_exp(make_spec(law, x0, lambda, kappa).speed, x0, lambda, w));
  if (samples.size() == 2)
    checks.push_back(Check::at_least("two-sample KS p-value, blj vs exp-time", ks_two_sample(samples[0], samples[1]).p_value,
                                     0.01, "monte carlo"));
  Json cj = Json::array();
  for (const Check& k : checks) cj.push_back(check_json(k));
  const bool pass = all_pass(checks);
  return {json_document(ctx, Json{{"pass", pass}, {"checks", cj}}), pass ? kExitPass : kExitVerification};
}

Result cmd_run_example(Context& ctx, std::ostream& err) {
  RunConfig& c = ctx.cfg();
  format_of(ctx, "json", false);
  if (!c.has("seed")) throw InputError("--seed is required for simulation commands");
  std::vector<std::string> names;
  if (c.example == "all")
    names = example_names();
  else
    names = {c.example};
  ExampleOptions o;
  o.seed = c.seed;
  o.threads = c.threads;
  if (c.has("paths")) o.paths = c.paths;
  if (c.has("delta")) o.delta = c.delta;
  ctx.record("example", c.example);
  ctx.record("seed", c.seed);
  ctx.record("paths", c.has("paths") ? Json(c.paths) : Json("default"));
  ctx.record("delta", c.has("delta") ? Json(c.delta) : Json("default"));
  Json reports = Json::array();
  bool pass = true;
  for (const std::string& name : names) {
    const ExampleReport r = run_example(name, o);
    Json cj = Json::array();
    std::size_t ok = 0, counted = 0;
    for (const Check& k : r.checks) {
      cj.push_back(check_json(k));
      if (!k.informational) {
        ++counted;
        ok += k.pass ? 1 : 0;
      }
    }
    err << name << ": " << ok << "/" << counted << " checks pass\n";
    pass = pass && r.pass();
    reports.push_back(Json{{"name", r.name},
                           {"paths", r.paths},
                           {"delta", r.delta},
                           {"seed", r.seed},
                           {"pass", r.pass()},
                           {"checks", cj},
                           {"operations", r.operations}});
  }
  return {json_document(ctx, Json{{"pass", pass}, {"examples", reports}}), pass ? kExitPass : kExitVerification};
}

Result dispatch(RunConfig& c, std::ostream& err);

// Re-runs the config embedded in an output file and compares the bytes.
Result cmd_reproduce(RunConfig& c, std::ostream& err) {
  if (c.config.empty()) throw InputError("reproduce needs --config <output file>");
  std::ifstream in(c.config, std::ios::binary);
  if (!in) throw InputError("cannot open '" + c.config + "'");
  std::ostringstream bytes;
  bytes << in.rdbuf();
  const std::string text = bytes.str();
  Json config;
  const std::string marker = "# config: ";
  if (text.rfind("# schema_version", 0) == 0) {
    const std::size_t at = text.find(marker);
    if (at == std::string::npos) throw InputError("'" + c.config + "' has no config line");
    const std::size_t end = text.find('\n', at);
    config = Json::parse(text.substr(at + marker.size(), end - at - marker.size()));
  } else {
    config = Json::parse(text).at("config");
  }
  RunConfig again;
  again.command = config.at("command").get<std::string>();
  if (again.command == "reproduce") throw InputError("cannot reproduce a reproduce report");
  again.threads = c.threads;
  apply_config(again, config);
  const Result r = dispatch(again, err);
  const bool same = r.text == text;
  Context ctx(c);
  ctx.record("config", c.config);
  ctx.record("format", "json");
  ctx.record("out", c.out);
  return {json_document(ctx, Json{{"reproduced_command", again.command}, {"identical", same}, {"exit_code", r.code}}),
          same ? kExitPass : kExitVerification};
}

Result dispatch(RunConfig& c, std::ostream& err) {
  if (c.command == "reproduce") return cmd_reproduce(c, err);
  Context ctx(c);
  if (c.command == "build-speed") return cmd_build_speed(ctx);
  if (c.command == "to-law") return cmd_to_law(ctx);
  if (c.command == "kappa0") return cmd_kappa0(ctx);
  if (c.command == "classify") return cmd_classify(ctx);
  if (c.command == "eigen") return cmd_eigen(ctx);
  if (c.command == "simulate") {
    if (c.rule != "blj" && c.rule != "exp" && c.rule != "path") throw InputError("simulate needs blj, exp or path");
    return cmd_simulate(ctx);
  }
  if (c.command == "plot-data") return cmd_plot_data(ctx);
  if (c.command == "verify") return cmd_verify(ctx);
  if (c.command == "run-example") return cmd_run_example(ctx, err);
  throw InputError("unknown command '" + c.command + "'");
}

// ---------------------------------------------------------------- parsing

struct Flags {
  std::vector<std::pair<std::string, CLI::Option*>> options;

  void add(const std::string& key, CLI::Option* o) { options.emplace_back(key, o); }
};

void add_input_flags(CLI::App* sub, RunConfig& c, Flags& f, bool law, bool speed) {
  if (law) f.add("law", sub->add_option("--law", c.law, "Target law: JSON file or preset name"));
  if (speed) f.add("speed", sub->add_option("--speed", c.speed, "Speed measure: JSON file or preset name"));
  f.add("x0", sub->add_option("--x0", c.x0, "Starting point (default: mean of the law)"));
  f.add("lambda", sub->add_option("--lambda", c.lambda, "Killing rate lambda")->capture_default_str());
}

void add_kappa_flag(CLI::App* sub, RunConfig& c, Flags& f) {
  f.add("kappa", sub->add_option("--kappa", c.kappa, "kappa value, or min for kappa0")->capture_default_str());
}

void add_walk_flags(CLI::App* sub, RunConfig& c, Flags& f) {
  f.add("paths", sub->add_option("--paths", c.paths, "Number of paths")->capture_default_str());
  f.add("delta", sub->add_option("--delta", c.delta, "Random-walk grid step")->capture_default_str());
  f.add("seed", sub->add_option("--seed", c.seed, "Random seed (required)"));
  f.add("max_steps", sub->add_option("--max-steps", c.max_steps, "Walk step budget per path")->capture_default_str());
  f.add("left", sub->add_option("--left", c.left, "Left truncation wall"));
  f.add("right", sub->add_option("--right", c.right, "Right truncation wall"));
  f.add("probes", sub->add_option("--probes", c.probes, "Points where local time is reported"));
  sub->add_option("--threads", c.threads, "Worker threads (0: all cores)");
}

void add_output_flags(CLI::App* sub, RunConfig& c, Flags& f) {
  f.add("out", sub->add_option("--out", c.out, "Output file (default: stdout)"));
  f.add("format", sub->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"})));
  sub->add_option("--config", c.config, "JSON config (or an earlier output) supplying unset flags");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generalized diffusions and local-time Skorokhod embeddings", "mindiff"};
  app.require_subcommand(1);
  RunConfig c;
  Flags f;

  auto* build = app.add_subcommand("build-speed", "Speed measure of the diffusion embedding a law");
  add_input_flags(build, c, f, true, false);
  add_kappa_flag(build, c, f);
  add_output_flags(build, c, f);

  auto* tolaw = app.add_subcommand("to-law", "Law of X at an independent exponential time");
  add_input_flags(tolaw, c, f, false, true);
  add_output_flags(tolaw, c, f);

  auto* k0 = app.add_subcommand("kappa0", "Smallest admissible kappa for a law and starting point");
  add_input_flags(k0, c, f, true, false);
  add_output_flags(k0, c, f);

  auto* cls = app.add_subcommand("classify", "Boundary behaviour, minimality and martingale property");
  add_input_flags(cls, c, f, true, true);
  add_kappa_flag(cls, c, f);
  add_output_flags(cls, c, f);

  auto* eig = app.add_subcommand("eigen", "Increasing and decreasing lambda-eigenfunctions");
  add_input_flags(eig, c, f, false, true);
  add_output_flags(eig, c, f);

  auto* sim = app.add_subcommand("simulate", "Random-walk simulation of the embeddings");
  sim->add_option("rule", c.rule, "blj, exp or path")->required()->check(CLI::IsMember({"blj", "exp", "path"}));
  add_input_flags(sim, c, f, true, true);
  add_kappa_flag(sim, c, f);
  add_walk_flags(sim, c, f);
  f.add("horizon", sim->add_option("--horizon", c.horizon, "Time horizon for path")->capture_default_str());
  f.add("samples", sim->add_option("--samples", c.samples, "Sample times per path")->capture_default_str());
  add_output_flags(sim, c, f);

  auto* plot = app.add_subcommand("plot-data", "Columns x, u_lambda(x0, x) and kappa - V(x)");
  add_input_flags(plot, c, f, true, false);
  add_kappa_flag(plot, c, f);
  f.add("points", plot->add_option("--points", c.points, "Number of rows")->capture_default_str());
  f.add("from", plot->add_option("--from", c.from, "Left end of the range (default: support hull)"));
  f.add("to", plot->add_option("--to", c.to, "Right end of the range"));
  add_output_flags(plot, c, f);

  auto* ver = app.add_subcommand("verify", "Simulate a law's embeddings and check them against it");
  add_input_flags(ver, c, f, true, false);
  add_kappa_flag(ver, c, f);
  add_walk_flags(ver, c, f);
  f.add("rule", ver->add_option("--rule", c.rule, "blj, exp or both")->check(CLI::IsMember({"blj", "exp", "both"})));
  add_output_flags(ver, c, f);

  auto* ex = app.add_subcommand("run-example", "Run a bundled example end to end");
  std::vector<std::string> names = example_names();
  names.push_back("all");
  ex->add_option("name", c.example, "Example name or all")->required()->check(CLI::IsMember(names));
  f.add("paths", ex->add_option("--paths", c.paths, "Paths (default: the example's own)"));
  f.add("delta", ex->add_option("--delta", c.delta, "Grid step (default: the example's own)"));
  f.add("seed", ex->add_option("--seed", c.seed, "Random seed (required)"));
  ex->add_option("--threads", c.threads, "Worker threads (0: all cores)");
  add_output_flags(ex, c, f);

  auto* rep = app.add_subcommand("reproduce", "Re-run the config embedded in an output and compare bytes");
  rep->add_option("--config", c.config, "Output file to reproduce")->required();
  rep->add_option("--threads", c.threads, "Worker threads (0: all cores)");
  f.add("out", rep->add_option("--out", c.out, "Report file (default: stdout)"));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitPass : kExitUsage;
  }

  for (CLI::App* sub : app.get_subcommands()) c.command = sub->get_name();
  // Options are shared across subcommands; only the parsed one has counts.
  for (const auto& [key, opt] : f.options)
    if (opt->count() > 0) c.given.insert(key);

  try {
    if (!c.config.empty() && c.command != "reproduce") {
      const Json j = read_json_file(c.config);
      apply_config(c, j.contains("config") ? j.at("config") : j);
    }
    const Result r = dispatch(c, err);
    write_text(c.out, r.text, out);
    if (r.code == kExitVerification) err << "verification failed\n";
    return r.code;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const VerificationError& e) {
    err << "verification failure: " << e.what() << "\n";
    return kExitVerification;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    err << "error: bad JSON input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace mindiff
