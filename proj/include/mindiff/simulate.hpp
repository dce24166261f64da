#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mindiff/numeric.hpp"
#include "mindiff/speed_measure.hpp"
#include "mindiff/target_law.hpp"

namespace mindiff {

struct WalkConfig {
  double delta = 1.0 / 400.0;
  /// Domain truncation [left, right]; NaN means the natural hull of the input.
  double left = std::numeric_limits<double>::quiet_NaN();
  double right = std::numeric_limits<double>::quiet_NaN();
  /// Budget of walk steps (visits to tracked sites) per path.
  std::uint64_t max_steps = 100'000'000;
  std::uint64_t seed = 0;
  std::size_t paths = 1000;
  /// 0 picks std::thread::hardware_concurrency().
  unsigned threads = 0;
  /// Local time is reported at these points (snapped to the grid).
  std::vector<double> probes;
  /// Keep L^x at every tracked site in each outcome.
  bool keep_local_time = false;
};

enum class StopRule { Blj, ExpTime };
std::string to_string(StopRule r);

struct EmbeddingOutcome {
  double value = 0.0;
  StopRule rule = StopRule::Blj;
  double gamma = 0.0;
  double l_x0 = 0.0;
  std::uint64_t steps = 0;
  bool censored = false;
  /// The walk touched an artificial truncation wall.
  bool wall_contact = false;
  std::vector<double> probe_local_time;
  /// (site, L^site) for every tracked site, when requested.
  std::vector<std::pair<double, double>> local_time;
};

/// Simple random walk on the delta-grid of [left, right] restricted to the
/// sites that can change the state (sites carrying mass, x0, probes, walls).
/// Excursions between tracked sites are resolved exactly by gambler's ruin.
struct WalkGrid {
  double a = 0.0;
  double delta = 1.0;
  std::int64_t n = 0;  // grid sites 0..n
  /// Tracked grid indices (sorted) and the mass charged per unit local time there (may be +inf).
  std::vector<std::int64_t> sites;
  std::vector<double> mass;
  std::size_t x0_index = 0;
  std::vector<std::size_t> probe_index;
  bool left_wall_artificial = false;
  bool right_wall_artificial = false;

  double site_x(std::int64_t k) const { return a + static_cast<double>(k) * delta; }
  double x0() const { return site_x(sites[x0_index]); }
  double right() const { return site_x(n); }
  /// Mass at the site nearest to x (0 if untracked).
  double mass_at(double x) const;

  /// Bins m: atoms to the nearest site, density integrated over each cell.
  static WalkGrid from_speed(const SpeedMeasure& m, double x0, const WalkConfig& cfg);
  /// Bins mu / (lambda (kappa - V)) directly from the law.
  static WalkGrid from_law(const TargetLaw& law, double x0, double lambda, double kappa, const WalkConfig& cfg);
};

EmbeddingOutcome blj_stop(const WalkGrid& grid, double lambda, double kappa, const WalkConfig& cfg, Rng& rng);
EmbeddingOutcome exp_time_stop(const WalkGrid& grid, double lambda, const WalkConfig& cfg, Rng& rng);

/// tau_kappa = inf{u : lambda kappa Gamma_u > L^{x0}_u}. Requires kappa >= kappa0 and mu({x0}) = 0.
EmbeddingOutcome blj_stop(const TargetLaw& law, double x0, double kappa, double lambda, const WalkConfig& cfg,
                          Rng& rng);
/// tau* = inf{u : Gamma_u > T}, T ~ exponential(lambda).
EmbeddingOutcome exp_time_stop(const SpeedMeasure& speed, double x0, double lambda, const WalkConfig& cfg, Rng& rng);

struct PathSample {
  std::vector<double> times;
  std::vector<double> values;
  std::uint64_t steps = 0;
  bool censored = false;
};

/// X_t = B_{A_t} with A_t = inf{u : Gamma_u > t}, sampled at the given sorted times.
PathSample diffusion_path(const WalkGrid& grid, const std::vector<double>& times, const WalkConfig& cfg, Rng& rng);
PathSample diffusion_path(const SpeedMeasure& speed, double x0, double horizon, std::size_t samples,
                          const WalkConfig& cfg, Rng& rng);

/// Welford accumulator; merge is associative.
class RunningStats {
 public:
  void add(double x);
  void merge(const RunningStats& o);
  std::uint64_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double std_error() const;

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0, m2_ = 0.0;
};

struct Batch {
  std::vector<EmbeddingOutcome> outcomes;
  std::uint64_t censored = 0;
  std::uint64_t wall_contacts = 0;
  RunningStats l_x0;
  std::vector<RunningStats> probes;
};

/// cfg.paths independent paths with streams Rng(cfg.seed, path); results are
/// ordered by path index and independent of the thread count.
Batch run_blj(const TargetLaw& law, double x0, double kappa, double lambda, const WalkConfig& cfg);
Batch run_exp(const SpeedMeasure& speed, double x0, double lambda, const WalkConfig& cfg);
std::vector<PathSample> run_paths(const SpeedMeasure& speed, double x0, double horizon, std::size_t samples,
                                  const WalkConfig& cfg);

}  // namespace mindiff
