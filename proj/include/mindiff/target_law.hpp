#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mindiff/numeric.hpp"

namespace mindiff {

struct Atom {
  double x = 0.0;
  double mass = 0.0;
};

struct DensityNode {
  double x = 0.0;
  double f = 0.0;
};

/// Density given by nodes, linearly interpolated in between.
struct DensityPiece {
  std::vector<DensityNode> nodes;

  double left() const { return nodes.front().x; }
  double right() const { return nodes.back().x; }
};

/// Mass cut from an unbounded tail when an analytic law is ingested. Only the
/// mass and first moment are kept, which keeps call/put values exact on the
/// represented range.
struct TailRecord {
  double cut = 0.0;     // truncation point (quantile level eps_tail)
  double mass = 0.0;
  double moment = 0.0;  // integral of y over the tail

  double centre() const { return mass > 0.0 ? moment / mass : cut; }
};

enum class PotentialKind { Call, Put, Potential };

struct PotentialSegment {
  double left = 0.0;
  double right = 0.0;
  double anchor = 0.0;
  double c[4] = {0.0, 0.0, 0.0, 0.0};  // sum c[i] (x - anchor)^i

  double operator()(double x) const {
    const double d = x - anchor;
    return c[0] + d * (c[1] + d * (c[2] + d * c[3]));
  }
};

/// Exact piecewise-polynomial form of C, P or U. With a piecewise-linear
/// density each segment is a cubic; atoms show up as kinks.
struct PotentialProfile {
  PotentialKind kind = PotentialKind::Call;
  std::vector<PotentialSegment> segments;
  std::vector<double> kinks;

  double operator()(double x) const;
};

/// Probability law on [support_left, support_right]: atoms plus a
/// piecewise-linear density. Immutable; copies share storage.
class TargetLaw {
 public:
  struct Options {
    /// Largest |total mass - 1| accepted before the law is renormalised.
    double mass_tolerance = 1e-9;
    /// True when the law was sampled from an analytic form or produced by a
    /// numerical routine; equality tests downstream use looser tolerances.
    bool discretized = false;
    TailRecord left_tail;
    TailRecord right_tail;
    std::string name;
  };

  TargetLaw(double support_left, double support_right, std::vector<Atom> atoms,
            std::vector<DensityPiece> density, Options options);
  TargetLaw(double support_left, double support_right, std::vector<Atom> atoms,
            std::vector<DensityPiece> density)
      : TargetLaw(support_left, support_right, std::move(atoms), std::move(density), Options{}) {}

  double support_left() const;
  double support_right() const;
  /// Smallest interval carrying the represented mass (tails excluded).
  double hull_left() const;
  double hull_right() const;

  const std::vector<Atom>& atoms() const;
  const std::vector<DensityPiece>& density() const;
  const TailRecord& left_tail() const;
  const TailRecord& right_tail() const;
  bool discretized() const;
  const std::string& name() const;
  /// Factor applied to atoms and density to reach unit mass.
  double normalization() const;

  double mean() const;
  double call(double x) const;
  double put(double x) const;
  double potential(double x) const;
  PotentialProfile profile(PotentialKind kind) const;

  /// F(x) = mu((-inf, x]) and F(x-) = mu((-inf, x)).
  double cdf(double x) const;
  double cdf_left(double x) const;
  /// Mass of a genuine atom sitting exactly at x (0 if none).
  double atom_at(double x) const;
  /// Right-continuous density value.
  double density_at(double x) const;
  /// mu([lo, hi)).
  double mass_between(double lo, double hi) const;
  double quantile(double u) const;

  /// Sorted positions of atoms and density nodes.
  std::vector<double> breakpoints() const;

 private:
  struct Data;
  std::shared_ptr<const Data> data_;

  void require_in_support(double x, const char* what) const;
};

double mean(const TargetLaw& law);
double call_price(const TargetLaw& law, double x);
double put_price(const TargetLaw& law, double x);
double potential(const TargetLaw& law, double x);
PotentialProfile call_price(const TargetLaw& law);
PotentialProfile put_price(const TargetLaw& law);
PotentialProfile potential(const TargetLaw& law);

/// V^{x0}(x) from the call/put branches, cross-checked against the
/// potential-kernel form U(x0) - U(x) + |x0 - x|.
double v_mu(const TargetLaw& law, double x0, double x);
/// Potential-kernel form only.
double v_mu_kernel(const TargetLaw& law, double x0, double x);

/// Smallest kappa with kappa - V^{x0} >= 0, i.e. max{2C(x0), 2P(x0)}.
double kappa0(const TargetLaw& law, double x0);

/// Inverse-CDF draw.
double sample(const TargetLaw& law, Rng& rng);

}  // namespace mindiff
