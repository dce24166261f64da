#pragma once

#include <string>
#include <vector>

#include "mindiff/speed_measure.hpp"
#include "mindiff/target_law.hpp"

namespace mindiff {

/// (delta_0 + delta_{1/2} + delta_1) / 3 on [0, 1].
TargetLaw jump3_law();

/// Law of the inverse Bessel-3 process from x0 = 1 at an independent
/// exponential(1/2) time, sampled onto a fine node grid. Each tail beyond the
/// eps_tail quantile is kept only through its mass and first moment.
TargetLaw inverse_bessel_law(double eps_tail = 1e-6);

/// Exponential-time law of the Kimura martingale (lambda = 1, x0 = 1/2):
/// density 1/(3(1-x)^3) on [0, 1/2] and 1/(3x^3) on [1/2, 1].
TargetLaw kimura_exp_law(double step = 2.5e-4);

/// Lebesgue measure on [a, b].
SpeedMeasure lebesgue_speed(double a = 0.0, double b = 2.0);
/// Density 1/(x^2 (1-x)^2) on (0, 1).
SpeedMeasure kimura_speed();
/// Density x^-4 on (0, inf).
SpeedMeasure inverse_bessel_speed();

TargetLaw law_preset(const std::string& name);
SpeedMeasure speed_preset(const std::string& name);
std::vector<std::string> law_preset_names();
std::vector<std::string> speed_preset_names();

namespace bessel {

/// Density of inverse_bessel_law before discretisation.
double density(double x);
/// Exact put/call of the untruncated law.
double put(double x);
double call(double x);
inline constexpr double kLambda = 0.5;
/// Wronskian e / sinh(1).
double wronskian();
/// Increasing / decreasing eigenfunctions of x^-4 dx at lambda = 1/2, normalised at 1.
double varphi(double x);
double phi(double x);

}  // namespace bessel

}  // namespace mindiff
