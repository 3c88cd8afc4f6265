#pragma once

// Growth-regime classification of the central-guide intensity and the
// bisection search for the parametric threshold.

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "wgarray/params.hpp"

namespace wgarray {

enum class GrowthClass { SubExponential, Exponential };

struct GrowthFit {
  GrowthClass growth = GrowthClass::SubExponential;
  double rate = 0.0;          ///< least-squares slope of ln I over the window
  double r_squared = 0.0;     ///< of the ln I vs. z fit
  double log_increase = 0.0;  ///< rate * (z_hi - z_lo)
};

/// ln I is fitted by a straight line over [z_lo, z_hi]. The growth is
/// exponential when the fit is tight (R^2 >= 0.99) and the fitted increase of
/// ln I exceeds that of the quadratic power law, 2 ln(z_hi / z_lo).
GrowthFit classify_growth(std::span<const double> z, std::span<const double> intensity,
                          double z_lo, double z_hi);

/// <a+_0 a_0>(z) from the degenerate moment equations (gamma is ignored and
/// taken as 0), sampled every `sample_dz` from 0 to z_max.
std::vector<std::pair<double, double>> central_intensity(const SimParams& params, double z_max,
                                                         double sample_dz);

struct GrowthWindow {
  double z_lo = 2.0;
  double z_hi = 10.0;
};

GrowthFit classify_lattice_growth(const SimParams& params, GrowthWindow window = {});
GrowthFit classify_reduced_growth(const SimParams& params, GrowthWindow window = {});

struct ThresholdBracket {
  double below = 0.0;  ///< largest grid g classified sub-exponential
  double above = 0.0;  ///< smallest grid g classified exponential
  int evaluations = 0;
};

/// Bisection over the grid g_k = g_lo + k * resolution (g_lo must classify
/// sub-exponential, g_hi exponential). Throws InvalidParameter otherwise.
ThresholdBracket bisect_threshold(const std::function<GrowthClass(double)>& classify,
                                  double g_lo, double g_hi, double resolution);

}  // namespace wgarray
