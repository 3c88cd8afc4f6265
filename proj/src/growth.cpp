#include "wgarray/growth.hpp"

#include <cmath>
#include <limits>

#include "wgarray/errors.hpp"
#include "wgarray/moments.hpp"
#include "wgarray/reduced.hpp"

namespace wgarray {

GrowthFit classify_growth(std::span<const double> z, std::span<const double> intensity,
                          double z_lo, double z_hi) {
  if (z.size() != intensity.size()) throw InvalidParameter("classify_growth: size mismatch");
  if (!(z_hi > z_lo) || !(z_lo > 0.0)) throw InvalidParameter("classify_growth: bad window");

  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (z[k] < z_lo - 1e-12 || z[k] > z_hi + 1e-12) continue;
    const double x = z[k];
    const double y = std::log(std::max(intensity[k], std::numeric_limits<double>::min()));
    n += 1;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  if (n < 3) throw InvalidParameter("classify_growth: fewer than 3 samples in the window");

  const double vx = sxx - sx * sx / n;
  const double vy = syy - sy * sy / n;
  const double cxy = sxy - sx * sy / n;
  GrowthFit fit;
  fit.rate = cxy / vx;
  fit.r_squared = vy > 0.0 ? (cxy * cxy) / (vx * vy) : 1.0;
  fit.log_increase = fit.rate * (z_hi - z_lo);
  const bool fast = fit.log_increase > 2.0 * std::log(z_hi / z_lo);
  fit.growth = (fast && fit.r_squared >= 0.99) ? GrowthClass::Exponential
                                               : GrowthClass::SubExponential;
  return fit;
}

std::vector<std::pair<double, double>> central_intensity(const SimParams& params, double z_max,
                                                         double sample_dz) {
  SimParams p = params;
  p.gamma = 0.0;
  p.system = MomentSystem::Degenerate;
  p.validate();
  const long every = std::max(1L, std::lround(sample_dz / p.dz));
  const long c = p.half_width();
  std::vector<std::pair<double, double>> out;
  evolve<DegenerateMoments>(
      vacuum<DegenerateMoments>(p), p, z_max,
      [&](const DegenerateMoments& s) { out.emplace_back(s.z, s.q11()(c, c).real()); }, every);
  return out;
}

namespace {

GrowthFit fit_samples(const std::vector<double>& z, const std::vector<double>& intensity,
                      GrowthWindow w) {
  return classify_growth(z, intensity, w.z_lo, w.z_hi);
}

}  // namespace

GrowthFit classify_lattice_growth(const SimParams& params, GrowthWindow window) {
  const auto samples = central_intensity(params, window.z_hi, 0.05);
  std::vector<double> z, intensity;
  for (const auto& [zz, v] : samples) {
    z.push_back(zz);
    intensity.push_back(v);
  }
  return fit_samples(z, intensity, window);
}

GrowthFit classify_reduced_growth(const SimParams& params, GrowthWindow window) {
  SimParams p = params;
  p.gamma = 0.0;
  const ReducedTrajectory traj = reduced_parametric_growth(p, window.z_hi);
  const std::vector<double> intensity = traj.intensity();
  std::vector<double> z(intensity.size());
  for (std::size_t k = 0; k < z.size(); ++k) z[k] = traj.z(k);
  return fit_samples(z, intensity, window);
}

ThresholdBracket bisect_threshold(const std::function<GrowthClass(double)>& classify,
                                  double g_lo, double g_hi, double resolution) {
  if (!(resolution > 0.0) || !(g_hi > g_lo)) throw InvalidParameter("bisect_threshold: bad grid");
  long lo = 0;
  long hi = std::lround((g_hi - g_lo) / resolution);
  const auto at = [&](long k) { return g_lo + static_cast<double>(k) * resolution; };
  ThresholdBracket bracket;
  if (classify(at(lo)) != GrowthClass::SubExponential) {
    throw InvalidParameter("bisect_threshold: lower end already grows exponentially");
  }
  if (classify(at(hi)) != GrowthClass::Exponential) {
    throw InvalidParameter("bisect_threshold: upper end does not grow exponentially");
  }
  bracket.evaluations = 2;
  while (hi - lo > 1) {
    const long mid = (lo + hi) / 2;
    ++bracket.evaluations;
    if (classify(at(mid)) == GrowthClass::Exponential) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  bracket.below = at(lo);
  bracket.above = at(hi);
  return bracket;
}

}  // namespace wgarray
