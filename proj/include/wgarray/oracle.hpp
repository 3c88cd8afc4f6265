#pragma once

// Monte-Carlo reference for the averaged moment equations. For one
// realization of the pump phase the Heisenberg equations are linear, so the
// lattice evolves by an exact Bogoliubov map
//
//   b(z) = mu b(0) + nu b+(0)                          (degenerate)
//   b(z) = mu_b b(0) + nu_b c+(0),  c(z) = mu_c c(0) + nu_c b+(0)   (general)
//
// Vacuum input moments follow from (mu, nu) directly; averaging them over
// sampled Wiener phase paths gives an estimate of the averaged moments that
// is independent of the moment equations.

#include <cstdint>
#include <span>
#include <vector>

#include "wgarray/moments.hpp"

namespace wgarray {

/// Wiener phase on the half-step grid z_k = k * dz / 2, k = 0..2*steps, so
/// that RK4 midpoints see sampled values. Increments are Normal(0, 2 gamma dz/2).
struct PhasePath {
  double dz = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> phi;

  long steps() const { return static_cast<long>(phi.size() / 2); }
  double z_max() const { return static_cast<double>(steps()) * dz; }
  double at_half_step(long k) const { return phi[static_cast<std::size_t>(k)]; }
};

/// std::mt19937_64 seeded with `seed`; gamma = 0 gives phi = 0 exactly.
PhasePath sample_phase_path(double gamma, double dz, double z_max, std::uint64_t seed);

/// Seed of realization `index` in an ensemble with base seed `base`
/// (splitmix64 of base + (index + 1) * 0x9E3779B97F4A7C15).
std::uint64_t path_seed(std::uint64_t base, std::uint64_t index);

struct ModePropagator {
  CMatrix mu;
  CMatrix nu;
};

struct BogoliubovPropagator {
  MomentSystem system = MomentSystem::Degenerate;
  ModePropagator signal;  ///< b modes
  ModePropagator idler;   ///< c modes (general system only)
  double z = 0.0;
};

/// RK4 integration of the propagator ODEs along the whole path. params.dz
/// must equal path.dz. Throws NumericalFailure when the symplectic defect
/// exceeds 1e-6 times
/// max(1, |mu|_F^2 / N).
BogoliubovPropagator propagate_bogoliubov(const PhasePath& path, const SimParams& params);

/// Largest violation of the bosonic commutation relations preserved by the map.
double symplectic_defect(const BogoliubovPropagator& prop);

/// Vacuum-input moments of one realization, dressed with phi = phi(z_end).
AnyMoments realization_moments(const BogoliubovPropagator& prop, double phi);

struct EnsembleEstimate {
  AnyMoments mean;
  std::vector<Eigen::MatrixXd> std_error;  ///< per matrix, in kNames order
  std::size_t paths = 0;
};

struct EnsembleOptions {
  std::size_t paths = 1000;
  std::uint64_t seed = 1;
  double z_end = 10.0;
  unsigned workers = 1;
  std::size_t chunk = 32;  ///< realizations per reduction chunk; fixes the summation order
};

/// Ensemble mean and standard error over the given paths (at least 2).
EnsembleEstimate ensemble_moments(std::span<const PhasePath> paths, const SimParams& params,
                                  unsigned workers = 1);

/// Same estimate with path i drawn from path_seed(options.seed, i) on the
/// fly. Bit-identical for identical options regardless of `workers`.
EnsembleEstimate ensemble_moments(const SimParams& params, const EnsembleOptions& options);

}  // namespace wgarray
