#pragma once

// Central-guide reduction: eliminating every guide except the pumped one
// leaves a parametric oscillator with a memory term
//
//   a0'(z) = -2 c_s * int_0^z K(z - z') a0(z') dz' + i g e^{i phi} a0+ + F(z),
//   K(x)   = J0(2 c_s x) + J2(2 c_s x).
//
// F collects the initial amplitudes of the non-central guides, so it
// vanishes for a classical initial condition localized at the centre. The
// functions here work with that classical c-number surrogate.

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "wgarray/params.hpp"

namespace wgarray {

/// Bessel function of the first kind J_order(x) for 0 <= order <= 64 and
/// 0 <= x <= 1e4. Power series for small x, Miller's normalized downward
/// recurrence otherwise. Throws InvalidParameter outside that range.
double bessel_j(int order, double x);

struct MemoryKernel {
  double c_s = 1.0;
  double operator()(double x) const;
};

/// Classical lattice amplitudes a_n(z) with a_n' = i c_s (a_{n-1} + a_{n+1}),
/// a_n(0) = delta_{n0}, open boundaries. Entry n + M of the result is site n.
/// params.g is ignored (the identity check is a g = 0 statement).
Eigen::VectorXcd lattice_amplitude_green(const SimParams& params, double z);

/// Central amplitude a0 and its exact derivative i c_s (a_{-1} + a_1) on the
/// uniform grid z_k = k * dz, k = 0..round(z_max/dz).
struct GreenTrajectory {
  double dz = 0.0;
  std::vector<std::complex<double>> a0;
  std::vector<std::complex<double>> da0;
};

GreenTrajectory lattice_green_trajectory(const SimParams& params, double z_max);

/// max_k |a0'(z_k) + 2 c_s int_0^{z_k} K(z_k - z') a0(z') dz'| with the
/// convolution by the trapezoidal rule on the stored trajectory.
double memory_identity_residual(const SimParams& params, double z_max);

struct ReducedTrajectory {
  double dz = 0.0;
  std::vector<std::complex<double>> a0;

  double z(std::size_t k) const { return static_cast<double>(k) * dz; }
  std::vector<double> intensity() const;  ///< |a0(z_k)|^2
};

/// Integrates a0' = -2 c_s (K * a0)(z) + i g conj(a0), a0(0) = 1, with the
/// implicit trapezoidal rule (the convolution uses the same trapezoid).
/// Requires gamma = 0. Throws NumericalFailure on non-finite values.
ReducedTrajectory reduced_parametric_growth(const SimParams& params, double z_max);

/// Classical full-lattice counterpart of reduced_parametric_growth:
/// a_n' = i c_s (a_{n-1} + a_{n+1}) + i g delta_{n0} conj(a_n), a_n(0) = delta_{n0},
/// RK4 on the lattice. Returns a0 on the grid z_k = k * dz.
std::vector<std::complex<double>> lattice_parametric_amplitude(const SimParams& params,
                                                               double z_max);

}  // namespace wgarray
