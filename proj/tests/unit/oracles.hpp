#pragma once

// Test-only reference computations, deliberately built on routes that the
// library does not use (matrix exponentials, power series, general
// eigen-solvers).

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>
#include <algorithm>
#include <cmath>
#include <complex>
#include <random>

namespace oracle {

using cplx = std::complex<double>;

/// Exact coherent-pump Bogoliubov map exp(G z) of the 2N-dimensional
/// (b, b+) system; returns the vacuum-input moments <b+_m b_n>, <b_m b_n>.
struct LatticeMoments {
  Eigen::MatrixXcd number;
  Eigen::MatrixXcd anomalous;
};

inline LatticeMoments coherent_lattice(int n_sites, double c_s, double g, double z) {
  const int n = n_sites;
  const int c = n / 2;
  Eigen::MatrixXcd gen = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
  const cplx i{0.0, 1.0};
  for (int k = 0; k + 1 < n; ++k) {
    gen(k, k + 1) = gen(k + 1, k) = i * c_s;
    gen(n + k, n + k + 1) = gen(n + k + 1, n + k) = -i * c_s;
  }
  gen(c, n + c) = i * g;
  gen(n + c, c) = -i * g;
  const Eigen::MatrixXcd u = (gen * z).exp();
  const Eigen::MatrixXcd mu = u.topLeftCorner(n, n);
  const Eigen::MatrixXcd nu = u.topRightCorner(n, n);
  return {nu.conjugate() * nu.transpose(), mu * nu.transpose()};
}

/// J_n(x) by direct power series in long double.
inline double bessel_series(int order, double x) {
  long double half = 0.5L * x;
  long double term = 1.0L;
  for (int k = 1; k <= order; ++k) term *= half / k;
  long double sum = term;
  for (int k = 1; k < 400; ++k) {
    term *= -(half * half) / (static_cast<long double>(k) * (k + order));
    sum += term;
    if (std::fabs(static_cast<double>(term)) < 1e-22) break;
  }
  return static_cast<double>(sum);
}

/// Smallest symplectic eigenvalue of the partially transposed sigma
/// (p_b -> -p_b), from the spectrum of Omega * sigma~ by a general
/// eigen-solver.
inline double brute_force_transposed_nu(const Eigen::Matrix4d& sigma) {
  Eigen::Matrix4d flip = Eigen::Matrix4d::Identity();
  flip(3, 3) = -1.0;
  const Eigen::Matrix4d st = flip * sigma * flip;
  Eigen::Matrix4d omega = Eigen::Matrix4d::Zero();
  omega(0, 1) = omega(2, 3) = 1.0;
  omega(1, 0) = omega(3, 2) = -1.0;
  Eigen::EigenSolver<Eigen::Matrix4d> es(omega * st);
  double lo = 1e300;
  for (int k = 0; k < 4; ++k) lo = std::min(lo, std::abs(es.eigenvalues()(k)));
  return lo;
}

inline double brute_force_log_negativity(const Eigen::Matrix4d& sigma) {
  return std::max(0.0, -std::log2(2.0 * brute_force_transposed_nu(sigma)));
}

/// Random physical two-mode covariance matrix: S diag(nu1,nu1,nu2,nu2) S^T
/// with S a product of random symplectic two-mode squeezers, beam splitters,
/// local squeezers and phase rotations; nu_k >= 1/2.
inline Eigen::Matrix4d random_physical_sigma(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto rot = [](double t) {
    Eigen::Matrix2d r;
    r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    return r;
  };
  auto local = [&](double t1, double t2) {
    Eigen::Matrix4d s = Eigen::Matrix4d::Zero();
    s.topLeftCorner<2, 2>() = rot(t1);
    s.bottomRightCorner<2, 2>() = rot(t2);
    return s;
  };
  auto squeeze = [&](double r1, double r2) {
    Eigen::Matrix4d s = Eigen::Matrix4d::Zero();
    s(0, 0) = std::exp(-r1);
    s(1, 1) = std::exp(r1);
    s(2, 2) = std::exp(-r2);
    s(3, 3) = std::exp(r2);
    return s;
  };
  auto splitter = [](double t) {
    Eigen::Matrix4d s = Eigen::Matrix4d::Zero();
    const double c = std::cos(t), sn = std::sin(t);
    s(0, 0) = s(1, 1) = s(2, 2) = s(3, 3) = c;
    s(0, 2) = s(1, 3) = sn;
    s(2, 0) = s(3, 1) = -sn;
    return s;
  };
  const double two_pi = 2.0 * M_PI;
  Eigen::Matrix4d S = local(two_pi * u(rng), two_pi * u(rng)) *
                      squeeze(1.5 * (u(rng) - 0.5), 1.5 * (u(rng) - 0.5)) *
                      splitter(two_pi * u(rng)) * local(two_pi * u(rng), two_pi * u(rng)) *
                      squeeze(1.5 * (u(rng) - 0.5), 1.5 * (u(rng) - 0.5)) *
                      splitter(two_pi * u(rng));
  const double nu1 = 0.5 + (u(rng) < 0.3 ? 0.0 : 2.0 * u(rng));
  const double nu2 = 0.5 + (u(rng) < 0.3 ? 0.0 : 2.0 * u(rng));
  Eigen::Matrix4d d = Eigen::Matrix4d::Zero();
  d(0, 0) = d(1, 1) = nu1;
  d(2, 2) = d(3, 3) = nu2;
  Eigen::Matrix4d sigma = S * d * S.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

}  // namespace oracle
