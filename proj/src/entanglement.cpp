#include "wgarray/entanglement.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>

#include "wgarray/errors.hpp"

namespace wgarray {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Cross block <{xi_a, xi_b}>/2 for commuting modes a, b with
// K = <a b> and L = <a+ b>.
Eigen::Matrix2d cross_block(cplx K, cplx L) {
  Eigen::Matrix2d g;
  g << K.real() + L.real(), K.imag() + L.imag(),
       K.imag() - L.imag(), L.real() - K.real();
  return g;
}

Eigen::Matrix2d local_block(cplx number, cplx self) {
  Eigen::Matrix2d a;
  const double n = number.real();
  a << n + 0.5 + self.real(), self.imag(),
       self.imag(), n + 0.5 - self.real();
  return a;
}

double scale_of(const Eigen::Matrix4d& s) { return std::max(1.0, s.cwiseAbs().maxCoeff()); }

// Roundoff allowance on a symplectic eigenvalue of a matrix with entries of
// size `scale`.
double nu_tolerance(double scale) { return 1e-9 + 64.0 * kEps * scale; }

// Symplectic eigenvalues (nu_-, nu_+) as the singular values of
// sqrt(s) Omega sqrt(s). Absolute error stays at roundoff times |s|, while the
// determinant route loses the small root for strongly squeezed states.
std::pair<double, double> symplectic_pair(const Eigen::Matrix4d& s, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(s);
  if (es.info() != Eigen::Success || !(es.eigenvalues().minCoeff() > 0.0)) {
    throw InvariantViolation(std::string(what) + ": covariance matrix is not positive definite");
  }
  const Eigen::Matrix4d root = es.operatorSqrt();
  Eigen::Matrix4d omega = Eigen::Matrix4d::Zero();
  omega(0, 1) = omega(2, 3) = 1.0;
  omega(1, 0) = omega(3, 2) = -1.0;
  const Eigen::Matrix4d a = root * omega * root;
  const Eigen::Vector4d sv = Eigen::JacobiSVD<Eigen::Matrix4d>(a).singularValues();
  return {0.5 * (sv(2) + sv(3)), 0.5 * (sv(0) + sv(1))};
}

void require_physical(const CovMat4& cov) {
  const auto& s = cov.sigma;
  if (!s.allFinite()) throw InvariantViolation("covariance matrix has non-finite entries");
  const double scale = scale_of(s);
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw InvariantViolation("covariance matrix is not symmetric");
  }
  for (int k = 0; k < 4; ++k) {
    if (!(s(k, k) > 0.0)) throw InvariantViolation("covariance matrix has a non-positive diagonal");
  }
  const double nu_minus = symplectic_pair(s, "covariance matrix").first;
  if (nu_minus < 0.5 - nu_tolerance(scale)) {
    throw InvariantViolation("covariance matrix violates the uncertainty principle (nu_- = " +
                             std::to_string(nu_minus) + ")");
  }
}

void check_site(int half, int site) {
  if (site < -half || site > half) {
    throw std::out_of_range("site " + std::to_string(site) + " outside [-" + std::to_string(half) +
                            ", " + std::to_string(half) + "]");
  }
}

}  // namespace

PairMoments pair_moments(const DegenerateMoments& state, int m, int n) {
  const int half = state.half_width();
  check_site(half, m);
  check_site(half, n);
  if (m == n) {
    throw std::invalid_argument("degenerate self-pair (m == n) has no two-mode entanglement");
  }
  const int i = m + half;
  const int j = n + half;
  PairMoments p;
  p.number_a = state.q11()(i, i);
  p.number_b = state.q11()(j, j);
  p.hopping = state.q11()(i, j);
  p.anomalous = state.q21()(i, j);
  p.self_a = state.q21()(i, i);
  p.self_b = state.q21()(j, j);
  return p;
}

PairMoments pair_moments(const GeneralMoments& state, int m, int n) {
  const int half = state.half_width();
  check_site(half, m);
  check_site(half, n);
  const int i = m + half;
  const int j = n + half;
  PairMoments p;
  p.number_a = state.u11()(i, i);
  p.number_b = state.u12()(j, j);
  p.anomalous = state.u21()(i, j);
  return p;
}

CovMat4 covariance_from_moments(const PairMoments& mo) {
  CovMat4 cov;
  cov.sigma.topLeftCorner<2, 2>() = local_block(mo.number_a, mo.self_a);
  cov.sigma.bottomRightCorner<2, 2>() = local_block(mo.number_b, mo.self_b);
  const Eigen::Matrix2d g = cross_block(mo.anomalous, mo.hopping);
  cov.sigma.topRightCorner<2, 2>() = g;
  cov.sigma.bottomLeftCorner<2, 2>() = g.transpose();
  require_physical(cov);
  return cov;
}

SymplecticInvariants symplectic_invariants(const CovMat4& cov) {
  SymplecticInvariants inv;
  inv.a_det = cov.alpha().determinant();
  inv.b_det = cov.beta().determinant();
  inv.c_det = cov.gamma().determinant();
  inv.sigma_det = cov.sigma.determinant();
  return inv;
}

std::pair<double, double> symplectic_eigenvalues(const CovMat4& cov) {
  return symplectic_pair(cov.sigma, "symplectic spectrum");
}

double transposed_nu_minus(const CovMat4& cov) {
  // p_b -> -p_b
  Eigen::Matrix4d flipped = cov.sigma;
  flipped.row(3) *= -1.0;
  flipped.col(3) *= -1.0;
  return symplectic_pair(flipped, "partial transpose").first;
}

double log_negativity(const CovMat4& cov) {
  if (!cov.sigma.allFinite()) throw InvariantViolation("log_negativity: NaN in covariance matrix");
  require_physical(cov);
  const double nu = transposed_nu_minus(cov);
  if (nu <= 0.0) throw InvariantViolation("log_negativity: vanishing symplectic eigenvalue");
  return std::max(0.0, -std::log2(2.0 * nu));
}

double pair_log_negativity(const DegenerateMoments& state, int m, int n) {
  return log_negativity(covariance_from_moments(pair_moments(state, m, n)));
}

double pair_log_negativity(const GeneralMoments& state, int m, int n) {
  return log_negativity(covariance_from_moments(pair_moments(state, m, n)));
}

EntanglementMap entanglement_map(const DegenerateMoments& state) {
  const int N = state.sites();
  const int half = state.half_width();
  EntanglementMap map;
  map.system = MomentSystem::Degenerate;
  map.z = state.z;
  map.values = Eigen::MatrixXd::Zero(N, N);
  for (int i = 0; i < N; ++i) {
    for (int j = i + 1; j < N; ++j) {
      const double e = pair_log_negativity(state, i - half, j - half);
      map.values(i, j) = e;
      map.values(j, i) = e;
    }
  }
  return map;
}

EntanglementMap entanglement_map(const GeneralMoments& state) {
  const int N = state.sites();
  const int half = state.half_width();
  EntanglementMap map;
  map.system = MomentSystem::General;
  map.z = state.z;
  map.values.resize(N, N);
  for (int j = 0; j < N; ++j) {
    for (int i = 0; i < N; ++i) {
      map.values(i, j) = pair_log_negativity(state, i - half, j - half);
    }
  }
  return map;
}

namespace {

template <MomentState State>
StationaryResult stationary_impl(const SimParams& params, SitePair pair,
                                 const StationaryOptions& opt) {
  StationaryResult result;
  if (params.g >= 2.0 * params.c_s) {
    result.above_threshold = true;
    result.value = std::numeric_limits<double>::quiet_NaN();
    return result;
  }
  State state = vacuum<State>(params);
  if (params.g == 0.0) {
    result.converged = true;
    return result;
  }
  Rk4Stepper<State> stepper(params);
  const long probe_steps = std::max(1L, std::lround(opt.probe / params.dz));
  const long max_steps = std::lround(opt.z_max / params.dz);
  std::deque<std::pair<double, double>> window;

  for (long k = probe_steps; k <= max_steps; k += probe_steps) {
    for (long s = 0; s < probe_steps; ++s) stepper.step(state);
    state.z = static_cast<double>(k) * params.dz;
    if (!state.all_finite()) throw NumericalFailure("non-finite moments in stationary_logneg");
    const double e = pair_log_negativity(state, pair.m, pair.n);
    window.emplace_back(state.z, e);
    // keep exactly one sample at or before z - window
    while (window.size() > 2 && window[1].first <= state.z - opt.window + 1e-9) {
      window.pop_front();
    }
    result.value = e;
    result.z_reached = state.z;
    if (state.z < opt.z_min || window.front().first > state.z - opt.window + 1e-9) continue;
    double lo = e, hi = e;
    for (const auto& [zz, v] : window) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo <= opt.plateau_tol * std::abs(e) + 1e-14) {
      result.converged = true;
      return result;
    }
  }
  return result;
}

template <MomentState State>
SurvivalResult survival_impl(const SimParams& params, SitePair pair, const SurvivalOptions& opt) {
  SurvivalResult result;
  if (params.gamma == 0.0) return result;  // coherent pump: the plateau never decays

  State state = vacuum<State>(params);
  Rk4Stepper<State> stepper(params);
  const long probe_steps = std::max(1L, std::lround(opt.probe / params.dz));
  const long max_steps = std::lround(opt.z_max / params.dz);

  bool seen = false;
  double last_above = 0.0;
  double prev_z = 0.0;
  double prev_e = 0.0;
  result.trace.emplace_back(0.0, 0.0);

  for (long k = probe_steps; k <= max_steps; k += probe_steps) {
    for (long s = 0; s < probe_steps; ++s) stepper.step(state);
    state.z = static_cast<double>(k) * params.dz;
    if (!state.all_finite()) throw NumericalFailure("non-finite moments in survival_distance");
    const double e = pair_log_negativity(state, pair.m, pair.n);
    result.trace.emplace_back(state.z, e);
    result.z_reached = state.z;
    if (e > result.peak) {
      result.peak = e;
      result.z_peak = state.z;
    }
    if (e > opt.eps) {
      seen = true;
      last_above = state.z;
    } else if (seen && prev_e > opt.eps) {
      // linear interpolation of the downward crossing
      last_above = prev_z + (state.z - prev_z) * (prev_e - opt.eps) / (prev_e - e);
    }
    prev_z = state.z;
    prev_e = e;
    if (seen && e <= opt.eps && state.z - last_above >= opt.hold) {
      result.z_tilde = last_above;
      return result;
    }
  }
  if (!seen) {
    result.z_tilde = 0.0;
  } else if (prev_e <= opt.eps) {
    result.z_tilde = last_above;
  }
  return result;
}

}  // namespace

StationaryResult stationary_logneg(const SimParams& params, SitePair pair,
                                   const StationaryOptions& options) {
  params.validate();
  if (params.gamma != 0.0) {
    throw InvalidParameter("stationary_logneg requires a coherent pump (gamma = 0)");
  }
  if (params.system == MomentSystem::Degenerate) {
    return stationary_impl<DegenerateMoments>(params, pair, options);
  }
  return stationary_impl<GeneralMoments>(params, pair, options);
}

SurvivalResult survival_distance(const SimParams& params, SitePair pair,
                                 const SurvivalOptions& options) {
  params.validate();
  if (!(options.eps > 0.0)) throw InvalidParameter("survival_distance: eps must be > 0");
  if (params.system == MomentSystem::Degenerate) {
    return survival_impl<DegenerateMoments>(params, pair, options);
  }
  return survival_impl<GeneralMoments>(params, pair, options);
}

Eigen::MatrixXd full_covariance(const CMatrix& number, const CMatrix& anomalous) {
  const Eigen::Index modes = number.rows();
  Eigen::MatrixXd sigma(2 * modes, 2 * modes);
  for (Eigen::Index j = 0; j < modes; ++j) {
    for (Eigen::Index k = 0; k < modes; ++k) {
      Eigen::Matrix2d block = cross_block(anomalous(j, k), number(j, k));
      if (j == k) block += 0.5 * Eigen::Matrix2d::Identity();
      sigma.block<2, 2>(2 * j, 2 * k) = block;
    }
  }
  // symmetrize away the roundoff difference between (j,k) and (k,j) blocks
  return 0.5 * (sigma + sigma.transpose());
}

Eigen::VectorXd symplectic_spectrum(const Eigen::MatrixXd& sigma) {
  const Eigen::Index dim = sigma.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sqrt_solver(sigma);
  if (sqrt_solver.eigenvalues().minCoeff() <= 0.0) {
    throw InvariantViolation("covariance matrix is not positive definite");
  }
  const Eigen::MatrixXd root = sqrt_solver.operatorSqrt();
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index k = 0; k < dim; k += 2) {
    omega(k, k + 1) = 1.0;
    omega(k + 1, k) = -1.0;
  }
  const Eigen::MatrixXcd h = cplx(0.0, 1.0) * (root * omega * root).cast<cplx>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h, Eigen::EigenvaluesOnly);
  // eigenvalues come in +-nu pairs, ascending; the upper half are the nu_k
  return solver.eigenvalues().tail(dim / 2);
}

double global_purity_check(const DegenerateMoments& state) {
  const Eigen::VectorXd nu = symplectic_spectrum(full_covariance(state.q11(), state.q21()));
  return (nu.array() - 0.5).abs().maxCoeff();
}

double global_purity_check(const GeneralMoments& state) {
  const Eigen::Index n = state.sites();
  CMatrix number = CMatrix::Zero(2 * n, 2 * n);
  CMatrix anomalous = CMatrix::Zero(2 * n, 2 * n);
  number.topLeftCorner(n, n) = state.u11();
  number.bottomRightCorner(n, n) = state.u12();
  anomalous.topRightCorner(n, n) = state.u21();
  anomalous.bottomLeftCorner(n, n) = state.u21().transpose();
  const Eigen::VectorXd nu = symplectic_spectrum(full_covariance(number, anomalous));
  return (nu.array() - 0.5).abs().maxCoeff();
}

}  // namespace wgarray
