#pragma once

// Two-mode Gaussian covariance matrices and logarithmic negativity, plus the
// lattice-level analyses built on them (pair maps, stationary values,
// survival distances, global purity).
//
// Quadratures are q = (a + a+)/sqrt(2), p = i(a+ - a)/sqrt(2); the vacuum
// has variance 1/2.

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "wgarray/moments.hpp"

namespace wgarray {

/// Second moments of a zero-mean two-mode state (modes a and b).
struct PairMoments {
  cplx number_a{};     ///< <a+ a>
  cplx number_b{};     ///< <b+ b>
  cplx hopping{};      ///< <a+ b>
  cplx anomalous{};    ///< <a b>
  cplx self_a{};       ///< <a a>
  cplx self_b{};       ///< <b b>
};

/// 4x4 covariance matrix in (q_a, p_a, q_b, p_b) ordering.
struct CovMat4 {
  Eigen::Matrix4d sigma = Eigen::Matrix4d::Identity() * 0.5;

  Eigen::Matrix2d alpha() const { return sigma.topLeftCorner<2, 2>(); }
  Eigen::Matrix2d beta() const { return sigma.bottomRightCorner<2, 2>(); }
  Eigen::Matrix2d gamma() const { return sigma.topRightCorner<2, 2>(); }
};

struct SymplecticInvariants {
  double a_det = 0.0;      ///< det alpha
  double b_det = 0.0;      ///< det beta
  double c_det = 0.0;      ///< det gamma
  double sigma_det = 0.0;  ///< det sigma
};

/// Moments of the pair (guide m, guide n). Degenerate: both modes are the
/// single signal mode of their guide, m != n required. General: a is the +w
/// mode of guide m and b the -w mode of guide n (m == n allowed).
PairMoments pair_moments(const DegenerateMoments& state, int m, int n);
PairMoments pair_moments(const GeneralMoments& state, int m, int n);

/// Symmetrized quadrature covariance. Throws InvariantViolation when the
/// result is not a physical covariance matrix.
CovMat4 covariance_from_moments(const PairMoments& moments);

SymplecticInvariants symplectic_invariants(const CovMat4& cov);

/// Symplectic eigenvalues (nu_minus, nu_plus) of sigma itself.
std::pair<double, double> symplectic_eigenvalues(const CovMat4& cov);

/// Smallest symplectic eigenvalue of the partially transposed sigma.
double transposed_nu_minus(const CovMat4& cov);

/// E_N = max(0, -log2(2 nu~_-)). Throws InvariantViolation for a
/// non-physical sigma or NaN input.
double log_negativity(const CovMat4& cov);

struct EntanglementMap {
  Eigen::MatrixXd values;  ///< entry (m + M, n + M) is E_N of pair (m, n)
  MomentSystem system = MomentSystem::Degenerate;
  double z = 0.0;

  int half_width() const { return static_cast<int>(values.rows()) / 2; }
  double at(int m, int n) const { return values(m + half_width(), n + half_width()); }
};

/// E_N for every pair. Degenerate maps leave the diagonal at zero; general
/// maps include the signal-idler pair of each guide.
EntanglementMap entanglement_map(const DegenerateMoments& state);
EntanglementMap entanglement_map(const GeneralMoments& state);

/// E_N of a single pair, without building the full map.
double pair_log_negativity(const DegenerateMoments& state, int m, int n);
double pair_log_negativity(const GeneralMoments& state, int m, int n);

struct SitePair {
  int m = 1;
  int n = -1;
};

struct StationaryOptions {
  double plateau_tol = 1e-4;  ///< relative spread allowed across the window
  double window = 1.0;        ///< plateau window length (units of 1/c_s)
  double probe = 0.05;        ///< sampling interval of E_N along z
  double z_min = 2.0;         ///< earliest distance a plateau may be declared
  double z_max = 60.0;
};

struct StationaryResult {
  bool converged = false;
  bool above_threshold = false;  ///< g >= 2 c_s; no plateau is expected
  double value = 0.0;            ///< plateau value, or last value when not converged
  double z_reached = 0.0;
};

/// Evolves from vacuum (gamma must be 0) until E_N of `pair` stops changing.
StationaryResult stationary_logneg(const SimParams& params, SitePair pair,
                                   const StationaryOptions& options = {});

struct SurvivalOptions {
  double eps = 1e-4;      ///< E_N at or below eps counts as zero
  double probe = 0.05;
  double hold = 5.0;      ///< E_N must stay <= eps this long before stopping
  double z_max = 200.0;
};

struct SurvivalResult {
  std::optional<double> z_tilde;  ///< empty means unbounded within z_max
  double peak = 0.0;
  double z_peak = 0.0;
  double z_reached = 0.0;
  std::vector<std::pair<double, double>> trace;  ///< (z, E_N) samples
};

/// Largest z at which E_N(pair) exceeds eps under pump phase noise.
SurvivalResult survival_distance(const SimParams& params, SitePair pair,
                                 const SurvivalOptions& options = {});

/// Full covariance matrix of all modes in (q_1, p_1, q_2, p_2, ...) ordering,
/// from the normal-ordered matrix N[j,k] = <a+_j a_k> and the anomalous
/// matrix A[j,k] = <a_j a_k>.
Eigen::MatrixXd full_covariance(const CMatrix& number, const CMatrix& anomalous);

/// Symplectic spectrum (ascending, one value per mode) of a covariance matrix.
Eigen::VectorXd symplectic_spectrum(const Eigen::MatrixXd& sigma);

/// max_k |nu_k - 1/2| over the symplectic spectrum of all modes. Zero for a
/// pure Gaussian state.
double global_purity_check(const DegenerateMoments& state);
double global_purity_check(const GeneralMoments& state);

}  // namespace wgarray
