#pragma once

// Averaged second-moment state of the waveguide lattice and its linear
// evolution equations along the propagation distance z.
//
// All moment matrices are dense N x N complex matrices indexed by
// (m + M, n + M) for sites m, n in [-M, M]. The pump phase phi is a Wiener
// process in z; phase-dressed moments carry exp(i k phi(z)) inside the
// ensemble average, which turns into a damping rate k^2 * gamma.

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <string_view>
#include <variant>

#include "wgarray/params.hpp"

namespace wgarray {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

template <std::size_t K>
struct MomentSet {
  static constexpr std::size_t kCount = K;

  std::array<CMatrix, K> mats;
  double z = 0.0;

  int sites() const { return static_cast<int>(mats[0].rows()); }
  int half_width() const { return sites() / 2; }

  bool all_finite() const {
    for (const auto& m : mats) {
      if (!m.allFinite()) return false;
    }
    return true;
  }

  void resize(int n) {
    for (auto& m : mats) m.setZero(n, n);
  }
};

/// Degenerate (zero sideband) moments:
///   q11 = <b+_m b_n>            q12 = <b_m b_n e^{-i phi}>
///   q21 = <b_m b_n>             q22 = <b+_m b_n e^{i phi}>
///   q23 = <b+_m b+_n e^{2 i phi}>
struct DegenerateMoments : MomentSet<5> {
  static constexpr MomentSystem kSystem = MomentSystem::Degenerate;
  static constexpr std::array<std::string_view, 5> kNames{"q11", "q12", "q21", "q22", "q23"};

  CMatrix& q11() { return mats[0]; }
  CMatrix& q12() { return mats[1]; }
  CMatrix& q21() { return mats[2]; }
  CMatrix& q22() { return mats[3]; }
  CMatrix& q23() { return mats[4]; }
  const CMatrix& q11() const { return mats[0]; }
  const CMatrix& q12() const { return mats[1]; }
  const CMatrix& q21() const { return mats[2]; }
  const CMatrix& q22() const { return mats[3]; }
  const CMatrix& q23() const { return mats[4]; }
};

/// General (signal b at +w, idler c at -w) moments:
///   u11 = <b+_m b_n>   u12 = <c+_m c_n>   u13 = <b_m c_n e^{-i phi}>
///   u21 = <b_m c_n>    u22 = <b+_m b_n e^{i phi}>   u23 = <c+_m c_n e^{i phi}>
///   u24 = <b+_m c+_n e^{2 i phi}>
/// <b_m b_n>, <c_m c_n>, <b+_m c_n> vanish identically from vacuum and are
/// not stored.
struct GeneralMoments : MomentSet<7> {
  static constexpr MomentSystem kSystem = MomentSystem::General;
  static constexpr std::array<std::string_view, 7> kNames{"u11", "u12", "u13", "u21",
                                                          "u22", "u23", "u24"};

  CMatrix& u11() { return mats[0]; }
  CMatrix& u12() { return mats[1]; }
  CMatrix& u13() { return mats[2]; }
  CMatrix& u21() { return mats[3]; }
  CMatrix& u22() { return mats[4]; }
  CMatrix& u23() { return mats[5]; }
  CMatrix& u24() { return mats[6]; }
  const CMatrix& u11() const { return mats[0]; }
  const CMatrix& u12() const { return mats[1]; }
  const CMatrix& u13() const { return mats[2]; }
  const CMatrix& u21() const { return mats[3]; }
  const CMatrix& u22() const { return mats[4]; }
  const CMatrix& u23() const { return mats[5]; }
  const CMatrix& u24() const { return mats[6]; }
};

template <class T>
concept MomentState = std::same_as<T, DegenerateMoments> || std::same_as<T, GeneralMoments>;

using AnyMoments = std::variant<DegenerateMoments, GeneralMoments>;

/// All-zero moments at z = 0 for the system selected by params.system.
AnyMoments initial_vacuum(const SimParams& params);

template <MomentState State>
State vacuum(const SimParams& params) {
  params.validate();
  State s;
  s.resize(params.n_sites);
  s.z = 0.0;
  return s;
}

/// d(state)/dz evaluated at distance z, written into `out` (resized as needed).
/// Throws InvalidParameter when the state size does not match params.n_sites.
void rhs_degenerate(const DegenerateMoments& state, double z, const SimParams& params,
                    DegenerateMoments& out);
void rhs_general(const GeneralMoments& state, double z, const SimParams& params,
                 GeneralMoments& out);

DegenerateMoments rhs_degenerate(const DegenerateMoments& state, const SimParams& params);
GeneralMoments rhs_general(const GeneralMoments& state, const SimParams& params);

inline void rhs(const DegenerateMoments& s, double z, const SimParams& p, DegenerateMoments& out) {
  rhs_degenerate(s, z, p, out);
}
inline void rhs(const GeneralMoments& s, double z, const SimParams& p, GeneralMoments& out) {
  rhs_general(s, z, p, out);
}

/// Scoped flush-to-zero for subnormal doubles on the calling thread. The
/// moments decay super-exponentially outside the light cone and subnormal
/// arithmetic there is very slow on x86.
class FlushDenormals {
 public:
  FlushDenormals();
  ~FlushDenormals();
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;

 private:
  unsigned saved_ = 0;
};

/// Classical RK4 with a reusable workspace. Source terms carrying
/// exp(-gamma z) are evaluated at z, z + dz/2 and z + dz.
///
/// With `windowed`, only the square block of sites around the pumped guide
/// that the light cone has reached is updated. The block grows by
/// kWindowPad sites whenever any entry on its edge exceeds
/// kWindowTolerance relative to the central entries; everything outside is
/// exactly zero. A stepper follows one trajectory; call reset() before
/// stepping an unrelated state.
template <MomentState State>
class Rk4Stepper {
 public:
  static constexpr long kWindowPad = 8;
  static constexpr double kWindowTolerance = 1e-20;

  explicit Rk4Stepper(const SimParams& params, bool windowed = true);

  void step(State& state);
  void reset();
  const SimParams& params() const { return params_; }
  /// Half-width of the active block, -1 before the first step.
  long window_half_width() const { return lo_ < 0 ? -1 : static_cast<long>(params_.half_width() - lo_); }

 private:
  void init_window(const State& y);
  void grow_window(const State& y);

  SimParams params_;
  bool windowed_;
  Eigen::Index lo_ = -1, hi_ = -1;
  State k_, acc_, tmp_;
};

template <MomentState State>
State rk4_step(const State& state, const SimParams& params) {
  Rk4Stepper<State> stepper(params);
  State next = state;
  stepper.step(next);
  return next;
}

template <MomentState State>
using Observer = std::function<void(const State&)>;

/// Advances `state` to z_target with round((z_target - z) / dz) steps.
/// The observer (if any) sees the initial state, every `sample_every` steps,
/// and the final state. Throws NumericalFailure on non-finite values.
template <MomentState State>
State evolve(State state, const SimParams& params, double z_target,
             const Observer<State>& observer = {}, long sample_every = 0);

/// Mean photon number per site, <a+_n a_n>, as a length-N vector ordered
/// from site -M to M. Throws InvariantViolation on a non-real diagonal.
Eigen::VectorXd photon_number_profile(const DegenerateMoments& state);
Eigen::VectorXd photon_number_profile(const GeneralMoments& state);

/// Maximum relative deviations from the structural invariants of a state.
struct InvariantReport {
  double hermiticity = 0.0;  ///< q11 (u11, u12) vs. adjoint
  double symmetry = 0.0;     ///< q12, q21, q23 vs. transpose (degenerate only)
  double reflection = 0.0;   ///< X[m,n] vs. X[-m,-n], all matrices
  double redundancy = 0.0;   ///< gamma = 0 identities between dressed and bare moments
};

InvariantReport audit(const DegenerateMoments& state);
InvariantReport audit(const GeneralMoments& state);

}  // namespace wgarray
