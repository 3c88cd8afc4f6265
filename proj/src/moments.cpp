#include "wgarray/moments.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>
#include <type_traits>
#include <utility>
#include <vector>

#include "wgarray/errors.hpp"

#if defined(__SSE__) || defined(_M_X64)
#include <xmmintrin.h>
#define WGARRAY_HAS_MXCSR 1
#endif

namespace wgarray {
namespace {

constexpr cplx kI{0.0, 1.0};

// out[m,n] = -decay * x[m,n] + i * (ket * (x[m,n-1] + x[m,n+1]) + bra * (x[m-1,n] + x[m+1,n]))
// with real ket, bra. Sites outside the lattice contribute zero. Only rows
// and columns in [lo, hi] are written.
void hop(const CMatrix& x, double ket, double bra, double decay, CMatrix& out, Eigen::Index lo,
         Eigen::Index hi) {
  const Eigen::Index n = x.rows();
  thread_local std::vector<double> zeros;
  if (static_cast<Eigen::Index>(zeros.size()) < 2 * n + 4) zeros.assign(2 * n + 4, 0.0);
  const double* xd = reinterpret_cast<const double*>(x.data());
  double* od = reinterpret_cast<double*>(out.data());
  const Eigen::Index stride = 2 * n;

  auto site = [&](const double* xc, const double* left, const double* right, double* o,
                  Eigen::Index m) {
    double re = ket * (left[2 * m] + right[2 * m]);
    double im = ket * (left[2 * m + 1] + right[2 * m + 1]);
    if (m > 0) {
      re += bra * xc[2 * m - 2];
      im += bra * xc[2 * m - 1];
    }
    if (m + 1 < n) {
      re += bra * xc[2 * m + 2];
      im += bra * xc[2 * m + 3];
    }
    o[2 * m] = -decay * xc[2 * m] - im;
    o[2 * m + 1] = -decay * xc[2 * m + 1] + re;
  };

  const Eigen::Index in_lo = std::max<Eigen::Index>(lo, 1);
  const Eigen::Index in_hi = std::min<Eigen::Index>(hi, n - 2);
  for (Eigen::Index col = lo; col <= hi; ++col) {
    const double* xc = xd + col * stride;
    const double* left = col > 0 ? xc - stride : zeros.data();
    const double* right = col + 1 < n ? xc + stride : zeros.data();
    double* o = od + col * stride;
    if (lo < in_lo) site(xc, left, right, o, lo);
    for (Eigen::Index m = in_lo; m <= in_hi; ++m) {
      const double re = ket * (left[2 * m] + right[2 * m]) + bra * (xc[2 * m - 2] + xc[2 * m + 2]);
      const double im =
          ket * (left[2 * m + 1] + right[2 * m + 1]) + bra * (xc[2 * m - 1] + xc[2 * m + 3]);
      o[2 * m] = -decay * xc[2 * m] - im;
      o[2 * m + 1] = -decay * xc[2 * m + 1] + re;
    }
    if (hi > in_hi) site(xc, left, right, o, hi);
  }
}

template <MomentState State>
void check_shape(const State& s, const SimParams& p) {
  for (const auto& m : s.mats) {
    if (m.rows() != p.n_sites || m.cols() != p.n_sites) {
      throw InvalidParameter("moment matrix is " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()) + " but n_sites = " +
                             std::to_string(p.n_sites));
    }
  }
}

template <MomentState State>
void prepare(State& out, int n) {
  for (auto& m : out.mats) {
    if (m.rows() != n || m.cols() != n) m.resize(n, n);
  }
}

}  // namespace

FlushDenormals::FlushDenormals() {
#ifdef WGARRAY_HAS_MXCSR
  saved_ = _mm_getcsr();
  _mm_setcsr(saved_ | 0x8040u);  // FTZ | DAZ
#endif
}

FlushDenormals::~FlushDenormals() {
#ifdef WGARRAY_HAS_MXCSR
  _mm_setcsr(saved_);
#endif
}

namespace {

double max_abs(const CMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

double rel_dev(const CMatrix& a, const CMatrix& b) {
  const double scale = std::max(max_abs(a), max_abs(b));
  if (scale == 0.0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

double reflection_dev(const CMatrix& a) { return rel_dev(a, a.reverse()); }

}  // namespace

AnyMoments initial_vacuum(const SimParams& params) {
  if (params.system == MomentSystem::Degenerate) return vacuum<DegenerateMoments>(params);
  return vacuum<GeneralMoments>(params);
}

namespace {

// Derivative restricted to the square window [lo, hi] x [lo, hi]; entries of
// `out` outside the window are left untouched.
void rhs_window(const DegenerateMoments& s, double z, const SimParams& p, DegenerateMoments& out,
                Eigen::Index lo, Eigen::Index hi) {
  const cplx ig = kI * p.g;
  const double cs = p.c_s;
  const double gm = p.gamma;
  const cplx source = std::exp(-gm * z);
  const Eigen::Index c = p.half_width();
  const Eigen::Index len = hi - lo + 1;

  hop(s.q11(), cs, -cs, 0.0, out.q11(), lo, hi);
  hop(s.q12(), cs, cs, gm, out.q12(), lo, hi);
  hop(s.q21(), cs, cs, 0.0, out.q21(), lo, hi);
  hop(s.q22(), cs, -cs, gm, out.q22(), lo, hi);
  hop(s.q23(), -cs, -cs, 4.0 * gm, out.q23(), lo, hi);

  auto col = [&](const CMatrix& m) { return m.col(c).segment(lo, len); };
  auto row = [&](const CMatrix& m) { return m.row(c).segment(lo, len); };
  auto ocol = [&](CMatrix& m) { return m.col(c).segment(lo, len); };
  auto orow = [&](CMatrix& m) { return m.row(c).segment(lo, len); };

  // Pump terms act on the column n = 0 (delta_{0n}) and the row m = 0 (delta_{0m}).
  // q11' += ig d0n conj(q12[m,n]) - ig d0m q12[n,m]
  ocol(out.q11()) += ig * col(s.q12()).conjugate();
  orow(out.q11()) -= ig * col(s.q12()).transpose();
  // q12' += ig d0n q11[n,m] + ig d0m q11[m,n] + ig d0m d0n
  ocol(out.q12()) += ig * row(s.q11()).transpose();
  orow(out.q12()) += ig * row(s.q11());
  out.q12()(c, c) += ig;
  // q21' += ig d0n q22[n,m] + ig d0m q22[m,n] + ig d0m d0n e^{-gamma z}
  ocol(out.q21()) += ig * row(s.q22()).transpose();
  orow(out.q21()) += ig * row(s.q22());
  out.q21()(c, c) += ig * source;
  // q22' += ig d0n q23[m,n] - ig d0m q21[n,m]
  ocol(out.q22()) += ig * col(s.q23());
  orow(out.q22()) -= ig * col(s.q21()).transpose();
  // q23' += -ig d0n q22[m,n] - ig d0m q22[n,m] - ig d0m d0n e^{-gamma z}
  ocol(out.q23()) -= ig * col(s.q22());
  orow(out.q23()) -= ig * col(s.q22()).transpose();
  out.q23()(c, c) -= ig * source;
}

void rhs_window(const GeneralMoments& s, double z, const SimParams& p, GeneralMoments& out,
                Eigen::Index lo, Eigen::Index hi) {
  const cplx ig = kI * p.g;
  const double cs = p.c_s;
  const double gm = p.gamma;
  const cplx source = std::exp(-gm * z);
  const Eigen::Index c = p.half_width();
  const Eigen::Index len = hi - lo + 1;

  hop(s.u11(), cs, -cs, 0.0, out.u11(), lo, hi);
  hop(s.u12(), cs, -cs, 0.0, out.u12(), lo, hi);
  hop(s.u13(), cs, cs, gm, out.u13(), lo, hi);
  hop(s.u21(), cs, cs, 0.0, out.u21(), lo, hi);
  hop(s.u22(), cs, -cs, gm, out.u22(), lo, hi);
  hop(s.u23(), cs, -cs, gm, out.u23(), lo, hi);
  hop(s.u24(), -cs, -cs, 4.0 * gm, out.u24(), lo, hi);

  auto col = [&](const CMatrix& m) { return m.col(c).segment(lo, len); };
  auto row = [&](const CMatrix& m) { return m.row(c).segment(lo, len); };
  auto ocol = [&](CMatrix& m) { return m.col(c).segment(lo, len); };
  auto orow = [&](CMatrix& m) { return m.row(c).segment(lo, len); };

  // u11' += ig d0n conj(u13[m,n]) - ig d0m u13[n,m]
  ocol(out.u11()) += ig * col(s.u13()).conjugate();
  orow(out.u11()) -= ig * col(s.u13()).transpose();
  // u12' += ig d0n conj(u13[n,m]) - ig d0m u13[m,n]
  ocol(out.u12()) += ig * row(s.u13()).transpose().conjugate();
  orow(out.u12()) -= ig * row(s.u13());
  // u13' += ig d0n u11[n,m] + ig d0m u12[m,n] + ig d0m d0n
  ocol(out.u13()) += ig * row(s.u11()).transpose();
  orow(out.u13()) += ig * row(s.u12());
  out.u13()(c, c) += ig;
  // u21' += ig d0n u22[n,m] + ig d0m u23[m,n] + ig d0m d0n e^{-gamma z}
  ocol(out.u21()) += ig * row(s.u22()).transpose();
  orow(out.u21()) += ig * row(s.u23());
  out.u21()(c, c) += ig * source;
  // u22' += ig d0n u24[m,n] - ig d0m u21[n,m]
  ocol(out.u22()) += ig * col(s.u24());
  orow(out.u22()) -= ig * col(s.u21()).transpose();
  // u23' += ig d0n u24[n,m] - ig d0m u21[m,n]
  ocol(out.u23()) += ig * row(s.u24()).transpose();
  orow(out.u23()) -= ig * row(s.u21());
  // u24' += -ig d0n u22[m,n] - ig d0m u23[n,m] - ig d0m d0n e^{-gamma z}
  ocol(out.u24()) -= ig * col(s.u22());
  orow(out.u24()) -= ig * col(s.u23()).transpose();
  out.u24()(c, c) -= ig * source;
}

}  // namespace

void rhs_degenerate(const DegenerateMoments& s, double z, const SimParams& p,
                    DegenerateMoments& out) {
  check_shape(s, p);
  prepare(out, p.n_sites);
  out.z = z;
  rhs_window(s, z, p, out, 0, p.n_sites - 1);
}

void rhs_general(const GeneralMoments& s, double z, const SimParams& p, GeneralMoments& out) {
  check_shape(s, p);
  prepare(out, p.n_sites);
  out.z = z;
  rhs_window(s, z, p, out, 0, p.n_sites - 1);
}

DegenerateMoments rhs_degenerate(const DegenerateMoments& state, const SimParams& params) {
  DegenerateMoments out;
  rhs_degenerate(state, state.z, params, out);
  return out;
}

GeneralMoments rhs_general(const GeneralMoments& state, const SimParams& params) {
  GeneralMoments out;
  rhs_general(state, state.z, params, out);
  return out;
}

namespace {

// f(i, ...) over the interleaved re/im doubles of every window column, with
// one pointer per matrix
template <class F, class... M>
void for_window(Eigen::Index lo, Eigen::Index hi, F&& f, M&... mats) {
  const Eigen::Index n = std::get<0>(std::forward_as_tuple(mats...)).rows();
  const Eigen::Index len = 2 * (hi - lo + 1);
  for (Eigen::Index col = lo; col <= hi; ++col) {
    const Eigen::Index off = 2 * (col * n + lo);
    f(len, (reinterpret_cast<std::conditional_t<std::is_const_v<M>, const double*, double*>>(
                mats.data()) +
            off)...);
  }
}

template <MomentState State>
Eigen::Index occupied_half_width(const State& s) {
  const Eigen::Index n = s.sites();
  const Eigen::Index c = n / 2;
  Eigen::Index w = 0;
  for (const auto& m : s.mats) {
    for (Eigen::Index col = 0; col < n; ++col) {
      for (Eigen::Index r = 0; r < n; ++r) {
        if (m(r, col) != cplx(0.0, 0.0)) {
          w = std::max({w, std::abs(r - c), std::abs(col - c)});
        }
      }
    }
  }
  return w;
}

}  // namespace

template <MomentState State>
Rk4Stepper<State>::Rk4Stepper(const SimParams& params, bool windowed)
    : params_(params), windowed_(windowed) {
  params_.validate();
}

template <MomentState State>
void Rk4Stepper<State>::reset() {
  lo_ = -1;
  hi_ = -1;
}

template <MomentState State>
void Rk4Stepper<State>::init_window(const State& y) {
  check_shape(y, params_);
  const Eigen::Index n = params_.n_sites;
  k_.resize(n);
  acc_.resize(n);
  tmp_.resize(n);
  if (!windowed_) {
    lo_ = 0;
    hi_ = n - 1;
    return;
  }
  const Eigen::Index c = params_.half_width();
  const Eigen::Index w = std::min<Eigen::Index>(c, occupied_half_width(y) + kWindowPad);
  lo_ = c - w;
  hi_ = c + w;
}

template <MomentState State>
void Rk4Stepper<State>::grow_window(const State& y) {
  const Eigen::Index n = params_.n_sites;
  if (lo_ == 0 && hi_ == n - 1) return;
  const Eigen::Index c = params_.half_width();
  double scale = 1.0;
  double edge = 0.0;
  for (const auto& m : y.mats) {
    scale = std::max(scale, std::abs(m(c, c)));
    for (Eigen::Index k = lo_; k <= hi_; ++k) {
      edge = std::max({edge, std::abs(m(lo_, k)), std::abs(m(hi_, k)), std::abs(m(k, lo_)),
                       std::abs(m(k, hi_))});
    }
  }
  if (edge > kWindowTolerance * scale) {
    lo_ = std::max<Eigen::Index>(0, lo_ - kWindowPad);
    hi_ = std::min<Eigen::Index>(n - 1, hi_ + kWindowPad);
  }
}

template <MomentState State>
void Rk4Stepper<State>::step(State& y) {
  if (lo_ < 0) init_window(y);
  const double h = params_.dz;
  const double z = y.z;
  constexpr std::size_t K = State::kCount;
  const Eigen::Index lo = lo_, hi = hi_;

  rhs_window(y, z, params_, k_, lo, hi);
  for (std::size_t i = 0; i < K; ++i) {
    for_window(
        lo, hi,
        [h](Eigen::Index len, const double* yi, const double* ki, double* ai, double* ti) {
          for (Eigen::Index j = 0; j < len; ++j) {
            ai[j] = ki[j];
            ti[j] = yi[j] + (0.5 * h) * ki[j];
          }
        },
        std::as_const(y.mats[i]), std::as_const(k_.mats[i]), acc_.mats[i], tmp_.mats[i]);
  }
  for (const double frac : {0.5, 1.0}) {
    rhs_window(tmp_, z + 0.5 * h, params_, k_, lo, hi);
    const double step = frac * h;
    for (std::size_t i = 0; i < K; ++i) {
      for_window(
          lo, hi,
          [step](Eigen::Index len, const double* yi, const double* ki, double* ai, double* ti) {
            for (Eigen::Index j = 0; j < len; ++j) {
              ai[j] += 2.0 * ki[j];
              ti[j] = yi[j] + step * ki[j];
            }
          },
          std::as_const(y.mats[i]), std::as_const(k_.mats[i]), acc_.mats[i], tmp_.mats[i]);
    }
  }
  rhs_window(tmp_, z + h, params_, k_, lo, hi);
  for (std::size_t i = 0; i < K; ++i) {
    for_window(
        lo, hi,
        [h](Eigen::Index len, double* yi, const double* ki, const double* ai) {
          for (Eigen::Index j = 0; j < len; ++j) yi[j] += (h / 6.0) * (ai[j] + ki[j]);
        },
        y.mats[i], std::as_const(k_.mats[i]), std::as_const(acc_.mats[i]));
  }
  y.z = z + h;
  if (windowed_) grow_window(y);
}

template <MomentState State>
State evolve(State state, const SimParams& params, double z_target, const Observer<State>& observer,
             long sample_every) {
  params.validate();
  check_shape(state, params);
  if (z_target < state.z - 1e-12) {
    throw InvalidParameter("evolve: z_target is behind the current state");
  }
  const long steps = std::lround((z_target - state.z) / params.dz);
  const double z0 = state.z;
  Rk4Stepper<State> stepper(params);
  const FlushDenormals ftz;

  if (observer) observer(state);
  constexpr long kFiniteCheckEvery = 32;
  for (long k = 1; k <= steps; ++k) {
    stepper.step(state);
    state.z = z0 + static_cast<double>(k) * params.dz;
    const bool sample = observer && sample_every > 0 && k % sample_every == 0;
    if (k % kFiniteCheckEvery == 0 || k == steps || sample) {
      if (!state.all_finite()) {
        throw NumericalFailure("non-finite moments at z = " + std::to_string(state.z) +
                               " (g = " + std::to_string(params.g) +
                               ", dz = " + std::to_string(params.dz) + ")");
      }
    }
    if (sample || (observer && k == steps && (sample_every <= 0 || k % sample_every != 0))) {
      observer(state);
    }
  }
  return state;
}

template class Rk4Stepper<DegenerateMoments>;
template class Rk4Stepper<GeneralMoments>;
template DegenerateMoments evolve(DegenerateMoments, const SimParams&, double,
                                  const Observer<DegenerateMoments>&, long);
template GeneralMoments evolve(GeneralMoments, const SimParams&, double,
                               const Observer<GeneralMoments>&, long);

namespace {

Eigen::VectorXd profile_from(const CMatrix& number) {
  const Eigen::Index n = number.rows();
  Eigen::VectorXd out(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const cplx v = number(k, k);
    const double tol = 1e-8 * (1.0 + std::abs(v));
    if (std::abs(v.imag()) > tol) {
      throw InvariantViolation("photon number at row " + std::to_string(k) +
                               " has imaginary part " + std::to_string(v.imag()));
    }
    if (v.real() < -tol) {
      throw InvariantViolation("negative photon number at row " + std::to_string(k));
    }
    out(k) = std::max(0.0, v.real());
  }
  return out;
}

}  // namespace

Eigen::VectorXd photon_number_profile(const DegenerateMoments& state) {
  return profile_from(state.q11());
}

Eigen::VectorXd photon_number_profile(const GeneralMoments& state) {
  return profile_from(state.u11());
}

InvariantReport audit(const DegenerateMoments& s) {
  InvariantReport r;
  r.hermiticity = rel_dev(s.q11(), s.q11().adjoint());
  r.symmetry = std::max({rel_dev(s.q12(), s.q12().transpose()),
                         rel_dev(s.q21(), s.q21().transpose()),
                         rel_dev(s.q23(), s.q23().transpose())});
  for (const auto& m : s.mats) r.reflection = std::max(r.reflection, reflection_dev(m));
  r.redundancy = std::max({rel_dev(s.q12(), s.q21()), rel_dev(s.q22(), s.q11()),
                           rel_dev(s.q23(), s.q21().conjugate())});
  return r;
}

InvariantReport audit(const GeneralMoments& s) {
  InvariantReport r;
  r.hermiticity = std::max(rel_dev(s.u11(), s.u11().adjoint()), rel_dev(s.u12(), s.u12().adjoint()));
  for (const auto& m : s.mats) r.reflection = std::max(r.reflection, reflection_dev(m));
  r.redundancy = std::max({rel_dev(s.u13(), s.u21()), rel_dev(s.u22(), s.u11()),
                           rel_dev(s.u23(), s.u12()), rel_dev(s.u24(), s.u21().conjugate())});
  return r;
}

}  // namespace wgarray
