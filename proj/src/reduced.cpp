#include "wgarray/reduced.hpp"

#include <cmath>
#include <string>

#include "wgarray/errors.hpp"

namespace wgarray {
namespace {

using cplx = std::complex<double>;
constexpr cplx kI{0.0, 1.0};

double bessel_series(int order, double x) {
  const double half = 0.5 * x;
  double term = 1.0;
  for (int k = 1; k <= order; ++k) term *= half / k;
  double sum = term;
  const double q = -half * half;
  for (int k = 1; k < 200; ++k) {
    term *= q / (static_cast<double>(k) * (k + order));
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

// Miller: recur downward from a start index far above max(order, x) and
// normalize with J0 + 2 sum_k J_2k = 1.
double bessel_miller(int order, double x) {
  const double top = std::max(static_cast<double>(order), x);
  int start = static_cast<int>(top + 20.0 + std::sqrt(60.0 * top));
  start += start % 2;
  constexpr double kBig = 1e250;

  double next = 0.0;  // J_{k+1}
  double cur = 1.0;   // J_k, starting at k = start
  double sum = 2.0 * cur;
  double result = (start == order) ? cur : 0.0;
  for (int k = start; k >= 1; --k) {
    const double prev = (2.0 * k / x) * cur - next;
    next = cur;
    cur = prev;
    const int idx = k - 1;
    if (std::abs(cur) > kBig) {
      cur /= kBig;
      next /= kBig;
      sum /= kBig;
      result /= kBig;
    }
    if (idx == order) result = cur;
    if (idx % 2 == 0) sum += (idx == 0 ? cur : 2.0 * cur);
  }
  return result / sum;
}

void lattice_rhs(const Eigen::VectorXcd& a, double c_s, double g, Eigen::VectorXcd& out) {
  const Eigen::Index n = a.size();
  out.setZero(n);
  const cplx ic = kI * c_s;
  out.tail(n - 1) += ic * a.head(n - 1);
  out.head(n - 1) += ic * a.tail(n - 1);
  if (g != 0.0) {
    const Eigen::Index c = n / 2;
    out(c) += kI * g * std::conj(a(c));
  }
}

void lattice_rk4(Eigen::VectorXcd& a, double c_s, double g, double h, Eigen::VectorXcd& k,
                 Eigen::VectorXcd& acc, Eigen::VectorXcd& tmp) {
  lattice_rhs(a, c_s, g, k);
  acc = k;
  tmp = a + 0.5 * h * k;
  lattice_rhs(tmp, c_s, g, k);
  acc += 2.0 * k;
  tmp = a + 0.5 * h * k;
  lattice_rhs(tmp, c_s, g, k);
  acc += 2.0 * k;
  tmp = a + h * k;
  lattice_rhs(tmp, c_s, g, k);
  acc += k;
  a += (h / 6.0) * acc;
}

std::vector<double> kernel_samples(double c_s, double dz, std::size_t count) {
  const MemoryKernel kernel{c_s};
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) out[k] = kernel(static_cast<double>(k) * dz);
  return out;
}

long grid_steps(double z_max, double dz) {
  if (!(z_max >= 0.0)) throw InvalidParameter("z_max must be >= 0");
  return std::lround(z_max / dz);
}

}  // namespace

double bessel_j(int order, double x) {
  if (order < 0 || order > 64) {
    throw InvalidParameter("bessel_j: order " + std::to_string(order) + " outside [0, 64]");
  }
  if (!(x >= 0.0) || x > 1e4) {
    throw InvalidParameter("bessel_j: argument outside [0, 1e4]");
  }
  if (x == 0.0) return order == 0 ? 1.0 : 0.0;
  if (x <= 1.0) return bessel_series(order, x);
  return bessel_miller(order, x);
}

double MemoryKernel::operator()(double x) const {
  const double arg = 2.0 * c_s * x;
  return bessel_j(0, arg) + bessel_j(2, arg);
}

GreenTrajectory lattice_green_trajectory(const SimParams& params, double z_max) {
  params.validate();
  const long steps = grid_steps(z_max, params.dz);
  const Eigen::Index c = params.half_width();
  Eigen::VectorXcd a = Eigen::VectorXcd::Zero(params.n_sites);
  a(c) = 1.0;
  Eigen::VectorXcd k, acc, tmp;

  GreenTrajectory traj;
  traj.dz = params.dz;
  traj.a0.reserve(steps + 1);
  traj.da0.reserve(steps + 1);
  const cplx ic = kI * params.c_s;
  for (long s = 0;; ++s) {
    traj.a0.push_back(a(c));
    traj.da0.push_back(ic * (a(c - 1) + a(c + 1)));
    if (s == steps) break;
    lattice_rk4(a, params.c_s, 0.0, params.dz, k, acc, tmp);
  }
  return traj;
}

Eigen::VectorXcd lattice_amplitude_green(const SimParams& params, double z) {
  params.validate();
  const long steps = grid_steps(z, params.dz);
  Eigen::VectorXcd a = Eigen::VectorXcd::Zero(params.n_sites);
  a(params.half_width()) = 1.0;
  Eigen::VectorXcd k, acc, tmp;
  for (long s = 0; s < steps; ++s) lattice_rk4(a, params.c_s, 0.0, params.dz, k, acc, tmp);
  return a;
}

double memory_identity_residual(const SimParams& params, double z_max) {
  const GreenTrajectory traj = lattice_green_trajectory(params, z_max);
  const std::size_t count = traj.a0.size();
  const std::vector<double> kern = kernel_samples(params.c_s, traj.dz, count);
  double worst = std::abs(traj.da0[0]);
  for (std::size_t j = 1; j < count; ++j) {
    cplx conv = 0.5 * (kern[j] * traj.a0[0] + kern[0] * traj.a0[j]);
    for (std::size_t k = 1; k < j; ++k) conv += kern[j - k] * traj.a0[k];
    conv *= traj.dz;
    worst = std::max(worst, std::abs(traj.da0[j] + 2.0 * params.c_s * conv));
  }
  return worst;
}

std::vector<double> ReducedTrajectory::intensity() const {
  std::vector<double> out(a0.size());
  for (std::size_t k = 0; k < a0.size(); ++k) out[k] = std::norm(a0[k]);
  return out;
}

ReducedTrajectory reduced_parametric_growth(const SimParams& params, double z_max) {
  params.validate();
  if (params.gamma != 0.0) {
    throw InvalidParameter("reduced_parametric_growth models a coherent pump (gamma = 0)");
  }
  const long steps = grid_steps(z_max, params.dz);
  const double h = params.dz;
  const double cs = params.c_s;
  const cplx ig = kI * params.g;
  const std::vector<double> kern = kernel_samples(cs, h, static_cast<std::size_t>(steps) + 1);

  ReducedTrajectory traj;
  traj.dz = h;
  traj.a0.reserve(steps + 1);
  traj.a0.push_back(1.0);

  // a_{j+1} solves alpha * a + beta * conj(a) = rhs, from the implicit trapezoid
  const double alpha = 1.0 + 0.5 * cs * h * h;
  const cplx beta = -0.5 * ig * h;
  const double denom = alpha * alpha - std::norm(beta);

  cplx f_prev = ig * std::conj(traj.a0[0]);
  for (long j = 0; j < steps; ++j) {
    const auto next = static_cast<std::size_t>(j + 1);
    cplx history = 0.5 * kern[next] * traj.a0[0];
    for (std::size_t k = 1; k < next; ++k) history += kern[next - k] * traj.a0[k];
    history *= h;
    const cplx rhs = traj.a0[j] + 0.5 * h * (f_prev - 2.0 * cs * history);
    const cplx a = (alpha * rhs - beta * std::conj(rhs)) / denom;
    if (!std::isfinite(a.real()) || !std::isfinite(a.imag())) {
      throw NumericalFailure("reduced oscillator diverged at z = " + std::to_string(traj.z(next)));
    }
    traj.a0.push_back(a);
    f_prev = -2.0 * cs * (history + 0.5 * h * a) + ig * std::conj(a);
  }
  return traj;
}

std::vector<std::complex<double>> lattice_parametric_amplitude(const SimParams& params,
                                                               double z_max) {
  params.validate();
  const long steps = grid_steps(z_max, params.dz);
  const Eigen::Index c = params.half_width();
  Eigen::VectorXcd a = Eigen::VectorXcd::Zero(params.n_sites);
  a(c) = 1.0;
  Eigen::VectorXcd k, acc, tmp;
  std::vector<std::complex<double>> out;
  out.reserve(steps + 1);
  out.push_back(a(c));
  for (long s = 0; s < steps; ++s) {
    lattice_rk4(a, params.c_s, params.g, params.dz, k, acc, tmp);
    if (!a.allFinite()) throw NumericalFailure("classical lattice amplitude diverged");
    out.push_back(a(c));
  }
  return out;
}

}  // namespace wgarray
