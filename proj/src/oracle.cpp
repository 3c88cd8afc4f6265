#include "wgarray/oracle.hpp"

#include <atomic>
#include <cmath>
#include <random>
#include <string>
#include <thread>

#include "wgarray/errors.hpp"

namespace wgarray {
namespace {

constexpr cplx kI{0.0, 1.0};

std::vector<std::size_t> partner_of(MomentSystem system) {
  // degenerate: {mu, nu};  general: {mu_b, nu_b, mu_c, nu_c}
  if (system == MomentSystem::Degenerate) return {1, 0};
  return {3, 2, 1, 0};
}

void propagator_rhs(const std::vector<CMatrix>& x, const std::vector<std::size_t>& partner,
                    double c_s, cplx pump, std::vector<CMatrix>& out) {
  const Eigen::Index n = x[0].rows();
  const Eigen::Index c = n / 2;
  const cplx ic = kI * c_s;
  for (std::size_t i = 0; i < x.size(); ++i) {
    CMatrix& o = out[i];
    o.setZero(n, n);
    o.bottomRows(n - 1).noalias() += ic * x[i].topRows(n - 1);
    o.topRows(n - 1).noalias() += ic * x[i].bottomRows(n - 1);
    o.row(c) += pump * x[partner[i]].row(c).conjugate();
  }
}

struct Accumulator {
  std::size_t count = 0;
  std::vector<CMatrix> mean;
  std::vector<Eigen::MatrixXd> m2;

  void add(const std::vector<const CMatrix*>& sample) {
    if (mean.empty()) {
      for (const CMatrix* s : sample) {
        mean.push_back(CMatrix::Zero(s->rows(), s->cols()));
        m2.push_back(Eigen::MatrixXd::Zero(s->rows(), s->cols()));
      }
    }
    ++count;
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t i = 0; i < sample.size(); ++i) {
      const CMatrix delta = *sample[i] - mean[i];
      mean[i] += inv * delta;
      m2[i].array() += (delta.conjugate().array() * (*sample[i] - mean[i]).array()).real();
    }
  }

  void merge(const Accumulator& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(count);
    const double nb = static_cast<double>(other.count);
    const double n = na + nb;
    for (std::size_t i = 0; i < mean.size(); ++i) {
      const CMatrix delta = other.mean[i] - mean[i];
      mean[i] += (nb / n) * delta;
      m2[i] += other.m2[i] + (na * nb / n) * delta.cwiseAbs2();
    }
    count += other.count;
  }
};

std::vector<const CMatrix*> views(const AnyMoments& m) {
  return std::visit(
      [](const auto& s) {
        std::vector<const CMatrix*> out;
        for (const auto& x : s.mats) out.push_back(&x);
        return out;
      },
      m);
}

template <class PathSource>
EnsembleEstimate run_ensemble(std::size_t total, std::size_t chunk, unsigned workers,
                              const SimParams& params, PathSource&& source) {
  if (total < 2) throw InvalidParameter("ensemble_moments needs at least 2 paths");
  chunk = std::max<std::size_t>(1, chunk);
  const std::size_t n_chunks = (total + chunk - 1) / chunk;
  std::vector<Accumulator> partial(n_chunks);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};

  auto worker = [&]() {
    try {
      for (;;) {
        const std::size_t ci = next.fetch_add(1);
        if (ci >= n_chunks || failed.load()) return;
        const std::size_t end = std::min(total, (ci + 1) * chunk);
        for (std::size_t i = ci * chunk; i < end; ++i) {
          const PhasePath& path = source(i);
          const BogoliubovPropagator prop = propagate_bogoliubov(path, params);
          const AnyMoments sample = realization_moments(prop, path.phi.back());
          partial[ci].add(views(sample));
        }
      }
    } catch (...) {
      if (!failed.exchange(true)) failure = std::current_exception();
    }
  };

  const unsigned n_threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n_chunks)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  Accumulator total_acc;
  for (const auto& p : partial) total_acc.merge(p);

  EnsembleEstimate est;
  est.paths = total_acc.count;
  const double n = static_cast<double>(total_acc.count);
  for (const auto& m2 : total_acc.m2) {
    est.std_error.push_back((m2 / ((n - 1.0) * n)).cwiseSqrt());
  }
  auto fill = [&](auto& state) {
    for (std::size_t i = 0; i < state.mats.size(); ++i) state.mats[i] = total_acc.mean[i];
  };
  if (params.system == MomentSystem::Degenerate) {
    DegenerateMoments s;
    fill(s);
    est.mean = std::move(s);
  } else {
    GeneralMoments s;
    fill(s);
    est.mean = std::move(s);
  }
  return est;
}

void set_z(AnyMoments& m, double z) {
  std::visit([z](auto& s) { s.z = z; }, m);
}

}  // namespace

std::uint64_t path_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t x = base + (index + 1) * 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

PhasePath sample_phase_path(double gamma, double dz, double z_max, std::uint64_t seed) {
  if (!(gamma >= 0.0)) throw InvalidParameter("sample_phase_path: gamma must be >= 0");
  if (!(dz > 0.0) || !(z_max >= 0.0)) throw InvalidParameter("sample_phase_path: bad grid");
  const long steps = std::lround(z_max / dz);
  PhasePath path;
  path.dz = dz;
  path.seed = seed;
  path.phi.assign(static_cast<std::size_t>(2 * steps + 1), 0.0);
  if (gamma == 0.0) return path;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> increment(0.0, std::sqrt(gamma * dz));
  for (std::size_t k = 1; k < path.phi.size(); ++k) path.phi[k] = path.phi[k - 1] + increment(rng);
  return path;
}

BogoliubovPropagator propagate_bogoliubov(const PhasePath& path, const SimParams& params) {
  params.validate();
  if (std::abs(path.dz - params.dz) > 1e-12 * params.dz) {
    throw InvalidParameter("propagate_bogoliubov: path grid does not match params.dz");
  }
  const Eigen::Index n = params.n_sites;
  const auto partner = partner_of(params.system);
  const std::size_t count = partner.size();

  std::vector<CMatrix> y(count), k(count), acc(count), tmp(count);
  for (std::size_t i = 0; i < count; ++i) {
    // mu matrices start at the identity, nu matrices at zero
    const bool is_mu = (params.system == MomentSystem::Degenerate) ? i == 0 : (i % 2 == 0);
    y[i] = is_mu ? CMatrix(CMatrix::Identity(n, n)) : CMatrix(CMatrix::Zero(n, n));
  }

  const double h = params.dz;
  const cplx ig = kI * params.g;
  auto pump = [&](long half_step) { return ig * std::exp(kI * path.at_half_step(half_step)); };

  for (long s = 0; s < path.steps(); ++s) {
    propagator_rhs(y, partner, params.c_s, pump(2 * s), k);
    for (std::size_t i = 0; i < count; ++i) {
      acc[i] = k[i];
      tmp[i] = y[i] + (0.5 * h) * k[i];
    }
    propagator_rhs(tmp, partner, params.c_s, pump(2 * s + 1), k);
    for (std::size_t i = 0; i < count; ++i) {
      acc[i] += 2.0 * k[i];
      tmp[i] = y[i] + (0.5 * h) * k[i];
    }
    propagator_rhs(tmp, partner, params.c_s, pump(2 * s + 1), k);
    for (std::size_t i = 0; i < count; ++i) {
      acc[i] += 2.0 * k[i];
      tmp[i] = y[i] + h * k[i];
    }
    propagator_rhs(tmp, partner, params.c_s, pump(2 * s + 2), k);
    for (std::size_t i = 0; i < count; ++i) {
      acc[i] += k[i];
      y[i] += (h / 6.0) * acc[i];
    }
  }

  BogoliubovPropagator prop;
  prop.system = params.system;
  prop.z = path.z_max();
  prop.signal = {std::move(y[0]), std::move(y[1])};
  if (params.system == MomentSystem::General) prop.idler = {std::move(y[2]), std::move(y[3])};

  const double scale = std::max(1.0, prop.signal.mu.squaredNorm() / static_cast<double>(n));
  const double defect = symplectic_defect(prop);
  if (!(defect <= 1e-6 * scale)) {
    throw NumericalFailure("Bogoliubov propagator lost symplecticity (defect " +
                           std::to_string(defect) + "); reduce dz");
  }
  return prop;
}

double symplectic_defect(const BogoliubovPropagator& prop) {
  auto unit_defect = [](const ModePropagator& p) {
    const Eigen::Index n = p.mu.rows();
    return (p.mu * p.mu.adjoint() - p.nu * p.nu.adjoint() - CMatrix::Identity(n, n))
        .cwiseAbs()
        .maxCoeff();
  };
  if (prop.system == MomentSystem::Degenerate) {
    const auto& s = prop.signal;
    const double sym = (s.mu * s.nu.transpose() - s.nu * s.mu.transpose()).cwiseAbs().maxCoeff();
    return std::max(unit_defect(s), sym);
  }
  const auto& b = prop.signal;
  const auto& c = prop.idler;
  const double cross = (b.mu * c.nu.transpose() - b.nu * c.mu.transpose()).cwiseAbs().maxCoeff();
  return std::max({unit_defect(b), unit_defect(c), cross});
}

AnyMoments realization_moments(const BogoliubovPropagator& prop, double phi) {
  const cplx e1 = std::exp(kI * phi);
  const cplx e2 = std::exp(2.0 * kI * phi);
  if (prop.system == MomentSystem::Degenerate) {
    const auto& s = prop.signal;
    DegenerateMoments m;
    m.z = prop.z;
    m.q11() = s.nu.conjugate() * s.nu.transpose();
    m.q21() = s.mu * s.nu.transpose();
    m.q12() = std::conj(e1) * m.q21();
    m.q22() = e1 * m.q11();
    m.q23() = e2 * m.q21().adjoint();
    return m;
  }
  const auto& b = prop.signal;
  const auto& c = prop.idler;
  GeneralMoments m;
  m.z = prop.z;
  m.u11() = b.nu.conjugate() * b.nu.transpose();
  m.u12() = c.nu.conjugate() * c.nu.transpose();
  m.u21() = b.mu * c.nu.transpose();
  m.u13() = std::conj(e1) * m.u21();
  m.u22() = e1 * m.u11();
  m.u23() = e1 * m.u12();
  m.u24() = e2 * m.u21().conjugate();
  return m;
}

EnsembleEstimate ensemble_moments(std::span<const PhasePath> paths, const SimParams& params,
                                  unsigned workers) {
  EnsembleEstimate est = run_ensemble(paths.size(), 32, workers, params,
                                      [&](std::size_t i) -> const PhasePath& { return paths[i]; });
  if (!paths.empty()) set_z(est.mean, paths.front().z_max());
  return est;
}

EnsembleEstimate ensemble_moments(const SimParams& params, const EnsembleOptions& options) {
  params.validate();
  // each worker regenerates its own path; thread_local keeps the buffer alive
  // for the reference returned to the propagator loop
  auto source = [&](std::size_t i) -> const PhasePath& {
    thread_local PhasePath buffer;
    buffer = sample_phase_path(params.gamma, params.dz, options.z_end, path_seed(options.seed, i));
    return buffer;
  };
  EnsembleEstimate est = run_ensemble(options.paths, options.chunk, options.workers, params, source);
  set_z(est.mean, static_cast<double>(std::lround(options.z_end / params.dz)) * params.dz);
  return est;
}

}  // namespace wgarray
