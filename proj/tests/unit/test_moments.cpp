#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "wgarray/errors.hpp"
#include "wgarray/moments.hpp"

using namespace wgarray;

namespace {

SimParams make(int n, double c_s, double g, double gamma, double dz,
               MomentSystem sys = MomentSystem::Degenerate) {
  SimParams p;
  p.n_sites = n;
  p.c_s = c_s;
  p.g = g;
  p.gamma = gamma;
  p.dz = dz;
  p.system = sys;
  return p;
}

template <class State>
double max_abs_all(const State& s) {
  double m = 0.0;
  for (const auto& x : s.mats) m = std::max(m, x.cwiseAbs().maxCoeff());
  return m;
}

}  // namespace

TEST_CASE("vacuum initial state is all zero") {
  const auto deg = std::get<DegenerateMoments>(initial_vacuum(make(3, 1.0, 1.0, 0.0, 1e-3)));
  CHECK(deg.z == 0.0);
  CHECK(deg.sites() == 3);
  CHECK(max_abs_all(deg) == 0.0);

  const auto gen = std::get<GeneralMoments>(
      initial_vacuum(make(513, 1.0, 1.0, 0.0, 1e-3, MomentSystem::General)));
  CHECK(gen.mats.size() == 7);
  CHECK(gen.sites() == 513);
  CHECK(max_abs_all(gen) == 0.0);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(make(4, 1.0, 1.0, 0.0, 1e-3).validate(), InvalidParameter);
  CHECK_THROWS_AS(make(1, 1.0, 1.0, 0.0, 1e-3).validate(), InvalidParameter);
  CHECK_THROWS_AS(make(5, 1.0, -1.0, 0.0, 1e-3).validate(), InvalidParameter);
  CHECK_THROWS_AS(make(5, 1.0, 1.0, -1e-3, 1e-3).validate(), InvalidParameter);
  CHECK_THROWS_AS(make(5, 1.0, 1.0, 0.0, 0.06).validate(), InvalidParameter);
  CHECK_NOTHROW(make(5, 1.0, 1.0, 0.0, 0.05).validate());
  CHECK_NOTHROW(make(5, 0.0, 1.0, 0.0, 1e-3).validate());
}

TEST_CASE("g = 0 keeps the vacuum") {
  const SimParams p = make(9, 1.0, 0.0, 1e-3, 1e-2);
  const auto out = evolve(vacuum<DegenerateMoments>(p), p, 3.0);
  CHECK(out.z == doctest::Approx(3.0));
  CHECK(max_abs_all(out) == 0.0);
}

TEST_CASE("source terms of the degenerate right-hand side") {
  const SimParams p = make(5, 1.0, 1.0, 0.0, 1e-3);
  const auto d = rhs_degenerate(vacuum<DegenerateMoments>(p), p);
  const cplx i{0.0, 1.0};
  const int c = 2;
  for (int k = 0; k < 5; ++k) {
    const auto& m = d.mats[k];
    for (int r = 0; r < 5; ++r) {
      for (int s = 0; s < 5; ++s) {
        cplx expected = 0.0;
        if (r == c && s == c) {
          if (k == 1 || k == 2) expected = i;   // q12, q21
          if (k == 4) expected = -i;            // q23
        }
        CHECK(std::abs(m(r, s) - expected) == 0.0);
      }
    }
  }
}

TEST_CASE("source terms of the general right-hand side") {
  const SimParams p = make(5, 1.0, 1.0, 0.0, 1e-3, MomentSystem::General);
  const auto d = rhs_general(vacuum<GeneralMoments>(p), p);
  const cplx i{0.0, 1.0};
  for (std::size_t k = 0; k < 7; ++k) {
    cplx expected = 0.0;
    if (k == 2 || k == 3) expected = i;  // u13, u21
    if (k == 6) expected = -i;           // u24
    CHECK(std::abs(d.mats[k](2, 2) - expected) == 0.0);
    CHECK(d.mats[k].cwiseAbs().sum() == doctest::Approx(std::abs(expected)));
  }
}

TEST_CASE("phase noise dresses the source with exp(-gamma z)") {
  SimParams p = make(5, 1.0, 1.0, 0.3, 1e-3);
  auto s = vacuum<DegenerateMoments>(p);
  s.z = 2.0;
  const auto d = rhs_degenerate(s, p);
  CHECK(d.q21()(2, 2).imag() == doctest::Approx(std::exp(-0.6)).epsilon(1e-14));
  CHECK(d.q23()(2, 2).imag() == doctest::Approx(-std::exp(-0.6)).epsilon(1e-14));
  CHECK(d.q12()(2, 2).imag() == doctest::Approx(1.0));
}

TEST_CASE("linear coupler conserves the photon number") {
  const SimParams p = make(11, 1.0, 0.0, 0.0, 1e-3);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  auto s = vacuum<DegenerateMoments>(p);
  Eigen::MatrixXcd a(11, 11);
  for (int r = 0; r < 11; ++r)
    for (int c = 0; c < 11; ++c) a(r, c) = cplx(n01(rng), n01(rng));
  s.q11() = a * a.adjoint();
  const auto d = rhs_degenerate(s, p);
  CHECK(std::abs(d.q11().trace()) < 1e-12);
}

TEST_CASE("uncoupled guide is a single-mode squeezer") {
  // <b+b> = sinh^2(gz), <bb> = i sinh(gz) cosh(gz)
  const SimParams p = make(3, 0.0, 1.0, 0.0, 1e-3);
  const auto s = evolve(vacuum<DegenerateMoments>(p), p, 1.0);
  CHECK(s.q11()(1, 1).real() == doctest::Approx(1.3810978455418157).epsilon(1e-10));
  CHECK(s.q21()(1, 1).imag() == doctest::Approx(1.8134302039235094).epsilon(1e-10));
  CHECK(std::abs(s.q21()(1, 1).real()) < 1e-12);
  const Eigen::VectorXd prof = photon_number_profile(s);
  CHECK(prof(0) == 0.0);
  CHECK(prof(2) == 0.0);

  const SimParams pg = make(3, 0.0, 1.0, 0.0, 1e-3, MomentSystem::General);
  const auto sg = evolve(vacuum<GeneralMoments>(pg), pg, 1.0);
  CHECK(sg.u11()(1, 1).real() == doctest::Approx(1.3810978455418157).epsilon(1e-10));
  CHECK(std::abs(sg.u21()(1, 1)) == doctest::Approx(1.8134302039235094).epsilon(1e-10));
}

TEST_CASE("coupled lattice matches the exact Bogoliubov exponential") {
  const SimParams p = make(21, 1.0, 1.0, 0.0, 1e-3);
  const auto s = evolve(vacuum<DegenerateMoments>(p), p, 2.0);
  const auto ref = oracle::coherent_lattice(21, 1.0, 1.0, 2.0);
  CHECK((s.q11() - ref.number).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((s.q21() - ref.anomalous).cwiseAbs().maxCoeff() < 1e-9);

  // values frozen from an independent scipy.linalg.expm computation
  const int c = 10;
  CHECK(s.q11()(c, c).real() == doctest::Approx(0.7765673320913351).epsilon(1e-9));
  CHECK(s.q21()(c, c).imag() == doctest::Approx(1.1065824805572166).epsilon(1e-9));
  CHECK(s.q11()(c + 1, c - 1).real() == doctest::Approx(0.6412808909650546).epsilon(1e-9));
  CHECK(s.q21()(c + 1, c - 1).imag() == doctest::Approx(-0.7704511376373104).epsilon(1e-9));
  CHECK(s.q11()(c + 2, c + 3).imag() == doctest::Approx(0.20253001228028594).epsilon(1e-9));
  CHECK(s.q21()(c + 2, c + 3).real() == doctest::Approx(-0.2634844181503036).epsilon(1e-9));
}

TEST_CASE("RK4 on pure damping") {
  // q12 decays at gamma and q23 at 4 gamma when nothing else acts
  const double gamma = 0.7, h = 0.05;
  const SimParams p = make(3, 0.0, 0.0, gamma, h);
  auto s = vacuum<DegenerateMoments>(p);
  s.q12()(1, 1) = 1.0;
  s.q23()(1, 1) = 1.0;
  const auto next = rk4_step(s, p);
  CHECK(next.z == doctest::Approx(h));
  const double err1 = std::abs(next.q12()(1, 1).real() - std::exp(-gamma * h));
  const double err4 = std::abs(next.q23()(1, 1).real() - std::exp(-4.0 * gamma * h));
  CHECK(err1 < std::pow(gamma * h, 5));
  CHECK(err4 < std::pow(4.0 * gamma * h, 5));

  SimParams zero = make(5, 1.0, 0.0, 0.0, 1e-2);
  const auto z1 = rk4_step(vacuum<DegenerateMoments>(zero), zero);
  CHECK(max_abs_all(z1) == 0.0);
}

TEST_CASE("RK4 convergence order on the central photon number") {
  auto at = [](double dz) {
    const SimParams p = make(21, 1.0, 1.0, 0.01, dz);
    return evolve(vacuum<DegenerateMoments>(p), p, 2.0).q11()(10, 10).real();
  };
  const double y1 = at(0.04), y2 = at(0.02), y4 = at(0.01);
  const double order = std::log2(std::abs(y1 - y2) / std::abs(y2 - y4));
  CHECK(order >= 3.8);
}

TEST_CASE("structural invariants hold along the evolution") {
  for (double gamma : {0.0, 0.05}) {
    CAPTURE(gamma);
    const SimParams p = make(31, 1.0, 1.3, gamma, 1e-2);
    InvariantReport worst;
    evolve<DegenerateMoments>(
        vacuum<DegenerateMoments>(p), p, 6.0,
        [&](const DegenerateMoments& s) {
          const auto r = audit(s);
          worst.hermiticity = std::max(worst.hermiticity, r.hermiticity);
          worst.symmetry = std::max(worst.symmetry, r.symmetry);
          worst.reflection = std::max(worst.reflection, r.reflection);
          worst.redundancy = std::max(worst.redundancy, r.redundancy);
          const Eigen::VectorXd prof = photon_number_profile(s);
          CHECK((prof - prof.reverse()).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + prof.maxCoeff()));
        },
        50);
    CHECK(worst.hermiticity < 1e-9);
    CHECK(worst.symmetry < 1e-9);
    CHECK(worst.reflection < 1e-10);
    if (gamma == 0.0) {
      CHECK(worst.redundancy < 1e-9);
    } else {
      CHECK(worst.redundancy > 1e-4);
    }
  }
}

TEST_CASE("general system: invariants and agreement with the degenerate moments") {
  const SimParams pg = make(21, 1.0, 1.2, 0.02, 1e-2, MomentSystem::General);
  SimParams pd = pg;
  pd.system = MomentSystem::Degenerate;
  const auto g = evolve(vacuum<GeneralMoments>(pg), pg, 4.0);
  const auto d = evolve(vacuum<DegenerateMoments>(pd), pd, 4.0);
  const auto r = audit(g);
  CHECK(r.hermiticity < 1e-9);
  CHECK(r.reflection < 1e-10);
  // b and c obey the same Bogoliubov equations from the same vacuum
  CHECK((g.u11() - d.q11()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g.u12() - d.q11()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g.u13() - d.q12()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g.u21() - d.q21()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g.u24() - d.q23()).cwiseAbs().maxCoeff() < 1e-12);

  SimParams coherent = pg;
  coherent.gamma = 0.0;
  const auto gc = evolve(vacuum<GeneralMoments>(coherent), coherent, 4.0);
  CHECK(audit(gc).redundancy < 1e-9);
}

TEST_CASE("light cone: results are insensitive to the lattice size") {
  auto run = [](int n) {
    const SimParams p = make(n, 1.0, 1.0, 0.0, 1e-2);
    return evolve(vacuum<DegenerateMoments>(p), p, 7.5);
  };
  const auto small = run(129);
  const auto large = run(257);
  double worst = 0.0;
  for (std::size_t k = 0; k < 5; ++k) {
    const auto a = small.mats[k].block(64 - 10, 64 - 10, 21, 21);
    const auto b = large.mats[k].block(128 - 10, 128 - 10, 21, 21);
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("light-cone window matches the full-lattice update") {
  for (auto sys : {MomentSystem::Degenerate, MomentSystem::General}) {
    const SimParams p = make(101, 1.0, 1.4, 0.01, 1e-2, sys);
    auto run = [&](auto state, bool windowed) {
      Rk4Stepper<decltype(state)> stepper(p, windowed);
      for (int k = 0; k < 600; ++k) stepper.step(state);
      return std::make_pair(state, stepper.window_half_width());
    };
    auto check = [&](auto v) {
      const auto [full, w_full] = run(v, false);
      const auto [win, w_win] = run(v, true);
      CHECK(w_full == 50);
      CHECK(w_win < 50);
      double scale = 0.0, worst = 0.0;
      for (std::size_t k = 0; k < full.mats.size(); ++k) {
        scale = std::max(scale, full.mats[k].cwiseAbs().maxCoeff());
        worst = std::max(worst, (full.mats[k] - win.mats[k]).cwiseAbs().maxCoeff());
      }
      CHECK(worst <= 1e-14 * scale);
    };
    if (sys == MomentSystem::Degenerate) {
      check(vacuum<DegenerateMoments>(p));
    } else {
      check(vacuum<GeneralMoments>(p));
    }
  }
}

TEST_CASE("pump strength changes the transverse photon distribution") {
  auto spread = [](double g) {
    const SimParams p = make(129, 1.0, g, 0.0, 1e-2);
    const Eigen::VectorXd prof = photon_number_profile(evolve(vacuum<DegenerateMoments>(p), p, 3.75));
    return prof.segment(64 - 2, 5).sum() / prof.sum();  // share within |n| <= 2
  };
  const double below = spread(1.5);
  const double above = spread(2.2);
  CHECK(below < 0.7);
  CHECK(above > 0.85);
  CHECK(above > below);
}

TEST_CASE("evolve edge cases") {
  const SimParams p = make(7, 1.0, 1.0, 0.0, 1e-2);
  auto s = vacuum<DegenerateMoments>(p);
  int calls = 0;
  const auto same = evolve<DegenerateMoments>(s, p, 0.0, [&](const DegenerateMoments&) { ++calls; }, 1);
  CHECK(same.z == 0.0);
  CHECK(calls == 1);

  s.q11()(3, 3) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(evolve(s, p, 1.0), NumericalFailure);

  const SimParams wrong = make(9, 1.0, 1.0, 0.0, 1e-2);
  CHECK_THROWS_AS(rhs_degenerate(vacuum<DegenerateMoments>(p), wrong), InvalidParameter);
  CHECK_THROWS_AS(evolve(vacuum<DegenerateMoments>(p), p, -1.0), InvalidParameter);
}

TEST_CASE("observer cadence") {
  const SimParams p = make(5, 1.0, 0.5, 0.0, 1e-2);
  std::vector<double> zs;
  evolve<DegenerateMoments>(vacuum<DegenerateMoments>(p), p, 1.0,
                            [&](const DegenerateMoments& s) { zs.push_back(s.z); }, 25);
  REQUIRE(zs.size() == 5);
  CHECK(zs.front() == 0.0);
  CHECK(zs.back() == doctest::Approx(1.0));
}

TEST_CASE("photon profile rejects a complex diagonal") {
  const SimParams p = make(5, 1.0, 0.5, 0.0, 1e-2);
  auto s = vacuum<DegenerateMoments>(p);
  s.q11()(2, 2) = cplx(1.0, 1e-3);
  CHECK_THROWS_AS(photon_number_profile(s), InvariantViolation);
  s.q11()(2, 2) = cplx(-1e-12, 0.0);
  CHECK(photon_number_profile(s)(2) == 0.0);
  s.q11()(2, 2) = cplx(-0.1, 0.0);
  CHECK_THROWS_AS(photon_number_profile(s), InvariantViolation);
}
