#include "wgarray/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "wgarray/entanglement.hpp"
#include "wgarray/errors.hpp"
#include "wgarray/growth.hpp"
#include "wgarray/moments.hpp"
#include "wgarray/oracle.hpp"
#include "wgarray/reduced.hpp"

namespace wgarray {

Progress::Progress(bool quiet, double interval_seconds, std::string label)
    : quiet_(quiet), interval_(interval_seconds), label_(std::move(label)) {}

void Progress::note(const std::string& message, bool force) {
  if (quiet_) return;
  const std::lock_guard lock(mutex_);
  const auto now = std::chrono::steady_clock::now();
  if (!force && printed_ && std::chrono::duration<double>(now - last_).count() < interval_) return;
  last_ = now;
  printed_ = true;
  std::cerr << "[" << label_ << "] " << message << std::endl;
}

unsigned default_workers() {
  if (const char* env = std::getenv("WGARRAY_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

const double kInf = std::numeric_limits<double>::infinity();

// Runs body(i) for i in [0, count) on up to `workers` threads. Results must be
// written by index; the first failure in index order is rethrown.
template <class F>
void parallel_for(std::size_t count, unsigned workers, F&& body) {
  const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), count));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto drain = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    drain();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(drain);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<MomentSystem> systems_of(const Config& c) {
  const std::string& s = c.text("system");
  if (s == "both") return {MomentSystem::Degenerate, MomentSystem::General};
  return {parse_moment_system(s)};
}

std::string name_of(MomentSystem s) { return std::string(to_string(s)); }

SimParams with_system(SimParams p, MomentSystem s) {
  p.system = s;
  return p;
}

std::string fmt(double v) { return format_number(v); }

std::vector<double> sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

Eigen::VectorXd profile(const AnyMoments& s) {
  return std::visit([](const auto& m) { return photon_number_profile(m); }, s);
}

EntanglementMap map_of(const AnyMoments& s) {
  return std::visit([](const auto& m) { return entanglement_map(m); }, s);
}

AnyMoments advance(AnyMoments s, const SimParams& p, double z) {
  return std::visit([&](auto m) -> AnyMoments { return evolve(std::move(m), p, z); }, std::move(s));
}

double z_of(const AnyMoments& s) {
  return std::visit([](const auto& m) { return m.z; }, s);
}

void add_map_rows(Table& t, const EntanglementMap& map, const SimParams& p, int half) {
  const int h = std::min(half, map.half_width());
  for (int m = -h; m <= h; ++m) {
    for (int n = -h; n <= h; ++n) {
      t.add_row({name_of(map.system), std::int64_t{p.n_sites}, p.c_s, p.g, p.gamma, map.z,
                 std::int64_t{m}, std::int64_t{n}, map.at(m, n)});
    }
  }
}

const std::vector<std::string> kMapColumns = {"system", "n_sites", "c_s", "g", "gamma",
                                              "z", "m", "n", "log_negativity"};

std::vector<Table> intensity_profile(const Config& c, RunContext& ctx) {
  const SimParams base = c.sim_params();
  const auto systems = systems_of(c);
  const auto zs = sorted(c.reals("z_list"));
  std::vector<std::vector<std::pair<double, Eigen::VectorXd>>> results(systems.size());
  parallel_for(systems.size(), ctx.workers, [&](std::size_t i) {
    const SimParams p = with_system(base, systems[i]);
    AnyMoments s = initial_vacuum(p);
    for (double z : zs) {
      s = advance(std::move(s), p, z);
      results[i].emplace_back(z_of(s), profile(s));
      ctx.progress->note(name_of(systems[i]) + " z=" + fmt(z));
    }
  });
  Table t{"intensity-profile",
          {"system", "n_sites", "c_s", "g", "gamma", "z", "n", "photon_number"}, {}, {}};
  for (std::size_t i = 0; i < systems.size(); ++i) {
    for (const auto& [z, prof] : results[i]) {
      const int half = base.half_width();
      for (int n = -half; n <= half; ++n) {
        t.add_row({name_of(systems[i]), std::int64_t{base.n_sites}, base.c_s, base.g, base.gamma, z,
                   std::int64_t{n}, prof(n + half)});
      }
    }
  }
  return {t};
}

std::vector<Table> intensity_vs_z(const Config& c, RunContext& ctx) {
  const SimParams base = c.sim_params();
  const auto gs = c.reals("g_list");
  const auto systems = systems_of(c);
  const std::size_t tasks = gs.size() * systems.size();
  std::vector<std::vector<std::pair<double, double>>> curves(tasks);
  parallel_for(tasks, ctx.workers, [&](std::size_t i) {
    SimParams p = with_system(base, systems[i / gs.size()]);
    p.g = gs[i % gs.size()];
    curves[i] = central_intensity(p, c.real("z_max"), c.real("sample_dz"));
    ctx.progress->note("g=" + fmt(p.g) + " done");
  });
  Table t{"intensity-vs-z",
          {"system", "n_sites", "c_s", "g", "gamma", "z", "central_photon_number"}, {}, {}};
  for (std::size_t i = 0; i < tasks; ++i) {
    const std::string sys = name_of(systems[i / gs.size()]);
    for (const auto& [z, value] : curves[i]) {
      t.add_row({sys, std::int64_t{base.n_sites}, base.c_s, gs[i % gs.size()], base.gamma, z, value});
    }
  }
  return {t};
}

std::vector<Table> entangle_map(const Config& c, RunContext& ctx) {
  const SimParams base = c.sim_params();
  const auto systems = systems_of(c);
  const auto zs = sorted(c.reals("z_list"));
  std::vector<std::vector<EntanglementMap>> maps(systems.size());
  parallel_for(systems.size(), ctx.workers, [&](std::size_t i) {
    const SimParams p = with_system(base, systems[i]);
    AnyMoments s = initial_vacuum(p);
    for (double z : zs) {
      s = advance(std::move(s), p, z);
      maps[i].push_back(map_of(s));
      ctx.progress->note(name_of(systems[i]) + " map at z=" + fmt(z));
    }
  });
  Table t{"entangle-map", kMapColumns, {}, {}};
  const int half = static_cast<int>(c.integer("map_half_width"));
  for (std::size_t i = 0; i < systems.size(); ++i) {
    for (const auto& map : maps[i]) add_map_rows(t, map, base, half);
  }
  return {t};
}

StationaryOptions stationary_options(const Config& c) {
  StationaryOptions o;
  o.plateau_tol = c.real("plateau_tol");
  o.window = c.real("window");
  o.probe = c.real("probe");
  o.z_min = c.real("z_min");
  o.z_max = c.real("z_max");
  return o;
}

std::vector<Table> stationary_sweep(const Config& c, RunContext& ctx) {
  const SimParams base = c.sim_params();
  const auto gs = c.reals("g_list");
  const auto systems = systems_of(c);
  const StationaryOptions opt = stationary_options(c);
  const std::size_t tasks = gs.size() * systems.size();
  std::vector<StationaryResult> results(tasks);
  std::vector<SitePair> pairs(tasks);
  std::atomic<std::size_t> done{0};
  parallel_for(tasks, ctx.workers, [&](std::size_t i) {
    SimParams p = with_system(base, systems[i / gs.size()]);
    p.g = gs[i % gs.size()];
    const auto [m, n] = c.site_pair(p.system == MomentSystem::General ? "general_pair" : "pair");
    pairs[i] = {m, n};
    results[i] = stationary_logneg(p, pairs[i], opt);
    ctx.progress->note(std::to_string(++done) + "/" + std::to_string(tasks) + " " +
                       name_of(p.system) + " g=" + fmt(p.g) + " E_N=" + fmt(results[i].value));
  });
  Table t{"stationary-sweep",
          {"system", "n_sites", "c_s", "g", "gamma", "m", "n", "converged", "above_threshold",
           "log_negativity", "z_reached"},
          {},
          {}};
  t.add_meta("plateau", "relative spread <= " + c.text("plateau_tol") + " over a window of " +
                            c.text("window"));
  for (std::size_t i = 0; i < tasks; ++i) {
    const auto& r = results[i];
    t.add_row({name_of(systems[i / gs.size()]), std::int64_t{base.n_sites}, base.c_s,
               gs[i % gs.size()], 0.0, std::int64_t{pairs[i].m}, std::int64_t{pairs[i].n},
               std::int64_t{r.converged}, std::int64_t{r.above_threshold}, r.value, r.z_reached});
  }
  return {t};
}

std::vector<Table> survival(const Config& c, RunContext& ctx) {
  const SimParams base = c.sim_params();
  const auto gs = c.reals("g_list");
  const auto gammas = c.reals("gamma_list");
  const auto systems = systems_of(c);
  const auto [pm, pn] = c.site_pair(systems.front() == MomentSystem::General ? "general_pair" : "pair");
  SurvivalOptions opt;
  opt.eps = c.real("eps");
  opt.probe = c.real("probe");
  opt.hold = c.real("hold");
  opt.z_max = c.real("z_max");
  const std::size_t tasks = gs.size() * gammas.size();
  std::vector<SurvivalResult> results(tasks);
  std::atomic<std::size_t> done{0};
  parallel_for(tasks, ctx.workers, [&](std::size_t i) {
    SimParams p = base;
    p.gamma = gammas[i / gs.size()];
    p.g = gs[i % gs.size()];
    results[i] = survival_distance(p, {pm, pn}, opt);
    const auto& r = results[i];
    ctx.progress->note(std::to_string(++done) + "/" + std::to_string(tasks) + " gamma=" +
                       fmt(p.gamma) + " g=" + fmt(p.g) + " z_tilde=" +
                       (r.z_tilde ? fmt(*r.z_tilde) : std::string("unbounded")));
  });
  Table t{"survival-distance",
          {"system", "n_sites", "c_s", "g", "gamma", "m", "n", "eps", "bounded", "z_tilde",
           "peak_log_negativity", "z_peak", "z_reached"},
          {},
          {}};
  t.add_meta("z_tilde", "inf when E_N has not vanished by z_max");
  for (std::size_t i = 0; i < tasks; ++i) {
    const auto& r = results[i];
    t.add_row({name_of(base.system), std::int64_t{base.n_sites}, base.c_s, gs[i % gs.size()],
               gammas[i / gs.size()], std::int64_t{pm}, std::int64_t{pn}, opt.eps,
               std::int64_t{r.z_tilde.has_value()}, r.z_tilde.value_or(kInf), r.peak, r.z_peak,
               r.z_reached});
  }
  return {t};
}

std::vector<Table> noise_evolution(const Config& c, RunContext& ctx) {
  const SimParams p = c.sim_params();
  const auto [pm, pn] = c.site_pair(p.system == MomentSystem::General ? "general_pair" : "pair");
  const double z_max = c.real("z_max");
  const long every = std::max(1L, std::lround(c.real("probe") / p.dz));
  std::vector<double> stops;
  std::vector<bool> mapped;
  for (double z : sorted(c.reals("map_z"))) {
    if (z > z_max) continue;
    stops.push_back(z);
    mapped.push_back(true);
  }
  if (stops.empty() || stops.back() < z_max) {
    stops.push_back(z_max);
    mapped.push_back(false);
  }

  Table trace{"noise-evolution",
              {"system", "n_sites", "c_s", "g", "gamma", "z", "m", "n", "log_negativity",
               "central_photon_number"},
              {},
              {}};
  Table maps{"noise-evolution-maps", kMapColumns, {}, {}};
  const int half = static_cast<int>(c.integer("map_half_width"));
  double last_z = -1.0;

  AnyMoments s = initial_vacuum(p);
  for (std::size_t k = 0; k < stops.size(); ++k) {
    const double stop = stops[k];
    s = std::visit(
        [&](auto m) -> AnyMoments {
          using S = decltype(m);
          return evolve(std::move(m), p, stop, Observer<S>([&](const S& st) {
                          if (st.z <= last_z + 1e-9) return;
                          last_z = st.z;
                          const double e = pair_log_negativity(st, pm, pn);
                          trace.add_row({name_of(p.system), std::int64_t{p.n_sites}, p.c_s, p.g,
                                         p.gamma, st.z, std::int64_t{pm}, std::int64_t{pn}, e,
                                         photon_number_profile(st)(p.half_width())});
                          ctx.progress->note("z=" + fmt(st.z) + " E_N=" + fmt(e));
                        }),
                        every);
        },
        std::move(s));
    if (mapped[k]) add_map_rows(maps, map_of(s), p, half);
  }
  return {trace, maps};
}

std::vector<Table> oracle_check(const Config& c, RunContext& ctx) {
  const SimParams base = c.sim_params();
  EnsembleOptions eo;
  eo.paths = static_cast<std::size_t>(c.integer("paths"));
  eo.seed = c.seed("seed");
  eo.z_end = c.real("z_end");
  eo.workers = ctx.workers;
  eo.chunk = static_cast<std::size_t>(c.integer("chunk"));

  Table t{"oracle-check",
          {"system", "n_sites", "c_s", "g", "gamma", "z", "matrix", "m", "n", "ode_re", "ode_im",
           "oracle_re", "oracle_im", "std_error", "z_score"},
          {},
          {}};
  for (MomentSystem sys : systems_of(c)) {
    const SimParams p = with_system(base, sys);
    ctx.progress->note(name_of(sys) + ": " + std::to_string(eo.paths) + " realizations", true);
    const EnsembleEstimate est = ensemble_moments(p, eo);
    const AnyMoments ode = advance(initial_vacuum(p), p, eo.z_end);
    double worst = 0.0, worst_diff = 0.0;
    std::size_t entries = 0, over = 0;
    std::visit(
        [&](const auto& mean) {
          using S = std::decay_t<decltype(mean)>;
          const auto& ref = std::get<S>(ode);
          const int half = p.half_width();
          for (std::size_t k = 0; k < S::kCount; ++k) {
            for (int m = -half; m <= half; ++m) {
              for (int n = -half; n <= half; ++n) {
                const cplx a = ref.mats[k](m + half, n + half);
                const cplx b = mean.mats[k](m + half, n + half);
                const double se = est.std_error[k](m + half, n + half);
                const double diff = std::abs(a - b);
                // entries with no spread must agree to integrator accuracy
                const double zs = se > 0.0 ? diff / se : (diff <= 1e-8 * (1.0 + std::abs(a)) ? 0.0 : kInf);
                worst = std::max(worst, zs);
                worst_diff = std::max(worst_diff, diff);
                ++entries;
                if (zs > 3.0) ++over;
                t.add_row({name_of(sys), std::int64_t{p.n_sites}, p.c_s, p.g, p.gamma, z_of(ode),
                           std::string(S::kNames[k]), std::int64_t{m}, std::int64_t{n}, a.real(),
                           a.imag(), b.real(), b.imag(), se, zs});
              }
            }
          }
        },
        est.mean);
    const std::string tag = name_of(sys);
    t.add_meta(tag + ".entries", std::to_string(entries));
    t.add_meta(tag + ".entries_beyond_3_std_errors", std::to_string(over));
    t.add_meta(tag + ".max_z_score", fmt(worst));
    t.add_meta(tag + ".max_abs_difference", fmt(worst_diff));
  }
  t.add_meta("std_error", "standard error of the complex mean, sqrt((var re + var im) / paths)");
  return {t};
}

std::vector<Table> kernel_check(const Config& c, RunContext& ctx) {
  SimParams p = c.sim_params();
  p.g = 0.0;
  const double z_max = c.real("z_max");
  const GreenTrajectory traj = lattice_green_trajectory(p, z_max);
  ctx.progress->note("memory identity", true);
  const double residual = memory_identity_residual(p, z_max);
  const long every = std::max(1L, std::lround(c.real("sample_dz") / p.dz));
  Table t{"kernel-check",
          {"n_sites", "c_s", "z", "a0_re", "a0_im", "bessel_j0", "abs_error"},
          {},
          {}};
  double worst = 0.0;
  for (std::size_t k = 0; k < traj.a0.size(); ++k) {
    const double z = static_cast<double>(k) * p.dz;
    const double j0 = bessel_j(0, 2.0 * p.c_s * z);
    const double err = std::abs(traj.a0[k] - j0);
    worst = std::max(worst, err);
    if (static_cast<long>(k) % every == 0 || k + 1 == traj.a0.size()) {
      t.add_row({std::int64_t{p.n_sites}, p.c_s, z, traj.a0[k].real(), traj.a0[k].imag(), j0, err});
    }
  }
  t.add_meta("max_abs_error", fmt(worst));
  t.add_meta("memory_identity_residual", fmt(residual));
  return {t};
}

std::vector<Table> threshold_scan(const Config& c, RunContext& ctx) {
  const SimParams base = c.sim_params();
  const std::string& method = c.text("method");
  std::vector<std::string> methods;
  if (method != "reduced") methods.push_back("lattice");
  if (method != "lattice") methods.push_back("reduced");
  const GrowthWindow window{c.real("z_lo"), c.real("z_hi")};

  struct Evaluation {
    double g;
    GrowthFit fit;
  };
  std::vector<std::vector<Evaluation>> evals(methods.size());
  std::vector<ThresholdBracket> brackets(methods.size());
  parallel_for(methods.size(), ctx.workers, [&](std::size_t i) {
    auto classify = [&](double g) {
      SimParams p = base;
      p.g = g;
      GrowthFit fit;
      if (methods[i] == "lattice") {
        fit = classify_lattice_growth(p, window);
      } else {
        p.dz = c.real("reduced_dz");
        fit = classify_reduced_growth(p, window);
      }
      evals[i].push_back({g, fit});
      ctx.progress->note(methods[i] + " g=" + fmt(g) + " rate=" + fmt(fit.rate));
      return fit.growth;
    };
    brackets[i] = bisect_threshold(classify, c.real("g_lo"), c.real("g_hi"), c.real("resolution"));
  });

  Table t{"threshold-scan",
          {"method", "n_sites", "c_s", "g", "gamma", "growth", "rate", "r_squared", "log_increase"},
          {},
          {}};
  Table b{"threshold-bracket", {"method", "n_sites", "c_s", "g_below", "g_above", "evaluations"}, {}, {}};
  for (std::size_t i = 0; i < methods.size(); ++i) {
    auto list = evals[i];
    std::sort(list.begin(), list.end(), [](const auto& x, const auto& y) { return x.g < y.g; });
    for (const auto& e : list) {
      t.add_row({methods[i], std::int64_t{base.n_sites}, base.c_s, e.g, 0.0,
                 std::string(e.fit.growth == GrowthClass::Exponential ? "exponential"
                                                                      : "sub-exponential"),
                 e.fit.rate, e.fit.r_squared, e.fit.log_increase});
    }
    b.add_row({methods[i], std::int64_t{base.n_sites}, base.c_s, brackets[i].below, brackets[i].above,
               std::int64_t{brackets[i].evaluations}});
  }
  t.add_meta("fit_window", c.text("z_lo") + " <= z <= " + c.text("z_hi"));
  return {t, b};
}

std::vector<Table> purity_check(const Config& c, RunContext& ctx) {
  const SimParams base = c.sim_params();
  const auto systems = systems_of(c);
  std::vector<double> defects(systems.size());
  std::vector<double> zs(systems.size());
  parallel_for(systems.size(), ctx.workers, [&](std::size_t i) {
    const SimParams p = with_system(base, systems[i]);
    const AnyMoments s = advance(initial_vacuum(p), p, c.real("z"));
    zs[i] = z_of(s);
    defects[i] = std::visit([](const auto& m) { return global_purity_check(m); }, s);
    ctx.progress->note(name_of(systems[i]) + " done");
  });
  Table t{"purity-check",
          {"system", "n_sites", "c_s", "g", "gamma", "z", "max_symplectic_deviation"},
          {},
          {}};
  t.add_meta("max_symplectic_deviation", "max over k of |nu_k - 1/2|");
  for (std::size_t i = 0; i < systems.size(); ++i) {
    t.add_row({name_of(systems[i]), std::int64_t{base.n_sites}, base.c_s, base.g, base.gamma, zs[i],
               defects[i]});
  }
  return {t};
}

using Runner = std::vector<Table> (*)(const Config&, RunContext&);

Runner runner_for(const std::string& name) {
  if (name == "intensity-profile") return intensity_profile;
  if (name == "intensity-vs-z") return intensity_vs_z;
  if (name == "entangle-map") return entangle_map;
  if (name == "stationary-sweep") return stationary_sweep;
  if (name == "survival-distance") return survival;
  if (name == "noise-evolution") return noise_evolution;
  if (name == "oracle-check") return oracle_check;
  if (name == "kernel-check") return kernel_check;
  if (name == "threshold-scan") return threshold_scan;
  if (name == "purity-check") return purity_check;
  throw ConfigError("unknown experiment '" + name + "'");
}

}  // namespace

std::vector<Table> run_experiment(const Config& config, RunContext& context) {
  Progress silent(true, 0.0, "");
  RunContext ctx = context;
  if (ctx.progress == nullptr) ctx.progress = &silent;
  ctx.workers = std::max(1u, ctx.workers);
  std::vector<Table> tables = runner_for(config.experiment())(config, ctx);
  for (auto& t : tables) {
    std::vector<std::pair<std::string, std::string>> head = {
        {"tool", std::string("wgarray ") + WGARRAY_VERSION},
        {"experiment", config.experiment()},
        {"seed", config.text("seed")}};
    t.meta.insert(t.meta.begin(), head.begin(), head.end());
  }
  return tables;
}

std::vector<std::string> write_outputs(const Config& config, const std::vector<Table>& tables,
                                       const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
  std::vector<std::string> written;
  auto open = [&](const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    written.push_back(path.string());
    return out;
  };
  const bool json = config.boolean("json");
  for (const auto& t : tables) {
    {
      auto out = open(fs::path(dir) / (t.name + ".csv"));
      write_csv(t, out);
    }
    if (json) {
      auto out = open(fs::path(dir) / (t.name + ".json"));
      write_json(t, out);
    }
  }
  nlohmann::ordered_json meta;
  meta["tool"] = "wgarray";
  meta["version"] = WGARRAY_VERSION;
  meta["experiment"] = config.experiment();
  meta["seed"] = config.text("seed");
  meta["config"] = nlohmann::ordered_json::object();
  for (const auto& [key, value] : config.entries()) meta["config"][key] = value;
  meta["tables"] = nlohmann::ordered_json::array();
  for (const auto& t : tables) meta["tables"].push_back(t.name);
  {
    auto out = open(fs::path(dir) / "metadata.json");
    out << meta.dump(2) << "\n";
  }
  {
    auto out = open(fs::path(dir) / "config.resolved");
    out << config.render();
  }
  return written;
}

}  // namespace wgarray
