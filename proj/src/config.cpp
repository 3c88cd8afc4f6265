#include "wgarray/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "wgarray/errors.hpp"

namespace wgarray {

namespace {

constexpr double kTiny = 1e-12;

const std::vector<KeySpec> kKeys = {
    {"experiment", ValueKind::Choice, "experiment to run", 0, 0,
     "intensity-profile|intensity-vs-z|entangle-map|stationary-sweep|survival-distance|"
     "noise-evolution|oracle-check|kernel-check|threshold-scan|purity-check"},
    {"n_sites", ValueKind::Integer, "number of guides (odd)", 3, 4097},
    {"c_s", ValueKind::Real, "nearest-neighbour coupling", 0, 100},
    {"g", ValueKind::Real, "parametric gain", 0, 100},
    {"gamma", ValueKind::Real, "pump phase-diffusion rate", 0, 10},
    {"dz", ValueKind::Real, "RK4 step", kTiny, 1},
    {"system", ValueKind::Choice, "moment system", 0, 0, "degenerate|general|both"},
    {"seed", ValueKind::Seed, "base seed for stochastic parts"},
    {"json", ValueKind::Boolean, "also write a JSON mirror of every table"},
    {"progress_interval", ValueKind::Real, "seconds between progress lines", 0, 1e6},
    {"z", ValueKind::Real, "propagation distance", 0, 1e4},
    {"z_list", ValueKind::RealList, "propagation distances", 0, 1e4},
    {"z_max", ValueKind::Real, "largest propagation distance", kTiny, 1e4},
    {"z_min", ValueKind::Real, "earliest distance a plateau may be declared", 0, 1e4},
    {"z_end", ValueKind::Real, "propagation distance of the ensemble", 0, 1e4},
    {"z_lo", ValueKind::Real, "start of the growth-fit window", kTiny, 1e4},
    {"z_hi", ValueKind::Real, "end of the growth-fit window", kTiny, 1e4},
    {"sample_dz", ValueKind::Real, "output sampling interval", kTiny, 1e4},
    {"g_list", ValueKind::RealList, "gain grid", 0, 100},
    {"gamma_list", ValueKind::RealList, "phase-diffusion rates", 0, 10},
    {"g_lo", ValueKind::Real, "lower end of the threshold bracket", 0, 100},
    {"g_hi", ValueKind::Real, "upper end of the threshold bracket", 0, 100},
    {"resolution", ValueKind::Real, "bisection resolution in g", kTiny, 100},
    {"method", ValueKind::Choice, "growth model", 0, 0, "lattice|reduced|both"},
    {"reduced_dz", ValueKind::Real, "step of the reduced oscillator", kTiny, 1},
    {"pair", ValueKind::SitePair, "guide pair m,n (degenerate system)"},
    {"general_pair", ValueKind::SitePair, "guide pair m,n (general system)"},
    {"map_z", ValueKind::RealList, "distances at which maps are written", 0, 1e4},
    {"map_half_width", ValueKind::Integer, "maps keep |m|, |n| up to this", 0, 2048},
    {"plateau_tol", ValueKind::Real, "relative spread accepted as a plateau", kTiny, 1},
    {"window", ValueKind::Real, "plateau window length", kTiny, 1e3},
    {"probe", ValueKind::Real, "entanglement sampling interval", kTiny, 1e3},
    {"eps", ValueKind::Real, "log-negativity counted as zero", kTiny, 1},
    {"hold", ValueKind::Real, "distance E_N must stay below eps", 0, 1e4},
    {"paths", ValueKind::Integer, "ensemble size", 2, 1e8},
    {"chunk", ValueKind::Integer, "realizations per reduction chunk", 1, 1e6},
};

using Defaults = std::vector<std::pair<std::string_view, std::string_view>>;

Defaults with_common(Defaults extra) {
  Defaults d = {{"n_sites", "257"}, {"c_s", "1"}, {"seed", "1"}, {"json", "false"},
                {"progress_interval", "2"}};
  d.insert(d.end(), extra.begin(), extra.end());
  return d;
}

const std::vector<ExperimentSpec>& build_experiments() {
  static const std::vector<ExperimentSpec> list = {
      {"intensity-profile", "photon number across the lattice at given distances",
       with_common({{"g", "1"}, {"gamma", "0"}, {"dz", "0.001"}, {"system", "degenerate"},
                    {"z_list", "2.25, 3.75"}})},
      {"intensity-vs-z", "photon number in the central guide along z for several gains",
       with_common({{"g_list", "1.5, 2.2"}, {"gamma", "0"}, {"dz", "0.001"},
                    {"system", "degenerate"}, {"z_max", "3.75"}, {"sample_dz", "0.05"}})},
      {"entangle-map", "log-negativity of every guide pair at given distances",
       with_common({{"g", "1"}, {"gamma", "0"}, {"dz", "0.01"}, {"system", "both"},
                    {"z_list", "2.25, 7.5"}, {"map_half_width", "20"}})},
      {"stationary-sweep", "stationary log-negativity over a gain grid",
       with_common({{"g_list", "0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6"},
                    {"dz", "0.02"}, {"system", "both"}, {"pair", "1,-1"},
                    {"general_pair", "0,0"}, {"plateau_tol", "1e-4"}, {"window", "1"},
                    {"probe", "0.05"}, {"z_min", "2"}, {"z_max", "80"}})},
      {"survival-distance", "distance at which phase noise kills the pair entanglement",
       with_common({{"g_list", "0.5, 1.0, 1.5, 2.0"}, {"gamma_list", "1e-4, 1e-3, 1e-2"},
                    {"dz", "0.02"}, {"system", "degenerate"}, {"pair", "1,-1"},
                    {"eps", "1e-4"}, {"probe", "0.05"}, {"hold", "5"}, {"z_max", "200"}})},
      {"noise-evolution", "pair log-negativity along z under phase noise, with maps",
       with_common({{"g", "1"}, {"gamma", "1e-4"}, {"dz", "0.02"}, {"system", "degenerate"},
                    {"pair", "1,-1"}, {"z_max", "80"}, {"probe", "0.25"},
                    {"map_z", "20, 60"}, {"map_half_width", "10"}})},
      {"oracle-check", "moment equations against the Monte-Carlo Bogoliubov ensemble",
       with_common({{"g", "1"}, {"gamma", "1e-3"}, {"dz", "0.01"}, {"system", "degenerate"},
                    {"z_end", "10"}, {"paths", "10000"}, {"chunk", "32"}})},
      {"kernel-check", "discrete diffraction and the memory-kernel identity",
       with_common({{"dz", "0.001"}, {"z_max", "5"}, {"sample_dz", "0.1"}})},
      {"threshold-scan", "growth classification and bisection for the threshold gain",
       with_common({{"g_lo", "1.5"}, {"g_hi", "2.2"}, {"resolution", "0.05"}, {"dz", "0.01"},
                    {"reduced_dz", "0.001"}, {"method", "both"}, {"z_lo", "2"},
                    {"z_hi", "10"}})},
      {"purity-check", "symplectic spectrum of the whole lattice",
       with_common({{"g", "1"}, {"gamma", "0"}, {"dz", "0.001"}, {"system", "both"}, {"z", "5"}})},
  };
  for (const auto& e : list) {
    for (const auto& [key, value] : e.defaults) {
      if (find_key(key) == nullptr) throw std::logic_error("unknown default key");
    }
  }
  return list;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void fail(const std::string& origin, const std::string& message) {
  throw ConfigError(origin + ": " + message);
}

bool parse_double(std::string_view s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* begin = t.data();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size() && std::isfinite(out);
}

template <class Int>
bool parse_int(std::string_view s, Int& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string bounds_text(const KeySpec& k) {
  std::ostringstream os;
  os << "[" << k.min << ", " << k.max << "]";
  return os.str();
}

void check_value(const KeySpec& k, const std::string& value, const std::string& origin) {
  const std::string where = "key '" + std::string(k.name) + "'";
  auto in_range = [&](double v) { return v >= k.min && v <= k.max; };
  switch (k.kind) {
    case ValueKind::Integer: {
      long v = 0;
      if (!parse_int(value, v)) fail(origin, where + " expects an integer, got '" + value + "'");
      if (!in_range(static_cast<double>(v))) fail(origin, where + " must lie in " + bounds_text(k));
      return;
    }
    case ValueKind::Real: {
      double v = 0;
      if (!parse_double(value, v)) fail(origin, where + " expects a number, got '" + value + "'");
      if (!in_range(v)) fail(origin, where + " must lie in " + bounds_text(k));
      return;
    }
    case ValueKind::Seed: {
      std::uint64_t v = 0;
      if (!parse_int(value, v)) {
        fail(origin, where + " expects an unsigned 64-bit integer, got '" + value + "'");
      }
      return;
    }
    case ValueKind::Boolean:
      if (value != "true" && value != "false") fail(origin, where + " expects true or false");
      return;
    case ValueKind::Choice: {
      for (const auto& c : split(k.choices, '|')) {
        if (c == value) return;
      }
      fail(origin, where + " expects one of " + std::string(k.choices) + ", got '" + value + "'");
    }
    case ValueKind::RealList: {
      const auto parts = split(value, ',');
      for (const auto& p : parts) {
        double v = 0;
        if (!parse_double(p, v)) {
          fail(origin, where + " expects comma-separated numbers, got '" + value + "'");
        }
        if (!in_range(v)) fail(origin, where + " entries must lie in " + bounds_text(k));
      }
      return;
    }
    case ValueKind::SitePair: {
      const auto parts = split(value, ',');
      int a = 0, b = 0;
      if (parts.size() != 2 || !parse_int(parts[0], a) || !parse_int(parts[1], b)) {
        fail(origin, where + " expects two site indices 'm,n', got '" + value + "'");
      }
      return;
    }
  }
}

}  // namespace

const std::vector<KeySpec>& key_catalogue() { return kKeys; }

const KeySpec* find_key(std::string_view name) {
  for (const auto& k : kKeys) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

const std::vector<ExperimentSpec>& experiment_catalogue() {
  static const std::vector<ExperimentSpec>& list = build_experiments();
  return list;
}

const ExperimentSpec* find_experiment(std::string_view name) {
  for (const auto& e : experiment_catalogue()) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::vector<Assignment> parse_config_text(std::string_view text, std::string_view source) {
  std::vector<Assignment> out;
  std::map<std::string, int, std::less<>> seen;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? end : end - start);
    start = (end == std::string_view::npos) ? text.size() + 1 : end + 1;
    ++line_no;
    const std::string origin = std::string(source) + ":" + std::to_string(line_no);

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) fail(origin, "expected 'key = value', got '" + body + "'");
    Assignment a{trim(std::string_view(body).substr(0, eq)),
                 trim(std::string_view(body).substr(eq + 1)), origin};
    if (a.key.empty()) fail(origin, "missing key before '='");
    if (a.value.empty()) fail(origin, "missing value for key '" + a.key + "'");
    if (find_key(a.key) == nullptr) fail(origin, "unknown key '" + a.key + "'");
    if (auto it = seen.find(a.key); it != seen.end()) {
      fail(origin, "duplicate key '" + a.key + "' (first set on line " +
                       std::to_string(it->second) + ")");
    }
    seen.emplace(a.key, line_no);
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<Assignment> read_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

Assignment parse_override(std::string_view text) {
  const auto eq = text.find('=');
  const std::string origin = "--set " + std::string(text);
  if (eq == std::string_view::npos) fail(origin, "expected key=value");
  Assignment a{trim(text.substr(0, eq)), trim(text.substr(eq + 1)), origin};
  if (a.key.empty() || a.value.empty()) fail(origin, "expected key=value");
  if (find_key(a.key) == nullptr) fail(origin, "unknown key '" + a.key + "'");
  return a;
}

Config Config::resolve(const std::vector<Assignment>& assignments) {
  const Assignment* chosen = nullptr;
  for (const auto& a : assignments) {
    if (a.key == "experiment") chosen = &a;
  }
  if (chosen == nullptr) throw ConfigError("config: missing required key 'experiment'");
  check_value(*find_key("experiment"), chosen->value, chosen->origin);
  const ExperimentSpec* spec = find_experiment(chosen->value);

  Config c;
  c.experiment_ = chosen->value;
  c.entries_.emplace_back("experiment", c.experiment_);
  for (const auto& [key, value] : spec->defaults) {
    c.index_.emplace(std::string(key), c.entries_.size());
    c.entries_.emplace_back(std::string(key), std::string(value));
  }
  c.index_.emplace("experiment", 0);

  std::map<std::string, std::string, std::less<>> origin_of;
  for (const auto& a : assignments) {
    if (a.key == "experiment") continue;
    const auto it = c.index_.find(a.key);
    if (it == c.index_.end()) {
      fail(a.origin, "key '" + a.key + "' does not apply to experiment '" + c.experiment_ + "'");
    }
    check_value(*find_key(a.key), a.value, a.origin);
    c.entries_[it->second].second = a.value;
    origin_of[a.key] = a.origin;
  }

  auto origin = [&](std::string_view key) {
    const auto it = origin_of.find(key);
    return it == origin_of.end() ? std::string("default ") + std::string(key) : it->second;
  };
  if (c.has("n_sites") && c.integer("n_sites") % 2 == 0) {
    fail(origin("n_sites"), "key 'n_sites' must be odd");
  }
  if (c.has("z_lo") && c.has("z_hi") && !(c.real("z_lo") < c.real("z_hi"))) {
    fail(origin("z_hi"), "z_hi must exceed z_lo");
  }
  if (c.has("g_lo") && c.has("g_hi") && !(c.real("g_lo") < c.real("g_hi"))) {
    fail(origin("g_hi"), "g_hi must exceed g_lo");
  }
  if (c.experiment_ == "oracle-check" && c.integer("n_sites") > 41) {
    fail(origin("n_sites"), "oracle-check supports at most 41 sites");
  }
  for (const char* key : {"pair", "general_pair"}) {
    if (!c.has(key)) continue;
    const auto [m, n] = c.site_pair(key);
    const int half = static_cast<int>(c.integer("n_sites") / 2);
    if (std::abs(m) > half || std::abs(n) > half) {
      fail(origin(key), std::string("key '") + key + "' names a guide outside the lattice");
    }
    if (std::string_view(key) == "pair" && m == n) {
      fail(origin(key), "key 'pair' needs two distinct guides");
    }
  }
  try {
    c.sim_params().validate();
  } catch (const InvalidParameter& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }
  return c;
}

bool Config::has(std::string_view key) const { return index_.find(key) != index_.end(); }

const std::string& Config::text(std::string_view key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) {
    throw std::logic_error("config key '" + std::string(key) + "' not available for " + experiment_);
  }
  return entries_[it->second].second;
}

double Config::real(std::string_view key) const {
  double v = 0;
  parse_double(text(key), v);
  return v;
}

long Config::integer(std::string_view key) const {
  long v = 0;
  parse_int(text(key), v);
  return v;
}

std::uint64_t Config::seed(std::string_view key) const {
  std::uint64_t v = 0;
  parse_int(text(key), v);
  return v;
}

bool Config::boolean(std::string_view key) const { return text(key) == "true"; }

std::vector<double> Config::reals(std::string_view key) const {
  std::vector<double> out;
  for (const auto& p : split(text(key), ',')) {
    double v = 0;
    parse_double(p, v);
    out.push_back(v);
  }
  return out;
}

std::pair<int, int> Config::site_pair(std::string_view key) const {
  const auto parts = split(text(key), ',');
  int m = 0, n = 0;
  parse_int(parts.at(0), m);
  parse_int(parts.at(1), n);
  return {m, n};
}

SimParams Config::sim_params() const {
  SimParams p;
  if (has("n_sites")) p.n_sites = static_cast<int>(integer("n_sites"));
  if (has("c_s")) p.c_s = real("c_s");
  if (has("g")) p.g = real("g");
  if (has("gamma")) p.gamma = real("gamma");
  if (has("dz")) p.dz = real("dz");
  if (has("system") && text("system") == "general") p.system = MomentSystem::General;
  return p;
}

std::string Config::render() const {
  std::string out;
  for (const auto& [key, value] : entries_) out += key + " = " + value + "\n";
  return out;
}

}  // namespace wgarray
