#pragma once

// Experiment configuration: a plain text file of `key = value` lines with
// '#' comments, plus command-line overrides. Every experiment has its own
// set of accepted keys with defaults; anything else is rejected with the
// file name and line number.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wgarray/params.hpp"

namespace wgarray {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ValueKind { Integer, Real, Seed, Boolean, Choice, RealList, SitePair };

struct KeySpec {
  std::string_view name;
  ValueKind kind;
  std::string_view help;
  double min = -1e300;  ///< inclusive bounds for numbers and list entries
  double max = 1e300;
  std::string_view choices = {};  ///< '|' separated, for Choice
};

struct ExperimentSpec {
  std::string_view name;
  std::string_view summary;
  /// accepted keys in output order, with their defaults
  std::vector<std::pair<std::string_view, std::string_view>> defaults;
};

const std::vector<KeySpec>& key_catalogue();
const KeySpec* find_key(std::string_view name);
const std::vector<ExperimentSpec>& experiment_catalogue();
const ExperimentSpec* find_experiment(std::string_view name);

/// One `key = value` assignment and where it came from.
struct Assignment {
  std::string key;
  std::string value;
  std::string origin;  ///< "file:line" or "--set"
};

/// Parses the text of a config file. Syntax errors and duplicate keys throw
/// ConfigError naming `source:line`.
std::vector<Assignment> parse_config_text(std::string_view text, std::string_view source);
std::vector<Assignment> read_config_file(const std::string& path);
/// Parses a `key=value` override.
Assignment parse_override(std::string_view text);

/// Fully resolved configuration: every key of the experiment with its
/// effective value, defaults materialized, all values checked.
class Config {
 public:
  /// Later assignments win over earlier ones.
  static Config resolve(const std::vector<Assignment>& assignments);

  const std::string& experiment() const { return experiment_; }
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  bool has(std::string_view key) const;
  const std::string& text(std::string_view key) const;
  double real(std::string_view key) const;
  long integer(std::string_view key) const;
  std::uint64_t seed(std::string_view key) const;
  bool boolean(std::string_view key) const;
  std::vector<double> reals(std::string_view key) const;
  std::pair<int, int> site_pair(std::string_view key) const;

  /// Lattice parameters from n_sites, c_s, g, gamma, dz and system (when
  /// present; system "both" maps to degenerate).
  SimParams sim_params() const;

  /// Resolved config as `key = value` lines, readable by parse_config_text.
  std::string render() const;

 private:
  std::string experiment_;
  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

}  // namespace wgarray
