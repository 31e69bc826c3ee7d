#pragma once

/** @file config.hpp
    @brief Run configuration and its `key = value` text format.
*/

#include "error.hpp"
#include "pou.hpp"
#include "snapshot.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

namespace gmsfem {

struct RunConfig
{
  // grid
  int coarse_nx = 10;
  int coarse_ny = 10;
  int fine_per_coarse = 10;
  // offline space
  int oversample_t = 3;
  int k_nb = 10;
  int p_bf = 4;
  SnapshotMode snapshot_mode = SnapshotMode::random;
  KappaTildeMode kappa_tilde_mode = KappaTildeMode::kappa;
  PouMode pou_mode = PouMode::multiscale;
  std::uint64_t seed = 1;
  // coefficient: a field file, or the channel generator
  std::string field_path;
  double contrast = 1e4;
  std::uint64_t field_seed = 1;
  int channel_margin = -1; ///< fine cells along ∂D kept at background; negative means one coarse block
  // problem data: g = g_const + g_x x + g_y y on ∂D, f constant
  double g_const = 0.0;
  double g_x = 1.0;
  double g_y = 1.0;
  double f_value = 0.0;
  // experiment tables
  int full_max_knb = 25; ///< compare: full-snapshot rows are skipped above this k_nb
  // adaptive
  double theta = 0.3;
  int c_nb = 2;
  int c_bf = 1;
  int max_iter = 60;
  double target_err = 0.0;
  int max_dim = 0;
  // lemma check (toy neighborhood of the current grid)
  int lemma_node_x = 1;
  int lemma_node_y = 1;
  int lemma_k = 2;
  int lemma_l = 6;
  int lemma_tests = 50;
  int lemma_seeds = 5;

  /// Throws ConfigError on any out-of-range value.
  void validate() const;
};

namespace detail {

inline std::string trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& value)
{
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  std::from_chars_result r;
  if constexpr (std::is_floating_point_v<T>)
    r = std::from_chars(first, last, out, std::chars_format::general);
  else
    r = std::from_chars(first, last, out);
  if (r.ec != std::errc() || r.ptr != last || value.empty())
    throw ConfigError("invalid value '" + value + "' for key '" + key + "'");
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(out)) throw ConfigError("non-finite value for key '" + key + "'");
  return out;
}

inline std::string format_double(double v)
{
  // shortest representation that reads back to the same double
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

struct ConfigKey
{
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
ConfigKey number_key(std::string name, T RunConfig::*member)
{
  return {name,
          [name, member](RunConfig& c, const std::string& v) { c.*member = parse_number<T>(name, v); },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return format_double(c.*member);
            else
              return std::to_string(c.*member);
          }};
}

inline const std::vector<ConfigKey>& config_keys()
{
  static const std::vector<ConfigKey> keys = {
      number_key("coarse_nx", &RunConfig::coarse_nx),
      number_key("coarse_ny", &RunConfig::coarse_ny),
      number_key("fine_per_coarse", &RunConfig::fine_per_coarse),
      number_key("oversample_t", &RunConfig::oversample_t),
      number_key("k_nb", &RunConfig::k_nb),
      number_key("p_bf", &RunConfig::p_bf),
      {"snapshot_mode", [](RunConfig& c, const std::string& v) { c.snapshot_mode = parse_snapshot_mode(v); },
       [](const RunConfig& c) { return to_string(c.snapshot_mode); }},
      {"kappa_tilde_mode", [](RunConfig& c, const std::string& v) { c.kappa_tilde_mode = parse_kappa_tilde_mode(v); },
       [](const RunConfig& c) { return to_string(c.kappa_tilde_mode); }},
      {"pou_mode", [](RunConfig& c, const std::string& v) { c.pou_mode = parse_pou_mode(v); },
       [](const RunConfig& c) { return to_string(c.pou_mode); }},
      number_key("seed", &RunConfig::seed),
      {"field_path", [](RunConfig& c, const std::string& v) { c.field_path = v; },
       [](const RunConfig& c) { return c.field_path; }},
      number_key("contrast", &RunConfig::contrast),
      number_key("field_seed", &RunConfig::field_seed),
      number_key("channel_margin", &RunConfig::channel_margin),
      number_key("g_const", &RunConfig::g_const),
      number_key("g_x", &RunConfig::g_x),
      number_key("g_y", &RunConfig::g_y),
      number_key("f_value", &RunConfig::f_value),
      number_key("full_max_knb", &RunConfig::full_max_knb),
      number_key("theta", &RunConfig::theta),
      number_key("c_nb", &RunConfig::c_nb),
      number_key("c_bf", &RunConfig::c_bf),
      number_key("max_iter", &RunConfig::max_iter),
      number_key("target_err", &RunConfig::target_err),
      number_key("max_dim", &RunConfig::max_dim),
      number_key("lemma_node_x", &RunConfig::lemma_node_x),
      number_key("lemma_node_y", &RunConfig::lemma_node_y),
      number_key("lemma_k", &RunConfig::lemma_k),
      number_key("lemma_l", &RunConfig::lemma_l),
      number_key("lemma_tests", &RunConfig::lemma_tests),
      number_key("lemma_seeds", &RunConfig::lemma_seeds),
  };
  return keys;
}

} // namespace detail

/// Names of all configuration keys, in file order.
inline std::vector<std::string> config_key_names()
{
  std::vector<std::string> out;
  for (const auto& k : detail::config_keys()) out.push_back(k.name);
  return out;
}

/// Set one key from its text value. Unknown keys are an error.
inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value)
{
  for (const auto& k : detail::config_keys())
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  throw ConfigError("unknown configuration key '" + key + "'");
}

inline std::string get_config_value(const RunConfig& cfg, const std::string& key)
{
  for (const auto& k : detail::config_keys())
    if (k.name == key) return k.get(cfg);
  throw ConfigError("unknown configuration key '" + key + "'");
}

/// `key = value` lines; `#` starts a comment; blank lines ignored. Keys not
/// present keep the values already in `cfg`.
inline void read_config(std::istream& in, RunConfig& cfg)
{
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    set_config_value(cfg, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
  }
}

inline RunConfig parse_config(const std::string& text)
{
  RunConfig cfg;
  std::istringstream in(text);
  read_config(in, cfg);
  return cfg;
}

inline RunConfig load_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  RunConfig cfg;
  read_config(in, cfg);
  return cfg;
}

/// Every key, one per line; reading it back gives an identical RunConfig.
inline std::string format_config(const RunConfig& cfg)
{
  std::string out;
  for (const auto& k : detail::config_keys()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

inline bool operator==(const RunConfig& a, const RunConfig& b) { return format_config(a) == format_config(b); }

inline void RunConfig::validate() const
{
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
  };
  auto nonneg = [](int v, const char* name) {
    if (v < 0) throw ConfigError(std::string(name) + " must be >= 0");
  };
  positive(coarse_nx, "coarse_nx");
  positive(coarse_ny, "coarse_ny");
  positive(fine_per_coarse, "fine_per_coarse");
  nonneg(oversample_t, "oversample_t");
  nonneg(k_nb, "k_nb");
  nonneg(p_bf, "p_bf");
  nonneg(full_max_knb, "full_max_knb");
  positive(c_nb, "c_nb");
  nonneg(c_bf, "c_bf");
  nonneg(max_iter, "max_iter");
  nonneg(max_dim, "max_dim");
  positive(lemma_k, "lemma_k");
  positive(lemma_tests, "lemma_tests");
  positive(lemma_seeds, "lemma_seeds");
  if (lemma_l <= lemma_k) throw ConfigError("lemma_l must exceed lemma_k");
  if (!(contrast >= 1.0)) throw ConfigError("contrast must be >= 1");
  if (!(theta > 0.0 && theta <= 1.0)) throw ConfigError("theta must lie in (0, 1]");
  if (!(target_err >= 0.0)) throw ConfigError("target_err must be >= 0");
  if (snapshot_mode == SnapshotMode::random && k_nb + p_bf < 1)
    throw ConfigError("random mode needs k_nb + p_bf >= 1");
  if (lemma_node_x < 0 || lemma_node_x > coarse_nx || lemma_node_y < 0 || lemma_node_y > coarse_ny)
    throw ConfigError("lemma node lies outside the coarse grid");
}

} // namespace gmsfem
