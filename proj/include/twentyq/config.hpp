// Experiment configuration: strict JSON ingestion.
//
// Unknown keys anywhere in the file are rejected with their full path, so a
// typo cannot silently fall back to a default.  Threshold fields are
// optional; when omitted they are derived from the channel at load-
// resolution time using the design-equation choice of (lambda1, lambda2, a).

#pragma once

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "twentyq/channel.hpp"
#include "twentyq/csv.hpp"
#include "twentyq/eavesdropper.hpp"
#include "twentyq/procedure.hpp"

namespace twentyq {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void require_keys(const json& j, const std::string& path,
                         const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key()))
      throw ConfigError("unknown key '" + path + "." + it.key() + "'");
  }
}

template <typename T>
T get_required(const json& j, const std::string& path, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("missing key '" + path + "." + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + path + "." + key + "'");
  }
}

template <typename T>
T get_or(const json& j, const std::string& path, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + path + "." + key + "'");
  }
}

inline std::size_t line_of_offset(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

}  // namespace detail

struct ChannelSpec {
  HFunction h = HFunction::constant(0.1);

  QueryDependentChannel make() const { return QueryDependentChannel::bsc(h); }
};

enum class TargetMode { Uniform, Grid };
enum class ETauSMode { Asymptotic, MonteCarlo };

struct SweepAxis {
  std::string path;  // dotted config path, e.g. "procedure.L"
  std::vector<json> values;
};

struct ExperimentConfig {
  ChannelSpec channel;

  int levels = 2;
  int total_bins = 16;
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  std::optional<double> a_accept;
  std::optional<double> a_reject;
  double eps_prime = 0.01;
  double eps0 = 0.0;
  int stage1_cap = 0;
  int stage2_cap = 0;
  InfoDensityMode info_mode = InfoDensityMode::Nominal;
  Stage1Decode stage1_decode = Stage1Decode::MaxIndex;

  long trials = 1000;
  std::uint64_t master_seed = 1;
  int workers = 0;  // 0 = hardware concurrency
  double delta = 0.0;  // 0 = 1/M
  TargetMode target_mode = TargetMode::Uniform;
  std::vector<AdversaryKind> adversaries{AdversaryKind::UniformRandom,
                                         AdversaryKind::OffsetHeuristic};
  std::string output_dir = ".";
  ETauSMode e_tau_s_mode = ETauSMode::Asymptotic;
  long e_tau_s_trials = 10000;
  std::vector<SweepAxis> sweep_axes;

  json raw;  // canonical source, used for hashing and sweep overrides

  double resolution() const { return delta > 0.0 ? delta : 1.0 / total_bins; }

  std::string config_hash() const { return hex64(fnv1a64(raw.dump())); }

  // Fills the threshold fields that were left to the design equations.
  ProcedureConfig resolve_procedure(const ChannelConstants& k) const {
    ProcedureConfig p;
    p.levels = levels;
    p.total_bins = total_bins;
    p.eps_prime = eps_prime;
    p.eps0 = eps0;
    p.stage1_cap = stage1_cap;
    p.stage2_cap = stage2_cap;
    p.info_mode = info_mode;
    p.stage1_decode = stage1_decode;
    if (lambda1 && lambda2 && a_accept && a_reject) {
      p.lambda1 = *lambda1;
      p.lambda2 = *lambda2;
      p.a_accept = *a_accept;
      p.a_reject = *a_reject;
    } else if (!lambda1 && !lambda2 && !a_accept && !a_reject) {
      ParameterSelection sel = select_parameters(levels, eps_prime, 1.0, k);
      p.lambda1 = sel.lambda1;
      p.lambda2 = sel.lambda2;
      p.a_accept = sel.a;
      p.a_reject = sel.a;
    } else {
      throw ConfigError(
          "procedure: give all of lambda1, lambda2, a_accept, a_reject or none of them");
    }
    p.validate();
    return p;
  }
};

inline ExperimentConfig parse_config(const json& j);

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ":" + std::to_string(detail::line_of_offset(text, e.byte)) +
                      ": " + e.what());
  }
  try {
    return parse_config(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline ExperimentConfig parse_config(const json& j) {
  using detail::get_or;
  using detail::get_required;
  using detail::require_keys;

  require_keys(j, "config",
               {"channel", "procedure", "trials", "master_seed", "workers", "delta",
                "target_mode", "adversaries", "output_dir", "bounds", "sweep"});

  ExperimentConfig cfg;
  cfg.raw = j;

  const json& ch = j.contains("channel") ? j.at("channel") : json::object();
  require_keys(ch, "channel", {"kind", "h"});
  std::string kind = get_or<std::string>(ch, "channel", "kind", "bsc");
  if (kind != "bsc") throw ConfigError("channel.kind: only 'bsc' is supported in configs");
  if (!ch.contains("h")) throw ConfigError("missing key 'channel.h'");
  const json& h = ch.at("h");
  require_keys(h, "channel.h", {"type", "c0", "c1", "q"});
  std::string htype = get_required<std::string>(h, "channel.h", "type");
  try {
    if (htype == "affine") {
      cfg.channel.h = HFunction::affine(get_required<double>(h, "channel.h", "c0"),
                                        get_required<double>(h, "channel.h", "c1"));
    } else if (htype == "constant") {
      cfg.channel.h = HFunction::constant(get_required<double>(h, "channel.h", "q"));
    } else {
      throw ConfigError("channel.h.type must be 'affine' or 'constant'");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("channel.h: ") + e.what());
  }

  if (!j.contains("procedure")) throw ConfigError("missing key 'procedure'");
  const json& p = j.at("procedure");
  require_keys(p, "procedure",
               {"L", "M", "lambda1", "lambda2", "a_accept", "a_reject", "eps_prime", "eps0",
                "stage1_cap", "stage2_cap", "info_density_mode", "stage1_decode",
                "sortpm_split_bin"});
  cfg.levels = get_required<int>(p, "procedure", "L");
  cfg.total_bins = get_required<int>(p, "procedure", "M");
  if (p.contains("lambda1")) cfg.lambda1 = get_required<double>(p, "procedure", "lambda1");
  if (p.contains("lambda2")) cfg.lambda2 = get_required<double>(p, "procedure", "lambda2");
  if (p.contains("a_accept")) cfg.a_accept = get_required<double>(p, "procedure", "a_accept");
  if (p.contains("a_reject")) cfg.a_reject = get_required<double>(p, "procedure", "a_reject");
  cfg.eps_prime = get_or<double>(p, "procedure", "eps_prime", 0.01);
  cfg.eps0 = get_or<double>(p, "procedure", "eps0", 0.0);
  cfg.stage1_cap = get_or<int>(p, "procedure", "stage1_cap", 0);
  cfg.stage2_cap = get_or<int>(p, "procedure", "stage2_cap", 0);
  std::string mode = get_or<std::string>(p, "procedure", "info_density_mode", "nominal");
  if (mode == "nominal") {
    cfg.info_mode = InfoDensityMode::Nominal;
  } else if (mode == "realized") {
    cfg.info_mode = InfoDensityMode::Realized;
  } else {
    throw ConfigError("procedure.info_density_mode must be 'nominal' or 'realized'");
  }
  std::string decode = get_or<std::string>(p, "procedure", "stage1_decode", "max_index");
  if (decode == "max_index") {
    cfg.stage1_decode = Stage1Decode::MaxIndex;
  } else if (decode == "argmax_density") {
    cfg.stage1_decode = Stage1Decode::ArgmaxDensity;
  } else {
    throw ConfigError("procedure.stage1_decode must be 'max_index' or 'argmax_density'");
  }
  if (get_or<bool>(p, "procedure", "sortpm_split_bin", false))
    throw ConfigError("procedure.sortpm_split_bin: splitting a boundary bin is not supported");

  cfg.trials = get_or<long>(j, "config", "trials", 1000);
  if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
  cfg.master_seed = get_or<std::uint64_t>(j, "config", "master_seed", 1);
  cfg.workers = get_or<int>(j, "config", "workers", 0);
  if (cfg.workers < 0) throw ConfigError("workers must be >= 0");
  cfg.delta = get_or<double>(j, "config", "delta", 0.0);
  if (cfg.delta < 0.0 || cfg.delta > 1.0) throw ConfigError("delta must be in [0,1]");
  std::string tmode = get_or<std::string>(j, "config", "target_mode", "uniform");
  if (tmode == "uniform") {
    cfg.target_mode = TargetMode::Uniform;
  } else if (tmode == "grid") {
    cfg.target_mode = TargetMode::Grid;
  } else {
    throw ConfigError("target_mode must be 'uniform' or 'grid'");
  }
  if (j.contains("adversaries")) {
    cfg.adversaries.clear();
    if (!j.at("adversaries").is_array()) throw ConfigError("adversaries must be a list");
    for (const json& a : j.at("adversaries")) {
      std::string name = a.get<std::string>();
      if (name == "uniform_random") {
        cfg.adversaries.push_back(AdversaryKind::UniformRandom);
      } else if (name == "offset_heuristic") {
        cfg.adversaries.push_back(AdversaryKind::OffsetHeuristic);
      } else {
        throw ConfigError("unknown adversary '" + name + "'");
      }
    }
  }
  cfg.output_dir = get_or<std::string>(j, "config", "output_dir", ".");

  if (j.contains("bounds")) {
    const json& b = j.at("bounds");
    require_keys(b, "bounds", {"e_tau_s_mode", "mc_trials"});
    std::string em = get_or<std::string>(b, "bounds", "e_tau_s_mode", "asymptotic");
    if (em == "asymptotic") {
      cfg.e_tau_s_mode = ETauSMode::Asymptotic;
    } else if (em == "mc") {
      cfg.e_tau_s_mode = ETauSMode::MonteCarlo;
    } else {
      throw ConfigError("bounds.e_tau_s_mode must be 'asymptotic' or 'mc'");
    }
    cfg.e_tau_s_trials = get_or<long>(b, "bounds", "mc_trials", 10000);
  }

  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    require_keys(s, "sweep", {"axes"});
    if (s.contains("axes")) {
      if (!s.at("axes").is_array()) throw ConfigError("sweep.axes must be a list");
      for (const json& ax : s.at("axes")) {
        require_keys(ax, "sweep.axes[]", {"path", "values"});
        SweepAxis axis;
        axis.path = get_required<std::string>(ax, "sweep.axes[]", "path");
        if (!ax.at("values").is_array() || ax.at("values").empty())
          throw ConfigError("sweep.axes[].values must be a nonempty list");
        for (const json& v : ax.at("values")) axis.values.push_back(v);
        cfg.sweep_axes.push_back(std::move(axis));
      }
    }
  }
  return cfg;
}

// Applies a sweep override at a dotted path and re-validates the result.
inline ExperimentConfig apply_override(const ExperimentConfig& base, const std::string& path,
                                       const json& value) {
  json j = base.raw;
  json* node = &j;
  std::string rest = path;
  for (;;) {
    std::size_t dot = rest.find('.');
    std::string key = rest.substr(0, dot);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    if (!node->contains(key)) (*node)[key] = json::object();
    node = &(*node)[key];
    rest = rest.substr(dot + 1);
  }
  return parse_config(j);
}

}  // namespace twentyq
