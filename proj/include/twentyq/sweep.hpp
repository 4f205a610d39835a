// Parameter sweeps: the Cartesian product of the declared axes, one
// aggregate row per cell, resumable through a manifest file.  Every cell
// reuses the base master seed, so a cell differing only in an axis value is
// directly comparable (common random numbers) and an empty sweep reproduces
// the plain simulate aggregate exactly.

#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "twentyq/config.hpp"
#include "twentyq/harness.hpp"

namespace twentyq {

struct SweepCell {
  long index = 0;
  std::vector<json> values;  // one per axis, axis-major order
};

inline std::vector<SweepCell> sweep_cells(const std::vector<SweepAxis>& axes) {
  long total = 1;
  for (const SweepAxis& a : axes) total *= static_cast<long>(a.values.size());
  std::vector<SweepCell> cells;
  cells.reserve(static_cast<std::size_t>(total));
  for (long i = 0; i < total; ++i) {
    SweepCell cell;
    cell.index = i;
    long rem = i;
    long stride = total;
    for (const SweepAxis& a : axes) {
      stride /= static_cast<long>(a.values.size());
      cell.values.push_back(a.values[static_cast<std::size_t>(rem / stride)]);
      rem %= stride;
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

struct SweepManifest {
  std::string config_hash;
  std::set<long> completed;
};

inline SweepManifest read_manifest(const std::string& path) {
  SweepManifest m;
  std::ifstream in(path);
  if (!in) return m;
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) return m;
  m.config_hash = j.value("config_hash", "");
  if (j.contains("completed"))
    for (const json& v : j.at("completed")) m.completed.insert(v.get<long>());
  return m;
}

inline void write_manifest(const std::string& path, const SweepManifest& m) {
  json j;
  j["config_hash"] = m.config_hash;
  j["completed"] = json::array();
  for (long c : m.completed) j["completed"].push_back(c);
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
}

// Runs the sweep, appending one aggregate row per cell to sweep.csv.  With
// resume = true, cells recorded in the manifest are skipped and new rows are
// appended to the existing file.
inline std::string run_sweep(const ExperimentConfig& base, const std::string& output_dir,
                             bool resume) {
  std::filesystem::create_directories(output_dir);
  const std::string csv_path = output_dir + "/sweep.csv";
  const std::string manifest_path = output_dir + "/sweep_manifest.json";
  const std::string hash = base.config_hash();

  std::vector<std::string> header;
  for (const SweepAxis& a : base.sweep_axes) header.push_back(a.path);
  for (const std::string& c : aggregate_csv_header()) header.push_back(c);
  // The trailing bound columns of aggregate.csv are dropped from sweep rows;
  // keep the trial-derived prefix only.
  header.resize(base.sweep_axes.size() + aggregate_row_fields(Aggregate{}).size());

  SweepManifest manifest;
  if (resume) {
    manifest = read_manifest(manifest_path);
    if (!manifest.config_hash.empty() && manifest.config_hash != hash)
      throw ConfigError("sweep --resume: manifest belongs to a different config");
  }
  manifest.config_hash = hash;

  bool append = resume && std::filesystem::exists(csv_path) && !manifest.completed.empty();
  CsvWriter w(csv_path, header, append);

  for (const SweepCell& cell : sweep_cells(base.sweep_axes)) {
    if (manifest.completed.count(cell.index)) continue;
    ExperimentConfig cfg = base;
    for (std::size_t a = 0; a < base.sweep_axes.size(); ++a)
      cfg = apply_override(cfg, base.sweep_axes[a].path, cell.values[a]);
    cfg.master_seed = base.master_seed;  // common random numbers across cells

    QueryDependentChannel channel = cfg.channel.make();
    ChannelConstants constants = channel_constants(channel);
    ProcedureConfig procedure = cfg.resolve_procedure(constants);
    CampaignResult campaign =
        run_campaign(cfg, channel, constants, procedure, cfg.trials, cfg.workers);
    Aggregate agg = aggregate_trials(campaign.trials, cfg.resolution());

    std::vector<std::string> fields;
    for (const json& v : cell.values)
      fields.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    for (const std::string& f : aggregate_row_fields(agg)) fields.push_back(f);
    w.row(fields);
    w.flush();  // keep partial results on interrupt

    manifest.completed.insert(cell.index);
    write_manifest(manifest_path, manifest);
  }
  w.metadata(hash);
  return csv_path;
}

}  // namespace twentyq
