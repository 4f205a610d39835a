// Monte Carlo campaigns: parallel trial execution, aggregation, and CSV
// output.  Per-trial randomness is derived from (master_seed, trial_index),
// so output bytes are identical for any worker count.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "twentyq/bounds.hpp"
#include "twentyq/config.hpp"
#include "twentyq/csv.hpp"
#include "twentyq/eavesdropper.hpp"
#include "twentyq/procedure.hpp"

namespace twentyq {

inline double target_for_trial(const ExperimentConfig& cfg, long trial) {
  if (cfg.target_mode == TargetMode::Uniform) {
    Rng rng(derive_seed(cfg.master_seed, static_cast<std::uint64_t>(trial), Stream::Target));
    return rng.uniform();
  }
  // Grid mode probes every second-level cell center, then every cell
  // boundary, cycling with the trial index.
  const int m = cfg.total_bins;
  long idx = trial % (2L * m + 1);
  if (idx < m) return (idx + 0.5) / m;
  return static_cast<double>(idx - m) / m;
}

struct CampaignResult {
  std::vector<TrialResult> trials;
  // One estimate vector per configured adversary, aligned with trials.
  std::vector<std::vector<double>> adversary_estimates;
  std::vector<std::uint64_t> stage2_hashes;
};

inline CampaignResult run_campaign(const ExperimentConfig& cfg,
                                   const QueryDependentChannel& channel,
                                   const ChannelConstants& constants,
                                   const ProcedureConfig& procedure, long trials, int workers) {
  CampaignResult out;
  out.trials.resize(static_cast<std::size_t>(trials));
  out.stage2_hashes.resize(static_cast<std::size_t>(trials));
  out.adversary_estimates.assign(cfg.adversaries.size(),
                                 std::vector<double>(static_cast<std::size_t>(trials)));

  int n_workers = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
  n_workers = std::max(1, std::min<long>(n_workers, trials));

  std::atomic<long> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;

  auto body = [&]() {
    try {
      for (;;) {
        long t = next.fetch_add(1);
        if (t >= trials) break;
        double s = target_for_trial(cfg, t);
        Transcript transcript;
        out.trials[static_cast<std::size_t>(t)] =
            run_trial(procedure, channel, constants, s, cfg.master_seed,
                      static_cast<std::uint64_t>(t), &transcript);
        TranscriptView view(transcript);
        out.stage2_hashes[static_cast<std::size_t>(t)] = stage2_pattern_hash(view);
        for (std::size_t a = 0; a < cfg.adversaries.size(); ++a) {
          Rng rng(derive_seed(cfg.master_seed, static_cast<std::uint64_t>(t), Stream::Adversary,
                              a));
          out.adversary_estimates[a][static_cast<std::size_t>(t)] = adversary_estimate(
              cfg.adversaries[a], view, procedure.levels, procedure.total_bins, rng);
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  };

  if (n_workers == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(body);
    for (std::thread& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

// Whether a trial counts as an excess-resolution event at resolution delta.
// Stop-at-time-zero and cap failures are scored as errors by construction.
inline bool excess_event(const TrialResult& r, double delta) {
  return r.stopped_at_zero || r.stage1_cap_hit || r.stage2_cap_hit || r.abs_err > delta;
}

struct Aggregate {
  long trials = 0;
  double delta = 0.0;
  double excess_prob = 0.0;
  double excess_ci_lo = 0.0;
  double excess_ci_hi = 0.0;
  double stopped_at_zero_rate = 0.0;
  double stage1_cap_rate = 0.0;
  double stage2_cap_rate = 0.0;
  double w1_correct_rate = 0.0;
  double w2_correct_rate = 0.0;
  double mean_abs_err = 0.0;
  double max_abs_err = 0.0;
  double mean_tau_total = 0.0;
  double mean_tau_stage1 = 0.0;
  double mean_tau_sprt = 0.0;
  double mean_tau_stage2 = 0.0;
  double p50_tau_total = 0.0;
  double p90_tau_total = 0.0;
  double p99_tau_total = 0.0;
};

inline double nearest_rank(std::vector<int>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  std::size_t idx = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(sorted.size())));
  if (idx > 0) --idx;
  if (idx >= sorted.size()) idx = sorted.size() - 1;
  return sorted[idx];
}

inline Aggregate aggregate_trials(std::span<const TrialResult> trials, double delta) {
  Aggregate a;
  a.trials = static_cast<long>(trials.size());
  a.delta = delta;
  if (trials.empty()) return a;
  long excess = 0;
  std::vector<int> taus;
  taus.reserve(trials.size());
  for (const TrialResult& r : trials) {
    excess += excess_event(r, delta);
    a.stopped_at_zero_rate += r.stopped_at_zero;
    a.stage1_cap_rate += r.stage1_cap_hit;
    a.stage2_cap_rate += r.stage2_cap_hit;
    a.w1_correct_rate += r.w1_correct;
    a.w2_correct_rate += r.w2_correct;
    a.mean_abs_err += r.abs_err;
    a.max_abs_err = std::max(a.max_abs_err, r.abs_err);
    a.mean_tau_total += r.tau_total;
    a.mean_tau_stage1 += r.tau_stage1;
    a.mean_tau_sprt += r.tau_sprt;
    a.mean_tau_stage2 += r.tau_stage2;
    taus.push_back(r.tau_total);
  }
  double n = static_cast<double>(a.trials);
  a.excess_prob = excess / n;
  double sigma = std::sqrt(a.excess_prob * (1.0 - a.excess_prob) / n);
  a.excess_ci_lo = std::max(0.0, a.excess_prob - 2.5758293035489004 * sigma);
  a.excess_ci_hi = std::min(1.0, a.excess_prob + 2.5758293035489004 * sigma);
  a.stopped_at_zero_rate /= n;
  a.stage1_cap_rate /= n;
  a.stage2_cap_rate /= n;
  a.w1_correct_rate /= n;
  a.w2_correct_rate /= n;
  a.mean_abs_err /= n;
  a.mean_tau_total /= n;
  a.mean_tau_stage1 /= n;
  a.mean_tau_sprt /= n;
  a.mean_tau_stage2 /= n;
  std::sort(taus.begin(), taus.end());
  a.p50_tau_total = nearest_rank(taus, 0.50);
  a.p90_tau_total = nearest_rank(taus, 0.90);
  a.p99_tau_total = nearest_rank(taus, 0.99);
  return a;
}

inline const std::vector<std::string>& trials_csv_header() {
  static const std::vector<std::string> h = {
      "trial",      "s",          "s_hat",      "abs_err",        "tau_total", "tau_stage1",
      "tau_sprt",   "tau_stage2", "stopped_at_zero", "w1_correct", "w2_correct"};
  return h;
}

inline void write_trials_csv(const std::string& path, std::span<const TrialResult> trials,
                             const std::string& config_hash) {
  CsvWriter w(path, trials_csv_header());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const TrialResult& r = trials[i];
    w.row({std::to_string(i), format_double(r.s), format_double(r.s_hat),
           format_double(r.abs_err), std::to_string(r.tau_total), std::to_string(r.tau_stage1),
           std::to_string(r.tau_sprt), std::to_string(r.tau_stage2),
           std::to_string(r.stopped_at_zero ? 1 : 0), std::to_string(r.w1_correct ? 1 : 0),
           std::to_string(r.w2_correct ? 1 : 0)});
  }
  w.metadata(config_hash);
}

// Parses trials.csv back into results (cap flags are not part of the trials
// schema; aggregate.csv carries the cap rates).
inline std::vector<TrialResult> read_trials_csv(const std::string& path) {
  CsvFile f = read_csv(path);
  if (f.header != trials_csv_header()) throw std::runtime_error(path + ": unexpected header");
  std::vector<TrialResult> out;
  out.reserve(f.rows.size());
  for (const auto& row : f.rows) {
    if (row.size() != trials_csv_header().size())
      throw std::runtime_error(path + ": bad row width");
    TrialResult r;
    r.s = parse_double(row[1]);
    r.s_hat = parse_double(row[2]);
    r.abs_err = parse_double(row[3]);
    r.tau_total = static_cast<int>(parse_double(row[4]));
    r.tau_stage1 = static_cast<int>(parse_double(row[5]));
    r.tau_sprt = static_cast<int>(parse_double(row[6]));
    r.tau_stage2 = static_cast<int>(parse_double(row[7]));
    r.stopped_at_zero = row[8] == "1";
    r.w1_correct = row[9] == "1";
    r.w2_correct = row[10] == "1";
    out.push_back(r);
  }
  return out;
}

inline std::vector<std::string> aggregate_csv_header() {
  return {"trials",
          "delta",
          "excess_prob",
          "excess_ci_lo",
          "excess_ci_hi",
          "stopped_at_zero_rate",
          "stage1_cap_rate",
          "stage2_cap_rate",
          "w1_correct_rate",
          "w2_correct_rate",
          "mean_abs_err",
          "max_abs_err",
          "mean_tau_total",
          "mean_tau_stage1",
          "mean_tau_sprt",
          "mean_tau_stage2",
          "p50_tau_total",
          "p90_tau_total",
          "p99_tau_total",
          "t1_n_bar",
          "t1_eps_bar",
          "t1_n",
          "t1_eps",
          "t1_eps_clipped",
          "t1_eps_vacuous",
          "excess_within_bound",
          "mean_tau_within_bound"};
}

inline std::vector<std::string> aggregate_row_fields(const Aggregate& a) {
  return {std::to_string(a.trials),
          format_double(a.delta),
          format_double(a.excess_prob),
          format_double(a.excess_ci_lo),
          format_double(a.excess_ci_hi),
          format_double(a.stopped_at_zero_rate),
          format_double(a.stage1_cap_rate),
          format_double(a.stage2_cap_rate),
          format_double(a.w1_correct_rate),
          format_double(a.w2_correct_rate),
          format_double(a.mean_abs_err),
          format_double(a.max_abs_err),
          format_double(a.mean_tau_total),
          format_double(a.mean_tau_stage1),
          format_double(a.mean_tau_sprt),
          format_double(a.mean_tau_stage2),
          format_double(a.p50_tau_total),
          format_double(a.p90_tau_total),
          format_double(a.p99_tau_total)};
}

inline void write_aggregate_csv(const std::string& path, const Aggregate& a,
                                const Theorem1Bound& bound, const std::string& config_hash) {
  CsvWriter w(path, aggregate_csv_header());
  std::vector<std::string> fields = aggregate_row_fields(a);
  fields.push_back(format_double(bound.n_bar));
  fields.push_back(format_double(bound.eps_bar));
  fields.push_back(format_double(bound.n));
  fields.push_back(format_double(bound.eps));
  fields.push_back(format_double(bound.eps_clipped));
  fields.push_back(bound.eps_vacuous ? "1" : "0");
  fields.push_back(a.excess_prob <= bound.eps_clipped ? "1" : "0");
  fields.push_back(a.mean_tau_total <= bound.n ? "1" : "0");
  w.row(fields);
  w.metadata(config_hash);
}

inline void write_privacy_csv(const std::string& path, const ExperimentConfig& cfg,
                              const std::vector<PrivacyReport>& reports,
                              const std::string& config_hash) {
  CsvWriter w(path, {"L", "k", "strategy", "empirical", "ci_lo", "ci_hi", "bound", "pass"});
  for (std::size_t a = 0; a < reports.size(); ++a) {
    for (const PrivacyRow& row : reports[a].rows) {
      w.row({std::to_string(cfg.levels), std::to_string(row.k),
             adversary_name(cfg.adversaries[a]), format_double(row.empirical),
             format_double(row.ci_lo), format_double(row.ci_hi), format_double(row.bound),
             row.pass ? "1" : "0"});
    }
  }
  w.metadata(config_hash);
}

struct SimulateOutput {
  Aggregate aggregate;
  Theorem1Bound bound;
  std::vector<PrivacyReport> privacy;
  std::string trials_path;
  std::string aggregate_path;
  std::string privacy_path;
};

inline Theorem1Bound compute_bound(const ExperimentConfig& cfg,
                                   const QueryDependentChannel& channel,
                                   const ChannelConstants& constants,
                                   const ProcedureConfig& procedure) {
  double e_tau_s =
      cfg.e_tau_s_mode == ETauSMode::MonteCarlo
          ? expected_stage2_queries_mc(procedure.bins_per_level(), procedure.eps_prime, channel,
                                       constants, procedure.levels, cfg.e_tau_s_trials,
                                       cfg.master_seed ^ 0x5ca1ab1eULL)
          : expected_stage2_queries_asymptotic(procedure.bins_per_level(), procedure.eps_prime,
                                               constants);
  return theorem1_bound(procedure, constants, e_tau_s);
}

// Runs trials, writes trials.csv / aggregate.csv / privacy.csv into
// output_dir, and returns the aggregates.
inline SimulateOutput simulate(const ExperimentConfig& cfg, const std::string& output_dir) {
  QueryDependentChannel channel = cfg.channel.make();
  ChannelConstants constants = channel_constants(channel);
  ProcedureConfig procedure = cfg.resolve_procedure(constants);

  CampaignResult campaign =
      run_campaign(cfg, channel, constants, procedure, cfg.trials, cfg.workers);

  SimulateOutput out;
  out.aggregate = aggregate_trials(campaign.trials, cfg.resolution());
  out.bound = compute_bound(cfg, channel, constants, procedure);
  for (std::size_t a = 0; a < cfg.adversaries.size(); ++a) {
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(campaign.trials.size());
    for (std::size_t t = 0; t < campaign.trials.size(); ++t)
      pairs.emplace_back(campaign.trials[t].s, campaign.adversary_estimates[a][t]);
    out.privacy.push_back(evaluate_privacy(pairs, cfg.levels));
  }

  std::filesystem::create_directories(output_dir);
  std::string hash = cfg.config_hash();
  out.trials_path = output_dir + "/trials.csv";
  out.aggregate_path = output_dir + "/aggregate.csv";
  out.privacy_path = output_dir + "/privacy.csv";
  write_trials_csv(out.trials_path, campaign.trials, hash);
  write_aggregate_csv(out.aggregate_path, out.aggregate, out.bound, hash);
  write_privacy_csv(out.privacy_path, cfg, out.privacy, hash);
  return out;
}

}  // namespace twentyq
