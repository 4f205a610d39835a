// The two-stage private query procedure.
//
// Flow per trial: optional stop at time zero, stage-1 first estimation at
// threshold lambda1, an SPRT in which the oracle accepts or rejects that
// estimate, on rejection a second stage-1 estimation continuing the same
// cumulative sums to lambda2, then cloned sortPM over the M/L second-level
// sub-intervals.  The final estimate is the center of the decoded
// second-level cell inside the decoded first-level cell.

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "twentyq/channel.hpp"
#include "twentyq/rng.hpp"
#include "twentyq/sprt.hpp"
#include "twentyq/stage1.hpp"
#include "twentyq/stage2.hpp"
#include "twentyq/transcript.hpp"

namespace twentyq {

struct ProcedureConfig {
  int levels = 2;        // L, privacy level
  int total_bins = 16;   // M, second-level bins across [0,1]; L | M
  double lambda1 = 0.0;  // nats, first-estimation threshold
  double lambda2 = 0.0;  // nats, second-estimation threshold; > lambda1
  double a_accept = 0.0;
  double a_reject = 0.0;
  double eps_prime = 0.01;
  double eps0 = 0.0;     // stop-at-time-zero probability
  int stage2_cap = 0;    // N0; 0 = derive default
  int stage1_cap = 0;    // hard cap on stage-1 queries; 0 = derive default
  InfoDensityMode info_mode = InfoDensityMode::Nominal;
  Stage1Decode stage1_decode = Stage1Decode::MaxIndex;

  int bins_per_level() const { return total_bins / levels; }

  void validate() const {
    if (levels < 2) throw std::invalid_argument("procedure: L must be >= 2");
    if (total_bins % levels != 0) throw std::invalid_argument("procedure: L must divide M");
    if (levels > total_bins - 1) throw std::invalid_argument("procedure: L must be <= M-1");
    if (!(lambda1 > 0.0) || !(lambda2 > 0.0) || lambda1 >= lambda2)
      throw std::invalid_argument("procedure: thresholds must satisfy 0 < lambda1 < lambda2");
    if (!(a_accept > 0.0) || !(a_reject > 0.0))
      throw std::invalid_argument("procedure: SPRT thresholds must be positive");
    if (!(eps_prime > 0.0 && eps_prime < 1.0))
      throw std::invalid_argument("procedure: eps_prime must be in (0,1)");
    if (eps0 < 0.0 || eps0 > 1.0)
      throw std::invalid_argument("procedure: eps0 must be in [0,1]");
  }
};

struct TrialResult {
  double s = 0.0;
  double s_hat = 0.0;
  double abs_err = 0.0;
  int tau_total = 0;
  int tau_stage1 = 0;
  int tau_sprt = 0;
  int tau_stage2 = 0;
  bool stopped_at_zero = false;
  bool w1_correct = false;  // final stage-1 estimate equals the true first-level cell
  bool w2_correct = false;
  bool stage1_cap_hit = false;
  bool stage2_cap_hit = false;
};

inline int oracle_answer(double s, const QuerySet& query) { return query.contains(s) ? 1 : 0; }

// Default stage-2 cap: ten times the asymptotic mean stopping time.
inline int default_stage2_cap(int bins_per_level, double eps_prime, const ChannelConstants& k) {
  if (!(k.capacity > 0.0)) throw std::invalid_argument("stage2 cap: channel capacity is zero");
  double mean = std::log(static_cast<double>(bins_per_level)) / k.capacity;
  if (k.c_tilde > 0.0 && !is_saturated(k.c_tilde))
    mean += std::log(1.0 / eps_prime) / k.c_tilde;
  return static_cast<int>(std::ceil(10.0 * mean)) + 1;
}

// Default stage-1 cap: twenty times the lambda2 crossing-time bound.
inline int default_stage1_cap(double lambda2, const ChannelConstants& k) {
  if (!(k.capacity > 0.0)) throw std::invalid_argument("stage1 cap: channel capacity is zero");
  return static_cast<int>(std::ceil(20.0 * (lambda2 + k.b) / k.capacity)) + 1;
}

// Runs one trial.  All randomness is derived from (master_seed, trial), so a
// trial is reproducible independently of scheduling.
inline TrialResult run_trial(const ProcedureConfig& cfg, const QueryDependentChannel& channel,
                             const ChannelConstants& constants, double s,
                             std::uint64_t master_seed, std::uint64_t trial,
                             Transcript* out_transcript = nullptr) {
  cfg.validate();
  if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("run_trial: target outside [0,1]");

  TrialResult r;
  r.s = s;

  Rng stop_rng(derive_seed(master_seed, trial, Stream::StopAtZero));
  if (cfg.eps0 > 0.0 && stop_rng.uniform() < cfg.eps0) {
    r.stopped_at_zero = true;
    r.s_hat = 0.5;  // fixed declaration; the trial is scored as an error regardless
    r.abs_err = std::abs(r.s_hat - s);
    return r;
  }

  Transcript local;
  Transcript& tr = out_transcript ? *out_transcript : local;

  const int bins_per_level = cfg.bins_per_level();
  const int global_cell = cell_index(s, cfg.total_bins);
  const int true_level = global_cell / bins_per_level;
  const int true_offset = global_cell % bins_per_level;

  Rng noise(derive_seed(master_seed, trial, Stream::ChannelNoise));
  Codebook codebook(cfg.levels, constants.p_star,
                    derive_seed(master_seed, trial, Stream::Codebook));
  InfoDensityTables tables(channel, constants.p_star, cfg.levels, cfg.info_mode);

  const int stage1_cap =
      cfg.stage1_cap > 0 ? cfg.stage1_cap : default_stage1_cap(cfg.lambda2, constants);
  const int stage2_cap = cfg.stage2_cap > 0
                             ? cfg.stage2_cap
                             : default_stage2_cap(bins_per_level, cfg.eps_prime, constants);

  Stage1State state(cfg.levels);
  std::optional<Stage1Outcome> first =
      run_estimation(state, codebook, channel, tables, true_level, cfg.lambda1, 1, stage1_cap,
                     cfg.stage1_decode, noise, tr);
  if (!first) {
    r.stage1_cap_hit = true;
    r.tau_stage1 = stage1_cap;
    r.tau_total = static_cast<int>(tr.size());
    r.s_hat = 0.5;
    r.abs_err = std::abs(r.s_hat - s);
    return r;
  }

  SprtConfig sprt{cfg.a_accept, cfg.a_reject, constants.x_accept, constants.x_reject,
                  constants.p_star};
  SprtOutcome test = sprt_run(sprt, channel, first->w == true_level, noise, &tr);
  r.tau_sprt = test.tau;

  int w_level;
  if (test.accepted) {
    w_level = first->w;
    r.tau_stage1 = first->tau;
  } else {
    std::optional<Stage1Outcome> second =
        run_estimation(state, codebook, channel, tables, true_level, cfg.lambda2,
                       first->tau + 1, stage1_cap, cfg.stage1_decode, noise, tr);
    if (!second) {
      r.stage1_cap_hit = true;
      r.tau_stage1 = stage1_cap;
      r.tau_total = static_cast<int>(tr.size());
      r.s_hat = 0.5;
      r.abs_err = std::abs(r.s_hat - s);
      return r;
    }
    w_level = second->w;
    r.tau_stage1 = second->tau;
  }

  std::vector<double> rho(static_cast<std::size_t>(bins_per_level),
                          1.0 / static_cast<double>(bins_per_level));
  Stage2Outcome s2 = run_stage2(std::move(rho), channel, true_offset, cfg.eps_prime, stage2_cap,
                                cfg.levels, noise, tr);
  r.tau_stage2 = s2.tau;
  r.stage2_cap_hit = s2.cap_hit;

  r.s_hat = static_cast<double>(w_level) / cfg.levels +
            (static_cast<double>(s2.w2) + 0.5) / cfg.total_bins;
  r.abs_err = std::abs(r.s_hat - s);
  r.w1_correct = w_level == true_level;
  r.w2_correct = s2.w2 == true_offset;
  r.tau_total = static_cast<int>(tr.size());
  return r;
}

// Appendix-style parameter selection from the privacy level and the channel.
struct ParameterSelection {
  double n_dagger = 0.0;
  bool n_dagger_feasible = true;  // false when the defining equation has no
                                  // root and the branch minimum was used
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double a = 0.0;       // a_A = a_R
  int m_over_l = 0;     // chosen M/L (a power of two)
  double m_residual = 0.0;  // defect of the M/L design equation after rounding
  double eps0 = 0.0;    // 0 unless target_eps given
};

namespace detail {

// Increasing-branch root of log(L) = C n - beta log(n) - log(log(n)).
// When even the branch minimum exceeds log(L) the equation has no root; the
// minimizer is returned with feasible = false.
struct BranchSolve {
  double n = 0.0;
  bool feasible = true;
  double residual = 0.0;
};

inline BranchSolve solve_threshold_equation(double log_l, double c, double beta) {
  if (!(c > 0.0)) throw std::invalid_argument("solver: capacity must be positive");
  if (beta < 0.0) throw std::invalid_argument("solver: beta must be >= 0");
  auto f = [&](double n) { return c * n - beta * std::log(n) - std::log(std::log(n)) - log_l; };
  auto fprime = [&](double n) { return c - beta / n - 1.0 / (n * std::log(n)); };

  // The derivative is increasing on (1, inf); locate the stationary point.
  double lo = 1.0 + 1e-9;
  double hi = 2.0;
  while (fprime(hi) <= 0.0) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (fprime(mid) <= 0.0 ? lo : hi) = mid;
  }
  double n_min = 0.5 * (lo + hi);

  if (f(n_min) > 0.0) return {n_min, false, f(n_min)};

  lo = n_min;
  hi = std::max(2.0 * n_min, 4.0);
  while (f(hi) < 0.0) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  double root = 0.5 * (lo + hi);
  return {root, true, f(root)};
}

}  // namespace detail

// Chooses (lambda1, lambda2, a, M/L) for a target stage-2 query budget.
// When the N-dagger equation is infeasible the branch minimum is used and
// flagged; thresholds derived from it are still valid procedure parameters.
inline ParameterSelection select_parameters(int levels, double eps_prime, double n2_target,
                                            const ChannelConstants& k,
                                            std::optional<double> target_eps = std::nullopt,
                                            bool strict = false) {
  if (levels < 2) throw std::invalid_argument("select_parameters: L must be >= 2");
  if (!(k.capacity > 0.0))
    throw std::invalid_argument("select_parameters: channel capacity is zero");
  ParameterSelection sel;
  detail::BranchSolve nd =
      detail::solve_threshold_equation(std::log(static_cast<double>(levels)), k.capacity, 0.0);
  if (!nd.feasible && strict)
    throw std::invalid_argument("select_parameters: no N-dagger solves the design equation");
  sel.n_dagger = nd.n;
  sel.n_dagger_feasible = nd.feasible;
  sel.lambda1 = std::log(static_cast<double>(levels)) + std::log(std::log(sel.n_dagger));
  sel.lambda2 = std::log(static_cast<double>(levels)) + std::log(sel.n_dagger);
  sel.a = std::log(sel.n_dagger);

  double beta = (k.c_tilde > 0.0 && !is_saturated(k.c_tilde)) ? k.capacity / k.c_tilde : 0.0;
  double log_ml_target = k.capacity * n2_target - beta * std::log(1.0 / eps_prime);
  double raw = std::exp(log_ml_target);
  int pow2 = 2;
  while (2.0 * pow2 <= raw * std::sqrt(2.0)) pow2 *= 2;  // nearest power of two in log scale
  sel.m_over_l = pow2;
  sel.m_residual = std::log(static_cast<double>(sel.m_over_l)) - log_ml_target;

  if (target_eps) {
    double eps_bar = (levels - 1) * (std::exp(-sel.lambda1 - sel.a) + std::exp(-sel.lambda2)) +
                     eps_prime;
    double e0 = (*target_eps - eps_bar) / (1.0 - eps_bar);
    sel.eps0 = std::min(1.0, std::max(0.0, e0));
  }
  return sel;
}

}  // namespace twentyq
