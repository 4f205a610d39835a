// Wald's sequential probability ratio test between the two stage-1
// estimations.  The oracle repeats x_A (accept) or x_R (reject); the
// questioner accumulates log(P_{Y|X=x_A}(y)/P_{Y|X=x_R}(y)) and stops once
// the sum leaves [-a_R, a_A].

#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "twentyq/channel.hpp"
#include "twentyq/rng.hpp"
#include "twentyq/transcript.hpp"

namespace twentyq {

struct SprtConfig {
  double a_accept = 0.0;  // upper threshold, nats
  double a_reject = 0.0;  // lower threshold magnitude, nats
  int x_accept = 0;
  int x_reject = 1;
  double query_measure = 0.5;  // measure at which h is evaluated during the test
};

struct SprtOutcome {
  bool accepted = false;
  int tau = 0;           // test steps consumed
  double llr_final = 0.0;
};

// Runs the test against a truth known to the oracle.  Boundary hits decide
// in favor of the threshold reached.  Each channel use is recorded in the
// transcript as a set-free entry: the eavesdropper sees timing only.
inline SprtOutcome sprt_run(const SprtConfig& cfg, const QueryDependentChannel& channel,
                            bool truth_accept, Rng& noise, Transcript* transcript) {
  if (!(cfg.a_accept > 0.0) || !(cfg.a_reject > 0.0))
    throw std::invalid_argument("sprt: thresholds must be positive");
  if (cfg.x_accept == cfg.x_reject)
    throw std::invalid_argument("sprt: accept and reject symbols must differ");

  const int x_true = truth_accept ? cfg.x_accept : cfg.x_reject;
  std::vector<double> llr(static_cast<std::size_t>(channel.output_alphabet_size()));
  bool any_drift = false;
  for (int y = 0; y < channel.output_alphabet_size(); ++y) {
    llr[static_cast<std::size_t>(y)] =
        log_ratio(channel.transition(cfg.x_accept, y, cfg.query_measure),
                  channel.transition(cfg.x_reject, y, cfg.query_measure));
    if (llr[static_cast<std::size_t>(y)] != 0.0) any_drift = true;
  }
  if (!any_drift)
    throw std::invalid_argument("sprt: zero-drift channel, the walk cannot terminate");

  double sum = 0.0;
  int tau = 0;
  for (;;) {
    int y = channel.sample(x_true, cfg.query_measure, noise);
    if (transcript) transcript->record(QueryKind::Sprt, QuerySet::none(), y);
    sum += llr[static_cast<std::size_t>(y)];
    ++tau;
    if (sum >= cfg.a_accept) return {true, tau, sum};
    if (sum <= -cfg.a_reject) return {false, tau, sum};
  }
}

// Upper bounds on E[tau | H_A] and E[tau | H_R]: (a + b)/D with b the
// overshoot constant of the corresponding LLR law.
inline std::pair<double, double> sprt_expected_time_bounds(const SprtConfig& cfg,
                                                           const QueryDependentChannel& channel) {
  double d_ar = kl_divergence(channel.row(cfg.x_accept, cfg.query_measure),
                              channel.row(cfg.x_reject, cfg.query_measure));
  double d_ra = kl_divergence(channel.row(cfg.x_reject, cfg.query_measure),
                              channel.row(cfg.x_accept, cfg.query_measure));
  if (d_ar <= 0.0 || d_ra <= 0.0)
    throw std::invalid_argument("sprt: expected-time bounds need positive divergence");
  double b_a = b_constant(
      llr_distribution(channel, cfg.query_measure, cfg.x_accept, cfg.x_reject, cfg.x_accept));
  double b_r = b_constant(
      llr_distribution(channel, cfg.query_measure, cfg.x_reject, cfg.x_accept, cfg.x_reject));
  return {(cfg.a_accept + b_a) / d_ar, (cfg.a_reject + b_r) / d_ra};
}

}  // namespace twentyq
