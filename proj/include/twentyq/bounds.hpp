// Closed-form achievability bounds: the non-asymptotic mean-query and error
// bounds of the two-stage procedure, the second-order asymptotic resolution
// bound with its transcendental solvers, and the noiseless benchmark.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "twentyq/channel.hpp"
#include "twentyq/procedure.hpp"
#include "twentyq/stage2.hpp"

namespace twentyq {

// Root of log(L) = C n - log(log(n)) on the increasing branch.  Throws if
// the equation has no root.
inline double solve_ndagger(int levels, double c) {
  if (levels < 2) throw std::invalid_argument("solve_ndagger: L must be >= 2");
  detail::BranchSolve s =
      detail::solve_threshold_equation(std::log(static_cast<double>(levels)), c, 0.0);
  if (!s.feasible)
    throw std::invalid_argument("solve_ndagger: no root on the increasing branch");
  return s.n;
}

// Root of log(L) = C n - (C/C~) log(n) - log(log(n)) on the increasing
// branch.  Throws if the equation has no root.
inline double solve_n1(int levels, double c, double c_tilde) {
  if (levels < 2) throw std::invalid_argument("solve_n1: L must be >= 2");
  if (!(c_tilde > 0.0)) throw std::invalid_argument("solve_n1: C~ must be positive");
  double beta = is_saturated(c_tilde) ? 0.0 : c / c_tilde;
  detail::BranchSolve s =
      detail::solve_threshold_equation(std::log(static_cast<double>(levels)), c, beta);
  if (!s.feasible) throw std::invalid_argument("solve_n1: no root on the increasing branch");
  return s.n;
}

// All six constituents of the mean-query bound, itemized.
struct Theorem1Terms {
  double stage1_first = 0.0;    // (lambda1 + b) / C
  double stage1_second = 0.0;   // Pr{second estimation} * (lambda2 - lambda1 + b) / C
  double sprt_accept = 0.0;     // (a_A + b_A) / D(P_A || P_R)
  double sprt_reject = 0.0;     // (L-1) e^{-lambda1} (a_R + b_R) / D(P_R || P_A)
  double stage2_mean = 0.0;     // E[stage-2 stopping time]
  double stage2_cap = 0.0;      // (L-1)(e^{-lambda1 + a_A} + e^{-lambda2}) N0
  bool sprt_saturated = false;  // divergences were infinite; SPRT terms zeroed
};

struct Theorem1Bound {
  Theorem1Terms terms;
  double n_bar = 0.0;
  double eps_bar = 0.0;
  double n = 0.0;    // (1 - eps0) * n_bar
  double eps = 0.0;  // eps0 + (1 - eps0) * eps_bar, before clipping
  double eps_clipped = 0.0;
  bool eps_vacuous = false;  // true when the unclipped bound exceeds 1
};

// Evaluates the printed bound.  expected_stage2_queries is E[tau_s,1], which
// the theorem leaves symbolic; supply either a Monte Carlo estimate or the
// asymptotic surrogate below.
inline Theorem1Bound theorem1_bound(const ProcedureConfig& cfg, const ChannelConstants& k,
                                    double expected_stage2_queries) {
  cfg.validate();
  if (!(k.capacity > 0.0)) throw std::invalid_argument("theorem1: channel capacity is zero");
  const double lm1 = cfg.lambda1;
  const double lm2 = cfg.lambda2;
  const double l1 = static_cast<double>(cfg.levels - 1);
  const int cap2 = cfg.stage2_cap > 0 ? cfg.stage2_cap
                                      : default_stage2_cap(cfg.bins_per_level(), cfg.eps_prime, k);

  Theorem1Bound out;
  Theorem1Terms& t = out.terms;
  t.stage1_first = (lm1 + k.b) / k.capacity;
  t.stage1_second =
      (l1 * std::exp(-lm1) + std::exp(-cfg.a_reject)) * (lm2 - lm1 + k.b) / k.capacity;
  t.sprt_saturated = is_saturated(k.d_accept_reject) || is_saturated(k.d_reject_accept);
  if (t.sprt_saturated) {
    t.sprt_accept = 0.0;
    t.sprt_reject = 0.0;
  } else {
    t.sprt_accept = (cfg.a_accept + k.b_accept) / k.d_accept_reject;
    t.sprt_reject = l1 * std::exp(-lm1) * (cfg.a_reject + k.b_reject) / k.d_reject_accept;
  }
  t.stage2_mean = expected_stage2_queries;
  t.stage2_cap = l1 * (std::exp(-lm1 + cfg.a_accept) + std::exp(-lm2)) * cap2;

  out.n_bar = t.stage1_first + t.stage1_second + t.sprt_accept + t.sprt_reject + t.stage2_mean +
              t.stage2_cap;
  out.eps_bar = l1 * (std::exp(-lm1 - cfg.a_accept) + std::exp(-lm2)) + cfg.eps_prime;
  out.n = (1.0 - cfg.eps0) * out.n_bar;
  out.eps = cfg.eps0 + (1.0 - cfg.eps0) * out.eps_bar;
  out.eps_vacuous = out.eps > 1.0;
  out.eps_clipped = std::min(1.0, out.eps);
  return out;
}

// Asymptotic surrogate for E[tau_s,1]: log(M/L)/C + log(1/eps')/C~.
inline double expected_stage2_queries_asymptotic(int bins_per_level, double eps_prime,
                                                 const ChannelConstants& k) {
  if (!(k.capacity > 0.0)) throw std::invalid_argument("stage2 surrogate: capacity is zero");
  double v = std::log(static_cast<double>(bins_per_level)) / k.capacity;
  if (k.c_tilde > 0.0 && !is_saturated(k.c_tilde)) v += std::log(1.0 / eps_prime) / k.c_tilde;
  return v;
}

// Monte Carlo estimate of E[tau_s,1]: the first time the true bin's
// posterior reaches 1 - eps', simulating sortPM without the procedure's
// normal stop.
inline double expected_stage2_queries_mc(int bins_per_level, double eps_prime,
                                         const QueryDependentChannel& channel,
                                         const ChannelConstants& k, int levels, long trials,
                                         std::uint64_t seed) {
  if (bins_per_level < 2) throw std::invalid_argument("stage2 mc: need at least two bins");
  const int hard_cap =
      50 * default_stage2_cap(bins_per_level, eps_prime, k) + 100;
  double total = 0.0;
  for (long t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t), Stream::ChannelNoise));
    int truth = static_cast<int>(rng.below(static_cast<std::uint64_t>(bins_per_level)));
    std::vector<double> rho(static_cast<std::size_t>(bins_per_level),
                            1.0 / static_cast<double>(bins_per_level));
    int tau = 0;
    while (rho[static_cast<std::size_t>(truth)] < 1.0 - eps_prime && tau < hard_cap) {
      std::vector<int> bins = sortpm_build_query(rho);
      QuerySet qs = clone_query(bins, bins_per_level, levels);
      double gm = qs.measure();
      int x = std::find(bins.begin(), bins.end(), truth) != bins.end() ? 1 : 0;
      int y = channel.sample(x, gm, rng);
      posterior_update(rho, bins, y, channel, gm);
      ++tau;
    }
    total += tau;
  }
  return total / static_cast<double>(trials);
}

// One point of the second-order asymptotic curve.  The additive O(1) term of
// the printed bound is dropped; values are comparable up to a constant.
struct Theorem2Point {
  double n1 = 0.0;
  double n_dagger = 0.0;
  bool n1_feasible = true;
  bool n_dagger_feasible = true;
  double neg_log_delta = 0.0;  // lower bound on -log delta*
  double rate = 0.0;           // neg_log_delta / N
  bool up_to_additive_constant = true;
};

inline Theorem2Point theorem2_resolution(double n_queries, int levels, double eps,
                                         double eps_prime, const ChannelConstants& k) {
  if (!(n_queries > 0.0)) throw std::invalid_argument("theorem2: N must be positive");
  if (!(eps >= 0.0 && eps < 1.0)) throw std::invalid_argument("theorem2: eps must be in [0,1)");
  if (!(eps_prime > 0.0 && eps_prime < 1.0))
    throw std::invalid_argument("theorem2: eps_prime must be in (0,1)");
  if (!(k.capacity > 0.0)) throw std::invalid_argument("theorem2: channel capacity is zero");

  double beta = (k.c_tilde > 0.0 && !is_saturated(k.c_tilde)) ? k.capacity / k.c_tilde : 0.0;
  double log_l = std::log(static_cast<double>(levels));
  detail::BranchSolve n1 = detail::solve_threshold_equation(log_l, k.capacity, beta);
  detail::BranchSolve nd = detail::solve_threshold_equation(log_l, k.capacity, 0.0);

  Theorem2Point p;
  p.n1 = n1.n;
  p.n1_feasible = n1.feasible;
  p.n_dagger = nd.n;
  p.n_dagger_feasible = nd.feasible;
  p.neg_log_delta = k.capacity * n_queries / (1.0 - eps) - beta * std::log(p.n1) -
                    std::log(std::log(p.n1)) - beta * std::log(1.0 / eps_prime);
  p.rate = p.neg_log_delta / n_queries;
  return p;
}

// Noiseless benchmark resolution N + log L - 2L, up to an additive constant.
inline double noiseless_benchmark(double n_queries, int levels) {
  if (levels < 2) throw std::invalid_argument("noiseless_benchmark: L must be >= 2");
  return n_queries + std::log(static_cast<double>(levels)) - 2.0 * levels;
}

}  // namespace twentyq
