// Stage 2: cloned sorted posterior matching over the M/L second-level
// sub-intervals of the identified first-level sub-interval.
//
// Each query is built by sorting the posterior, taking the prefix whose mass
// is closest to 1/2, and cloning that offset pattern into every first-level
// sub-interval so the transcript carries no first-level information.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "twentyq/channel.hpp"
#include "twentyq/rng.hpp"
#include "twentyq/transcript.hpp"

namespace twentyq {

// sortPM query construction: sort bins by descending posterior (ties by
// ascending index); between the shortest prefix with mass >= 1/2 and the
// one-shorter prefix, keep whichever mass is closer to 1/2, preferring the
// larger set on ties.  Returns the chosen bins in ascending index order.
inline std::vector<int> sortpm_build_query(std::span<const double> rho) {
  if (rho.empty()) throw std::invalid_argument("sortpm: empty posterior");
  std::vector<int> order(rho.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return rho[static_cast<std::size_t>(a)] > rho[static_cast<std::size_t>(b)];
  });
  std::size_t k = 0;
  double mass = 0.0;
  double prev_mass = 0.0;
  while (k < order.size() && mass < 0.5) {
    prev_mass = mass;
    mass += rho[static_cast<std::size_t>(order[k])];
    ++k;
  }
  // k is now the shortest prefix with mass >= 1/2 (or all bins if the total
  // never reaches 1/2, which cannot happen for a normalized posterior).
  if (k > 0 && std::abs(prev_mass - 0.5) < std::abs(mass - 0.5)) --k;
  std::vector<int> bins(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(bins.begin(), bins.end());
  return bins;
}

// Clones the offset pattern into all L first-level sub-intervals.
inline QuerySet clone_query(std::span<const int> bins, int bins_per_level, int levels) {
  std::vector<std::uint8_t> pattern(static_cast<std::size_t>(bins_per_level), 0);
  for (int b : bins) {
    if (b < 0 || b >= bins_per_level) throw std::invalid_argument("clone_query: bin out of range");
    pattern[static_cast<std::size_t>(b)] = 1;
  }
  return QuerySet::cloned(std::move(pattern), levels);
}

// One Bayes update of the posterior.  The likelihood of bin j is the channel
// row of the noiseless bit 1{C_j in the query}, evaluated at the cloned
// query's global measure.
inline void posterior_update(std::vector<double>& rho, std::span<const int> bins, int y,
                             const QueryDependentChannel& channel, double global_measure) {
  double like[2] = {channel.transition(0, y, global_measure),
                    channel.transition(1, y, global_measure)};
  std::vector<std::uint8_t> in_query(rho.size(), 0);
  for (int b : bins) in_query.at(static_cast<std::size_t>(b)) = 1;
  double denom = 0.0;
  for (std::size_t j = 0; j < rho.size(); ++j) {
    rho[j] *= like[in_query[j]];
    denom += rho[j];
  }
  if (!(denom > 0.0))
    throw std::runtime_error("posterior_update: response impossible under every bin");
  for (double& v : rho) v /= denom;
}

struct Stage2Outcome {
  int w2 = 0;          // decoded second-level offset, 0-based
  int tau = 0;         // queries consumed
  double confidence = 0.0;  // max posterior at the stop
  bool cap_hit = false;
};

// Runs cloned sortPM until some posterior reaches 1 - eps_prime (checked
// before the first query, so a trivially confident prior stops at tau = 0)
// or the cap is reached, in which case the argmax is decoded anyway and the
// outcome is flagged.
inline Stage2Outcome run_stage2(std::vector<double> rho, const QueryDependentChannel& channel,
                                int true_offset, double eps_prime, int cap, int levels,
                                Rng& noise, Transcript& transcript) {
  if (rho.empty()) throw std::invalid_argument("run_stage2: empty posterior");
  if (!(eps_prime > 0.0 && eps_prime < 1.0))
    throw std::invalid_argument("run_stage2: eps_prime must be in (0,1)");
  if (true_offset < 0 || true_offset >= static_cast<int>(rho.size()))
    throw std::invalid_argument("run_stage2: target offset out of range");

  const int bins_per_level = static_cast<int>(rho.size());
  auto argmax = [&rho]() {
    return static_cast<int>(std::max_element(rho.begin(), rho.end()) - rho.begin());
  };
  int tau = 0;
  while (true) {
    int best = argmax();
    if (rho[static_cast<std::size_t>(best)] >= 1.0 - eps_prime)
      return {best, tau, rho[static_cast<std::size_t>(best)], false};
    if (tau >= cap) return {best, tau, rho[static_cast<std::size_t>(best)], true};
    std::vector<int> bins = sortpm_build_query(rho);
    QuerySet qs = clone_query(bins, bins_per_level, levels);
    double gm = qs.measure();
    int x = std::find(bins.begin(), bins.end(), true_offset) != bins.end() ? 1 : 0;
    int y = channel.sample(x, gm, noise);
    transcript.record(QueryKind::Stage2, std::move(qs), y);
    posterior_update(rho, bins, y, channel, gm);
    ++tau;
  }
}

}  // namespace twentyq
