// Eavesdropper strategies and the privacy check.
//
// The adversary decodes from a TranscriptView, which carries query sets and
// their order only.  The privacy constraint requires, for every k up to
// ceil(L/2), that the adversary lands within (2k-1)/(2L) of the target with
// probability at most (2k-1)/L.

#pragma once

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "twentyq/rng.hpp"
#include "twentyq/transcript.hpp"

namespace twentyq {

enum class AdversaryKind { UniformRandom, OffsetHeuristic };

inline std::string adversary_name(AdversaryKind k) {
  return k == AdversaryKind::UniformRandom ? "uniform_random" : "offset_heuristic";
}

// Point estimate of the target from the query sets alone.
//
// uniform_random ignores the transcript and returns the center of a
// uniformly chosen first-level sub-interval.  offset_heuristic reads the
// final stage-2 cloned pattern -- the second-level offset is visible since
// the pattern repeats with period 1/L -- takes the smallest offset in that
// query as the within-interval position, and picks the first-level
// sub-interval uniformly at random.
inline double adversary_estimate(AdversaryKind kind, const TranscriptView& view, int levels,
                                 int total_bins, Rng& rng) {
  if (levels < 1) throw std::invalid_argument("adversary: levels must be >= 1");
  if (view.size() == 0) return rng.uniform();

  if (kind == AdversaryKind::UniformRandom) {
    int cell = static_cast<int>(rng.below(static_cast<std::uint64_t>(levels)));
    return cell_center(cell, levels);
  }

  const QuerySet* last_stage2 = nullptr;
  for (std::size_t i = view.size(); i-- > 0;) {
    if (view.entry(i).kind == QueryKind::Stage2) {
      last_stage2 = &view.entry(i).set;
      break;
    }
  }
  int level = static_cast<int>(rng.below(static_cast<std::uint64_t>(levels)));
  if (last_stage2 == nullptr) return rng.uniform();

  const std::vector<std::uint8_t>& bits = last_stage2->bits();
  int smallest = -1;
  bool all_ones = true;
  for (std::size_t j = 0; j < bits.size(); ++j) {
    if (bits[j] != 0) {
      if (smallest < 0) smallest = static_cast<int>(j);
    } else {
      all_ones = false;
    }
  }
  if (smallest < 0 || all_ones) {
    // No offset information in a full or empty pattern.
    return (level + rng.uniform()) / levels;
  }
  return static_cast<double>(level) / levels + (smallest + 0.5) / total_bins;
}

struct PrivacyRow {
  int k = 1;
  double empirical = 0.0;
  double ci_lo = 0.0;    // 99% binomial interval
  double ci_hi = 0.0;
  double bound = 0.0;    // (2k-1)/L
  double sigma = 0.0;    // binomial sigma at the empirical rate
  bool pass = false;     // empirical within three sigmas of the bound
  long n = 0;
};

struct PrivacyReport {
  std::vector<PrivacyRow> rows;
  bool low_power = false;  // fewer than 1000 samples
};

// Empirical check of the privacy constraint from (S, S-tilde) pairs.
inline PrivacyReport evaluate_privacy(std::span<const std::pair<double, double>> samples,
                                      int levels) {
  if (levels < 2) throw std::invalid_argument("evaluate_privacy: L must be >= 2");
  PrivacyReport report;
  report.low_power = samples.size() < 1000;
  const long n = static_cast<long>(samples.size());
  const int k_max = (levels + 1) / 2;
  for (int k = 1; k <= k_max; ++k) {
    double radius = (2.0 * k - 1.0) / (2.0 * levels);
    long hits = 0;
    for (const auto& [s, s_tilde] : samples)
      if (std::abs(s_tilde - s) <= radius) ++hits;
    PrivacyRow row;
    row.k = k;
    row.n = n;
    row.bound = (2.0 * k - 1.0) / levels;
    row.empirical = n > 0 ? static_cast<double>(hits) / n : 0.0;
    row.sigma = n > 0 ? std::sqrt(row.empirical * (1.0 - row.empirical) / n) : 0.0;
    double half = 2.5758293035489004 * row.sigma;  // 99% normal interval
    row.ci_lo = std::max(0.0, row.empirical - half);
    row.ci_hi = std::min(1.0, row.empirical + half);
    row.pass = row.empirical <= row.bound + 3.0 * row.sigma;
    report.rows.push_back(row);
  }
  return report;
}

// Order-sensitive hash of the stage-2 query patterns of a transcript.
inline std::uint64_t stage2_pattern_hash(const TranscriptView& view) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  auto mix = [&h](std::uint8_t byte) {
    h ^= byte;
    h *= 1099511628211ULL;
  };
  for (std::size_t i = 0; i < view.size(); ++i) {
    if (view.entry(i).kind != QueryKind::Stage2) continue;
    mix(0xff);
    for (std::uint8_t b : view.entry(i).set.bits()) mix(b);
  }
  return h;
}

// Pearson chi-square independence test on a contingency table; returns the
// p-value.  Rows/columns with zero margin are dropped from the statistic.
inline double chi_square_p_value(const std::vector<std::vector<long>>& table) {
  std::size_t rows = table.size();
  if (rows == 0) return 1.0;
  std::size_t cols = table[0].size();
  std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (table[i].size() != cols) throw std::invalid_argument("chi_square: ragged table");
    for (std::size_t j = 0; j < cols; ++j) {
      row_sum[i] += table[i][j];
      col_sum[j] += table[i][j];
      total += table[i][j];
    }
  }
  if (total <= 0.0) return 1.0;
  int active_rows = 0, active_cols = 0;
  for (double v : row_sum) active_rows += v > 0.0;
  for (double v : col_sum) active_cols += v > 0.0;
  int dof = (active_rows - 1) * (active_cols - 1);
  if (dof <= 0) return 1.0;
  double stat = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (row_sum[i] <= 0.0) continue;
    for (std::size_t j = 0; j < cols; ++j) {
      if (col_sum[j] <= 0.0) continue;
      double expected = row_sum[i] * col_sum[j] / total;
      double diff = table[i][j] - expected;
      stat += diff * diff / expected;
    }
  }
  return boost::math::gamma_q(0.5 * dof, 0.5 * stat);
}

}  // namespace twentyq
