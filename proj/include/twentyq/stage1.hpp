// Stage 1: variable-length non-adaptive querying.
//
// L random Bernoulli codewords index the first-level sub-intervals.  Query i
// is the union of the sub-intervals whose codeword bit x_i(j) is 1.  The
// questioner accumulates per-codeword information densities and stops once
// some codeword's sum reaches the threshold; the estimate is the largest
// qualifying index.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "twentyq/channel.hpp"
#include "twentyq/rng.hpp"
#include "twentyq/transcript.hpp"

namespace twentyq {

// Append-only list of L-bit codeword columns, extended on demand from its
// own rng.  Column i is immutable once generated.
class Codebook {
 public:
  Codebook(int levels, double bias, std::uint64_t seed)
      : levels_(levels), bias_(bias), rng_(seed) {
    if (levels < 1) throw std::invalid_argument("Codebook: need at least one codeword");
    if (!(bias >= 0.0 && bias <= 1.0)) throw std::invalid_argument("Codebook: bias outside [0,1]");
  }

  int levels() const { return levels_; }
  double bias() const { return bias_; }

  // Bits (x_i(1), ..., x_i(L)) of query index i >= 1.
  const std::vector<std::uint8_t>& column(int i) {
    if (i < 1) throw std::invalid_argument("Codebook: query index starts at 1");
    while (static_cast<int>(columns_.size()) < i) {
      std::vector<std::uint8_t> col(static_cast<std::size_t>(levels_));
      for (auto& b : col) b = rng_.bernoulli(bias_) ? 1 : 0;
      columns_.push_back(std::move(col));
    }
    return columns_[static_cast<std::size_t>(i - 1)];
  }

 private:
  int levels_;
  double bias_;
  Rng rng_;
  std::vector<std::vector<std::uint8_t>> columns_;
};

enum class InfoDensityMode { Nominal, Realized };
enum class Stage1Decode { MaxIndex, ArgmaxDensity };

// Information-density tables used by the stage-1 decoder.  Nominal mode uses
// h(p) at the codebook bias for every query; realized mode evaluates h at
// the posed query's measure (#ones / L), cached per ones-count.
class InfoDensityTables {
 public:
  InfoDensityTables(const QueryDependentChannel& ch, double bias, int levels,
                    InfoDensityMode mode)
      : channel_(&ch), bias_(bias), levels_(levels), mode_(mode) {
    nominal_.emplace(ch, bias, bias);
    if (mode == InfoDensityMode::Realized)
      realized_.resize(static_cast<std::size_t>(levels) + 1);
  }

  const InfoDensityTable& for_ones(int ones) const {
    if (mode_ == InfoDensityMode::Nominal) return *nominal_;
    auto& slot = realized_[static_cast<std::size_t>(ones)];
    if (!slot) {
      double a = static_cast<double>(ones) / static_cast<double>(levels_);
      slot.emplace(*channel_, bias_, a);
    }
    return *slot;
  }

 private:
  const QueryDependentChannel* channel_;
  double bias_;
  int levels_;
  InfoDensityMode mode_;
  std::optional<InfoDensityTable> nominal_;
  mutable std::vector<std::optional<InfoDensityTable>> realized_;
};

struct Stage1Outcome {
  int w = 0;    // decoded first-level index, 0-based
  int tau = 0;  // absolute stage-1 query index at the stop
};

// Running per-codeword sums of information densities.
class Stage1State {
 public:
  explicit Stage1State(int levels)
      : cum_(static_cast<std::size_t>(levels), 0.0), query_index_(0) {}

  int levels() const { return static_cast<int>(cum_.size()); }
  int query_index() const { return query_index_; }
  std::span<const double> cum() const { return cum_; }

  // Adds i(x_i(j); y) to every codeword's sum.
  void step(std::span<const std::uint8_t> column, int y, const InfoDensityTable& table) {
    if (column.size() != cum_.size())
      throw std::invalid_argument("Stage1State: column length mismatch");
    double inc[2] = {table(0, y), table(1, y)};
    for (std::size_t j = 0; j < cum_.size(); ++j) cum_[j] += inc[column[j] & 1];
    ++query_index_;
  }

  // If some sum reached lambda, the decoded index: the largest qualifying
  // index under MaxIndex, the largest sum (smallest index on ties) under
  // ArgmaxDensity.
  std::optional<Stage1Outcome> check_stop(double lambda, Stage1Decode rule) const {
    double best = cum_[0];
    for (double v : cum_) best = std::max(best, v);
    if (best < lambda) return std::nullopt;
    int w = 0;
    if (rule == Stage1Decode::MaxIndex) {
      for (std::size_t j = 0; j < cum_.size(); ++j)
        if (cum_[j] >= lambda) w = static_cast<int>(j);
    } else {
      for (std::size_t j = 0; j < cum_.size(); ++j)
        if (cum_[j] > cum_[static_cast<std::size_t>(w)]) w = static_cast<int>(j);
    }
    return Stage1Outcome{w, query_index_};
  }

 private:
  std::vector<double> cum_;
  int query_index_;
};

// One variable-length estimation: poses queries `start`, `start`+1, ...
// until the threshold is crossed or the absolute cap is exceeded.  The state
// carries over between the first and second estimations, so the second
// continues the same cumulative sums.  Every channel use is appended to the
// transcript.  Returns nullopt when the cap is hit (a stage failure).
inline std::optional<Stage1Outcome> run_estimation(Stage1State& state, Codebook& codebook,
                                                   const QueryDependentChannel& channel,
                                                   const InfoDensityTables& tables,
                                                   int true_bin, double lambda, int start,
                                                   int max_queries, Stage1Decode rule,
                                                   Rng& noise, Transcript& transcript) {
  if (lambda < 0.0) throw std::invalid_argument("run_estimation: lambda must be >= 0");
  if (true_bin < 0 || true_bin >= codebook.levels())
    throw std::invalid_argument("run_estimation: target bin out of range");
  for (int i = start; i <= max_queries; ++i) {
    const std::vector<std::uint8_t>& col = codebook.column(i);
    int ones = 0;
    for (std::uint8_t b : col) ones += b != 0;
    int x = col[static_cast<std::size_t>(true_bin)] != 0 ? 1 : 0;
    double measure = static_cast<double>(ones) / static_cast<double>(col.size());
    int y = channel.sample(x, measure, noise);
    transcript.record(QueryKind::Stage1, QuerySet::first_level(col), y);
    state.step(col, y, tables.for_ones(ones));
    if (auto out = state.check_stop(lambda, rule)) return out;
  }
  return std::nullopt;
}

}  // namespace twentyq
