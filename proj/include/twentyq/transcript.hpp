// Query sets and the transcript of a trial.
//
// A query set is a finite union of equal-width cells of [0,1], stored as a
// bit pattern: stage-1 queries set one bit per first-level sub-interval,
// stage-2 queries store the second-level offset pattern which is implicitly
// cloned into every first-level sub-interval.  Cells are half-open [a, b);
// s = 1 belongs to the last cell.
//
// The transcript records every channel use in order.  The questioner sees
// sets and responses; the eavesdropper's view (TranscriptView) exposes the
// kinds and sets only, with no path to any response symbol.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace twentyq {

enum class QueryKind { Stage1, Sprt, Stage2 };

// Index of the cell containing s in an n-way equal partition of [0,1].
inline int cell_index(double s, int n) {
  if (!(s >= 0.0 && s <= 1.0)) throw std::domain_error("cell_index: s outside [0,1]");
  int i = static_cast<int>(s * n);
  return i >= n ? n - 1 : i;
}

inline double cell_center(int i, int n) { return (i + 0.5) / n; }

class QuerySet {
 public:
  // One bit per first-level cell; set = union of cells with bit 1.
  static QuerySet first_level(std::vector<std::uint8_t> bits) {
    QuerySet q;
    q.bits_ = std::move(bits);
    q.levels_ = 1;
    return q;
  }

  // Offset pattern over the M/L second-level cells of one first-level
  // sub-interval, cloned into all `levels` sub-intervals.
  static QuerySet cloned(std::vector<std::uint8_t> offset_bits, int levels) {
    if (levels < 1) throw std::invalid_argument("QuerySet: levels must be >= 1");
    QuerySet q;
    q.bits_ = std::move(offset_bits);
    q.levels_ = levels;
    return q;
  }

  // Placeholder for transcript records that carry no set (SPRT symbols).
  static QuerySet none() { return QuerySet(); }

  bool has_set() const { return !bits_.empty(); }
  bool is_cloned() const { return levels_ > 1; }
  int levels() const { return levels_; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  // Lebesgue measure of the set.  Cloning preserves the bit fraction.
  double measure() const {
    if (bits_.empty()) return 0.0;
    int ones = 0;
    for (std::uint8_t b : bits_) ones += b != 0;
    return static_cast<double>(ones) / static_cast<double>(bits_.size());
  }

  bool contains(double s) const {
    if (bits_.empty()) return false;
    int cells = static_cast<int>(bits_.size()) * levels_;
    int global = cell_index(s, cells);
    int offset = global % static_cast<int>(bits_.size());
    return bits_[static_cast<std::size_t>(offset)] != 0;
  }

  // Materialized disjoint half-open intervals, adjacent cells merged.
  std::vector<std::pair<double, double>> intervals() const {
    std::vector<std::pair<double, double>> out;
    int n = static_cast<int>(bits_.size());
    if (n == 0) return out;
    int cells = n * levels_;
    double w = 1.0 / cells;
    for (int c = 0; c < cells; ++c) {
      if (bits_[static_cast<std::size_t>(c % n)] == 0) continue;
      double a = c * w;
      if (!out.empty() && out.back().second == a) {
        out.back().second = a + w;
      } else {
        out.emplace_back(a, a + w);
      }
    }
    return out;
  }

 private:
  QuerySet() = default;
  std::vector<std::uint8_t> bits_;
  int levels_ = 1;
};

struct TranscriptEntry {
  QueryKind kind;
  QuerySet set;
};

class Transcript {
 public:
  void record(QueryKind kind, QuerySet set, int response) {
    entries_.push_back({kind, std::move(set)});
    responses_.push_back(response);
  }

  std::size_t size() const { return entries_.size(); }
  const TranscriptEntry& entry(std::size_t i) const { return entries_.at(i); }
  int response(std::size_t i) const { return responses_.at(i); }
  const std::vector<TranscriptEntry>& entries() const { return entries_; }

 private:
  std::vector<TranscriptEntry> entries_;
  std::vector<int> responses_;
};

// The eavesdropper's window on a trial: ordered query sets and stage kinds.
// Response symbols are not reachable through this type.
class TranscriptView {
 public:
  explicit TranscriptView(const Transcript& t) : entries_(&t.entries()) {}

  std::size_t size() const { return entries_->size(); }
  const TranscriptEntry& entry(std::size_t i) const { return entries_->at(i); }

 private:
  const std::vector<TranscriptEntry>* entries_;
};

}  // namespace twentyq
