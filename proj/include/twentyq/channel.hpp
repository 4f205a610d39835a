// Query-dependent binary-input channels.
//
// A query-dependent DMC has transition law P^{h(a)}_{Y|X} where a is the
// Lebesgue measure of the posed query and h maps measures to a noise
// parameter.  The reference family is the binary symmetric channel with
// crossover h(a); an arbitrary row-stochastic family indexed by the query
// measure is supported behind the same interface.  On top of the transition
// law this header provides information densities, KL divergence, capacity,
// the maximal pairwise KL divergence between conditional output laws, and
// the overshoot constant b(.) used by the stopping-time bounds.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "twentyq/rng.hpp"

namespace twentyq {

// Saturating stand-in for infinite nats.  Noiseless channels produce
// infinite log-likelihood ratios; a finite sentinel keeps threshold
// comparisons and accumulation well defined.
inline constexpr double kInfNats = 1e9;

inline bool is_saturated(double nats) { return std::abs(nats) >= 0.5 * kInfNats; }

// log(num/den) with zero cases mapped to the sentinel.  Both zero is a
// domain error and must be handled by the caller beforehand.
inline double log_ratio(double num, double den) {
  if (num <= 0.0 && den <= 0.0) throw std::domain_error("log_ratio: 0/0");
  if (den <= 0.0) return kInfNats;
  if (num <= 0.0) return -kInfNats;
  return std::min(kInfNats, std::max(-kInfNats, std::log(num / den)));
}

// Noise-parameter map h: query measure in [0,1] -> crossover in [0, 0.5].
struct HFunction {
  enum class Kind { Affine, Constant };

  Kind kind = Kind::Constant;
  double c0 = 0.0;  // affine: h(p) = c0 + c1 * p
  double c1 = 0.0;
  double q = 0.0;  // constant

  static HFunction affine(double c0, double c1) {
    HFunction h;
    h.kind = Kind::Affine;
    h.c0 = c0;
    h.c1 = c1;
    // h is monotone on [0,1], so range checks at the endpoints suffice.
    for (double a : {0.0, 1.0}) {
      double v = c0 + c1 * a;
      if (v < 0.0 || v > 0.5)
        throw std::invalid_argument("HFunction: h(p) must stay in [0, 0.5] on [0,1]");
    }
    return h;
  }

  static HFunction constant(double q) {
    if (q < 0.0 || q > 0.5)
      throw std::invalid_argument("HFunction: constant crossover must be in [0, 0.5]");
    HFunction h;
    h.kind = Kind::Constant;
    h.q = q;
    return h;
  }

  double operator()(double p) const {
    return kind == Kind::Affine ? c0 + c1 * p : q;
  }

  double lipschitz_constant() const { return kind == Kind::Affine ? std::abs(c1) : 0.0; }

  bool is_noiseless() const {
    return kind == Kind::Constant ? q == 0.0 : (c0 == 0.0 && c1 == 0.0);
  }
};

// Binary-input DMC whose rows depend on the query measure a.
class QueryDependentChannel {
 public:
  // Row callback for non-BSC families: rows(x, a) -> P(. | x) at measure a.
  using RowFn = std::function<std::vector<double>(int x, double a)>;

  static QueryDependentChannel bsc(HFunction h) {
    QueryDependentChannel c;
    c.output_size_ = 2;
    c.h_ = h;
    c.is_bsc_ = true;
    return c;
  }

  static QueryDependentChannel general(int output_alphabet_size, RowFn rows) {
    if (output_alphabet_size < 1)
      throw std::invalid_argument("channel: output alphabet must be nonempty");
    QueryDependentChannel c;
    c.output_size_ = output_alphabet_size;
    c.rows_ = std::move(rows);
    c.is_bsc_ = false;
    c.validate_rows();
    return c;
  }

  int output_alphabet_size() const { return output_size_; }
  bool is_bsc() const { return is_bsc_; }
  const HFunction& h() const {
    if (!is_bsc_) throw std::logic_error("channel: h() only defined for the BSC family");
    return h_;
  }

  // P^{h(a)}_{Y|X}(y | x)
  double transition(int x, int y, double a) const {
    check_domain(x, y, a);
    if (is_bsc_) {
      double q = h_(a);
      return y == x ? 1.0 - q : q;
    }
    return rows_(x, a)[static_cast<std::size_t>(y)];
  }

  // Full row P(. | x) at measure a.
  std::vector<double> row(int x, double a) const {
    check_domain(x, 0, a);
    if (is_bsc_) {
      double q = h_(a);
      return x == 0 ? std::vector<double>{1.0 - q, q} : std::vector<double>{q, 1.0 - q};
    }
    return rows_(x, a);
  }

  int sample(int x, double a, Rng& rng) const {
    check_domain(x, 0, a);
    if (is_bsc_) {
      double q = h_(a);
      int flip = rng.bernoulli(q) ? 1 : 0;
      return x ^ flip;
    }
    std::vector<double> r = rows_(x, a);
    double u = rng.uniform();
    double acc = 0.0;
    for (int y = 0; y < output_size_; ++y) {
      acc += r[static_cast<std::size_t>(y)];
      if (u < acc) return y;
    }
    return output_size_ - 1;
  }

 private:
  void check_domain(int x, int y, double a) const {
    if (x != 0 && x != 1) throw std::domain_error("channel: input must be a bit");
    if (y < 0 || y >= output_size_) throw std::domain_error("channel: output symbol out of range");
    if (!(a >= 0.0 && a <= 1.0)) throw std::domain_error("channel: query measure must be in [0,1]");
  }

  void validate_rows() const {
    for (int i = 0; i <= 100; ++i) {
      double a = static_cast<double>(i) / 100.0;
      for (int x = 0; x < 2; ++x) {
        std::vector<double> r = rows_(x, a);
        if (static_cast<int>(r.size()) != output_size_)
          throw std::invalid_argument("channel: row length mismatch");
        double sum = 0.0;
        for (double v : r) {
          if (v < 0.0 || v > 1.0) throw std::invalid_argument("channel: entry outside [0,1]");
          sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-12)
          throw std::invalid_argument("channel: row does not sum to 1");
      }
    }
  }

  int output_size_ = 2;
  HFunction h_;
  RowFn rows_;
  bool is_bsc_ = true;
};

// Output marginal P^{h(a)}_Y(y) induced by X ~ Bern(p) and the channel at
// query measure a.
inline double output_prob(const QueryDependentChannel& ch, double p, double a, int y) {
  return (1.0 - p) * ch.transition(0, y, a) + p * ch.transition(1, y, a);
}

// Per-(x, y) information densities log(P_{Y|X}(y|x) / P_Y(y)) in nats at a
// fixed input bias p and query measure a.
class InfoDensityTable {
 public:
  InfoDensityTable(const QueryDependentChannel& ch, double p_bias, double a_measure)
      : output_size_(ch.output_alphabet_size()), p_(p_bias) {
    values_.resize(2 * static_cast<std::size_t>(output_size_));
    weights_.resize(values_.size());
    for (int x = 0; x < 2; ++x) {
      double px = x == 0 ? 1.0 - p_bias : p_bias;
      for (int y = 0; y < output_size_; ++y) {
        double t = ch.transition(x, y, a_measure);
        double py = output_prob(ch, p_bias, a_measure, y);
        double v;
        if (t <= 0.0 && py <= 0.0) {
          v = 0.0;  // unreachable symbol; zero weight below keeps it inert
        } else {
          v = log_ratio(t, py);
        }
        values_[index(x, y)] = v;
        weights_[index(x, y)] = px * t;
      }
    }
  }

  double operator()(int x, int y) const { return values_[index(x, y)]; }

  double bias() const { return p_; }

  // E[i(X;Y)] over Bern(p) x channel rows: the mutual information, >= 0.
  double expected() const {
    double e = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (weights_[i] > 0.0) e += weights_[i] * values_[i];
    }
    return e;
  }

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(output_size_) +
           static_cast<std::size_t>(y);
  }

  int output_size_;
  double p_;
  std::vector<double> values_;
  std::vector<double> weights_;
};

// i^{h(p)}(x; y) with input bias and query measure both equal to p.
inline double info_density(const QueryDependentChannel& ch, double p, int x, int y) {
  double t = ch.transition(x, y, p);
  double py = output_prob(ch, p, p, y);
  if (t <= 0.0 && py <= 0.0) throw std::domain_error("info_density: symbol unreachable");
  return log_ratio(t, py);
}

// D(P || Q) for distributions on a shared finite alphabet, in nats.
// 0 log(0/q) = 0; p > 0 with q = 0 saturates to the sentinel.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw std::invalid_argument("kl_divergence: alphabet size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return kInfNats;
    d += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(0.0, std::min(d, kInfNats));
}

inline double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  return kl_divergence(std::span<const double>(p), std::span<const double>(q));
}

// Mutual information E[i^{h(p)}(X;Y)] at input bias p.
inline double mutual_information(const QueryDependentChannel& ch, double p) {
  return InfoDensityTable(ch, p, p).expected();
}

struct CapacityResult {
  double value = 0.0;   // C in nats per query
  double p_star = 0.5;  // optimizing input bias
};

// Maximizes E[i^{h(p)}(X;Y)] over p in [0,1]: coarse grid then
// golden-section refinement of the bracketing cell.
inline CapacityResult capacity(const QueryDependentChannel& ch) {
  const int grid = 1000;
  double best_p = 0.0;
  double best_v = -1.0;
  for (int i = 0; i <= grid; ++i) {
    double p = static_cast<double>(i) / grid;
    double v = mutual_information(ch, p);
    if (v > best_v) {
      best_v = v;
      best_p = p;
    }
  }
  double lo = std::max(0.0, best_p - 1.0 / grid);
  double hi = std::min(1.0, best_p + 1.0 / grid);
  const double inv_golden = 0.6180339887498949;
  double x1 = hi - inv_golden * (hi - lo);
  double x2 = lo + inv_golden * (hi - lo);
  double f1 = mutual_information(ch, x1);
  double f2 = mutual_information(ch, x2);
  while (hi - lo > 1e-9) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_golden * (hi - lo);
      f2 = mutual_information(ch, x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_golden * (hi - lo);
      f1 = mutual_information(ch, x1);
    }
  }
  double p_hat = 0.5 * (lo + hi);
  return {std::max(0.0, mutual_information(ch, p_hat)), p_hat};
}

struct MaxPairKl {
  double c_tilde = 0.0;  // maximal pairwise KL divergence, nats
  int x_accept = 0;
  int x_reject = 1;
};

// Maximal KL divergence between conditional output laws over ordered input
// pairs, at query measure p.  Ties resolve lexicographically in (x, x').
inline MaxPairKl max_pair_kl(const QueryDependentChannel& ch, double p) {
  MaxPairKl best;
  best.c_tilde = -1.0;
  for (int x = 0; x < 2; ++x) {
    for (int xp = 0; xp < 2; ++xp) {
      if (x == xp) continue;
      double d = kl_divergence(ch.row(x, p), ch.row(xp, p));
      if (d > best.c_tilde) {
        best.c_tilde = d;
        best.x_accept = x;
        best.x_reject = xp;
      }
    }
  }
  if (best.c_tilde <= 0.0) return {0.0, 0, 1};
  return best;
}

// A finite distribution of a real-valued statistic.
struct WeightedSample {
  double value = 0.0;
  double prob = 0.0;
};

// b(P_X) = min{ E[(X^+)^2] / E[X], esssup X }, defined for E[X] > 0.
inline double b_constant(std::span<const WeightedSample> dist) {
  double mean = 0.0;
  double second_plus = 0.0;
  double ess_sup = -kInfNats;
  bool any = false;
  for (const WeightedSample& s : dist) {
    if (s.prob <= 0.0) continue;
    any = true;
    mean += s.prob * s.value;
    double plus = std::max(0.0, s.value);
    second_plus += s.prob * plus * plus;
    ess_sup = std::max(ess_sup, s.value);
  }
  if (!any || mean <= 0.0) throw std::domain_error("b_constant: requires E[X] > 0");
  return std::min(second_plus / mean, ess_sup);
}

inline double b_constant(const std::vector<WeightedSample>& dist) {
  return b_constant(std::span<const WeightedSample>(dist));
}

// Distribution of i^{h(p)}(X;Y) under Bern(p) x channel rows at measure p.
inline std::vector<WeightedSample> info_density_distribution(const QueryDependentChannel& ch,
                                                             double p) {
  InfoDensityTable table(ch, p, p);
  std::vector<WeightedSample> d;
  for (int x = 0; x < 2; ++x) {
    double px = x == 0 ? 1.0 - p : p;
    for (int y = 0; y < ch.output_alphabet_size(); ++y) {
      double w = px * ch.transition(x, y, p);
      if (w > 0.0) d.push_back({table(x, y), w});
    }
  }
  return d;
}

// Distribution of log(P_{Y|X=x_num}(Y) / P_{Y|X=x_den}(Y)) with
// Y ~ P_{Y|X=x_sample}, all rows at query measure p.
inline std::vector<WeightedSample> llr_distribution(const QueryDependentChannel& ch, double p,
                                                    int x_num, int x_den, int x_sample) {
  std::vector<WeightedSample> d;
  for (int y = 0; y < ch.output_alphabet_size(); ++y) {
    double w = ch.transition(x_sample, y, p);
    if (w <= 0.0) continue;
    d.push_back({log_ratio(ch.transition(x_num, y, p), ch.transition(x_den, y, p)), w});
  }
  return d;
}

// Derived constants consumed by the procedure and the bounds: capacity and
// its argmax, the maximal pairwise KL divergence with the attaining input
// pair, both directed divergences between those rows, and the overshoot
// constants of the three log-likelihood-ratio laws.
struct ChannelConstants {
  double capacity = 0.0;  // C, nats per query
  double p_star = 0.5;
  double c_tilde = 0.0;  // maximal pairwise KL divergence at p_star
  int x_accept = 0;
  int x_reject = 1;
  double d_accept_reject = 0.0;  // D(P_{Y|X=x_A} || P_{Y|X=x_R})
  double d_reject_accept = 0.0;  // D(P_{Y|X=x_R} || P_{Y|X=x_A})
  double b = 0.0;                // b(P_{i(X;Y)}) at p_star
  double b_accept = 0.0;         // b of the accept-hypothesis LLR law
  double b_reject = 0.0;         // b of the reject-hypothesis LLR law
};

inline ChannelConstants channel_constants(const QueryDependentChannel& ch) {
  ChannelConstants k;
  CapacityResult cap = capacity(ch);
  k.capacity = cap.value;
  k.p_star = cap.p_star;
  MaxPairKl mp = max_pair_kl(ch, k.p_star);
  k.c_tilde = mp.c_tilde;
  k.x_accept = mp.x_accept;
  k.x_reject = mp.x_reject;
  k.d_accept_reject = kl_divergence(ch.row(k.x_accept, k.p_star), ch.row(k.x_reject, k.p_star));
  k.d_reject_accept = kl_divergence(ch.row(k.x_reject, k.p_star), ch.row(k.x_accept, k.p_star));
  if (k.capacity > 0.0) {
    k.b = b_constant(info_density_distribution(ch, k.p_star));
  }
  if (k.c_tilde > 0.0) {
    k.b_accept =
        b_constant(llr_distribution(ch, k.p_star, k.x_accept, k.x_reject, k.x_accept));
    k.b_reject =
        b_constant(llr_distribution(ch, k.p_star, k.x_reject, k.x_accept, k.x_reject));
  }
  return k;
}

}  // namespace twentyq
