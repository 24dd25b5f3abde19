#pragma once

// Corpus-level BLEU-4, ROUGE-4 (recall) and NIST-4 over pre-tokenized,
// single-reference data.

#include <array>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "orderplan/errors.hpp"

namespace orderplan {

using Sentence = std::vector<std::string>;
using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

inline NgramCounts count_ngrams(const Sentence& s, std::size_t n) {
  NgramCounts out;
  if (s.size() < n) return out;
  for (std::size_t i = 0; i + n <= s.size(); ++i)
    ++out[std::vector<std::string>(s.begin() + static_cast<std::ptrdiff_t>(i),
                                   s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return out;
}

// Clipped n-gram matches between a hypothesis and its reference.
inline std::size_t clipped_matches(const NgramCounts& hyp, const NgramCounts& ref) {
  std::size_t m = 0;
  for (const auto& [g, c] : hyp) {
    auto it = ref.find(g);
    if (it != ref.end()) m += std::min(c, it->second);
  }
  return m;
}

struct SegmentStats {
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> hyp_ngrams{};
  std::array<std::size_t, 4> ref_ngrams{};
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
};

inline SegmentStats segment_stats(const Sentence& hyp, const Sentence& ref) {
  SegmentStats s;
  s.hyp_len = hyp.size();
  s.ref_len = ref.size();
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto h = count_ngrams(hyp, n);
    const auto r = count_ngrams(ref, n);
    s.matches[n - 1] = clipped_matches(h, r);
    s.hyp_ngrams[n - 1] = hyp.size() >= n ? hyp.size() - n + 1 : 0;
    s.ref_ngrams[n - 1] = ref.size() >= n ? ref.size() - n + 1 : 0;
  }
  return s;
}

namespace detail {
inline void check_corpus(std::span<const Sentence> hyps, std::span<const Sentence> refs) {
  if (hyps.empty()) throw InvalidInput("metric: empty corpus");
  if (hyps.size() != refs.size())
    throw InvalidInput("metric: " + std::to_string(hyps.size()) + " hypotheses for " + std::to_string(refs.size()) +
                       " references");
}
}  // namespace detail

// Geometric mean of clipped n-gram precisions (n = 1..4) times the brevity
// penalty; 0 when any precision is 0. `smooth` adds one to the n > 1 counts
// and is meant only for debugging on tiny corpora.
inline double bleu4(std::span<const Sentence> hyps, std::span<const Sentence> refs, bool smooth = false) {
  detail::check_corpus(hyps, refs);
  std::array<double, 4> m{}, t{};
  double c = 0, r = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto s = segment_stats(hyps[i], refs[i]);
    for (std::size_t n = 0; n < 4; ++n) {
      m[n] += static_cast<double>(s.matches[n]);
      t[n] += static_cast<double>(s.hyp_ngrams[n]);
    }
    c += static_cast<double>(s.hyp_len);
    r += static_cast<double>(s.ref_len);
  }
  if (c == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    double mn = m[n], tn = t[n];
    if (smooth && n > 0) {
      mn += 1;
      tn += 1;
    }
    if (mn == 0 || tn == 0) return 0.0;
    log_sum += std::log(mn / tn);
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / 4.0);
}

// Clipped 4-gram matches over total reference 4-grams.
inline double rouge4(std::span<const Sentence> hyps, std::span<const Sentence> refs) {
  detail::check_corpus(hyps, refs);
  std::size_t matched = 0, total = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto r = count_ngrams(refs[i], 4);
    matched += clipped_matches(count_ngrams(hyps[i], 4), r);
    total += refs[i].size() >= 4 ? refs[i].size() - 3 : 0;
  }
  if (total == 0) throw InvalidInput("rouge4: no reference has 4 or more tokens");
  return static_cast<double>(matched) / static_cast<double>(total);
}

// Information weight of every reference n-gram (n <= 4):
// info(w1..wn) = log2(count(w1..wn-1) / count(w1..wn)), with the unigram
// prefix count taken as the number of reference words.
inline std::map<std::vector<std::string>, double> nist_information(std::span<const Sentence> refs) {
  NgramCounts counts;
  std::size_t words = 0;
  for (const auto& r : refs) {
    words += r.size();
    for (std::size_t n = 1; n <= 4; ++n)
      for (const auto& [g, c] : count_ngrams(r, n)) counts[g] += c;
  }
  std::map<std::vector<std::string>, double> info;
  for (const auto& [g, c] : counts) {
    const double prefix = g.size() == 1 ? static_cast<double>(words)
                                        : static_cast<double>(counts.at(std::vector<std::string>(g.begin(), g.end() - 1)));
    info[g] = std::log2(prefix / static_cast<double>(c));
  }
  return info;
}

inline double nist_brevity_penalty(double hyp_len, double ref_len) {
  if (ref_len <= 0) return 1.0;
  const double ratio = hyp_len / ref_len;
  if (ratio >= 1.0) return 1.0;
  if (ratio <= 0.0) return 0.0;
  const double beta = -std::log(0.5) / std::pow(std::log(1.5), 2);
  return std::exp(-beta * std::pow(std::log(ratio), 2));
}

// Sum over n = 1..4 of (information of matched hypothesis n-grams / number of
// hypothesis n-grams), times the NIST brevity penalty.
inline double nist4(std::span<const Sentence> hyps, std::span<const Sentence> refs) {
  detail::check_corpus(hyps, refs);
  const auto info = nist_information(refs);
  std::array<double, 4> gained{}, hyp_total{};
  double hyp_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    hyp_len += static_cast<double>(hyps[i].size());
    ref_len += static_cast<double>(refs[i].size());
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto h = count_ngrams(hyps[i], n);
      const auto r = count_ngrams(refs[i], n);
      for (const auto& [g, c] : h) {
        hyp_total[n - 1] += static_cast<double>(c);
        auto it = r.find(g);
        if (it != r.end()) gained[n - 1] += info.at(g) * static_cast<double>(std::min(c, it->second));
      }
    }
  }
  double score = 0.0;
  for (std::size_t n = 0; n < 4; ++n)
    if (hyp_total[n] > 0) score += gained[n] / hyp_total[n];
  return score * nist_brevity_penalty(hyp_len, ref_len);
}

struct EvalReport {
  double bleu4 = 0.0;
  double rouge4 = 0.0;
  double nist4 = 0.0;
  std::vector<SegmentStats> segments;
};

inline EvalReport evaluate_corpus(std::span<const Sentence> hyps, std::span<const Sentence> refs) {
  EvalReport r;
  r.bleu4 = bleu4(hyps, refs);
  r.rouge4 = rouge4(hyps, refs);
  r.nist4 = nist4(hyps, refs);
  for (std::size_t i = 0; i < hyps.size(); ++i) r.segments.push_back(segment_stats(hyps[i], refs[i]));
  return r;
}

}  // namespace orderplan
