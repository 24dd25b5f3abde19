#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "orderplan/data.hpp"
#include "orderplan/metrics.hpp"

using namespace orderplan;

namespace {

Sentence S(const std::string& s) { return split_whitespace(s); }

const double kNistBeta = -std::log(0.5) / (std::log(1.5) * std::log(1.5));

}  // namespace

TEST(Ngrams, CountsAndClipping) {
  const auto c = count_ngrams(S("a b a b"), 2);
  EXPECT_EQ(c.at({"a", "b"}), 2u);
  EXPECT_EQ(c.at({"b", "a"}), 1u);
  EXPECT_TRUE(count_ngrams(S("a b"), 3).empty());
  EXPECT_EQ(clipped_matches(count_ngrams(S("the the the"), 1), count_ngrams(S("the cat the"), 1)), 2u);
}

// Fixture 1: one differing final token.
//   1-grams 5/6, 2-grams 4/5, 3-grams 3/4, 4-grams 2/3, equal lengths.
TEST(MetricOracle, SingleSegmentOneSubstitution) {
  const std::vector<Sentence> h{S("a b c d e f")}, r{S("a b c d e g")};
  EXPECT_NEAR(bleu4(h, r), std::pow(1.0 / 3.0, 0.25), 1e-12);
  EXPECT_NEAR(rouge4(h, r), 2.0 / 3.0, 1e-12);
  // all unigrams have count 1 among 6 reference words: info log2(6); longer
  // n-grams carry zero information (prefix count == n-gram count)
  EXPECT_NEAR(nist4(h, r), 5.0 / 6.0 * std::log2(6.0), 1e-12);
}

// Fixture 2: two segments, hypotheses shorter than references (c=8, r=10).
TEST(MetricOracle, BrevityPenalties) {
  const std::vector<Sentence> h{S("a b c d"), S("x y z w")}, r{S("a b c d e f"), S("x y z w")};
  EXPECT_NEAR(bleu4(h, r), std::exp(1.0 - 10.0 / 8.0), 1e-12);
  EXPECT_NEAR(rouge4(h, r), 2.0 / 4.0, 1e-12);
  const double bp = std::exp(-kNistBeta * std::pow(std::log(0.8), 2));
  EXPECT_NEAR(nist4(h, r), std::log2(10.0) * bp, 1e-12);
}

// Fixture 3: clipping of a repeated word.
TEST(MetricOracle, ClippedRepeats) {
  const std::vector<Sentence> h{S("the the the the")}, r{S("the cat the mat")};
  EXPECT_EQ(bleu4(h, r), 0.0);
  EXPECT_EQ(rouge4(h, r), 0.0);
  // info(the) = log2(4/2) = 1, two clipped matches over four hypothesis words
  EXPECT_NEAR(nist4(h, r), 0.5, 1e-12);
}

// Fixture 4: nonzero higher-order NIST information.
//   a:1 b:2 c:2, ab:1 ba:0 ac:1, every 3/4-gram 0.
TEST(MetricOracle, NistHigherOrderInformation) {
  const std::vector<Sentence> h{S("a b a c")}, r{S("a b a c")};
  EXPECT_NEAR(nist4(h, r), 1.5 + 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(bleu4(h, r), 1.0, 1e-12);
  EXPECT_NEAR(rouge4(h, r), 1.0, 1e-12);
  const auto info = nist_information(r);
  EXPECT_NEAR(info.at({"a"}), 1.0, 1e-15);
  EXPECT_NEAR(info.at({"b"}), 2.0, 1e-15);
  EXPECT_NEAR(info.at({"a", "b"}), 1.0, 1e-15);
  EXPECT_NEAR(info.at({"b", "a"}), 0.0, 1e-15);
}

// Fixture 5: corpus-level pooling of n-gram counts.
//   1-grams 9/10, 2-grams 6/8, 3-grams 3/6, 4-grams 2/4.
TEST(MetricOracle, CorpusPooling) {
  const std::vector<Sentence> h{S("a b c d e"), S("p q r s t")}, r{S("a b c d e"), S("p q x s t")};
  EXPECT_NEAR(bleu4(h, r), std::pow(0.9 * 0.75 * 0.5 * 0.5, 0.25), 1e-12);
  EXPECT_NEAR(rouge4(h, r), 0.5, 1e-12);
}

// Fixture 6: hypothesis longer than the reference gets no brevity penalty.
//   1-grams 4/5, 2-grams 3/4, 3-grams 2/3, 4-grams 1/2.
TEST(MetricOracle, LongHypothesis) {
  const std::vector<Sentence> h{S("a b c d z")}, r{S("a b c d")};
  EXPECT_NEAR(bleu4(h, r), std::pow(0.8 * 0.75 * (2.0 / 3.0) * 0.5, 0.25), 1e-12);
  EXPECT_NEAR(rouge4(h, r), 1.0, 1e-12);
  // four unigram matches, info log2(4) each, over five hypothesis unigrams
  EXPECT_NEAR(nist4(h, r), 4.0 * 2.0 / 5.0, 1e-12);
}

TEST(MetricLimits, IdenticalCorpusScoresOne) {
  const std::vector<Sentence> c{S("john smith was a poet ."), S("born in 1901 in paris ,")};
  EXPECT_EQ(bleu4(c, c), 1.0);
  EXPECT_EQ(rouge4(c, c), 1.0);
}

TEST(MetricLimits, DisjointCorpusScoresZero) {
  const std::vector<Sentence> h{S("q r s t u v")}, r{S("a b c d e f")};
  EXPECT_EQ(bleu4(h, r), 0.0);
  EXPECT_EQ(rouge4(h, r), 0.0);
  EXPECT_EQ(nist4(h, r), 0.0);
}

TEST(MetricErrors, EmptyOrMismatchedCorpora) {
  const std::vector<Sentence> none, one{S("a b c d")}, two{S("a b c d"), S("e f g h")};
  EXPECT_THROW(bleu4(none, none), InvalidInput);
  EXPECT_THROW(bleu4(one, two), InvalidInput);
  EXPECT_THROW(nist4(one, two), InvalidInput);
  const std::vector<Sentence> short_refs{S("a b c")};
  EXPECT_THROW(rouge4(short_refs, short_refs), InvalidInput);
  EXPECT_THROW(evaluate_corpus(short_refs, short_refs), InvalidInput);
}

TEST(MetricLimits, EmptyHypothesisScoresZero) {
  const std::vector<Sentence> h{Sentence{}}, r{S("a b c d")};
  EXPECT_EQ(bleu4(h, r), 0.0);
  EXPECT_EQ(nist4(h, r), 0.0);
}

TEST(Bleu, SmoothingOnlyAffectsHigherOrders) {
  const std::vector<Sentence> h{S("a b x")}, r{S("a b c")};
  EXPECT_EQ(bleu4(h, r), 0.0);
  // (2/3 * 2/3 * 1/2 * 1/1)^(1/4): add-one on n = 2..4 counts
  EXPECT_NEAR(bleu4(h, r, true), std::pow(2.0 / 3.0 * 2.0 / 3.0 * 0.5 * 1.0, 0.25), 1e-12);
}

TEST(NistBrevity, PenaltyShape) {
  EXPECT_EQ(nist_brevity_penalty(10, 10), 1.0);
  EXPECT_EQ(nist_brevity_penalty(12, 10), 1.0);
  EXPECT_NEAR(nist_brevity_penalty(10, 15), 0.5, 1e-12);  // ratio 2/3 gives exactly one half
  EXPECT_EQ(nist_brevity_penalty(0, 10), 0.0);
}

// Property: corpus scores do not depend on segment order, and stay in range.
TEST(MetricProperties, SegmentOrderInvarianceAndRange) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(4, 9), word(0, 5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Sentence> h, r;
    for (int s = 0; s < 5; ++s) {
      Sentence a, b;
      for (int i = len(rng); i > 0; --i) a.push_back("w" + std::to_string(word(rng)));
      for (int i = len(rng); i > 0; --i) b.push_back("w" + std::to_string(word(rng)));
      h.push_back(a);
      r.push_back(b);
    }
    const double b0 = bleu4(h, r), r0 = rouge4(h, r), n0 = nist4(h, r);
    EXPECT_GE(b0, 0.0);
    EXPECT_LE(b0, 1.0);
    EXPECT_GE(r0, 0.0);
    EXPECT_LE(r0, 1.0);
    EXPECT_GE(n0, 0.0);
    std::vector<std::size_t> perm{4, 2, 0, 3, 1};
    std::vector<Sentence> hp, rp;
    for (auto i : perm) {
      hp.push_back(h[i]);
      rp.push_back(r[i]);
    }
    EXPECT_NEAR(bleu4(hp, rp), b0, 1e-12);
    EXPECT_NEAR(rouge4(hp, rp), r0, 1e-12);
    EXPECT_NEAR(nist4(hp, rp), n0, 1e-12);
  }
}
