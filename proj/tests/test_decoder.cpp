#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "orderplan/decoder.hpp"
#include "orderplan/grad_check.hpp"

using namespace orderplan;

namespace {

Vocabularies small_vocab() {
  Vocabularies v;
  for (const char* w : {"arthur", "was", "a", "writer", "british"}) v.add_word(w);
  for (const char* f : {"name", "occupation", "nationality"}) v.add_field(f);
  return v;
}

ModelParams model_for(const Vocabularies& v, bool copy = true, AttentionMode a = AttentionMode::hybrid,
                      std::uint64_t seed = 5) {
  ModelConfig cfg;
  cfg.word_vocab = v.word_count();
  cfg.field_vocab = v.field_count();
  cfg.field_dim = 3;
  cfg.word_dim = 4;
  cfg.hidden_dim = 5;
  cfg.copy = copy;
  cfg.attention = a;
  cfg.init_scale = 0.5;
  cfg.seed = seed;
  return ModelParams(cfg);
}

InfoboxTable doyle_table(const Vocabularies& v) {
  RawRecord r{{{"name", {"arthur", "doyle"}}, {"occupation", {"writer"}}, {"nationality", {"british"}}}, {}};
  return parse_table(r, v);
}

}  // namespace

TEST(AttentionVector, Selectors) {
  Tape t;
  Var H = t.constant(Tensor::from(2, 2, {1, 2, 3, 4}));
  EXPECT_EQ(attention_vector(t.constant(Tensor::from({0.0, 1.0})), H).value(), Tensor::from({3, 4}));
  EXPECT_EQ(attention_vector(t.constant(Tensor::from({0.5, 0.5})), H).value(), Tensor::from({2, 3}));
  EXPECT_EQ(attention_vector(t.constant(Tensor::from({0.25, 0.75})), H).value(), Tensor::from({2.5, 3.5}));
  EXPECT_THROW(attention_vector(t.constant(Tensor::from({1.0})), H), DimensionError);
}

TEST(DecoderStep, ZeroWeightsGiveBias) {
  auto v = small_vocab();
  auto m = model_for(v);
  for (Parameter* p : m.all()) p->value.fill(0.0);
  for (std::size_t i = 0; i < m.out_bs.value.size(); ++i) m.out_bs.value[i] = 0.1 * static_cast<double>(i);
  Tape t;
  DecoderVars w(t, m);
  auto out = decoder_step(t.constant(Tensor::vector(5, 1.0)), t.constant(Tensor::vector(4, 1.0)),
                          t.constant(Tensor::vector(5)), t.constant(Tensor::vector(5)), w);
  EXPECT_EQ(out.s_lstm.value(), m.out_bs.value);
  EXPECT_EQ(out.s_lstm.value().size(), v.word_count());
}

TEST(DecoderStep, MatchesComposition) {
  auto v = small_vocab();
  auto m = model_for(v);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  Tensor a = Tensor::vector(5), y = Tensor::vector(4), h = Tensor::vector(5), c = Tensor::vector(5);
  for (Tensor* x : {&a, &y, &h, &c})
    for (double& e : x->data()) e = u(rng);
  Tape t;
  DecoderVars w(t, m);
  auto out = decoder_step(t.constant(a), t.constant(y), t.constant(h), t.constant(c), w);
  Var x = tanh(add(matvec(w.W_d, concat({t.constant(a), t.constant(y)})), w.b_d));
  auto s = lstm_cell(x, t.constant(h), t.constant(c), w.lstm);
  Var scores = add(matvec(w.W_s, s.h), w.b_s);
  for (std::size_t i = 0; i < scores.value().size(); ++i) EXPECT_NEAR(out.s_lstm.value()[i], scores.value()[i], 1e-12);
}

TEST(Copy, ScoresAddPerToken) {
  // W_c = 0: every position scores 0.5 * sum(h_dec)
  InfoboxTable table;
  table.positions = {{1, 3, "doyle"}, {1, 3, "doyle"}, {2, 4, "arthur"}};
  const Tensor H = Tensor::from(3, 2, {1, 2, 3, 4, 5, 6});
  const Tensor h = Tensor::from({0.4, 0.2});
  auto s = copy_scores(H, h, table, Tensor::matrix(2, 2));
  EXPECT_NEAR(s.at("doyle"), 2 * 0.5 * 0.6, 1e-15);
  EXPECT_NEAR(s.at("arthur"), 0.5 * 0.6, 1e-15);
  EXPECT_FALSE(s.contains("conan"));

  // scalar form: sigmoid of the bilinear score
  const Tensor I = Tensor::from(2, 2, {1, 0, 0, 1});
  auto sc = copy_scores(H, h, table, I, CopyScoreForm::scalar);
  EXPECT_NEAR(sc.at("arthur"), 1.0 / (1.0 + std::exp(-(5 * 0.4 + 6 * 0.2))), 1e-15);
}

TEST(Copy, RemovingAnOccurrenceNeverIncreasesScore) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor H = Tensor::matrix(4, 3), W = Tensor::matrix(3, 3), h = Tensor::vector(3);
    for (Tensor* x : {&H, &W}) for (double& e : x->data()) e = u(rng);
    for (double& e : h.data()) e = std::abs(u(rng));  // positive h keeps position scores positive
    InfoboxTable full, fewer;
    full.positions = {{1, 3, "x"}, {1, 3, "x"}, {2, 3, "y"}, {1, 3, "x"}};
    fewer.positions = {full.positions[0], full.positions[1], full.positions[2]};
    Tensor H3 = Tensor::matrix(3, 3);
    for (std::size_t i = 0; i < 9; ++i) H3[i] = H[i];
    EXPECT_LE(copy_scores(H3, h, fewer, W).at("x"), copy_scores(H, h, full, W).at("x"));
  }
}

TEST(UnionSupport, InVocabularyTokensAppearOnce) {
  auto v = small_vocab();
  RawRecord r{{{"name", {"arthur", "zqx"}}, {"occupation", {"zqx", "writer"}}}, {}};
  const auto table = parse_table(r, v);
  const auto s = make_union_support(table, v.word_count());
  EXPECT_EQ(s.size(), v.word_count() + 1);
  EXPECT_EQ(s.slot_of_position, (std::vector<std::size_t>{v.word_id("arthur"), v.word_count(), v.word_count(),
                                                          v.word_id("writer")}));
}

TEST(OutputDistribution, EqualScoresAreUniform) {
  auto v = small_vocab();
  RawRecord r{{{"name", {"arthur", "zqx"}}}, {}};
  const auto table = parse_table(r, v);
  std::vector<double> s(v.word_count(), 0.0);
  auto d = output_distribution(s, {{"arthur", 0.0}, {"zqx", 0.0}}, table);
  ASSERT_EQ(d.probs.size(), v.word_count() + 1);
  for (double p : d.probs) EXPECT_NEAR(p, 1.0 / 10.0, 1e-15);
  EXPECT_GT(*d.prob_of_oov("zqx"), 0.0);
}

TEST(OutputDistribution, HandSoftmaxWithCopyScores) {
  auto v = small_vocab();
  RawRecord r{{{"name", {"arthur"}}}, {}};
  const auto table = parse_table(r, v);
  std::vector<double> s(v.word_count(), 0.0);
  s[v.word_id("was")] = 1.0;
  auto d = output_distribution(s, {{"arthur", std::log(3.0)}}, table);
  const double z = 7.0 + std::exp(1.0) + 3.0;
  EXPECT_NEAR(d.prob_of_word(v.word_id("arthur")), 3.0 / z, 1e-12);
  EXPECT_NEAR(d.prob_of_word(v.word_id("was")), std::exp(1.0) / z, 1e-12);
  double total = 0;
  for (double p : d.probs) total += p;
  EXPECT_NEAR(total, 1.0, 1e-12);

  auto plain = output_distribution(s, {{"arthur", 5.0}}, table, false);
  Tape t;
  auto ref = stable_softmax(t.constant(Tensor::from(s)));
  EXPECT_EQ(plain.probs, to_vector(ref));
}

TEST(Greedy, ArgmaxTieBreaking) {
  const std::vector<double> v{1.0, 3.0, 3.0, 2.0};
  EXPECT_EQ(argmax_lowest(v), 1u);
}

TEST(Greedy, RiggedEosStopsAtFirstStep) {
  auto v = small_vocab();
  auto m = model_for(v, false);
  m.out_Ws.value.fill(0.0);
  m.out_bs.value.fill(0.0);
  m.out_bs.value[Vocabularies::kEos] = 10.0;
  auto trace = greedy_decode(doyle_table(v), m, v, 20, m.config);
  EXPECT_TRUE(trace.tokens.empty());
  EXPECT_EQ(trace.steps.size(), 1u);
  EXPECT_TRUE(trace.ended_with_eos);
}

TEST(Greedy, MaxLenCapWithEosSuppressed) {
  auto v = small_vocab();
  auto m = model_for(v);
  m.out_bs.value[Vocabularies::kEos] = -100.0;
  auto trace = greedy_decode(doyle_table(v), m, v, 5, m.config);
  EXPECT_EQ(trace.tokens.size(), 5u);
  EXPECT_FALSE(trace.ended_with_eos);
  EXPECT_THROW(greedy_decode(doyle_table(v), m, v, 0, m.config), InvalidInput);
}

TEST(Greedy, CopiesOovTokensAsRawStrings) {
  auto v = small_vocab();
  auto m = model_for(v);
  RawRecord r{{{"name", {"zqx"}}}, {}};
  const auto table = parse_table(r, v);
  m.out_Ws.value.fill(0.0);
  m.out_bs.value.fill(-50.0);
  m.copy_Wc.value.fill(0.0);
  m.out_bs.value[Vocabularies::kEos] = -49.0;
  // copy score is 0.5 * sum(h'), push it up by making the decoder output large and positive
  m.decoder.b_g.value.fill(20.0);
  m.decoder.b_x.value.fill(20.0);
  auto trace = greedy_decode(table, m, v, 3, m.config);
  ASSERT_FALSE(trace.steps.empty());
  EXPECT_EQ(trace.steps[0].token, "zqx");
  EXPECT_TRUE(trace.steps[0].copied);
  EXPECT_EQ(trace.steps[0].copy_positions, (std::vector<std::size_t>{0}));
}

TEST(Greedy, DeterministicTraceAndJsonRoundTrip) {
  auto v = small_vocab();
  auto m = model_for(v);
  const auto table = doyle_table(v);
  auto a = greedy_decode(table, m, v, 8, m.config);
  auto b = greedy_decode(table, m, v, 8, m.config);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  EXPECT_EQ(GenerationTrace::from_json(a.to_json()), a);
  ASSERT_FALSE(a.steps.empty());
  EXPECT_EQ(a.positions.front(), (std::pair<std::string, std::string>{"name", "arthur"}));
  for (const auto& s : a.steps) {
    EXPECT_EQ(s.attention.alpha_hybrid.size(), table.size());
    ASSERT_TRUE(s.attention.z.has_value());
    EXPECT_DOUBLE_EQ(s.attention.z_tilde, 0.2 * *s.attention.z + 0.5);
  }
}

TEST(Decoder, EndToEndStepGradients) {
  auto v = small_vocab();
  auto m = model_for(v, true, AttentionMode::hybrid, 11);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (double& x : m.link.value.data()) x = g(rng);
  const auto table = doyle_table(v);
  auto f = [&](Tape& t) {
    DecodingContext ctx(t, m, m.config, table);
    auto s1 = ctx.step(Vocabularies::kBos);
    auto s2 = ctx.step(v.word_id("arthur"));
    return add(neg_log_softmax(s1.scores, v.word_id("arthur")), neg_log_softmax(s2.scores, v.word_id("writer")));
  };
  std::vector<Parameter*> ps;
  for (Parameter* p : m.all()) ps.push_back(p);
  GradCheckOptions opt;
  opt.stencil = Stencil::central5;
  opt.step = 1e-3;
  const auto r = grad_check(f, ps, opt);
  for (const auto& e : r.per_param) EXPECT_LT(e.max_rel_error, 1e-4) << e.name;
}
