#include <cmath>
#include <tuple>

#include <gtest/gtest.h>

#include "orderplan/grad_check.hpp"
#include "orderplan/trainer.hpp"

using namespace orderplan;

TEST(GradCheck, ExactOnQuadratic) {
  Parameter x("x", Tensor::from({0.3, -1.2, 2.0}));
  auto f = [&](Tape& t) { return sum_squares(t.param(x)); };
  std::vector<Parameter*> ps{&x};
  const auto r = grad_check(f, ps);
  EXPECT_TRUE(r.passed);
  EXPECT_LT(r.max_rel_error, 1e-8);
  ASSERT_EQ(r.per_param.size(), 1u);
  EXPECT_EQ(r.per_param[0].checked, 3u);
  EXPECT_DOUBLE_EQ(r.per_param[0].max_abs_gradient, 4.0);
}

TEST(GradCheck, DetectsWrongBackward) {
  Parameter x("x", Tensor::from({0.5, 1.5}));
  // constant-folded branch: the tape sees x only through a detached copy
  auto f = [&](Tape& t) {
    Var v = t.param(x);
    Var detached = t.constant(x.value);
    return add(sum(v), sum_squares(detached));
  };
  std::vector<Parameter*> ps{&x};
  const auto r = grad_check(f, ps);
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.max_rel_error, 0.1);
}

TEST(GradCheck, SubsampleAndErrors) {
  Parameter x("x", Tensor::matrix(6, 6, 0.1));
  auto f = [&](Tape& t) { return sum_squares(t.param(x)); };
  std::vector<Parameter*> ps{&x};
  GradCheckOptions opt;
  opt.max_entries_per_param = 5;
  EXPECT_EQ(grad_check(f, ps, opt).per_param[0].checked, 5u);
  opt.step = 0.0;
  EXPECT_THROW(grad_check(f, ps, opt), InvalidInput);
  auto g = [&](Tape& t) { return scale(sum(t.param(x)), std::nan("")); };
  EXPECT_THROW(grad_check(g, ps), NumericalError);
}

TEST(GradCheck, FivePointStencilIsMoreAccurate) {
  Parameter x("x", Tensor::from({0.7}));
  auto f = [&](Tape& t) { return sum(tanh(scale(t.param(x), 3.0))); };
  std::vector<Parameter*> ps{&x};
  GradCheckOptions three, five;
  three.step = five.step = 1e-2;
  five.stencil = Stencil::central5;
  EXPECT_LT(grad_check(f, ps, five).max_rel_error, grad_check(f, ps, three).max_rel_error / 100.0);
}

// Whole model, C = 5 table positions, T = 6 target tokens plus EOS.
class ModelGradients : public ::testing::TestWithParam<std::tuple<AttentionMode, bool, GateMode>> {};

TEST_P(ModelGradients, MatchFiniteDifferences) {
  const auto [attention, copy, gate] = GetParam();
  ModelConfig cfg;
  cfg.field_dim = cfg.word_dim = cfg.hidden_dim = 8;
  cfg.attention = attention;
  cfg.copy = copy;
  cfg.gate = gate;
  cfg.fixed_gate = 0.35;
  cfg.seed = 5;
  const auto inst = make_grad_check_instance(5, 6);
  ASSERT_EQ(inst.example.table.size(), 5u);
  ASSERT_EQ(inst.example.target.size(), 7u);
  GradCheckOptions opt;
  opt.stencil = Stencil::central5;
  opt.step = 1e-3;
  const auto r = model_grad_check(cfg, inst, 1e-3, opt);
  for (const auto& e : r.per_param) EXPECT_LT(e.max_rel_error, 1e-4) << e.name;
  EXPECT_LT(r.max_rel_error, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(
    AllModes, ModelGradients,
    ::testing::Values(std::make_tuple(AttentionMode::content, true, GateMode::adaptive),
                      std::make_tuple(AttentionMode::content, false, GateMode::adaptive),
                      std::make_tuple(AttentionMode::link, true, GateMode::adaptive),
                      std::make_tuple(AttentionMode::link, false, GateMode::adaptive),
                      std::make_tuple(AttentionMode::hybrid, true, GateMode::adaptive),
                      std::make_tuple(AttentionMode::hybrid, false, GateMode::adaptive),
                      std::make_tuple(AttentionMode::hybrid, true, GateMode::fixed),
                      std::make_tuple(AttentionMode::hybrid, false, GateMode::fixed)));

TEST(ModelGradients, DisabledComponentsGetNoGradient) {
  const auto inst = make_grad_check_instance();
  for (AttentionMode a : {AttentionMode::content, AttentionMode::link})
    for (bool copy : {true, false}) {
      ModelConfig cfg;
      cfg.field_dim = cfg.word_dim = cfg.hidden_dim = 4;
      cfg.word_vocab = inst.vocab.word_count();
      cfg.field_vocab = inst.vocab.field_count();
      cfg.attention = a;
      cfg.copy = copy;
      ModelParams p(cfg);
      p.link.value.fill(0.3);
      p.zero_grad();
      Tape t;
      t.backward(sequence_loss(t, inst.example, p, 1e-2));
      for (Parameter* q : p.all()) {
        if (p.is_enabled(*q)) continue;
        for (double g : q->gradient.data()) EXPECT_EQ(g, 0.0) << q->name;
      }
      EXPECT_EQ(p.is_enabled(p.link), a == AttentionMode::link);
      EXPECT_EQ(p.is_enabled(p.copy_Wc), copy);
    }
}

TEST(ModelGradients, LinkMatrixReceivesGradientFromZero) {
  const auto inst = make_grad_check_instance();
  ModelConfig cfg;
  cfg.field_dim = cfg.word_dim = cfg.hidden_dim = 4;
  cfg.word_vocab = inst.vocab.word_count();
  cfg.field_vocab = inst.vocab.field_count();
  cfg.attention = AttentionMode::hybrid;
  ModelParams p(cfg);
  for (double v : p.link.value.data()) EXPECT_EQ(v, 0.0);
  p.zero_grad();
  Tape t;
  t.backward(sequence_loss(t, inst.example, p, 0.0));
  double norm = 0.0;
  for (double g : p.link.gradient.data()) norm += g * g;
  EXPECT_GT(norm, 0.0);
}
