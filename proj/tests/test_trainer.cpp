#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "orderplan/experiment.hpp"
#include "orderplan/trainer.hpp"

using namespace orderplan;

namespace {

TrainConfig tiny_config(std::size_t epochs = 2) {
  TrainConfig c;
  c.model.field_dim = 4;
  c.model.word_dim = 4;
  c.model.hidden_dim = 6;
  c.batch_size = 8;
  c.learning_rate = 5e-3;
  c.epochs = epochs;
  c.seed = 7;
  c.max_decode_len = 20;
  return c;
}

const PreparedCorpus& tiny_corpus() {
  static const PreparedCorpus c = prepare_synthetic(copy_corpus_spec(4, 60));
  return c;
}

std::string temp(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("orderplan_trainer_" + name)).string();
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ModelConfig sized(ModelConfig m, const Vocabularies& v) {
  m.word_vocab = v.word_count();
  m.field_vocab = v.field_count();
  return m;
}

}  // namespace

TEST(Loss, UniformModelGivesTLogN) {
  const auto inst = make_grad_check_instance(5, 4);
  ModelConfig cfg = sized(tiny_config().model, inst.vocab);
  cfg.copy = false;
  ModelParams p(cfg);
  p.out_Ws.value.fill(0.0);
  p.out_bs.value.fill(0.0);
  Tape t;
  const double loss = sequence_loss(t, inst.example, p, 0.0).value().item();
  const double T = static_cast<double>(inst.example.target.size());
  EXPECT_NEAR(loss, T * std::log(static_cast<double>(cfg.word_vocab)), 1e-12);
}

TEST(Loss, ConfidentModelGivesZero) {
  Vocabularies v;
  v.add_word("a");
  v.add_field("f");
  RawRecord r{{{"f", {"a"}}}, {}};
  const auto ex = make_example(r, v);  // target is just EOS
  ModelConfig cfg = sized(tiny_config().model, v);
  cfg.copy = false;
  ModelParams p(cfg);
  p.out_Ws.value.fill(0.0);
  p.out_bs.value.fill(-1e4);
  p.out_bs.value[Vocabularies::kEos] = 0.0;
  Tape t;
  EXPECT_EQ(sequence_loss(t, ex, p, 0.0).value().item(), 0.0);
}

TEST(Loss, GoldOovMatchesCopySlotOrUnk) {
  const auto inst = make_grad_check_instance();
  const auto support = make_union_support(inst.example.table, inst.vocab.word_count());
  // target position 0 is "zzoov", present in the table
  EXPECT_EQ(gold_index(inst.example, 0, support, true), support.oov_slot.at("zzoov"));
  EXPECT_EQ(gold_index(inst.example, 0, support, false), Vocabularies::kUnk);
  Example ex = inst.example;
  ex.target_tokens[0] = "elsewhere";
  EXPECT_EQ(gold_index(ex, 0, support, true), Vocabularies::kUnk);
  ex.target[0] = 999;
  EXPECT_THROW(gold_index(ex, 0, support, true), CorpusError);
  ex.target.back() = 4;
  ModelParams p(sized(tiny_config().model, inst.vocab));
  Tape t;
  EXPECT_THROW(sequence_loss(t, ex, p, 0.0), CorpusError);
}

TEST(Loss, L2GradientIsTwiceCoefficientTimesWeights) {
  const auto inst = make_grad_check_instance();
  ModelParams p(sized(tiny_config().model, inst.vocab));
  p.zero_grad();
  Tape t;
  t.backward(*l2_penalty(t, p, 0.25));
  for (Parameter* q : p.penalized())
    for (std::size_t i = 0; i < q->value.size(); ++i) EXPECT_DOUBLE_EQ(q->gradient[i], 0.5 * q->value[i]);
  EXPECT_EQ(p.word_embedding.gradient, Tensor::zeros_like(p.word_embedding.value));
  EXPECT_EQ(p.decoder.b_g.gradient, Tensor::zeros_like(p.decoder.b_g.value));
  EXPECT_FALSE(l2_penalty(t, p, 0.0).has_value());
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Parameter a("a", Tensor::from({1.0, -2.0}));
  std::vector<Parameter*> ps{&a};
  auto st = OptimizerState::for_params(ps);
  adam_update(ps, st, TrainConfig{});
  EXPECT_EQ(a.value, Tensor::from({1.0, -2.0}));
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter a("a", Tensor::from({1.0, -2.0, 0.5}));
  a.gradient = Tensor::from({3.0, -0.01, 1e3});
  std::vector<Parameter*> ps{&a};
  auto st = OptimizerState::for_params(ps);
  TrainConfig c;
  c.learning_rate = 0.1;
  adam_update(ps, st, c);
  EXPECT_NEAR(a.value[0], 0.9, 1e-6);
  EXPECT_NEAR(a.value[1], -1.9, 1e-5);
  EXPECT_NEAR(a.value[2], 0.4, 1e-6);
}

TEST(Adam, ClosedFormSecondStep) {
  Parameter a("a", Tensor::from({0.0}));
  std::vector<Parameter*> ps{&a};
  auto st = OptimizerState::for_params(ps);
  TrainConfig c;
  c.learning_rate = 1.0;
  c.adam_epsilon = 0.0;
  a.gradient = Tensor::from({1.0});
  adam_update(ps, st, c);
  a.gradient = Tensor::from({2.0});
  adam_update(ps, st, c);
  const double m = 0.9 * 0.1 + 0.1 * 2.0, v = 0.999 * 0.001 + 0.001 * 4.0;
  const double step2 = (m / (1 - 0.81)) / std::sqrt(v / (1 - 0.999 * 0.999));
  EXPECT_NEAR(a.value[0], -1.0 - step2, 1e-12);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  Parameter a("decoder.W_d", Tensor::from({1.0}));
  a.gradient = Tensor::from({std::nan("")});
  std::vector<Parameter*> ps{&a};
  auto st = OptimizerState::for_params(ps);
  try {
    adam_update(ps, st, TrainConfig{});
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("decoder.W_d"), std::string::npos);
  }
}

TEST(Adam, DeterministicTenSteps) {
  auto run = [] {
    const auto inst = make_grad_check_instance();
    ModelParams p(sized(tiny_config().model, inst.vocab));
    auto ps = p.all();
    auto st = OptimizerState::for_params(ps);
    for (int i = 0; i < 10; ++i) {
      p.zero_grad();
      Tape t;
      t.backward(sequence_loss(t, inst.example, p, 1e-5));
      adam_update(ps, st, tiny_config());
    }
    return p;
  };
  auto a = run(), b = run();
  for (std::size_t i = 0; i < a.all().size(); ++i) EXPECT_EQ(a.all()[i]->value, b.all()[i]->value);
}

TEST(Batches, PartitionAndDeterminism) {
  const auto& c = tiny_corpus();
  const auto b1 = make_batches(c.train, 8, 3, 0);
  std::vector<std::size_t> seen;
  for (const auto& b : b1) {
    EXPECT_LE(b.size(), 8u);
    seen.insert(seen.end(), b.begin(), b.end());
  }
  std::sort(seen.begin(), seen.end());
  for (std::size_t i = 0; i < seen.size(); ++i) EXPECT_EQ(seen[i], i);
  EXPECT_EQ(seen.size(), c.train.size());
  EXPECT_EQ(make_batches(c.train, 8, 3, 0), b1);
  EXPECT_NE(make_batches(c.train, 8, 3, 1), b1);
}

TEST(Train, OneStepOnOneExampleLowersLoss) {
  const auto& c = tiny_corpus();
  TrainConfig cfg = tiny_config(1);
  cfg.learning_rate = 1e-3;
  cfg.l2_coefficient = 0.0;
  cfg.batch_size = 1;
  std::span<const Example> one(c.train.data(), 1);
  ModelConfig m = sized(cfg.model, c.vocab);
  m.seed = cfg.seed;
  ModelParams before(m);
  auto r = train(one, one, c.vocab, cfg);
  Tape t1(false), t2(false);
  const double l0 = sequence_loss(t1, c.train[0], before, 0.0).value().item();
  const double l1 = sequence_loss(t2, c.train[0], r.last, 0.0).value().item();
  EXPECT_LT(l1, l0);
}

TEST(Train, NoCopyOnOovTargetsScoresZero) {
  // every target token is a generated name
  CorpusSpec spec;
  SyntheticField f;
  f.name = "name";
  f.generator.kind = ValueGenerator::Kind::oov_name;
  f.generator.min_words = 4;
  f.generator.max_words = 4;
  spec.fields = {f};
  spec.separator = spec.terminator = "";
  spec.size = 40;
  const auto c = prepare_synthetic(spec);
  TrainConfig cfg = tiny_config(1);
  cfg.model.copy = false;
  auto r = train(c.train, c.valid, c.vocab, cfg);
  EXPECT_EQ(r.best_bleu, 0.0);
}

TEST(Train, ResumeEqualsUninterruptedRun) {
  const auto& c = tiny_corpus();
  TrainConfig full = tiny_config(3);
  auto a = train(c.train, c.valid, c.vocab, full);
  TrainConfig first = full;
  first.epochs = 1;
  auto partial = train(c.train, c.valid, c.vocab, first);
  auto b = train(c.train, c.valid, c.vocab, full, &partial.checkpoint);
  for (std::size_t i = 0; i < a.last.all().size(); ++i) EXPECT_EQ(a.last.all()[i]->value, b.last.all()[i]->value);
  EXPECT_EQ(a.best_bleu, b.best_bleu);
  ASSERT_EQ(b.log.size(), 3u);
  EXPECT_EQ(a.log[2].loss, b.log[2].loss);

  TrainConfig other = full;
  other.learning_rate = 1e-2;
  EXPECT_THROW(train(c.train, c.valid, c.vocab, other, &partial.checkpoint), ConfigError);
}

TEST(Train, LogLinesAndDivergence) {
  const auto& c = tiny_corpus();
  TrainConfig cfg = tiny_config(2);
  cfg.log_path = temp("log.jsonl");
  std::filesystem::remove(cfg.log_path);
  train(c.train, c.valid, c.vocab, cfg);
  std::ifstream in(cfg.log_path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("epoch").get<std::size_t>(), ++n);
    EXPECT_TRUE(j.contains("loss") && j.contains("val_bleu") && j.contains("wallclock"));
  }
  EXPECT_EQ(n, 2u);
  std::filesystem::remove(cfg.log_path);

  TrainConfig bad = tiny_config(1);
  bad.learning_rate = 1e300;
  bad.model.init_scale = 1e150;
  EXPECT_THROW(train(c.train, c.valid, c.vocab, bad), NumericalError);
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  const auto& c = tiny_corpus();
  TrainConfig cfg = tiny_config(2);
  cfg.checkpoint_path = temp("a.ckpt");
  auto r = train(c.train, c.valid, c.vocab, cfg);
  const auto ck = load_checkpoint(cfg.checkpoint_path);
  EXPECT_EQ(ck.epochs_done, 2u);
  EXPECT_EQ(ck.vocab, c.vocab);
  EXPECT_EQ(ck.best_bleu, r.best_bleu);
  EXPECT_EQ(ck.optimizer.step, r.checkpoint.optimizer.step);
  for (std::size_t i = 0; i < r.last.all().size(); ++i) {
    EXPECT_EQ(ck.params.all()[i]->value, r.last.all()[i]->value);
    EXPECT_EQ(ck.best.all()[i]->value, r.best.all()[i]->value);
    EXPECT_EQ(ck.optimizer.v[i], r.checkpoint.optimizer.v[i]);
  }
  const auto copy = temp("b.ckpt");
  save_checkpoint(copy, ck);
  EXPECT_EQ(file_bytes(copy), file_bytes(cfg.checkpoint_path));
  std::filesystem::remove(copy);
  std::filesystem::remove(cfg.checkpoint_path);
}

TEST(Checkpoint, HashMismatchIsRefused) {
  const auto& c = tiny_corpus();
  TrainConfig cfg = tiny_config(1);
  cfg.checkpoint_path = temp("c.ckpt");
  train(c.train, c.valid, c.vocab, cfg);
  const auto ck = load_checkpoint(cfg.checkpoint_path);
  EXPECT_NO_THROW(require_compatible(ck, ck.config.model));
  ModelConfig wider = ck.config.model;
  wider.hidden_dim = 8;
  EXPECT_THROW(require_compatible(ck, wider), ConfigError);
  ModelConfig other_mode = ck.config.model;
  other_mode.attention = AttentionMode::link;
  EXPECT_THROW(require_compatible(ck, other_mode), ConfigError);
  std::filesystem::remove(cfg.checkpoint_path);

  std::ofstream(temp("junk.ckpt")) << "not a checkpoint";
  EXPECT_THROW(load_checkpoint(temp("junk.ckpt")), CorpusError);
  std::filesystem::remove(temp("junk.ckpt"));
  EXPECT_THROW(load_checkpoint(temp("missing.ckpt")), ConfigError);
}

TEST(Train, RepeatedRunsAreBitIdentical) {
  const auto& c = tiny_corpus();
  TrainConfig cfg = tiny_config(2);
  cfg.checkpoint_path = temp("d1.ckpt");
  train(c.train, c.valid, c.vocab, cfg);
  const auto first = file_bytes(cfg.checkpoint_path);
  cfg.checkpoint_path = temp("d2.ckpt");
  auto r = train(c.train, c.valid, c.vocab, cfg);
  EXPECT_EQ(file_bytes(cfg.checkpoint_path), first);
  const auto t1 = greedy_decode(c.test[0].table, r.best, c.vocab, 20, r.best.config);
  const auto t2 = greedy_decode(c.test[0].table, r.best, c.vocab, 20, r.best.config);
  EXPECT_EQ(t1.to_json().dump(), t2.to_json().dump());
  std::filesystem::remove(temp("d1.ckpt"));
  std::filesystem::remove(temp("d2.ckpt"));
}
