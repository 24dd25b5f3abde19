#pragma once

// Teacher-forced sequence NLL with an l2 penalty, Adam, mini-batch training
// with validation-BLEU model selection, checkpoints, and whole-model gradient
// verification.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "orderplan/data.hpp"
#include "orderplan/decoder.hpp"
#include "orderplan/grad_check.hpp"
#include "orderplan/metrics.hpp"
#include "orderplan/model.hpp"
#include "orderplan/tensor.hpp"

namespace orderplan {

struct TrainConfig {
  ModelConfig model;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double l2_coefficient = 1e-5;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  std::size_t max_target_len = 40;
  std::size_t max_decode_len = 60;
  std::string validation_metric = "bleu4";
  std::string checkpoint_path;
  std::string log_path;

  void validate() const {
    model.validate();
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (l2_coefficient < 0) throw ConfigError("l2_coefficient must be >= 0");
    if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
    if (max_decode_len < 1) throw ConfigError("max_decode_len must be >= 1");
    if (validation_metric != "bleu4") throw ConfigError("only bleu4 validation is supported");
  }

  nlohmann::ordered_json to_json() const {
    return {{"model", model.to_json()},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"adam_beta1", adam_beta1},
            {"adam_beta2", adam_beta2},
            {"adam_epsilon", adam_epsilon},
            {"l2_coefficient", l2_coefficient},
            {"epochs", epochs},
            {"seed", seed},
            {"max_target_len", max_target_len},
            {"max_decode_len", max_decode_len},
            {"validation_metric", validation_metric},
            {"checkpoint_path", checkpoint_path},
            {"log_path", log_path}};
  }

  static TrainConfig from_json(const nlohmann::ordered_json& j) {
    TrainConfig c;
    c.model = ModelConfig::from_json(j.at("model"));
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
    c.l2_coefficient = j.value("l2_coefficient", c.l2_coefficient);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.max_target_len = j.value("max_target_len", c.max_target_len);
    c.max_decode_len = j.value("max_decode_len", c.max_decode_len);
    c.validation_metric = j.value("validation_metric", c.validation_metric);
    c.checkpoint_path = j.value("checkpoint_path", c.checkpoint_path);
    c.log_path = j.value("log_path", c.log_path);
    return c;
  }

  // Everything that determines the optimization trajectory; paths and the
  // epoch budget are excluded.
  nlohmann::ordered_json trajectory_json() const {
    auto j = to_json();
    j.erase("epochs");
    j.erase("checkpoint_path");
    j.erase("log_path");
    return j;
  }
};

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

inline std::string config_hash(const nlohmann::ordered_json& j) { return hash_hex(fnv1a(j.dump())); }

// ---------------------------------------------------------------------------
// Loss

// Index of a gold token in the example's outcome space.
inline std::size_t gold_index(const Example& ex, std::size_t t, const UnionSupport& support, bool copy) {
  const std::size_t id = ex.target[t];
  if (id >= support.vocab_size)
    throw CorpusError("target position " + std::to_string(t) + ": word id " + std::to_string(id) +
                      " outside the vocabulary");
  if (id == Vocabularies::kUnk && copy && t < ex.target_tokens.size()) {
    auto it = support.oov_slot.find(ex.target_tokens[t]);
    if (it != support.oov_slot.end()) return it->second;
  }
  return id;
}

// l2 * sum ||W||^2 over the weight matrices of enabled components.
inline std::optional<Var> l2_penalty(Tape& tape, ModelParams& params, double l2) {
  if (l2 <= 0) return std::nullopt;
  std::optional<Var> total;
  for (Parameter* p : params.penalized()) {
    Var s = sum_squares(tape.param(*p));
    total = total ? add(*total, s) : s;
  }
  if (!total) return std::nullopt;
  return scale(*total, l2);
}

// J = -sum_t log p_t(y_t) under teacher forcing, plus the l2 penalty.
inline Var sequence_loss(Tape& tape, const Example& ex, ModelParams& params, double l2_coefficient) {
  if (ex.target.empty() || ex.target.back() != Vocabularies::kEos)
    throw CorpusError("sequence_loss: target must end with EOS");
  DecodingContext ctx(tape, params, params.config, ex.table);
  std::optional<Var> nll;
  std::size_t prev = Vocabularies::kBos;
  for (std::size_t t = 0; t < ex.target.size(); ++t) {
    auto step = ctx.step(prev);
    Var term = neg_log_softmax(step.scores, gold_index(ex, t, ctx.support(), params.config.copy));
    nll = nll ? add(*nll, term) : term;
    prev = ex.target[t];
  }
  if (auto pen = l2_penalty(tape, params, l2_coefficient)) return add(*nll, *pen);
  return *nll;
}

// ---------------------------------------------------------------------------
// Adam

struct OptimizerState {
  std::vector<Tensor> m, v;
  std::uint64_t step = 0;

  static OptimizerState for_params(std::span<Parameter* const> params) {
    OptimizerState s;
    for (Parameter* p : params) {
      s.m.push_back(Tensor::zeros_like(p->value));
      s.v.push_back(Tensor::zeros_like(p->value));
    }
    return s;
  }
};

// m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;  theta <- theta - lr m^ / (sqrt(v^) + eps)
inline void adam_update(std::span<Parameter* const> params, OptimizerState& state, const TrainConfig& cfg) {
  if (state.m.size() != params.size()) throw DimensionError("adam_update: optimizer state does not match parameters");
  for (Parameter* p : params)
    for (double g : p->gradient.data())
      if (!std::isfinite(g)) throw NumericalError("adam_update: non-finite gradient in '" + p->name + "'");
  ++state.step;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    if (!m.same_shape(p.value)) throw DimensionError("adam_update: state shape mismatch for '" + p.name + "'");
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.gradient[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      p.value[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// Batching

// Seeded shuffle, then length-sorted buckets of 8 batches, then a shuffle of
// the resulting batches.
inline std::vector<std::vector<std::size_t>> make_batches(std::span<const Example> examples, std::size_t batch_size,
                                                          std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> idx(examples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t window = batch_size * 8;
  for (std::size_t b = 0; b < idx.size(); b += window) {
    auto first = idx.begin() + static_cast<std::ptrdiff_t>(b);
    auto last = idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), b + window));
    std::stable_sort(first, last, [&](std::size_t x, std::size_t y) {
      return examples[x].target.size() < examples[y].target.size();
    });
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t b = 0; b < idx.size(); b += batch_size)
    batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(b),
                         idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), b + batch_size)));
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

// ---------------------------------------------------------------------------
// Evaluation helpers

inline std::vector<Sentence> decode_all(std::span<const Example> examples, ModelParams& params,
                                        const Vocabularies& vocab, std::size_t max_len) {
  std::vector<Sentence> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(greedy_decode(ex.table, params, vocab, max_len, params.config, false).tokens);
  return out;
}

inline std::vector<Sentence> references(std::span<const Example> examples) {
  std::vector<Sentence> out;
  for (const auto& ex : examples) out.push_back(ex.target_tokens);
  return out;
}

inline double validation_bleu(std::span<const Example> valid, ModelParams& params, const Vocabularies& vocab,
                              std::size_t max_len) {
  const auto hyps = decode_all(valid, params, vocab, max_len);
  const auto refs = references(valid);
  return bleu4(hyps, refs);
}

// ---------------------------------------------------------------------------
// Checkpoints

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double val_bleu = 0.0;
  double wallclock = 0.0;  // seconds; not stored in checkpoints
};

struct TrainCheckpoint {
  TrainConfig config;
  Vocabularies vocab;
  std::size_t epochs_done = 0;
  double best_bleu = -1.0;
  ModelParams params;
  ModelParams best;
  OptimizerState optimizer;
  std::vector<EpochLog> log;
};

namespace detail {

constexpr char kCheckpointMagic[8] = {'O', 'P', 'L', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

inline void put_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }
inline void put_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }
inline void put_str(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline void put_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
  put_str(os, name);
  put_u64(os, static_cast<std::uint64_t>(t.rank()));
  put_u64(os, t.rows());
  put_u64(os, t.rank() == 2 ? t.cols() : 1);
  os.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
}

inline std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw CorpusError("checkpoint truncated");
  return v;
}
inline double get_f64(std::istream& is) {
  double v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw CorpusError("checkpoint truncated");
  return v;
}
inline std::string get_str(std::istream& is) {
  const auto n = get_u64(is);
  if (n > (1ULL << 32)) throw CorpusError("checkpoint string length is implausible");
  std::string s(n, '\0');
  if (!is.read(s.data(), static_cast<std::streamsize>(n))) throw CorpusError("checkpoint truncated");
  return s;
}
inline void get_tensor_into(std::istream& is, const std::string& expected, Tensor& t) {
  const std::string name = get_str(is);
  if (name != expected) throw CorpusError("checkpoint: expected tensor '" + expected + "', found '" + name + "'");
  const auto rank = get_u64(is);
  const auto rows = get_u64(is);
  const auto cols = get_u64(is);
  const bool ok = static_cast<int>(rank) == t.rank() && rows == t.rows() && (rank == 1 ? cols == 1 : cols == t.cols());
  if (!ok) throw ConfigError("checkpoint: tensor '" + name + "' has shape incompatible with the model");
  if (!is.read(reinterpret_cast<char*>(t.data().data()), static_cast<std::streamsize>(t.size() * sizeof(double))))
    throw CorpusError("checkpoint truncated");
}

}  // namespace detail

// Binary container: magic, version, config JSON + hash, vocabulary JSON,
// progress counters, then named tensors (params, best params, Adam moments).
inline void save_checkpoint(const std::string& path, const TrainCheckpoint& ck) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("cannot write checkpoint '" + path + "'");
  os.write(detail::kCheckpointMagic, sizeof detail::kCheckpointMagic);
  detail::put_u64(os, detail::kCheckpointVersion);
  // output paths are not stored
  TrainConfig stored = ck.config;
  stored.checkpoint_path.clear();
  stored.log_path.clear();
  detail::put_str(os, stored.to_json().dump());
  detail::put_str(os, config_hash(ck.config.model.to_json()));
  detail::put_str(os, ck.vocab.to_json().dump());
  detail::put_u64(os, ck.epochs_done);
  detail::put_f64(os, ck.best_bleu);
  detail::put_u64(os, ck.optimizer.step);
  detail::put_u64(os, ck.log.size());
  for (const auto& e : ck.log) {
    detail::put_u64(os, e.epoch);
    detail::put_f64(os, e.loss);
    detail::put_f64(os, e.val_bleu);
  }
  const auto params = ck.params.all();
  const auto best = ck.best.all();
  for (std::size_t i = 0; i < params.size(); ++i) detail::put_tensor(os, "param/" + params[i]->name, params[i]->value);
  for (std::size_t i = 0; i < best.size(); ++i) detail::put_tensor(os, "best/" + best[i]->name, best[i]->value);
  const bool has_opt = ck.optimizer.m.size() == params.size();
  detail::put_u64(os, has_opt ? 1 : 0);
  if (has_opt)
    for (std::size_t i = 0; i < params.size(); ++i) {
      detail::put_tensor(os, "adam_m/" + params[i]->name, ck.optimizer.m[i]);
      detail::put_tensor(os, "adam_v/" + params[i]->name, ck.optimizer.v[i]);
    }
  if (!os) throw ConfigError("failed writing checkpoint '" + path + "'");
}

inline TrainCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open checkpoint '" + path + "'");
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, detail::kCheckpointMagic, sizeof magic) != 0)
    throw CorpusError("'" + path + "' is not a checkpoint file");
  if (detail::get_u64(is) != detail::kCheckpointVersion) throw ConfigError("unsupported checkpoint version");
  TrainCheckpoint ck;
  ck.config = TrainConfig::from_json(nlohmann::ordered_json::parse(detail::get_str(is)));
  const std::string stored_hash = detail::get_str(is);
  if (stored_hash != config_hash(ck.config.model.to_json())) throw ConfigError("checkpoint config hash is inconsistent");
  ck.vocab = Vocabularies::from_json(nlohmann::ordered_json::parse(detail::get_str(is)));
  ck.epochs_done = detail::get_u64(is);
  ck.best_bleu = detail::get_f64(is);
  ck.optimizer.step = detail::get_u64(is);
  const auto n_log = detail::get_u64(is);
  for (std::uint64_t i = 0; i < n_log; ++i) {
    EpochLog e;
    e.epoch = detail::get_u64(is);
    e.loss = detail::get_f64(is);
    e.val_bleu = detail::get_f64(is);
    ck.log.push_back(e);
  }
  ck.params = ModelParams(ck.config.model);
  ck.best = ModelParams(ck.config.model);
  auto params = ck.params.all();
  auto best = ck.best.all();
  for (Parameter* p : params) detail::get_tensor_into(is, "param/" + p->name, p->value);
  for (Parameter* p : best) detail::get_tensor_into(is, "best/" + p->name, p->value);
  if (detail::get_u64(is) == 1) {
    const auto step = ck.optimizer.step;
    ck.optimizer = OptimizerState::for_params(params);
    ck.optimizer.step = step;
    for (std::size_t i = 0; i < params.size(); ++i) {
      detail::get_tensor_into(is, "adam_m/" + params[i]->name, ck.optimizer.m[i]);
      detail::get_tensor_into(is, "adam_v/" + params[i]->name, ck.optimizer.v[i]);
    }
  }
  return ck;
}

// Refuses a checkpoint whose model structure differs from `expected`.
inline void require_compatible(const TrainCheckpoint& ck, const ModelConfig& expected) {
  const auto have = config_hash(ck.config.model.to_json());
  const auto want = config_hash(expected.to_json());
  if (have != want)
    throw ConfigError("checkpoint config hash " + have + " does not match the requested configuration " + want +
                      "; model dimensions or modes differ");
}

// ---------------------------------------------------------------------------
// Training

struct TrainResult {
  ModelParams best;
  ModelParams last;
  double best_bleu = -1.0;
  std::vector<EpochLog> log;
  TrainCheckpoint checkpoint;  // state after the final epoch
};

using EpochCallback = std::function<void(const EpochLog&)>;

inline TrainResult train(std::span<const Example> train_set, std::span<const Example> valid_set,
                         const Vocabularies& vocab, TrainConfig cfg, const TrainCheckpoint* resume = nullptr,
                         const EpochCallback& on_epoch = {}) {
  cfg.model.word_vocab = vocab.word_count();
  cfg.model.field_vocab = vocab.field_count();
  cfg.model.seed = cfg.seed;
  cfg.validate();
  if (train_set.empty() || valid_set.empty()) throw InvalidInput("train: empty training or validation split");

  TrainCheckpoint state;
  if (resume) {
    if (config_hash(resume->config.trajectory_json()) != config_hash(cfg.trajectory_json()))
      throw ConfigError("train: cannot resume, checkpoint was produced by a different configuration");
    if (!(resume->vocab == vocab)) throw ConfigError("train: cannot resume, vocabulary differs");
    state = *resume;
    state.config = cfg;
  } else {
    state.config = cfg;
    state.vocab = vocab;
    state.params = ModelParams(cfg.model);
    state.best = state.params;
  }
  auto params = state.params.all();
  if (state.optimizer.m.size() != params.size()) state.optimizer = OptimizerState::for_params(params);

  std::ofstream log_file;
  if (!cfg.log_path.empty()) log_file.open(cfg.log_path, std::ios::app);

  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t epoch = state.epochs_done; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    const auto batches = make_batches(train_set, cfg.batch_size, cfg.seed, epoch);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      state.params.zero_grad();
      const double inv = 1.0 / static_cast<double>(batches[b].size());
      for (std::size_t idx : batches[b]) {
        Tape tape;
        Var loss = sequence_loss(tape, train_set[idx], state.params, cfg.l2_coefficient);
        const double lv = loss.value().item();
        if (!std::isfinite(lv))
          throw NumericalError("training diverged: loss " + std::to_string(lv) + " at epoch " +
                               std::to_string(epoch + 1) + ", batch " + std::to_string(b) + ", example " +
                               std::to_string(idx));
        loss_sum += lv;
        tape.backward(loss, inv);
      }
      adam_update(params, state.optimizer, cfg);
    }
    EpochLog entry;
    entry.epoch = epoch + 1;
    entry.loss = loss_sum / static_cast<double>(train_set.size());
    entry.val_bleu = validation_bleu(valid_set, state.params, vocab, cfg.max_decode_len);
    entry.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (entry.val_bleu > state.best_bleu) {
      state.best_bleu = entry.val_bleu;
      state.best = state.params;
    }
    state.epochs_done = epoch + 1;
    state.log.push_back(entry);
    if (log_file) {
      nlohmann::ordered_json j{{"epoch", entry.epoch},
                               {"loss", entry.loss},
                               {"val_bleu", entry.val_bleu},
                               {"wallclock", entry.wallclock}};
      log_file << j.dump() << '\n' << std::flush;
    }
    if (!cfg.checkpoint_path.empty()) save_checkpoint(cfg.checkpoint_path, state);
    if (on_epoch) on_epoch(entry);
  }

  TrainResult result;
  result.best = state.best;
  result.last = state.params;
  result.best_bleu = state.best_bleu;
  result.log = state.log;
  result.checkpoint = std::move(state);
  return result;
}

// ---------------------------------------------------------------------------
// Whole-model gradient check

// A tiny random instance: vocabulary of `vocab_words` regular words plus
// `fields` fields, one table with `positions` entries (two of them sharing an
// out-of-vocabulary token) and a target of `target_len` tokens + EOS.
struct GradCheckInstance {
  Vocabularies vocab;
  Example example;
};

inline GradCheckInstance make_grad_check_instance(std::size_t positions = 5, std::size_t target_len = 5,
                                                  std::size_t vocab_words = 12, std::size_t fields = 4,
                                                  std::uint64_t seed = 3) {
  GradCheckInstance g;
  for (std::size_t i = 0; i < vocab_words; ++i) g.vocab.add_word("w" + std::to_string(i));
  for (std::size_t i = 0; i < fields; ++i) g.vocab.add_field("f" + std::to_string(i));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> word(0, vocab_words - 1), field(1, fields);
  RawRecord r;
  for (std::size_t i = 0; i < positions; ++i) {
    std::string tok = i % 3 == 1 ? "zzoov" : "w" + std::to_string(word(rng));
    const std::string fname = "f" + std::to_string(field(rng) - 1);
    if (!r.fields.empty() && r.fields.back().name == fname)
      r.fields.back().tokens.push_back(tok);
    else
      r.fields.push_back({fname, {tok}});
  }
  for (std::size_t t = 0; t < target_len; ++t)
    r.target.push_back(t % 2 == 0 ? "zzoov" : "w" + std::to_string(word(rng)));
  g.example = make_example(r, g.vocab, target_len);
  return g;
}

// Runs grad_check over sequence_loss for every parameter enabled under the
// configured modes, after randomizing all parameters (the link matrix too)
// uniformly in +-scale.
inline GradCheckReport model_grad_check(ModelConfig cfg, const GradCheckInstance& inst, double l2_coefficient,
                                        GradCheckOptions opt = {}, double scale = 0.5) {
  cfg.word_vocab = inst.vocab.word_count();
  cfg.field_vocab = inst.vocab.field_count();
  ModelParams params(cfg);
  std::mt19937_64 rng(cfg.seed + 101);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (Parameter* p : params.all())
    for (double& v : p->value.data()) v = u(rng);
  std::vector<Parameter*> checked;
  for (Parameter* p : params.all())
    if (params.is_enabled(*p)) checked.push_back(p);
  auto f = [&](Tape& tape) { return sequence_loss(tape, inst.example, params, l2_coefficient); };
  return grad_check(f, checked, opt);
}

}  // namespace orderplan
