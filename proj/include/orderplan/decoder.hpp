#pragma once

// Decoder LSTM with hybrid-attention context, the copy mechanism, the output
// distribution over vocabulary plus table tokens, and greedy inference.

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "orderplan/data.hpp"
#include "orderplan/dispatcher.hpp"
#include "orderplan/encoder.hpp"
#include "orderplan/model.hpp"
#include "orderplan/tensor.hpp"

namespace orderplan {

// a_t = sum_i alpha_i h_i
inline Var attention_vector(Var alpha, Var H) {
  if (alpha.value().size() != H.value().rows())
    throw DimensionError("attention_vector: " + alpha.value().shape_string() + " weights for " +
                         H.value().shape_string() + " states");
  return vecmat(alpha, H);
}

struct DecoderVars {
  Var W_d, b_d;
  LstmVars lstm;
  Var W_s, b_s;

  DecoderVars(Tape& t, ModelParams& p)
      : W_d(t.param(p.dec_Wd)), b_d(t.param(p.dec_bd)), lstm(t, p.decoder), W_s(t.param(p.out_Ws)),
        b_s(t.param(p.out_bs)) {}
};

struct DecoderStepOutput {
  Var h;
  Var cell;
  Var s_lstm;  // [|V|], unnormalized
};

// x_t = tanh(W_d [a_t; y_prev] + b_d); (h_t, cell_t) = LSTM(x_t, h_prev, cell_prev);
// s_lstm = W_s h_t + b_s.
inline DecoderStepOutput decoder_step(Var a_t, Var y_prev, Var h_prev, Var cell_prev, const DecoderVars& w) {
  Var x = tanh(add(matvec(w.W_d, concat({a_t, y_prev})), w.b_d));
  auto state = lstm_cell(x, h_prev, cell_prev, w.lstm);
  return {state.h, state.cell, add(matvec(w.W_s, state.h), w.b_s)};
}

// Per-position copy features that do not depend on the decoding step:
// sigmoid(H W_c) for the elementwise form, H W_c for the scalar form.
inline Var copy_features(Var H, Var W_c, CopyScoreForm form) {
  Var proj = matmul(H, W_c);
  return form == CopyScoreForm::elementwise ? sigmoid(proj) : proj;
}

// s_{t,i} for every position i.
inline Var copy_position_scores(Var features, Var h_dec, CopyScoreForm form) {
  Var s = matvec(features, h_dec);
  return form == CopyScoreForm::elementwise ? s : sigmoid(s);
}

// Outcome space of one example: vocabulary ids [0, V) followed by the
// table's out-of-vocabulary raw tokens.
struct UnionSupport {
  std::size_t vocab_size = 0;
  std::vector<std::string> oov_tokens;
  std::vector<std::size_t> slot_of_position;
  std::unordered_map<std::string, std::size_t> oov_slot;

  std::size_t size() const { return vocab_size + oov_tokens.size(); }
};

inline UnionSupport make_union_support(const InfoboxTable& table, std::size_t vocab_size) {
  UnionSupport s;
  s.vocab_size = vocab_size;
  for (const auto& p : table.positions) {
    if (p.word_id != Vocabularies::kUnk) {
      if (p.word_id >= vocab_size) throw IndexError("table word id outside the vocabulary");
      s.slot_of_position.push_back(p.word_id);
      continue;
    }
    auto [it, inserted] = s.oov_slot.try_emplace(p.raw_token, vocab_size + s.oov_tokens.size());
    if (inserted) s.oov_tokens.push_back(p.raw_token);
    s.slot_of_position.push_back(it->second);
  }
  return s;
}

// s_t(w) = s_lstm(w) + s_copy(w) over V u C. Without copying the support is V.
inline Var union_scores(Var s_lstm, std::optional<Var> position_scores, const UnionSupport& support) {
  if (!position_scores) return s_lstm;
  return scatter_add(s_lstm, *position_scores, support.slot_of_position, support.size());
}

// Copy score per distinct raw table token: the sum of its position scores.
inline std::map<std::string, double> copy_scores(const Tensor& H, const Tensor& h_dec, const InfoboxTable& table,
                                                 const Tensor& W_c,
                                                 CopyScoreForm form = CopyScoreForm::elementwise) {
  Tape tape(false);
  Var f = copy_features(tape.constant(H), tape.constant(W_c), form);
  Var s = copy_position_scores(f, tape.constant(h_dec), form);
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < table.size(); ++i) out[table.positions[i].raw_token] += s.value()[i];
  return out;
}

struct OutputDistribution {
  std::vector<double> probs;
  std::vector<double> scores;
  UnionSupport support;

  double prob_of_word(std::size_t id) const { return probs.at(id); }
  std::optional<double> prob_of_oov(const std::string& tok) const {
    auto it = support.oov_slot.find(tok);
    if (it == support.oov_slot.end() || it->second >= probs.size()) return std::nullopt;
    return probs[it->second];
  }
};

// softmax over V u C of s_lstm plus the per-token copy scores; copy == false
// gives plain softmax(s_lstm).
inline OutputDistribution output_distribution(std::span<const double> s_lstm,
                                              const std::map<std::string, double>& s_copy,
                                              const InfoboxTable& table, bool copy = true) {
  OutputDistribution d;
  d.support = make_union_support(table, s_lstm.size());
  d.scores.assign(s_lstm.begin(), s_lstm.end());
  if (copy) {
    d.scores.resize(d.support.size(), 0.0);
    for (const auto& [tok, score] : s_copy)
      for (std::size_t i = 0; i < table.size(); ++i)
        if (table.positions[i].raw_token == tok) {
          d.scores[d.support.slot_of_position[i]] += score;
          break;
        }
  }
  Tape tape(false);
  Var p = stable_softmax(tape.constant(Tensor::from(d.scores)));
  d.probs = to_vector(p);
  return d;
}

// Runs the encoder once and then the dispatcher and decoder step by step for
// one table. Used by teacher-forced training and greedy decoding.
class DecodingContext {
 public:
  struct Step {
    Var scores;  // over the union support (or V without copying)
    AttentionState attention;
  };

  DecodingContext(Tape& tape, ModelParams& params, const ModelConfig& modes, const InfoboxTable& table,
                  bool record_attention = false)
      : tape_(tape), params_(params), modes_(modes), record_(record_attention),
        enc_(encode_table(tape, table, params)), dec_(tape, params),
        support_(make_union_support(table, params.config.word_vocab)) {
    const std::size_t c = table.size();
    const std::size_t dh = params.config.hidden_dim;
    alpha_prev_ = tape.constant(Tensor::vector(c, 1.0 / static_cast<double>(c)));
    h_ = tape.constant(Tensor::vector(dh));
    cell_ = tape.constant(Tensor::vector(dh));
    const bool need_content = modes.uses_content() || record_;
    const bool need_link = modes.uses_link() || record_;
    if (need_content) {
      Wf_ = tape.param(params.content_Wf);
      bf_ = tape.param(params.content_bf);
      Wc_ = tape.param(params.content_Wc);
      bc_ = tape.param(params.content_bc);
    }
    if (need_link) block_ = link_block(tape.param(params.link), enc_.field_ids);
    if (modes.uses_gate() || (record_ && modes.gate == GateMode::adaptive)) gate_w_ = tape.param(params.gate_w);
    if (modes.copy) copy_features_ = copy_features(enc_.H, tape.param(params.copy_Wc), modes.copy_form);
  }

  const UnionSupport& support() const { return support_; }
  const EncodedTable& encoded() const { return enc_; }

  Step step(std::size_t prev_word_id) {
    Var y_prev = embedding_lookup(tape_, params_.word_embedding, prev_word_id);
    std::optional<Var> a_content, a_link, z, z_tilde, a_hybrid;
    const bool want_content = modes_.uses_content() || record_;
    const bool want_link = modes_.uses_link() || record_;
    if (want_content) a_content = content_attention(y_prev, enc_, *Wf_, *bf_, *Wc_, *bc_);
    if (want_link) a_link = link_attention_from_block(alpha_prev_, *block_);
    if (want_content && want_link) {
      if (modes_.gate == GateMode::fixed) {
        z_tilde = tape_.constant(Tensor::scalar(modes_.fixed_gate));
      } else {
        auto g = adaptive_gate(h_, weighted_field_embedding(*a_link, enc_), y_prev, *gate_w_);
        z = g.z;
        z_tilde = g.z_tilde;
      }
      a_hybrid = hybrid_attention(*a_content, *a_link, *z_tilde);
    }

    Var alpha = modes_.attention == AttentionMode::content ? *a_content
                : modes_.attention == AttentionMode::link  ? *a_link
                                                           : *a_hybrid;
    alpha_prev_ = alpha;
    auto out = decoder_step(attention_vector(alpha, enc_.H), y_prev, h_, cell_, dec_);
    h_ = out.h;
    cell_ = out.cell;

    std::optional<Var> pos_scores;
    if (modes_.copy) pos_scores = copy_position_scores(*copy_features_, out.h, modes_.copy_form);

    Step s{union_scores(out.s_lstm, pos_scores, support_), {}};
    if (record_) {
      s.attention.alpha_content = to_vector(*a_content);
      s.attention.alpha_link = to_vector(*a_link);
      s.attention.alpha_hybrid = to_vector(*a_hybrid);
      if (z) s.attention.z = z->value().item();
      s.attention.z_tilde = z_tilde->value().item();
    }
    return s;
  }

 private:
  Tape& tape_;
  ModelParams& params_;
  ModelConfig modes_;
  bool record_;
  EncodedTable enc_;
  DecoderVars dec_;
  UnionSupport support_;
  Var alpha_prev_, h_, cell_;
  std::optional<Var> Wf_, bf_, Wc_, bc_, block_, gate_w_, copy_features_;
};

struct GenerationTrace {
  struct StepRecord {
    std::string token;  // surface form; "<eos>" on the final step when generation ended there
    bool copied = false;
    std::vector<std::size_t> copy_positions;  // table positions holding a copied token
    AttentionState attention;
  };

  std::vector<std::string> tokens;  // emitted tokens, EOS excluded
  std::vector<StepRecord> steps;
  bool ended_with_eos = false;
  // <field : content word> labels of the table positions.
  std::vector<std::pair<std::string, std::string>> positions;

  bool operator==(const GenerationTrace& o) const { return to_json() == o.to_json(); }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["tokens"] = tokens;
    j["ended_with_eos"] = ended_with_eos;
    nlohmann::ordered_json pos = nlohmann::ordered_json::array();
    for (const auto& [f, w] : positions) pos.push_back({{"field", f}, {"word", w}});
    j["positions"] = pos;
    nlohmann::ordered_json steps_j = nlohmann::ordered_json::array();
    for (const auto& s : steps) {
      nlohmann::ordered_json sj;
      sj["token"] = s.token;
      sj["source"] = s.copied ? "copy" : "vocab";
      sj["copy_positions"] = s.copy_positions;
      sj["alpha_content"] = s.attention.alpha_content;
      sj["alpha_link"] = s.attention.alpha_link;
      sj["alpha_hybrid"] = s.attention.alpha_hybrid;
      sj["z"] = s.attention.z ? nlohmann::ordered_json(*s.attention.z) : nlohmann::ordered_json(nullptr);
      sj["z_tilde"] = s.attention.z_tilde;
      steps_j.push_back(std::move(sj));
    }
    j["steps"] = steps_j;
    return j;
  }

  static GenerationTrace from_json(const nlohmann::ordered_json& j) {
    GenerationTrace t;
    t.tokens = j.at("tokens").get<std::vector<std::string>>();
    t.ended_with_eos = j.at("ended_with_eos").get<bool>();
    for (const auto& p : j.at("positions")) t.positions.emplace_back(p.at("field"), p.at("word"));
    for (const auto& sj : j.at("steps")) {
      StepRecord s;
      s.token = sj.at("token");
      s.copied = sj.at("source") == "copy";
      s.copy_positions = sj.at("copy_positions").get<std::vector<std::size_t>>();
      s.attention.alpha_content = sj.at("alpha_content").get<std::vector<double>>();
      s.attention.alpha_link = sj.at("alpha_link").get<std::vector<double>>();
      s.attention.alpha_hybrid = sj.at("alpha_hybrid").get<std::vector<double>>();
      if (!sj.at("z").is_null()) s.attention.z = sj.at("z").get<double>();
      s.attention.z_tilde = sj.at("z_tilde").get<double>();
      t.steps.push_back(std::move(s));
    }
    return t;
  }
};

// Index of the largest entry; ties go to the lowest index, which puts
// vocabulary ids ahead of copy-only tokens.
inline std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

// Greedy search: y_t = argmax p_t(w) until EOS or max_len emitted tokens.
// `modes` supplies the attention, gate and copy settings to decode with.
inline GenerationTrace greedy_decode(const InfoboxTable& table, ModelParams& params, const Vocabularies& vocab,
                                     std::size_t max_len, const ModelConfig& modes,
                                     bool record_attention = true) {
  if (max_len < 1) throw InvalidInput("greedy_decode: max_len must be >= 1");
  Tape tape(false);
  DecodingContext ctx(tape, params, modes, table, record_attention);
  GenerationTrace trace;
  for (const auto& p : table.positions) trace.positions.emplace_back(vocab.field(p.field_id), p.raw_token);

  std::size_t prev = Vocabularies::kBos;
  while (trace.tokens.size() < max_len) {
    auto step = ctx.step(prev);
    const std::size_t best = argmax_lowest(step.scores.value().data());
    GenerationTrace::StepRecord rec;
    rec.attention = std::move(step.attention);
    const auto& support = ctx.support();
    if (best < support.vocab_size) {
      rec.token = vocab.word(best);
      prev = best;
    } else {
      rec.token = support.oov_tokens[best - support.vocab_size];
      rec.copied = true;
      prev = Vocabularies::kUnk;
    }
    if (rec.copied)
      for (std::size_t i = 0; i < table.size(); ++i)
        if (table.positions[i].raw_token == rec.token) rec.copy_positions.push_back(i);
    const bool eos = !rec.copied && best == Vocabularies::kEos;
    trace.steps.push_back(std::move(rec));
    if (eos) {
      trace.ended_with_eos = true;
      break;
    }
    trace.tokens.push_back(trace.steps.back().token);
  }
  return trace;
}

}  // namespace orderplan
