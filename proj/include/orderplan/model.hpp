#pragma once

// Model configuration and the full set of learnable parameters.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "orderplan/errors.hpp"
#include "orderplan/tensor.hpp"

namespace orderplan {

enum class AttentionMode { content, link, hybrid };
enum class GateMode { adaptive, fixed };
// elementwise: sigmoid(h_i^T W_c) . h'   scalar: sigmoid((h_i^T W_c) . h')
enum class CopyScoreForm { elementwise, scalar };

inline std::string to_string(AttentionMode m) {
  switch (m) {
    case AttentionMode::content: return "content";
    case AttentionMode::link: return "link";
    case AttentionMode::hybrid: return "hybrid";
  }
  return "?";
}

inline AttentionMode attention_mode_from_string(const std::string& s) {
  if (s == "content") return AttentionMode::content;
  if (s == "link") return AttentionMode::link;
  if (s == "hybrid") return AttentionMode::hybrid;
  throw ConfigError("unknown attention mode '" + s + "' (expected content, link or hybrid)");
}

inline std::string to_string(GateMode m) { return m == GateMode::adaptive ? "adaptive" : "fixed"; }
inline GateMode gate_mode_from_string(const std::string& s) {
  if (s == "adaptive") return GateMode::adaptive;
  if (s == "fixed") return GateMode::fixed;
  throw ConfigError("unknown gate mode '" + s + "' (expected adaptive or fixed)");
}

inline std::string to_string(CopyScoreForm f) { return f == CopyScoreForm::elementwise ? "elementwise" : "scalar"; }
inline CopyScoreForm copy_score_form_from_string(const std::string& s) {
  if (s == "elementwise") return CopyScoreForm::elementwise;
  if (s == "scalar") return CopyScoreForm::scalar;
  throw ConfigError("unknown copy score form '" + s + "'");
}

struct ModelConfig {
  std::size_t word_vocab = 0;
  std::size_t field_vocab = 0;
  std::size_t field_dim = 32;
  std::size_t word_dim = 32;
  std::size_t hidden_dim = 64;
  AttentionMode attention = AttentionMode::hybrid;
  bool copy = true;
  GateMode gate = GateMode::adaptive;
  double fixed_gate = 0.6;  // z~ used when gate == fixed; any value in [0, 1]
  CopyScoreForm copy_form = CopyScoreForm::elementwise;
  double init_scale = 0.08;
  std::uint64_t seed = 1;

  bool uses_content() const {
    return attention == AttentionMode::content || attention == AttentionMode::hybrid;
  }
  bool uses_link() const { return attention == AttentionMode::link || attention == AttentionMode::hybrid; }
  bool uses_gate() const { return attention == AttentionMode::hybrid && gate == GateMode::adaptive; }

  void validate() const {
    if (word_vocab < 4) throw ConfigError("word vocabulary must hold the 4 reserved tokens");
    if (field_vocab < 1) throw ConfigError("field vocabulary is empty");
    if (field_dim == 0 || word_dim == 0 || hidden_dim == 0) throw ConfigError("dimensions must be positive");
    if (gate == GateMode::fixed && (fixed_gate < 0.0 || fixed_gate > 1.0))
      throw ConfigError("fixed gate must lie in [0, 1]");
  }

  nlohmann::ordered_json to_json() const {
    return {{"word_vocab", word_vocab},   {"field_vocab", field_vocab},         {"field_dim", field_dim},
            {"word_dim", word_dim},       {"hidden_dim", hidden_dim},           {"attention", to_string(attention)},
            {"copy", copy},               {"gate", to_string(gate)},            {"fixed_gate", fixed_gate},
            {"copy_form", to_string(copy_form)}, {"init_scale", init_scale},   {"seed", seed}};
  }
  static ModelConfig from_json(const nlohmann::ordered_json& j) {
    ModelConfig c;
    c.word_vocab = j.at("word_vocab").get<std::size_t>();
    c.field_vocab = j.at("field_vocab").get<std::size_t>();
    c.field_dim = j.value("field_dim", c.field_dim);
    c.word_dim = j.value("word_dim", c.word_dim);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.attention = attention_mode_from_string(j.value("attention", std::string("hybrid")));
    c.copy = j.value("copy", c.copy);
    c.gate = gate_mode_from_string(j.value("gate", std::string("adaptive")));
    c.fixed_gate = j.value("fixed_gate", c.fixed_gate);
    c.copy_form = copy_score_form_from_string(j.value("copy_form", std::string("elementwise")));
    c.init_scale = j.value("init_scale", c.init_scale);
    c.seed = j.value("seed", c.seed);
    return c;
  }
};

// Weights of one LSTM layer. Gate rows are stacked [input; forget; output].
struct LstmParams {
  Parameter W_g, U_g, b_g, W_x, U_x, b_x;

  LstmParams() = default;
  LstmParams(const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim)
      : W_g(prefix + ".W_g", Tensor::matrix(3 * hidden_dim, input_dim)),
        U_g(prefix + ".U_g", Tensor::matrix(3 * hidden_dim, hidden_dim)),
        b_g(prefix + ".b_g", Tensor::vector(3 * hidden_dim)),
        W_x(prefix + ".W_x", Tensor::matrix(hidden_dim, input_dim)),
        U_x(prefix + ".U_x", Tensor::matrix(hidden_dim, hidden_dim)),
        b_x(prefix + ".b_x", Tensor::vector(hidden_dim)) {}

  std::size_t hidden_dim() const { return U_x.value.rows(); }
  std::size_t input_dim() const { return W_x.value.cols(); }
};

struct ModelParams {
  ModelConfig config;

  Parameter field_embedding;  // [n_f x d_f]
  Parameter word_embedding;   // [V x d_w], shared by table content and generated words
  LstmParams encoder;
  // content attention
  Parameter content_Wf, content_bf, content_Wc, content_bc;
  // link matrix [n_f x n_f]: link[a][b] scores field b following field a
  Parameter link;
  Parameter gate_w;  // [d_h + d_f + d_w]
  // decoder
  Parameter dec_Wd, dec_bd;  // input mix: [d_w x (d_h + d_w)]
  LstmParams decoder;
  Parameter out_Ws, out_bs;  // [V x d_h]
  Parameter copy_Wc;         // [d_h x d_h]

  ModelParams() = default;
  explicit ModelParams(const ModelConfig& cfg) : config(cfg) {
    cfg.validate();
    const std::size_t df = cfg.field_dim, dw = cfg.word_dim, dh = cfg.hidden_dim;
    field_embedding = {"field_embedding", Tensor::matrix(cfg.field_vocab, df)};
    word_embedding = {"word_embedding", Tensor::matrix(cfg.word_vocab, dw)};
    encoder = LstmParams("encoder", df + dw, dh);
    content_Wf = {"content.W_f", Tensor::matrix(df, dw)};
    content_bf = {"content.b_f", Tensor::vector(df)};
    content_Wc = {"content.W_c", Tensor::matrix(dh, dw)};
    content_bc = {"content.b_c", Tensor::vector(dh)};
    link = {"link", Tensor::matrix(cfg.field_vocab, cfg.field_vocab)};
    gate_w = {"gate.w", Tensor::vector(dh + df + dw)};
    dec_Wd = {"decoder.W_d", Tensor::matrix(dw, dh + dw)};
    dec_bd = {"decoder.b_d", Tensor::vector(dw)};
    decoder = LstmParams("decoder", dw, dh);
    out_Ws = {"output.W_s", Tensor::matrix(cfg.word_vocab, dh)};
    out_bs = {"output.b_s", Tensor::vector(cfg.word_vocab)};
    copy_Wc = {"copy.W_c", Tensor::matrix(dh, dh)};
    initialize(cfg.seed);
  }

  ModelParams(const ModelParams& o) : config(o.config) { copy_from(o); }
  ModelParams& operator=(const ModelParams& o) {
    if (this != &o) {
      config = o.config;
      copy_from(o);
    }
    return *this;
  }

  // Weights uniform in +-init_scale, biases 0 except forget gates at 1, link
  // matrix 0.
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-config.init_scale, config.init_scale);
    for (Parameter* p : all()) {
      if (p == &link || is_bias(*p)) {
        p->value.fill(0.0);
      } else {
        for (double& v : p->value.data()) v = u(rng);
      }
      p->zero_grad();
    }
    for (LstmParams* l : {&encoder, &decoder}) {
      const std::size_t h = l->hidden_dim();
      for (std::size_t i = h; i < 2 * h; ++i) l->b_g.value[i] = 1.0;
    }
  }

  std::vector<Parameter*> all() {
    return {&field_embedding, &word_embedding, &encoder.W_g, &encoder.U_g, &encoder.b_g, &encoder.W_x,
            &encoder.U_x,     &encoder.b_x,    &content_Wf,  &content_bf,  &content_Wc,  &content_bc,
            &link,            &gate_w,         &dec_Wd,      &dec_bd,      &decoder.W_g, &decoder.U_g,
            &decoder.b_g,     &decoder.W_x,    &decoder.U_x, &decoder.b_x, &out_Ws,      &out_bs,
            &copy_Wc};
  }
  std::vector<const Parameter*> all() const {
    std::vector<const Parameter*> out;
    for (Parameter* p : const_cast<ModelParams*>(this)->all()) out.push_back(p);
    return out;
  }

  Parameter& by_name(const std::string& name) {
    for (Parameter* p : all())
      if (p->name == name) return *p;
    throw IndexError("no parameter named '" + name + "'");
  }

  static bool is_bias(const Parameter& p) {
    const auto dot = p.name.rfind('.');
    const std::string leaf = dot == std::string::npos ? p.name : p.name.substr(dot + 1);
    return leaf.rfind("b_", 0) == 0;
  }
  static bool is_embedding(const Parameter& p) { return p.name == "field_embedding" || p.name == "word_embedding"; }

  // Parameters that take part in the forward pass under the configured modes.
  bool is_enabled(const Parameter& p) const {
    if (&p == &content_Wf || &p == &content_bf || &p == &content_Wc || &p == &content_bc)
      return config.uses_content();
    if (&p == &link) return config.uses_link();
    if (&p == &gate_w) return config.uses_gate();
    if (&p == &copy_Wc) return config.copy;
    return true;
  }

  // Weight matrices of enabled components, the targets of the l2 penalty.
  std::vector<Parameter*> penalized() {
    std::vector<Parameter*> out;
    for (Parameter* p : all())
      if (is_enabled(*p) && !is_bias(*p) && !is_embedding(*p)) out.push_back(p);
    return out;
  }

  void zero_grad() {
    for (Parameter* p : all()) p->zero_grad();
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Parameter* p : all()) n += p->value.size();
    return n;
  }

 private:
  void copy_from(const ModelParams& o) {
    auto dst = all();
    auto src = o.all();
    for (std::size_t i = 0; i < dst.size(); ++i) *dst[i] = *src[i];
  }
};

}  // namespace orderplan
