#pragma once

// Desk-scale experiment harness: synthetic corpus presets, the six-cell
// attention/copy ablation, the fixed-gate sweep, and diagnostics of the
// learned link matrix against the generating transition rules.

#include <algorithm>
#include <cstdio>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <tuple>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "orderplan/data.hpp"
#include "orderplan/dispatcher.hpp"
#include "orderplan/metrics.hpp"
#include "orderplan/trainer.hpp"

namespace orderplan {

// ---------------------------------------------------------------------------
// Corpus presets

// Six fields mentioned in a fixed chain order. Every value is a single
// in-vocabulary word. The two dates share one pool and the two places share
// another, so the previous word alone does not identify the previous field.
// Table order is shuffled and targets carry no separators.
inline CorpusSpec order_corpus_spec(std::uint64_t seed = 1, std::size_t size = 2000) {
  const std::string months = "jan feb mar apr may jun jul aug";
  const std::string cities = "oslo rome lima kiev baku doha riga suva";
  const std::vector<std::tuple<std::string, std::string, double>> pools = {
      {"name", "ann bob cyd dee eli fay gus hal", 0.7},
      {"birth_date", months, 0.7},
      {"birth_place", cities, 0.7},
      {"death_date", months, 1.0},
      {"death_place", cities, 0.7},
      {"spouse", "ida joy kim liv mae nan ora pia", 1.0}};
  CorpusSpec spec;
  for (const auto& [name, words, presence] : pools) {
    SyntheticField f;
    f.name = name;
    f.generator.tokens = split_whitespace(words);
    f.presence = presence;
    spec.fields.push_back(f);
  }
  for (std::size_t i = 0; i + 1 < spec.fields.size(); ++i)
    spec.transitions.emplace_back(spec.fields[i].name, spec.fields[i + 1].name);
  spec.separator = "";
  spec.size = size;
  spec.seed = seed;
  return spec;
}

// Name-like fields filled with generated out-of-vocabulary tokens next to
// ordinary in-vocabulary fields.
inline CorpusSpec copy_corpus_spec(std::uint64_t seed = 1, std::size_t size = 2000) {
  CorpusSpec spec;
  auto pool = [](std::string name, std::string words, std::vector<std::string> prefix) {
    SyntheticField f;
    f.name = std::move(name);
    f.generator.tokens = split_whitespace(words);
    f.prefix = std::move(prefix);
    return f;
  };
  auto oov = [](std::string name, std::size_t max_words, std::vector<std::string> prefix, double presence) {
    SyntheticField f;
    f.name = std::move(name);
    f.generator.kind = ValueGenerator::Kind::oov_name;
    f.generator.min_words = 1;
    f.generator.max_words = max_words;
    f.prefix = std::move(prefix);
    f.presence = presence;
    return f;
  };
  spec.fields.push_back(oov("name", 2, {}, 1.0));
  spec.fields.push_back(pool("occupation", "poet chef monk pilot judge nurse baker miner", {"is", "a"}));
  spec.fields.push_back(oov("birth_place", 1, {"born", "in"}, 0.8));
  spec.fields.push_back(oov("spouse", 2, {"married", "to"}, 0.6));
  spec.transitions = {{"name", "occupation"}, {"occupation", "birth_place"}, {"birth_place", "spouse"}};
  spec.size = size;
  spec.seed = seed;
  return spec;
}

struct PreparedCorpus {
  Vocabularies vocab;
  std::vector<RawRecord> train_raw, valid_raw, test_raw;
  std::vector<Example> train, valid, test;
  TransitionTable truth;
};

// Vocabulary from the training split, capped at the regular-token inventory
// (generated names stay out of vocabulary).
inline PreparedCorpus prepare_synthetic(const CorpusSpec& spec, std::size_t max_target_len = 40) {
  SyntheticCorpus c = generate_synthetic_corpus(spec);
  PreparedCorpus p;
  p.vocab = build_vocabularies(c.train, Vocabularies::kReservedWords + spec.regular_token_count(), 1);
  p.train_raw = std::move(c.train);
  p.valid_raw = std::move(c.valid);
  p.test_raw = std::move(c.test);
  p.train = make_examples(p.train_raw, p.vocab, max_target_len);
  p.valid = make_examples(p.valid_raw, p.vocab, max_target_len);
  p.test = make_examples(p.test_raw, p.vocab, max_target_len);
  p.truth = std::move(c.truth);
  return p;
}

// ---------------------------------------------------------------------------
// Single runs

struct RunResult {
  std::string label;
  std::string config_hash;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  double best_val_bleu = 0.0;
  double final_val_loss = 0.0;
  EvalReport test;
  double copy_accuracy = 0.0;
  std::size_t epochs = 0;
  double seconds = 0.0;
  std::vector<Sentence> hypotheses;
  std::optional<ModelParams> best;
};

// Mean sequence NLL (no penalty) over a split.
inline double mean_loss(std::span<const Example> examples, ModelParams& params) {
  double total = 0.0;
  for (const auto& ex : examples) {
    Tape tape(false);
    total += sequence_loss(tape, ex, params, 0.0).value().item();
  }
  return examples.empty() ? 0.0 : total / static_cast<double>(examples.size());
}

// Fraction of out-of-vocabulary reference tokens reproduced in the matching
// hypothesis (clipped multiset counts).
inline double copy_accuracy(std::span<const Sentence> hyps, std::span<const Sentence> refs, const Vocabularies& vocab) {
  detail::check_corpus(hyps, refs);
  std::size_t total = 0, hit = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    std::map<std::string, std::size_t> want, have;
    for (const auto& t : refs[i])
      if (!vocab.has_word(t)) ++want[t];
    for (const auto& t : hyps[i]) ++have[t];
    for (const auto& [t, n] : want) {
      total += n;
      auto it = have.find(t);
      if (it != have.end()) hit += std::min(n, it->second);
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

inline EvalReport evaluate_lenient(std::span<const Sentence> hyps, std::span<const Sentence> refs) {
  EvalReport r;
  r.bleu4 = bleu4(hyps, refs);
  try {
    r.rouge4 = rouge4(hyps, refs);
  } catch (const InvalidInput&) {
    r.rouge4 = std::numeric_limits<double>::quiet_NaN();
  }
  r.nist4 = nist4(hyps, refs);
  return r;
}

// Trains one configuration and scores its best-validation parameters on the
// test split. Divergence marks the run failed instead of throwing.
inline RunResult run_cell(const PreparedCorpus& corpus, const TrainConfig& cfg, std::string label,
                          const std::string& archive_dir = {}) {
  RunResult r;
  r.label = std::move(label);
  r.seed = cfg.seed;
  TrainConfig c = cfg;
  c.model.word_vocab = corpus.vocab.word_count();
  c.model.field_vocab = corpus.vocab.field_count();
  c.model.seed = c.seed;
  c.checkpoint_path = archive_dir.empty() ? std::string{} : archive_dir + "/" + r.label + ".ckpt";
  r.config_hash = config_hash(c.trajectory_json());
  const auto t0 = std::chrono::steady_clock::now();
  try {
    auto result = train(corpus.train, corpus.valid, corpus.vocab, c);
    r.epochs = result.log.size();
    r.best_val_bleu = result.best_bleu;
    r.final_val_loss = mean_loss(corpus.valid, result.last);
    r.hypotheses = decode_all(corpus.test, result.best, corpus.vocab, c.max_decode_len);
    const auto refs = references(corpus.test);
    r.test = evaluate_lenient(r.hypotheses, refs);
    r.copy_accuracy = copy_accuracy(r.hypotheses, refs, corpus.vocab);
    r.best = std::move(result.best);
  } catch (const NumericalError& e) {
    r.failed = true;
    r.error = e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline nlohmann::ordered_json to_json(const RunResult& r, bool with_timing = false) {
  nlohmann::ordered_json j{{"label", r.label}, {"config_hash", r.config_hash}, {"seed", r.seed},
                           {"failed", r.failed}};
  if (r.failed) {
    j["error"] = r.error;
    return j;
  }
  j["epochs"] = r.epochs;
  j["best_val_bleu"] = r.best_val_bleu;
  j["final_val_loss"] = r.final_val_loss;
  j["test_bleu4"] = r.test.bleu4;
  if (std::isnan(r.test.rouge4))
    j["test_rouge4"] = nullptr;
  else
    j["test_rouge4"] = r.test.rouge4;
  j["test_nist4"] = r.test.nist4;
  j["copy_accuracy"] = r.copy_accuracy;
  if (with_timing) j["seconds"] = r.seconds;
  return j;
}

// ---------------------------------------------------------------------------
// Ablation grid

struct AblationCell {
  AttentionMode attention = AttentionMode::hybrid;
  bool copy = true;
  RunResult result;
};

struct AblationGrid {
  std::vector<AblationCell> cells;  // attention-major, copy on before off

  const AblationCell& cell(AttentionMode a, bool copy) const {
    for (const auto& c : cells)
      if (c.attention == a && c.copy == copy) return c;
    throw InvalidInput("ablation grid has no cell " + to_string(a) + (copy ? "+copy" : ""));
  }
};

inline std::string cell_label(AttentionMode a, bool copy) { return to_string(a) + (copy ? "_copy" : "_nocopy"); }

inline AblationGrid run_ablation(const PreparedCorpus& corpus, const TrainConfig& base,
                                 const std::string& archive_dir = {}) {
  AblationGrid grid;
  for (AttentionMode a : {AttentionMode::content, AttentionMode::link, AttentionMode::hybrid})
    for (bool copy : {true, false}) {
      TrainConfig c = base;
      c.model.attention = a;
      c.model.copy = copy;
      c.model.gate = GateMode::adaptive;
      grid.cells.push_back({a, copy, run_cell(corpus, c, cell_label(a, copy), archive_dir)});
    }
  return grid;
}

inline nlohmann::ordered_json to_json(const AblationGrid& g) {
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& c : g.cells) {
    auto j = to_json(c.result);
    j["attention"] = to_string(c.attention);
    j["copy"] = c.copy;
    cells.push_back(std::move(j));
  }
  return {{"cells", cells}};
}

inline std::string format_number(double v, int precision = 2) {
  if (std::isnan(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

// Rows like "Copy+Hybrid att.  BLEU  ROUGE  NIST", scores in points.
inline std::string format_ablation_table(const AblationGrid& g) {
  auto row_name = [](AttentionMode a, bool copy) {
    std::string n = a == AttentionMode::content ? "Content att." : a == AttentionMode::link ? "Link att." : "Hybrid att.";
    return copy ? "Copy+" + n : n;
  };
  std::ostringstream os;
  os << pad("Component", 20) << pad("BLEU", 9) << pad("ROUGE", 9) << "NIST\n";
  for (bool copy : {false, true})
    for (AttentionMode a : {AttentionMode::content, AttentionMode::link, AttentionMode::hybrid}) {
      const auto& c = g.cell(a, copy);
      os << pad(row_name(a, copy), 20);
      if (c.result.failed) {
        os << "failed: " << c.result.error << '\n';
        continue;
      }
      os << pad(format_number(100 * c.result.test.bleu4), 9) << pad(format_number(100 * c.result.test.rouge4), 9)
         << format_number(c.result.test.nist4) << '\n';
    }
  return os.str();
}

// ---------------------------------------------------------------------------
// Gate sweep

struct GateSweep {
  std::vector<std::pair<double, RunResult>> fixed;
  RunResult adaptive;

  // Highest test BLEU among fixed runs; ties go to the smaller z.
  std::optional<double> best_fixed_z() const {
    std::optional<double> z;
    double best = -1.0;
    for (const auto& [v, r] : fixed)
      if (!r.failed && r.test.bleu4 > best) {
        best = r.test.bleu4;
        z = v;
      }
    return z;
  }
  double best_fixed_bleu() const {
    double best = 0.0;
    for (const auto& [v, r] : fixed)
      if (!r.failed) best = std::max(best, r.test.bleu4);
    return best;
  }
};

inline std::vector<double> sweep_values() {
  std::vector<double> v;
  for (int i = 0; i <= 10; ++i) v.push_back(i / 10.0);
  return v;
}

inline GateSweep run_gate_sweep(const PreparedCorpus& corpus, const TrainConfig& base,
                                const std::string& archive_dir = {}) {
  GateSweep s;
  for (double z : sweep_values()) {
    TrainConfig c = base;
    c.model.attention = AttentionMode::hybrid;
    c.model.gate = GateMode::fixed;
    c.model.fixed_gate = z;
    s.fixed.emplace_back(z, run_cell(corpus, c, "fixed_" + format_number(z, 1), archive_dir));
  }
  TrainConfig c = base;
  c.model.attention = AttentionMode::hybrid;
  c.model.gate = GateMode::adaptive;
  s.adaptive = run_cell(corpus, c, "adaptive", archive_dir);
  return s;
}

inline nlohmann::ordered_json to_json(const GateSweep& s) {
  nlohmann::ordered_json fixed = nlohmann::ordered_json::array();
  for (const auto& [z, r] : s.fixed) {
    auto j = to_json(r);
    j["z_tilde"] = z;
    fixed.push_back(std::move(j));
  }
  nlohmann::ordered_json j{{"fixed", fixed}, {"adaptive", to_json(s.adaptive)}};
  if (auto z = s.best_fixed_z()) j["best_fixed_z"] = *z;
  else j["best_fixed_z"] = nullptr;
  return j;
}

// Two columns, z~ and BLEU in points; the adaptive run is the last row.
inline std::string format_sweep_table(const GateSweep& s) {
  std::ostringstream os;
  os << pad("z", 10) << "BLEU\n";
  for (const auto& [z, r] : s.fixed)
    os << pad(format_number(z, 1), 10) << (r.failed ? "failed" : format_number(100 * r.test.bleu4)) << '\n';
  os << pad("adaptive", 10) << (s.adaptive.failed ? "failed" : format_number(100 * s.adaptive.test.bleu4)) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Link-matrix diagnostics

struct TransitionCheck {
  std::string from, to;
  double score = 0.0;        // L[from, to]
  double best_other = 0.0;   // max L[from, k] over competitors
  std::string best_other_field;
  double credit = 0.0;       // 1 if strictly above every competitor, 1/(ties+1) on ties, else 0
  std::size_t competitors = 0;
};

struct LinkDiagnostics {
  double fraction = 0.0;
  double chance = 0.0;
  std::vector<TransitionCheck> checks;
  // Every co-occurring (from, to) pair ranked by L[from, to], descending.
  std::vector<std::tuple<std::string, std::string, double>> ranked;
};

// For each rule A->B: competitors are the fields present in the corpus other
// than A and B. A rule is satisfied when L[A,B] is above every competitor's
// L[A,k]; tied maxima earn the probability of winning a random tie-break.
inline LinkDiagnostics link_matrix_diagnostics(const Tensor& link, const TransitionTable& truth,
                                               const Vocabularies& vocab, std::span<const InfoboxTable> tables) {
  std::set<std::size_t> present;
  for (const auto& t : tables)
    for (const auto& p : t.positions) present.insert(p.field_id);
  LinkDiagnostics d;
  double total = 0.0;
  for (const auto& [from, to] : truth.successor) {
    if (!vocab.has_field(from) || !vocab.has_field(to)) continue;
    const std::size_t a = vocab.field_id(from), b = vocab.field_id(to);
    TransitionCheck c{from, to, link.at(a, b), -std::numeric_limits<double>::infinity(), "", 0.0, 0};
    std::size_t ties = 0;
    bool beaten = false;
    for (std::size_t k : present) {
      if (k == a || k == b) continue;
      ++c.competitors;
      const double v = link.at(a, k);
      if (v > c.best_other) {
        c.best_other = v;
        c.best_other_field = vocab.field(k);
      }
      if (v > c.score) beaten = true;
      else if (v == c.score) ++ties;
    }
    c.credit = beaten ? 0.0 : 1.0 / static_cast<double>(ties + 1);
    if (c.competitors == 0) c.best_other = 0.0;
    d.fraction += c.credit;
    d.chance += 1.0 / static_cast<double>(c.competitors + 1);
    total += 1.0;
    d.checks.push_back(std::move(c));
  }
  if (total > 0) {
    d.fraction /= total;
    d.chance /= total;
  }
  for (const auto& [a, b] : effective_link_entries(tables))
    if (a != b) d.ranked.emplace_back(vocab.field(a), vocab.field(b), link.at(a, b));
  std::stable_sort(d.ranked.begin(), d.ranked.end(),
                   [](const auto& x, const auto& y) { return std::get<2>(x) > std::get<2>(y); });
  return d;
}

inline nlohmann::ordered_json to_json(const LinkDiagnostics& d) {
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& c : d.checks)
    checks.push_back({{"from", c.from}, {"to", c.to}, {"score", c.score}, {"best_other", c.best_other},
                      {"best_other_field", c.best_other_field}, {"credit", c.credit}});
  nlohmann::ordered_json ranked = nlohmann::ordered_json::array();
  for (const auto& [a, b, v] : d.ranked) ranked.push_back({a, b, v});
  return {{"fraction", d.fraction}, {"chance", d.chance}, {"checks", checks}, {"ranked", ranked}};
}

// ---------------------------------------------------------------------------
// Attention invariants on random models

struct InvariantReport {
  std::size_t cases = 0;
  std::size_t steps = 0;
  std::size_t failures = 0;
  std::vector<std::string> messages;  // first few failures
  double max_sum_error = 0.0;
  double min_z_tilde = 1.0, max_z_tilde = 0.0;
};

// Each case draws a small model, a table with repeated fields and a token
// sequence, then checks every decoding step: the three attentions are
// distributions, link attention is constant within a field, the adaptive
// gate stays in (0.5, 0.7), and fixed gates 0 and 1 reproduce the link-only
// and content-only runs bit for bit.
inline InvariantReport check_attention_invariants(std::size_t cases, std::uint64_t seed) {
  InvariantReport rep;
  std::mt19937_64 rng(seed);
  auto uni = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  auto fail = [&](const std::string& m) {
    ++rep.failures;
    if (rep.messages.size() < 10) rep.messages.push_back("case " + std::to_string(rep.cases) + ": " + m);
  };
  for (std::size_t n = 0; n < cases; ++n, ++rep.cases) {
    ModelConfig cfg;
    cfg.word_vocab = uni(6, 12);
    cfg.field_vocab = uni(2, 6);
    cfg.field_dim = uni(1, 5);
    cfg.word_dim = uni(1, 5);
    cfg.hidden_dim = uni(1, 6);
    cfg.copy = uni(0, 1) == 1;
    cfg.init_scale = std::uniform_real_distribution<double>(0.05, 3.0)(rng);
    cfg.seed = rng();
    ModelParams params(cfg);
    std::normal_distribution<double> g(0.0, 2.0);
    for (double& v : params.link.value.data()) v = g(rng);

    InfoboxTable table;
    const std::size_t c = uni(1, 8);
    for (std::size_t i = 0; i < c; ++i) {
      const std::size_t w = uni(Vocabularies::kUnk, cfg.word_vocab - 1);
      table.positions.push_back({uni(0, cfg.field_vocab - 1), w, "t" + std::to_string(uni(0, 4))});
    }
    std::vector<std::size_t> inputs{Vocabularies::kBos};
    for (std::size_t t = uni(0, 5); t > 0; --t) inputs.push_back(uni(Vocabularies::kEos, cfg.word_vocab - 1));

    auto run = [&](AttentionMode a, GateMode gm, double z) {
      ModelConfig modes = cfg;
      modes.attention = a;
      modes.gate = gm;
      modes.fixed_gate = z;
      Tape tape(false);
      DecodingContext ctx(tape, params, modes, table, true);
      std::vector<std::pair<Tensor, AttentionState>> out;
      for (std::size_t id : inputs) {
        auto st = ctx.step(id);
        out.emplace_back(st.scores.value(), std::move(st.attention));
      }
      return out;
    };

    const auto adaptive = run(AttentionMode::hybrid, GateMode::adaptive, 0.0);
    for (const auto& [scores, a] : adaptive) {
      ++rep.steps;
      for (const auto* dist : {&a.alpha_content, &a.alpha_link, &a.alpha_hybrid}) {
        double total = 0.0;
        for (double v : *dist) {
          if (!(v >= 0.0)) fail("negative or NaN attention weight");
          total += v;
        }
        rep.max_sum_error = std::max(rep.max_sum_error, std::abs(total - 1.0));
        if (std::abs(total - 1.0) > 1e-9) fail("attention sums to " + std::to_string(total));
      }
      for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = i + 1; j < c; ++j)
          if (table.positions[i].field_id == table.positions[j].field_id && a.alpha_link[i] != a.alpha_link[j])
            fail("link attention differs within a field");
      rep.min_z_tilde = std::min(rep.min_z_tilde, a.z_tilde);
      rep.max_z_tilde = std::max(rep.max_z_tilde, a.z_tilde);
      if (!(a.z_tilde > 0.5 && a.z_tilde < 0.7)) fail("z_tilde " + std::to_string(a.z_tilde) + " outside (0.5, 0.7)");
    }

    for (auto [z, pure] : {std::pair{0.0, AttentionMode::link}, std::pair{1.0, AttentionMode::content}}) {
      const auto fixed = run(AttentionMode::hybrid, GateMode::fixed, z);
      const auto reference = run(pure, GateMode::adaptive, 0.0);
      for (std::size_t t = 0; t < fixed.size(); ++t) {
        const auto& a = fixed[t].second;
        const auto& want = z == 0.0 ? a.alpha_link : a.alpha_content;
        if (a.alpha_hybrid != want) fail("fixed gate " + format_number(z, 0) + " does not reduce to the pure attention");
        if (!(fixed[t].first == reference[t].first))
          fail("fixed gate " + format_number(z, 0) + " output differs from the " + to_string(pure) + "-only model");
      }
    }
  }
  return rep;
}

inline std::vector<InfoboxTable> tables_of(std::span<const Example> examples) {
  std::vector<InfoboxTable> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.table);
  return out;
}

// Median of an odd or even sample (mean of the middle pair).
inline double median(std::vector<double> v) {
  if (v.empty()) throw InvalidInput("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace orderplan
