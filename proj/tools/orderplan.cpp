// orderplan: prepare, train, generate, evaluate, ablate, sweep,
// export-attention, grad-check, synth.
//
// Exit codes: 0 ok, 1 other failure, 2 configuration, 3 data, 4 numerical.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "orderplan/data.hpp"
#include "orderplan/experiment.hpp"
#include "orderplan/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace orderplan;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kNumerical = 4 };

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<Sentence> read_sentences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open '" + path + "'");
  std::vector<Sentence> out;
  for (std::string line; std::getline(in, line);) out.push_back(split_whitespace(line));
  return out;
}

// Defaults < config file < flags. The config file is JSON with the sections
// "train" (TrainConfig), "data" and "experiment".
struct RunConfig {
  TrainConfig train;
  std::size_t word_cap = 20000;
  std::size_t min_field_count = 100;
  std::size_t valid_cap = 1000;
  std::uint64_t split_seed = 1;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::string preset = "order";
  std::size_t corpus_size = 2000;

  json to_json() const {
    return {{"train", train.to_json()},
            {"data",
             {{"word_cap", word_cap}, {"min_field_count", min_field_count}, {"valid_cap", valid_cap},
              {"split_seed", split_seed}}},
            {"experiment", {{"seeds", seeds}, {"preset", preset}, {"corpus_size", corpus_size}}}};
  }

  void load(const json& j) {
    if (j.contains("train")) {
      json t = train.to_json();
      t.update(j.at("train"), true);
      train = TrainConfig::from_json(t);
    }
    if (j.contains("data")) {
      const auto& d = j.at("data");
      word_cap = d.value("word_cap", word_cap);
      min_field_count = d.value("min_field_count", min_field_count);
      valid_cap = d.value("valid_cap", valid_cap);
      split_seed = d.value("split_seed", split_seed);
    }
    if (j.contains("experiment")) {
      const auto& e = j.at("experiment");
      seeds = e.value("seeds", seeds);
      preset = e.value("preset", preset);
      corpus_size = e.value("corpus_size", corpus_size);
    }
  }
};

// Flags shared by every subcommand that builds a model.
struct ModelFlags {
  std::optional<std::string> attention, gate, copy_form;
  std::optional<double> fixed_gate, lr, l2;
  std::optional<std::size_t> field_dim, word_dim, hidden_dim, epochs, batch_size, max_decode_len;
  std::optional<std::uint64_t> seed;
  bool copy = false, no_copy = false;

  void add(CLI::App* app) {
    app->add_option("--attention", attention, "content | link | hybrid");
    app->add_option("--gate", gate, "adaptive | fixed");
    app->add_option("--fixed-gate", fixed_gate, "z~ used when --gate fixed");
    app->add_option("--copy-form", copy_form, "elementwise | scalar");
    app->add_flag("--copy", copy, "enable the copy mechanism");
    app->add_flag("--no-copy", no_copy, "disable the copy mechanism");
    app->add_option("--field-dim", field_dim);
    app->add_option("--word-dim", word_dim);
    app->add_option("--hidden-dim", hidden_dim);
    app->add_option("--epochs", epochs);
    app->add_option("--batch-size", batch_size);
    app->add_option("--lr", lr, "Adam learning rate");
    app->add_option("--l2", l2, "l2 penalty coefficient");
    app->add_option("--seed", seed);
    app->add_option("--max-decode-len", max_decode_len);
  }

  bool touches_model() const {
    return attention || gate || copy_form || fixed_gate || field_dim || word_dim || hidden_dim || copy || no_copy;
  }

  void apply(TrainConfig& t) const {
    if (copy && no_copy) throw ConfigError("--copy and --no-copy are mutually exclusive");
    if (attention) t.model.attention = attention_mode_from_string(*attention);
    if (gate) t.model.gate = gate_mode_from_string(*gate);
    if (fixed_gate) t.model.fixed_gate = *fixed_gate;
    if (copy_form) t.model.copy_form = copy_score_form_from_string(*copy_form);
    if (copy) t.model.copy = true;
    if (no_copy) t.model.copy = false;
    if (field_dim) t.model.field_dim = *field_dim;
    if (word_dim) t.model.word_dim = *word_dim;
    if (hidden_dim) t.model.hidden_dim = *hidden_dim;
    if (epochs) t.epochs = *epochs;
    if (batch_size) t.batch_size = *batch_size;
    if (lr) t.learning_rate = *lr;
    if (l2) t.l2_coefficient = *l2;
    if (seed) t.seed = *seed;
    if (max_decode_len) t.max_decode_len = *max_decode_len;
  }
};

std::string default_config_path() {
  if (const char* p = std::getenv("ORDERPLAN_CONFIG")) return p;
  return "configs/default.json";
}

RunConfig load_config(const std::string& path, bool explicit_path) {
  RunConfig rc;
  if (fs::exists(path))
    rc.load(read_json(path));
  else if (explicit_path)
    throw ConfigError("config file '" + path + "' not found");
  return rc;
}

// A prepared data directory: train/valid/test JSONL and vocab.json.
struct DataDir {
  std::vector<RawRecord> train, valid, test;
  Vocabularies vocab;
  std::optional<TransitionTable> truth;
};

void write_data_dir(const std::string& dir, const CorpusSplit& split, const Vocabularies& vocab, const json& header) {
  fs::create_directories(dir);
  write_corpus(dir + "/train.jsonl", split.train);
  write_corpus(dir + "/valid.jsonl", split.valid);
  write_corpus(dir + "/test.jsonl", split.test);
  write_json(dir + "/vocab.json", vocab.to_json());
  write_json(dir + "/prepare.json", header);
}

DataDir read_data_dir(const std::string& dir) {
  DataDir d;
  d.train = read_corpus(dir + "/train.jsonl");
  d.valid = read_corpus(dir + "/valid.jsonl");
  d.test = read_corpus(dir + "/test.jsonl");
  const std::string vocab_path = dir + "/vocab.json";
  if (!fs::exists(vocab_path)) throw CorpusError("missing '" + vocab_path + "'");
  d.vocab = Vocabularies::from_json(read_json(vocab_path));
  if (fs::exists(dir + "/truth.json")) {
    TransitionTable t;
    for (const auto& [a, b] : read_json(dir + "/truth.json").at("successor").items()) t.successor[a] = b;
    d.truth = t;
  }
  return d;
}

PreparedCorpus to_prepared(const DataDir& d, std::size_t max_target_len) {
  PreparedCorpus p;
  p.vocab = d.vocab;
  p.train_raw = d.train;
  p.valid_raw = d.valid;
  p.test_raw = d.test;
  p.train = make_examples(p.train_raw, p.vocab, max_target_len);
  p.valid = make_examples(p.valid_raw, p.vocab, max_target_len);
  p.test = make_examples(p.test_raw, p.vocab, max_target_len);
  if (d.truth) p.truth = *d.truth;
  return p;
}

CorpusSpec preset_spec(const std::string& name, std::uint64_t seed, std::size_t size) {
  if (name == "order") return order_corpus_spec(seed, size);
  if (name == "copy") return copy_corpus_spec(seed, size);
  throw ConfigError("unknown corpus preset '" + name + "' (order | copy)");
}

json truth_json(const TransitionTable& t) {
  json succ = json::object();
  for (const auto& [a, b] : t.successor) succ[a] = b;
  json observed = json::array();
  for (const auto& [k, n] : t.observed) observed.push_back({k.first, k.second, n});
  return {{"successor", succ}, {"observed", observed}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Order-planning table-to-text generation"};
  app.require_subcommand(1);
  std::string config_path = default_config_path();
  bool config_explicit = false;
  app.add_option_function<std::string>(
         "--config", [&](const std::string& p) { config_path = p, config_explicit = true; },
         "JSON run configuration (default configs/default.json or $ORDERPLAN_CONFIG)")
      ->option_text("FILE");

  // prepare ------------------------------------------------------------------
  auto* prepare = app.add_subcommand("prepare", "ingest, normalize, build vocabularies and split a corpus");
  std::string box_path, sent_path, jsonl_path, out_dir;
  std::optional<std::size_t> word_cap, min_field_count, valid_cap;
  std::optional<std::uint64_t> split_seed;
  prepare->add_option("--box", box_path, "WikiBio-style infobox file");
  prepare->add_option("--sentences", sent_path, "sentence file aligned with --box");
  prepare->add_option("--jsonl", jsonl_path, "canonical JSONL corpus instead of --box/--sentences");
  prepare->add_option("--out", out_dir, "output directory")->required();
  prepare->add_option("--word-cap", word_cap, "word vocabulary size including reserved tokens");
  prepare->add_option("--min-field-count", min_field_count);
  prepare->add_option("--valid-cap", valid_cap, "validation subset size, 0 for no cap");
  prepare->add_option("--split-seed", split_seed);

  // synth --------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with known transition rules");
  std::string synth_preset = "order", synth_spec, synth_out;
  std::optional<std::size_t> synth_size;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--preset", synth_preset, "order | copy");
  synth->add_option("--spec", synth_spec, "corpus spec JSON (overrides --preset)");
  synth->add_option("--size", synth_size);
  synth->add_option("--seed", synth_seed);
  synth->add_option("--out", synth_out, "output directory")->required();

  // train --------------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "train a model on a prepared data directory");
  std::string train_data, checkpoint_path, log_path, resume_path;
  ModelFlags train_flags;
  train_cmd->add_option("--data", train_data, "prepared data directory")->required();
  train_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint written after every epoch")->required();
  train_cmd->add_option("--log", log_path, "JSON-lines training log");
  train_cmd->add_option("--resume", resume_path, "continue from this checkpoint");
  train_flags.add(train_cmd);

  // generate -----------------------------------------------------------------
  auto* generate = app.add_subcommand("generate", "greedy generation from tables");
  std::string gen_ckpt, gen_tables, gen_out, gen_traces;
  std::string gen_which = "best";
  ModelFlags gen_flags;
  generate->add_option("--checkpoint", gen_ckpt)->required();
  generate->add_option("--tables", gen_tables, "JSONL records; targets are ignored")->required();
  generate->add_option("--out", gen_out, "one generated sentence per line")->required();
  generate->add_option("--traces", gen_traces, "JSON-lines generation traces");
  generate->add_option("--params", gen_which, "best | last");
  gen_flags.add(generate);

  // evaluate -----------------------------------------------------------------
  auto* evaluate = app.add_subcommand("evaluate", "BLEU-4, ROUGE-4 and NIST-4 of hypothesis vs reference files");
  std::string eval_hyp, eval_ref, eval_json;
  evaluate->add_option("--hyp", eval_hyp, "one tokenized sentence per line")->required();
  evaluate->add_option("--ref", eval_ref, "one tokenized sentence per line")->required();
  evaluate->add_option("--json", eval_json, "also write the report as JSON");

  // ablate / sweep -------------------------------------------------------------
  auto* ablate = app.add_subcommand("ablate", "content/link/hybrid x copy on/off grid");
  auto* sweep = app.add_subcommand("sweep", "fixed-gate sweep z~ = 0.0 .. 1.0 plus the adaptive gate");
  std::string exp_data, exp_out, exp_preset;
  std::optional<std::size_t> exp_size;
  ModelFlags exp_flags;
  for (auto* c : {ablate, sweep}) {
    c->add_option("--data", exp_data, "prepared data directory (default: generate the preset corpus)");
    c->add_option("--preset", exp_preset, "synthetic corpus preset when --data is absent");
    c->add_option("--corpus-size", exp_size);
    c->add_option("--out", exp_out, "report directory")->required();
  }
  exp_flags.add(ablate);
  exp_flags.add(sweep);

  // export-attention -----------------------------------------------------------
  auto* exporter = app.add_subcommand("export-attention", "attention heatmap grid from a generation trace");
  std::string ex_trace, ex_table, ex_out;
  std::size_t ex_index = 0;
  exporter->add_option("--trace", ex_trace, "trace JSONL from generate --traces")->required();
  exporter->add_option("--table", ex_table, "table JSONL given to generate")->required();
  exporter->add_option("--index", ex_index, "0-based record index");
  exporter->add_option("--out", ex_out, "grid JSON")->required();

  // grad-check -----------------------------------------------------------------
  auto* gc = app.add_subcommand("grad-check", "compare tape gradients with finite differences");
  ModelFlags gc_flags;
  std::size_t gc_positions = 5, gc_target = 6;
  double gc_tol = 1e-4, gc_step = 1e-3;
  gc_flags.add(gc);
  gc->add_option("--positions", gc_positions, "table positions C");
  gc->add_option("--target-len", gc_target, "target tokens T");
  gc->add_option("--tolerance", gc_tol);
  gc->add_option("--step", gc_step, "finite-difference step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    RunConfig rc = load_config(config_path, config_explicit);

    if (*prepare) {
      if (word_cap) rc.word_cap = *word_cap;
      if (min_field_count) rc.min_field_count = *min_field_count;
      if (valid_cap) rc.valid_cap = *valid_cap;
      if (split_seed) rc.split_seed = *split_seed;
      std::vector<RawRecord> records;
      if (!jsonl_path.empty())
        records = read_corpus(jsonl_path);
      else if (!box_path.empty() && !sent_path.empty())
        records = ingest_wikibio(box_path, sent_path);
      else
        throw ConfigError("prepare needs --jsonl or both --box and --sentences");
      for (auto& r : records) r = normalize_record(std::move(r));
      auto split = split_corpus(std::move(records), rc.split_seed, rc.valid_cap);
      const auto vocab = build_vocabularies(split.train, rc.word_cap, rc.min_field_count);
      for (const auto* part : {&split.train, &split.valid, &split.test})
        for (const auto& r : *part) parse_table(r, vocab);
      write_data_dir(out_dir, split, vocab, {{"config", rc.to_json()}});
      std::cout << "train " << split.train.size() << " valid " << split.valid.size() << " test "
                << split.test.size() << " words " << vocab.word_count() << " fields " << vocab.field_count()
                << "\n";
      return kOk;
    }

    if (*synth) {
      CorpusSpec spec = synth_spec.empty() ? preset_spec(synth_preset, 1, rc.corpus_size)
                                           : corpus_spec_from_json(read_json(synth_spec));
      if (synth_size) spec.size = *synth_size;
      if (synth_seed) spec.seed = *synth_seed;
      const auto c = generate_synthetic_corpus(spec);
      const auto vocab =
          build_vocabularies(c.train, Vocabularies::kReservedWords + spec.regular_token_count(), 1);
      write_data_dir(synth_out, {c.train, c.valid, c.test}, vocab, {{"spec", corpus_spec_to_json(spec)}});
      write_json(synth_out + "/truth.json", truth_json(c.truth));
      std::cout << "train " << c.train.size() << " valid " << c.valid.size() << " test " << c.test.size()
                << " words " << vocab.word_count() << " fields " << vocab.field_count() << "\n";
      return kOk;
    }

    if (*train_cmd) {
      train_flags.apply(rc.train);
      rc.train.checkpoint_path = checkpoint_path;
      rc.train.log_path = log_path;
      const auto d = read_data_dir(train_data);
      const auto p = to_prepared(d, rc.train.max_target_len);
      std::optional<TrainCheckpoint> resume;
      if (!resume_path.empty()) resume = load_checkpoint(resume_path);
      auto result = train(p.train, p.valid, p.vocab, rc.train, resume ? &*resume : nullptr, [](const EpochLog& e) {
        std::cout << json{{"epoch", e.epoch}, {"loss", e.loss}, {"val_bleu", e.val_bleu}, {"wallclock", e.wallclock}}
                         .dump()
                  << std::endl;
      });
      std::cout << "best validation BLEU " << format_number(100 * result.best_bleu) << "\n";
      return kOk;
    }

    if (*generate) {
      auto ck = load_checkpoint(gen_ckpt);
      if (gen_flags.touches_model()) {
        TrainConfig want = ck.config;
        gen_flags.apply(want);
        require_compatible(ck, want.model);
      }
      if (gen_which != "best" && gen_which != "last") throw ConfigError("--params must be best or last");
      ModelParams& params = gen_which == "best" ? ck.best : ck.params;
      const std::size_t max_len = gen_flags.max_decode_len.value_or(ck.config.max_decode_len);
      const auto records = read_corpus(gen_tables);
      std::ostringstream sentences, traces;
      for (const auto& r : records) {
        const auto table = parse_table(normalize_record(r), ck.vocab);
        const auto trace = greedy_decode(table, params, ck.vocab, max_len, params.config, !gen_traces.empty());
        for (std::size_t i = 0; i < trace.tokens.size(); ++i) sentences << (i ? " " : "") << trace.tokens[i];
        sentences << '\n';
        if (!gen_traces.empty()) traces << trace.to_json().dump() << '\n';
      }
      write_text(gen_out, sentences.str());
      if (!gen_traces.empty()) write_text(gen_traces, traces.str());
      write_json(gen_out + ".meta.json", {{"checkpoint", gen_ckpt},
                                          {"config_hash", config_hash(ck.config.model.to_json())},
                                          {"config", ck.config.to_json()},
                                          {"params", gen_which},
                                          {"max_len", max_len}});
      return kOk;
    }

    if (*evaluate) {
      const auto hyps = read_sentences(eval_hyp);
      const auto refs = read_sentences(eval_ref);
      const auto r = evaluate_lenient(hyps, refs);
      std::cout << "BLEU-4  " << format_number(100 * r.bleu4) << "\n"
                << "ROUGE-4 " << format_number(100 * r.rouge4) << "\n"
                << "NIST-4  " << format_number(r.nist4) << "\n";
      if (!eval_json.empty())
        write_json(eval_json, {{"bleu4", r.bleu4},
                               {"rouge4", std::isnan(r.rouge4) ? json(nullptr) : json(r.rouge4)},
                               {"nist4", r.nist4},
                               {"hypotheses", eval_hyp},
                               {"references", eval_ref}});
      return kOk;
    }

    if (*ablate || *sweep) {
      exp_flags.apply(rc.train);
      if (!exp_preset.empty()) rc.preset = exp_preset;
      if (exp_size) rc.corpus_size = *exp_size;
      std::optional<PreparedCorpus> fixed_corpus;
      if (!exp_data.empty()) fixed_corpus = to_prepared(read_data_dir(exp_data), rc.train.max_target_len);
      fs::create_directories(exp_out);
      json runs = json::array();
      std::string tables;
      const std::vector<std::uint64_t> seeds = exp_flags.seed ? std::vector<std::uint64_t>{*exp_flags.seed} : rc.seeds;
      for (std::uint64_t seed : seeds) {
        const auto corpus = fixed_corpus ? *fixed_corpus : prepare_synthetic(preset_spec(rc.preset, seed, rc.corpus_size),
                                                                              rc.train.max_target_len);
        TrainConfig base = rc.train;
        base.seed = seed;
        const std::string archive = exp_out + "/seed" + std::to_string(seed);
        fs::create_directories(archive);
        if (*ablate) {
          const auto grid = run_ablation(corpus, base, archive);
          runs.push_back({{"seed", seed}, {"grid", to_json(grid)}});
          tables += "seed " + std::to_string(seed) + "\n" + format_ablation_table(grid) + "\n";
        } else {
          const auto s = run_gate_sweep(corpus, base, archive);
          runs.push_back({{"seed", seed}, {"sweep", to_json(s)}});
          tables += "seed " + std::to_string(seed) + "\n" + format_sweep_table(s) + "\n";
        }
      }
      const std::string stem = *ablate ? "ablation" : "sweep";
      write_json(exp_out + "/" + stem + ".json", {{"config", rc.to_json()}, {"runs", runs}});
      write_text(exp_out + "/" + stem + ".txt", tables);
      std::cout << tables;
      return kOk;
    }

    if (*exporter) {
      auto line_at = [](const std::string& path, std::size_t index) {
        std::ifstream in(path);
        if (!in) throw CorpusError("cannot open '" + path + "'");
        std::string line;
        for (std::size_t i = 0; i <= index; ++i)
          if (!std::getline(in, line)) throw CorpusError("'" + path + "' has no record " + std::to_string(index));
        return line;
      };
      const auto trace = GenerationTrace::from_json(json::parse(line_at(ex_trace, ex_index)));
      const auto record = normalize_record(parse_json_line(line_at(ex_table, ex_index), ex_index + 1));
      std::vector<std::pair<std::string, std::string>> labels;
      for (const auto& f : record.fields) {
        if (f.tokens.empty() || is_none_value(f)) continue;
        for (const auto& t : f.tokens) labels.emplace_back(f.name, t);
      }
      if (labels.size() != trace.positions.size())
        throw InvalidInput("export-attention: table has " + std::to_string(labels.size()) + " positions, trace has " +
                           std::to_string(trace.positions.size()));
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i].second != trace.positions[i].second)
          throw InvalidInput("export-attention: position " + std::to_string(i) + " differs between table and trace");
      json y = json::array(), x = json::array();
      for (const auto& [f, w] : labels) y.push_back(f + " : " + w);
      for (const auto& s : trace.steps) x.push_back(s.token);
      json layers;
      for (const char* name : {"content", "link", "hybrid"}) {
        json grid = json::array();
        for (std::size_t i = 0; i < labels.size(); ++i) {
          json row = json::array();
          for (const auto& s : trace.steps) {
            const auto& a = std::string(name) == "content" ? s.attention.alpha_content
                            : std::string(name) == "link"  ? s.attention.alpha_link
                                                           : s.attention.alpha_hybrid;
            if (a.size() != labels.size())
              throw InvalidInput(std::string("export-attention: ") + name + " attention of step '" + s.token +
                                 "' has " + std::to_string(a.size()) + " entries");
            row.push_back(a[i]);
          }
          grid.push_back(std::move(row));
        }
        layers[name] = std::move(grid);
      }
      json z = json::array();
      for (const auto& s : trace.steps) z.push_back(s.attention.z_tilde);
      write_json(ex_out, {{"x", x}, {"y", y}, {"z_tilde", z}, {"layers", layers}});
      return kOk;
    }

    if (*gc) {
      TrainConfig t;
      t.model.field_dim = t.model.word_dim = t.model.hidden_dim = 8;
      gc_flags.apply(t);
      const auto inst = make_grad_check_instance(gc_positions, gc_target, 12, 4, t.seed);
      GradCheckOptions opt;
      opt.stencil = Stencil::central5;
      opt.step = gc_step;
      opt.tolerance = gc_tol;
      const auto report = model_grad_check(t.model, inst, 1e-3, opt);
      for (const auto& e : report.per_param)
        std::cout << pad(e.name, 22) << " checked " << pad(std::to_string(e.checked), 6) << " max rel error "
                  << e.max_rel_error << "\n";
      std::cout << (report.passed ? "PASS" : "FAIL") << " max relative error " << report.max_rel_error << "\n";
      return report.passed ? kOk : kNumerical;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const CorpusError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const InvalidInput& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
  return kOk;
}
