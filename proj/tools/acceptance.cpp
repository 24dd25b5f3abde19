// Acceptance run: one PASS/FAIL line per criterion, details indented above it.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "orderplan/experiment.hpp"
#include "orderplan/trainer.hpp"

using namespace orderplan;

namespace {

constexpr double kRunBudgetSeconds = 600.0;
constexpr double kSweepBudgetSeconds = 7200.0;
const std::vector<std::uint64_t> kSeeds{1, 2, 3};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void detail(const std::string& s) { std::cout << "  " << s << std::endl; }

bool report(int n, const std::string& name, bool ok, const std::string& summary) {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << n << " (" << name << "): " << summary << std::endl;
  return ok;
}

std::string num(double v, int p = 4) { return format_number(v, p); }

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

TrainConfig order_config() {
  TrainConfig c;
  c.model.field_dim = c.model.word_dim = 16;
  c.model.hidden_dim = 32;
  c.model.copy = false;
  c.learning_rate = 5e-3;
  c.batch_size = 32;
  c.epochs = 200;
  return c;
}

bool criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  ModelConfig cfg;
  cfg.field_dim = cfg.word_dim = cfg.hidden_dim = 8;
  cfg.attention = AttentionMode::hybrid;
  cfg.copy = true;
  cfg.gate = GateMode::adaptive;
  const auto inst = make_grad_check_instance(5, 6);
  GradCheckOptions opt;
  opt.stencil = Stencil::central5;
  opt.step = 1e-3;
  opt.tolerance = 1e-4;
  const auto r = model_grad_check(cfg, inst, 1e-3, opt);
  const double secs = seconds_since(t0);
  std::set<std::string> seen;
  for (const auto& e : r.per_param) {
    detail(pad(e.name, 22) + " entries " + pad(std::to_string(e.checked), 6) + " max rel error " + sci(e.max_rel_error));
    seen.insert(e.name);
  }
  const bool groups = seen.count("link") && seen.count("copy.W_c") && seen.count("gate.w");
  const bool ok = r.passed && groups && inst.example.table.size() == 5 && secs < 120.0;
  return report(1, "gradient check", ok,
                "max relative error " + sci(r.max_rel_error) + " (< 1e-4), " + num(secs, 1) + " s");
}

bool criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = check_attention_invariants(1000, 99);
  const double secs = seconds_since(t0);
  for (const auto& m : rep.messages) detail(m);
  detail("steps " + std::to_string(rep.steps) + ", z~ range [" + num(rep.min_z_tilde, 9) + ", " +
         num(rep.max_z_tilde, 9) + "]");
  const bool ok = rep.cases >= 1000 && rep.failures == 0 && rep.max_sum_error <= 1e-9 && secs < 60.0;
  return report(2, "attention invariants", ok,
                std::to_string(rep.cases) + " cases, " + std::to_string(rep.failures) + " failures, max |sum-1| " +
                    sci(rep.max_sum_error) + ", " + num(secs, 1) + " s");
}

bool criterion3() {
  const auto corpus = prepare_synthetic(copy_corpus_spec(1, 2000));
  TrainConfig base;
  base.model.field_dim = base.model.word_dim = 16;
  base.model.hidden_dim = 32;
  base.model.attention = AttentionMode::content;
  base.learning_rate = 3e-3;
  base.epochs = 15;
  base.seed = 1;
  TrainConfig with = base, without = base;
  with.model.copy = true;
  without.model.copy = false;
  const auto a = run_cell(corpus, with, "content_copy");
  const auto b = run_cell(corpus, without, "content_nocopy");
  for (const auto* r : {&a, &b})
    detail(pad(r->label, 16) + " copy accuracy " + num(r->copy_accuracy) + ", test BLEU " +
           num(100 * r->test.bleu4, 2) + ", " + num(r->seconds, 1) + " s" + (r->failed ? ", failed: " + r->error : ""));
  const bool ok = !a.failed && !b.failed && a.copy_accuracy >= 0.95 && b.copy_accuracy == 0.0 &&
                  a.seconds <= kRunBudgetSeconds && b.seconds <= kRunBudgetSeconds;
  return report(3, "copy task", ok,
                "copy " + num(a.copy_accuracy) + " (>= 0.95), no-copy " + num(b.copy_accuracy) + " (== 0)");
}

struct SeedRuns {
  GateSweep sweep;
  LinkDiagnostics diag;
};

// The z~=1 and z~=0 sweep runs are the content-only and link-only runs; the
// adaptive run is the hybrid run.
std::vector<SeedRuns> run_order_experiments() {
  std::vector<SeedRuns> out;
  for (std::uint64_t seed : kSeeds) {
    const auto corpus = prepare_synthetic(order_corpus_spec(seed, 2000));
    TrainConfig base = order_config();
    base.seed = seed;
    SeedRuns s;
    s.sweep = run_gate_sweep(corpus, base);
    if (s.sweep.adaptive.best)
      s.diag = link_matrix_diagnostics(s.sweep.adaptive.best->link.value, corpus.truth, corpus.vocab,
                                       tables_of(corpus.train));
    std::string line = "seed " + std::to_string(seed) + " BLEU";
    for (const auto& [z, r] : s.sweep.fixed) line += " " + num(z, 1) + ":" + (r.failed ? "failed" : num(100 * r.test.bleu4, 2));
    line += " adaptive:" + num(100 * s.sweep.adaptive.test.bleu4, 2);
    detail(line);
    detail("seed " + std::to_string(seed) + " link diagnostics " + num(s.diag.fraction) + " (chance " +
           num(s.diag.chance) + ")");
    out.push_back(std::move(s));
  }
  return out;
}

double run_bleu(const RunResult& r) { return r.failed ? 0.0 : r.test.bleu4; }

bool criterion4(const std::vector<SeedRuns>& runs) {
  std::vector<double> diag, hybrid, content, link;
  double slowest = 0.0;
  bool failed = false;
  for (const auto& s : runs) {
    diag.push_back(s.diag.fraction);
    hybrid.push_back(run_bleu(s.sweep.adaptive));
    content.push_back(run_bleu(s.sweep.fixed.back().second));
    link.push_back(run_bleu(s.sweep.fixed.front().second));
    for (const auto* r : {&s.sweep.adaptive, &s.sweep.fixed.back().second, &s.sweep.fixed.front().second}) {
      slowest = std::max(slowest, r->seconds);
      failed |= r->failed;
    }
  }
  const double d = median(diag), h = median(hybrid), c = median(content), l = median(link);
  const bool ok = !failed && d >= 0.9 && h >= c && c >= l && slowest <= kRunBudgetSeconds;
  return report(4, "order task", ok,
                "median diagnostics " + num(d) + " (>= 0.9), median BLEU hybrid " + num(100 * h, 2) + " >= content " +
                    num(100 * c, 2) + " >= link " + num(100 * l, 2) + ", slowest run " + num(slowest, 1) + " s");
}

bool criterion5(const std::vector<SeedRuns>& runs, double total_seconds) {
  // median over seeds of each fixed-z~ run and of the adaptive run
  const auto zs = sweep_values();
  std::vector<double> curve;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    std::vector<double> v;
    for (const auto& s : runs) v.push_back(run_bleu(s.sweep.fixed[i].second));
    curve.push_back(median(v));
  }
  std::vector<double> adaptive;
  for (const auto& s : runs) adaptive.push_back(run_bleu(s.sweep.adaptive));
  const double a = median(adaptive);
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    if (curve[i] > curve[best]) best = i;
  std::string line = "median curve";
  for (std::size_t i = 0; i < zs.size(); ++i) line += " " + num(zs[i], 1) + ":" + num(100 * curve[i], 2);
  detail(line);
  const bool interior = best != 0 && best != zs.size() - 1;
  const bool close = a >= curve[best] - 0.005;
  const bool ok = interior && close && total_seconds <= kSweepBudgetSeconds;
  return report(5, "gate sweep", ok,
                "best fixed z~ " + num(zs[best], 1) + " (interior), adaptive " + num(100 * a, 2) + " vs best fixed " +
                    num(100 * curve[best], 2) + " (tolerance 0.50), sweep " + num(total_seconds / 60.0, 1) + " min");
}

bool criterion6() {
  auto S = [](const char* s) { return split_whitespace(s); };
  struct Case {
    std::vector<Sentence> h, r;
    double bleu, rouge, nist;
  };
  const double beta = -std::log(0.5) / (std::log(1.5) * std::log(1.5));
  const std::vector<Case> cases{
      {{S("a b c d e f")}, {S("a b c d e g")}, std::pow(1.0 / 3.0, 0.25), 2.0 / 3.0, 5.0 / 6.0 * std::log2(6.0)},
      {{S("a b c d"), S("x y z w")},
       {S("a b c d e f"), S("x y z w")},
       std::exp(1.0 - 10.0 / 8.0),
       0.5,
       std::log2(10.0) * std::exp(-beta * std::pow(std::log(0.8), 2))},
      {{S("the the the the")}, {S("the cat the mat")}, 0.0, 0.0, 0.5},
      {{S("a b a c")}, {S("a b a c")}, 1.0, 1.0, 1.5 + 2.0 / 3.0},
      {{S("a b c d z")}, {S("a b c d")}, std::pow(0.8 * 0.75 * (2.0 / 3.0) * 0.5, 0.25), 1.0, 1.6},
      {{S("a b c d e"), S("p q r s t")},
       {S("a b c d e"), S("p q x s t")},
       std::pow(0.9 * 0.75 * 0.5 * 0.5, 0.25),
       0.5,
       std::numeric_limits<double>::quiet_NaN()}};
  double worst = 0.0;
  for (const auto& c : cases) {
    worst = std::max({worst, std::abs(bleu4(c.h, c.r) - c.bleu), std::abs(rouge4(c.h, c.r) - c.rouge)});
    if (!std::isnan(c.nist)) worst = std::max(worst, std::abs(nist4(c.h, c.r) - c.nist));
  }
  const std::vector<Sentence> same{S("john smith was a poet ."), S("born in 1901 in paris ,")};
  const std::vector<Sentence> other{S("q r s t u v w"), S("k l m n o")};
  const bool limits = bleu4(same, same) == 1.0 && rouge4(same, same) == 1.0 && bleu4(other, same) == 0.0 &&
                      rouge4(other, same) == 0.0;
  const bool ok = worst <= 1e-9 && limits;
  return report(6, "metric oracles", ok,
                std::to_string(cases.size()) + " fixtures, max deviation " + sci(worst) + ", limits " +
                    (limits ? "exact" : "wrong"));
}

bool criterion7() {
  std::vector<RawRecord> records;
  for (const char* f : {"ten_records.jsonl", "conan_doyle.jsonl"})
    for (auto& r : read_corpus(std::string(ORDERPLAN_SOURCE_DIR) + "/tests/fixtures/" + f))
      records.push_back(normalize_record(std::move(r)));
  const auto vocab = build_vocabularies(records, 200, 1);
  std::vector<InfoboxTable> tables;
  for (const auto& r : records) tables.push_back(parse_table(r, vocab));
  std::size_t brute = 0;
  for (std::size_t a = 0; a < vocab.field_count(); ++a)
    for (std::size_t b = 0; b < vocab.field_count(); ++b) {
      bool together = false;
      for (const auto& t : tables) {
        bool ha = false, hb = false;
        for (const auto& p : t.positions) {
          ha = ha || p.field_id == a;
          hb = hb || p.field_id == b;
        }
        together = together || (ha && hb);
      }
      brute += together ? 1 : 0;
    }
  const std::size_t census = effective_link_parameters(tables);
  const std::size_t full = vocab.field_count() * vocab.field_count();
  return report(7, "effective-parameter census", census == brute,
                std::to_string(census) + " effective entries, brute force " + std::to_string(brute) + ", of " +
                    std::to_string(full));
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool criterion8() {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "orderplan_acceptance";
  fs::create_directories(dir);
  const auto corpus = prepare_synthetic(copy_corpus_spec(5, 300));
  TrainConfig cfg;
  cfg.model.field_dim = cfg.model.word_dim = 8;
  cfg.model.hidden_dim = 16;
  cfg.epochs = 2;
  cfg.seed = 11;
  std::vector<std::string> ckpts, traces;
  for (int rep = 0; rep < 2; ++rep) {
    cfg.checkpoint_path = (dir / ("run" + std::to_string(rep) + ".ckpt")).string();
    auto r = train(corpus.train, corpus.valid, corpus.vocab, cfg);
    ckpts.push_back(file_bytes(cfg.checkpoint_path));
    std::string t;
    for (const auto& ex : corpus.test)
      t += greedy_decode(ex.table, r.best, corpus.vocab, cfg.max_decode_len, r.best.config).to_json().dump() + "\n";
    traces.push_back(t);
  }
  // a reloaded checkpoint decodes the same traces
  auto ck = load_checkpoint(cfg.checkpoint_path);
  std::string reloaded;
  for (const auto& ex : corpus.test)
    reloaded += greedy_decode(ex.table, ck.best, corpus.vocab, cfg.max_decode_len, ck.best.config).to_json().dump() + "\n";
  fs::remove_all(dir);
  const bool same_ckpt = !ckpts[0].empty() && ckpts[0] == ckpts[1];
  const bool same_trace = traces[0] == traces[1] && traces[0] == reloaded;
  return report(8, "determinism", same_ckpt && same_trace,
                std::string("checkpoints ") + (same_ckpt ? "identical" : "differ") + " (" +
                    std::to_string(ckpts[0].size()) + " bytes), traces " + (same_trace ? "identical" : "differ"));
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));
  auto wanted = [&](int n) { return only.empty() || only.count(n) > 0; };

  int failures = 0;
  auto run = [&](int n, const std::function<bool()>& f) {
    if (!wanted(n)) return;
    try {
      if (!f()) ++failures;
    } catch (const std::exception& e) {
      report(n, "exception", false, e.what());
      ++failures;
    }
  };
  run(1, criterion1);
  run(2, criterion2);
  run(3, criterion3);
  if (wanted(4) || wanted(5)) {
    try {
      const auto t0 = std::chrono::steady_clock::now();
      const auto runs = run_order_experiments();
      const double secs = seconds_since(t0);
      run(4, [&] { return criterion4(runs); });
      run(5, [&] { return criterion5(runs, secs); });
    } catch (const std::exception& e) {
      for (int n : {4, 5})
        if (wanted(n)) {
          report(n, "exception", false, e.what());
          ++failures;
        }
    }
  }
  run(6, criterion6);
  run(7, criterion7);
  run(8, criterion8);
  return failures == 0 ? 0 : 1;
}
