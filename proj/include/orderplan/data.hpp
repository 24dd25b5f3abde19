#pragma once

// Infobox tables, vocabularies, corpus files and the synthetic corpus
// generator.
//
// Canonical corpus format: one JSON object per line,
//   {"table": {"name": ["arthur", "conan"], ...}, "target": ["arthur", ...]}
// with table keys kept in record order.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "orderplan/errors.hpp"

namespace orderplan {

using ordered_json = nlohmann::ordered_json;

inline std::string normalize_token(std::string_view raw) {
  std::size_t b = 0, e = raw.size();
  while (b < e && std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(raw[e - 1]))) --e;
  std::string out(raw.substr(b, e - b));
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::vector<std::string> split_whitespace(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream is{std::string(line)};
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

struct RawField {
  std::string name;
  std::vector<std::string> tokens;

  bool operator==(const RawField&) const = default;
};

// A table record plus its target sentence, before vocabulary mapping.
struct RawRecord {
  std::vector<RawField> fields;
  std::vector<std::string> target;

  bool operator==(const RawRecord&) const = default;
};

inline bool is_none_value(const RawField& f) { return f.tokens.size() == 1 && f.tokens[0] == "none"; }

inline RawRecord drop_none_fields(RawRecord r) {
  std::erase_if(r.fields, [](const RawField& f) { return f.tokens.empty() || is_none_value(f); });
  return r;
}

inline RawRecord normalize_record(RawRecord r) {
  for (auto& f : r.fields)
    for (auto& t : f.tokens) t = normalize_token(t);
  for (auto& t : r.target) t = normalize_token(t);
  for (auto& f : r.fields) std::erase(f.tokens, std::string{});
  std::erase(r.target, std::string{});
  return r;
}

// ---------------------------------------------------------------------------
// Vocabularies

class Vocabularies {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kBos = 1;
  static constexpr std::size_t kEos = 2;
  static constexpr std::size_t kUnk = 3;
  static constexpr std::size_t kUnknownField = 0;
  static constexpr std::size_t kReservedWords = 4;

  Vocabularies() {
    for (const char* t : {"<pad>", "<bos>", "<eos>", "<unk>"}) add_word(t);
    add_field("<unknown>");
  }

  std::size_t add_word(const std::string& w) { return add(words_, word_ids_, w); }
  std::size_t add_field(const std::string& f) { return add(fields_, field_ids_, f); }

  std::size_t word_id(const std::string& w) const {
    auto it = word_ids_.find(w);
    return it == word_ids_.end() ? kUnk : it->second;
  }
  bool has_word(const std::string& w) const { return word_ids_.contains(w); }
  bool has_field(const std::string& f) const { return field_ids_.contains(f); }
  std::size_t field_id(const std::string& f) const {
    auto it = field_ids_.find(f);
    return it == field_ids_.end() ? kUnknownField : it->second;
  }
  const std::string& word(std::size_t id) const { return words_.at(id); }
  const std::string& field(std::size_t id) const { return fields_.at(id); }
  std::size_t word_count() const { return words_.size(); }
  std::size_t field_count() const { return fields_.size(); }

  ordered_json to_json() const { return ordered_json{{"words", words_}, {"fields", fields_}}; }
  static Vocabularies from_json(const ordered_json& j) {
    Vocabularies v;
    const auto words = j.at("words").get<std::vector<std::string>>();
    const auto fields = j.at("fields").get<std::vector<std::string>>();
    if (words.size() < kReservedWords || fields.empty()) throw CorpusError("vocabulary file lacks reserved entries");
    for (std::size_t i = kReservedWords; i < words.size(); ++i) v.add_word(words[i]);
    for (std::size_t i = 1; i < fields.size(); ++i) v.add_field(fields[i]);
    return v;
  }

  bool operator==(const Vocabularies& o) const { return words_ == o.words_ && fields_ == o.fields_; }

 private:
  static std::size_t add(std::vector<std::string>& list, std::unordered_map<std::string, std::size_t>& ids,
                         const std::string& s) {
    auto [it, inserted] = ids.emplace(s, list.size());
    if (inserted) list.push_back(s);
    return it->second;
  }

  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> word_ids_;
  std::vector<std::string> fields_;
  std::unordered_map<std::string, std::size_t> field_ids_;
};

// Keeps the word_cap - 4 most frequent content and target tokens (ties by
// first occurrence) and every field seen at least min_field_count times.
// Fields whose content is exactly "none" are dropped before counting.
inline Vocabularies build_vocabularies(std::span<const RawRecord> corpus, std::size_t word_cap,
                                       std::size_t min_field_count) {
  if (corpus.empty()) throw InvalidInput("build_vocabularies: empty corpus");
  if (word_cap < Vocabularies::kReservedWords) throw InvalidInput("build_vocabularies: word_cap must be >= 4");
  if (min_field_count < 1) throw InvalidInput("build_vocabularies: min_field_count must be >= 1");

  struct Count {
    std::size_t n = 0;
    std::size_t first = 0;
  };
  std::unordered_map<std::string, Count> words, fields;
  std::size_t order = 0;
  auto bump = [&order](std::unordered_map<std::string, Count>& m, const std::string& k) {
    auto [it, inserted] = m.try_emplace(k, Count{0, order});
    if (inserted) ++order;
    ++it->second.n;
  };
  for (const RawRecord& raw : corpus) {
    for (const RawField& f : raw.fields) {
      if (f.tokens.empty() || is_none_value(f)) continue;
      bump(fields, f.name);
      for (const auto& t : f.tokens) bump(words, t);
    }
    for (const auto& t : raw.target) bump(words, t);
  }

  auto ranked = [](const std::unordered_map<std::string, Count>& m) {
    std::vector<std::pair<std::string, Count>> v(m.begin(), m.end());
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
      if (a.second.n != b.second.n) return a.second.n > b.second.n;
      return a.second.first < b.second.first;
    });
    return v;
  };

  Vocabularies vocab;
  for (const auto& [w, c] : ranked(words)) {
    if (vocab.word_count() >= word_cap) break;
    vocab.add_word(w);
  }
  std::vector<std::pair<std::string, Count>> kept;
  for (const auto& [f, c] : ranked(fields))
    if (c.n >= min_field_count) kept.emplace_back(f, c);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second.first < b.second.first; });
  for (const auto& [f, c] : kept) vocab.add_field(f);
  return vocab;
}

// ---------------------------------------------------------------------------
// Tables and examples

struct TablePosition {
  std::size_t field_id = 0;
  std::size_t word_id = 0;
  std::string raw_token;

  bool operator==(const TablePosition&) const = default;
};

// Linearized table: one position per content word, fields in record order.
struct InfoboxTable {
  std::vector<TablePosition> positions;

  std::size_t size() const { return positions.size(); }
  std::vector<std::size_t> field_ids() const {
    std::vector<std::size_t> out;
    out.reserve(positions.size());
    for (const auto& p : positions) out.push_back(p.field_id);
    return out;
  }
  bool operator==(const InfoboxTable&) const = default;
};

inline InfoboxTable parse_table(const RawRecord& record, const Vocabularies& vocab) {
  InfoboxTable table;
  for (const RawField& f : record.fields) {
    if (f.tokens.empty() || is_none_value(f)) continue;
    const std::size_t fid = vocab.field_id(f.name);
    for (const auto& tok : f.tokens) table.positions.push_back({fid, vocab.word_id(tok), tok});
  }
  if (table.positions.empty()) throw CorpusError("parse_table: every field was filtered, table is empty");
  return table;
}

// Inverse of parse_table for tables whose field ids are all named in vocab.
inline RawRecord table_to_record(const InfoboxTable& table, const Vocabularies& vocab) {
  RawRecord r;
  std::size_t prev = static_cast<std::size_t>(-1);
  for (const auto& p : table.positions) {
    if (r.fields.empty() || p.field_id != prev) r.fields.push_back({vocab.field(p.field_id), {}});
    r.fields.back().tokens.push_back(p.raw_token);
    prev = p.field_id;
  }
  return r;
}

struct Example {
  InfoboxTable table;
  // Word ids, last entry is EOS.
  std::vector<std::size_t> target;
  // Surface tokens aligned with target, without the EOS entry.
  std::vector<std::string> target_tokens;
  // raw token -> 0-based positions in the table where it occurs.
  std::map<std::string, std::vector<std::size_t>> copy_candidates;
};

inline Example make_example(const RawRecord& record, const Vocabularies& vocab, std::size_t max_target_len = 40) {
  Example ex;
  ex.table = parse_table(record, vocab);
  for (std::size_t i = 0; i < ex.table.size(); ++i) ex.copy_candidates[ex.table.positions[i].raw_token].push_back(i);
  const std::size_t n = std::min(record.target.size(), max_target_len);
  for (std::size_t i = 0; i < n; ++i) {
    ex.target_tokens.push_back(record.target[i]);
    ex.target.push_back(vocab.word_id(record.target[i]));
  }
  ex.target.push_back(Vocabularies::kEos);
  return ex;
}

inline std::vector<Example> make_examples(std::span<const RawRecord> records, const Vocabularies& vocab,
                                          std::size_t max_target_len = 40) {
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(make_example(r, vocab, max_target_len));
  return out;
}

// ---------------------------------------------------------------------------
// Canonical corpus files

inline std::string to_json_line(const RawRecord& r) {
  ordered_json table = ordered_json::object();
  for (const auto& f : r.fields) table[f.name] = f.tokens;
  ordered_json j;
  j["table"] = std::move(table);
  j["target"] = r.target;
  return j.dump();
}

inline RawRecord parse_json_line(const std::string& line, std::size_t line_no = 0) {
  try {
    const ordered_json j = ordered_json::parse(line);
    RawRecord r;
    for (const auto& [name, tokens] : j.at("table").items()) r.fields.push_back({name, tokens.get<std::vector<std::string>>()});
    r.target = j.at("target").get<std::vector<std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw CorpusError("line " + std::to_string(line_no) + ": malformed record: " + e.what());
  }
}

inline std::vector<RawRecord> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file '" + path + "'");
  std::vector<RawRecord> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_json_line(line, no));
    } catch (const CorpusError& e) {
      throw CorpusError(path + ": " + e.what());
    }
  }
  return out;
}

inline void write_corpus(const std::string& path, std::span<const RawRecord> records) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write corpus file '" + path + "'");
  for (const auto& r : records) out << to_json_line(r) << '\n';
}

// WikiBio-style paired files: each table line holds "fieldname_k:token"
// items, each sentence line holds whitespace-separated tokens.
inline std::vector<RawRecord> ingest_wikibio(const std::string& box_path, const std::string& sentence_path) {
  std::ifstream boxes(box_path), sentences(sentence_path);
  if (!boxes) throw CorpusError("cannot open table file '" + box_path + "'");
  if (!sentences) throw CorpusError("cannot open sentence file '" + sentence_path + "'");
  std::vector<std::string> box_lines, sent_lines;
  for (std::string l; std::getline(boxes, l);) box_lines.push_back(l);
  for (std::string l; std::getline(sentences, l);) sent_lines.push_back(l);
  if (box_lines.size() != sent_lines.size())
    throw CorpusError("line count mismatch: " + std::to_string(box_lines.size()) + " tables vs " +
                      std::to_string(sent_lines.size()) + " sentences");

  std::vector<RawRecord> out;
  for (std::size_t ln = 0; ln < box_lines.size(); ++ln) {
    auto fail = [&](const std::string& what) {
      throw CorpusError(box_path + ":" + std::to_string(ln + 1) + ": " + what);
    };
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::pair<long, std::string>>> items;
    for (const auto& item : split_whitespace(box_lines[ln])) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) fail("item '" + item + "' lacks ':'");
      const std::string key = item.substr(0, colon);
      const std::string token = item.substr(colon + 1);
      const auto us = key.rfind('_');
      if (us == std::string::npos || us == 0 || us + 1 == key.size()) fail("item '" + item + "' lacks a _k index");
      long k = 0;
      try {
        std::size_t used = 0;
        k = std::stol(key.substr(us + 1), &used);
        if (used != key.size() - us - 1) fail("item '" + item + "' has a non-numeric index");
      } catch (const std::logic_error&) {
        fail("item '" + item + "' has a non-numeric index");
      }
      const std::string field = key.substr(0, us);
      if (!items.contains(field)) order.push_back(field);
      items[field].emplace_back(k, token);
    }
    RawRecord r;
    for (const auto& name : order) {
      auto& toks = items[name];
      std::stable_sort(toks.begin(), toks.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      RawField f{name, {}};
      for (auto& [k, t] : toks) f.tokens.push_back(t);
      r.fields.push_back(std::move(f));
    }
    r = drop_none_fields(std::move(r));
    r.target = split_whitespace(sent_lines[ln]);
    out.push_back(std::move(r));
  }
  return out;
}

struct CorpusSplit {
  std::vector<RawRecord> train, valid, test;
};

// 80/10/10 split after a seeded shuffle; valid_cap (0 = none) bounds the
// validation subset, returning the surplus to training.
inline CorpusSplit split_corpus(std::vector<RawRecord> records, std::uint64_t seed, std::size_t valid_cap = 0) {
  std::mt19937_64 rng(seed);
  std::shuffle(records.begin(), records.end(), rng);
  const std::size_t n = records.size();
  const std::size_t n_test = n / 10;
  std::size_t n_valid = n / 10;
  if (valid_cap != 0) n_valid = std::min(n_valid, valid_cap);
  CorpusSplit s;
  s.test.assign(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.valid.assign(records.begin() + static_cast<std::ptrdiff_t>(n_test),
                 records.begin() + static_cast<std::ptrdiff_t>(n_test + n_valid));
  s.train.assign(records.begin() + static_cast<std::ptrdiff_t>(n_test + n_valid), records.end());
  return s;
}

// ---------------------------------------------------------------------------
// Synthetic corpora

struct ValueGenerator {
  enum class Kind { pool, oov_name };
  Kind kind = Kind::pool;
  std::vector<std::string> tokens;  // pool kind
  std::size_t min_words = 1;
  std::size_t max_words = 1;
};

struct SyntheticField {
  std::string name;
  ValueGenerator generator;
  double presence = 1.0;
  std::vector<std::string> prefix;  // emitted before the value in the target
};

struct CorpusSpec {
  std::vector<SyntheticField> fields;
  // (from, to): `to` is mentioned right after `from`. Each field has at most
  // one successor and one predecessor; chains start at fields without a
  // predecessor, in inventory order.
  std::vector<std::pair<std::string, std::string>> transitions;
  std::size_t size = 100;
  std::uint64_t seed = 1;
  std::string separator = ",";
  std::string terminator = ".";
  bool shuffle_table = true;
  double valid_fraction = 0.1;
  double test_fraction = 0.1;

  // Number of distinct non-generated tokens a target or table can contain.
  std::size_t regular_token_count() const {
    std::set<std::string> s;
    for (const auto& f : fields) {
      s.insert(f.prefix.begin(), f.prefix.end());
      if (f.generator.kind == ValueGenerator::Kind::pool) s.insert(f.generator.tokens.begin(), f.generator.tokens.end());
    }
    if (!separator.empty()) s.insert(separator);
    if (!terminator.empty()) s.insert(terminator);
    return s.size();
  }
};

struct TransitionTable {
  // Rule successors, by field name.
  std::map<std::string, std::string> successor;
  // Consecutive-mention counts observed in the generated targets.
  std::map<std::pair<std::string, std::string>, std::size_t> observed;
};

struct SyntheticCorpus {
  std::vector<RawRecord> train, valid, test;
  TransitionTable truth;
  // Mention order implied by the rules.
  std::vector<std::string> mention_order;
};

inline std::vector<std::string> mention_order(const CorpusSpec& spec) {
  std::map<std::string, std::string> succ, pred;
  std::set<std::string> known;
  for (const auto& f : spec.fields) known.insert(f.name);
  for (const auto& [a, b] : spec.transitions) {
    if (!known.contains(a) || !known.contains(b)) throw InvalidInput("transition names an unknown field: " + a + "->" + b);
    if (a == b) throw InvalidInput("self transition for field " + a);
    if (!succ.emplace(a, b).second) throw InvalidInput("field " + a + " has two successors");
    if (!pred.emplace(b, a).second) throw InvalidInput("field " + b + " has two predecessors");
  }
  std::vector<std::string> order;
  for (const auto& f : spec.fields) {
    if (pred.contains(f.name)) continue;
    for (std::string cur = f.name;;) {
      order.push_back(cur);
      auto it = succ.find(cur);
      if (it == succ.end()) break;
      cur = it->second;
    }
  }
  if (order.size() != spec.fields.size()) throw InvalidInput("transition rules contain a cycle");
  return order;
}

inline std::string synthetic_name(std::mt19937_64& rng) {
  static constexpr std::string_view consonants = "bdfgklmnprstvzx";
  static constexpr std::string_view vowels = "aeiou";
  std::uniform_int_distribution<std::size_t> syllables(3, 4), c(0, consonants.size() - 1), v(0, vowels.size() - 1);
  std::string s;
  const std::size_t n = syllables(rng);
  for (std::size_t i = 0; i < n; ++i) {
    s += consonants[c(rng)];
    s += vowels[v(rng)];
  }
  return s;
}

inline SyntheticCorpus generate_synthetic_corpus(const CorpusSpec& spec) {
  if (spec.fields.empty()) throw InvalidInput("corpus spec has an empty field inventory");
  if (spec.size < 1) throw InvalidInput("corpus spec size must be >= 1");
  for (const auto& f : spec.fields) {
    if (f.generator.min_words < 1 || f.generator.max_words < f.generator.min_words)
      throw InvalidInput("field " + f.name + ": bad word-count range");
    if (f.generator.kind == ValueGenerator::Kind::pool && f.generator.tokens.empty())
      throw InvalidInput("field " + f.name + ": empty token pool");
  }
  const std::vector<std::string> order = mention_order(spec);
  std::map<std::string, const SyntheticField*> by_name;
  for (const auto& f : spec.fields) by_name[f.name] = &f;

  SyntheticCorpus out;
  out.mention_order = order;
  for (const auto& [a, b] : spec.transitions) out.truth.successor[a] = b;

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<RawRecord> all;
  for (std::size_t n = 0; n < spec.size; ++n) {
    std::vector<const SyntheticField*> present;
    for (const auto& name : order)
      if (unit(rng) < by_name[name]->presence) present.push_back(by_name[name]);
    if (present.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, order.size() - 1);
      present.push_back(by_name[order[pick(rng)]]);
    }
    RawRecord r;
    for (const SyntheticField* f : present) {
      const auto& g = f->generator;
      std::uniform_int_distribution<std::size_t> len(g.min_words, g.max_words);
      RawField rf{f->name, {}};
      const std::size_t k = len(rng);
      for (std::size_t i = 0; i < k; ++i) {
        if (g.kind == ValueGenerator::Kind::oov_name) {
          rf.tokens.push_back(synthetic_name(rng));
        } else {
          std::uniform_int_distribution<std::size_t> pick(0, g.tokens.size() - 1);
          rf.tokens.push_back(g.tokens[pick(rng)]);
        }
      }
      if (f != present.front() && !spec.separator.empty()) r.target.push_back(spec.separator);
      r.target.insert(r.target.end(), f->prefix.begin(), f->prefix.end());
      r.target.insert(r.target.end(), rf.tokens.begin(), rf.tokens.end());
      r.fields.push_back(std::move(rf));
    }
    if (!spec.terminator.empty()) r.target.push_back(spec.terminator);
    for (std::size_t i = 0; i + 1 < present.size(); ++i) ++out.truth.observed[{present[i]->name, present[i + 1]->name}];
    if (spec.shuffle_table) std::shuffle(r.fields.begin(), r.fields.end(), rng);
    all.push_back(std::move(r));
  }

  const auto n_valid = static_cast<std::size_t>(spec.valid_fraction * static_cast<double>(spec.size));
  const auto n_test = static_cast<std::size_t>(spec.test_fraction * static_cast<double>(spec.size));
  const std::size_t n_train = spec.size - std::min(spec.size, n_valid + n_test);
  out.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.valid.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train),
                   all.begin() + static_cast<std::ptrdiff_t>(std::min(spec.size, n_train + n_valid)));
  out.test.assign(all.begin() + static_cast<std::ptrdiff_t>(std::min(spec.size, n_train + n_valid)), all.end());
  return out;
}

inline ordered_json corpus_spec_to_json(const CorpusSpec& spec) {
  ordered_json fields = ordered_json::array();
  for (const auto& f : spec.fields) {
    ordered_json g;
    g["kind"] = f.generator.kind == ValueGenerator::Kind::pool ? "pool" : "oov_name";
    if (f.generator.kind == ValueGenerator::Kind::pool) g["tokens"] = f.generator.tokens;
    g["min_words"] = f.generator.min_words;
    g["max_words"] = f.generator.max_words;
    fields.push_back({{"name", f.name}, {"generator", g}, {"presence", f.presence}, {"prefix", f.prefix}});
  }
  ordered_json rules = ordered_json::array();
  for (const auto& [a, b] : spec.transitions) rules.push_back({a, b});
  return {{"fields", fields},         {"transitions", rules},         {"size", spec.size},
          {"seed", spec.seed},        {"separator", spec.separator},  {"terminator", spec.terminator},
          {"shuffle_table", spec.shuffle_table}, {"valid_fraction", spec.valid_fraction},
          {"test_fraction", spec.test_fraction}};
}

inline CorpusSpec corpus_spec_from_json(const ordered_json& j) {
  CorpusSpec spec;
  try {
    for (const auto& f : j.at("fields")) {
      SyntheticField sf;
      sf.name = f.at("name").get<std::string>();
      const auto& g = f.at("generator");
      const auto kind = g.value("kind", std::string("pool"));
      if (kind == "pool") {
        sf.generator.kind = ValueGenerator::Kind::pool;
        sf.generator.tokens = g.at("tokens").get<std::vector<std::string>>();
      } else if (kind == "oov_name") {
        sf.generator.kind = ValueGenerator::Kind::oov_name;
      } else {
        throw InvalidInput("unknown generator kind '" + kind + "'");
      }
      sf.generator.min_words = g.value("min_words", std::size_t{1});
      sf.generator.max_words = g.value("max_words", sf.generator.min_words);
      sf.presence = f.value("presence", 1.0);
      sf.prefix = f.value("prefix", std::vector<std::string>{});
      spec.fields.push_back(std::move(sf));
    }
    for (const auto& t : j.value("transitions", ordered_json::array()))
      spec.transitions.emplace_back(t.at(0).get<std::string>(), t.at(1).get<std::string>());
    spec.size = j.value("size", spec.size);
    spec.seed = j.value("seed", spec.seed);
    spec.separator = j.value("separator", spec.separator);
    spec.terminator = j.value("terminator", spec.terminator);
    spec.shuffle_table = j.value("shuffle_table", spec.shuffle_table);
    spec.valid_fraction = j.value("valid_fraction", spec.valid_fraction);
    spec.test_fraction = j.value("test_fraction", spec.test_fraction);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed corpus spec: ") + e.what());
  }
  return spec;
}

}  // namespace orderplan
