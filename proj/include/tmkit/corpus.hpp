#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "tmkit/hash.hpp"
#include "tmkit/jsonl.hpp"
#include "tmkit/rng.hpp"
#include "tmkit/text.hpp"

// Parallel corpus ingestion, normalization and seeded test/database splits.
//
// Structural problems (unreadable file, malformed record, wrong tab count,
// empty file) are errors; content problems (empty after normalization,
// over-long, duplicate) reject the individual pair and are tallied per
// reason so large ingestions never abort midway.

namespace tmkit::corpus {

struct LangPair {
  std::string src_code;
  std::string tgt_code;
  std::string src_name;  // display name substituted into prompts, e.g. "English"
  std::string tgt_name;
};

// Display names for the language codes the toolkit is used with. Codes not
// listed here are legal; their display name is the code itself.
inline std::string language_name(const std::string& code) {
  static const std::map<std::string, std::string> kNames = {
      {"bg", "Bulgarian"}, {"cs", "Czech"},      {"da", "Danish"},
      {"de", "German"},    {"el", "Greek"},      {"en", "English"},
      {"es", "Spanish"},   {"et", "Estonian"},   {"fi", "Finnish"},
      {"fr", "French"},    {"ga", "Irish"},      {"hu", "Hungarian"},
      {"it", "Italian"},   {"ja", "Japanese"},   {"ko", "Korean"},
      {"lt", "Lithuanian"},{"lv", "Latvian"},    {"mt", "Maltese"},
      {"nl", "Dutch"},     {"pl", "Polish"},     {"pt", "Portuguese"},
      {"ro", "Romanian"},  {"ru", "Russian"},    {"sk", "Slovak"},
      {"sl", "Slovene"},   {"sv", "Swedish"},    {"zh", "Chinese"},
  };
  auto it = kNames.find(code);
  return it == kNames.end() ? code : it->second;
}

inline LangPair make_lang_pair(const std::string& src_code, const std::string& tgt_code) {
  if (src_code == tgt_code) {
    throw std::invalid_argument("source and target language codes must differ");
  }
  if (src_code.empty() || tgt_code.empty()) {
    throw std::invalid_argument("language codes must be non-empty");
  }
  return {src_code, tgt_code, language_name(src_code), language_name(tgt_code)};
}

struct SentencePair {
  int id = 0;
  std::string source;
  std::string target;

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

enum class CorpusFormat { kJsonl, kTsv, kPairedText };

inline constexpr size_t kDefaultMaxTokensPerSide = 512;
inline constexpr int kSplitFormatVersion = 1;

struct NormalizeRules {
  size_t max_tokens_per_side = kDefaultMaxTokensPerSide;
  bool reject_exact_duplicates = false;  // duplicate = identical (source, target)
};

struct IngestStats {
  size_t kept = 0;
  std::map<std::string, size_t> rejected;  // reason -> count

  size_t rejected_total() const {
    size_t n = 0;
    for (const auto& [_, c] : rejected) n += c;
    return n;
  }
};

// Entity unescaping is iterated to a fixpoint: a single pass would turn
// "&amp;quot;" into "&quot;" and a second application into a quote, breaking
// the idempotence guarantee. Each pass strictly shrinks the string, so the
// loop terminates.
inline std::string normalize_text(std::string_view raw) {
  std::string cur(raw);
  for (;;) {
    std::string next = text::unescape_entities(cur);
    if (next == cur) break;
    cur = std::move(next);
  }
  return text::collapse_whitespace(cur);
}

// Returns the normalized pair, or nullopt with *reason set.
inline std::optional<SentencePair> normalize_pair(const SentencePair& pair,
                                                  const NormalizeRules& rules,
                                                  std::string* reason = nullptr) {
  auto fail = [&](const char* r) -> std::optional<SentencePair> {
    if (reason) *reason = r;
    return std::nullopt;
  };
  SentencePair out;
  out.id = pair.id;
  out.source = normalize_text(pair.source);
  out.target = normalize_text(pair.target);
  if (out.source.empty()) return fail("empty_source");
  if (out.target.empty()) return fail("empty_target");
  if (text::count_whitespace_tokens(out.source) > rules.max_tokens_per_side ||
      text::count_whitespace_tokens(out.target) > rules.max_tokens_per_side) {
    return fail("too_long");
  }
  return out;
}

namespace detail {

inline std::vector<SentencePair> load_jsonl(const std::filesystem::path& path,
                                            bool allow_empty) {
  std::vector<SentencePair> pairs;
  int implicit_id = 0;
  int with_id = 0, without_id = 0;
  jsonl::for_each_record(path, [&](const jsonl::ordered_json& obj, size_t lineno) {
    auto ctx = [&] { return path.string() + ":" + std::to_string(lineno); };
    if (!obj.contains("source") || !obj["source"].is_string() ||
        !obj.contains("target") || !obj["target"].is_string()) {
      throw std::runtime_error(ctx() + ": record needs string fields 'source' and 'target'");
    }
    SentencePair p;
    if (obj.contains("id")) {
      if (!obj["id"].is_number_integer() || obj["id"].get<int64_t>() < 0) {
        throw std::runtime_error(ctx() + ": 'id' must be a non-negative integer");
      }
      p.id = obj["id"].get<int>();
      ++with_id;
    } else {
      p.id = implicit_id;
      ++without_id;
    }
    ++implicit_id;
    p.source = obj["source"].get<std::string>();
    p.target = obj["target"].get<std::string>();
    pairs.push_back(std::move(p));
  });
  if (with_id > 0 && without_id > 0) {
    throw std::runtime_error(path.string() + ": records mix explicit and implicit ids");
  }
  if (with_id > 0) {
    std::set<int> seen;
    for (const auto& p : pairs) {
      if (!seen.insert(p.id).second) {
        throw std::runtime_error(path.string() + ": duplicate id " + std::to_string(p.id));
      }
    }
  }
  if (pairs.empty() && !allow_empty) {
    throw std::runtime_error(path.string() + ": empty corpus file");
  }
  return pairs;
}

inline std::vector<SentencePair> load_tsv(const std::filesystem::path& path) {
  std::vector<SentencePair> pairs;
  int id = 0;
  size_t lineno = 0;
  for (const std::string& line : jsonl::read_lines(path)) {
    ++lineno;
    size_t tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected exactly one tab");
    }
    pairs.push_back({id++, line.substr(0, tab), line.substr(tab + 1)});
  }
  if (pairs.empty()) throw std::runtime_error(path.string() + ": empty corpus file");
  return pairs;
}

}  // namespace detail

// Raw load. Ids come from the file for canonical JSONL that carries them (so
// saved splits keep their original ids on reload) and from the record index
// otherwise; mixing explicit and implicit ids is an error.
inline std::vector<SentencePair> load_corpus(const std::filesystem::path& path,
                                             CorpusFormat format) {
  switch (format) {
    case CorpusFormat::kJsonl: return detail::load_jsonl(path, /*allow_empty=*/false);
    case CorpusFormat::kTsv: return detail::load_tsv(path);
    case CorpusFormat::kPairedText:
      throw std::runtime_error("paired text needs load_paired_corpus(src, tgt)");
  }
  throw std::logic_error("unreachable");
}

inline std::vector<SentencePair> load_paired_corpus(const std::filesystem::path& src_path,
                                                    const std::filesystem::path& tgt_path) {
  std::vector<std::string> src = jsonl::read_lines(src_path);
  std::vector<std::string> tgt = jsonl::read_lines(tgt_path);
  if (src.size() != tgt.size()) {
    throw std::runtime_error("paired files disagree on line count: " + src_path.string() +
                             " has " + std::to_string(src.size()) + ", " + tgt_path.string() +
                             " has " + std::to_string(tgt.size()));
  }
  if (src.empty()) throw std::runtime_error(src_path.string() + ": empty corpus file");
  std::vector<SentencePair> pairs;
  pairs.reserve(src.size());
  for (size_t i = 0; i < src.size(); ++i) {
    pairs.push_back({static_cast<int>(i), src[i], tgt[i]});
  }
  return pairs;
}

// Normalizes every pair, dropping rejected ones. Survivors keep their load
// ids, so ids remain stable provenance keys (gaps are expected).
inline std::vector<SentencePair> normalize_corpus(const std::vector<SentencePair>& pairs,
                                                  const NormalizeRules& rules,
                                                  IngestStats* stats = nullptr) {
  std::vector<SentencePair> kept;
  kept.reserve(pairs.size());
  std::set<std::pair<std::string, std::string>> seen;
  IngestStats local;
  for (const auto& pair : pairs) {
    std::string reason;
    std::optional<SentencePair> normalized = normalize_pair(pair, rules, &reason);
    if (!normalized) {
      ++local.rejected[reason];
      continue;
    }
    if (rules.reject_exact_duplicates &&
        !seen.insert({normalized->source, normalized->target}).second) {
      ++local.rejected["duplicate"];
      continue;
    }
    kept.push_back(std::move(*normalized));
    ++local.kept;
  }
  if (stats) *stats = local;
  return kept;
}

inline uint64_t corpus_fingerprint(const std::vector<SentencePair>& pairs) {
  hash::Fnv1a h;
  h.update_u64(pairs.size());
  for (const auto& p : pairs) {
    h.update_u64(static_cast<uint64_t>(p.id));
    h.update_field(p.source);
    h.update_field(p.target);
  }
  return h.digest();
}

inline void save_corpus(const std::filesystem::path& path,
                        const std::vector<SentencePair>& pairs) {
  jsonl::Writer w(path);
  for (const auto& p : pairs) {
    jsonl::ordered_json obj;
    obj["id"] = p.id;
    obj["source"] = p.source;
    obj["target"] = p.target;
    w.write(obj);
  }
}

struct SplitManifest {
  int format_version = kSplitFormatVersion;
  uint64_t seed = 0;
  size_t test_size = 0;
  size_t db_size = 0;
  uint64_t corpus_checksum = 0;
  uint64_t db_checksum = 0;
  uint64_t test_checksum = 0;
};

struct CorpusSplit {
  std::vector<SentencePair> test_set;
  std::vector<SentencePair> tm_database;
  uint64_t seed = 0;
  LangPair lang;
  SplitManifest manifest;
};

// Seeded test sample without replacement; the remainder is the database.
// Both halves keep original ids and are emitted in ascending id order;
// membership is determined entirely by (corpus, seed, test_size).
inline CorpusSplit split_corpus(const std::vector<SentencePair>& pairs, size_t test_size,
                                uint64_t seed, const LangPair& lang) {
  if (test_size >= pairs.size()) {
    throw std::invalid_argument("test_size " + std::to_string(test_size) +
                                " must be smaller than the corpus (" +
                                std::to_string(pairs.size()) + " pairs)");
  }
  std::vector<size_t> pick = rng::sample_indices(pairs.size(), test_size, seed);
  std::vector<bool> is_test(pairs.size(), false);
  for (size_t i : pick) is_test[i] = true;

  CorpusSplit out;
  out.seed = seed;
  out.lang = lang;
  for (size_t i = 0; i < pairs.size(); ++i) {
    (is_test[i] ? out.test_set : out.tm_database).push_back(pairs[i]);
  }
  auto by_id = [](const SentencePair& a, const SentencePair& b) { return a.id < b.id; };
  std::sort(out.test_set.begin(), out.test_set.end(), by_id);
  std::sort(out.tm_database.begin(), out.tm_database.end(), by_id);

  out.manifest.seed = seed;
  out.manifest.test_size = test_size;
  out.manifest.db_size = out.tm_database.size();
  out.manifest.corpus_checksum = corpus_fingerprint(pairs);
  out.manifest.db_checksum = corpus_fingerprint(out.tm_database);
  out.manifest.test_checksum = corpus_fingerprint(out.test_set);
  return out;
}

inline void save_split(const std::filesystem::path& dir, const CorpusSplit& split) {
  std::filesystem::create_directories(dir);
  save_corpus(dir / "db.jsonl", split.tm_database);
  save_corpus(dir / "test.jsonl", split.test_set);
  jsonl::ordered_json m;
  m["format_version"] = split.manifest.format_version;
  m["seed"] = split.manifest.seed;
  m["test_size"] = split.manifest.test_size;
  m["db_size"] = split.manifest.db_size;
  m["source_lang"] = split.lang.src_code;
  m["target_lang"] = split.lang.tgt_code;
  m["corpus_checksum"] = hash::to_hex(split.manifest.corpus_checksum);
  m["db_checksum"] = hash::to_hex(split.manifest.db_checksum);
  m["test_checksum"] = hash::to_hex(split.manifest.test_checksum);
  jsonl::write_file(dir / "split.json", m.dump(2) + "\n");
}

// Reload + integrity check. Any checksum disagreement between the manifest
// and the jsonl files is an error, never a silent re-derive.
inline CorpusSplit load_split(const std::filesystem::path& dir) {
  jsonl::ordered_json m =
      jsonl::ordered_json::parse(jsonl::read_file(dir / "split.json"), nullptr, false);
  if (m.is_discarded() || !m.is_object() || !m.contains("format_version")) {
    throw std::runtime_error((dir / "split.json").string() + ": not a split manifest");
  }
  CorpusSplit out;
  try {
    out.manifest.format_version = m.at("format_version").get<int>();
    if (out.manifest.format_version != kSplitFormatVersion) {
      throw std::runtime_error("unsupported split format_version " +
                               std::to_string(out.manifest.format_version));
    }
    out.manifest.seed = m.at("seed").get<uint64_t>();
    out.manifest.test_size = m.at("test_size").get<size_t>();
    out.manifest.db_size = m.at("db_size").get<size_t>();
    out.lang = make_lang_pair(m.at("source_lang").get<std::string>(),
                              m.at("target_lang").get<std::string>());
    out.manifest.corpus_checksum = hash::parse_hex(m.at("corpus_checksum").get<std::string>());
    out.manifest.db_checksum = hash::parse_hex(m.at("db_checksum").get<std::string>());
    out.manifest.test_checksum = hash::parse_hex(m.at("test_checksum").get<std::string>());
  } catch (const jsonl::ordered_json::exception& e) {
    throw std::runtime_error((dir / "split.json").string() + ": bad manifest: " + e.what());
  }
  out.seed = out.manifest.seed;

  out.tm_database = detail::load_jsonl(dir / "db.jsonl", /*allow_empty=*/true);
  out.test_set = detail::load_jsonl(dir / "test.jsonl", /*allow_empty=*/true);
  if (corpus_fingerprint(out.tm_database) != out.manifest.db_checksum) {
    throw std::runtime_error("checksum mismatch: db.jsonl does not match manifest");
  }
  if (corpus_fingerprint(out.test_set) != out.manifest.test_checksum) {
    throw std::runtime_error("checksum mismatch: test.jsonl does not match manifest");
  }
  if (out.test_set.size() != out.manifest.test_size ||
      out.tm_database.size() != out.manifest.db_size) {
    throw std::runtime_error("checksum mismatch: split sizes do not match manifest");
  }
  return out;
}

}  // namespace tmkit::corpus
