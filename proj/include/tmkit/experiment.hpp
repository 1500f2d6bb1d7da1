#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "tmkit/backend.hpp"
#include "tmkit/bleu.hpp"
#include "tmkit/corpus.hpp"
#include "tmkit/fms.hpp"
#include "tmkit/hash.hpp"
#include "tmkit/jsonl.hpp"
#include "tmkit/postprocess.hpp"
#include "tmkit/retrieval.hpp"
#include "tmkit/rng.hpp"
#include "tmkit/routing.hpp"
#include "tmkit/templates.hpp"

// End-to-end runs: retrieve, route, build prompts, translate, clean, score.
// A run directory is named by the hash of its effective configuration and
// contains config.json, records.jsonl and summary.json. Under the stub
// backends the record and summary bytes are a pure function of the config
// and inputs, which is what the reproducibility tests pin down.

namespace tmkit::experiment {

namespace fs = std::filesystem;

// Deepest rank kept in the retrieval cache; shallower requests are prefix
// slices, deeper ones bypass the cache.
inline constexpr int kCacheDepth = 9;

struct ExperimentConfig {
  // data: either split_dir (as written by save_split) or explicit files
  std::string split_dir;
  std::string db_path;
  std::string test_path;
  std::string src_lang;
  std::string tgt_lang;
  uint64_t seed = 13;
  int limit = 0;  // 0: all test queries

  int k = retrieval::kDefaultK;
  int candidate_limit = retrieval::kDefaultCandidateLimit;
  bool cache_retrieval = true;

  retrieval::SelectionStrategy strategy = retrieval::SelectionStrategy::kTopFms;
  std::string aux_pool_path;  // corpus for out-of-domain sampling

  int template_id = templates::kDefaultTemplateId;
  templates::DemoOrder order = templates::DemoOrder::kDescending;

  std::string threshold = "0";  // decimal in [0,1]; 0 disables rerouting
  std::string hypotheses_path;

  backend::BackendConfig backend;
  backend::DecodingParams decoding;

  bool eval_lowercase = false;

  std::string output_root = "runs";
  int batch_size = 16;
};

namespace detail {

inline void expect_object(const jsonl::ordered_json& j, const std::string& what) {
  if (!j.is_object()) throw std::invalid_argument(what + " must be a JSON object");
}

template <class T>
T get_or(const jsonl::ordered_json& j, const std::string& key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

// Thresholds must survive as exact decimals. Numbers are converted through
// their shortest round-trip form, which is the text the user wrote for
// values like 0.6; strings are taken verbatim.
inline std::string decimal_field(const jsonl::ordered_json& j, const std::string& key,
                                 const std::string& fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number()) return it->dump();
  throw std::invalid_argument(key + " must be a decimal string or number");
}

inline const std::set<std::string>& known_keys(const std::string& scope) {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"root",
       {"split_dir", "db", "test", "src_lang", "tgt_lang", "seed", "limit", "retrieval",
        "selection", "prompt", "routing", "backend", "decoding", "eval", "output_root",
        "batch_size", "sweep"}},
      {"retrieval", {"k", "candidate_limit", "cache"}},
      {"selection", {"strategy", "aux_pool"}},
      {"prompt", {"template_id", "order"}},
      {"routing", {"threshold", "hypotheses"}},
      {"backend",
       {"kind", "endpoint", "model", "api_key_env", "max_in_flight", "max_retries",
        "timeout_seconds", "retry_initial_delay_ms", "retry_max_delay_ms", "transcript",
        "prompt_field", "model_field", "temperature_field", "max_tokens_field", "stop_field",
        "completion_path", "extra_request_fields"}},
      {"decoding", {"temperature", "max_output_tokens", "stop"}},
      {"eval", {"lowercase"}},
      {"sweep", {"k", "threshold", "template_id", "order"}},
  };
  return keys.at(scope);
}

inline void reject_unknown_keys(const jsonl::ordered_json& j, const std::string& scope) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known_keys(scope).count(it.key()))
      throw std::invalid_argument("unknown config key " + scope + "." + it.key());
  }
}

}  // namespace detail

inline ExperimentConfig config_from_json(const jsonl::ordered_json& j) {
  detail::expect_object(j, "config");
  detail::reject_unknown_keys(j, "root");
  ExperimentConfig c;
  c.split_dir = detail::get_or<std::string>(j, "split_dir", "");
  c.db_path = detail::get_or<std::string>(j, "db", "");
  c.test_path = detail::get_or<std::string>(j, "test", "");
  c.src_lang = detail::get_or<std::string>(j, "src_lang", "");
  c.tgt_lang = detail::get_or<std::string>(j, "tgt_lang", "");
  c.seed = detail::get_or<uint64_t>(j, "seed", 13);
  c.limit = detail::get_or<int>(j, "limit", 0);

  if (auto it = j.find("retrieval"); it != j.end()) {
    detail::expect_object(*it, "retrieval");
    detail::reject_unknown_keys(*it, "retrieval");
    c.k = detail::get_or<int>(*it, "k", c.k);
    c.candidate_limit = detail::get_or<int>(*it, "candidate_limit", c.candidate_limit);
    c.cache_retrieval = detail::get_or<bool>(*it, "cache", c.cache_retrieval);
  }
  if (auto it = j.find("selection"); it != j.end()) {
    detail::expect_object(*it, "selection");
    detail::reject_unknown_keys(*it, "selection");
    c.strategy = retrieval::selection_from_name(
        detail::get_or<std::string>(*it, "strategy", "top-fms"));
    c.aux_pool_path = detail::get_or<std::string>(*it, "aux_pool", "");
  }
  if (auto it = j.find("prompt"); it != j.end()) {
    detail::expect_object(*it, "prompt");
    detail::reject_unknown_keys(*it, "prompt");
    c.template_id = detail::get_or<int>(*it, "template_id", c.template_id);
    c.order = templates::demo_order_from_name(
        detail::get_or<std::string>(*it, "order", "desc"));
  }
  if (auto it = j.find("routing"); it != j.end()) {
    detail::expect_object(*it, "routing");
    detail::reject_unknown_keys(*it, "routing");
    c.threshold = detail::decimal_field(*it, "threshold", "0");
    c.hypotheses_path = detail::get_or<std::string>(*it, "hypotheses", "");
  }
  if (auto it = j.find("backend"); it != j.end()) {
    detail::expect_object(*it, "backend");
    detail::reject_unknown_keys(*it, "backend");
    const auto& b = *it;
    c.backend.kind = detail::get_or<std::string>(b, "kind", c.backend.kind);
    c.backend.endpoint = detail::get_or<std::string>(b, "endpoint", "");
    c.backend.model = detail::get_or<std::string>(b, "model", "");
    c.backend.api_key_env = detail::get_or<std::string>(b, "api_key_env", "");
    c.backend.max_in_flight = detail::get_or<int>(b, "max_in_flight", c.backend.max_in_flight);
    c.backend.max_retries = detail::get_or<int>(b, "max_retries", c.backend.max_retries);
    c.backend.timeout_seconds =
        detail::get_or<double>(b, "timeout_seconds", c.backend.timeout_seconds);
    c.backend.retry_initial_delay_ms =
        detail::get_or<int>(b, "retry_initial_delay_ms", c.backend.retry_initial_delay_ms);
    c.backend.retry_max_delay_ms =
        detail::get_or<int>(b, "retry_max_delay_ms", c.backend.retry_max_delay_ms);
    c.backend.transcript_path = detail::get_or<std::string>(b, "transcript", "");
    c.backend.wire.prompt_field =
        detail::get_or<std::string>(b, "prompt_field", c.backend.wire.prompt_field);
    c.backend.wire.model_field =
        detail::get_or<std::string>(b, "model_field", c.backend.wire.model_field);
    c.backend.wire.temperature_field = detail::get_or<std::string>(
        b, "temperature_field", c.backend.wire.temperature_field);
    c.backend.wire.max_tokens_field =
        detail::get_or<std::string>(b, "max_tokens_field", c.backend.wire.max_tokens_field);
    c.backend.wire.stop_field =
        detail::get_or<std::string>(b, "stop_field", c.backend.wire.stop_field);
    c.backend.wire.completion_path =
        detail::get_or<std::string>(b, "completion_path", c.backend.wire.completion_path);
    if (auto e = b.find("extra_request_fields"); e != b.end()) {
      detail::expect_object(*e, "backend.extra_request_fields");
      c.backend.extra_request_fields = *e;
    }
  }
  if (auto it = j.find("decoding"); it != j.end()) {
    detail::expect_object(*it, "decoding");
    detail::reject_unknown_keys(*it, "decoding");
    c.decoding.temperature = detail::get_or<double>(*it, "temperature", 0.0);
    c.decoding.max_output_tokens = detail::get_or<int>(*it, "max_output_tokens", 0);
    c.decoding.stop =
        detail::get_or<std::vector<std::string>>(*it, "stop", c.decoding.stop);
  }
  if (auto it = j.find("eval"); it != j.end()) {
    detail::expect_object(*it, "eval");
    detail::reject_unknown_keys(*it, "eval");
    c.eval_lowercase = detail::get_or<bool>(*it, "lowercase", false);
  }
  c.output_root = detail::get_or<std::string>(j, "output_root", c.output_root);
  c.batch_size = detail::get_or<int>(j, "batch_size", c.batch_size);
  return c;
}

inline void validate_config(const ExperimentConfig& c) {
  if (c.split_dir.empty() && (c.db_path.empty() || c.test_path.empty()))
    throw std::invalid_argument("config needs split_dir or both db and test paths");
  if (!c.split_dir.empty() && (!c.db_path.empty() || !c.test_path.empty()))
    throw std::invalid_argument("config must not mix split_dir with db/test paths");
  if (c.src_lang.empty() || c.tgt_lang.empty())
    throw std::invalid_argument("config needs src_lang and tgt_lang");
  if (c.k < 0) throw std::invalid_argument("retrieval.k must be >= 0");
  if (c.limit < 0) throw std::invalid_argument("limit must be >= 0");
  if (c.batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  const templates::PromptTemplate& tmpl = templates::get_template(c.template_id);
  if (c.k == 0 && tmpl.with_tm)
    throw std::invalid_argument("k=0 needs a template without demonstration slots");
  if (c.k > 0 && !tmpl.with_tm)
    throw std::invalid_argument("k>0 needs a template with demonstration slots");
  fms::Rational thr = fms::parse_decimal(c.threshold);  // validates syntax
  if (thr.num > thr.den)
    throw std::invalid_argument("routing.threshold outside [0,1]: " + c.threshold);
  if (c.k == 0 && thr.num != 0)
    throw std::invalid_argument("routing threshold requires k>=1");
  if (c.strategy == retrieval::SelectionStrategy::kRandomOutDomain && c.aux_pool_path.empty())
    throw std::invalid_argument("random-out-domain selection needs selection.aux_pool");
  if (c.strategy != retrieval::SelectionStrategy::kRandomOutDomain && !c.aux_pool_path.empty())
    throw std::invalid_argument("selection.aux_pool only applies to random-out-domain");
}

// Canonical effective form: every field spelled out, fixed key order, so
// equal configs serialize to equal bytes and the hash names the run.
inline jsonl::ordered_json effective_json(const ExperimentConfig& c) {
  jsonl::ordered_json j;
  j["split_dir"] = c.split_dir;
  j["db"] = c.db_path;
  j["test"] = c.test_path;
  j["src_lang"] = c.src_lang;
  j["tgt_lang"] = c.tgt_lang;
  j["seed"] = c.seed;
  j["limit"] = c.limit;
  j["retrieval"] = {{"k", c.k},
                    {"candidate_limit", c.candidate_limit},
                    {"cache", c.cache_retrieval}};
  j["selection"] = {{"strategy", retrieval::selection_name(c.strategy)},
                    {"aux_pool", c.aux_pool_path}};
  j["prompt"] = {{"template_id", c.template_id},
                 {"order", templates::demo_order_name(c.order)}};
  j["routing"] = {{"threshold", c.threshold}, {"hypotheses", c.hypotheses_path}};
  j["backend"] = {{"kind", c.backend.kind},
                  {"endpoint", c.backend.endpoint},
                  {"model", c.backend.model},
                  {"api_key_env", c.backend.api_key_env},
                  {"max_in_flight", c.backend.max_in_flight},
                  {"max_retries", c.backend.max_retries},
                  {"timeout_seconds", c.backend.timeout_seconds},
                  {"retry_initial_delay_ms", c.backend.retry_initial_delay_ms},
                  {"retry_max_delay_ms", c.backend.retry_max_delay_ms},
                  {"transcript", c.backend.transcript_path},
                  {"prompt_field", c.backend.wire.prompt_field},
                  {"model_field", c.backend.wire.model_field},
                  {"temperature_field", c.backend.wire.temperature_field},
                  {"max_tokens_field", c.backend.wire.max_tokens_field},
                  {"stop_field", c.backend.wire.stop_field},
                  {"completion_path", c.backend.wire.completion_path},
                  {"extra_request_fields", c.backend.extra_request_fields}};
  j["decoding"] = {{"temperature", c.decoding.temperature},
                   {"max_output_tokens", c.decoding.max_output_tokens},
                   {"stop", c.decoding.stop}};
  j["eval"] = {{"lowercase", c.eval_lowercase}};
  j["batch_size"] = c.batch_size;
  // output_root intentionally absent: moving the output tree must not
  // change run identities
  return j;
}

inline std::string config_hash(const ExperimentConfig& c) {
  return hash::to_hex(hash::fnv1a(effective_json(c).dump()));
}

inline ExperimentConfig load_config(const fs::path& path) {
  jsonl::ordered_json j;
  try {
    j = jsonl::ordered_json::parse(jsonl::read_file(path));
  } catch (const std::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  ExperimentConfig c = config_from_json(j);
  validate_config(c);
  return c;
}

// The optional "sweep" object rides along in the same file; the base config
// validates on its own and each expanded combination validates again.
inline std::pair<ExperimentConfig, jsonl::ordered_json> load_config_with_sweep(
    const fs::path& path) {
  jsonl::ordered_json j;
  try {
    j = jsonl::ordered_json::parse(jsonl::read_file(path));
  } catch (const std::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  ExperimentConfig c = config_from_json(j);
  validate_config(c);
  jsonl::ordered_json sweep = jsonl::ordered_json::object();
  if (auto it = j.find("sweep"); it != j.end()) sweep = *it;
  return {std::move(c), std::move(sweep)};
}

// One test query's full journey through the pipeline.
struct Record {
  int query_id = 0;
  std::string source;
  std::string reference;
  std::string route;  // "tm" | "nmt" | "zero-shot"
  std::optional<fms::Score> best_fms;  // top-1 retrieval score when k>0
  int template_id = 0;
  int demo_count = 0;
  std::string prompt;
  std::vector<std::string> warnings;
  std::string raw;
  std::string output;
  bool ok = false;
  std::string error;
  int attempts = 0;
};

inline jsonl::ordered_json record_to_json(const Record& r) {
  jsonl::ordered_json j;
  j["query_id"] = r.query_id;
  j["source"] = r.source;
  j["reference"] = r.reference;
  j["route"] = r.route;
  if (r.best_fms) {
    j["fms"] = {{"distance", r.best_fms->distance}, {"length", r.best_fms->length}};
  } else {
    j["fms"] = nullptr;
  }
  j["template_id"] = r.template_id;
  j["demo_count"] = r.demo_count;
  j["prompt"] = r.prompt;
  j["warnings"] = r.warnings;
  j["raw"] = r.raw;
  j["output"] = r.output;
  j["ok"] = r.ok;
  j["error"] = r.error;
  j["attempts"] = r.attempts;
  return j;
}

inline Record record_from_json(const jsonl::ordered_json& j) {
  Record r;
  r.query_id = j.at("query_id").get<int>();
  r.source = j.at("source").get<std::string>();
  r.reference = j.at("reference").get<std::string>();
  r.route = j.at("route").get<std::string>();
  if (!j.at("fms").is_null()) {
    r.best_fms = fms::Score{j.at("fms").at("distance").get<int>(),
                            j.at("fms").at("length").get<int>()};
  }
  r.template_id = j.at("template_id").get<int>();
  r.demo_count = j.at("demo_count").get<int>();
  r.prompt = j.at("prompt").get<std::string>();
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  r.raw = j.at("raw").get<std::string>();
  r.output = j.at("output").get<std::string>();
  r.ok = j.at("ok").get<bool>();
  r.error = j.at("error").get<std::string>();
  r.attempts = j.at("attempts").get<int>();
  return r;
}

// One remembered match: the entry id plus its exact score.
struct CachedHit {
  int entry_id = 0;
  fms::Score fms{0, 1};
};

// Disk-backed top-k cache, keyed by (database fingerprint, query id,
// candidate limit). Entries also remember the query text fingerprint so a
// reused id with different text recomputes instead of lying. Stored depth is
// kCacheDepth; shallower requests slice the prefix.
class RetrievalCache {
 public:
  RetrievalCache(fs::path file, std::string corpus_fp, int limit)
      : file_(std::move(file)), corpus_fp_(std::move(corpus_fp)), limit_(limit) {
    if (file_.empty() || !fs::exists(file_)) return;
    jsonl::for_each_record(file_, [&](const jsonl::ordered_json& j, int) {
      if (j.at("corpus").get<std::string>() != corpus_fp_) return;
      if (j.at("limit").get<int>() != limit_) return;
      Entry e;
      e.query_fp = j.at("query_fp").get<std::string>();
      for (const auto& h : j.at("hits")) {
        e.hits.push_back(
            {h.at("entry").get<int>(), fms::Score{h.at("d").get<int>(), h.at("l").get<int>()}});
      }
      map_[j.at("query_id").get<int>()] = std::move(e);
    });
  }

  std::optional<std::vector<CachedHit>> lookup(int query_id, const std::string& query_fp,
                                               int k) const {
    auto it = map_.find(query_id);
    if (it == map_.end() || it->second.query_fp != query_fp) return std::nullopt;
    const auto& hits = it->second.hits;
    if (static_cast<int>(hits.size()) < k &&
        static_cast<int>(hits.size()) < deepest_possible_) {
      return std::nullopt;  // cached against a smaller database
    }
    return std::vector<CachedHit>(
        hits.begin(), hits.begin() + std::min<size_t>(hits.size(), static_cast<size_t>(k)));
  }

  void store(int query_id, const std::string& query_fp, std::vector<CachedHit> hits) {
    if (!file_.empty()) {
      jsonl::ordered_json j;
      j["corpus"] = corpus_fp_;
      j["limit"] = limit_;
      j["query_id"] = query_id;
      j["query_fp"] = query_fp;
      jsonl::ordered_json arr = jsonl::ordered_json::array();
      for (const auto& h : hits)
        arr.push_back({{"entry", h.entry_id}, {"d", h.fms.distance}, {"l", h.fms.length}});
      j["hits"] = arr;
      jsonl::Writer out(file_, /*append=*/true);
      out.write(j);
    }
    map_[query_id] = Entry{query_fp, std::move(hits)};
  }

  // The database can be smaller than the cache depth; a full-database entry
  // must still count as deep enough.
  void set_deepest_possible(int n) { deepest_possible_ = n; }

 private:
  struct Entry {
    std::string query_fp;
    std::vector<CachedHit> hits;
  };
  fs::path file_;
  std::string corpus_fp_;
  int limit_;
  int deepest_possible_ = kCacheDepth;
  std::map<int, Entry> map_;
};

struct RunResult {
  fs::path run_dir;
  std::string config_hash;
  std::vector<Record> records;
  jsonl::ordered_json summary;
};

namespace detail {

inline std::string fp_of(const std::string& s) { return hash::to_hex(hash::fnv1a(s)); }

// Demonstrations for one query after routing and selection, plus metadata.
struct PreparedQuery {
  Record record;
  templates::PromptRequest request;
};

inline jsonl::ordered_json bleu_json(const bleu::BleuReport& r) {
  jsonl::ordered_json j;
  j["line"] = bleu::format_multi_bleu_line(r);
  j["bleu"] = r.bleu;
  j["precisions"] = r.precisions;
  j["brevity_penalty"] = r.brevity_penalty;
  j["ratio"] = r.ratio;
  j["hyp_len"] = r.hyp_len;
  j["ref_len"] = r.ref_len;
  j["correct"] = r.correct;
  j["total"] = r.total;
  return j;
}

inline jsonl::ordered_json histogram_json(const retrieval::FmsHistogram& h) {
  jsonl::ordered_json j;
  j["edges"] = retrieval::FmsHistogram::kEdges;
  j["counts"] = h.counts;
  j["proportions"] = h.proportions();
  j["total"] = h.total;
  return j;
}

}  // namespace detail

// Builds summary.json from finished records. Exposed separately so a
// resumed run and tests can recompute it from records alone.
inline jsonl::ordered_json summarize(const ExperimentConfig& config,
                                     const std::vector<Record>& records) {
  jsonl::ordered_json s;
  s["config_hash"] = config_hash(config);
  s["records"] = records.size();
  long long failures = 0;
  for (const auto& r : records) failures += r.ok ? 0 : 1;
  s["failures"] = failures;

  // scoring: outputs and references tokenized in the target language
  postprocess::MosesTokenizer tok(config.tgt_lang);
  std::vector<std::string> hyp, ref;
  hyp.reserve(records.size());
  ref.reserve(records.size());
  for (const auto& r : records) {
    hyp.push_back(tok.tokenize_line(r.output));
    ref.push_back(tok.tokenize_line(r.reference));
  }
  try {
    s["bleu"] = detail::bleu_json(bleu::corpus_bleu(hyp, ref, config.eval_lowercase));
  } catch (const std::invalid_argument&) {
    s["bleu"] = nullptr;  // e.g. every completion failed
  }

  // routing outcome
  long long tm = 0, nmt = 0, zero = 0;
  std::vector<fms::Score> routed_out;
  for (const auto& r : records) {
    if (r.route == "tm") ++tm;
    else if (r.route == "nmt") ++nmt;
    else ++zero;
    if (r.route == "nmt" && r.best_fms) routed_out.push_back(*r.best_fms);
  }
  jsonl::ordered_json routing;
  routing["threshold"] = config.threshold;
  routing["tm_count"] = tm;
  routing["nmt_count"] = nmt;
  long long routed_total = tm + nmt;
  if (routed_total > 0) {
    routing["tm_proportion"] = static_cast<double>(tm) / static_cast<double>(routed_total);
    routing["nmt_proportion"] = static_cast<double>(nmt) / static_cast<double>(routed_total);
  } else {
    routing["tm_proportion"] = nullptr;
    routing["nmt_proportion"] = nullptr;
  }
  routing["routed_out_histogram"] =
      routed_out.empty() ? jsonl::ordered_json(nullptr)
                         : detail::histogram_json(retrieval::fms_histogram(routed_out));
  s["routing"] = routing;

  // score stratified by best-match bucket, for the queries that have one
  std::vector<std::string> bh, br;
  std::vector<fms::Score> bs;
  for (size_t i = 0; i < records.size(); ++i) {
    if (!records[i].best_fms) continue;
    bh.push_back(hyp[i]);
    br.push_back(ref[i]);
    bs.push_back(*records[i].best_fms);
  }
  if (bs.empty()) {
    s["bleu_by_bucket"] = nullptr;
  } else {
    bleu::BucketBleu bb = bleu::bleu_by_bucket(bh, br, bs, config.eval_lowercase);
    jsonl::ordered_json arr = jsonl::ordered_json::array();
    for (int b = 0; b < fms::kBucketCount; ++b) {
      jsonl::ordered_json e;
      e["bucket"] = retrieval::FmsHistogram::kEdges[b];
      e["count"] = bb.counts[b];
      e["bleu"] = bb.reports[b] ? detail::bleu_json(*bb.reports[b])
                                : jsonl::ordered_json(nullptr);
      arr.push_back(e);
    }
    s["bleu_by_bucket"] = arr;
  }
  return s;
}

// Runs one configuration. With resume, records already in the run directory
// are kept and only the remaining test queries are processed; without it an
// existing records file is an error so partial runs are never extended by
// accident. backend_override lets tests supply an instrumented backend.
inline RunResult run_experiment(const ExperimentConfig& config,
                                backend::Backend* backend_override = nullptr,
                                backend::HttpPostFn http_post = nullptr,
                                bool resume = false) {
  validate_config(config);

  // data
  std::vector<corpus::SentencePair> db, test;
  if (!config.split_dir.empty()) {
    corpus::CorpusSplit split = corpus::load_split(config.split_dir);
    db = std::move(split.tm_database);
    test = std::move(split.test_set);
  } else {
    db = corpus::load_corpus(config.db_path, corpus::CorpusFormat::kJsonl);
    test = corpus::load_corpus(config.test_path, corpus::CorpusFormat::kJsonl);
  }
  corpus::LangPair lang = corpus::make_lang_pair(config.src_lang, config.tgt_lang);
  if (config.limit > 0 && static_cast<size_t>(config.limit) < test.size())
    test.resize(config.limit);
  if (test.empty()) throw std::invalid_argument("test set is empty");

  // run directory
  std::string hash = config_hash(config);
  fs::path run_dir = fs::path(config.output_root) / hash;
  fs::create_directories(run_dir);
  std::string effective = effective_json(config).dump(2) + "\n";
  fs::path config_path = run_dir / "config.json";
  if (fs::exists(config_path)) {
    if (jsonl::read_file(config_path) != effective)
      throw std::runtime_error("run directory " + run_dir.string() +
                               " holds a different configuration");
  } else {
    jsonl::write_file(config_path, effective);
  }

  // resume state
  fs::path records_path = run_dir / "records.jsonl";
  std::map<int, Record> done;
  if (fs::exists(records_path)) {
    if (!resume)
      throw std::runtime_error(records_path.string() +
                               " already exists; pass resume to continue this run");
    jsonl::for_each_record(records_path, [&](const jsonl::ordered_json& j, int) {
      Record r = record_from_json(j);
      done[r.query_id] = std::move(r);
    });
  }

  // retrieval machinery (only when demonstrations are wanted)
  std::optional<retrieval::TmIndex> index;
  std::optional<retrieval::TmSearcher> searcher;
  std::optional<RetrievalCache> cache;
  std::unordered_map<int, const corpus::SentencePair*> db_by_id;
  if (config.k > 0) {
    index.emplace(retrieval::build_index(db));
    searcher.emplace(*index, db);
    for (const auto& pair : db) db_by_id.emplace(pair.id, &pair);
    if (config.cache_retrieval) {
      cache.emplace(run_dir / "retrieval_cache.jsonl", hash::to_hex(index->built_from),
                    config.candidate_limit);
      cache->set_deepest_possible(std::min<int>(kCacheDepth, static_cast<int>(db.size())));
    }
  }

  std::optional<routing::RoutingPolicy> policy;
  fms::Rational threshold = fms::parse_decimal(config.threshold);
  if (config.k > 0) {
    routing::NmtHypothesisTable hyps;
    if (!config.hypotheses_path.empty()) hyps = routing::load_hypotheses(config.hypotheses_path);
    policy = routing::RoutingPolicy{threshold, std::move(hyps)};
  }

  std::vector<corpus::SentencePair> aux_pool;
  if (config.strategy == retrieval::SelectionStrategy::kRandomOutDomain)
    aux_pool = corpus::load_corpus(config.aux_pool_path, corpus::CorpusFormat::kJsonl);

  backend::Backend* be = backend_override;
  std::unique_ptr<backend::Backend> owned;
  if (be == nullptr) {
    owned = backend::make_backend(config.backend, std::move(http_post));
    be = owned.get();
  }

  // per-query preparation, in test order
  auto prepare = [&](const corpus::SentencePair& q) {
    detail::PreparedQuery p;
    p.record.query_id = q.id;
    p.record.source = q.source;
    p.record.reference = q.target;
    p.record.template_id = config.template_id;

    std::vector<templates::Demonstration> demos;
    if (config.k == 0) {
      p.record.route = "zero-shot";
    } else {
      std::string qfp = detail::fp_of(q.source);
      bool use_cache = cache.has_value() && config.k <= kCacheDepth;
      std::vector<retrieval::RetrievalHit> hits;
      std::optional<std::vector<CachedHit>> cached;
      if (use_cache) cached = cache->lookup(q.id, qfp, config.k);
      if (cached) {
        int rank = 1;
        for (const CachedHit& h : *cached) {
          auto it = db_by_id.find(h.entry_id);
          if (it == db_by_id.end())
            throw std::runtime_error("retrieval cache references unknown entry id " +
                                     std::to_string(h.entry_id));
          hits.push_back({*it->second, h.fms, rank++});
        }
      } else {
        int depth = use_cache ? kCacheDepth : config.k;
        hits = searcher->top_k(q.source, depth, config.candidate_limit);
        if (use_cache) {
          std::vector<CachedHit> to_store;
          to_store.reserve(hits.size());
          for (const auto& h : hits) to_store.push_back({h.entry.id, h.fms});
          cache->store(q.id, qfp, std::move(to_store));
        }
        if (static_cast<int>(hits.size()) > config.k) hits.resize(config.k);
      }
      if (hits.empty()) throw std::runtime_error("retrieval returned no matches");
      p.record.best_fms = hits[0].fms;

      routing::RouteEntry route = routing::route(q, hits[0], *policy);
      if (route.choice == routing::RouteChoice::kNmt) {
        p.record.route = "nmt";
        demos = {route.demo};
      } else {
        p.record.route = "tm";
        if (config.strategy == retrieval::SelectionStrategy::kTopFms) {
          for (const auto& hit : hits)
            demos.push_back({hit.entry.source, hit.entry.target,
                             templates::Provenance::kTm, hit.fms});
        } else {
          demos = retrieval::select_demonstrations(
              config.strategy, config.k, q.source, *searcher,
              aux_pool.empty() ? nullptr : &aux_pool,
              rng::mix(config.seed, static_cast<uint64_t>(q.id)));
        }
        demos = templates::order_demos(std::move(demos), config.order);
      }
    }
    p.request = templates::render(config.template_id, lang, q.source, demos, q.id);
    p.record.demo_count = static_cast<int>(demos.size());
    p.record.prompt = p.request.rendered;
    p.record.warnings = p.request.warnings;
    return p;
  };

  // translate in checkpoint batches
  std::vector<Record> records;
  records.reserve(test.size());
  jsonl::Writer writer(records_path, /*append=*/true);
  std::vector<detail::PreparedQuery> pending;
  auto flush = [&]() {
    if (pending.empty()) return;
    std::vector<templates::PromptRequest> reqs;
    reqs.reserve(pending.size());
    for (auto& p : pending) reqs.push_back(p.request);
    std::vector<backend::Completion> done_batch =
        backend::translate_batch(*be, reqs, config.decoding, config.backend.max_in_flight);
    backend::append_transcript(config.backend.transcript_path, reqs, done_batch);
    for (size_t i = 0; i < pending.size(); ++i) {
      Record r = std::move(pending[i].record);
      r.raw = done_batch[i].text;
      r.ok = done_batch[i].ok;
      r.error = done_batch[i].error;
      r.attempts = done_batch[i].attempts;
      r.output = done_batch[i].ok ? postprocess::clean_output(done_batch[i].text) : "";
      writer.write(record_to_json(r));
      records.push_back(std::move(r));
    }
    pending.clear();
  };

  for (const auto& q : test) {
    auto it = done.find(q.id);
    if (it != done.end()) {
      flush();  // keep on-disk order aligned with processing order
      records.push_back(it->second);
      continue;
    }
    pending.push_back(prepare(q));
    if (static_cast<int>(pending.size()) >= config.batch_size) flush();
  }
  flush();
  writer.close();

  RunResult result;
  result.run_dir = run_dir;
  result.config_hash = hash;
  result.summary = summarize(config, records);
  result.records = std::move(records);
  jsonl::write_file(run_dir / "summary.json", result.summary.dump(2) + "\n");
  return result;
}

// Cartesian sweep over k, threshold, template and demonstration order.
// Missing axes reuse the base value. Returns the expanded configs in a
// deterministic order: k, then threshold, then template, then order.
inline std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& base,
                                                  const jsonl::ordered_json& sweep) {
  detail::expect_object(sweep, "sweep");
  detail::reject_unknown_keys(sweep, "sweep");
  std::vector<int> ks;
  if (auto it = sweep.find("k"); it != sweep.end())
    ks = it->get<std::vector<int>>();
  else
    ks = {base.k};
  std::vector<std::string> thresholds;
  if (auto it = sweep.find("threshold"); it != sweep.end()) {
    for (const auto& t : *it)
      thresholds.push_back(t.is_string() ? t.get<std::string>() : t.dump());
  } else {
    thresholds = {base.threshold};
  }
  std::vector<int> template_ids;
  if (auto it = sweep.find("template_id"); it != sweep.end())
    template_ids = it->get<std::vector<int>>();
  else
    template_ids = {base.template_id};
  std::vector<std::string> orders;
  if (auto it = sweep.find("order"); it != sweep.end())
    orders = it->get<std::vector<std::string>>();
  else
    orders = {templates::demo_order_name(base.order)};

  std::vector<ExperimentConfig> out;
  for (int k : ks) {
    for (const auto& thr : thresholds) {
      for (int tid : template_ids) {
        for (const auto& ord : orders) {
          ExperimentConfig c = base;
          c.k = k;
          c.threshold = thr;
          c.template_id = tid;
          c.order = templates::demo_order_from_name(ord);
          validate_config(c);
          out.push_back(std::move(c));
        }
      }
    }
  }
  return out;
}

struct SweepResult {
  std::vector<RunResult> runs;
  jsonl::ordered_json table;  // one row per combination
};

inline SweepResult run_sweep(const ExperimentConfig& base, const jsonl::ordered_json& sweep,
                             backend::Backend* backend_override = nullptr,
                             backend::HttpPostFn http_post = nullptr, bool resume = false) {
  SweepResult result;
  result.table = jsonl::ordered_json::array();
  for (const ExperimentConfig& c : expand_sweep(base, sweep)) {
    RunResult run = run_experiment(c, backend_override, http_post, resume);
    jsonl::ordered_json row;
    row["k"] = c.k;
    row["threshold"] = c.threshold;
    row["template_id"] = c.template_id;
    row["order"] = templates::demo_order_name(c.order);
    row["config_hash"] = run.config_hash;
    row["bleu"] = run.summary.at("bleu").is_null()
                      ? jsonl::ordered_json(nullptr)
                      : run.summary.at("bleu").at("bleu");
    row["tm_proportion"] = run.summary.at("routing").at("tm_proportion");
    row["failures"] = run.summary.at("failures");
    result.table.push_back(row);
    result.runs.push_back(std::move(run));
  }
  fs::path table_path = fs::path(base.output_root) / "sweep.json";
  jsonl::write_file(table_path, result.table.dump(2) + "\n");
  return result;
}

}  // namespace tmkit::experiment
