// Command-line front end: corpus splitting, index maintenance, retrieval,
// prompt rendering, one-off translation, scoring and experiment runs.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tmkit/backend.hpp"
#include "tmkit/bleu.hpp"
#include "tmkit/corpus.hpp"
#include "tmkit/experiment.hpp"
#include "tmkit/http_transport.hpp"
#include "tmkit/jsonl.hpp"
#include "tmkit/postprocess.hpp"
#include "tmkit/retrieval.hpp"
#include "tmkit/routing.hpp"
#include "tmkit/templates.hpp"

namespace {

using tmkit::jsonl::ordered_json;

struct Query {
  int id = 0;
  std::string source;
};

// Queries arrive either as JSONL records ({"id": n, "source": "..."}; id
// optional) or as plain text, one query per line, ids from line order.
std::vector<Query> load_queries(const std::string& path) {
  std::vector<Query> out;
  if (path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl") {
    tmkit::jsonl::for_each_record(path, [&](const ordered_json& j, size_t lineno) {
      Query q;
      q.id = j.contains("id") ? j.at("id").get<int>() : static_cast<int>(lineno) - 1;
      q.source = j.at("source").get<std::string>();
      out.push_back(std::move(q));
    });
  } else {
    std::vector<std::string> lines = tmkit::jsonl::read_lines(path);
    for (size_t i = 0; i < lines.size(); ++i)
      out.push_back({static_cast<int>(i), lines[i]});
  }
  if (out.empty()) throw std::runtime_error(path + ": no queries");
  return out;
}

std::string decode_escapes(const std::string& s) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size() && s[i + 1] == 'n') {
      out.push_back('\n');
      ++i;
    } else if (s[i] == '\\' && i + 1 < s.size() && s[i + 1] == 't') {
      out.push_back('\t');
      ++i;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

ordered_json hit_to_json(const tmkit::retrieval::RetrievalHit& hit) {
  ordered_json h;
  h["rank"] = hit.rank;
  h["entry_id"] = hit.entry.id;
  h["fms"] = hit.fms.value();
  h["distance"] = hit.fms.distance;
  h["length"] = hit.fms.length;
  h["source"] = hit.entry.source;
  h["target"] = hit.entry.target;
  return h;
}

// Shared flags for subcommands that read a database and retrieve from it.
struct RetrieveArgs {
  std::string db_path;
  std::string index_path;
  std::string query;
  std::string query_file;
  int k = tmkit::retrieval::kDefaultK;
  int limit = tmkit::retrieval::kDefaultCandidateLimit;
};

void add_retrieve_args(CLI::App* cmd, RetrieveArgs& a, bool with_k = true,
                       bool db_required = true) {
  auto* db = cmd->add_option("--db", a.db_path, "TM database (jsonl)");
  if (db_required) db->required();
  cmd->add_option("--index", a.index_path, "prebuilt index file (built in memory if absent)");
  auto* q = cmd->add_option("--query", a.query, "single query sentence");
  auto* qf = cmd->add_option("--query-file", a.query_file, "queries, jsonl or plain text");
  q->excludes(qf);
  if (with_k) cmd->add_option("-k,--k", a.k, "matches per query")->capture_default_str();
  cmd->add_option("--limit", a.limit, "candidate pool size before exact rescoring")
      ->capture_default_str();
}

std::vector<Query> queries_from_args(const RetrieveArgs& a) {
  if (!a.query.empty()) return {{0, a.query}};
  if (!a.query_file.empty()) return load_queries(a.query_file);
  throw std::runtime_error("need --query or --query-file");
}

struct LoadedDb {
  std::vector<tmkit::corpus::SentencePair> db;
  tmkit::retrieval::TmIndex index;
};

LoadedDb load_db_and_index(const RetrieveArgs& a) {
  LoadedDb out;
  out.db = tmkit::corpus::load_corpus(a.db_path, tmkit::corpus::CorpusFormat::kJsonl);
  if (out.db.empty()) throw std::runtime_error(a.db_path + ": database is empty");
  out.index = a.index_path.empty() ? tmkit::retrieval::build_index(out.db)
                                   : tmkit::retrieval::load_index(a.index_path);
  return out;
}

int run_split(const std::string& input, const std::string& src_file,
              const std::string& tgt_file, const std::string& format, size_t test_size,
              uint64_t seed, const std::string& src_lang, const std::string& tgt_lang,
              const std::string& out_dir, size_t max_tokens, bool drop_duplicates) {
  namespace corpus = tmkit::corpus;
  std::vector<corpus::SentencePair> pairs;
  if (!src_file.empty() || !tgt_file.empty()) {
    if (src_file.empty() || tgt_file.empty())
      throw std::runtime_error("paired text needs both --src and --tgt");
    if (!input.empty()) throw std::runtime_error("--input conflicts with --src/--tgt");
    pairs = corpus::load_paired_corpus(src_file, tgt_file);
  } else {
    if (input.empty()) throw std::runtime_error("need --input or --src/--tgt");
    corpus::CorpusFormat fmt;
    if (format == "jsonl") fmt = corpus::CorpusFormat::kJsonl;
    else if (format == "tsv") fmt = corpus::CorpusFormat::kTsv;
    else throw std::runtime_error("unknown format: " + format);
    pairs = corpus::load_corpus(input, fmt);
  }

  corpus::NormalizeRules rules;
  rules.max_tokens_per_side = max_tokens;
  rules.reject_exact_duplicates = drop_duplicates;
  corpus::IngestStats stats;
  std::vector<corpus::SentencePair> kept = corpus::normalize_corpus(pairs, rules, &stats);

  corpus::LangPair lang = corpus::make_lang_pair(src_lang, tgt_lang);
  corpus::CorpusSplit split = corpus::split_corpus(kept, test_size, seed, lang);
  corpus::save_split(out_dir, split);

  std::fprintf(stderr, "loaded %zu pairs, kept %zu, rejected %zu\n", pairs.size(), stats.kept,
               stats.rejected_total());
  for (const auto& [reason, count] : stats.rejected)
    std::fprintf(stderr, "  rejected %-16s %zu\n", reason.c_str(), count);
  std::fprintf(stderr, "test %zu pairs, database %zu pairs, seed %llu -> %s\n",
               split.test_set.size(), split.tm_database.size(),
               static_cast<unsigned long long>(seed), out_dir.c_str());
  return 0;
}

int run_evaluate(const std::string& hyp_path, const std::string& ref_path,
                 const std::string& lang, bool lowercase, bool tokenized) {
  std::vector<std::string> hyp = tmkit::jsonl::read_lines(hyp_path);
  std::vector<std::string> ref = tmkit::jsonl::read_lines(ref_path);
  tmkit::bleu::BleuReport report =
      tmkit::bleu::score_corpus(hyp, ref, lang, lowercase, tokenized);
  std::printf("%s\n", tmkit::bleu::format_multi_bleu_line(report).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"translation-memory prompting toolkit"};
  app.require_subcommand(1);

  // ---- split ----
  std::string sp_input, sp_src, sp_tgt, sp_format = "jsonl", sp_src_lang, sp_tgt_lang, sp_out;
  size_t sp_test_size = 0, sp_max_tokens = tmkit::corpus::kDefaultMaxTokensPerSide;
  uint64_t sp_seed = 13;
  bool sp_drop_dup = false;
  auto* split = app.add_subcommand("split", "normalize a corpus and split test/database");
  split->add_option("--input", sp_input, "corpus file (jsonl or tsv)");
  split->add_option("--src", sp_src, "source side of a paired text corpus");
  split->add_option("--tgt", sp_tgt, "target side of a paired text corpus");
  split->add_option("--format", sp_format, "jsonl|tsv")->capture_default_str();
  split->add_option("--test-size", sp_test_size, "test sentences to sample")->required();
  split->add_option("--seed", sp_seed, "sampling seed")->capture_default_str();
  split->add_option("--src-lang", sp_src_lang, "source language code")->required();
  split->add_option("--tgt-lang", sp_tgt_lang, "target language code")->required();
  split->add_option("--out", sp_out, "output directory")->required();
  split->add_option("--max-tokens", sp_max_tokens, "per-side token cap")->capture_default_str();
  split->add_flag("--drop-duplicates", sp_drop_dup, "drop exact duplicate pairs");

  // ---- index ----
  std::string ix_db, ix_out;
  auto* index_cmd = app.add_subcommand("index", "build and save a retrieval index");
  index_cmd->add_option("--db", ix_db, "TM database (jsonl)")->required();
  index_cmd->add_option("--out", ix_out, "index output file")->required();

  // ---- retrieve ----
  RetrieveArgs rt;
  auto* retrieve = app.add_subcommand("retrieve", "top-k fuzzy matches for queries");
  add_retrieve_args(retrieve, rt);

  // ---- prompt ----
  RetrieveArgs pr;
  std::string pr_src_lang, pr_tgt_lang, pr_order = "desc";
  int pr_template = tmkit::templates::kDefaultTemplateId;
  bool pr_json = false;
  auto* prompt = app.add_subcommand("prompt", "render prompts for queries");
  add_retrieve_args(prompt, pr, /*with_k=*/true, /*db_required=*/false);
  prompt->add_option("--src-lang", pr_src_lang, "source language code")->required();
  prompt->add_option("--tgt-lang", pr_tgt_lang, "target language code")->required();
  prompt->add_option("--template", pr_template, "template id")->capture_default_str();
  prompt->add_option("--order", pr_order, "demonstration order: asc|desc")
      ->capture_default_str();
  prompt->add_flag("--json", pr_json, "emit jsonl records instead of raw prompts");

  // ---- translate ----
  RetrieveArgs tr;
  std::string tr_src_lang, tr_tgt_lang, tr_order = "desc", tr_threshold = "0";
  std::string tr_nmt_hyp, tr_out;
  int tr_template = tmkit::templates::kDefaultTemplateId;
  std::string be_kind = "copy-stub", be_endpoint, be_model, be_key_env, be_transcript;
  int be_max_in_flight = 4, be_max_retries = 3;
  double be_timeout = 30.0;
  double dc_temperature = 0.0;
  int dc_max_tokens = 0;
  std::vector<std::string> dc_stop;
  auto* translate = app.add_subcommand("translate", "translate queries end to end");
  add_retrieve_args(translate, tr);
  translate->add_option("--src-lang", tr_src_lang, "source language code")->required();
  translate->add_option("--tgt-lang", tr_tgt_lang, "target language code")->required();
  translate->add_option("--template", tr_template, "template id")->capture_default_str();
  translate->add_option("--order", tr_order, "demonstration order: asc|desc")
      ->capture_default_str();
  translate->add_option("--fms-threshold", tr_threshold,
                        "reroute queries whose best match scores below this")
      ->capture_default_str();
  translate->add_option("--nmt-hyp", tr_nmt_hyp, "fallback hypotheses (jsonl: id, hypothesis)");
  translate->add_option("--out", tr_out, "output jsonl (default stdout)");
  translate->add_option("--backend", be_kind, "copy-stub|echo-stub|http")
      ->capture_default_str();
  translate->add_option("--endpoint", be_endpoint, "http backend endpoint URL");
  translate->add_option("--model", be_model, "model name sent to the backend");
  translate->add_option("--api-key-env", be_key_env,
                        "environment variable holding the API key");
  translate->add_option("--max-in-flight", be_max_in_flight, "concurrent request cap")
      ->capture_default_str();
  translate->add_option("--max-retries", be_max_retries, "retries per request")
      ->capture_default_str();
  translate->add_option("--timeout", be_timeout, "request timeout seconds")
      ->capture_default_str();
  translate->add_option("--transcript", be_transcript, "append raw request/response jsonl");
  translate->add_option("--temperature", dc_temperature, "sampling temperature")
      ->capture_default_str();
  translate->add_option("--max-output-tokens", dc_max_tokens,
                        "completion token cap (0: derive from query)");
  translate->add_option("--stop", dc_stop, "stop sequence (repeatable; \\n and \\t decoded)");

  // ---- evaluate ----
  std::string ev_hyp, ev_ref, ev_lang;
  bool ev_lowercase = false, ev_tokenized = false;
  auto* evaluate = app.add_subcommand("evaluate", "corpus BLEU of hypothesis vs reference");
  evaluate->add_option("--hyp", ev_hyp, "hypothesis file, one line per sentence")->required();
  evaluate->add_option("--ref", ev_ref, "reference file, one line per sentence")->required();
  evaluate->add_option("--lang", ev_lang, "tokenizer language")->required();
  evaluate->add_flag("--lowercase", ev_lowercase, "case-insensitive scoring");
  evaluate->add_flag("--tokenized", ev_tokenized, "inputs are already tokenized");

  // ---- experiment ----
  std::string ex_config;
  bool ex_sweep = false, ex_resume = false;
  auto* experiment = app.add_subcommand("experiment", "run a configured experiment");
  experiment->add_option("--config", ex_config, "experiment config (json)")->required();
  experiment->add_flag("--sweep", ex_sweep, "expand the config's sweep axes");
  experiment->add_flag("--resume", ex_resume, "continue an interrupted run");

  CLI11_PARSE(app, argc, argv);

  try {
    if (split->parsed()) {
      return run_split(sp_input, sp_src, sp_tgt, sp_format, sp_test_size, sp_seed,
                       sp_src_lang, sp_tgt_lang, sp_out, sp_max_tokens, sp_drop_dup);
    }

    if (index_cmd->parsed()) {
      auto db = tmkit::corpus::load_corpus(ix_db, tmkit::corpus::CorpusFormat::kJsonl);
      tmkit::retrieval::TmIndex index = tmkit::retrieval::build_index(db);
      tmkit::retrieval::save_index(ix_out, index);
      std::fprintf(stderr, "indexed %zu entries -> %s\n", index.doc_count, ix_out.c_str());
      return 0;
    }

    if (retrieve->parsed()) {
      LoadedDb loaded = load_db_and_index(rt);
      tmkit::retrieval::TmSearcher searcher(loaded.index, loaded.db);
      for (const Query& q : queries_from_args(rt)) {
        ordered_json row;
        row["query_id"] = q.id;
        row["query"] = q.source;
        ordered_json hits = ordered_json::array();
        for (const auto& hit : searcher.top_k(q.source, rt.k, rt.limit))
          hits.push_back(hit_to_json(hit));
        row["hits"] = hits;
        std::printf("%s\n", row.dump().c_str());
      }
      return 0;
    }

    if (prompt->parsed()) {
      namespace tpl = tmkit::templates;
      tmkit::corpus::LangPair lang = tmkit::corpus::make_lang_pair(pr_src_lang, pr_tgt_lang);
      tpl::DemoOrder order = tpl::demo_order_from_name(pr_order);
      const tpl::PromptTemplate& tmpl = tpl::get_template(pr_template);
      std::vector<Query> queries = queries_from_args(pr);

      std::optional<LoadedDb> loaded;
      std::optional<tmkit::retrieval::TmSearcher> searcher;
      if (tmpl.with_tm) {
        if (pr.db_path.empty())
          throw std::runtime_error("template " + std::to_string(pr_template) +
                                   " uses demonstrations; pass --db");
        loaded = load_db_and_index(pr);
        searcher.emplace(loaded->index, loaded->db);
      }
      for (const Query& q : queries) {
        std::vector<tpl::Demonstration> demos;
        if (tmpl.with_tm) {
          for (const auto& hit : searcher->top_k(q.source, pr.k, pr.limit))
            demos.push_back({hit.entry.source, hit.entry.target, tpl::Provenance::kTm,
                             hit.fms});
          demos = tpl::order_demos(std::move(demos), order);
        }
        tpl::PromptRequest req = tpl::render(tmpl, lang, q.source, demos, q.id);
        for (const auto& w : req.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
        if (pr_json) {
          ordered_json row;
          row["query_id"] = q.id;
          row["template_id"] = req.template_id;
          row["prompt"] = req.rendered;
          row["warnings"] = req.warnings;
          std::printf("%s\n", row.dump().c_str());
        } else {
          std::printf("%s\n", req.rendered.c_str());
        }
      }
      return 0;
    }

    if (translate->parsed()) {
      namespace tpl = tmkit::templates;
      tmkit::corpus::LangPair lang = tmkit::corpus::make_lang_pair(tr_src_lang, tr_tgt_lang);
      tpl::DemoOrder order = tpl::demo_order_from_name(tr_order);
      const tpl::PromptTemplate& tmpl = tpl::get_template(tr_template);
      if (!tmpl.with_tm) throw std::runtime_error("translate needs a with-TM template");

      LoadedDb loaded = load_db_and_index(tr);
      tmkit::retrieval::TmSearcher searcher(loaded.index, loaded.db);

      tmkit::routing::NmtHypothesisTable hyps;
      if (!tr_nmt_hyp.empty()) hyps = tmkit::routing::load_hypotheses(tr_nmt_hyp);
      tmkit::routing::RoutingPolicy policy =
          tmkit::routing::make_policy(tr_threshold, std::move(hyps));

      tmkit::backend::BackendConfig be_config;
      be_config.kind = be_kind;
      be_config.endpoint = be_endpoint;
      be_config.model = be_model;
      be_config.api_key_env = be_key_env;
      be_config.max_in_flight = be_max_in_flight;
      be_config.max_retries = be_max_retries;
      be_config.timeout_seconds = be_timeout;
      be_config.transcript_path = be_transcript;
      auto backend =
          tmkit::backend::make_backend(be_config, tmkit::backend::default_http_post());

      tmkit::backend::DecodingParams decoding;
      decoding.temperature = dc_temperature;
      decoding.max_output_tokens = dc_max_tokens;
      if (!dc_stop.empty()) {
        decoding.stop.clear();
        for (const auto& s : dc_stop) decoding.stop.push_back(decode_escapes(s));
      }

      std::vector<Query> queries = queries_from_args(tr);
      std::vector<tpl::PromptRequest> requests;
      std::vector<ordered_json> rows(queries.size());
      for (size_t i = 0; i < queries.size(); ++i) {
        const Query& q = queries[i];
        auto hits = searcher.top_k(q.source, tr.k, tr.limit);
        tmkit::corpus::SentencePair as_pair{q.id, q.source, ""};
        tmkit::routing::RouteEntry route = tmkit::routing::route(as_pair, hits[0], policy);
        std::vector<tpl::Demonstration> demos;
        if (route.choice == tmkit::routing::RouteChoice::kNmt) {
          demos = {route.demo};
        } else {
          for (const auto& hit : hits)
            demos.push_back({hit.entry.source, hit.entry.target, tpl::Provenance::kTm,
                             hit.fms});
          demos = tpl::order_demos(std::move(demos), order);
        }
        tpl::PromptRequest req = tpl::render(tmpl, lang, q.source, demos, q.id);
        ordered_json& row = rows[i];
        row["query_id"] = q.id;
        row["source"] = q.source;
        row["route"] = route.choice == tmkit::routing::RouteChoice::kNmt ? "nmt" : "tm";
        row["fms"] = hits[0].fms.value();
        requests.push_back(std::move(req));
      }

      auto completions = tmkit::backend::translate_batch(*backend, requests, decoding,
                                                         be_config.max_in_flight);
      tmkit::backend::append_transcript(be_config.transcript_path, requests, completions);

      std::optional<tmkit::jsonl::Writer> out;
      if (!tr_out.empty()) out.emplace(tr_out);
      bool any_failed = false;
      for (size_t i = 0; i < rows.size(); ++i) {
        rows[i]["ok"] = completions[i].ok;
        rows[i]["raw"] = completions[i].text;
        rows[i]["output"] =
            completions[i].ok ? tmkit::postprocess::clean_output(completions[i].text) : "";
        rows[i]["error"] = completions[i].error;
        any_failed = any_failed || !completions[i].ok;
        if (out) out->write(rows[i]);
        else std::printf("%s\n", rows[i].dump().c_str());
      }
      return any_failed ? 1 : 0;
    }

    if (evaluate->parsed()) {
      return run_evaluate(ev_hyp, ev_ref, ev_lang, ev_lowercase, ev_tokenized);
    }

    if (experiment->parsed()) {
      auto [config, sweep_spec] = tmkit::experiment::load_config_with_sweep(ex_config);
      if (ex_sweep) {
        if (sweep_spec.empty()) throw std::runtime_error("config has no sweep section");
        tmkit::experiment::SweepResult result = tmkit::experiment::run_sweep(
            config, sweep_spec, nullptr, tmkit::backend::default_http_post(), ex_resume);
        for (const auto& row : result.table) std::printf("%s\n", row.dump().c_str());
        std::fprintf(stderr, "sweep table -> %s/sweep.json\n", config.output_root.c_str());
      } else {
        tmkit::experiment::RunResult result = tmkit::experiment::run_experiment(
            config, nullptr, tmkit::backend::default_http_post(), ex_resume);
        const auto& bleu = result.summary.at("bleu");
        std::printf("%s\n", bleu.is_null()
                                ? "BLEU unavailable (all completions failed)"
                                : bleu.at("line").get<std::string>().c_str());
        std::fprintf(stderr, "run %s -> %s\n", result.config_hash.c_str(),
                     result.run_dir.string().c_str());
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
