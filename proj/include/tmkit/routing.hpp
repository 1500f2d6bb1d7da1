#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tmkit/corpus.hpp"
#include "tmkit/fms.hpp"
#include "tmkit/jsonl.hpp"
#include "tmkit/retrieval.hpp"
#include "tmkit/templates.hpp"

// Similarity-gated demonstration routing: when the best TM hit scores below
// the threshold, the demonstration becomes (query source, external NMT
// hypothesis) instead of the TM pair. The comparison is strictly less-than,
// so threshold 0 never routes and threshold 1 routes everything except
// exact matches.

namespace tmkit::routing {

// Pre-computed hypotheses keyed by test-sentence id; this toolkit never
// runs an NMT system itself.
using NmtHypothesisTable = std::map<int, std::string>;

inline NmtHypothesisTable load_hypotheses(const std::filesystem::path& path) {
  NmtHypothesisTable table;
  jsonl::for_each_record(path, [&](const jsonl::ordered_json& obj, size_t lineno) {
    auto ctx = [&] { return path.string() + ":" + std::to_string(lineno); };
    if (!obj.contains("id") || !obj["id"].is_number_integer() ||
        !obj.contains("hypothesis") || !obj["hypothesis"].is_string()) {
      throw std::runtime_error(ctx() + ": record needs integer 'id' and string 'hypothesis'");
    }
    int id = obj["id"].get<int>();
    if (!table.emplace(id, obj["hypothesis"].get<std::string>()).second) {
      throw std::runtime_error(ctx() + ": duplicate hypothesis id " + std::to_string(id));
    }
  });
  return table;
}

struct RoutingPolicy {
  fms::Rational threshold;  // in [0, 1]; 0 keeps every TM demonstration
  NmtHypothesisTable hypotheses;
};

inline RoutingPolicy make_policy(std::string_view threshold_decimal,
                                 NmtHypothesisTable hypotheses = {}) {
  fms::Rational t = fms::parse_decimal(threshold_decimal);
  if (t.num > t.den) {
    throw std::invalid_argument("threshold outside [0,1]: " + std::string(threshold_decimal));
  }
  return {t, std::move(hypotheses)};
}

enum class RouteChoice { kTm, kNmt };

struct RouteEntry {
  int query_id = 0;
  RouteChoice choice = RouteChoice::kTm;
  fms::Score tm_fms;  // score of the top TM hit, kept even when routed away
  templates::Demonstration demo;
};

struct RoutingDecision {
  std::vector<RouteEntry> entries;
  size_t tm_count = 0;
  size_t total = 0;
  // Histogram of the TM scores of routed-out queries; absent when nothing
  // was routed. Both proportions are reported since either reading of the
  // trade-off curve may be wanted.
  std::optional<retrieval::FmsHistogram> routed_out;

  double tm_proportion() const {
    return total == 0 ? 0.0 : static_cast<double>(tm_count) / static_cast<double>(total);
  }
  double nmt_proportion() const {
    return total == 0 ? 0.0 : static_cast<double>(total - tm_count) / static_cast<double>(total);
  }
};

// One query, one top hit. Missing hypotheses only matter for queries that
// actually route.
inline RouteEntry route(const corpus::SentencePair& query,
                        const retrieval::RetrievalHit& top_hit,
                        const RoutingPolicy& policy) {
  RouteEntry entry;
  entry.query_id = query.id;
  entry.tm_fms = top_hit.fms;
  if (fms::below(top_hit.fms, policy.threshold)) {
    auto it = policy.hypotheses.find(query.id);
    if (it == policy.hypotheses.end()) {
      throw std::runtime_error("missing NMT hypothesis for routed query id " +
                               std::to_string(query.id));
    }
    entry.choice = RouteChoice::kNmt;
    entry.demo = {query.source, it->second, templates::Provenance::kNmt, std::nullopt};
  } else {
    entry.choice = RouteChoice::kTm;
    entry.demo = {top_hit.entry.source, top_hit.entry.target, templates::Provenance::kTm,
                  top_hit.fms};
  }
  return entry;
}

// Positionally aligned queries and top hits (hit i answers query i).
inline RoutingDecision route_batch(const std::vector<corpus::SentencePair>& queries,
                                   const std::vector<retrieval::RetrievalHit>& top_hits,
                                   const RoutingPolicy& policy) {
  if (queries.size() != top_hits.size()) {
    throw std::invalid_argument("queries and hits are misaligned: " +
                                std::to_string(queries.size()) + " vs " +
                                std::to_string(top_hits.size()));
  }
  RoutingDecision decision;
  decision.total = queries.size();
  std::vector<fms::Score> routed_scores;
  for (size_t i = 0; i < queries.size(); ++i) {
    RouteEntry entry = route(queries[i], top_hits[i], policy);
    if (entry.choice == RouteChoice::kTm) {
      ++decision.tm_count;
    } else {
      routed_scores.push_back(entry.tm_fms);
    }
    decision.entries.push_back(std::move(entry));
  }
  if (!routed_scores.empty()) {
    decision.routed_out = retrieval::fms_histogram(routed_scores);
  }
  return decision;
}

}  // namespace tmkit::routing
