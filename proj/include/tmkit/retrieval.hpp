#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tmkit/corpus.hpp"
#include "tmkit/fms.hpp"
#include "tmkit/jsonl.hpp"
#include "tmkit/templates.hpp"
#include "tmkit/text.hpp"

// Two-stage fuzzy-match retrieval: an inverted index proposes up to `limit`
// candidates by IDF-weighted token overlap, then every candidate is reranked
// by the exact fuzzy match score 1 - LD/max_len over match tokens. When the
// database fits within the candidate limit the first stage is exhaustive, so
// results are exactly the brute-force ranking.

namespace tmkit::retrieval {

inline constexpr int kDefaultCandidateLimit = 500;
inline constexpr int kDefaultK = 5;
inline constexpr int kIndexFormatVersion = 1;

using MatchTokenSeq = std::vector<std::string>;

namespace detail {

// A token is a number if removing digit-group separators and signs leaves
// only digits: "12", "1,000.5", "-3" all count.
inline bool is_number_token(const std::u32string& tok) {
  bool digit_seen = false;
  for (char32_t c : tok) {
    if (c == U',' || c == U'.' || c == U'-' || c == 0x2212) continue;
    if (!text::is_digit(c)) return false;
    digit_seen = true;
  }
  return digit_seen;
}

}  // namespace detail

// Word tokens for matching: split on whitespace, strip punctuation off both
// ends, drop tokens that are then empty or numeric, lowercase the rest.
inline MatchTokenSeq match_tokenize(std::string_view input) {
  MatchTokenSeq out;
  std::u32string decoded = text::decode_utf8(input);
  size_t i = 0;
  while (i < decoded.size()) {
    while (i < decoded.size() && text::is_space(decoded[i])) ++i;
    size_t start = i;
    while (i < decoded.size() && !text::is_space(decoded[i])) ++i;
    if (start == i) continue;
    size_t lo = start, hi = i;
    while (lo < hi && !text::is_alnum(decoded[lo])) ++lo;
    while (hi > lo && !text::is_alnum(decoded[hi - 1])) --hi;
    if (lo == hi) continue;
    std::u32string tok = decoded.substr(lo, hi - lo);
    if (detail::is_number_token(tok)) continue;
    for (auto& c : tok) c = text::fold_case(c);
    out.push_back(text::encode_utf8(tok));
  }
  return out;
}

// Unit-cost edit distance over token sequences, two-row DP.
inline int levenshtein(const MatchTokenSeq& a, const MatchTokenSeq& b) {
  const size_t la = a.size(), lb = b.size();
  if (la == 0) return static_cast<int>(lb);
  if (lb == 0) return static_cast<int>(la);
  std::vector<int> prev(lb + 1), cur(lb + 1);
  for (size_t j = 0; j <= lb; ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= la; ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= lb; ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[lb];
}

// Exact when the distance is <= bound; otherwise returns bound + 1. The
// abort fires when a whole DP row exceeds the bound, which is safe because
// row minima never decrease.
inline int levenshtein_bounded(const MatchTokenSeq& a, const MatchTokenSeq& b, int bound) {
  const size_t la = a.size(), lb = b.size();
  if (static_cast<long long>(la > lb ? la - lb : lb - la) > bound) return bound + 1;
  if (la == 0) return static_cast<int>(lb);
  if (lb == 0) return static_cast<int>(la);
  std::vector<int> prev(lb + 1), cur(lb + 1);
  for (size_t j = 0; j <= lb; ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= la; ++i) {
    cur[0] = static_cast<int>(i);
    int row_min = cur[0];
    for (size_t j = 1; j <= lb; ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
      row_min = std::min(row_min, cur[j]);
    }
    if (row_min > bound) return bound + 1;
    std::swap(prev, cur);
  }
  return std::min(prev[lb], bound + 1);
}

inline fms::Score fms_score_tokens(const MatchTokenSeq& a, const MatchTokenSeq& b) {
  int max_len = static_cast<int>(std::max(a.size(), b.size()));
  return fms::Score::from_counts(levenshtein(a, b), max_len);
}

inline fms::Score fms_score(std::string_view x, std::string_view s) {
  return fms_score_tokens(match_tokenize(x), match_tokenize(s));
}

// Convenience overload: plain similarity value in [0, 1].
inline double fms(std::string_view x, std::string_view s) { return fms_score(x, s).value(); }

struct TmIndex {
  std::map<std::string, std::vector<int>> postings;  // token -> ascending entry ids
  std::map<int, MatchTokenSeq> entry_tokens;         // every db entry, even tokenless ones
  size_t doc_count = 0;
  uint64_t built_from = 0;  // fingerprint of the database it was built over

  friend bool operator==(const TmIndex&, const TmIndex&) = default;
};

inline TmIndex build_index(const std::vector<corpus::SentencePair>& db) {
  if (db.empty()) throw std::invalid_argument("cannot index an empty database");
  TmIndex index;
  index.doc_count = db.size();
  index.built_from = corpus::corpus_fingerprint(db);
  for (const auto& pair : db) {
    if (index.entry_tokens.count(pair.id)) {
      throw std::invalid_argument("duplicate id in database: " + std::to_string(pair.id));
    }
    index.entry_tokens[pair.id] = match_tokenize(pair.source);
  }
  for (const auto& [id, tokens] : index.entry_tokens) {
    std::set<std::string> uniq(tokens.begin(), tokens.end());
    for (const auto& tok : uniq) index.postings[tok].push_back(id);
  }
  return index;
}

// Candidate generation. Exhaustive whenever the database is no bigger than
// the limit; above that, entries are scored by summing ln(1 + N/df) over the
// query's unique indexed tokens and only overlapping entries can appear.
inline std::vector<int> candidates(const TmIndex& index, std::string_view query,
                                   int limit = kDefaultCandidateLimit) {
  if (limit < 1) throw std::invalid_argument("limit must be >= 1");
  if (index.doc_count <= static_cast<size_t>(limit)) {
    std::vector<int> all;
    all.reserve(index.entry_tokens.size());
    for (const auto& [id, _] : index.entry_tokens) all.push_back(id);
    return all;
  }
  MatchTokenSeq qtokens = match_tokenize(query);
  std::set<std::string> uniq(qtokens.begin(), qtokens.end());
  std::unordered_map<int, double> scores;
  for (const auto& tok : uniq) {
    auto it = index.postings.find(tok);
    if (it == index.postings.end()) continue;
    double w = std::log(1.0 + static_cast<double>(index.doc_count) /
                                  static_cast<double>(it->second.size()));
    for (int id : it->second) scores[id] += w;
  }
  std::vector<std::pair<int, double>> scored(scores.begin(), scores.end());
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (scored.size() > static_cast<size_t>(limit)) scored.resize(limit);
  std::vector<int> out;
  out.reserve(scored.size());
  for (const auto& [id, _] : scored) out.push_back(id);
  return out;
}

struct RetrievalHit {
  corpus::SentencePair entry;
  fms::Score fms;
  int rank = 0;  // 1-based, consecutive
};

// Binds an index to the database it was built from (fingerprints must
// agree) and serves reranked top-k queries. Immutable and safe to share
// across threads.
class TmSearcher {
 public:
  TmSearcher(const TmIndex& index, const std::vector<corpus::SentencePair>& db)
      : index_(&index), db_(&db) {
    if (corpus::corpus_fingerprint(db) != index.built_from) {
      throw std::runtime_error("checksum mismatch: index was not built from this database");
    }
    for (const auto& pair : db) by_id_.emplace(pair.id, &pair);
  }

  const std::vector<corpus::SentencePair>& db() const { return *db_; }
  const TmIndex& index() const { return *index_; }

  std::vector<int> candidate_ids(std::string_view query,
                                 int limit = kDefaultCandidateLimit) const {
    return candidates(*index_, query, limit);
  }

  std::vector<RetrievalHit> top_k(std::string_view query, int k,
                                  int limit = kDefaultCandidateLimit) const {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    MatchTokenSeq qtokens = match_tokenize(query);
    size_t want = std::min<size_t>(k, db_->size());

    std::vector<int> cand = candidates(*index_, query, limit);
    if (cand.size() < want) {
      // The scorer only proposes overlapping entries; pad with the smallest
      // unproposed ids so the contract "fewer than k only when the database
      // is smaller" holds even for overlap-free queries.
      std::set<int> have(cand.begin(), cand.end());
      for (const auto& [id, _] : index_->entry_tokens) {
        if (cand.size() >= want) break;
        if (have.insert(id).second) cand.push_back(id);
      }
    }

    struct Best {
      fms::Score score;
      int id;
    };
    auto better = [](const Best& a, const Best& b) {
      if (!fms::score_eq(a.score, b.score)) return fms::score_lt(b.score, a.score);
      return a.id < b.id;
    };
    std::set<Best, decltype(better)> best(better);

    for (int id : cand) {
      auto it = index_->entry_tokens.find(id);
      if (it == index_->entry_tokens.end()) {
        throw std::runtime_error("index references unknown id " + std::to_string(id));
      }
      const MatchTokenSeq& ctokens = it->second;
      int max_len = static_cast<int>(std::max(qtokens.size(), ctokens.size()));
      if (best.size() == want) {
        // Largest distance that could still tie the current k-th hit; cheap
        // screen before the DP, exactness preserved because ties are kept.
        const Best& worst = *best.rbegin();
        long long d_max_ll =
            (static_cast<long long>(max_len) * worst.score.length -
             worst.score.matched() * max_len) /
            worst.score.length;
        if (max_len == 0) d_max_ll = 0;
        int d_max = static_cast<int>(std::min<long long>(d_max_ll, max_len));
        int d = levenshtein_bounded(qtokens, ctokens, d_max);
        if (d > d_max) continue;
        Best cand_best{fms::Score::from_counts(d, max_len), id};
        if (better(cand_best, *best.rbegin())) {
          best.erase(std::prev(best.end()));
          best.insert(cand_best);
        }
      } else {
        int d = levenshtein(qtokens, ctokens);
        best.insert({fms::Score::from_counts(d, max_len), id});
      }
    }

    std::vector<RetrievalHit> hits;
    hits.reserve(best.size());
    int rank = 1;
    for (const auto& b : best) {
      auto db_it = by_id_.find(b.id);
      hits.push_back({*db_it->second, b.score, rank++});
    }
    return hits;
  }

 private:
  const TmIndex* index_;
  const std::vector<corpus::SentencePair>* db_;
  std::unordered_map<int, const corpus::SentencePair*> by_id_;
};

inline std::vector<RetrievalHit> retrieve_top_k(const TmIndex& index,
                                                const std::vector<corpus::SentencePair>& db,
                                                std::string_view query, int k,
                                                int limit = kDefaultCandidateLimit) {
  return TmSearcher(index, db).top_k(query, k, limit);
}

inline void save_index(const std::filesystem::path& path, const TmIndex& index) {
  jsonl::ordered_json obj;
  obj["format_version"] = kIndexFormatVersion;
  obj["built_from"] = hash::to_hex(index.built_from);
  obj["doc_count"] = index.doc_count;
  jsonl::ordered_json entries = jsonl::ordered_json::array();
  for (const auto& [id, tokens] : index.entry_tokens) {
    jsonl::ordered_json e;
    e["id"] = id;
    e["tokens"] = tokens;
    entries.push_back(std::move(e));
  }
  obj["entries"] = std::move(entries);
  jsonl::write_file(path, obj.dump() + "\n");
}

// Postings are rebuilt rather than stored; the build is deterministic, so
// round-trips compare equal.
inline TmIndex load_index(const std::filesystem::path& path) {
  jsonl::ordered_json obj = jsonl::ordered_json::parse(jsonl::read_file(path), nullptr, false);
  if (obj.is_discarded() || !obj.is_object() || !obj.contains("format_version")) {
    throw std::runtime_error(path.string() + ": not an index file");
  }
  if (obj["format_version"].get<int>() != kIndexFormatVersion) {
    throw std::runtime_error(path.string() + ": unsupported index format_version");
  }
  TmIndex index;
  index.built_from = hash::parse_hex(obj.at("built_from").get<std::string>());
  index.doc_count = obj.at("doc_count").get<size_t>();
  for (const auto& e : obj.at("entries")) {
    int id = e.at("id").get<int>();
    index.entry_tokens[id] = e.at("tokens").get<MatchTokenSeq>();
  }
  if (index.entry_tokens.size() != index.doc_count) {
    throw std::runtime_error(path.string() + ": doc_count disagrees with entries");
  }
  for (const auto& [id, tokens] : index.entry_tokens) {
    std::set<std::string> uniq(tokens.begin(), tokens.end());
    for (const auto& tok : uniq) index.postings[tok].push_back(id);
  }
  return index;
}

enum class SelectionStrategy { kTopFms, kRandomInDomain, kRandomOutDomain };

inline SelectionStrategy selection_from_name(std::string_view s) {
  if (s == "top-fms") return SelectionStrategy::kTopFms;
  if (s == "random-in-domain") return SelectionStrategy::kRandomInDomain;
  if (s == "random-out-domain") return SelectionStrategy::kRandomOutDomain;
  throw std::invalid_argument("unknown selection strategy: " + std::string(s));
}

inline std::string selection_name(SelectionStrategy s) {
  switch (s) {
    case SelectionStrategy::kTopFms: return "top-fms";
    case SelectionStrategy::kRandomInDomain: return "random-in-domain";
    case SelectionStrategy::kRandomOutDomain: return "random-out-domain";
  }
  throw std::logic_error("unreachable");
}

// Demonstration selection. top-fms yields hits in rank order (most similar
// first) with scores attached; the random strategies draw uniformly without
// replacement and carry no score.
inline std::vector<templates::Demonstration> select_demonstrations(
    SelectionStrategy strategy, int k, std::string_view query, const TmSearcher& searcher,
    const std::vector<corpus::SentencePair>* aux_pool, uint64_t seed) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  std::vector<templates::Demonstration> demos;
  switch (strategy) {
    case SelectionStrategy::kTopFms: {
      for (const auto& hit : searcher.top_k(query, k)) {
        demos.push_back({hit.entry.source, hit.entry.target,
                         templates::Provenance::kTm, hit.fms});
      }
      return demos;
    }
    case SelectionStrategy::kRandomInDomain:
    case SelectionStrategy::kRandomOutDomain: {
      const std::vector<corpus::SentencePair>* pool = &searcher.db();
      templates::Provenance prov = templates::Provenance::kRandomIn;
      if (strategy == SelectionStrategy::kRandomOutDomain) {
        if (!aux_pool) {
          throw std::invalid_argument("random-out-domain selection needs an auxiliary pool");
        }
        pool = aux_pool;
        prov = templates::Provenance::kRandomOut;
      }
      if (pool->size() < static_cast<size_t>(k)) {
        throw std::invalid_argument("selection pool smaller than k");
      }
      for (size_t i : rng::sample_indices(pool->size(), k, seed)) {
        demos.push_back({(*pool)[i].source, (*pool)[i].target, prov, std::nullopt});
      }
      return demos;
    }
  }
  throw std::logic_error("unreachable");
}

struct FmsHistogram {
  static constexpr std::array<double, fms::kBucketCount + 1> kEdges = {0.0, 0.2, 0.4,
                                                                       0.6, 0.8, 1.0};
  std::array<size_t, fms::kBucketCount> counts{};
  size_t total = 0;

  std::array<double, fms::kBucketCount> proportions() const {
    std::array<double, fms::kBucketCount> p{};
    for (int i = 0; i < fms::kBucketCount; ++i) {
      p[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
    }
    return p;
  }
};

inline FmsHistogram fms_histogram(const std::vector<fms::Score>& scores) {
  if (scores.empty()) throw std::invalid_argument("histogram of an empty score list");
  FmsHistogram h;
  h.total = scores.size();
  for (const auto& s : scores) ++h.counts[fms::bucket_index(s)];
  return h;
}

inline FmsHistogram fms_histogram(const std::vector<fms::Rational>& scores) {
  if (scores.empty()) throw std::invalid_argument("histogram of an empty score list");
  FmsHistogram h;
  h.total = scores.size();
  for (const auto& s : scores) ++h.counts[fms::bucket_index(s)];
  return h;
}

}  // namespace tmkit::retrieval
