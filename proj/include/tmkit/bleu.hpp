#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "tmkit/fms.hpp"
#include "tmkit/postprocess.hpp"
#include "tmkit/text.hpp"

// Corpus-level BLEU with the conventional reference-script semantics:
// clipped modified n-gram precisions up to 4, uniform geometric mean,
// brevity penalty exp(1-r/h) when the hypothesis is shorter, no smoothing
// (any zero precision zeroes the score), single reference.

namespace tmkit::bleu {

struct BleuReport {
  std::array<long long, 4> correct{};  // clipped n-gram matches, n=1..4
  std::array<long long, 4> total{};    // hypothesis n-gram counts
  long long hyp_len = 0;
  long long ref_len = 0;
  std::array<double, 4> precisions{};  // percentages
  double brevity_penalty = 1.0;
  double ratio = 0.0;
  double bleu = 0.0;  // percentage
};

namespace detail {

// n-gram key "n w1 w2 ..."; tokens contain no spaces, so this is unambiguous
inline void count_ngrams(const std::vector<std::string>& words,
                         std::unordered_map<std::string, long long>& out, int n) {
  if (static_cast<int>(words.size()) < n) return;
  for (size_t start = 0; start + n <= words.size(); ++start) {
    std::string key = std::to_string(n);
    for (int w = 0; w < n; ++w) {
      key.push_back(' ');
      key += words[start + w];
    }
    ++out[key];
  }
}

}  // namespace detail

inline BleuReport corpus_bleu(const std::vector<std::string>& hyp_lines,
                              const std::vector<std::string>& ref_lines,
                              bool lowercase = false) {
  if (hyp_lines.size() != ref_lines.size())
    throw std::invalid_argument("corpus_bleu: hypothesis and reference line counts differ (" +
                                std::to_string(hyp_lines.size()) + " vs " +
                                std::to_string(ref_lines.size()) + ")");
  if (hyp_lines.empty()) throw std::invalid_argument("corpus_bleu: empty corpus");

  BleuReport r;
  for (size_t s = 0; s < hyp_lines.size(); ++s) {
    std::string h = lowercase ? text::lowercase_utf8(hyp_lines[s]) : hyp_lines[s];
    std::string g = lowercase ? text::lowercase_utf8(ref_lines[s]) : ref_lines[s];
    std::vector<std::string> hw = text::split_whitespace(h);
    std::vector<std::string> rw = text::split_whitespace(g);
    r.hyp_len += static_cast<long long>(hw.size());
    r.ref_len += static_cast<long long>(rw.size());

    std::unordered_map<std::string, long long> ref_ngrams;
    for (int n = 1; n <= 4; ++n) detail::count_ngrams(rw, ref_ngrams, n);
    for (int n = 1; n <= 4; ++n) {
      std::unordered_map<std::string, long long> hyp_ngrams;
      detail::count_ngrams(hw, hyp_ngrams, n);
      for (const auto& [ngram, cnt] : hyp_ngrams) {
        r.total[n - 1] += cnt;
        auto it = ref_ngrams.find(ngram);
        if (it != ref_ngrams.end()) r.correct[n - 1] += std::min(cnt, it->second);
      }
    }
  }

  if (r.ref_len == 0) throw std::invalid_argument("corpus_bleu: reference has no tokens");
  if (r.hyp_len == 0) throw std::invalid_argument("corpus_bleu: hypothesis has no tokens");

  bool zero = false;
  std::array<double, 4> p{};
  for (int n = 0; n < 4; ++n) {
    p[n] = r.total[n] ? static_cast<double>(r.correct[n]) / static_cast<double>(r.total[n])
                      : 0.0;
    r.precisions[n] = 100.0 * p[n];
    zero = zero || p[n] == 0.0;
  }
  if (r.hyp_len < r.ref_len)
    r.brevity_penalty =
        std::exp(1.0 - static_cast<double>(r.ref_len) / static_cast<double>(r.hyp_len));
  r.ratio = static_cast<double>(r.hyp_len) / static_cast<double>(r.ref_len);
  r.bleu = zero ? 0.0
                : 100.0 * r.brevity_penalty *
                      std::exp((std::log(p[0]) + std::log(p[1]) + std::log(p[2]) +
                                std::log(p[3])) /
                               4.0);
  return r;
}

inline std::string format_multi_bleu_line(const BleuReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "BLEU = %.2f, %.1f/%.1f/%.1f/%.1f (BP=%.3f, ratio=%.3f, hyp_len=%lld, "
                "ref_len=%lld)",
                r.bleu, r.precisions[0], r.precisions[1], r.precisions[2], r.precisions[3],
                r.brevity_penalty, r.ratio, r.hyp_len, r.ref_len);
  return buf;
}

// Tokenizes raw lines for scoring and computes BLEU. Lines already in
// token-per-space form can skip tokenization.
inline BleuReport score_corpus(const std::vector<std::string>& hyp_lines,
                               const std::vector<std::string>& ref_lines,
                               const std::string& lang, bool lowercase = false,
                               bool already_tokenized = false) {
  if (already_tokenized) return corpus_bleu(hyp_lines, ref_lines, lowercase);
  postprocess::MosesTokenizer tok(lang);
  auto join = [&tok](const std::vector<std::string>& lines) {
    std::vector<std::string> out;
    out.reserve(lines.size());
    for (const auto& line : lines) out.push_back(tok.tokenize_line(line));
    return out;
  };
  return corpus_bleu(join(hyp_lines), join(ref_lines), lowercase);
}

struct BucketBleu {
  std::array<std::optional<BleuReport>, fms::kBucketCount> reports;
  std::array<long long, fms::kBucketCount> counts{};
};

// Groups sentence pairs by the retrieval-score bucket of their best match
// and scores each group separately. Degenerate groups (no tokens on either
// side) keep their count but get no report.
inline BucketBleu bleu_by_bucket(const std::vector<std::string>& hyp_lines,
                                 const std::vector<std::string>& ref_lines,
                                 const std::vector<fms::Score>& scores,
                                 bool lowercase = false) {
  if (hyp_lines.size() != ref_lines.size() || hyp_lines.size() != scores.size())
    throw std::invalid_argument("bleu_by_bucket: input sizes differ");
  std::array<std::vector<std::string>, fms::kBucketCount> hyp_groups, ref_groups;
  BucketBleu out;
  for (size_t i = 0; i < scores.size(); ++i) {
    int b = fms::bucket_index(scores[i]);
    hyp_groups[b].push_back(hyp_lines[i]);
    ref_groups[b].push_back(ref_lines[i]);
    ++out.counts[b];
  }
  for (int b = 0; b < fms::kBucketCount; ++b) {
    if (hyp_groups[b].empty()) continue;
    try {
      out.reports[b] = corpus_bleu(hyp_groups[b], ref_groups[b], lowercase);
    } catch (const std::invalid_argument&) {
      // all-empty hypotheses or references in this bucket: count only
    }
  }
  return out;
}

}  // namespace tmkit::bleu
