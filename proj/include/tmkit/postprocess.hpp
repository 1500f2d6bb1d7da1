#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tmkit/detail/nonbreaking_prefixes.hpp"
#include "tmkit/jsonl.hpp"
#include "tmkit/text.hpp"

// Completion cleanup and scoring-side tokenization. The tokenizer follows
// the classic Perl word tokenizer step for step (padding, special-character
// separation, multi-dot protection, comma and apostrophe rules, the
// nonbreaking-prefix period rule) so that scores are comparable with
// conventionally tokenized references. Entity escaping of the output is
// deliberately not performed.

namespace tmkit::postprocess {

namespace detail {

inline bool is_strip_char(char c) {
  return c == '"' || c == '\n' || c == '\r' || c == '[' || c == ']' || c == ' ' ||
         c == '\t';
}

inline std::string clean_pass(std::string_view in) {
  // 1. peel the strip set off both edges
  size_t lo = 0, hi = in.size();
  while (lo < hi && is_strip_char(in[lo])) ++lo;
  while (hi > lo && is_strip_char(in[hi - 1])) --hi;
  std::string cur = text::unescape_entities(in.substr(lo, hi - lo));  // 2. entities
  // 3. internal newline runs become one space
  std::string collapsed;
  collapsed.reserve(cur.size());
  size_t i = 0;
  while (i < cur.size()) {
    if (cur[i] == '\n' || cur[i] == '\r') {
      while (i < cur.size() && (cur[i] == '\n' || cur[i] == '\r')) ++i;
      collapsed.push_back(' ');
    } else {
      collapsed.push_back(cur[i++]);
    }
  }
  // 4. trim ordinary whitespace
  size_t a = collapsed.find_first_not_of(" \t");
  size_t b = collapsed.find_last_not_of(" \t");
  if (a == std::string::npos) return "";
  return collapsed.substr(a, b - a + 1);
}

}  // namespace detail

// Strips the completion's decoration: edge characters from {" \n \r [ ] space
// tab}, the entity table, and internal newline runs. The pass is iterated to
// a fixpoint because unescaping can expose new strippable edges, and
// idempotence is part of the contract.
inline std::string clean_output(std::string_view raw) {
  std::string cur(raw);
  for (;;) {
    std::string next = detail::clean_pass(cur);
    if (next == cur) return cur;
    cur = std::move(next);
  }
}

namespace detail {

using U32 = std::u32string;

inline bool contains(const U32& s, const U32& pat) { return s.find(pat) != U32::npos; }

// Non-overlapping global replace, resuming after each replacement.
inline U32 replace_all(const U32& s, const U32& pat, const U32& rep) {
  U32 out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    if (s.compare(i, pat.size(), pat) == 0) {
      out += rep;
      i += pat.size();
    } else {
      out.push_back(s[i++]);
    }
  }
  return out;
}

// s/(L)M/$1<rep>/g with single-character classes, Perl /g semantics (the
// matched left character cannot anchor a second match).
template <class LeftPred>
U32 subst_left_mid(const U32& s, LeftPred left_ok, char32_t mid, const U32& rep) {
  U32 out;
  out.reserve(s.size() + 8);
  size_t i = 0;
  while (i < s.size()) {
    if (i + 1 < s.size() && left_ok(s[i]) && s[i + 1] == mid) {
      out.push_back(s[i]);
      out += rep;
      i += 2;
    } else {
      out.push_back(s[i++]);
    }
  }
  return out;
}

// s/M(R)/<rep>$1/g
template <class RightPred>
U32 subst_mid_right(const U32& s, char32_t mid, RightPred right_ok, const U32& rep) {
  U32 out;
  out.reserve(s.size() + 8);
  size_t i = 0;
  while (i < s.size()) {
    if (i + 1 < s.size() && s[i] == mid && right_ok(s[i + 1])) {
      out += rep;
      out.push_back(s[i + 1]);
      i += 2;
    } else {
      out.push_back(s[i++]);
    }
  }
  return out;
}

// s/(L)M(R)/$1<ins_l>M<ins_r>$2/g
template <class LeftPred, class RightPred>
U32 subst_around(const U32& s, LeftPred left_ok, char32_t mid, RightPred right_ok,
                 bool space_left, bool space_right) {
  U32 out;
  out.reserve(s.size() + 8);
  size_t i = 0;
  while (i < s.size()) {
    if (i + 2 < s.size() && left_ok(s[i]) && s[i + 1] == mid && right_ok(s[i + 2])) {
      out.push_back(s[i]);
      if (space_left) out.push_back(U' ');
      out.push_back(mid);
      if (space_right) out.push_back(U' ');
      out.push_back(s[i + 2]);
      i += 3;
    } else {
      out.push_back(s[i++]);
    }
  }
  return out;
}

inline bool alpha(char32_t c) { return text::is_letter(c); }
inline bool not_alpha(char32_t c) { return !text::is_letter(c); }
inline bool digit(char32_t c) { return text::is_digit(c); }
inline bool not_digit(char32_t c) { return !text::is_digit(c); }
inline bool not_alpha_not_digit(char32_t c) {
  return !text::is_letter(c) && !text::is_digit(c);
}

}  // namespace detail

class MosesTokenizer {
 public:
  // prefix -> 1 (always nonbreaking) or 2 (nonbreaking before numbers only)
  using PrefixMap = std::map<std::string, int>;

  explicit MosesTokenizer(std::string lang) : lang_(std::move(lang)) {
    const auto& lists = detail::builtin_prefix_lists();
    auto it = lists.find(lang_);
    if (it != lists.end()) prefixes_ = parse_prefix_list(it->second);
    // unknown language: no abbreviation protection, everything else applies
  }

  MosesTokenizer(std::string lang, const std::filesystem::path& prefix_file)
      : lang_(std::move(lang)), prefixes_(parse_prefix_list(jsonl::read_file(prefix_file))) {}

  static PrefixMap parse_prefix_list(std::string_view content) {
    PrefixMap map;
    size_t start = 0;
    while (start <= content.size()) {
      size_t end = content.find('\n', start);
      if (end == std::string_view::npos) end = content.size();
      std::string_view line = content.substr(start, end - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (!line.empty() && line.front() != '#') {
        size_t marker = line.find("#NUMERIC_ONLY#");
        if (marker != std::string_view::npos) {
          size_t stop = marker;
          while (stop > 0 && (line[stop - 1] == ' ' || line[stop - 1] == '\t')) --stop;
          if (stop > 0) map[std::string(line.substr(0, stop))] = 2;
        } else {
          map[std::string(line)] = 1;
        }
      }
      if (end == content.size()) break;
      start = end + 1;
    }
    return map;
  }

  std::vector<std::string> tokenize(std::string_view line) const {
    detail::U32 text = run(text::decode_utf8(line));
    std::vector<std::string> tokens;
    std::string cur;
    for (char32_t c : text) {
      if (c == U' ') {
        if (!cur.empty()) {
          tokens.push_back(std::move(cur));
          cur.clear();
        }
      } else {
        text::append_utf8(cur, c);
      }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
  }

  std::string tokenize_line(std::string_view line) const {
    std::string out;
    for (const auto& tok : tokenize(line)) {
      if (!out.empty()) out.push_back(' ');
      out += tok;
    }
    return out;
  }

 private:
  detail::U32 run(detail::U32 t) const {
    using namespace detail;
    // pad and collapse whitespace; drop control characters
    t = U" " + t + U" ";
    U32 collapsed;
    collapsed.reserve(t.size());
    for (size_t i = 0; i < t.size();) {
      if (text::is_space(t[i])) {
        while (i < t.size() && text::is_space(t[i])) ++i;
        collapsed.push_back(U' ');
      } else {
        collapsed.push_back(t[i++]);
      }
    }
    t.clear();
    for (char32_t c : collapsed) {
      if (c <= 0x1F) continue;
      t.push_back(c);
    }

    // every han character becomes its own token (segmenter stand-in)
    U32 spaced;
    spaced.reserve(t.size());
    for (char32_t c : t) {
      if (text::is_han(c)) {
        spaced.push_back(U' ');
        spaced.push_back(c);
        spaced.push_back(U' ');
      } else {
        spaced.push_back(c);
      }
    }
    t = std::move(spaced);

    // pad everything outside [alnum, space, . ' ` , -]
    U32 sep;
    sep.reserve(t.size() * 2);
    for (char32_t c : t) {
      bool keep = text::is_alnum(c) || text::is_space(c) || c == U'.' || c == U'\'' ||
                  c == U'`' || c == U',' || c == U'-';
      if (keep) {
        sep.push_back(c);
      } else {
        sep.push_back(U' ');
        sep.push_back(c);
        sep.push_back(U' ');
      }
    }
    t = std::move(sep);

    t = protect_multidots(t);

    // commas split unless both neighbors are digits
    t = subst_left_mid(t, not_digit, U',', U" , ");
    t = subst_mid_right(t, U',', not_digit, U" , ");

    t = apostrophes(t);

    t = period_rule(t);

    // squeeze spaces, trim
    U32 clean;
    clean.reserve(t.size());
    for (size_t i = 0; i < t.size();) {
      if (t[i] == U' ') {
        while (i < t.size() && t[i] == U' ') ++i;
        clean.push_back(U' ');
      } else {
        clean.push_back(t[i++]);
      }
    }
    if (!clean.empty() && clean.front() == U' ') clean.erase(clean.begin());
    if (!clean.empty() && clean.back() == U' ') clean.pop_back();
    t = std::move(clean);

    // terminal ".'" missed by the word rule
    if (t.size() >= 2 && t[t.size() - 2] == U'.' && t.back() == U'\'') {
      t.replace(t.size() - 2, 2, U" . ' ");
    }

    return restore_multidots(t);
  }

  static detail::U32 protect_multidots(const detail::U32& in) {
    using namespace detail;
    // ".." and longer runs hide behind DOTMULTI markers so later rules see
    // no dots; restore_multidots reverses this exactly.
    U32 t;
    t.reserve(in.size() + 16);
    for (size_t i = 0; i < in.size();) {
      if (in[i] == U'.' && i + 1 < in.size() && in[i + 1] == U'.') {
        size_t j = i;
        while (j < in.size() && in[j] == U'.') ++j;
        t += U" DOTMULTI";
        t.append(in, i + 1, j - i - 1);
        i = j;
      } else {
        t.push_back(in[i++]);
      }
    }
    while (contains(t, U"DOTMULTI.")) {
      t = subst_left_mid_literal(t, U"DOTMULTI.", U"DOTDOTMULTI ");
      t = replace_all(t, U"DOTMULTI.", U"DOTDOTMULTI");
    }
    return t;
  }

  // s/DOTMULTI\.([^.])/DOTDOTMULTI $1/g
  static detail::U32 subst_left_mid_literal(const detail::U32& s, const detail::U32& pat,
                                            const detail::U32& rep) {
    detail::U32 out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
      if (i + pat.size() < s.size() && s.compare(i, pat.size(), pat) == 0 &&
          s[i + pat.size()] != U'.') {
        out += rep;
        out.push_back(s[i + pat.size()]);
        i += pat.size() + 1;
      } else {
        out.push_back(s[i++]);
      }
    }
    return out;
  }

  static detail::U32 restore_multidots(detail::U32 t) {
    using namespace detail;
    while (contains(t, U"DOTDOTMULTI")) {
      t = replace_all(t, U"DOTDOTMULTI", U"DOTMULTI.");
    }
    return replace_all(t, U"DOTMULTI", U".");
  }

  detail::U32 apostrophes(const detail::U32& t) const {
    using namespace detail;
    if (lang_ == "en") {
      // contractions split right: "it's" -> "it 's"
      U32 s = subst_around(t, not_alpha, U'\'', not_alpha, true, true);
      s = subst_around(s, not_alpha_not_digit, U'\'', alpha, true, true);
      s = subst_around(s, alpha, U'\'', not_alpha, true, true);
      s = subst_around(s, alpha, U'\'', alpha, true, false);
      // "1990's"
      s = subst_around(s, digit, U'\'', [](char32_t c) { return c == U's'; }, true, false);
      return s;
    }
    if (lang_ == "fr" || lang_ == "it" || lang_ == "ga" || lang_ == "ca") {
      // contractions split left: "l'avion" -> "l' avion"
      U32 s = subst_around(t, not_alpha, U'\'', not_alpha, true, true);
      s = subst_around(s, not_alpha, U'\'', alpha, true, true);
      s = subst_around(s, alpha, U'\'', not_alpha, true, true);
      s = subst_around(s, alpha, U'\'', alpha, false, true);
      return s;
    }
    return replace_all(t, U"'", U" ' ");
  }

  detail::U32 period_rule(const detail::U32& t) const {
    using namespace detail;
    // split on single spaces, keeping interior empties, dropping trailing
    std::vector<U32> words;
    size_t start = 0;
    for (size_t i = 0; i <= t.size(); ++i) {
      if (i == t.size() || t[i] == U' ') {
        words.emplace_back(t.substr(start, i - start));
        start = i + 1;
      }
    }
    while (!words.empty() && words.back().empty()) words.pop_back();

    U32 out;
    for (size_t i = 0; i < words.size(); ++i) {
      U32 word = words[i];
      if (word.size() >= 2 && word.back() == U'.') {
        U32 pre = word.substr(0, word.size() - 1);
        bool has_dot = contains(pre, U".");
        bool has_alpha = false;
        for (char32_t c : pre) has_alpha = has_alpha || text::is_letter(c);
        std::string pre8 = text::encode_utf8(pre);
        auto pf = prefixes_.find(pre8);
        int pclass = pf == prefixes_.end() ? 0 : pf->second;
        bool next_lower = i + 1 < words.size() && !words[i + 1].empty() &&
                          text::is_lower(words[i + 1][0]);
        bool next_digit = i + 1 < words.size() && !words[i + 1].empty() &&
                          text::is_digit(words[i + 1][0]);
        if ((has_dot && has_alpha) || pclass == 1 || next_lower) {
          // keep attached
        } else if (pclass == 2 && next_digit) {
          // numeric-only prefix, keep attached
        } else {
          word = pre + U" .";
        }
      }
      out += word;
      out.push_back(U' ');
    }
    return out;
  }

  std::string lang_;
  PrefixMap prefixes_;
};

// Cached per-language tokenizers; tokenize() itself is const and
// thread-safe, the cache is guarded.
inline std::vector<std::string> score_tokenize(std::string_view input,
                                               const std::string& lang) {
  static std::mutex mu;
  static std::map<std::string, MosesTokenizer> cache;
  const MosesTokenizer* tok;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(lang);
    if (it == cache.end()) it = cache.emplace(lang, MosesTokenizer(lang)).first;
    tok = &it->second;
  }
  return tok->tokenize(input);
}

}  // namespace tmkit::postprocess
