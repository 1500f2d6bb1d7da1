#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tmkit/corpus.hpp"
#include "tmkit/fms.hpp"
#include "tmkit/jsonl.hpp"

// Prompt catalog and renderer. Patterns are data: a pattern may use the
// slots {SRC_LANG} {TGT_LANG} {QUERY} and one {DEMOS} region; the demo block
// may use {SRC_LANG} {TGT_LANG} {DEMO_SRC} {DEMO_TGT}. "{{" and "}}" are
// literal braces. The demo block is repeated once per demonstration and the
// copies are joined with the template's joiner, which generalizes the
// catalog's one-shot forms to any k.

namespace tmkit::templates {

enum class Provenance { kTm, kNmt, kRandomIn, kRandomOut };

inline std::string provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kTm: return "tm";
    case Provenance::kNmt: return "nmt";
    case Provenance::kRandomIn: return "random-in";
    case Provenance::kRandomOut: return "random-out";
  }
  throw std::logic_error("unreachable");
}

inline Provenance provenance_from_name(std::string_view s) {
  if (s == "tm") return Provenance::kTm;
  if (s == "nmt") return Provenance::kNmt;
  if (s == "random-in") return Provenance::kRandomIn;
  if (s == "random-out") return Provenance::kRandomOut;
  throw std::invalid_argument("unknown provenance: " + std::string(s));
}

struct Demonstration {
  std::string source;
  std::string target;
  Provenance provenance = Provenance::kTm;
  std::optional<fms::Score> fms;  // present iff provenance == kTm

  friend bool operator==(const Demonstration& a, const Demonstration& b) {
    bool fms_eq = a.fms.has_value() == b.fms.has_value() &&
                  (!a.fms || (a.fms->distance == b.fms->distance &&
                              a.fms->length == b.fms->length));
    return a.source == b.source && a.target == b.target &&
           a.provenance == b.provenance && fms_eq;
  }
};

enum class Style { kInstruction, kCode };

struct PromptTemplate {
  int id = 0;          // catalog numbering, 1..20
  Style style = Style::kCode;
  bool with_tm = true;
  std::string pattern;
  std::string demo_block;  // empty for zero-shot templates
  std::string joiner;
};

inline constexpr int kDefaultTemplateId = 17;      // code style, with demonstrations
inline constexpr int kDefaultZeroShotTemplateId = 18;
inline constexpr int kDefaultInstructionTemplateId = 1;
inline constexpr int kDefaultInstructionZeroShotTemplateId = 2;

struct PromptRequest {
  std::string rendered;
  int template_id = 0;
  corpus::LangPair lang;
  int query_id = -1;  // test-set id when known; -1 for ad-hoc queries
  std::string query;
  std::vector<Demonstration> demos;
  std::vector<std::string> warnings;

  size_t k() const { return demos.size(); }
};

// The 20 built-in templates. Ids, styles and wording follow the published
// catalog; the conjunction templates (1, 3, 5) extend to k > 1 by joining
// their condition clauses with " and ".
inline const std::vector<PromptTemplate>& catalog() {
  static const std::vector<PromptTemplate> kCatalog = {
      {1, Style::kInstruction, true,
       "If {DEMOS} then what is the translation of \"{QUERY}\" from {SRC_LANG} to "
       "{TGT_LANG}? Only translation results are required.",
       "the translation of \"{DEMO_SRC}\" from {SRC_LANG} to {TGT_LANG} is \"{DEMO_TGT}\"",
       " and "},
      {2, Style::kInstruction, false,
       "What is the translation of \"{QUERY}\" from {SRC_LANG} to {TGT_LANG}? Only "
       "translation results are required.",
       "", ""},
      {3, Style::kInstruction, true,
       "If {DEMOS} then what is the translation of \"{QUERY}\" should be if translated "
       "into {TGT_LANG}? Only translation results are required.",
       "\"{DEMO_SRC}\" translated into {TGT_LANG} is \"{DEMO_TGT}\"", " and "},
      {4, Style::kInstruction, false,
       "What is the translation of \"{QUERY}\" should be if translated into {TGT_LANG}? "
       "Only translation results are required.",
       "", ""},
      {5, Style::kInstruction, true,
       "If {DEMOS} then what is the translation of [{QUERY}] should be if translated "
       "into {TGT_LANG}? Only translation results are required.",
       "[{DEMO_SRC}] translated into {TGT_LANG} is [{DEMO_TGT}]", " and "},
      {6, Style::kCode, true,
       "Translate {SRC_LANG} to {TGT_LANG}.\n{DEMOS}\n[{SRC_LANG}]: [{QUERY}]\n[{TGT_LANG}]:",
       "[{SRC_LANG}]: [{DEMO_SRC}]\n[{TGT_LANG}]: [{DEMO_TGT}]", "\n"},
      {7, Style::kCode, true,
       "Translate {SRC_LANG} to {TGT_LANG}.\n{DEMOS}\n[{SRC_LANG}]=[{QUERY}]\n[{TGT_LANG}]=",
       "[{SRC_LANG}]=[{DEMO_SRC}]\n[{TGT_LANG}]=[{DEMO_TGT}]", "\n"},
      {8, Style::kCode, true,
       "Translate {SRC_LANG} to {TGT_LANG}. {DEMOS} [{SRC_LANG}]=[{QUERY}] [{TGT_LANG}]=",
       "[{SRC_LANG}]=[{DEMO_SRC}] [{TGT_LANG}]=[{DEMO_TGT}]", " "},
      {9, Style::kCode, true,
       "Translate {SRC_LANG} to {TGT_LANG}.\n{DEMOS}\n[{SRC_LANG}]=[{QUERY}] [{TGT_LANG}]=",
       "[{SRC_LANG}]=[{DEMO_SRC}] [{TGT_LANG}]=[{DEMO_TGT}]", "\n"},
      {10, Style::kCode, true,
       "{DEMOS} if {SRC_LANG} = [{QUERY}] then {TGT_LANG} =",
       "if {SRC_LANG} = [{DEMO_SRC}] then {TGT_LANG} = [{DEMO_TGT}];", " "},
      {11, Style::kCode, true,
       "{DEMOS} {SRC_LANG}=\"{QUERY}\" {TGT_LANG}=",
       "{SRC_LANG}=\"{DEMO_SRC}\" {TGT_LANG}=\"{DEMO_TGT}\"", " "},
      {12, Style::kCode, true,
       "{DEMOS} {SRC_LANG}=[{QUERY}] {TGT_LANG}=",
       "{SRC_LANG}=[{DEMO_SRC}] {TGT_LANG}=[{DEMO_TGT}]", " "},
      {13, Style::kCode, true,
       "{DEMOS} [{SRC_LANG}] {QUERY} [{TGT_LANG}]",
       "[{SRC_LANG}] {DEMO_SRC} [{TGT_LANG}] {DEMO_TGT}", " "},
      {14, Style::kCode, true,
       "{DEMOS} [{SRC_LANG}]: [{QUERY}] [{TGT_LANG}]:",
       "[{SRC_LANG}]: [{DEMO_SRC}] [{TGT_LANG}]: [{DEMO_TGT}]", " "},
      {15, Style::kCode, false, "[{SRC_LANG}]: [{QUERY}] [{TGT_LANG}]:", "", ""},
      {16, Style::kCode, true,
       "{DEMOS} [{SRC_LANG}] = [{QUERY}] [{TGT_LANG}] =",
       "[{SRC_LANG}] = [{DEMO_SRC}] [{TGT_LANG}] = [{DEMO_TGT}]", " "},
      {17, Style::kCode, true,
       "{DEMOS} [{SRC_LANG}]=[{QUERY}] [{TGT_LANG}]=",
       "[{SRC_LANG}]=[{DEMO_SRC}] [{TGT_LANG}]=[{DEMO_TGT}]", " "},
      {18, Style::kCode, false, "[{SRC_LANG}]=[{QUERY}] [{TGT_LANG}]=", "", ""},
      {19, Style::kCode, true,
       "{DEMOS} {{{SRC_LANG}}}={{{QUERY}}} {{{TGT_LANG}}}=",
       "{{{SRC_LANG}}}={{{DEMO_SRC}}} {{{TGT_LANG}}}={{{DEMO_TGT}}}", " "},
      {20, Style::kCode, true,
       "{DEMOS} {{[{SRC_LANG}]=[{QUERY}]}} {{[{TGT_LANG}]=}}",
       "{{[{SRC_LANG}]=[{DEMO_SRC}]}} {{[{TGT_LANG}]=[{DEMO_TGT}]}}", " "},
  };
  return kCatalog;
}

inline const PromptTemplate& get_template(int id) {
  for (const auto& t : catalog()) {
    if (t.id == id) return t;
  }
  throw std::invalid_argument("no template with id " + std::to_string(id));
}

namespace detail {

struct Subst {
  std::string_view name;
  const std::string* value;
};

// Expands {NAME} slots and {{ }} escapes; unknown slots are errors so typos
// in catalog files fail loudly.
inline std::string expand(std::string_view pattern, const std::vector<Subst>& substs,
                          const std::string* demos_text = nullptr) {
  std::string out;
  out.reserve(pattern.size() * 2);
  size_t i = 0;
  while (i < pattern.size()) {
    char c = pattern[i];
    if (c == '{') {
      if (i + 1 < pattern.size() && pattern[i + 1] == '{') {
        out.push_back('{');
        i += 2;
        continue;
      }
      size_t close = pattern.find('}', i + 1);
      if (close == std::string::npos) {
        throw std::invalid_argument("unterminated slot in pattern: " + std::string(pattern));
      }
      std::string_view name = pattern.substr(i + 1, close - i - 1);
      if (name == "DEMOS") {
        if (!demos_text) {
          throw std::invalid_argument("{DEMOS} slot not allowed here");
        }
        out += *demos_text;
      } else {
        bool found = false;
        for (const auto& s : substs) {
          if (s.name == name) {
            out += *s.value;
            found = true;
            break;
          }
        }
        if (!found) {
          throw std::invalid_argument("unknown slot {" + std::string(name) + "}");
        }
      }
      i = close + 1;
      continue;
    }
    if (c == '}') {
      if (i + 1 < pattern.size() && pattern[i + 1] == '}') {
        out.push_back('}');
        i += 2;
        continue;
      }
      throw std::invalid_argument("stray '}' in pattern: " + std::string(pattern));
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

// The literal character that closes the query slot (first non-space literal
// after {QUERY} in the pattern); a query containing it can derail the
// prompt's structure, which is worth a warning but not a rewrite.
inline std::optional<char> closing_delimiter(std::string_view pattern) {
  size_t pos = pattern.find("{QUERY}");
  if (pos == std::string::npos) return std::nullopt;
  size_t i = pos + 7;
  while (i < pattern.size()) {
    char c = pattern[i];
    if (c == '{' && i + 1 < pattern.size() && pattern[i + 1] == '{') return '{';
    if (c == '}' && i + 1 < pattern.size() && pattern[i + 1] == '}') return '}';
    if (c == '{' || c == '}') return std::nullopt;  // a slot follows, no literal delimiter
    if (c != ' ') return c;
    ++i;
  }
  return std::nullopt;
}

}  // namespace detail

// Substitutes the slots and repeats the demo block once per demonstration.
// Demonstrations are used in the order given; ordering concerns live in
// order_demos.
inline PromptRequest render(const PromptTemplate& tmpl, const corpus::LangPair& lang,
                            const std::string& query,
                            const std::vector<Demonstration>& demos, int query_id = -1) {
  if (tmpl.with_tm && demos.empty()) {
    throw std::invalid_argument("template " + std::to_string(tmpl.id) +
                                " needs at least one demonstration");
  }
  if (!tmpl.with_tm && !demos.empty()) {
    throw std::invalid_argument("template " + std::to_string(tmpl.id) +
                                " is zero-shot but got demonstrations");
  }
  PromptRequest req;
  req.template_id = tmpl.id;
  req.lang = lang;
  req.query = query;
  req.query_id = query_id;
  req.demos = demos;

  std::string demos_text;
  for (size_t d = 0; d < demos.size(); ++d) {
    if (d > 0) demos_text += tmpl.joiner;
    demos_text += detail::expand(tmpl.demo_block,
                                 {{"SRC_LANG", &lang.src_name},
                                  {"TGT_LANG", &lang.tgt_name},
                                  {"DEMO_SRC", &demos[d].source},
                                  {"DEMO_TGT", &demos[d].target}});
  }
  req.rendered = detail::expand(tmpl.pattern,
                                {{"SRC_LANG", &lang.src_name},
                                 {"TGT_LANG", &lang.tgt_name},
                                 {"QUERY", &query}},
                                &demos_text);

  if (auto delim = detail::closing_delimiter(tmpl.pattern)) {
    if (query.find(*delim) != std::string::npos) {
      req.warnings.push_back(std::string("query contains the template's closing delimiter '") +
                             *delim + "'");
    }
  }
  return req;
}

inline PromptRequest render(int template_id, const corpus::LangPair& lang,
                            const std::string& query,
                            const std::vector<Demonstration>& demos, int query_id = -1) {
  return render(get_template(template_id), lang, query, demos, query_id);
}

enum class DemoOrder { kAscending, kDescending };

inline DemoOrder demo_order_from_name(std::string_view s) {
  if (s == "asc" || s == "ascending") return DemoOrder::kAscending;
  if (s == "desc" || s == "descending") return DemoOrder::kDescending;
  throw std::invalid_argument("unknown order: " + std::string(s));
}

inline std::string demo_order_name(DemoOrder order) {
  return order == DemoOrder::kAscending ? "asc" : "desc";
}

// Stable sort by score. Ascending puts the most similar demonstration last
// (adjacent to the query); descending puts it first. Demos without scores
// cannot be ordered: all-absent is a flagged no-op, a mixture is an error.
inline std::vector<Demonstration> order_demos(std::vector<Demonstration> demos,
                                              DemoOrder order,
                                              bool* passthrough = nullptr) {
  if (passthrough) *passthrough = false;
  size_t with_fms = 0;
  for (const auto& d : demos) with_fms += d.fms.has_value();
  if (with_fms == 0) {
    if (passthrough) *passthrough = true;
    return demos;
  }
  if (with_fms != demos.size()) {
    throw std::invalid_argument("cannot order demonstrations with mixed fms presence");
  }
  std::stable_sort(demos.begin(), demos.end(),
                   [order](const Demonstration& a, const Demonstration& b) {
                     if (order == DemoOrder::kAscending) return fms::score_lt(*a.fms, *b.fms);
                     return fms::score_lt(*b.fms, *a.fms);
                   });
  return demos;
}

// Catalog file round-trip: one JSON record per template. The shipped
// data/templates.json mirrors the built-ins; loading a file replaces the
// catalog for the caller, it does not mutate the built-ins.
inline jsonl::ordered_json template_to_json(const PromptTemplate& t) {
  jsonl::ordered_json obj;
  obj["id"] = t.id;
  obj["style"] = t.style == Style::kInstruction ? "instruction" : "code";
  obj["with_tm"] = t.with_tm;
  obj["pattern"] = t.pattern;
  obj["demo_block"] = t.demo_block;
  obj["joiner"] = t.joiner;
  return obj;
}

inline void save_catalog(const std::filesystem::path& path,
                         const std::vector<PromptTemplate>& templates) {
  jsonl::ordered_json arr = jsonl::ordered_json::array();
  for (const auto& t : templates) arr.push_back(template_to_json(t));
  jsonl::write_file(path, arr.dump(2) + "\n");
}

inline std::vector<PromptTemplate> load_catalog(const std::filesystem::path& path) {
  jsonl::ordered_json arr = jsonl::ordered_json::parse(jsonl::read_file(path));
  if (!arr.is_array() || arr.empty()) {
    throw std::runtime_error(path.string() + ": catalog must be a non-empty array");
  }
  std::vector<PromptTemplate> out;
  std::set<int> ids;
  for (const auto& obj : arr) {
    PromptTemplate t;
    t.id = obj.at("id").get<int>();
    std::string style = obj.at("style").get<std::string>();
    if (style != "instruction" && style != "code") {
      throw std::runtime_error(path.string() + ": bad style: " + style);
    }
    t.style = style == "instruction" ? Style::kInstruction : Style::kCode;
    t.with_tm = obj.at("with_tm").get<bool>();
    t.pattern = obj.at("pattern").get<std::string>();
    t.demo_block = obj.at("demo_block").get<std::string>();
    t.joiner = obj.at("joiner").get<std::string>();
    if (!ids.insert(t.id).second) {
      throw std::runtime_error(path.string() + ": duplicate template id " +
                               std::to_string(t.id));
    }
    if (t.with_tm && t.demo_block.empty()) {
      throw std::runtime_error(path.string() + ": template " + std::to_string(t.id) +
                               " has with_tm but no demo block");
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace tmkit::templates
