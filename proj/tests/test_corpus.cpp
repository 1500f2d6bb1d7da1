#include "tmkit/corpus.hpp"

#include <gtest/gtest.h>

#include <set>

#include "test_util.hpp"

using namespace tmkit::corpus;
using testutil::TempDir;

namespace {

std::vector<SentencePair> sample_pairs() {
  return {
      {0, "  the &amp; sign  ", "das &amp;-Zeichen"},
      {1, "plain line", "einfache Zeile"},
      {2, "", "missing source"},
      {3, "missing target", "   "},
      {4, "a\t b \n c", "a b c"},
      {5, "plain line", "einfache Zeile"},
  };
}

}  // namespace

TEST(Normalize, TrimsUnescapesAndRejects) {
  NormalizeRules rules;
  IngestStats stats;
  auto kept = normalize_corpus(sample_pairs(), rules, &stats);
  ASSERT_EQ(kept.size(), 4u);
  EXPECT_EQ(stats.kept, 4u);
  EXPECT_EQ(stats.rejected.at("empty_source"), 1u);
  EXPECT_EQ(stats.rejected.at("empty_target"), 1u);
  EXPECT_EQ(stats.rejected_total(), 2u);

  EXPECT_EQ(kept[0].source, "the & sign");
  EXPECT_EQ(kept[0].target, "das &-Zeichen");
  EXPECT_EQ(kept[2].source, "a b c");

  // Survivors keep their original ids; gaps mark rejects.
  EXPECT_EQ(kept[0].id, 0);
  EXPECT_EQ(kept[1].id, 1);
  EXPECT_EQ(kept[2].id, 4);
  EXPECT_EQ(kept[3].id, 5);
}

TEST(Normalize, Idempotent) {
  NormalizeRules rules;
  auto once = normalize_corpus(sample_pairs(), rules);
  auto twice = normalize_corpus(once, rules);
  EXPECT_EQ(once, twice);
}

TEST(Normalize, NestedEntitiesFullyUnescape) {
  // Double-escaped input must not survive one pass ahead of the next.
  std::vector<SentencePair> pairs = {{0, "&amp;amp;quot;deep&amp;quot;", "x"}};
  auto kept = normalize_corpus(pairs, {});
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].source, "\"deep\"");
}

TEST(Normalize, DuplicateAndLengthRules) {
  NormalizeRules rules;
  rules.reject_exact_duplicates = true;
  rules.max_tokens_per_side = 3;
  std::vector<SentencePair> pairs = {
      {0, "one two three", "a"},
      {1, "one two three four", "b"},
      {2, "one two three", "a"},
  };
  IngestStats stats;
  auto kept = normalize_corpus(pairs, rules, &stats);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(stats.rejected.at("too_long"), 1u);
  EXPECT_EQ(stats.rejected.at("duplicate"), 1u);
}

TEST(Formats, JsonlTsvPairedAgree) {
  TempDir tmp;
  testutil::write_file(tmp / "c.jsonl",
                       "{\"id\":0,\"source\":\"hello there\",\"target\":\"hallo du\"}\n"
                       "{\"id\":1,\"source\":\"good night\",\"target\":\"gute Nacht\"}\n");
  testutil::write_file(tmp / "c.tsv", "hello there\thallo du\ngood night\tgute Nacht\n");
  testutil::write_file(tmp / "c.src", "hello there\ngood night\n");
  testutil::write_file(tmp / "c.tgt", "hallo du\ngute Nacht\n");

  auto a = load_corpus(tmp / "c.jsonl", CorpusFormat::kJsonl);
  auto b = load_corpus(tmp / "c.tsv", CorpusFormat::kTsv);
  auto c = load_paired_corpus(tmp / "c.src", tmp / "c.tgt");
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[1].target, "gute Nacht");
}

TEST(Formats, PairedLineCountMismatchFails) {
  TempDir tmp;
  testutil::write_file(tmp / "c.src", "one\ntwo\n");
  testutil::write_file(tmp / "c.tgt", "eins\n");
  EXPECT_THROW(load_paired_corpus(tmp / "c.src", tmp / "c.tgt"), std::runtime_error);
}

TEST(Split, PartitionIsDisjointAndComplete) {
  auto pairs = testutil::synthetic_db(40);
  auto split = split_corpus(pairs, 10, 7, make_lang_pair("en", "de"));
  EXPECT_EQ(split.test_set.size(), 10u);
  EXPECT_EQ(split.tm_database.size(), 30u);

  std::set<int> seen;
  for (const auto& p : split.test_set) seen.insert(p.id);
  for (const auto& p : split.tm_database) EXPECT_TRUE(seen.insert(p.id).second);
  EXPECT_EQ(seen.size(), 40u);

  // Ascending id order within each half.
  for (size_t i = 1; i < split.test_set.size(); ++i)
    EXPECT_LT(split.test_set[i - 1].id, split.test_set[i].id);
  for (size_t i = 1; i < split.tm_database.size(); ++i)
    EXPECT_LT(split.tm_database[i - 1].id, split.tm_database[i].id);
}

TEST(Split, SeedDeterminesMembership) {
  auto pairs = testutil::synthetic_db(40);
  auto lang = make_lang_pair("en", "de");
  auto a = split_corpus(pairs, 10, 7, lang);
  auto b = split_corpus(pairs, 10, 7, lang);
  auto c = split_corpus(pairs, 10, 8, lang);
  EXPECT_EQ(a.test_set, b.test_set);
  EXPECT_EQ(a.tm_database, b.tm_database);
  EXPECT_NE(a.test_set, c.test_set);
}

TEST(Split, TestSizeMustLeaveADatabase) {
  auto pairs = testutil::synthetic_db(5);
  auto lang = make_lang_pair("en", "de");
  EXPECT_THROW(split_corpus(pairs, 5, 1, lang), std::invalid_argument);
  EXPECT_THROW(split_corpus(pairs, 6, 1, lang), std::invalid_argument);
  EXPECT_NO_THROW(split_corpus(pairs, 4, 1, lang));
}

TEST(Split, SaveLoadRoundTrip) {
  TempDir tmp;
  auto pairs = testutil::synthetic_db(25);
  auto split = split_corpus(pairs, 6, 99, make_lang_pair("de", "en"));
  save_split(tmp / "split", split);
  auto loaded = load_split(tmp / "split");
  EXPECT_EQ(loaded.test_set, split.test_set);
  EXPECT_EQ(loaded.tm_database, split.tm_database);
  EXPECT_EQ(loaded.seed, split.seed);
  EXPECT_EQ(loaded.lang.src_code, "de");
  EXPECT_EQ(loaded.lang.tgt_name, "English");
}

TEST(Split, TamperedFilesFailTheChecksum) {
  TempDir tmp;
  auto pairs = testutil::synthetic_db(25);
  auto split = split_corpus(pairs, 6, 99, make_lang_pair("de", "en"));
  save_split(tmp / "split", split);

  // Flip one character inside db.jsonl.
  std::string db = testutil::read_file(tmp / "split" / "db.jsonl");
  size_t pos = db.find("\"source\":\"");
  ASSERT_NE(pos, std::string::npos);
  db[pos + 10] = db[pos + 10] == 'x' ? 'y' : 'x';
  testutil::write_file(tmp / "split" / "db.jsonl", db);
  EXPECT_THROW(load_split(tmp / "split"), std::runtime_error);
}

TEST(Split, FingerprintTracksContent) {
  auto pairs = testutil::synthetic_db(10);
  uint64_t fp = corpus_fingerprint(pairs);
  EXPECT_EQ(fp, corpus_fingerprint(pairs));
  auto changed = pairs;
  changed[3].target += "!";
  EXPECT_NE(fp, corpus_fingerprint(changed));
  auto reordered = pairs;
  std::swap(reordered[0], reordered[1]);
  EXPECT_NE(fp, corpus_fingerprint(reordered));
}

TEST(Languages, NamesForKnownCodes) {
  auto lang = make_lang_pair("en", "de");
  EXPECT_EQ(lang.src_name, "English");
  EXPECT_EQ(lang.tgt_name, "German");
  EXPECT_EQ(make_lang_pair("fr", "cs").tgt_name, "Czech");
  // Unknown codes pass through rather than failing.
  EXPECT_EQ(make_lang_pair("xx", "en").src_name, "xx");
}
