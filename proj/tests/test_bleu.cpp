#include "tmkit/bleu.hpp"

#include <gtest/gtest.h>

#include <algorithm>

#include "test_util.hpp"

using namespace tmkit::bleu;

namespace {

std::vector<std::string> golden_lines(const std::string& name) {
  return testutil::read_lines(testutil::golden_dir() / "bleu" / name);
}

std::string golden_text(const std::string& name) {
  auto lines = golden_lines(name);
  return lines.empty() ? "" : lines[0];
}

}  // namespace

TEST(Bleu, MatchesReferenceImplementationOnFixture) {
  auto hyp = golden_lines("hypothesis.txt");
  auto ref = golden_lines("reference.txt");
  ASSERT_EQ(hyp.size(), 50u);
  BleuReport r = corpus_bleu(hyp, ref);
  EXPECT_EQ(format_multi_bleu_line(r), golden_text("expected.txt"));
}

TEST(Bleu, CaseSensitivityMatchesFixture) {
  auto hyp = golden_lines("case_hypothesis.txt");
  auto ref = golden_lines("case_reference.txt");
  EXPECT_EQ(format_multi_bleu_line(corpus_bleu(hyp, ref, false)),
            golden_text("case_expected.txt"));
  EXPECT_EQ(format_multi_bleu_line(corpus_bleu(hyp, ref, true)),
            golden_text("case_expected_lc.txt"));
}

TEST(Bleu, IdenticalCorpusScoresHundred) {
  std::vector<std::string> lines;
  for (int i = 0; i < 12; ++i) lines.push_back(testutil::sentence_of(i, 6 + i % 5));
  BleuReport r = corpus_bleu(lines, lines);
  EXPECT_DOUBLE_EQ(r.bleu, 100.0);
  EXPECT_DOUBLE_EQ(r.brevity_penalty, 1.0);
  for (double p : r.precisions) EXPECT_DOUBLE_EQ(p, 100.0);
  EXPECT_EQ(r.hyp_len, r.ref_len);
}

TEST(Bleu, CorpusLevelScoreIsOrderInvariant) {
  auto hyp = golden_lines("hypothesis.txt");
  auto ref = golden_lines("reference.txt");
  // Shuffle sentence pairs jointly; corpus statistics cannot change.
  std::vector<size_t> perm(hyp.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::mt19937 gen(7);
  std::shuffle(perm.begin(), perm.end(), gen);
  std::vector<std::string> hyp2, ref2;
  for (size_t i : perm) {
    hyp2.push_back(hyp[i]);
    ref2.push_back(ref[i]);
  }
  EXPECT_EQ(format_multi_bleu_line(corpus_bleu(hyp2, ref2)),
            format_multi_bleu_line(corpus_bleu(hyp, ref)));
}

TEST(Bleu, AnyZeroPrecisionZeroesTheScore) {
  // No 4-gram overlap: geometric mean collapses without smoothing.
  std::vector<std::string> hyp = {"a b c x", "d e f y"};
  std::vector<std::string> ref = {"a b c q", "d e f z"};
  BleuReport r = corpus_bleu(hyp, ref);
  EXPECT_GT(r.precisions[0], 0.0);
  EXPECT_EQ(r.correct[3], 0);
  EXPECT_DOUBLE_EQ(r.bleu, 0.0);
}

TEST(Bleu, BrevityPenaltyOnlyForShortHypotheses) {
  std::vector<std::string> ref = {"one two three four five six"};
  BleuReport shorter = corpus_bleu({"one two three four five"}, ref);
  EXPECT_DOUBLE_EQ(shorter.brevity_penalty, std::exp(1.0 - 6.0 / 5.0));
  BleuReport longer = corpus_bleu({"one two three four five six seven"}, ref);
  EXPECT_DOUBLE_EQ(longer.brevity_penalty, 1.0);
}

TEST(Bleu, ClippingCapsRepeatedNgrams) {
  // "the the the" against a single "the": unigram correct clips to 1.
  BleuReport r = corpus_bleu({"the the the"}, {"the cat sat"});
  EXPECT_EQ(r.correct[0], 1);
  EXPECT_EQ(r.total[0], 3);
}

TEST(Bleu, DegenerateInputsAreErrors) {
  EXPECT_THROW(corpus_bleu({}, {}), std::invalid_argument);
  EXPECT_THROW(corpus_bleu({"a"}, {"a", "b"}), std::invalid_argument);
  EXPECT_THROW(corpus_bleu({"a"}, {""}), std::invalid_argument);
  EXPECT_THROW(corpus_bleu({""}, {"a"}), std::invalid_argument);
}

TEST(Bleu, LineFormatIsExact) {
  auto hyp = golden_lines("hypothesis.txt");
  auto ref = golden_lines("reference.txt");
  std::string line = format_multi_bleu_line(corpus_bleu(hyp, ref));
  // Shape: BLEU = dd.dd, p1/p2/p3/p4 (BP=x.xxx, ratio=x.xxx, hyp_len=N, ref_len=N)
  EXPECT_EQ(line.rfind("BLEU = ", 0), 0u);
  EXPECT_NE(line.find(" (BP="), std::string::npos);
  EXPECT_NE(line.find(", ratio="), std::string::npos);
  EXPECT_NE(line.find(", hyp_len="), std::string::npos);
  EXPECT_NE(line.find(", ref_len="), std::string::npos);
  EXPECT_EQ(line.back(), ')');
}

TEST(ScoreCorpus, TokenizesBeforeScoring) {
  // Untokenized punctuation must be split off before n-grams are counted:
  // after tokenization hypothesis and reference match exactly.
  std::vector<std::string> hyp = {"Hello, world!"};
  std::vector<std::string> ref = {"Hello , world !"};
  BleuReport tokenized = score_corpus(hyp, ref, "en", false, /*already_tokenized=*/false);
  EXPECT_DOUBLE_EQ(tokenized.bleu, 100.0);

  // Score the same lines as-is: "Hello," and "Hello" no longer match.
  BleuReport raw = score_corpus(hyp, ref, "en", false, /*already_tokenized=*/true);
  EXPECT_LT(raw.bleu, 100.0);
}

TEST(BucketBleu, GroupsByScoreBucket) {
  std::vector<std::string> hyp = {"a b c d e", "f g h i j", "k l m n o"};
  std::vector<std::string> ref = {"a b c d e", "f g h i j", "k l m n x"};
  std::vector<tmkit::fms::Score> scores = {{0, 5}, {1, 2}, {1, 2}};  // buckets 4, 2, 2
  BucketBleu bb = bleu_by_bucket(hyp, ref, scores, false);
  EXPECT_EQ(bb.counts[4], 1u);
  EXPECT_EQ(bb.counts[2], 2u);
  EXPECT_EQ(bb.counts[0], 0u);
  ASSERT_TRUE(bb.reports[4].has_value());
  EXPECT_DOUBLE_EQ(bb.reports[4]->bleu, 100.0);  // the exact pair sits alone
  ASSERT_TRUE(bb.reports[2].has_value());
  EXPECT_LT(bb.reports[2]->bleu, 100.0);
  EXPECT_FALSE(bb.reports[0].has_value());

  EXPECT_THROW(bleu_by_bucket(hyp, ref, {{0, 5}}, false), std::invalid_argument);
}
