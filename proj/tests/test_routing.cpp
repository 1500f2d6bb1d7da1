#include "tmkit/routing.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace tmkit::routing;
using tmkit::corpus::SentencePair;
using tmkit::fms::Score;
using tmkit::retrieval::RetrievalHit;
using tmkit::templates::Provenance;

namespace {

RetrievalHit hit_with(Score s) {
  return {{500, "tm source text", "tm target text"}, s, 1};
}

const SentencePair kQuery{7, "query text", "reference"};

}  // namespace

TEST(Policy, ThresholdMustBeAFractionInRange) {
  EXPECT_NO_THROW(make_policy("0"));
  EXPECT_NO_THROW(make_policy("1"));
  EXPECT_NO_THROW(make_policy("0.65"));
  EXPECT_THROW(make_policy("1.5"), std::invalid_argument);
  EXPECT_THROW(make_policy("-0.1"), std::invalid_argument);
  EXPECT_THROW(make_policy("abc"), std::invalid_argument);
}

TEST(Route, KeepsTmAtOrAboveThreshold) {
  RoutingPolicy policy = make_policy("0.6");
  // 0.6 exactly: strict less-than keeps the TM demo.
  RouteEntry at = route(kQuery, hit_with({2, 5}), policy);
  EXPECT_EQ(at.choice, RouteChoice::kTm);
  EXPECT_EQ(at.demo.source, "tm source text");
  EXPECT_EQ(at.demo.target, "tm target text");
  EXPECT_EQ(at.demo.provenance, Provenance::kTm);
  ASSERT_TRUE(at.demo.fms.has_value());

  RouteEntry above = route(kQuery, hit_with({1, 5}), policy);
  EXPECT_EQ(above.choice, RouteChoice::kTm);
}

TEST(Route, RoutesBelowThresholdToNmtDemo) {
  RoutingPolicy policy = make_policy("0.6", {{7, "nmt hypothesis"}});
  RouteEntry entry = route(kQuery, hit_with({3, 5}), policy);  // 0.4 < 0.6
  EXPECT_EQ(entry.choice, RouteChoice::kNmt);
  // The replacement demo pairs the query's own source with the hypothesis.
  EXPECT_EQ(entry.demo.source, "query text");
  EXPECT_EQ(entry.demo.target, "nmt hypothesis");
  EXPECT_EQ(entry.demo.provenance, Provenance::kNmt);
  EXPECT_FALSE(entry.demo.fms.has_value());
  // The TM score is kept for reporting even though the demo was replaced.
  EXPECT_TRUE(tmkit::fms::score_eq(entry.tm_fms, Score{3, 5}));
}

TEST(Route, ThresholdZeroNeverRoutes) {
  RoutingPolicy policy = make_policy("0");  // no hypotheses on purpose
  for (int d = 0; d <= 5; ++d) {
    RouteEntry entry = route(kQuery, hit_with({d, 5}), policy);
    EXPECT_EQ(entry.choice, RouteChoice::kTm) << d;
  }
}

TEST(Route, ThresholdOneRoutesEverythingImperfect) {
  RoutingPolicy policy = make_policy("1", {{7, "h"}});
  EXPECT_EQ(route(kQuery, hit_with({1, 5}), policy).choice, RouteChoice::kNmt);
  EXPECT_EQ(route(kQuery, hit_with({0, 5}), policy).choice, RouteChoice::kTm);
}

TEST(Route, MissingHypothesisOnlyFailsRoutedQueries) {
  RoutingPolicy policy = make_policy("0.6");
  EXPECT_NO_THROW(route(kQuery, hit_with({0, 5}), policy));
  EXPECT_THROW(route(kQuery, hit_with({4, 5}), policy), std::runtime_error);
}

TEST(Route, MonotoneInThreshold) {
  // Raising the threshold can only move queries from TM to NMT.
  std::vector<Score> scores = {{0, 5}, {1, 5}, {2, 5}, {3, 5}, {4, 5}, {5, 5}};
  std::vector<std::string> thresholds = {"0", "0.2", "0.4", "0.6", "0.8", "1"};
  size_t prev_tm = scores.size();
  for (const auto& t : thresholds) {
    NmtHypothesisTable hyps;
    for (int id = 0; id < 10; ++id) hyps[id] = "h";
    RoutingPolicy policy = make_policy(t, std::move(hyps));
    size_t tm = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      SentencePair q{static_cast<int>(i), "src", "ref"};
      if (route(q, hit_with(scores[i]), policy).choice == RouteChoice::kTm) ++tm;
    }
    EXPECT_LE(tm, prev_tm) << t;
    prev_tm = tm;
  }
  EXPECT_EQ(prev_tm, 1u);  // only the exact match survives threshold 1
}

TEST(RouteBatch, CountsProportionsAndHistogram) {
  std::vector<SentencePair> queries;
  std::vector<RetrievalHit> hits;
  // Scores: 1.0, 0.8, 0.5, 0.1 with threshold 0.6 -> two keep, two route.
  std::vector<Score> scores = {{0, 5}, {1, 5}, {1, 2}, {9, 10}};
  for (int i = 0; i < 4; ++i) {
    queries.push_back({i, "q" + std::to_string(i), "r"});
    hits.push_back(hit_with(scores[i]));
  }
  NmtHypothesisTable hyps = {{2, "h2"}, {3, "h3"}};
  RoutingDecision decision = route_batch(queries, hits, make_policy("0.6", std::move(hyps)));

  EXPECT_EQ(decision.total, 4u);
  EXPECT_EQ(decision.tm_count, 2u);
  EXPECT_DOUBLE_EQ(decision.tm_proportion(), 0.5);
  EXPECT_DOUBLE_EQ(decision.nmt_proportion(), 0.5);
  ASSERT_EQ(decision.entries.size(), 4u);
  EXPECT_EQ(decision.entries[0].choice, RouteChoice::kTm);
  EXPECT_EQ(decision.entries[3].choice, RouteChoice::kNmt);

  // Routed-out scores 0.5 and 0.1 land in buckets 2 and 0.
  ASSERT_TRUE(decision.routed_out.has_value());
  EXPECT_EQ(decision.routed_out->total, 2u);
  EXPECT_EQ(decision.routed_out->counts[0], 1u);
  EXPECT_EQ(decision.routed_out->counts[2], 1u);
}

TEST(RouteBatch, NoRoutedQueriesMeansNoHistogram) {
  std::vector<SentencePair> queries = {{0, "a", "r"}};
  std::vector<RetrievalHit> hits = {hit_with({0, 5})};
  RoutingDecision decision = route_batch(queries, hits, make_policy("0.6"));
  EXPECT_FALSE(decision.routed_out.has_value());
  EXPECT_EQ(decision.tm_count, 1u);
}

TEST(RouteBatch, MisalignedInputsFail) {
  std::vector<SentencePair> queries = {{0, "a", "r"}, {1, "b", "r"}};
  std::vector<RetrievalHit> hits = {hit_with({0, 5})};
  EXPECT_THROW(route_batch(queries, hits, make_policy("0")), std::invalid_argument);
}

TEST(Hypotheses, LoadValidatesRecords) {
  testutil::TempDir tmp;
  testutil::write_file(tmp / "h.jsonl",
                       "{\"id\":3,\"hypothesis\":\"drei\"}\n"
                       "{\"id\":9,\"hypothesis\":\"neun\"}\n");
  NmtHypothesisTable table = load_hypotheses(tmp / "h.jsonl");
  ASSERT_EQ(table.size(), 2u);
  EXPECT_EQ(table.at(3), "drei");
  EXPECT_EQ(table.at(9), "neun");

  testutil::write_file(tmp / "dup.jsonl",
                       "{\"id\":3,\"hypothesis\":\"a\"}\n{\"id\":3,\"hypothesis\":\"b\"}\n");
  EXPECT_THROW(load_hypotheses(tmp / "dup.jsonl"), std::runtime_error);

  testutil::write_file(tmp / "bad.jsonl", "{\"id\":\"three\",\"hypothesis\":\"a\"}\n");
  EXPECT_THROW(load_hypotheses(tmp / "bad.jsonl"), std::runtime_error);

  testutil::write_file(tmp / "nohyp.jsonl", "{\"id\":1}\n");
  EXPECT_THROW(load_hypotheses(tmp / "nohyp.jsonl"), std::runtime_error);
}
