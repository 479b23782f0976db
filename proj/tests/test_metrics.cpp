#include <gtest/gtest.h>

#include "laft/metrics.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace laft;

namespace {

Words w(const std::string& s) {
  std::istringstream in(s);
  Words out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

std::vector<EvalPair> toy_corpus() {
  return {
      {w("a dog barks then a car horn honks"),
       {w("a dog barks then a car horn honks"), w("there is a dog barking followed by a car horn"),
        w("a dog barks and a horn honks")}},
      {w("a bird sings while an engine runs"),
       {w("the sound of a bird singing while an engine running"), w("a bird sings then an engine runs")}},
      {w("first a door slams"),
       {w("first a door slams and later a siren wails"), w("a door slams then a siren wails"),
        w("you can hear a door slamming and then a siren wailing")}},
  };
}

double oracle_cider(const std::vector<EvalPair>& pairs) {
  std::vector<std::pair<Words, std::vector<Words>>> data;
  for (const auto& p : pairs) data.emplace_back(p.candidate, p.references);
  return oracle::cider_d(data);
}

}  // namespace

TEST(Bleu, IdentityScoresOne) {
  const std::vector<EvalPair> pairs{{w("a dog barks then a car horn honks"), {w("a dog barks then a car horn honks")}},
                                    {w("the bird sings in the morning"), {w("the bird sings in the morning")}}};
  for (int n = 1; n <= 4; ++n) EXPECT_EQ(bleu(pairs, n), 1.0);
}

TEST(Bleu, ClippingExampleByHand) {
  // "the" occurs once in the reference, so only one of the four candidate
  // tokens counts; c = 4 > r = 2 so there is no brevity penalty.
  const std::vector<EvalPair> pairs{{w("the the the the"), {w("the cat")}}};
  const BleuStats s = bleu_stats(pairs);
  EXPECT_EQ(s.matched[0], 1.0);
  EXPECT_EQ(s.total[0], 4.0);
  EXPECT_EQ(s.precision(1), 0.25);
  EXPECT_EQ(s.candidate_length, 4.0);
  EXPECT_EQ(s.reference_length, 2.0);
  EXPECT_EQ(s.brevity_penalty(), 1.0);
  EXPECT_EQ(bleu(pairs, 1), 0.25);
  EXPECT_EQ(bleu(pairs, 2), 0.0);

  // Clip count is the maximum over references: "the" appears twice in the first.
  const std::vector<EvalPair> classic{
      {w("the the the the the the the"), {w("the cat is on the mat"), w("there is a cat on the mat")}}};
  EXPECT_EQ(bleu_stats(classic).precision(1), 2.0 / 7.0);
  EXPECT_EQ(bleu(classic, 1), 2.0 / 7.0);
}

TEST(Bleu, BrevityPenaltyUsesClosestReference) {
  const std::vector<EvalPair> pairs{{w("a dog barks"), {w("a dog barks loudly now"), w("a dog barks at night today")}}};
  const BleuStats s = bleu_stats(pairs);
  EXPECT_EQ(s.reference_length, 5.0);
  EXPECT_DOUBLE_EQ(s.brevity_penalty(), std::exp(1.0 - 5.0 / 3.0));
  EXPECT_DOUBLE_EQ(bleu(pairs, 1), std::exp(1.0 - 5.0 / 3.0));
  const std::vector<EvalPair> tie{{w("a b c d"), {w("a b c"), w("a b c d e")}}};
  EXPECT_EQ(bleu_stats(tie).reference_length, 3.0);
}

TEST(Bleu, NoOverlapAndEmptyCandidateScoreZero) {
  EXPECT_EQ(bleu(std::vector<EvalPair>{{w("x y z"), {w("a b c")}}}, 1), 0.0);
  EXPECT_EQ(bleu(std::vector<EvalPair>{{Words{}, {w("a b c")}}}, 1), 0.0);
}

TEST(Bleu, AppendingCorrectTokenNeverLowersUnigramPrecision) {
  const Words ref = w("a dog barks then a car horn honks");
  for (std::size_t len = 1; len < ref.size(); ++len) {
    const Words shorter(ref.begin(), ref.begin() + static_cast<long>(len));
    const Words longer(ref.begin(), ref.begin() + static_cast<long>(len + 1));
    EXPECT_GE(bleu_stats(std::vector<EvalPair>{{longer, {ref}}}).precision(1),
              bleu_stats(std::vector<EvalPair>{{shorter, {ref}}}).precision(1));
  }
}

TEST(RougeL, HandComputedLcs) {
  EXPECT_EQ(lcs_length(w("a b c d"), w("a c d")), 3u);
  EXPECT_EQ(lcs_length(w("a b c d e"), w("e d c b a")), 1u);
  const double p = 3.0 / 4.0, r = 1.0, b2 = 1.2 * 1.2;
  const double f = (1 + b2) * p * r / (r + b2 * p);
  EXPECT_NEAR(rouge_l(std::vector<EvalPair>{{w("a b c d"), {w("a c d")}}}), f, 1e-15);
  EXPECT_EQ(rouge_l(std::vector<EvalPair>{{w("a b c"), {w("a b c")}}}), 1.0);
  EXPECT_EQ(rouge_l(std::vector<EvalPair>{{w("a b c"), {w("x y")}}}), 0.0);
  EXPECT_EQ(rouge_l(std::vector<EvalPair>{{Words{}, {w("x y")}}}), 0.0);
  EXPECT_EQ(rouge_l(std::vector<EvalPair>{{w("a b c d"), {w("x y"), w("a b c d")}}}), 1.0);
}

TEST(CiderD, MatchesLiteralTranscription) {
  const auto pairs = toy_corpus();
  const double got = cider_d(pairs);
  EXPECT_NEAR(got, oracle_cider(pairs), 1e-9);
  EXPECT_GT(got, 0.0);
  const auto per = cider_d_per_pair(pairs);
  ASSERT_EQ(per.size(), 3u);
  EXPECT_NEAR((per[0] + per[1] + per[2]) / 3.0, got, 1e-12);
}

TEST(CiderD, IdentityIsMaximalOverPerturbations) {
  std::vector<EvalPair> pairs{{w("a dog barks then a car horn honks"), {w("a dog barks then a car horn honks")}},
                              {w("the bird sings"), {w("an engine idles slowly")}}};
  const double best = cider_d_per_pair(pairs)[0];
  const Words base = pairs[0].candidate;
  for (std::size_t i = 0; i < base.size(); ++i) {
    for (const std::string& repl : {std::string("cat"), std::string("a"), std::string("honks")}) {
      Words c = base;
      c[i] = repl;
      if (c == base) continue;
      pairs[0].candidate = c;
      EXPECT_LT(cider_d_per_pair(pairs)[0], best);
    }
    Words dropped = base;
    dropped.erase(dropped.begin() + static_cast<long>(i));
    pairs[0].candidate = dropped;
    EXPECT_LT(cider_d_per_pair(pairs)[0], best);
  }
}

TEST(CiderD, NoOverlapScoresZeroAndSingleClipThrows) {
  const std::vector<EvalPair> pairs{{w("x y z"), {w("a b c")}}, {w("q r"), {w("d e f")}}};
  EXPECT_EQ(cider_d(pairs), 0.0);
  try {
    cider_d(std::vector<EvalPair>{{w("a"), {w("a")}}});
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("IDF undefined"), std::string::npos);
  }
  EXPECT_TRUE(std::isnan(evaluate_all(std::vector<EvalPair>{{w("a"), {w("a")}}}).cider_d));
}

TEST(Metrics, InvariantToReferenceOrder) {
  auto pairs = toy_corpus();
  const MetricReport a = evaluate_all(pairs);
  for (auto& p : pairs) std::reverse(p.references.begin(), p.references.end());
  const MetricReport b = evaluate_all(pairs);
  for (int n = 0; n < 4; ++n) EXPECT_EQ(a.bleu[n], b.bleu[n]);
  EXPECT_EQ(a.rouge_l, b.rouge_l);
  EXPECT_NEAR(a.cider_d, b.cider_d, 1e-12);
}
