#include <gtest/gtest.h>

#include "laft/decoding.hpp"
#include "laft/model.hpp"
#include "test_util.hpp"

#include <cmath>
#include <functional>
#include <set>

using namespace laft;

namespace {

// Deterministic pseudo-random log-softmax rows keyed on the prefix.
StepFn hashed_model(Index vocab, std::uint64_t salt, double spread = 3.0) {
  return [=](std::span<const std::vector<TokenId>> prefixes) {
    RowMatrix out(static_cast<Index>(prefixes.size()), vocab);
    for (std::size_t p = 0; p < prefixes.size(); ++p) {
      std::uint64_t h = salt;
      for (TokenId t : prefixes[p]) h = (h ^ static_cast<std::uint64_t>(t)) * 0x100000001b3ull + 0x9e37;
      std::mt19937_64 rng(h);
      std::uniform_real_distribution<double> dist(-spread, spread);
      Eigen::RowVectorXd logits(vocab);
      for (Index v = 0; v < vocab; ++v) logits[v] = dist(rng);
      const double lse = std::log(logits.array().exp().sum());
      out.row(static_cast<Index>(p)) = logits.array() - lse;
    }
    return out;
  };
}

// Rule model: after token t comes succ(t) with prob 0.9; <eos> after `stop` tokens.
StepFn rule_model(Index vocab, Index stop) {
  return [=](std::span<const std::vector<TokenId>> prefixes) {
    RowMatrix out = RowMatrix::Constant(static_cast<Index>(prefixes.size()), vocab, std::log(0.1 / (vocab - 1.0)));
    for (std::size_t p = 0; p < prefixes.size(); ++p) {
      const auto& pre = prefixes[p];
      const Index generated = static_cast<Index>(pre.size()) - 1;
      const TokenId next = generated >= stop ? kEos
                           : generated == 0 ? kFirstWord + 2
                                            : kFirstWord + (pre.back() - kFirstWord + 1) % (vocab - kFirstWord);
      out(static_cast<Index>(p), next) = std::log(0.9);
    }
    return out;
  };
}

struct Best {
  double score = -std::numeric_limits<double>::infinity();
  std::vector<TokenId> tokens;
};

void enumerate(const StepFn& step, Index vocab, Index max_len, std::vector<TokenId>& prefix, double lp, Best& best) {
  if (static_cast<Index>(prefix.size()) - 1 == max_len) return;
  const std::vector<TokenId> one{prefix};
  const RowMatrix row = step(std::span(&one, 1));
  for (TokenId v = kEos; v < vocab; ++v) {
    prefix.push_back(v);
    const double next = lp + row(0, v);
    if (v == kEos) {
      const double score = next / static_cast<double>(prefix.size() - 1);
      if (score > best.score) best = {score, prefix};
    } else {
      enumerate(step, vocab, max_len, prefix, next, best);
    }
    prefix.pop_back();
  }
}

}  // namespace

TEST(Greedy, OneHotEosGivesEmptyCaption) {
  const StepFn eos = [](std::span<const std::vector<TokenId>> prefixes) {
    RowMatrix out = RowMatrix::Constant(static_cast<Index>(prefixes.size()), 6, -1e9);
    out.col(kEos).setZero();
    return out;
  };
  const Hypothesis h = greedy_decode(eos, 10);
  EXPECT_EQ(h.tokens, (std::vector<TokenId>{kSos, kEos}));
  EXPECT_TRUE(h.finished);
  EXPECT_EQ(beam_decode(eos, 5, 10).best.tokens, h.tokens);
}

TEST(Greedy, RuleModelReproducesItsSequence) {
  const Hypothesis h = greedy_decode(rule_model(9, 5), 12);
  EXPECT_EQ(h.tokens, (std::vector<TokenId>{kSos, 6, 7, 8, 4, 5, kEos}));
  EXPECT_NEAR(h.log_prob, 6 * std::log(0.9), 1e-12);
}

TEST(Greedy, NeverEmitsPadOrSosAndFlagsTruncation) {
  const StepFn pad_lover = [](std::span<const std::vector<TokenId>> prefixes) {
    RowMatrix out = RowMatrix::Constant(static_cast<Index>(prefixes.size()), 6, -5.0);
    out.col(kPad).setConstant(-0.1);
    out.col(kSos).setConstant(-0.2);
    out.col(4).setConstant(-1.0);
    return out;
  };
  const Hypothesis h = greedy_decode(pad_lover, 4);
  EXPECT_EQ(h.tokens, (std::vector<TokenId>{kSos, 4, 4, 4, 4}));
  EXPECT_FALSE(h.finished);
  for (const auto& hyp : beam_decode(pad_lover, 3, 4).kbest)
    for (std::size_t i = 1; i < hyp.tokens.size(); ++i) EXPECT_GT(hyp.tokens[i], kSos);
}

TEST(Greedy, TiesGoToTheLowestTokenId) {
  const StepFn flat = [](std::span<const std::vector<TokenId>> prefixes) {
    RowMatrix out = RowMatrix::Constant(static_cast<Index>(prefixes.size()), 7, -3.0);
    out.col(5).setConstant(-1.0);
    out.col(6).setConstant(-1.0);
    if (prefixes[0].size() > 2) out.col(kEos).setConstant(-0.5);
    return out;
  };
  EXPECT_EQ(greedy_decode(flat, 8).tokens, (std::vector<TokenId>{kSos, 5, 5, kEos}));
}

TEST(Beam, WidthOneEqualsGreedy) {
  for (std::uint64_t salt = 0; salt < 200; ++salt) {
    const StepFn step = hashed_model(8, salt);
    const Hypothesis g = greedy_decode(step, 7);
    const BeamResult b = beam_decode(step, 1, 7);
    EXPECT_EQ(b.best.tokens, g.tokens) << salt;
    EXPECT_EQ(b.best.log_prob, g.log_prob) << salt;
  }
}

TEST(Beam, WideBeamFindsExhaustiveOptimum) {
  for (const Index vocab : {4, 6})
    for (std::uint64_t salt = 0; salt < 100; ++salt) {
      const StepFn step = hashed_model(vocab, salt + 1000);
      Best best;
      std::vector<TokenId> prefix{kSos};
      enumerate(step, vocab, 4, prefix, 0.0, best);
      const Index k = static_cast<Index>(std::pow(static_cast<double>(vocab - 2), 4));
      const BeamResult r = beam_decode(step, k, 4);
      EXPECT_EQ(r.best.tokens, best.tokens) << "V=" << vocab << " salt " << salt;
      EXPECT_NEAR(r.best.score(), best.score, 1e-12);
    }
}

TEST(Beam, KBestIsSortedDistinctAndDeterministic) {
  for (std::uint64_t salt = 0; salt < 50; ++salt) {
    const StepFn step = hashed_model(10, salt + 5000, 1.0);
    const BeamResult r = beam_decode(step, 5, 8);
    ASSERT_FALSE(r.kbest.empty());
    EXPECT_LE(r.kbest.size(), 5u);
    std::set<std::vector<TokenId>> seen;
    for (std::size_t i = 0; i < r.kbest.size(); ++i) {
      EXPECT_TRUE(seen.insert(r.kbest[i].tokens).second);
      if (i > 0) EXPECT_GE(r.kbest[i - 1].score(), r.kbest[i].score());
      EXPECT_EQ(r.kbest[i].tokens.front(), kSos);
      // cumulative log-prob never rises along a prefix
      double lp = 0.0;
      for (std::size_t t = 1; t < r.kbest[i].tokens.size(); ++t) {
        const std::vector<TokenId> pre(r.kbest[i].tokens.begin(), r.kbest[i].tokens.begin() + static_cast<long>(t));
        const double next = lp + step(std::span(&pre, 1))(0, r.kbest[i].tokens[t]);
        EXPECT_LE(next, lp);
        lp = next;
      }
      EXPECT_NEAR(lp, r.kbest[i].log_prob, 1e-12);
    }
    EXPECT_EQ(r.best.tokens, r.kbest.front().tokens);
    EXPECT_EQ(beam_decode(step, 5, 8).best.tokens, r.best.tokens);
  }
  EXPECT_THROW(beam_decode(hashed_model(6, 0), 0, 4), std::invalid_argument);
}

TEST(ModelStep, MatchesLastRowOfFullForward) {
  ModelConfig mc;
  mc.input = FeatureKind::embedded;
  mc.decoder.dim = 8;
  mc.decoder.max_tokens = 10;
  mc.decoder.max_frames = 6;
  mc.decoder.window = 2;
  const Vocab v = Vocab::build(std::vector<std::string>{"a b c d e"});
  CaptionModel model(mc, v, 3);
  std::mt19937_64 rng(4);
  RowMatrix feats = RowMatrix::Random(5, 8);
  const Tensor h = clip_features(model, feats);
  const StepFn step = model_step_fn(model, h);
  const std::vector<std::vector<TokenId>> prefixes{{kSos, 4, 5}, {kSos, 6, 7}};
  const RowMatrix rows = step(prefixes);
  for (std::size_t p = 0; p < 2; ++p) {
    Tape tape(Tape::Mode::inference);
    const Tensor lp = model.forward(tape, pad_batch(std::span(&prefixes[p], 1)), h);
    for (Index c = 0; c < v.size(); ++c) EXPECT_NEAR(rows(static_cast<Index>(p), c), lp[2 * v.size() + c], 1e-12);
  }
  const Hypothesis g = greedy_decode(step, 8);
  EXPECT_EQ(beam_decode(step, 1, 8).best.tokens, g.tokens);
}
