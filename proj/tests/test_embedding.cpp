#include <gtest/gtest.h>

#include "laft/vocab.hpp"
#include "laft/word2vec.hpp"

#include <algorithm>
#include <filesystem>
#include <random>

using namespace laft;

namespace {

double cosine(const RowMatrix& t, TokenId a, TokenId b) {
  return t.row(a).dot(t.row(b)) / (t.row(a).norm() * t.row(b).norm());
}

// Two disjoint topics; words of one topic only ever appear together.
std::vector<std::vector<TokenId>> two_topic_corpus(const Vocab& v, std::mt19937_64& rng) {
  const std::vector<std::string> topics[2] = {{"rain", "thunder", "wind", "storm", "cloud"},
                                              {"engine", "horn", "tyre", "brake", "road"}};
  std::vector<std::vector<TokenId>> out;
  for (int s = 0; s < 400; ++s) {
    const auto& words = topics[s % 2];
    std::vector<TokenId> seq{kSos};
    for (int k = 0; k < 8; ++k) seq.push_back(v.id(words[rng() % words.size()]));
    seq.push_back(kEos);
    out.push_back(std::move(seq));
  }
  return out;
}

Vocab topic_vocab() {
  const std::vector<std::string> caps{"rain thunder wind storm cloud", "engine horn tyre brake road"};
  return Vocab::build(caps);
}

}  // namespace

TEST(Tokenize, LowercasesAndStripsPunctuation) {
  const Vocab v = Vocab::build(std::vector<std::string>{"A dog barks.", "Rain, heavy rain"});
  const std::vector<TokenId> ids = v.encode("A dog barks.");
  ASSERT_EQ(ids.size(), 5u);
  EXPECT_EQ(ids.front(), kSos);
  EXPECT_EQ(ids.back(), kEos);
  EXPECT_EQ(v.token(ids[1]), "a");
  EXPECT_EQ(v.token(ids[2]), "dog");
  EXPECT_EQ(v.token(ids[3]), "barks");
  EXPECT_EQ(tokenize("Rain, heavy rain"), (std::vector<std::string>{"rain", "heavy", "rain"}));
  EXPECT_THROW(tokenize(""), std::invalid_argument);
  EXPECT_THROW(tokenize(" ,. "), std::invalid_argument);
}

TEST(Vocab, ReservedIdsAndUnknownWords) {
  const Vocab v = Vocab::build(std::vector<std::string>{"a dog barks"});
  EXPECT_EQ(v.id("<pad>"), kPad);
  EXPECT_EQ(v.id("<sos>"), kSos);
  EXPECT_EQ(v.id("<eos>"), kEos);
  EXPECT_EQ(v.id("<unk>"), kUnk);
  EXPECT_EQ(v.size(), 7);
  EXPECT_EQ(v.encode("a cat barks")[2], kUnk);
  EXPECT_THROW(v.token(7), std::out_of_range);
  for (Index i = 0; i < v.size(); ++i) EXPECT_EQ(v.id(v.token(i)), i);
}

TEST(Vocab, DecodeInvertsEncodeOnInVocabularyCaptions) {
  const Vocab v = Vocab::build(std::vector<std::string>{"the bird sings while a car passes"});
  EXPECT_EQ(v.decode(v.encode("The bird sings, while a car passes!")), "the bird sings while a car passes");
  EXPECT_EQ(Vocab::strip_special(v.encode("a car")).size(), 2u);
}

TEST(Vocab, FileRoundTripKeepsIdsAndHash) {
  const Vocab v = Vocab::build(std::vector<std::string>{"a dog barks", "the engine idles"});
  const auto path = std::filesystem::temp_directory_path() / "laft_vocab_roundtrip.txt";
  v.save(path);
  const Vocab back = Vocab::load(path);
  std::filesystem::remove(path);
  EXPECT_TRUE(back == v);
  EXPECT_EQ(back.hash(), v.hash());
  EXPECT_NE(Vocab::build(std::vector<std::string>{"dog a barks"}).hash(),
            Vocab::build(std::vector<std::string>{"a dog barks"}).hash());
}

TEST(PadBatch, PadsToLongestSequence) {
  const std::vector<std::vector<TokenId>> seqs{{1, 4, 2}, {1, 4, 5, 6, 2}};
  const TokenBatch b = pad_batch(seqs);
  EXPECT_EQ(b.batch, 2);
  EXPECT_EQ(b.length, 5);
  EXPECT_EQ(b.ids, (std::vector<TokenId>{1, 4, 2, kPad, kPad, 1, 4, 5, 6, 2}));
  EXPECT_EQ(b.valid, (std::vector<std::uint8_t>{1, 1, 1, 0, 0, 1, 1, 1, 1, 1}));
  const TokenBatch one = pad_batch(std::span(seqs).subspan(1));
  EXPECT_TRUE(std::all_of(one.valid.begin(), one.valid.end(), [](auto f) { return f == 1; }));
  EXPECT_THROW(pad_batch(std::vector<std::vector<TokenId>>{}), std::invalid_argument);
}

TEST(Word2Vec, ZeroEpochsReturnsInitialization) {
  const Vocab v = topic_vocab();
  std::mt19937_64 rng(1);
  const auto corpus = two_topic_corpus(v, rng);
  Word2VecConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 0;
  cfg.seed = 3;
  const auto r = train_word2vec(corpus, v.size(), cfg);
  EXPECT_TRUE(r.input_vectors == word2vec_init(v.size(), cfg));
  EXPECT_TRUE(r.epoch_loss.empty());
  EXPECT_TRUE(r.input_vectors.row(kPad).isZero(0.0));
}

TEST(Word2Vec, CooccurringWordsEndCloserAndLossFalls) {
  const Vocab v = topic_vocab();
  std::mt19937_64 rng(2);
  const auto corpus = two_topic_corpus(v, rng);
  Word2VecConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 5;
  cfg.seed = 4;
  const auto r = train_word2vec(corpus, v.size(), cfg);
  const RowMatrix& t = r.input_vectors;
  EXPECT_GT(cosine(t, v.id("rain"), v.id("storm")), cosine(t, v.id("rain"), v.id("engine")));
  EXPECT_GT(cosine(t, v.id("horn"), v.id("brake")), cosine(t, v.id("horn"), v.id("thunder")));
  EXPECT_TRUE(t.row(kPad).isZero(0.0));
  EXPECT_TRUE(train_word2vec(corpus, v.size(), cfg).input_vectors == t);
}

TEST(Word2Vec, EpochLossDecreasesOnManyTopics) {
  std::vector<std::string> lines;
  for (int topic = 0; topic < 10; ++topic) {
    std::string line;
    for (int w = 0; w < 10; ++w) line += "t" + std::to_string(topic) + "w" + std::to_string(w) + " ";
    lines.push_back(line);
  }
  const Vocab v = Vocab::build(lines);
  std::mt19937_64 rng(5);
  std::vector<std::vector<TokenId>> corpus;
  for (int s = 0; s < 200; ++s) {
    const int topic = static_cast<int>(rng() % 10);
    std::vector<TokenId> seq{kSos};
    for (int k = 0; k < 10; ++k)
      seq.push_back(v.id("t" + std::to_string(topic) + "w" + std::to_string(rng() % 10)));
    seq.push_back(kEos);
    corpus.push_back(std::move(seq));
  }
  Word2VecConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 5;
  cfg.seed = 6;
  const auto r = train_word2vec(corpus, v.size(), cfg);
  ASSERT_EQ(r.epoch_loss.size(), 5u);
  for (std::size_t e = 1; e < r.epoch_loss.size(); ++e) EXPECT_LT(r.epoch_loss[e], r.epoch_loss[e - 1]);
}

TEST(Word2Vec, Errors) {
  Word2VecConfig cfg;
  cfg.dim = 4;
  EXPECT_THROW(train_word2vec(std::vector<std::vector<TokenId>>{}, 10, cfg), std::invalid_argument);
  const std::vector<std::vector<TokenId>> small{{1, 4, 5, 2}};
  EXPECT_THROW(train_word2vec(small, 6, cfg), std::invalid_argument);
  const std::vector<std::vector<TokenId>> bad{{1, 4, 40, 2}};
  EXPECT_THROW(train_word2vec(bad, 12, cfg), std::exception);
}
