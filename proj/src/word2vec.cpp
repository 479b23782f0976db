#include "laft/word2vec.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace laft {
namespace {

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }
double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

RowMatrix word2vec_init(Index vocab_size, const Word2VecConfig& config) {
  std::mt19937_64 rng(config.seed);
  const double bound = 0.5 / static_cast<double>(config.dim);
  std::uniform_real_distribution<double> dist(-bound, bound);
  RowMatrix table(vocab_size, config.dim);
  for (Index i = 0; i < table.size(); ++i) table.data()[i] = dist(rng);
  table.row(kPad).setZero();
  return table;
}

Word2VecResult train_word2vec(std::span<const std::vector<TokenId>> corpus, Index vocab_size,
                              const Word2VecConfig& config) {
  if (corpus.empty()) throw std::invalid_argument("word2vec: empty corpus");
  std::vector<std::vector<TokenId>> sentences;
  std::vector<double> counts(static_cast<std::size_t>(vocab_size), 0.0);
  std::size_t total_words = 0;
  for (const auto& seq : corpus) {
    std::vector<TokenId> s;
    for (TokenId t : seq) {
      if (t >= vocab_size || t < 0) throw std::invalid_argument("word2vec: token id outside vocabulary");
      if (t < kFirstWord) continue;
      s.push_back(t);
      counts[static_cast<std::size_t>(t)] += 1.0;
    }
    total_words += s.size();
    if (!s.empty()) sentences.push_back(std::move(s));
  }
  const auto distinct = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; });
  if (distinct < config.negatives + 1)
    throw std::invalid_argument("word2vec: vocabulary smaller than negatives + 1");

  std::vector<double> weights(counts.size());
  std::transform(counts.begin(), counts.end(), weights.begin(), [](double c) { return std::pow(c, 0.75); });
  std::discrete_distribution<TokenId> noise(weights.begin(), weights.end());

  Word2VecResult result;
  result.input_vectors = word2vec_init(vocab_size, config);
  RowMatrix& in = result.input_vectors;
  RowMatrix out = RowMatrix::Zero(vocab_size, config.dim);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_int_distribution<int> shrink(1, std::max(1, config.window));

  const double total = static_cast<double>(std::max<std::size_t>(1, total_words)) * std::max(1, config.epochs);
  double processed = 0.0;
  Eigen::RowVectorXd grad_in(config.dim);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss = 0.0;
    std::size_t pairs = 0;
    for (const auto& s : sentences) {
      for (std::size_t c = 0; c < s.size(); ++c) {
        const double lr = config.learning_rate * std::max(1e-4, 1.0 - processed / total);
        processed += 1.0;
        const int b = shrink(rng);
        const std::size_t lo = c >= static_cast<std::size_t>(b) ? c - static_cast<std::size_t>(b) : 0;
        const std::size_t hi = std::min(s.size() - 1, c + static_cast<std::size_t>(b));
        for (std::size_t o = lo; o <= hi; ++o) {
          if (o == c) continue;
          const TokenId center = s[c];
          grad_in.setZero();
          for (int k = 0; k <= config.negatives; ++k) {
            TokenId target = s[o];
            double label = 1.0;
            if (k > 0) {
              target = noise(rng);
              if (target == s[o]) continue;
              label = 0.0;
            }
            const double score = in.row(center).dot(out.row(target));
            loss -= label > 0 ? log_sigmoid(score) : log_sigmoid(-score);
            const double g = (label - sigmoid(score)) * lr;
            grad_in += g * out.row(target);
            out.row(target) += g * in.row(center);
          }
          in.row(center) += grad_in;
          ++pairs;
        }
      }
    }
    result.epoch_loss.push_back(pairs ? loss / static_cast<double>(pairs) : 0.0);
  }
  return result;
}

}  // namespace laft
