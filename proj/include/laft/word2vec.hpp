#pragma once

#include "laft/tensor.hpp"
#include "laft/vocab.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace laft {

/// Skip-gram with negative sampling.
struct Word2VecConfig {
  Index dim = 128;
  int window = 5;      // maximum context offset; the effective window is drawn from [1, window]
  int negatives = 5;
  int epochs = 5;
  double learning_rate = 0.025;  // decays linearly to 1e-4 of itself over all epochs
  std::uint64_t seed = 0;
};

struct Word2VecResult {
  RowMatrix input_vectors;       // [V, dim]; row <pad> stays zero
  std::vector<double> epoch_loss;  // mean negative-sampling loss per (center, context) pair
};

/// Initial input table: uniform in [-0.5/dim, 0.5/dim], zero <pad> row.
RowMatrix word2vec_init(Index vocab_size, const Word2VecConfig& config);

/// Trains on token-id sequences (reserved ids are skipped). Throws if the
/// corpus is empty or has fewer than negatives + 1 distinct words.
Word2VecResult train_word2vec(std::span<const std::vector<TokenId>> corpus, Index vocab_size,
                              const Word2VecConfig& config);

}  // namespace laft
