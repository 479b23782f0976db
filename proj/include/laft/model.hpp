#pragma once

#include "laft/config.hpp"
#include "laft/decoder.hpp"
#include "laft/encoder.hpp"
#include "laft/vocab.hpp"

#include <memory>
#include <optional>

namespace laft {

/// Encoder (absent when features are imported), decoder and vocabulary.
class CaptionModel {
 public:
  CaptionModel(const ModelConfig& config, Vocab vocab, std::uint64_t seed);
  // Tensors are shared handles; a copy would silently alias every parameter.
  CaptionModel(const CaptionModel&) = delete;
  CaptionModel& operator=(const CaptionModel&) = delete;
  CaptionModel(CaptionModel&&) = default;
  CaptionModel& operator=(CaptionModel&&) = default;

  /// Config with decoder.vocab_size set to the current vocabulary size.
  const ModelConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  bool has_encoder() const { return encoder_.has_value(); }
  Encoder& encoder() { return *encoder_; }
  Decoder& decoder() { return decoder_; }
  const Decoder& decoder() const { return decoder_; }

  /// x: log-mel [B, T, F] when the model has an encoder, otherwise audio
  /// features [B, L, D] that are passed through unchanged.
  Tensor audio_features(Tape& tape, const Tensor& x, NormMode mode);

  /// Log-posteriors [B, N, V] for the input token batch.
  Tensor forward(Tape& tape, const TokenBatch& inputs, const Tensor& h,
                 std::span<const std::uint8_t> frame_valid = {}) const {
    return decoder_.forward(tape, inputs, h, frame_valid);
  }

  ParamList parameters() const;
  std::vector<Encoder::NamedStats> running_stats();

  void set_window(Index size, bool enabled);
  /// Freezes or unfreezes the embedding table.
  void set_embedding_trainable(bool trainable);
  /// Copies embedding rows for every token both vocabularies share. Returns
  /// the number of rows copied. Throws if the table width differs from D.
  Index load_embeddings(const Vocab& source_vocab, const RowMatrix& table);

  /// Adds the tokens of `bigger` that are missing here (it must start with
  /// this vocabulary). Used when fine-tuning on a new corpus.
  void extend_vocab(const Vocab& bigger);

 private:
  ModelConfig config_;
  Vocab vocab_;
  std::mt19937_64 rng_;
  std::optional<Encoder> encoder_;
  Decoder decoder_;
};

}  // namespace laft
