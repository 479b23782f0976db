#include "laft/model.hpp"

#include <stdexcept>

namespace laft {
namespace {

DecoderConfig with_vocab(DecoderConfig d, Index vocab_size) {
  d.vocab_size = vocab_size;
  return d;
}

}  // namespace

CaptionModel::CaptionModel(const ModelConfig& config, Vocab vocab, std::uint64_t seed)
    : config_(config),
      vocab_(std::move(vocab)),
      rng_(seed),
      encoder_(config.input == FeatureKind::logmel ? std::optional<Encoder>(std::in_place, config.encoder, rng_)
                                                  : std::nullopt),
      decoder_(with_vocab(config.decoder, vocab_.size()), rng_) {
  config_.decoder.vocab_size = vocab_.size();
  if (encoder_ && config_.encoder.out_dim != config_.decoder.dim)
    throw std::invalid_argument("encoder out_dim " + std::to_string(config_.encoder.out_dim) +
                                " does not match decoder dim " + std::to_string(config_.decoder.dim));
}

Tensor CaptionModel::audio_features(Tape& tape, const Tensor& x, NormMode mode) {
  if (encoder_) return encoder_->encode(tape, x, mode);
  if (x.rank() != 3 || x.dim(2) != config_.decoder.dim)
    throw ShapeError("imported audio features must be [B, L, " + std::to_string(config_.decoder.dim) + "], got " +
                     to_string(x.shape()));
  return x;
}

ParamList CaptionModel::parameters() const {
  ParamList out;
  if (encoder_) out = encoder_->parameters();
  for (auto& p : decoder_.parameters()) out.push_back(std::move(p));
  return out;
}

std::vector<Encoder::NamedStats> CaptionModel::running_stats() {
  if (!encoder_) return {};
  return encoder_->running_stats();
}

void CaptionModel::set_window(Index size, bool enabled) {
  decoder_.set_window(size, enabled);
  config_.decoder.window = size;
  config_.decoder.window_enabled = enabled;
}

void CaptionModel::set_embedding_trainable(bool trainable) { decoder_.embedding().set_requires_grad(trainable); }

Index CaptionModel::load_embeddings(const Vocab& source_vocab, const RowMatrix& table) {
  if (table.cols() != config_.decoder.dim)
    throw std::invalid_argument("embedding width " + std::to_string(table.cols()) + " does not match decoder dim " +
                                std::to_string(config_.decoder.dim));
  if (table.rows() != source_vocab.size())
    throw std::invalid_argument("embedding table has " + std::to_string(table.rows()) + " rows for a vocabulary of " +
                                std::to_string(source_vocab.size()));
  auto dst = decoder_.embedding().matrix();
  Index copied = 0;
  for (TokenId id = kFirstWord; id < vocab_.size(); ++id) {
    const std::string& tok = vocab_.token(id);
    if (!source_vocab.contains(tok)) continue;
    dst.row(id) = table.row(source_vocab.id(tok));
    ++copied;
  }
  return copied;
}

void CaptionModel::extend_vocab(const Vocab& bigger) {
  if (bigger.size() < vocab_.size() ||
      !std::equal(vocab_.tokens().begin(), vocab_.tokens().end(), bigger.tokens().begin()))
    throw std::invalid_argument("extended vocabulary must keep existing token ids");
  decoder_.extend_vocab(bigger.size(), rng_);
  vocab_ = bigger;
  config_.decoder.vocab_size = vocab_.size();
}

}  // namespace laft
