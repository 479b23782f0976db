#pragma once

#include "laft/conv.hpp"
#include "laft/tensor.hpp"

#include <array>
#include <random>

namespace laft {

/// CNN topology of the 10-layer audio-tagging network: four blocks of
/// (conv3x3 -> BN -> ReLU) x 2 followed by 2x2 average pooling, mean over the
/// mel axis, then two linear layers (ReLU between) to `out_dim`.
struct EncoderConfig {
  std::array<Index, 4> channels{16, 32, 64, 128};
  Index out_dim = 128;
  /// Hidden width of the first linear layer; 0 means the last channel count.
  Index hidden_dim = 0;
  Index n_mels = 64;
  bool use_batchnorm = true;

  static EncoderConfig full() { return {{64, 128, 256, 512}, 128, 0, 64, true}; }
  Index hidden() const { return hidden_dim > 0 ? hidden_dim : channels[3]; }
  /// Throws std::invalid_argument unless channels double block to block and D > 0.
  void validate() const;
};

/// Output frame count after four 2x poolings: ceil(T / 16).
inline Index encoded_length(Index frames) { return (frames + 15) / 16; }

class Encoder {
 public:
  Encoder(const EncoderConfig& config, std::mt19937_64& rng);

  const EncoderConfig& config() const { return config_; }

  /// x: log-mel batch [B, T, F] -> audio feature [B, L, D].
  Tensor encode(Tape& tape, const Tensor& x, NormMode mode);

  ParamList parameters() const;

  struct NamedStats {
    std::string name;
    RunningStats* stats;
  };
  std::vector<NamedStats> running_stats();

 private:
  struct ConvUnit {
    Tensor weight, bias, gamma, beta;
    RunningStats stats;
  };
  Tensor conv_unit(Tape& tape, const Tensor& x, ConvUnit& unit, NormMode mode);

  EncoderConfig config_;
  std::array<std::array<ConvUnit, 2>, 4> blocks_;
  Tensor fc1_w_, fc1_b_, fc2_w_, fc2_b_;
};

}  // namespace laft
