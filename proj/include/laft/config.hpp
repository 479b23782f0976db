#pragma once

#include "laft/decoder.hpp"
#include "laft/encoder.hpp"
#include "laft/word2vec.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <string_view>

namespace laft {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// What the clips of a corpus carry: log-mel spectrograms for the CNN encoder,
/// or precomputed audio features H that bypass it.
enum class FeatureKind { logmel, embedded };

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;  // vocab_size is taken from the vocabulary at build time
  FeatureKind input = FeatureKind::logmel;
};

struct AugmentConfig {
  bool enabled = false;
  int time_masks = 2;
  int freq_masks = 2;
  Index max_width = 8;
};

struct TrainConfig {
  Index batch_size = 16;
  double lr = 1e-4;
  double label_smoothing = 0.1;
  int epochs = 30;
  bool clip_grad = false;
  double clip_norm = 1.0;
  bool finetune_embeddings = true;
  /// Restore the parameters of the epoch with the lowest validation loss.
  bool select_best = true;
  AugmentConfig augment;

  void validate() const;
};

struct DecodeConfig {
  Index beam = 5;
  Index max_len = 30;
};

struct RunConfig {
  std::string preset = "desk";
  std::uint64_t seed = 0;
  ModelConfig model;
  TrainConfig train;
  DecodeConfig decode;
  Word2VecConfig word2vec;
};

/// "paper": full-size hyperparameters and encoder widths. "desk": the same
/// decoder with a quarter-width encoder, a window matched to 256-frame clips
/// and a larger learning rate, so CPU runs finish in minutes.
RunConfig preset_config(std::string_view name);

nlohmann::json to_json(const RunConfig& config);
/// Overlays `j` on `base`. Unknown keys and mistyped values throw ConfigError.
RunConfig apply_json(RunConfig base, const nlohmann::json& j);
/// Preset named by j["preset"] (default desk) with `j` applied on top.
RunConfig config_from_json(const nlohmann::json& j);

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view s);

}  // namespace laft
