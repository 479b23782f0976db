#include "laft/config.hpp"

#include <initializer_list>
#include <set>

namespace laft {
namespace {

using nlohmann::json;

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  const std::set<std::string_view> ok(allowed);
  for (const auto& [key, _] : j.items())
    if (!ok.contains(key)) throw ConfigError("unknown config key '" + std::string(where) + "." + key + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out, std::string_view where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + std::string(where) + "." + key + "' has the wrong type");
  }
}

json encoder_json(const EncoderConfig& e) {
  return {{"channels", e.channels}, {"out_dim", e.out_dim}, {"hidden_dim", e.hidden_dim},
          {"n_mels", e.n_mels}, {"use_batchnorm", e.use_batchnorm}};
}

json decoder_json(const DecoderConfig& d) {
  return {{"dim", d.dim},
          {"blocks", d.blocks},
          {"ffn", d.ffn},
          {"max_tokens", d.max_tokens},
          {"max_frames", d.max_frames},
          {"window", d.window},
          {"window_enabled", d.window_enabled},
          {"index_scale", d.index_scale},
          {"norm_eps", d.norm_eps}};
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) throw ConfigError("label_smoothing must be in [0, 1)");
  if (lr < 0.0) throw ConfigError("lr must be non-negative");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (clip_norm <= 0.0) throw ConfigError("clip_norm must be positive");
}

std::string to_string(FeatureKind kind) { return kind == FeatureKind::logmel ? "logmel" : "embedded"; }

FeatureKind feature_kind_from_string(std::string_view s) {
  if (s == "logmel") return FeatureKind::logmel;
  if (s == "embedded") return FeatureKind::embedded;
  throw ConfigError("unknown feature kind '" + std::string(s) + "'");
}

RunConfig preset_config(std::string_view name) {
  RunConfig c;
  c.preset = std::string(name);
  c.model.decoder.dim = 128;
  c.train.batch_size = 16;
  c.decode.beam = 5;
  if (name == "paper") {
    c.model.encoder = EncoderConfig::full();
    c.model.decoder.window = 80;
    c.train.lr = 1e-4;
  } else if (name == "desk") {
    c.model.encoder = EncoderConfig{};
    c.model.decoder.window = 4;  // a quarter of the 16 encoder frames of a 256-frame clip
    c.train.lr = 1e-3;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "' (expected paper or desk)");
  }
  c.word2vec.dim = c.model.decoder.dim;
  return c;
}

json to_json(const RunConfig& c) {
  const auto& t = c.train;
  const auto& w = c.word2vec;
  return {{"preset", c.preset},
          {"seed", c.seed},
          {"model", {{"input", to_string(c.model.input)}, {"encoder", encoder_json(c.model.encoder)},
                     {"decoder", decoder_json(c.model.decoder)}}},
          {"train",
           {{"batch_size", t.batch_size},
            {"lr", t.lr},
            {"label_smoothing", t.label_smoothing},
            {"epochs", t.epochs},
            {"clip_grad", t.clip_grad},
            {"clip_norm", t.clip_norm},
            {"finetune_embeddings", t.finetune_embeddings},
            {"select_best", t.select_best},
            {"augment",
             {{"enabled", t.augment.enabled}, {"time_masks", t.augment.time_masks},
              {"freq_masks", t.augment.freq_masks}, {"max_width", t.augment.max_width}}}}},
          {"decode", {{"beam", c.decode.beam}, {"max_len", c.decode.max_len}}},
          {"word2vec",
           {{"dim", w.dim}, {"window", w.window}, {"negatives", w.negatives}, {"epochs", w.epochs},
            {"learning_rate", w.learning_rate}, {"seed", w.seed}}}};
}

RunConfig apply_json(RunConfig c, const json& j) {
  check_keys(j, "config", {"preset", "seed", "model", "train", "decode", "word2vec"});
  read(j, "preset", c.preset, "config");
  read(j, "seed", c.seed, "config");
  if (j.contains("model")) {
    const json& m = j["model"];
    check_keys(m, "model", {"input", "encoder", "decoder"});
    if (m.contains("input")) {
      std::string s;
      read(m, "input", s, "model");
      c.model.input = feature_kind_from_string(s);
    }
    if (m.contains("encoder")) {
      const json& e = m["encoder"];
      check_keys(e, "model.encoder", {"channels", "out_dim", "hidden_dim", "n_mels", "use_batchnorm"});
      auto& ec = c.model.encoder;
      read(e, "channels", ec.channels, "model.encoder");
      read(e, "out_dim", ec.out_dim, "model.encoder");
      read(e, "hidden_dim", ec.hidden_dim, "model.encoder");
      read(e, "n_mels", ec.n_mels, "model.encoder");
      read(e, "use_batchnorm", ec.use_batchnorm, "model.encoder");
    }
    if (m.contains("decoder")) {
      const json& d = m["decoder"];
      check_keys(d, "model.decoder",
                 {"dim", "blocks", "ffn", "max_tokens", "max_frames", "window", "window_enabled", "index_scale",
                  "norm_eps"});
      auto& dc = c.model.decoder;
      read(d, "dim", dc.dim, "model.decoder");
      read(d, "blocks", dc.blocks, "model.decoder");
      read(d, "ffn", dc.ffn, "model.decoder");
      read(d, "max_tokens", dc.max_tokens, "model.decoder");
      read(d, "max_frames", dc.max_frames, "model.decoder");
      read(d, "window", dc.window, "model.decoder");
      read(d, "window_enabled", dc.window_enabled, "model.decoder");
      read(d, "index_scale", dc.index_scale, "model.decoder");
      read(d, "norm_eps", dc.norm_eps, "model.decoder");
    }
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    check_keys(t, "train",
               {"batch_size", "lr", "label_smoothing", "epochs", "clip_grad", "clip_norm", "finetune_embeddings",
                "select_best", "augment"});
    auto& tc = c.train;
    read(t, "batch_size", tc.batch_size, "train");
    read(t, "lr", tc.lr, "train");
    read(t, "label_smoothing", tc.label_smoothing, "train");
    read(t, "epochs", tc.epochs, "train");
    read(t, "clip_grad", tc.clip_grad, "train");
    read(t, "clip_norm", tc.clip_norm, "train");
    read(t, "finetune_embeddings", tc.finetune_embeddings, "train");
    read(t, "select_best", tc.select_best, "train");
    if (t.contains("augment")) {
      const json& a = t["augment"];
      check_keys(a, "train.augment", {"enabled", "time_masks", "freq_masks", "max_width"});
      read(a, "enabled", tc.augment.enabled, "train.augment");
      read(a, "time_masks", tc.augment.time_masks, "train.augment");
      read(a, "freq_masks", tc.augment.freq_masks, "train.augment");
      read(a, "max_width", tc.augment.max_width, "train.augment");
    }
  }
  if (j.contains("decode")) {
    const json& d = j["decode"];
    check_keys(d, "decode", {"beam", "max_len"});
    read(d, "beam", c.decode.beam, "decode");
    read(d, "max_len", c.decode.max_len, "decode");
  }
  if (j.contains("word2vec")) {
    const json& w = j["word2vec"];
    check_keys(w, "word2vec", {"dim", "window", "negatives", "epochs", "learning_rate", "seed"});
    read(w, "dim", c.word2vec.dim, "word2vec");
    read(w, "window", c.word2vec.window, "word2vec");
    read(w, "negatives", c.word2vec.negatives, "word2vec");
    read(w, "epochs", c.word2vec.epochs, "word2vec");
    read(w, "learning_rate", c.word2vec.learning_rate, "word2vec");
    read(w, "seed", c.word2vec.seed, "word2vec");
  }
  c.train.validate();
  if (c.decode.beam < 1) throw ConfigError("decode.beam must be at least 1");
  if (c.decode.max_len < 1) throw ConfigError("decode.max_len must be at least 1");
  return c;
}

RunConfig config_from_json(const json& j) {
  std::string preset = "desk";
  if (j.is_object() && j.contains("preset")) read(j, "preset", preset, "config");
  return apply_json(preset_config(preset), j);
}

}  // namespace laft
