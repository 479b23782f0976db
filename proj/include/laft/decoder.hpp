#pragma once

#include "laft/tensor.hpp"
#include "laft/vocab.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace laft {

struct DecoderConfig {
  Index dim = 128;
  Index vocab_size = 0;
  Index blocks = 2;
  bool ffn = true;
  Index max_tokens = 40;   // N_max: rows of the masked weight M and the local weight Z
  Index max_frames = 192;  // L_max: columns of Z
  Index window = 80;       // local region size s
  bool window_enabled = true;
  /// Word index n is compared with frame index l as (l - index_scale * n) < s.
  /// 1.0 compares them directly.
  double index_scale = 1.0;
  double norm_eps = 1e-5;

  void validate() const;
};

/// Local(z) rule with 1-based positions: z if (l - n) < s, else 0.
inline double local_window(double z, Index n, Index l, Index s) { return (l - n) < s ? z : 0.0; }

/// Whether frame l (1-based) receives the learned weight for word n (1-based).
struct WindowRule {
  Index size = 80;
  bool enabled = true;
  double index_scale = 1.0;

  bool inside(Index n, Index l) const {
    if (!enabled) return true;
    if (index_scale == 1.0) return (l - n) < size;
    return static_cast<double>(l) - index_scale * static_cast<double>(n) < static_cast<double>(size);
  }
};

/// Future interference masking: gated attention-free mixing of the caption
/// features with the learnable causal bias M.
struct FimParams {
  Tensor q_w, q_b, k_w, k_b, v_w, v_b;
  Tensor mask_weight;  // M, [N_max, N_max]; only the lower triangle is ever read
};

/// Local information assisted captioning: gated attention-free mixing of
/// audio frames with the learnable, windowed bias Z.
struct LacParams {
  Tensor q_w, q_b, k_w, k_b, v_w, v_b;
  Tensor local_weight;  // Z, [N_max, L_max]
};

struct NormParams {
  Tensor gain, bias;
};

struct FfnParams {
  Tensor w1, b1, w2, b2;
};

struct BlockParams {
  FimParams fim;
  NormParams norm1;
  LacParams lac;
  NormParams norm2;
  FfnParams ffn;
  NormParams norm3;
};

/// Effective FIM bias for N tokens: m[n,i] for i <= n, kMaskBias above the
/// diagonal. Gradient reaches only the lower triangle.
Tensor fim_bias(Tape& tape, const Tensor& mask_weight, Index tokens);

/// Effective LAC bias for N tokens and L frames: z[n,l] inside the window,
/// 0 outside it.
Tensor lac_bias(Tape& tape, const Tensor& local_weight, Index tokens, Index frames, const WindowRule& rule);

/// y: [B, N, D]; token_valid: B*N flags (empty = all valid). Returns
/// sigmoid(Q) * mix, before the residual add & norm.
Tensor fim_forward(Tape& tape, const Tensor& y, const FimParams& p, std::span<const std::uint8_t> token_valid = {});

/// y_hat: [B, N, D], h: [B, L, D]; frame_valid: B*L flags (empty = all valid).
Tensor lac_forward(Tape& tape, const Tensor& y_hat, const Tensor& h, const LacParams& p, const WindowRule& rule,
                   std::span<const std::uint8_t> frame_valid = {});

struct BlockInputs {
  std::span<const std::uint8_t> token_valid;
  std::span<const std::uint8_t> frame_valid;
};

/// a = LN(FIM(Y) + Y); b = LN(LAC(a, H) + a); with FFN: LN(FFN(b) + b).
Tensor decoder_block(Tape& tape, const Tensor& y, const Tensor& h, const BlockParams& p, const DecoderConfig& config,
                     const BlockInputs& inputs = {});

/// sin/cos positional table, [tokens, dim].
Tensor sinusoidal_encoding(Index tokens, Index dim);

class Decoder {
 public:
  Decoder(const DecoderConfig& config, std::mt19937_64& rng);

  const DecoderConfig& config() const { return config_; }
  WindowRule window_rule() const { return {config_.window, config_.window_enabled, config_.index_scale}; }
  void set_window(Index size, bool enabled) {
    config_.window = size;
    config_.window_enabled = enabled;
  }

  /// Log-posteriors [B, N, V]; row n scores token n+1 given tokens <= n and H.
  Tensor forward(Tape& tape, const TokenBatch& tokens, const Tensor& h,
                 std::span<const std::uint8_t> frame_valid = {}) const;

  ParamList parameters() const;

  /// Grows the vocabulary to `new_size`. Existing embedding rows and output
  /// columns are kept; new ones are freshly initialized.
  void extend_vocab(Index new_size, std::mt19937_64& rng);

  Tensor& embedding() { return embedding_; }
  const Tensor& embedding() const { return embedding_; }
  std::vector<BlockParams>& blocks() { return blocks_; }
  const std::vector<BlockParams>& blocks() const { return blocks_; }
  Tensor& out_weight() { return out_w_; }
  Tensor& out_bias() { return out_b_; }

 private:
  DecoderConfig config_;
  Tensor embedding_;  // [V, D]; row 0 (<pad>) is zero and frozen
  std::vector<BlockParams> blocks_;
  Tensor out_w_, out_b_;
};

}  // namespace laft
