#include "laft/decoder.hpp"

#include "laft/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace laft {
namespace {

Tensor uniform_tensor(Shape shape, double bound, std::mt19937_64& rng) {
  Tensor t(std::move(shape), true);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

void init_linear(Tensor& w, Tensor& b, Index in, Index out, std::mt19937_64& rng) {
  w = uniform_tensor({in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  b = Tensor({out}, true);
}

NormParams init_norm(Index dim) {
  return {Tensor::filled({dim}, 1.0).set_requires_grad(true), Tensor({dim}, true)};
}

Tensor gated_mix(Tape& tape, const Tensor& gate_input, const Tensor& bias, const Tensor& key, const Tensor& value,
                 std::span<const std::uint8_t> key_valid) {
  return mul(tape, sigmoid(tape, gate_input), aft_mix(tape, bias, key, value, key_valid));
}

Tensor add_norm(Tape& tape, const Tensor& sub, const Tensor& residual, const NormParams& p, double eps) {
  return layer_norm(tape, add(tape, sub, residual), p.gain, p.bias, eps);
}

}  // namespace

void DecoderConfig::validate() const {
  if (dim <= 0) throw std::invalid_argument("decoder dim must be positive");
  if (vocab_size < 4) throw std::invalid_argument("decoder vocab must hold the reserved tokens");
  if (blocks <= 0) throw std::invalid_argument("decoder needs at least one block");
  if (max_tokens <= 0 || max_frames <= 0) throw std::invalid_argument("decoder maxima must be positive");
  if (window <= 0) throw std::invalid_argument("window size must be positive");
}

Tensor fim_bias(Tape& tape, const Tensor& mask_weight, Index tokens) {
  if (tokens > mask_weight.dim(0))
    throw ShapeError("caption length " + std::to_string(tokens) + " exceeds N_max " + std::to_string(mask_weight.dim(0)));
  const auto n = static_cast<std::size_t>(tokens * tokens);
  std::vector<std::uint8_t> keep(n);
  std::vector<double> fill(n, 0.0);
  for (Index r = 0; r < tokens; ++r)
    for (Index c = 0; c < tokens; ++c) {
      const auto k = static_cast<std::size_t>(r * tokens + c);
      keep[k] = c <= r;
      if (c > r) fill[k] = kMaskBias;
    }
  return masked_slice(tape, mask_weight, tokens, tokens, keep, fill);
}

Tensor lac_bias(Tape& tape, const Tensor& local_weight, Index tokens, Index frames, const WindowRule& rule) {
  if (tokens > local_weight.dim(0) || frames > local_weight.dim(1))
    throw ShapeError("LAC window " + std::to_string(tokens) + "x" + std::to_string(frames) + " exceeds Z " +
                     to_string(local_weight.shape()));
  const auto n = static_cast<std::size_t>(tokens * frames);
  std::vector<std::uint8_t> keep(n);
  const std::vector<double> fill(n, 0.0);
  for (Index r = 0; r < tokens; ++r)
    for (Index c = 0; c < frames; ++c) keep[static_cast<std::size_t>(r * frames + c)] = rule.inside(r + 1, c + 1);
  return masked_slice(tape, local_weight, tokens, frames, keep, fill);
}

Tensor fim_forward(Tape& tape, const Tensor& y, const FimParams& p, std::span<const std::uint8_t> token_valid) {
  if (y.rank() != 3) throw ShapeError("fim_forward: expected [B, N, D], got " + to_string(y.shape()));
  const Tensor bias = fim_bias(tape, p.mask_weight, y.dim(1));
  const Tensor q = linear(tape, y, p.q_w, p.q_b);
  const Tensor k = linear(tape, y, p.k_w, p.k_b);
  const Tensor v = linear(tape, y, p.v_w, p.v_b);
  return gated_mix(tape, q, bias, k, v, token_valid);
}

Tensor lac_forward(Tape& tape, const Tensor& y_hat, const Tensor& h, const LacParams& p, const WindowRule& rule,
                   std::span<const std::uint8_t> frame_valid) {
  if (y_hat.rank() != 3 || h.rank() != 3 || y_hat.dim(0) != h.dim(0))
    throw ShapeError("lac_forward: expected [B, N, D] and [B, L, D], got " + to_string(y_hat.shape()) + " and " +
                     to_string(h.shape()));
  const Tensor bias = lac_bias(tape, p.local_weight, y_hat.dim(1), h.dim(1), rule);
  const Tensor q = linear(tape, y_hat, p.q_w, p.q_b);
  const Tensor hk = linear(tape, h, p.k_w, p.k_b);
  const Tensor hv = linear(tape, h, p.v_w, p.v_b);
  return gated_mix(tape, q, bias, hk, hv, frame_valid);
}

Tensor decoder_block(Tape& tape, const Tensor& y, const Tensor& h, const BlockParams& p, const DecoderConfig& config,
                     const BlockInputs& inputs) {
  const WindowRule rule{config.window, config.window_enabled, config.index_scale};
  const Tensor a = add_norm(tape, fim_forward(tape, y, p.fim, inputs.token_valid), y, p.norm1, config.norm_eps);
  Tensor b = add_norm(tape, lac_forward(tape, a, h, p.lac, rule, inputs.frame_valid), a, p.norm2, config.norm_eps);
  if (config.ffn) {
    const Tensor hidden = relu(tape, linear(tape, b, p.ffn.w1, p.ffn.b1));
    b = add_norm(tape, linear(tape, hidden, p.ffn.w2, p.ffn.b2), b, p.norm3, config.norm_eps);
  }
  return b;
}

Tensor sinusoidal_encoding(Index tokens, Index dim) {
  Tensor pe({tokens, dim});
  for (Index pos = 0; pos < tokens; ++pos)
    for (Index i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      pe[pos * dim + i] = (i % 2 == 0) ? std::sin(static_cast<double>(pos) * rate) : std::cos(static_cast<double>(pos) * rate);
    }
  return pe;
}

Decoder::Decoder(const DecoderConfig& config, std::mt19937_64& rng) : config_(config) {
  config_.validate();
  const Index d = config_.dim;
  embedding_ = Tensor({config_.vocab_size, d}, true);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = d; i < embedding_.size(); ++i) embedding_[i] = normal(rng);
  blocks_.resize(static_cast<std::size_t>(config_.blocks));
  for (BlockParams& b : blocks_) {
    init_linear(b.fim.q_w, b.fim.q_b, d, d, rng);
    init_linear(b.fim.k_w, b.fim.k_b, d, d, rng);
    init_linear(b.fim.v_w, b.fim.v_b, d, d, rng);
    b.fim.mask_weight = Tensor({config_.max_tokens, config_.max_tokens}, true);
    b.norm1 = init_norm(d);
    init_linear(b.lac.q_w, b.lac.q_b, d, d, rng);
    init_linear(b.lac.k_w, b.lac.k_b, d, d, rng);
    init_linear(b.lac.v_w, b.lac.v_b, d, d, rng);
    b.lac.local_weight = Tensor({config_.max_tokens, config_.max_frames}, true);
    b.norm2 = init_norm(d);
    if (config_.ffn) {
      init_linear(b.ffn.w1, b.ffn.b1, d, 4 * d, rng);
      init_linear(b.ffn.w2, b.ffn.b2, 4 * d, d, rng);
      b.norm3 = init_norm(d);
    }
  }
  init_linear(out_w_, out_b_, d, config_.vocab_size, rng);
}

Tensor Decoder::forward(Tape& tape, const TokenBatch& tokens, const Tensor& h,
                        std::span<const std::uint8_t> frame_valid) const {
  if (tokens.batch <= 0 || tokens.length <= 0 || static_cast<Index>(tokens.ids.size()) != tokens.batch * tokens.length)
    throw ShapeError("decoder: malformed token batch");
  if (tokens.length > config_.max_tokens)
    throw ShapeError("caption length " + std::to_string(tokens.length) + " exceeds N_max " +
                     std::to_string(config_.max_tokens));
  if (h.rank() != 3 || h.dim(0) != tokens.batch || h.dim(2) != config_.dim)
    throw ShapeError("decoder: audio feature must be [B, L, D], got " + to_string(h.shape()));
  if (h.dim(1) > config_.max_frames)
    throw ShapeError("audio length " + std::to_string(h.dim(1)) + " exceeds L_max " + std::to_string(config_.max_frames));
  Tensor y = laft::embedding(tape, embedding_, tokens.ids, {tokens.batch, tokens.length}, 0);
  y = add(tape, y, sinusoidal_encoding(tokens.length, config_.dim));
  const BlockInputs inputs{tokens.valid, frame_valid};
  for (const BlockParams& b : blocks_) y = decoder_block(tape, y, h, b, config_, inputs);
  return log_softmax(tape, linear(tape, y, out_w_, out_b_));
}

void Decoder::extend_vocab(Index new_size, std::mt19937_64& rng) {
  const Index old = config_.vocab_size, d = config_.dim;
  if (new_size < old) throw std::invalid_argument("extend_vocab cannot shrink the vocabulary");
  if (new_size == old) return;
  const bool trainable = embedding_.requires_grad();
  Tensor table({new_size, d}, trainable);
  table.matrix().topRows(old) = embedding_.matrix();
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = old * d; i < new_size * d; ++i) table[i] = normal(rng);
  embedding_ = table;

  Tensor w({d, new_size}, true), b({new_size}, true);
  w.matrix().leftCols(old) = out_w_.matrix();
  b.vector().head(old) = out_b_.vector();
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  for (Index r = 0; r < d; ++r)
    for (Index c = old; c < new_size; ++c) w[r * new_size + c] = uniform(rng);
  out_w_ = w;
  out_b_ = b;
  config_.vocab_size = new_size;
}

ParamList Decoder::parameters() const {
  ParamList out;
  out.push_back({"dec.embedding", embedding_});
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const BlockParams& b = blocks_[i];
    const std::string p = "dec.block" + std::to_string(i) + ".";
    out.push_back({p + "fim.q.weight", b.fim.q_w});
    out.push_back({p + "fim.q.bias", b.fim.q_b});
    out.push_back({p + "fim.k.weight", b.fim.k_w});
    out.push_back({p + "fim.k.bias", b.fim.k_b});
    out.push_back({p + "fim.v.weight", b.fim.v_w});
    out.push_back({p + "fim.v.bias", b.fim.v_b});
    out.push_back({p + "fim.M", b.fim.mask_weight});
    out.push_back({p + "norm1.gain", b.norm1.gain});
    out.push_back({p + "norm1.bias", b.norm1.bias});
    out.push_back({p + "lac.q.weight", b.lac.q_w});
    out.push_back({p + "lac.q.bias", b.lac.q_b});
    out.push_back({p + "lac.k.weight", b.lac.k_w});
    out.push_back({p + "lac.k.bias", b.lac.k_b});
    out.push_back({p + "lac.v.weight", b.lac.v_w});
    out.push_back({p + "lac.v.bias", b.lac.v_b});
    out.push_back({p + "lac.Z", b.lac.local_weight});
    out.push_back({p + "norm2.gain", b.norm2.gain});
    out.push_back({p + "norm2.bias", b.norm2.bias});
    if (config_.ffn) {
      out.push_back({p + "ffn.w1", b.ffn.w1});
      out.push_back({p + "ffn.b1", b.ffn.b1});
      out.push_back({p + "ffn.w2", b.ffn.w2});
      out.push_back({p + "ffn.b2", b.ffn.b2});
      out.push_back({p + "norm3.gain", b.norm3.gain});
      out.push_back({p + "norm3.bias", b.norm3.bias});
    }
  }
  out.push_back({"dec.out.weight", out_w_});
  out.push_back({"dec.out.bias", out_b_});
  return out;
}

}  // namespace laft
