#include "laft/encoder.hpp"

#include "laft/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace laft {
namespace {

Tensor normal_tensor(Shape shape, double stddev, std::mt19937_64& rng) {
  Tensor t(std::move(shape), true);
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

Tensor uniform_tensor(Shape shape, double bound, std::mt19937_64& rng) {
  Tensor t(std::move(shape), true);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace

void EncoderConfig::validate() const {
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i] <= 0) throw std::invalid_argument("encoder channels must be positive");
    if (i > 0 && channels[i] != 2 * channels[i - 1])
      throw std::invalid_argument("encoder channels must double from block to block");
  }
  if (out_dim <= 0) throw std::invalid_argument("encoder out_dim must be positive");
  if (n_mels <= 0) throw std::invalid_argument("encoder n_mels must be positive");
}

Encoder::Encoder(const EncoderConfig& config, std::mt19937_64& rng) : config_(config) {
  config_.validate();
  Index in = 1;
  for (std::size_t b = 0; b < 4; ++b) {
    for (std::size_t u = 0; u < 2; ++u) {
      const Index out = config_.channels[b];
      ConvUnit& unit = blocks_[b][u];
      unit.weight = normal_tensor({out, in, 3, 3}, std::sqrt(2.0 / static_cast<double>(in * 9)), rng);
      unit.bias = Tensor({out}, true);
      unit.gamma = Tensor::filled({out}, 1.0).set_requires_grad(true);
      unit.beta = Tensor({out}, true);
      in = out;
    }
  }
  const Index hidden = config_.hidden();
  fc1_w_ = uniform_tensor({in, hidden}, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  fc1_b_ = Tensor({hidden}, true);
  fc2_w_ = uniform_tensor({hidden, config_.out_dim}, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  fc2_b_ = Tensor({config_.out_dim}, true);
}

Tensor Encoder::conv_unit(Tape& tape, const Tensor& x, ConvUnit& unit, NormMode mode) {
  Tensor y = conv2d(tape, x, unit.weight, unit.bias, 1);
  y = config_.use_batchnorm ? batch_norm(tape, y, unit.gamma, unit.beta, unit.stats, mode)
                            : channel_affine(tape, y, unit.gamma, unit.beta);
  return relu(tape, y);
}

Tensor Encoder::encode(Tape& tape, const Tensor& x, NormMode mode) {
  if (x.rank() != 3) throw ShapeError("encode: expected [B, T, F], got " + to_string(x.shape()));
  const Index batch = x.dim(0), frames = x.dim(1), bands = x.dim(2);
  if (bands != config_.n_mels)
    throw ShapeError("encode: expected " + std::to_string(config_.n_mels) + " mel bands, got " + std::to_string(bands));
  if (frames < 16) throw std::invalid_argument("encode: need at least 16 frames, got " + std::to_string(frames));
  Tensor h = reshape(tape, x, {batch, 1, frames, bands});
  for (auto& block : blocks_) {
    for (ConvUnit& unit : block) h = conv_unit(tape, h, unit, mode);
    h = avg_pool2d(tape, h, 2);
  }
  h = global_pool(tape, h);      // [B, C, L]
  h = transpose_last(tape, h);   // [B, L, C]
  h = relu(tape, linear(tape, h, fc1_w_, fc1_b_));
  return linear(tape, h, fc2_w_, fc2_b_);
}

ParamList Encoder::parameters() const {
  ParamList out;
  for (std::size_t b = 0; b < 4; ++b)
    for (std::size_t u = 0; u < 2; ++u) {
      const std::string p = "enc.block" + std::to_string(b) + ".conv" + std::to_string(u) + ".";
      const ConvUnit& unit = blocks_[b][u];
      out.push_back({p + "weight", unit.weight});
      out.push_back({p + "bias", unit.bias});
      out.push_back({p + "norm.gamma", unit.gamma});
      out.push_back({p + "norm.beta", unit.beta});
    }
  out.push_back({"enc.fc1.weight", fc1_w_});
  out.push_back({"enc.fc1.bias", fc1_b_});
  out.push_back({"enc.fc2.weight", fc2_w_});
  out.push_back({"enc.fc2.bias", fc2_b_});
  return out;
}

std::vector<Encoder::NamedStats> Encoder::running_stats() {
  std::vector<NamedStats> out;
  for (std::size_t b = 0; b < 4; ++b)
    for (std::size_t u = 0; u < 2; ++u)
      out.push_back({"enc.block" + std::to_string(b) + ".conv" + std::to_string(u) + ".norm.running",
                     &blocks_[b][u].stats});
  return out;
}

}  // namespace laft
