#pragma once

#include "laft/tensor.hpp"

namespace laft {

/// 2-D cross-correlation, stride 1. x: [B, Cin, H, W], weight: [Cout, Cin, kh, kw],
/// bias: [Cout]. Zero padding `pad` on every side.
Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias, Index pad = 1);

/// Non-overlapping k x k average pooling over the last two axes of
/// [B, C, H, W]. Edge windows that are cut off average what they cover, so the
/// output is ceil(H/k) x ceil(W/k).
Tensor avg_pool2d(Tape& tape, const Tensor& x, Index k = 2);

/// Mean over the last axis (the mel axis in [B, C, T, F] layout).
Tensor global_pool(Tape& tape, const Tensor& x);

enum class NormMode { train, eval };

struct RunningStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
  bool initialized = false;
};

/// Per-channel batch normalization over [B, C, H, W]. Train mode normalizes
/// with batch statistics and folds them into `stats` (running = momentum *
/// running + (1 - momentum) * batch); eval mode uses `stats` and throws if no
/// train step has happened yet.
Tensor batch_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta, RunningStats& stats,
                  NormMode mode, double momentum = 0.9, double eps = 1e-5);

/// gamma[c] * x + beta[c] per channel; the no-batchnorm substitute.
Tensor channel_affine(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta);

}  // namespace laft
