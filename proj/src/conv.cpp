#include "laft/conv.hpp"

#include "laft/ops.hpp"

#include <algorithm>
#include <cmath>

namespace laft {
namespace {

struct ConvGeom {
  Index cin, h, w, kh, kw, pad, ho, wo;
};

// col: [cin*kh*kw, ho*wo] for one batch element.
void im2col(const ConvGeom& g, const double* x, RowMatrix& col) {
  col.setZero(g.cin * g.kh * g.kw, g.ho * g.wo);
  for (Index c = 0; c < g.cin; ++c)
    for (Index ky = 0; ky < g.kh; ++ky)
      for (Index kx = 0; kx < g.kw; ++kx) {
        double* row = col.data() + ((c * g.kh + ky) * g.kw + kx) * g.ho * g.wo;
        const Index x0 = std::max<Index>(0, g.pad - kx);
        const Index x1 = std::min<Index>(g.wo, g.w + g.pad - kx);
        if (x1 <= x0) continue;
        for (Index oy = 0; oy < g.ho; ++oy) {
          const Index sy = oy + ky - g.pad;
          if (sy < 0 || sy >= g.h) continue;
          const double* src = x + (c * g.h + sy) * g.w + (x0 + kx - g.pad);
          std::copy_n(src, x1 - x0, row + oy * g.wo + x0);
        }
      }
}

void col2im(const ConvGeom& g, const RowMatrix& col, double* dx) {
  for (Index c = 0; c < g.cin; ++c)
    for (Index ky = 0; ky < g.kh; ++ky)
      for (Index kx = 0; kx < g.kw; ++kx) {
        const double* row = col.data() + ((c * g.kh + ky) * g.kw + kx) * g.ho * g.wo;
        const Index x0 = std::max<Index>(0, g.pad - kx);
        const Index x1 = std::min<Index>(g.wo, g.w + g.pad - kx);
        if (x1 <= x0) continue;
        for (Index oy = 0; oy < g.ho; ++oy) {
          const Index sy = oy + ky - g.pad;
          if (sy < 0 || sy >= g.h) continue;
          double* dst = dx + (c * g.h + sy) * g.w + (x0 + kx - g.pad);
          const double* src = row + oy * g.wo + x0;
          for (Index j = 0; j < x1 - x0; ++j) dst[j] += src[j];
        }
      }
}

void require_rank4(const Tensor& x, const char* op) {
  if (x.rank() != 4) throw ShapeError(std::string(op) + ": expected [B,C,H,W], got " + to_string(x.shape()));
}

}  // namespace

Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias, Index pad) {
  require_rank4(x, "conv2d");
  require_rank4(weight, "conv2d weight");
  const Index batch = x.dim(0), cout = weight.dim(0);
  if (weight.dim(1) != x.dim(1))
    throw ShapeError("conv2d: input has " + std::to_string(x.dim(1)) + " channels, kernel expects " +
                     std::to_string(weight.dim(1)));
  if (bias.size() != cout) throw ShapeError("conv2d: bias size mismatch");
  const ConvGeom g{x.dim(1), x.dim(2), x.dim(3), weight.dim(2), weight.dim(3), pad,
                   x.dim(2) + 2 * pad - weight.dim(2) + 1, x.dim(3) + 2 * pad - weight.dim(3) + 1};
  if (g.ho <= 0 || g.wo <= 0) throw ShapeError("conv2d: input smaller than kernel");
  Tensor out({batch, cout, g.ho, g.wo});
  const ConstMatrixMap wm(weight.data(), cout, g.cin * g.kh * g.kw);
  RowMatrix col;
  for (Index b = 0; b < batch; ++b) {
    im2col(g, x.data() + b * g.cin * g.h * g.w, col);
    MatrixMap ob(out.data() + b * cout * g.ho * g.wo, cout, g.ho * g.wo);
    ob.noalias() = wm * col;
    ob.colwise() += bias.vector();
  }
  tape.record("conv2d", {x, weight, bias}, out, [x, weight, bias, out, g, batch, cout]() mutable {
    const ConstMatrixMap wm(weight.data(), cout, g.cin * g.kh * g.kw);
    RowMatrix col, dcol;
    for (Index b = 0; b < batch; ++b) {
      const ConstMatrixMap gb(out.grad().data() + b * cout * g.ho * g.wo, cout, g.ho * g.wo);
      if (bias.requires_grad()) bias.ensure_grad() += gb.rowwise().sum();
      if (weight.requires_grad()) {
        im2col(g, x.data() + b * g.cin * g.h * g.w, col);
        MatrixMap dw(weight.ensure_grad().data(), cout, g.cin * g.kh * g.kw);
        dw.noalias() += gb * col.transpose();
      }
      if (x.requires_grad()) {
        dcol.noalias() = wm.transpose() * gb;
        col2im(g, dcol, x.ensure_grad().data() + b * g.cin * g.h * g.w);
      }
    }
  });
  return out;
}

Tensor avg_pool2d(Tape& tape, const Tensor& x, Index k) {
  require_rank4(x, "avg_pool2d");
  const Index planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index ho = (h + k - 1) / k, wo = (w + k - 1) / k;
  Tensor out({x.dim(0), x.dim(1), ho, wo});
  for (Index p = 0; p < planes; ++p) {
    const double* src = x.data() + p * h * w;
    double* dst = out.data() + p * ho * wo;
    for (Index oy = 0; oy < ho; ++oy)
      for (Index ox = 0; ox < wo; ++ox) {
        const Index y1 = std::min(h, (oy + 1) * k), x1 = std::min(w, (ox + 1) * k);
        double acc = 0.0;
        for (Index y = oy * k; y < y1; ++y)
          for (Index xx = ox * k; xx < x1; ++xx) acc += src[y * w + xx];
        dst[oy * wo + ox] = acc / static_cast<double>((y1 - oy * k) * (x1 - ox * k));
      }
  }
  tape.record("avg_pool2d", {x}, out, [x, out, planes, h, w, ho, wo, k]() mutable {
    if (!x.requires_grad()) return;
    double* gx = x.ensure_grad().data();
    const double* go = out.grad().data();
    for (Index p = 0; p < planes; ++p)
      for (Index oy = 0; oy < ho; ++oy)
        for (Index ox = 0; ox < wo; ++ox) {
          const Index y1 = std::min(h, (oy + 1) * k), x1 = std::min(w, (ox + 1) * k);
          const double g = go[p * ho * wo + oy * wo + ox] / static_cast<double>((y1 - oy * k) * (x1 - ox * k));
          for (Index y = oy * k; y < y1; ++y)
            for (Index xx = ox * k; xx < x1; ++xx) gx[p * h * w + y * w + xx] += g;
        }
  });
  return out;
}

Tensor global_pool(Tape& tape, const Tensor& x) { return mean(tape, x, -1); }

Tensor batch_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta, RunningStats& stats,
                  NormMode mode, double momentum, double eps) {
  require_rank4(x, "batch_norm");
  const Index batch = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (gamma.size() != channels || beta.size() != channels)
    throw ShapeError("batch_norm: per-channel parameter size mismatch");
  if (stats.initialized && stats.mean.size() != channels)
    throw ShapeError("batch_norm: running statistics have wrong channel count");
  const double count = static_cast<double>(batch * plane);
  Eigen::VectorXd mu(channels), inv_std(channels);
  if (mode == NormMode::train) {
    Eigen::VectorXd var(channels);
    for (Index c = 0; c < channels; ++c) {
      double s = 0.0;
      for (Index b = 0; b < batch; ++b) s += ConstVectorMap(x.data() + (b * channels + c) * plane, plane).sum();
      mu[c] = s / count;
      double v = 0.0;
      for (Index b = 0; b < batch; ++b)
        v += (ConstVectorMap(x.data() + (b * channels + c) * plane, plane).array() - mu[c]).square().sum();
      var[c] = v / count;
      inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
    }
    const Eigen::VectorXd unbiased = count > 1 ? Eigen::VectorXd(var * (count / (count - 1))) : var;
    if (!stats.initialized) {
      // First batch seeds the running estimate instead of blending with an
      // arbitrary prior.
      stats.mean = mu;
      stats.var = unbiased;
      stats.initialized = true;
    } else {
      stats.mean = momentum * stats.mean + (1.0 - momentum) * mu;
      stats.var = momentum * stats.var + (1.0 - momentum) * unbiased;
    }
  } else {
    if (!stats.initialized) throw std::logic_error("batch_norm: uninitialized running stats");
    mu = stats.mean;
    inv_std = (stats.var.array() + eps).rsqrt().matrix();
  }

  Tensor out(x.shape());
  Tensor xhat(x.shape());
  for (Index b = 0; b < batch; ++b)
    for (Index c = 0; c < channels; ++c) {
      const Index ofs = (b * channels + c) * plane;
      VectorMap xh(xhat.data() + ofs, plane);
      xh = (ConstVectorMap(x.data() + ofs, plane).array() - mu[c]) * inv_std[c];
      VectorMap(out.data() + ofs, plane) = (xh.array() * gamma[c] + beta[c]).matrix();
    }
  const bool train = mode == NormMode::train;
  tape.record("batch_norm", {x, gamma, beta}, out,
              [x, gamma, beta, out, xhat, inv_std, batch, channels, plane, count, train]() mutable {
    const double* go = out.grad().data();
    double* gg = gamma.requires_grad() ? gamma.ensure_grad().data() : nullptr;
    double* gb = beta.requires_grad() ? beta.ensure_grad().data() : nullptr;
    double* gx = x.requires_grad() ? x.ensure_grad().data() : nullptr;
    for (Index c = 0; c < channels; ++c) {
      double sum_g = 0.0, sum_gx = 0.0;
      for (Index b = 0; b < batch; ++b) {
        const Index ofs = (b * channels + c) * plane;
        const ConstVectorMap g(go + ofs, plane), xh(xhat.data() + ofs, plane);
        sum_g += g.sum();
        sum_gx += g.dot(xh);
      }
      if (gg) gg[c] += sum_gx;
      if (gb) gb[c] += sum_g;
      if (!gx) continue;
      const double scale = gamma[c] * inv_std[c];
      for (Index b = 0; b < batch; ++b) {
        const Index ofs = (b * channels + c) * plane;
        const ConstVectorMap g(go + ofs, plane), xh(xhat.data() + ofs, plane);
        VectorMap dx(gx + ofs, plane);
        if (train)
          dx.array() += scale * (g.array() - sum_g / count - xh.array() * (sum_gx / count));
        else
          dx += scale * g;
      }
    }
  });
  return out;
}

Tensor channel_affine(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  require_rank4(x, "channel_affine");
  const Index batch = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (gamma.size() != channels || beta.size() != channels)
    throw ShapeError("channel_affine: per-channel parameter size mismatch");
  Tensor out(x.shape());
  for (Index b = 0; b < batch; ++b)
    for (Index c = 0; c < channels; ++c) {
      const Index ofs = (b * channels + c) * plane;
      VectorMap(out.data() + ofs, plane) = ConstVectorMap(x.data() + ofs, plane) * gamma[c] +
                                            Eigen::VectorXd::Constant(plane, beta[c]);
    }
  tape.record("channel_affine", {x, gamma, beta}, out, [x, gamma, beta, out, batch, channels, plane]() mutable {
    const double* go = out.grad().data();
    for (Index b = 0; b < batch; ++b)
      for (Index c = 0; c < channels; ++c) {
        const Index ofs = (b * channels + c) * plane;
        const ConstVectorMap g(go + ofs, plane);
        if (gamma.requires_grad()) gamma.ensure_grad()[c] += g.dot(ConstVectorMap(x.data() + ofs, plane));
        if (beta.requires_grad()) beta.ensure_grad()[c] += g.sum();
        if (x.requires_grad()) VectorMap(x.ensure_grad().data() + ofs, plane) += gamma[c] * g;
      }
  });
  return out;
}

}  // namespace laft
