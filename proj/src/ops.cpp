#include "laft/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace laft {
namespace {

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

Shape broadcast_shape(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return a.shape();
  if (b.size() == 1 || (b.size() <= a.size() && is_suffix(b.shape(), a.shape()))) return a.shape();
  if (a.size() == 1 || is_suffix(a.shape(), b.shape())) return b.shape();
  throw ShapeError("cannot broadcast " + to_string(a.shape()) + " with " + to_string(b.shape()));
}

double apply_unary(Unary kind, double x) {
  switch (kind) {
    case Unary::neg: return -x;
    case Unary::exp: return std::exp(x);
    case Unary::log: return std::log(x);
    case Unary::sigmoid: return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    case Unary::relu: return x > 0 ? x : 0.0;
    case Unary::tanh: return std::tanh(x);
  }
  return x;
}

// Derivative expressed through input x and output y.
double unary_grad(Unary kind, double x, double y) {
  switch (kind) {
    case Unary::neg: return -1.0;
    case Unary::exp: return y;
    case Unary::log: return 1.0 / x;
    case Unary::sigmoid: return y * (1.0 - y);
    case Unary::relu: return x > 0 ? 1.0 : 0.0;
    case Unary::tanh: return 1.0 - y * y;
  }
  return 0.0;
}

const char* unary_name(Unary kind) {
  switch (kind) {
    case Unary::neg: return "neg";
    case Unary::exp: return "exp";
    case Unary::log: return "log";
    case Unary::sigmoid: return "sigmoid";
    case Unary::relu: return "relu";
    case Unary::tanh: return "tanh";
  }
  return "unary";
}

const char* binary_name(Binary kind) {
  switch (kind) {
    case Binary::add: return "add";
    case Binary::sub: return "sub";
    case Binary::mul: return "mul";
    case Binary::div: return "div";
  }
  return "binary";
}

Index normalize_axis(Index axis, Index rank) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw ShapeError("invalid axis " + std::to_string(axis));
  return axis;
}

}  // namespace

Tensor unary(Tape& tape, Unary kind, const Tensor& a) {
  Tensor out(a.shape());
  const Index n = a.size();
  const double* x = a.data();
  double* y = out.data();
  if (kind == Unary::exp) {
    out.vector() = a.vector().array().exp().matrix();
  } else {
    for (Index i = 0; i < n; ++i) y[i] = apply_unary(kind, x[i]);
  }
  tape.record(unary_name(kind), {a}, out, [a, out, kind]() mutable {
    if (!a.requires_grad()) return;
    auto ga = a.ensure_grad();
    const auto go = out.grad_vector();
    const double* x = a.data();
    const double* y = out.data();
    for (Index i = 0; i < a.size(); ++i) ga[i] += go[i] * unary_grad(kind, x[i], y[i]);
  });
  return out;
}

Tensor binary(Tape& tape, Binary kind, const Tensor& a, const Tensor& b) {
  Shape shape = broadcast_shape(a, b);
  Tensor out(shape);
  const Index n = out.size(), na = a.size(), nb = b.size();
  const double* x = a.data();
  const double* z = b.data();
  double* y = out.data();
  if (kind == Binary::div) {
    for (Index j = 0; j < nb; ++j)
      if (z[j] == 0.0) throw NumericError("division by a tensor containing zero");
  }
  for (Index i = 0; i < n; ++i) {
    const double u = x[na == n ? i : i % na];
    const double v = z[nb == n ? i : i % nb];
    switch (kind) {
      case Binary::add: y[i] = u + v; break;
      case Binary::sub: y[i] = u - v; break;
      case Binary::mul: y[i] = u * v; break;
      case Binary::div: y[i] = u / v; break;
    }
  }
  tape.record(binary_name(kind), {a, b}, out, [a, b, out, kind]() mutable {
    const Index n = out.size(), na = a.size(), nb = b.size();
    const auto go = out.grad_vector();
    const double* x = a.data();
    const double* z = b.data();
    if (a.requires_grad()) {
      auto ga = a.ensure_grad();
      for (Index i = 0; i < n; ++i) {
        const Index ib = nb == n ? i : i % nb;
        double d = 1.0;
        if (kind == Binary::mul) d = z[ib];
        else if (kind == Binary::div) d = 1.0 / z[ib];
        ga[na == n ? i : i % na] += go[i] * d;
      }
    }
    if (b.requires_grad()) {
      auto gb = b.ensure_grad();
      for (Index i = 0; i < n; ++i) {
        const Index ia = na == n ? i : i % na;
        const Index ib = nb == n ? i : i % nb;
        double d = 1.0;
        if (kind == Binary::sub) d = -1.0;
        else if (kind == Binary::mul) d = x[ia];
        else if (kind == Binary::div) d = -x[ia] / (z[ib] * z[ib]);
        gb[ib] += go[i] * d;
      }
    }
  });
  return out;
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  Tensor out(a.shape());
  out.vector() = a.vector() * factor;
  tape.record("scale", {a}, out, [a, out, factor]() mutable {
    if (a.requires_grad()) a.ensure_grad() += out.grad_vector() * factor;
  });
  return out;
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (b.rank() != 2) throw ShapeError("matmul: right operand must be rank 2, got " + to_string(b.shape()));
  if (a.dim(-1) != b.dim(0))
    throw ShapeError("matmul: inner dimensions differ, " + to_string(a.shape()) + " x " + to_string(b.shape()));
  Shape shape = a.shape();
  shape.back() = b.dim(1);
  Tensor out(shape);
  out.matrix().noalias() = a.matrix() * b.matrix();
  tape.record("matmul", {a, b}, out, [a, b, out]() mutable {
    const ConstMatrixMap g(out.grad().data(), out.size() / out.dim(-1), out.dim(-1));
    if (a.requires_grad()) a.grad_matrix().noalias() += g * b.matrix().transpose();
    if (b.requires_grad()) b.grad_matrix().noalias() += a.matrix().transpose() * g;
  });
  return out;
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias) {
  return add(tape, matmul(tape, x, w), bias);
}

ReduceResult reduce(Tape& tape, Reduce kind, const Tensor& a, Index axis, bool keepdim) {
  axis = normalize_axis(axis, a.rank());
  const Shape& in = a.shape();
  Index outer = 1, inner = 1;
  for (Index i = 0; i < axis; ++i) outer *= in[i];
  for (Index i = axis + 1; i < a.rank(); ++i) inner *= in[i];
  const Index len = in[axis];
  Shape shape;
  for (Index i = 0; i < a.rank(); ++i) {
    if (i != axis) shape.push_back(in[i]);
    else if (keepdim) shape.push_back(1);
  }
  if (shape.empty()) shape.push_back(1);

  ReduceResult result{Tensor(shape), {}};
  Tensor& out = result.values;
  std::vector<Index> arg;
  if (kind == Reduce::max) arg.assign(static_cast<std::size_t>(outer * inner), 0);
  const double* x = a.data();
  double* y = out.data();
  for (Index o = 0; o < outer; ++o) {
    for (Index j = 0; j < inner; ++j) {
      const double* p = x + o * len * inner + j;
      double acc = kind == Reduce::max ? -std::numeric_limits<double>::infinity() : 0.0;
      Index best = 0;
      for (Index k = 0; k < len; ++k) {
        const double v = p[k * inner];
        if (kind == Reduce::max) {
          if (v > acc) { acc = v; best = k; }
        } else {
          acc += v;
        }
      }
      if (kind == Reduce::mean) acc /= static_cast<double>(len);
      y[o * inner + j] = acc;
      if (kind == Reduce::max) arg[static_cast<std::size_t>(o * inner + j)] = best;
    }
  }
  const char* name = kind == Reduce::sum ? "sum" : kind == Reduce::mean ? "mean" : "max";
  tape.record(name, {a}, out, [a, out, kind, outer, inner, len, arg]() mutable {
    if (!a.requires_grad()) return;
    auto ga = a.ensure_grad();
    const auto go = out.grad_vector();
    for (Index o = 0; o < outer; ++o) {
      for (Index j = 0; j < inner; ++j) {
        const double g = go[o * inner + j];
        const Index base = o * len * inner + j;
        if (kind == Reduce::max) {
          ga[base + arg[static_cast<std::size_t>(o * inner + j)] * inner] += g;
        } else {
          const double s = kind == Reduce::mean ? g / static_cast<double>(len) : g;
          for (Index k = 0; k < len; ++k) ga[base + k * inner] += s;
        }
      }
    }
  });
  result.argmax = std::move(arg);
  return result;
}

Tensor sum_all(Tape& tape, const Tensor& a) {
  Tensor out = Tensor::scalar(a.vector().sum());
  tape.record("sum_all", {a}, out, [a, out]() mutable {
    if (a.requires_grad()) a.ensure_grad().array() += out.grad()[0];
  });
  return out;
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const Index d = x.dim(-1);
  if (gain.size() != d || bias.size() != d)
    throw ShapeError("layer_norm: gain/bias size must equal last dim " + std::to_string(d));
  const Index rows = x.size() / d;
  Tensor out(x.shape());
  RowMatrix xhat(rows, d);
  Eigen::VectorXd inv_std(rows);
  const auto xm = x.matrix();
  const auto g = gain.vector().transpose();
  const auto bvec = bias.vector().transpose();
  auto ym = out.matrix();
  for (Index r = 0; r < rows; ++r) {
    const double mu = xm.row(r).mean();
    const double var = (xm.row(r).array() - mu).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xm.row(r).array() - mu) * inv_std[r];
    ym.row(r) = xhat.row(r).cwiseProduct(g) + bvec;
  }
  tape.record("layer_norm", {x, gain, bias}, out,
              [x, gain, bias, out, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, d]() mutable {
    const ConstMatrixMap go(out.grad().data(), rows, d);
    if (gain.requires_grad()) gain.ensure_grad() += go.cwiseProduct(xhat).colwise().sum().transpose();
    if (bias.requires_grad()) bias.ensure_grad() += go.colwise().sum().transpose();
    if (x.requires_grad()) {
      auto gx = x.grad_matrix();
      const auto gv = gain.vector().transpose();
      for (Index r = 0; r < rows; ++r) {
        const Eigen::RowVectorXd dxhat = go.row(r).cwiseProduct(gv);
        const double m1 = dxhat.mean();
        const double m2 = dxhat.cwiseProduct(xhat.row(r)).mean();
        gx.row(r).array() += inv_std[r] * (dxhat.array() - m1 - xhat.row(r).array() * m2);
      }
    }
  });
  return out;
}

Tensor log_softmax(Tape& tape, const Tensor& x) {
  const Index d = x.dim(-1);
  const Index rows = x.size() / d;
  Tensor out(x.shape());
  const auto xm = x.matrix();
  auto ym = out.matrix();
  for (Index r = 0; r < rows; ++r) {
    const double mx = xm.row(r).maxCoeff();
    const double lse = mx + std::log((xm.row(r).array() - mx).exp().sum());
    ym.row(r).array() = xm.row(r).array() - lse;
  }
  tape.record("log_softmax", {x}, out, [x, out, rows, d]() mutable {
    if (!x.requires_grad()) return;
    const ConstMatrixMap go(out.grad().data(), rows, d);
    auto gx = x.grad_matrix();
    const auto ym = out.matrix();
    for (Index r = 0; r < rows; ++r)
      gx.row(r).array() += go.row(r).array() - ym.row(r).array().exp() * go.row(r).sum();
  });
  return out;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (numel(shape) != x.size())
    throw ShapeError("reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
  Tensor out(std::move(shape));
  out.vector() = x.vector();
  tape.record("reshape", {x}, out, [x, out]() mutable {
    if (x.requires_grad()) x.ensure_grad() += out.grad_vector();
  });
  return out;
}

Tensor transpose_last(Tape& tape, const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("transpose_last needs rank >= 2");
  const Index r = x.dim(-2), c = x.dim(-1);
  const Index batch = x.size() / (r * c);
  Shape shape = x.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  Tensor out(shape);
  for (Index b = 0; b < batch; ++b) {
    const ConstMatrixMap src(x.data() + b * r * c, r, c);
    MatrixMap dst(out.data() + b * r * c, c, r);
    dst = src.transpose();
  }
  tape.record("transpose_last", {x}, out, [x, out, r, c, batch]() mutable {
    if (!x.requires_grad()) return;
    auto gx = x.ensure_grad();
    for (Index b = 0; b < batch; ++b) {
      const ConstMatrixMap g(out.grad().data() + b * r * c, c, r);
      MatrixMap dst(gx.data() + b * r * c, r, c);
      dst += g.transpose();
    }
  });
  return out;
}

Tensor embedding(Tape& tape, const Tensor& table, std::span<const std::int64_t> ids, Shape lead,
                 std::int64_t frozen_row) {
  if (table.rank() != 2) throw ShapeError("embedding table must be rank 2");
  if (numel(lead) != static_cast<Index>(ids.size())) throw ShapeError("embedding: id count does not match shape");
  const Index v = table.dim(0), d = table.dim(1);
  for (std::int64_t id : ids)
    if (id < 0 || id >= v) throw ShapeError("token id " + std::to_string(id) + " out of range for vocab " + std::to_string(v));
  Shape shape = lead;
  shape.push_back(d);
  Tensor out(shape);
  auto ym = out.matrix();
  const auto tm = table.matrix();
  for (std::size_t j = 0; j < ids.size(); ++j) ym.row(static_cast<Index>(j)) = tm.row(ids[j]);
  std::vector<std::int64_t> idv(ids.begin(), ids.end());
  tape.record("embedding", {table}, out, [table, out, idv = std::move(idv), frozen_row, d]() mutable {
    if (!table.requires_grad()) return;
    auto gt = table.grad_matrix();
    const ConstMatrixMap go(out.grad().data(), static_cast<Index>(idv.size()), d);
    for (std::size_t j = 0; j < idv.size(); ++j)
      if (idv[j] != frozen_row) gt.row(idv[j]) += go.row(static_cast<Index>(j));
  });
  return out;
}

Tensor index_select(Tape& tape, const Tensor& x, std::span<const Index> indices) {
  const Index n0 = x.dim(0);
  const Index stride = x.size() / n0;
  Shape shape = x.shape();
  shape[0] = static_cast<Index>(indices.size());
  Tensor out(shape);
  for (std::size_t j = 0; j < indices.size(); ++j) {
    if (indices[j] < 0 || indices[j] >= n0) throw ShapeError("index_select: index out of range");
    std::copy_n(x.data() + indices[j] * stride, stride, out.data() + static_cast<Index>(j) * stride);
  }
  std::vector<Index> idx(indices.begin(), indices.end());
  tape.record("index_select", {x}, out, [x, out, idx = std::move(idx), stride]() mutable {
    if (!x.requires_grad()) return;
    auto gx = x.ensure_grad();
    const auto go = out.grad_vector();
    for (std::size_t j = 0; j < idx.size(); ++j)
      gx.segment(idx[j] * stride, stride) += go.segment(static_cast<Index>(j) * stride, stride);
  });
  return out;
}

Tensor masked_slice(Tape& tape, const Tensor& src, Index rows, Index cols,
                    std::span<const std::uint8_t> keep, std::span<const double> fill) {
  if (src.rank() != 2 || rows > src.dim(0) || cols > src.dim(1))
    throw ShapeError("masked_slice: window " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " exceeds " + to_string(src.shape()));
  const auto n = static_cast<std::size_t>(rows * cols);
  if (keep.size() != n || fill.size() != n) throw ShapeError("masked_slice: mask size mismatch");
  Tensor out({rows, cols});
  const auto sm = src.matrix();
  auto ym = out.matrix();
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      const auto k = static_cast<std::size_t>(r * cols + c);
      ym(r, c) = keep[k] ? sm(r, c) : fill[k];
    }
  std::vector<std::uint8_t> kv(keep.begin(), keep.end());
  tape.record("masked_slice", {src}, out, [src, out, kv = std::move(kv), rows, cols]() mutable {
    if (!src.requires_grad()) return;
    auto gs = src.grad_matrix();
    const ConstMatrixMap go(out.grad().data(), rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c)
        if (kv[static_cast<std::size_t>(r * cols + c)]) gs(r, c) += go(r, c);
  });
  return out;
}

namespace {

struct AftDims {
  Index batch, queries, keys, channels;
};

AftDims check_aft(const Tensor& bias, const Tensor& key, std::span<const std::uint8_t> valid) {
  if (bias.rank() != 2 || key.rank() != 3)
    throw ShapeError("aft_mix: bias must be [N,S] and key [B,S,D]");
  AftDims d{key.dim(0), bias.dim(0), bias.dim(1), key.dim(2)};
  if (key.dim(1) != d.keys)
    throw ShapeError("aft_mix: bias " + to_string(bias.shape()) + " does not match key " + to_string(key.shape()));
  if (!valid.empty() && static_cast<Index>(valid.size()) != d.batch * d.keys)
    throw ShapeError("aft_mix: key mask size mismatch");
  return d;
}

// Per-channel max of bias[n,i] + key[b,i,:] over admissible keys i.
void aft_row_max(const AftDims& d, const double* bias_row, const double* key_b, const std::uint8_t* valid_b,
                 double* mx) {
  std::fill_n(mx, d.channels, -std::numeric_limits<double>::infinity());
  for (Index i = 0; i < d.keys; ++i) {
    if (valid_b && !valid_b[i]) continue;
    const double bi = bias_row[i];
    const double* k = key_b + i * d.channels;
    for (Index c = 0; c < d.channels; ++c) mx[c] = std::max(mx[c], bi + k[c]);
  }
  for (Index c = 0; c < d.channels; ++c)
    if (!(mx[c] > kMaskBias / 2)) throw NumericError("aft_mix: query row has no admissible key");
}

}  // namespace

Tensor aft_mix(Tape& tape, const Tensor& bias, const Tensor& key, const Tensor& value,
               std::span<const std::uint8_t> key_valid) {
  const AftDims d = check_aft(bias, key, key_valid);
  if (value.shape() != key.shape()) throw ShapeError("aft_mix: key and value shapes differ");
  Tensor out({d.batch, d.queries, d.channels});
  std::vector<double> mx(static_cast<std::size_t>(d.channels)), num(mx.size()), den(mx.size());
  for (Index b = 0; b < d.batch; ++b) {
    const double* kb = key.data() + b * d.keys * d.channels;
    const double* vb = value.data() + b * d.keys * d.channels;
    const std::uint8_t* valid_b = key_valid.empty() ? nullptr : key_valid.data() + b * d.keys;
    for (Index n = 0; n < d.queries; ++n) {
      const double* brow = bias.data() + n * d.keys;
      aft_row_max(d, brow, kb, valid_b, mx.data());
      std::fill(num.begin(), num.end(), 0.0);
      std::fill(den.begin(), den.end(), 0.0);
      for (Index i = 0; i < d.keys; ++i) {
        if (valid_b && !valid_b[i]) continue;
        const double* k = kb + i * d.channels;
        const double* v = vb + i * d.channels;
        for (Index c = 0; c < d.channels; ++c) {
          const double w = std::exp(brow[i] + k[c] - mx[static_cast<std::size_t>(c)]);
          num[static_cast<std::size_t>(c)] += w * v[c];
          den[static_cast<std::size_t>(c)] += w;
        }
      }
      double* y = out.data() + (b * d.queries + n) * d.channels;
      for (Index c = 0; c < d.channels; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        if (!(den[cc] > 0.0)) throw NumericError("aft_mix: zero denominator");
        y[c] = num[cc] / den[cc];
      }
    }
  }
  std::vector<std::uint8_t> valid(key_valid.begin(), key_valid.end());
  tape.record("aft_mix", {bias, key, value}, out, [bias, key, value, out, d, valid = std::move(valid)]() mutable {
    const bool gb = bias.requires_grad(), gk = key.requires_grad(), gv = value.requires_grad();
    double* dbias = gb ? bias.ensure_grad().data() : nullptr;
    double* dkey = gk ? key.ensure_grad().data() : nullptr;
    double* dval = gv ? value.ensure_grad().data() : nullptr;
    const std::span<const double> go = std::as_const(out).grad();
    std::vector<double> mx(static_cast<std::size_t>(d.channels)), den(mx.size());
    for (Index b = 0; b < d.batch; ++b) {
      const Index kofs = b * d.keys * d.channels;
      const double* kb = key.data() + kofs;
      const double* vb = value.data() + kofs;
      const std::uint8_t* valid_b = valid.empty() ? nullptr : valid.data() + b * d.keys;
      for (Index n = 0; n < d.queries; ++n) {
        const double* brow = bias.data() + n * d.keys;
        const Index oofs = (b * d.queries + n) * d.channels;
        const double* y = out.data() + oofs;
        const double* g = go.data() + oofs;
        aft_row_max(d, brow, kb, valid_b, mx.data());
        std::fill(den.begin(), den.end(), 0.0);
        for (Index i = 0; i < d.keys; ++i) {
          if (valid_b && !valid_b[i]) continue;
          const double* k = kb + i * d.channels;
          for (Index c = 0; c < d.channels; ++c)
            den[static_cast<std::size_t>(c)] += std::exp(brow[i] + k[c] - mx[static_cast<std::size_t>(c)]);
        }
        for (Index i = 0; i < d.keys; ++i) {
          if (valid_b && !valid_b[i]) continue;
          const double* k = kb + i * d.channels;
          const double* v = vb + i * d.channels;
          double bias_acc = 0.0;
          for (Index c = 0; c < d.channels; ++c) {
            const auto cc = static_cast<std::size_t>(c);
            const double alpha = std::exp(brow[i] + k[c] - mx[cc]) / den[cc];
            const double ga = g[c] * alpha;
            if (dval) dval[kofs + i * d.channels + c] += ga;
            const double gs = ga * (v[c] - y[c]);
            if (dkey) dkey[kofs + i * d.channels + c] += gs;
            bias_acc += gs;
          }
          if (dbias) dbias[n * d.keys + i] += bias_acc;
        }
      }
    }
  });
  return out;
}

Tensor aft_weights(const Tensor& bias, const Tensor& key, std::span<const std::uint8_t> key_valid) {
  const AftDims d = check_aft(bias, key, key_valid);
  Tensor w({d.batch, d.queries, d.keys, d.channels});
  std::vector<double> mx(static_cast<std::size_t>(d.channels)), den(mx.size());
  for (Index b = 0; b < d.batch; ++b) {
    const double* kb = key.data() + b * d.keys * d.channels;
    const std::uint8_t* valid_b = key_valid.empty() ? nullptr : key_valid.data() + b * d.keys;
    for (Index n = 0; n < d.queries; ++n) {
      const double* brow = bias.data() + n * d.keys;
      aft_row_max(d, brow, kb, valid_b, mx.data());
      double* wr = w.data() + (b * d.queries + n) * d.keys * d.channels;
      std::fill(den.begin(), den.end(), 0.0);
      for (Index i = 0; i < d.keys; ++i) {
        if (valid_b && !valid_b[i]) continue;
        for (Index c = 0; c < d.channels; ++c) {
          const double e = std::exp(brow[i] + kb[i * d.channels + c] - mx[static_cast<std::size_t>(c)]);
          wr[i * d.channels + c] = e;
          den[static_cast<std::size_t>(c)] += e;
        }
      }
      for (Index i = 0; i < d.keys; ++i)
        for (Index c = 0; c < d.channels; ++c) wr[i * d.channels + c] /= den[static_cast<std::size_t>(c)];
    }
  }
  return w;
}

}  // namespace laft
