#include <gtest/gtest.h>

#include "laft/gradcheck.hpp"
#include "laft/ops.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace laft;
using laft::testing::max_abs_diff;
using laft::testing::random_tensor;

namespace {

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST(Tensor, ShapeAndStorage) {
  Tensor t({2, 3});
  EXPECT_EQ(t.size(), 6);
  EXPECT_EQ(t.dim(-1), 3);
  EXPECT_THROW(t.dim(2), ShapeError);
  EXPECT_THROW(Tensor({2, 0}), ShapeError);
  EXPECT_THROW(Tensor({2}, std::vector<double>{1, 2, 3}), ShapeError);
  Tensor alias = t;
  alias[0] = 5.0;
  EXPECT_EQ(t[0], 5.0);
  Tensor copy = t.clone();
  copy[0] = 1.0;
  EXPECT_EQ(t[0], 5.0);
  EXPECT_EQ(Tensor::scalar(2.5).item(), 2.5);
}

TEST(Elementwise, TrivialValues) {
  Tape tape(Tape::Mode::inference);
  EXPECT_EQ(vals(exp(tape, Tensor({2}))), (std::vector<double>{1, 1}));
  EXPECT_EQ(vals(sigmoid(tape, Tensor({1}))), (std::vector<double>{0.5}));
  const Tensor a({3}, {1, 2, 3}), b({3}, {4, 5, 6});
  EXPECT_EQ(vals(mul(tape, a, b)), (std::vector<double>{4, 10, 18}));
  EXPECT_EQ(vals(sub(tape, b, a)), (std::vector<double>{3, 3, 3}));
  EXPECT_EQ(vals(neg(tape, a)), (std::vector<double>{-1, -2, -3}));
}

TEST(Elementwise, DivisionByZeroIsAnError) {
  Tape tape;
  EXPECT_THROW(div(tape, Tensor({2}, {1, 1}), Tensor({2}, {1, 0})), NumericError);
  EXPECT_EQ(div(tape, Tensor({2}, {1, 3}), Tensor({2}, {2, 4}))[1], 0.75);
}

TEST(Elementwise, ShapeMismatch) {
  Tape tape;
  EXPECT_THROW(add(tape, Tensor({2, 3}), Tensor({2})), ShapeError);
  EXPECT_THROW(add(tape, Tensor({3}), Tensor({4})), ShapeError);
}

TEST(Elementwise, NonFiniteOutputIsAnError) {
  Tape tape;
  EXPECT_THROW(exp(tape, Tensor({1}, {1000.0})), NumericError);
  EXPECT_THROW(log(tape, Tensor({1}, {-1.0})), NumericError);
}

TEST(Elementwise, BroadcastMatchesExplicitRepeat) {
  std::mt19937_64 rng(1);
  const Tensor a = random_tensor({4, 3, 5}, rng);
  const Tensor b = random_tensor({3, 5}, rng);
  const std::vector<double> b_before = vals(b);
  Tape tape;
  const Tensor out = mul(tape, a, b);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 15; ++j) EXPECT_EQ(out[i * 15 + j], a[i * 15 + j] * b[j]);
  EXPECT_EQ(vals(b), b_before);
  const Tensor c = add(tape, Tensor({1}, {2.0}), a);
  EXPECT_EQ(c[7], a[7] + 2.0);
}

TEST(Matmul, TrivialAndLoopOracle) {
  Tape tape;
  const Tensor eye({2, 2}, {1, 0, 0, 1}), m({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(vals(matmul(tape, eye, m)), vals(m));
  EXPECT_EQ(matmul(tape, Tensor({1, 2}, {1, 2}), Tensor({2, 1}, {3, 4})).item(), 11.0);
  EXPECT_THROW(matmul(tape, Tensor({2, 3}), Tensor({2, 3})), ShapeError);

  std::mt19937_64 rng(2);
  const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
  const Tensor c = matmul(tape, a, b);
  double worst = 0.0;
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (Index k = 0; k < 4; ++k) acc += a[i * 4 + k] * b[k * 2 + j];
      worst = std::max(worst, std::abs(acc - c[i * 2 + j]));
    }
  EXPECT_LT(worst, 1e-12);
}

TEST(Reduce, TrivialValues) {
  Tape tape;
  EXPECT_EQ(vals(sum(tape, Tensor({2, 2}, {1, 2, 3, 4}), 0)), (std::vector<double>{4, 6}));
  EXPECT_EQ(mean(tape, Tensor({2}, {2, 4}), 0).item(), 3.0);
  const ReduceResult r = reduce(tape, Reduce::max, Tensor({3}, {-1, 5, 2}), 0);
  EXPECT_EQ(r.values.item(), 5.0);
  EXPECT_EQ(r.argmax.at(0), 1);
  EXPECT_THROW(sum(tape, Tensor({2}), 1), ShapeError);
  EXPECT_EQ(sum(tape, Tensor({2, 3}), 1, true).shape(), (Shape{2, 1}));
}

TEST(LayerNorm, TrivialValues) {
  Tape tape;
  const Tensor g4 = Tensor::filled({4}, 1.0), b4({4});
  for (double v : layer_norm(tape, Tensor::filled({1, 4}, 5.0), g4, b4).values()) EXPECT_EQ(v, 0.0);
  const Tensor out = layer_norm(tape, Tensor({1, 2}, {1, -1}), Tensor::filled({2}, 1.0), Tensor({2}), 1e-12);
  EXPECT_NEAR(out[0], 1.0, 1e-9);
  EXPECT_NEAR(out[1], -1.0, 1e-9);
  EXPECT_THROW(layer_norm(tape, Tensor({2, 3}), g4, b4), ShapeError);
}

TEST(LayerNorm, DirectFormulaOracle) {
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({2, 8}, rng), g = random_tensor({8}, rng), b = random_tensor({8}, rng);
  Tape tape;
  const Tensor out = layer_norm(tape, x, g, b, 1e-5);
  double worst = 0.0;
  for (Index r = 0; r < 2; ++r) {
    double mu = 0.0, var = 0.0;
    for (Index i = 0; i < 8; ++i) mu += x[r * 8 + i] / 8.0;
    for (Index i = 0; i < 8; ++i) var += (x[r * 8 + i] - mu) * (x[r * 8 + i] - mu) / 8.0;
    for (Index i = 0; i < 8; ++i) {
      const double expect = (x[r * 8 + i] - mu) / std::sqrt(var + 1e-5) * g[i] + b[i];
      worst = std::max(worst, std::abs(expect - out[r * 8 + i]));
    }
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(LogSoftmax, RowsNormalize) {
  std::mt19937_64 rng(4);
  Tape tape;
  const Tensor lp = log_softmax(tape, random_tensor({5, 7}, rng, -30, 30));
  for (Index r = 0; r < 5; ++r) {
    double s = 0.0;
    for (Index v = 0; v < 7; ++v) s += std::exp(lp[r * 7 + v]);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Backward, TrivialGradients) {
  Tape tape;
  Tensor x({3}, {1, 2, 3}, true);
  tape.backward(sum_all(tape, x), std::span<Tensor>(&x, 1));
  EXPECT_EQ(vals(Tensor({3}, std::vector<double>(x.grad().begin(), x.grad().end()))), (std::vector<double>{1, 1, 1}));

  Tape tape2;
  Tensor y({2}, {1, 2}, true);
  tape2.backward(sum_all(tape2, mul(tape2, y, y)), std::span<Tensor>(&y, 1));
  EXPECT_EQ(y.grad()[0], 2.0);
  EXPECT_EQ(y.grad()[1], 4.0);
}

TEST(Backward, FanOutAccumulates) {
  Tape tape;
  Tensor x({1}, {3.0}, true);
  const Tensor y = add(tape, mul(tape, x, x), x);
  tape.backward(sum_all(tape, y), std::span<Tensor>(&x, 1));
  EXPECT_EQ(x.grad()[0], 7.0);
}

TEST(Backward, ErrorsAndDisconnectedParameters) {
  Tape tape;
  Tensor x({2}, {1, 2}, true);
  Tensor unused({2}, {1, 1}, true);
  EXPECT_THROW(tape.backward(mul(tape, x, x), std::span<Tensor>(&x, 1)), ShapeError);
  Tape tape2;
  std::vector<Tensor> params{x, unused};
  const BackwardReport report = tape2.backward(sum_all(tape2, x), params);
  ASSERT_EQ(report.disconnected.size(), 1u);
  EXPECT_EQ(report.disconnected[0], 1u);
  EXPECT_EQ(unused.grad()[0], 0.0);
}

TEST(Backward, Deterministic) {
  std::mt19937_64 rng(5);
  Tensor a = random_tensor({3, 4}, rng, -2, 2, true), b = random_tensor({4, 2}, rng, -2, 2, true);
  std::vector<Tensor> params{a, b};
  auto run = [&] {
    for (Tensor& p : params) p.clear_grad();
    Tape tape;
    const Tensor loss = sum_all(tape, sigmoid(tape, matmul(tape, a, b)));
    tape.backward(loss, params);
    return std::make_pair(loss.item(), std::vector<double>(a.grad().begin(), a.grad().end()));
  };
  const auto first = run();
  const auto second = run();
  EXPECT_EQ(first.first, second.first);
  EXPECT_EQ(first.second, second.second);
}

TEST(Backward, InferenceTapeRecordsNothing) {
  Tape tape(Tape::Mode::inference);
  Tensor x({2}, {1, 2}, true);
  exp(tape, x);
  EXPECT_EQ(tape.size(), 0u);
}

TEST(GradCheck, EveryOpMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  Tensor a = random_tensor({2, 3, 4}, rng, -2, 2, true);
  Tensor b = random_tensor({3, 4}, rng, -2, 2, true);
  Tensor pos = random_tensor({3, 4}, rng, 0.5, 2, true);
  Tensor w = random_tensor({4, 5}, rng, -2, 2, true);
  Tensor wb = random_tensor({5}, rng, -2, 2, true);
  Tensor g = random_tensor({5}, rng, -2, 2, true);
  Tensor gb = random_tensor({5}, rng, -2, 2, true);
  Tensor table = random_tensor({6, 4}, rng, -2, 2, true);
  const std::vector<std::int64_t> ids{1, 3, 3, 5, 0, 2};
  std::vector<Index> table_rows;
  for (Index i = 4; i < table.size(); ++i) table_rows.push_back(i);
  auto loss_fn = [&](Tape& t) {
    Tensor x = add(t, a, b);
    x = mul(t, x, sigmoid(t, b));
    x = div(t, x, pos);
    x = sub(t, x, tanh(t, a));
    x = add(t, x, exp(t, scale(t, b, 0.3)));
    x = add(t, x, log(t, pos));
    x = add(t, x, reshape(t, embedding(t, table, ids, {2, 3}, 0), {2, 3, 4}));
    const Tensor mx = reduce(t, Reduce::max, x, 0).values;
    x = add(t, x, mx);
    Tensor y = linear(t, neg(t, x), w, wb);
    y = layer_norm(t, y, g, gb);
    y = log_softmax(t, y);
    y = add(t, mean(t, transpose_last(t, y), 1), sum(t, relu(t, y), 2));
    const std::vector<Index> rows{1, 0, 1};
    return sum_all(t, mul(t, index_select(t, y, rows), index_select(t, y, rows)));
  };
  const GradCheckReport report =
      gradcheck(loss_fn, {{"a", a, {}}, {"b", b, {}}, {"pos", pos, {}}, {"w", w, {}}, {"wb", wb, {}},
                          {"g", g, {}}, {"gb", gb, {}}, {"table", table, table_rows}});
  for (const auto& e : report.entries) EXPECT_TRUE(e.passed) << e.name << " rel " << e.rel_error;
  // the frozen <pad> row never receives gradient
  for (Index d = 0; d < 4; ++d) EXPECT_EQ(table.grad()[d], 0.0);
}

TEST(AftMix, WeightsNormalizeAndStayFinite) {
  std::mt19937_64 rng(7);
  const Tensor bias = random_tensor({3, 5}, rng, -50, 50);
  const Tensor key = random_tensor({2, 5, 4}, rng, -50, 50);
  const Tensor value = random_tensor({2, 5, 4}, rng);
  const Tensor w = aft_weights(bias, key);
  for (Index bnd = 0; bnd < 2 * 3; ++bnd)
    for (Index d = 0; d < 4; ++d) {
      double s = 0.0;
      for (Index i = 0; i < 5; ++i) s += w[(bnd * 5 + i) * 4 + d];
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  Tape tape;
  for (double v : aft_mix(tape, bias, key, value).values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(AftMix, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(8);
  Tensor bias = random_tensor({3, 4}, rng, -2, 2, true);
  Tensor key = random_tensor({2, 4, 3}, rng, -2, 2, true);
  Tensor value = random_tensor({2, 4, 3}, rng, -2, 2, true);
  Tensor probe = random_tensor({2, 3, 3}, rng);
  const std::vector<std::uint8_t> valid{1, 1, 0, 1, 1, 1, 1, 0};
  auto loss_fn = [&](Tape& t) { return sum_all(t, mul(t, aft_mix(t, bias, key, value, valid), probe)); };
  const auto report = gradcheck(loss_fn, {{"bias", bias, {}}, {"key", key, {}}, {"value", value, {}}});
  EXPECT_TRUE(report.passed());
}
