#include "laft/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace laft {

Index numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) {
    if (d <= 0) throw ShapeError("dimensions must be positive, got " + to_string(shape));
    n *= d;
  }
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, bool requires_grad) : impl_(std::make_shared<Impl>()) {
  impl_->value = Eigen::VectorXd::Zero(numel(shape));
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  if (numel(shape) != static_cast<Index>(values.size()))
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                     to_string(shape));
  impl_->value = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Index>(values.size()));
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, std::vector<double>{value}); }

Tensor Tensor::from_matrix(const RowMatrix& m, bool requires_grad) {
  Tensor t({m.rows(), m.cols()}, requires_grad);
  t.matrix() = m;
  return t;
}

Tensor Tensor::filled(Shape shape, double value) {
  Tensor t(std::move(shape));
  t.impl_->value.setConstant(value);
  return t;
}

Tensor::Impl& Tensor::impl() {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  return *impl_;
}

const Tensor::Impl& Tensor::impl() const {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }

Index Tensor::dim(Index axis) const {
  const Index r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw ShapeError("axis out of range for shape " + to_string(shape()));
  return shape()[static_cast<std::size_t>(axis)];
}

Index Tensor::size() const { return impl().value.size(); }

std::span<double> Tensor::values() {
  auto& v = impl().value;
  return {v.data(), static_cast<std::size_t>(v.size())};
}

std::span<const double> Tensor::values() const {
  const auto& v = impl().value;
  return {v.data(), static_cast<std::size_t>(v.size())};
}

double* Tensor::data() { return impl().value.data(); }
const double* Tensor::data() const { return impl().value.data(); }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() requires a single-element tensor, got " + to_string(shape()));
  return impl().value[0];
}

MatrixMap Tensor::matrix() {
  const Index cols = dim(-1);
  return {data(), size() / cols, cols};
}

ConstMatrixMap Tensor::matrix() const {
  const Index cols = dim(-1);
  return {data(), size() / cols, cols};
}

VectorMap Tensor::vector() { return {data(), size()}; }
ConstVectorMap Tensor::vector() const { return {data(), size()}; }

bool Tensor::requires_grad() const { return impl().requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  impl().requires_grad = flag;
  return *this;
}

bool Tensor::has_grad() const { return impl().grad.size() == size(); }

std::span<double> Tensor::grad() {
  auto& g = impl().grad;
  return {g.data(), static_cast<std::size_t>(g.size())};
}

std::span<const double> Tensor::grad() const {
  const auto& g = impl().grad;
  return {g.data(), static_cast<std::size_t>(g.size())};
}

VectorMap Tensor::grad_vector() { return {impl().grad.data(), impl().grad.size()}; }
ConstVectorMap Tensor::grad_vector() const { return {impl().grad.data(), impl().grad.size()}; }

MatrixMap Tensor::grad_matrix() const {
  VectorMap g = ensure_grad();
  const Index cols = rank() == 0 ? 1 : dim(-1);
  return {g.data(), size() / cols, cols};
}

VectorMap Tensor::ensure_grad() const {
  if (!impl_) throw std::logic_error("undefined tensor");
  Impl& im = *impl_;
  if (im.grad.size() != im.value.size()) im.grad = Eigen::VectorXd::Zero(im.value.size());
  return {im.grad.data(), im.grad.size()};
}

void Tensor::zero_grad() {
  auto& im = impl();
  if (im.grad.size() == im.value.size()) im.grad.setZero();
}

void Tensor::clear_grad() { impl().grad.resize(0); }

Tensor Tensor::clone() const {
  Tensor t(shape());
  t.impl_->value = impl().value;
  return t;
}

bool Tape::record(std::string_view op, std::vector<Tensor> inputs, Tensor& output,
                  std::function<void()> backward) {
  check_finite(output, op);
  if (!recording()) return false;
  bool needs = false;
  for (const Tensor& in : inputs) needs = needs || in.requires_grad();
  if (!needs) return false;
  output.set_requires_grad(true);
  records_.push_back({op, std::move(inputs), output, std::move(backward)});
  return true;
}

BackwardReport Tape::backward(const Tensor& loss, std::span<Tensor> params) {
  if (loss.size() != 1) throw ShapeError("backward requires a scalar loss, got " + to_string(loss.shape()));
  BackwardReport report;
  // Parameters start from whatever gradient they hold so that repeated
  // backward calls accumulate; intermediate outputs start from zero.
  for (Record& r : records_) {
    if (!r.output.same_storage(loss)) r.output.clear_grad();
  }
  Tensor seed = loss;
  seed.clear_grad();
  seed.ensure_grad()[0] = 1.0;
  std::unordered_set<const void*> reached;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    ++report.ops_visited;
    if (!it->output.has_grad()) continue;  // not on any path to the loss
    it->backward();
    for (const Tensor& in : it->inputs) reached.insert(in.id());
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].ensure_grad();
    if (!reached.contains(params[i].id()) && !params[i].same_storage(loss))
      report.disconnected.push_back(i);
  }
  return report;
}

void check_finite(const Tensor& t, std::string_view op) {
  if (!t.vector().allFinite())
    throw NumericError("non-finite value produced by " + std::string(op));
}

}  // namespace laft
