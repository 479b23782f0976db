#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace laft {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

/// Thrown when an operation produces or receives NaN/Inf, or divides by zero.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown on incompatible shapes or out-of-range arguments.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

Index numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense real64 array with row-major storage and an optional gradient buffer.
///
/// Tensor is a shared handle: copies alias the same storage. Use clone() for
/// a deep copy. Gradients are allocated lazily by the tape during backward.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);
  Tensor(Shape shape, std::initializer_list<double> values, bool requires_grad = false)
      : Tensor(std::move(shape), std::vector<double>(values), requires_grad) {}

  static Tensor scalar(double value);
  static Tensor from_matrix(const RowMatrix& m, bool requires_grad = false);
  static Tensor filled(Shape shape, double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  Index rank() const { return static_cast<Index>(shape().size()); }
  /// Negative axes count from the end.
  Index dim(Index axis) const;
  Index size() const;

  std::span<double> values();
  std::span<const double> values() const;
  double* data();
  const double* data() const;
  double& operator[](Index i) { return data()[i]; }
  double operator[](Index i) const { return data()[i]; }
  double item() const;

  /// View as (size / last_dim) x last_dim. Rank-1 tensors are one row.
  MatrixMap matrix();
  ConstMatrixMap matrix() const;
  VectorMap vector();
  ConstVectorMap vector() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);

  bool has_grad() const;
  std::span<double> grad();
  std::span<const double> grad() const;
  VectorMap grad_vector();
  ConstVectorMap grad_vector() const;
  /// ensure_grad() viewed like matrix().
  MatrixMap grad_matrix() const;
  /// Allocates a zero gradient if absent and returns it. Gradients belong to
  /// the shared storage, so this works through a const handle.
  VectorMap ensure_grad() const;
  void zero_grad();
  void clear_grad();

  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
  const void* id() const { return impl_.get(); }

 private:
  struct Impl {
    Shape shape;
    Eigen::VectorXd value;
    Eigen::VectorXd grad;
    bool requires_grad = false;
  };
  Impl& impl();
  const Impl& impl() const;
  std::shared_ptr<Impl> impl_;
};

/// Named parameter handle; names are the canonical checkpoint keys.
struct NamedTensor {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedTensor>;

struct BackwardReport {
  std::size_t ops_visited = 0;
  std::vector<std::size_t> disconnected;  // indices into the params span
};

/// Reverse-mode tape. Every op appends one record in execution order, so the
/// record list is already topologically sorted.
class Tape {
 public:
  enum class Mode { record, inference };

  explicit Tape(Mode mode = Mode::record) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  bool recording() const { return mode_ == Mode::record; }

  /// Registers an op. If the tape records and any input requires grad, the
  /// output is marked requires_grad and `backward` runs during reverse
  /// traversal. Returns whether the op was recorded.
  bool record(std::string_view op, std::vector<Tensor> inputs, Tensor& output,
              std::function<void()> backward);

  /// Seeds d(loss)/d(loss) = 1 and walks the records in reverse. Parameters in
  /// `params` that the loss never reached get a zero gradient and are listed
  /// in the report.
  BackwardReport backward(const Tensor& loss, std::span<Tensor> params = {});

  std::size_t size() const { return records_.size(); }
  std::string_view op_name(std::size_t i) const { return records_[i].op; }
  void clear() { records_.clear(); }

 private:
  struct Record {
    std::string_view op;
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void()> backward;
  };
  Mode mode_;
  std::vector<Record> records_;
};

/// Throws NumericError naming `op` if any value is NaN or infinite.
void check_finite(const Tensor& t, std::string_view op);

}  // namespace laft
