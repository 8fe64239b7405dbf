#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bm {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::uint64_t id = 0;
};
}  // namespace detail

/// Dense row-major f64 array. Copies share storage; use clone() for a deep copy.
///
/// Images and feature maps are channels-last (H x W x C).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  std::uint64_t id() const;

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Mutable access for parameter updates and test setup. Do not mutate a
  /// tensor that has already been consumed by a recorded op.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  void set_requires_grad(bool value);

  bool has_grad() const;
  /// Gradient buffer; zeros if nothing has been accumulated.
  std::span<const double> grad() const;
  std::span<double> mutable_grad() const;
  void accumulate_grad(std::span<const double> g) const;
  void zero_grad() const;

  Tensor clone() const;
  /// Same storage semantics as clone(), detached from any graph.
  Tensor detach() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  detail::TensorImpl& impl() const;

  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Throws NumericError naming `op` if any value is non-finite.
void check_finite(const Tensor& t, const char* op);

/// Ordered record of differentiable operations.
///
/// Entries are appended in execution order, so an op's inputs are always
/// recorded before the op itself. backward() replays them in exact reverse.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  struct Entry {
    std::vector<std::uint64_t> input_ids;
    std::uint64_t output_id = 0;
    BackwardFn backward;
  };

  /// Records `fn` if `output` requires grad; no-op otherwise.
  void record(std::initializer_list<const Tensor*> inputs, const Tensor& output, BackwardFn fn);

  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  void clear() { entries_.clear(); }

 private:
  std::vector<Entry> entries_;
};

/// Seeds d(root)/d(root) = 1 and runs every recorded backward rule in reverse
/// order. Gradients accumulate into every requires_grad tensor on the path.
void backward(Tape& tape, const Tensor& root);

/// True if any of the tensors requires grad.
bool any_requires_grad(std::initializer_list<const Tensor*> ts);

}  // namespace bm
