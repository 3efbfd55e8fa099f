#pragma once

// Dense n-dimensional tensors that can take part in a define-by-run
// reverse-mode differentiation graph.
//
// A Tensor is a cheap handle onto shared storage: copying the handle aliases
// the same values and gradient buffer. Operations in ops.h record a backward
// step onto the thread's active Tape whenever one of their inputs requires a
// gradient. With no Tape active the same operations run as plain inference.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace eavit::tensor {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {

template <typename T>
struct TapeState {
  std::vector<std::function<void()>> steps;
  bool consumed = false;
};

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until something is accumulated into it
  bool requires_grad = false;
  std::weak_ptr<TapeState<T>> origin;  // empty for leaves

  T* grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad.data();
  }
};

}  // namespace detail

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  // Leaf tensor with requires_grad set.
  static Tensor parameter(Shape shape, std::vector<T> values);
  static Tensor scalar(T value) { return Tensor(Shape{1}, std::vector<T>{value}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }
  // Negative axes count from the end.
  std::size_t dim(int axis) const;

  std::span<T> data() { return node_->data; }
  std::span<const T> data() const { return node_->data; }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Zero-filled view when nothing has been accumulated yet.
  std::span<const T> grad() const;
  void zero_grad() { node_->grad.clear(); }

  // New leaf holding a copy of the values, outside any graph.
  Tensor detach() const;

  const std::shared_ptr<detail::Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node<T>> node_;
};

// Records differentiable operations executed on this thread while alive.
// Tapes nest; the innermost one is current.
template <typename T>
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return state_->steps.size(); }
  bool consumed() const { return state_->consumed; }

  // Drops the recorded graph. Tensors produced before the reset can no longer
  // be back-propagated.
  void reset();

  static Tape* current();
  const std::shared_ptr<detail::TapeState<T>>& state() const { return state_; }

 private:
  std::shared_ptr<detail::TapeState<T>> state_;
  Tape* previous_;
};

// Back-propagates from a scalar loss through the tape that produced it,
// accumulating into every tensor with requires_grad. A tape can be consumed
// once; call Tape::reset() and re-run the forward pass to go again.
template <typename T>
void backward(const Tensor<T>& loss);

}  // namespace eavit::tensor
