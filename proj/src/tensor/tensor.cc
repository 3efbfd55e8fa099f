#include "eavit/tensor/tensor.h"

#include <sstream>
#include <utility>

#include "eavit/errors.h"

namespace eavit::tensor {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << " x ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : node_(std::make_shared<detail::Node<T>>()) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + to_string(shape));
  }
  node_->data.assign(tensor::numel(shape), fill);
  node_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : node_(std::make_shared<detail::Node<T>>()) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + to_string(shape));
  }
  if (values.size() != tensor::numel(shape)) {
    throw ShapeError("tensor of shape " + to_string(shape) + " needs " +
                     std::to_string(tensor::numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(values);
}

template <typename T>
Tensor<T> Tensor<T>::parameter(Shape shape, std::vector<T> values) {
  Tensor t(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

template <typename T>
std::size_t Tensor<T>::dim(int axis) const {
  const int r = static_cast<int>(rank());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(shape()));
  }
  return node_->shape[static_cast<std::size_t>(a)];
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() needs a single-element tensor, got " + to_string(shape()));
  return node_->data[0];
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  return std::span<const T>(node_->grad_buffer(), node_->data.size());
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(node_->shape, node_->data);
}

namespace {

template <typename T>
thread_local Tape<T>* current_tape = nullptr;

}  // namespace

template <typename T>
Tape<T>::Tape() : state_(std::make_shared<detail::TapeState<T>>()), previous_(current_tape<T>) {
  current_tape<T> = this;
}

template <typename T>
Tape<T>::~Tape() {
  current_tape<T> = previous_;
}

template <typename T>
void Tape<T>::reset() {
  state_ = std::make_shared<detail::TapeState<T>>();
}

template <typename T>
Tape<T>* Tape<T>::current() {
  return current_tape<T>;
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got " +
                     (loss.defined() ? to_string(loss.shape()) : std::string("undefined")));
  }
  auto& node = *loss.node();
  auto state = node.origin.lock();
  if (!state) {
    throw std::logic_error("backward(): loss was not recorded on a live tape");
  }
  if (state->consumed) {
    throw std::logic_error("backward(): graph already consumed; reset the tape and run forward again");
  }
  node.grad_buffer()[0] += T(1);
  for (auto it = state->steps.rbegin(); it != state->steps.rend(); ++it) (*it)();
  state->steps.clear();
  state->consumed = true;
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);

}  // namespace eavit::tensor
