#include "ditra/tensor.hpp"

#include <numeric>

#include "ditra/error.hpp"

namespace ditra {

static std::size_t numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative extent in shape " + shape_str(shape));
    n *= std::size_t(d);
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape, double fill) {
  d_ = std::make_shared<TensorData>();
  std::size_t n = numel(shape);
  d_->shape = std::move(shape);
  d_->v.assign(n, fill);
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  if (numel(shape) != values.size()) {
    throw ShapeError("tensor data size " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  }
  Tensor t;
  t.d_ = std::make_shared<TensorData>();
  t.d_->shape = std::move(shape);
  t.d_->v = std::move(values);
  return t;
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

Tensor Tensor::gaussian(std::vector<int> shape, Rng& rng, double stdev) {
  Tensor t(std::move(shape));
  for (double& x : t.d_->v) x = stdev * rng.next_gaussian();
  return t;
}

int Tensor::rows() const { return rank() <= 1 ? 1 : d_->shape[0]; }

int Tensor::cols() const {
  if (rank() == 0) return 1;
  return rank() == 1 ? d_->shape[0] : d_->shape[1];
}

double& Tensor::at(int r, int c) { return d_->v[std::size_t(r) * cols() + c]; }
double Tensor::at(int r, int c) const {
  return d_->v[std::size_t(r) * cols() + c];
}

double Tensor::item() const {
  if (!d_ || d_->v.size() != 1) {
    throw ShapeError("item() requires a 1-element tensor, got " +
                     (d_ ? shape_str(d_->shape) : std::string("undefined")));
  }
  return d_->v[0];
}

Tensor& Tensor::set_requires_grad(bool b) {
  d_->requires_grad = b;
  return *this;
}

Tensor Tensor::clone() const {
  Tensor t;
  t.d_ = std::make_shared<TensorData>();
  t.d_->shape = d_->shape;
  t.d_->v = d_->v;
  t.d_->requires_grad = d_->requires_grad;
  return t;
}

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::string shape_str(const Tensor& t) {
  return t.defined() ? shape_str(t.shape()) : "[undefined]";
}

}  // namespace ditra
