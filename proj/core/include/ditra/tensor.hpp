#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ditra/rng.hpp"

namespace ditra {

// Dense row-major float64 storage. Tensor is a cheap shared handle: copies
// alias the same data, which is how parameters keep their identity between
// the model, the optimizer and the gradient map.
struct TensorData {
  std::vector<int> shape;
  std::vector<double> v;
  bool requires_grad = false;
  // linkage to the thread's active tape (valid only while generations match)
  std::uint64_t tape_gen = 0;
  int node = -1;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);
  static Tensor from(std::vector<int> shape, std::vector<double> values);
  static Tensor scalar(double v);
  static Tensor gaussian(std::vector<int> shape, Rng& rng, double stdev);

  bool defined() const { return d_ != nullptr; }
  const std::vector<int>& shape() const { return d_->shape; }
  int rank() const { return int(d_->shape.size()); }
  // 2-D views: rank-1 tensors count as a single row
  int rows() const;
  int cols() const;
  std::size_t size() const { return d_->v.size(); }

  double* data() { return d_->v.data(); }
  const double* data() const { return d_->v.data(); }
  std::vector<double>& values() { return d_->v; }
  const std::vector<double>& values() const { return d_->v; }
  double& at(int r, int c);
  double at(int r, int c) const;
  double item() const;  // value of a 1-element tensor

  Tensor& set_requires_grad(bool b);
  bool requires_grad() const { return d_ && d_->requires_grad; }
  Tensor clone() const;  // deep copy, detached from any tape

  TensorData* raw() const { return d_.get(); }

 private:
  std::shared_ptr<TensorData> d_;
};

std::string shape_str(const std::vector<int>& shape);
std::string shape_str(const Tensor& t);

}  // namespace ditra
