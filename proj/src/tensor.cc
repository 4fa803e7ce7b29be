// Copyright 2026 The pQRNN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pqrnn/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pqrnn/errors.h"

namespace pqrnn {

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) {
    if (d < 0) throw ShapeError("negative dimension in " + shape_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << "x";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

template <typename Real>
Tensor<Real>::Tensor(Shape shape, Real fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

template <typename Real>
Tensor<Real>::Tensor(Shape shape, std::vector<Real> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (shape_size(shape_) != size()) {
    throw ShapeError("tensor shape " + shape_string(shape_) + " does not hold " +
                     std::to_string(size()) + " values");
  }
}

template <typename Real>
Index Tensor<Real>::dim(int axis) const {
  if (axis < 0) axis += rank();
  if (axis < 0 || axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_string(shape_));
  }
  return shape_[axis];
}

template <typename Real>
void Tensor<Real>::set_requires_grad(bool value) {
  requires_grad_ = value;
  if (value) {
    grad_.assign(data_.size(), Real(0));
  } else {
    grad_.clear();
    grad_.shrink_to_fit();
  }
}

template <typename Real>
void Tensor<Real>::zero_grad() {
  std::fill(grad_.begin(), grad_.end(), Real(0));
}

template <typename Real>
void Tensor<Real>::reshape_in_place(Shape shape) {
  if (shape_size(shape) != size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " +
                     shape_string(shape));
  }
  shape_ = std::move(shape);
}

template <typename Real>
bool Tensor<Real>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](Real v) { return std::isfinite(v); });
}

template <typename Real>
Var<Real> make_var(Shape shape, Real fill, bool requires_grad) {
  auto v = std::make_shared<Tensor<Real>>(std::move(shape), fill);
  if (requires_grad) v->set_requires_grad(true);
  return v;
}

template <typename Real>
Var<Real> make_var(Shape shape, std::vector<Real> values, bool requires_grad) {
  auto v = std::make_shared<Tensor<Real>>(std::move(shape), std::move(values));
  if (requires_grad) v->set_requires_grad(true);
  return v;
}

template <typename Real>
Var<Real> scalar_var(Real value) {
  return make_var<Real>(Shape{}, std::vector<Real>{value});
}

template <typename Real>
bool Tape<Real>::tracks(std::initializer_list<const Var<Real>*> inputs) const {
  if (!recording_) return false;
  for (const Var<Real>* v : inputs) {
    if (v && *v && (*v)->requires_grad()) return true;
  }
  return false;
}

template <typename Real>
void Tape<Real>::record(Var<Real> output, std::function<void()> backward) {
  records_.push_back(Record{std::move(output), std::move(backward)});
}

template <typename Real>
void Tape<Real>::backward(const Var<Real>& loss) {
  if (backward_done_) {
    throw InputError("backward() called twice on the same tape without reset");
  }
  if (!loss || loss->size() != 1) {
    throw InputError("backward() needs a scalar loss");
  }
  if (!loss->all_finite()) throw NumericError("loss is not finite");
  backward_done_ = true;
  if (!loss->requires_grad()) return;
  loss->grad()[0] += Real(1);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    it->backward();
  }
}

template <typename Real>
void Tape<Real>::reset() {
  records_.clear();
  backward_done_ = false;
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template Var<float> make_var(Shape, float, bool);
template Var<double> make_var(Shape, double, bool);
template Var<float> make_var(Shape, std::vector<float>, bool);
template Var<double> make_var(Shape, std::vector<double>, bool);
template Var<float> scalar_var(float);
template Var<double> scalar_var(double);

}  // namespace pqrnn
