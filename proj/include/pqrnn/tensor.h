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

// Dense row-major tensors and the gradient tape that records operations on
// them for reverse-mode differentiation.
//
// The core is templated on the scalar type. Training and inference run in
// float; gradient checks instantiate everything with double.

#ifndef PQRNN_TENSOR_H_
#define PQRNN_TENSOR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pqrnn {

using Index = std::int64_t;
using Shape = std::vector<Index>;

Index shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

template <typename Real>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real(0));
  Tensor(Shape shape, std::vector<Real> values);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  Index dim(int axis) const;
  Index size() const { return static_cast<Index>(data_.size()); }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  Real* raw() { return data_.data(); }
  const Real* raw() const { return data_.data(); }
  Real& operator[](Index i) { return data_[i]; }
  const Real& operator[](Index i) const { return data_[i]; }

  // Gradient buffer; allocated (zero-filled) iff requires_grad().
  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool value);
  std::span<Real> grad() { return grad_; }
  std::span<const Real> grad() const { return grad_; }
  void zero_grad();

  // Same data under a new shape with equal element count.
  void reshape_in_place(Shape shape);

  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<Real> data_;
  std::vector<Real> grad_;
  bool requires_grad_ = false;
};

// Shared handle to a tensor participating in a computation. Parameters are
// long-lived Vars owned by the model; intermediates are owned by the tape
// records that reference them.
template <typename Real>
using Var = std::shared_ptr<Tensor<Real>>;

template <typename Real>
Var<Real> make_var(Shape shape, Real fill = Real(0), bool requires_grad = false);
template <typename Real>
Var<Real> make_var(Shape shape, std::vector<Real> values,
                   bool requires_grad = false);
template <typename Real>
Var<Real> scalar_var(Real value);

// Ordered record of differentiable operations. Ops append a record only when
// the tape is recording and at least one input requires a gradient.
template <typename Real>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t num_records() const { return records_.size(); }

  // True when an op over `inputs` must produce a gradient-tracking output.
  bool tracks(std::initializer_list<const Var<Real>*> inputs) const;

  void record(Var<Real> output, std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and replays records in reverse order. A second
  // call without reset() throws InputError.
  void backward(const Var<Real>& loss);

  // Drops all records so the tape can serve the next step.
  void reset();

 private:
  struct Record {
    Var<Real> output;
    std::function<void()> backward;
  };
  bool recording_;
  bool backward_done_ = false;
  std::vector<Record> records_;
};

}  // namespace pqrnn

#endif  // PQRNN_TENSOR_H_
