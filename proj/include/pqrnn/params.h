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

#ifndef PQRNN_PARAMS_H_
#define PQRNN_PARAMS_H_

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "pqrnn/errors.h"
#include "pqrnn/tensor.h"

namespace pqrnn {

template <typename Real>
struct Parameter {
  std::string name;
  Var<Real> value;
  bool l2 = true;  // included in the L2 penalty
};

// Named trainable tensors in registration order.
template <typename Real>
class ParameterSet {
 public:
  Var<Real> add(const std::string& name, Shape shape, bool l2) {
    if (index_.count(name)) throw ConfigError("duplicate parameter " + name);
    index_[name] = params_.size();
    params_.push_back({name, make_var<Real>(std::move(shape), Real(0), true), l2});
    return params_.back().value;
  }

  const Var<Real>& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter " + name);
    return params_[it->second].value;
  }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  const std::vector<Parameter<Real>>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }

  Index num_scalars() const {
    Index n = 0;
    for (const auto& p : params_) n += p.value->size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.value->zero_grad();
  }

  // Deep copy: new tensors holding the same values.
  ParameterSet clone() const {
    ParameterSet out;
    for (const auto& p : params_) {
      auto v = out.add(p.name, p.value->shape(), p.l2);
      std::copy(p.value->data().begin(), p.value->data().end(), v->raw());
    }
    return out;
  }

 private:
  std::vector<Parameter<Real>> params_;
  std::map<std::string, std::size_t> index_;
};

// Glorot-uniform fill.
template <typename Real>
void glorot_uniform(Tensor<Real>& t, Index fan_in, Index fan_out,
                    std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Real& v : t.data()) v = static_cast<Real>(dist(rng));
}

}  // namespace pqrnn

#endif  // PQRNN_PARAMS_H_
