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

// Differentiable operations over Var handles.
//
// Broadcasting is limited to exact shapes and scalars (size-1 tensors). Every
// other coercion goes through an explicit reshape/expand op. Masks are plain
// 0/1 tensors and never receive gradients.

#ifndef PQRNN_OPS_H_
#define PQRNN_OPS_H_

#include <span>

#include "pqrnn/tensor.h"

namespace pqrnn {

// a[..., K] x b[K, P] -> [..., P]. Leading dimensions of `a` are treated as
// rows.
template <typename Real>
Var<Real> matmul(Tape<Real>& tape, const Var<Real>& a, const Var<Real>& b);

// [M, N] -> [N, M].
template <typename Real>
Var<Real> transpose(Tape<Real>& tape, const Var<Real>& a);

// Causal 1-D convolution along time. x is [T, C_in] or [batch, T, C_in], w is
// [k, C_in, C_out] and mask holds one 0/1 entry per timestep. Each sequence is
// left-padded with k-1 zero frames; masked output rows are zero.
template <typename Real>
Var<Real> conv1d_time(Tape<Real>& tape, const Var<Real>& x, const Var<Real>& w,
                      const Tensor<Real>& mask);

template <typename Real>
Var<Real> sigmoid(Tape<Real>& tape, const Var<Real>& x);
template <typename Real>
Var<Real> tanh(Tape<Real>& tape, const Var<Real>& x);
template <typename Real>
Var<Real> relu(Tape<Real>& tape, const Var<Real>& x);

template <typename Real>
Var<Real> add(Tape<Real>& tape, const Var<Real>& a, const Var<Real>& b);
template <typename Real>
Var<Real> sub(Tape<Real>& tape, const Var<Real>& a, const Var<Real>& b);
template <typename Real>
Var<Real> mul(Tape<Real>& tape, const Var<Real>& a, const Var<Real>& b);

// scale * x + shift with constant scalars.
template <typename Real>
Var<Real> affine(Tape<Real>& tape, const Var<Real>& x, Real scale, Real shift);

// Max-subtracted softmax along `axis` (negative counts from the back).
template <typename Real>
Var<Real> softmax(Tape<Real>& tape, const Var<Real>& x, int axis = -1);

// Softmax along the last axis restricted to entries with mask == 1. Masked
// entries get probability 0. A row with no valid entry throws InputError.
template <typename Real>
Var<Real> masked_softmax(Tape<Real>& tape, const Var<Real>& x,
                         const Tensor<Real>& mask);

// Mean over rows of -log softmax(logits)[class]. Rows whose class is negative
// are excluded; with no valid row the result is 0.
template <typename Real>
Var<Real> cross_entropy(Tape<Real>& tape, const Var<Real>& logits,
                        std::span<const int> classes);

// Mean over rows with row_mask == 1 of -sum(target * log softmax(logits)).
// `target` has the shape of `logits`; each used row is a distribution.
template <typename Real>
Var<Real> soft_cross_entropy(Tape<Real>& tape, const Var<Real>& logits,
                             const Tensor<Real>& target,
                             std::span<const Real> row_mask);

template <typename Real>
Var<Real> sum(Tape<Real>& tape, const Var<Real>& x);
template <typename Real>
Var<Real> sum_squares(Tape<Real>& tape, const Var<Real>& x);

template <typename Real>
Var<Real> reshape(Tape<Real>& tape, const Var<Real>& x, Shape shape);

// Concatenates along the last axis; leading dimensions must agree.
template <typename Real>
Var<Real> concat_last(Tape<Real>& tape, const Var<Real>& a, const Var<Real>& b);

// Reverses the first lengths[b] timesteps of every sequence in [batch, T, C];
// padding stays in place.
template <typename Real>
Var<Real> reverse_sequences(Tape<Real>& tape, const Var<Real>& x,
                            std::span<const int> lengths);

// Repeats x for every index of `leading`: result shape is leading ++ x.shape.
template <typename Real>
Var<Real> expand_leading(Tape<Real>& tape, const Var<Real>& x,
                         const Shape& leading);

// [batch, C] -> [batch, T, C], copying each row across time.
template <typename Real>
Var<Real> expand_time(Tape<Real>& tape, const Var<Real>& x, Index steps);

// sum_t alpha[b, t] * values[b, t, :] -> [batch, D].
template <typename Real>
Var<Real> weighted_time_sum(Tape<Real>& tape, const Var<Real>& values,
                            const Var<Real>& alpha);

// Zeroes rows (all leading positions) whose mask entry is 0.
template <typename Real>
Var<Real> mask_rows(Tape<Real>& tape, const Var<Real>& x,
                    const Tensor<Real>& mask);

}  // namespace pqrnn

#endif  // PQRNN_OPS_H_
