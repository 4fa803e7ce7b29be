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

#include "pqrnn/ops.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "pqrnn/errors.h"

namespace pqrnn {
namespace {

template <typename Real>
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using MatMap = Eigen::Map<Matrix<Real>>;
template <typename Real>
using ConstMatMap = Eigen::Map<const Matrix<Real>>;

template <typename Real>
Var<Real> new_output(Shape shape, bool tracked) {
  auto out = std::make_shared<Tensor<Real>>(std::move(shape));
  if (tracked) out->set_requires_grad(true);
  return out;
}

template <typename Real>
void check_mask_rows(const Tensor<Real>& x, const Tensor<Real>& mask,
                     const char* op) {
  if (mask.size() == 0 || x.size() % mask.size() != 0) {
    throw ShapeError(std::string(op) + ": mask " + shape_string(mask.shape()) +
                     " does not tile input " + shape_string(x.shape()));
  }
}

Index last_dim(const Shape& s) { return s.empty() ? 1 : s.back(); }

enum class Binary { kAdd, kSub, kMul };

template <typename Real>
Var<Real> binary(Tape<Real>& tape, const Var<Real>& a, const Var<Real>& b,
                 Binary op) {
  const bool same = a->shape() == b->shape();
  const bool b_scalar = !same && b->size() == 1;
  const bool a_scalar = !same && !b_scalar && a->size() == 1;
  if (!same && !a_scalar && !b_scalar) {
    throw ShapeError("elementwise op on incompatible shapes " +
                     shape_string(a->shape()) + " and " +
                     shape_string(b->shape()));
  }
  const Shape& shape = a_scalar ? b->shape() : a->shape();
  const bool tracked = tape.tracks({&a, &b});
  auto out = new_output<Real>(shape, tracked);
  const Index n = out->size();
  const Real* pa = a->raw();
  const Real* pb = b->raw();
  Real* po = out->raw();
  const Index sa = a_scalar ? 0 : 1;
  const Index sb = b_scalar ? 0 : 1;
  for (Index i = 0; i < n; ++i) {
    const Real x = pa[i * sa], y = pb[i * sb];
    po[i] = op == Binary::kAdd ? x + y : op == Binary::kSub ? x - y : x * y;
  }
  if (tracked) {
    tape.record(out, [a, b, out, op, sa, sb, n] {
      const Real* g = out->grad().data();
      if (a->requires_grad()) {
        Real* ga = a->grad().data();
        for (Index i = 0; i < n; ++i) {
          ga[i * sa] += op == Binary::kMul ? g[i] * (*b)[i * sb] : g[i];
        }
      }
      if (b->requires_grad()) {
        Real* gb = b->grad().data();
        for (Index i = 0; i < n; ++i) {
          gb[i * sb] += op == Binary::kAdd   ? g[i]
                        : op == Binary::kSub ? -g[i]
                                             : g[i] * (*a)[i * sa];
        }
      }
    });
  }
  return out;
}

// Applies f elementwise; df receives (input, output) and returns dy/dx.
template <typename Real, typename F, typename DF>
Var<Real> unary(Tape<Real>& tape, const Var<Real>& x, F f, DF df) {
  const bool tracked = tape.tracks({&x});
  auto out = new_output<Real>(x->shape(), tracked);
  const Index n = x->size();
  for (Index i = 0; i < n; ++i) (*out)[i] = f((*x)[i]);
  if (tracked) {
    tape.record(out, [x, out, df, n] {
      const Real* g = out->grad().data();
      Real* gx = x->grad().data();
      for (Index i = 0; i < n; ++i) gx[i] += g[i] * df((*x)[i], (*out)[i]);
    });
  }
  return out;
}

}  // namespace

template <typename Real>
Var<Real> matmul(Tape<Real>& tape, const Var<Real>& a, const Var<Real>& b) {
  if (a->rank() < 1 || b->rank() != 2 || last_dim(a->shape()) != b->dim(0)) {
    throw ShapeError("matmul: inner dimensions differ for " +
                     shape_string(a->shape()) + " x " +
                     shape_string(b->shape()));
  }
  const Index k = b->dim(0), p = b->dim(1);
  const Index m = a->size() / std::max<Index>(k, 1);
  Shape shape = a->shape();
  shape.back() = p;
  const bool tracked = tape.tracks({&a, &b});
  auto out = new_output<Real>(shape, tracked);
  MatMap<Real>(out->raw(), m, p).noalias() =
      ConstMatMap<Real>(a->raw(), m, k) * ConstMatMap<Real>(b->raw(), k, p);
  if (tracked) {
    tape.record(out, [a, b, out, m, k, p] {
      ConstMatMap<Real> g(out->grad().data(), m, p);
      if (a->requires_grad()) {
        MatMap<Real>(a->grad().data(), m, k).noalias() +=
            g * ConstMatMap<Real>(b->raw(), k, p).transpose();
      }
      if (b->requires_grad()) {
        MatMap<Real>(b->grad().data(), k, p).noalias() +=
            ConstMatMap<Real>(a->raw(), m, k).transpose() * g;
      }
    });
  }
  return out;
}

template <typename Real>
Var<Real> transpose(Tape<Real>& tape, const Var<Real>& a) {
  if (a->rank() != 2) {
    throw ShapeError("transpose expects a matrix, got " +
                     shape_string(a->shape()));
  }
  const Index m = a->dim(0), n = a->dim(1);
  const bool tracked = tape.tracks({&a});
  auto out = new_output<Real>({n, m}, tracked);
  MatMap<Real>(out->raw(), n, m) = ConstMatMap<Real>(a->raw(), m, n).transpose();
  if (tracked) {
    tape.record(out, [a, out, m, n] {
      MatMap<Real>(a->grad().data(), m, n) +=
          ConstMatMap<Real>(out->grad().data(), n, m).transpose();
    });
  }
  return out;
}

template <typename Real>
Var<Real> conv1d_time(Tape<Real>& tape, const Var<Real>& x, const Var<Real>& w,
                      const Tensor<Real>& mask) {
  if (w->rank() != 3) {
    throw ShapeError("conv1d_time: kernel must be [k x C_in x C_out], got " +
                     shape_string(w->shape()));
  }
  const Index k = w->dim(0), c_in = w->dim(1), c_out = w->dim(2);
  if (k < 1) throw ConfigError("conv1d_time: kernel width must be >= 1");
  if (x->rank() != 2 && x->rank() != 3) {
    throw ShapeError("conv1d_time: input must be [T x C] or [B x T x C], got " +
                     shape_string(x->shape()));
  }
  const Index batch = x->rank() == 3 ? x->dim(0) : 1;
  const Index steps = x->dim(-2);
  if (x->dim(-1) != c_in) {
    throw ShapeError("conv1d_time: input channels " + shape_string(x->shape()) +
                     " do not match kernel " + shape_string(w->shape()));
  }
  if (mask.size() != batch * steps) {
    throw ShapeError("conv1d_time: mask " + shape_string(mask.shape()) +
                     " does not match input " + shape_string(x->shape()));
  }
  const Index rows = batch * steps;
  const Index width = k * c_in;
  // Column j*C_in..(j+1)*C_in of row (b, t) holds x[b, t-k+1+j].
  auto cols = std::make_shared<std::vector<Real>>(rows * width, Real(0));
  const Real* px = x->raw();
  for (Index b = 0; b < batch; ++b) {
    for (Index t = 0; t < steps; ++t) {
      Real* dst = cols->data() + (b * steps + t) * width;
      for (Index j = 0; j < k; ++j) {
        const Index src = t - k + 1 + j;
        if (src < 0) continue;
        std::copy_n(px + (b * steps + src) * c_in, c_in, dst + j * c_in);
      }
    }
  }
  Shape shape = x->shape();
  shape.back() = c_out;
  const bool tracked = tape.tracks({&x, &w});
  auto out = new_output<Real>(shape, tracked);
  MatMap<Real> y(out->raw(), rows, c_out);
  y.noalias() = ConstMatMap<Real>(cols->data(), rows, width) *
                ConstMatMap<Real>(w->raw(), width, c_out);
  auto valid = std::make_shared<std::vector<bool>>(rows);
  for (Index r = 0; r < rows; ++r) {
    (*valid)[r] = mask[r] != Real(0);
    if (!(*valid)[r]) y.row(r).setZero();
  }
  if (tracked) {
    tape.record(out, [x, w, out, cols, valid, batch, steps, k, c_in, c_out,
                      rows, width] {
      Matrix<Real> g = ConstMatMap<Real>(out->grad().data(), rows, c_out);
      for (Index r = 0; r < rows; ++r) {
        if (!(*valid)[r]) g.row(r).setZero();
      }
      if (w->requires_grad()) {
        MatMap<Real>(w->grad().data(), width, c_out).noalias() +=
            ConstMatMap<Real>(cols->data(), rows, width).transpose() * g;
      }
      if (x->requires_grad()) {
        Matrix<Real> dcols = g * ConstMatMap<Real>(w->raw(), width, c_out).transpose();
        Real* gx = x->grad().data();
        for (Index b = 0; b < batch; ++b) {
          for (Index t = 0; t < steps; ++t) {
            const Real* src = dcols.data() + (b * steps + t) * width;
            for (Index j = 0; j < k; ++j) {
              const Index s = t - k + 1 + j;
              if (s < 0) continue;
              Real* dst = gx + (b * steps + s) * c_in;
              for (Index c = 0; c < c_in; ++c) dst[c] += src[j * c_in + c];
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename Real>
Var<Real> sigmoid(Tape<Real>& tape, const Var<Real>& x) {
  return unary(
      tape, x,
      [](Real v) {
        if (v >= 0) return Real(1) / (Real(1) + std::exp(-v));
        const Real e = std::exp(v);
        return e / (Real(1) + e);
      },
      [](Real, Real y) { return y * (Real(1) - y); });
}

template <typename Real>
Var<Real> tanh(Tape<Real>& tape, const Var<Real>& x) {
  return unary(
      tape, x, [](Real v) { return std::tanh(v); },
      [](Real, Real y) { return Real(1) - y * y; });
}

template <typename Real>
Var<Real> relu(Tape<Real>& tape, const Var<Real>& x) {
  return unary(
      tape, x, [](Real v) { return v > Real(0) ? v : Real(0); },
      [](Real v, Real) { return v > Real(0) ? Real(1) : Real(0); });
}

template <typename Real>
Var<Real> add(Tape<Real>& tape, const Var<Real>& a, const Var<Real>& b) {
  return binary(tape, a, b, Binary::kAdd);
}

template <typename Real>
Var<Real> sub(Tape<Real>& tape, const Var<Real>& a, const Var<Real>& b) {
  return binary(tape, a, b, Binary::kSub);
}

template <typename Real>
Var<Real> mul(Tape<Real>& tape, const Var<Real>& a, const Var<Real>& b) {
  return binary(tape, a, b, Binary::kMul);
}

template <typename Real>
Var<Real> affine(Tape<Real>& tape, const Var<Real>& x, Real scale, Real shift) {
  return unary(
      tape, x, [scale, shift](Real v) { return scale * v + shift; },
      [scale](Real, Real) { return scale; });
}

template <typename Real>
Var<Real> softmax(Tape<Real>& tape, const Var<Real>& x, int axis) {
  const int rank = x->rank();
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw ShapeError("softmax: axis out of range for " +
                     shape_string(x->shape()));
  }
  Index outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x->dim(i);
  for (int i = axis + 1; i < rank; ++i) inner *= x->dim(i);
  const Index n = x->dim(axis);
  const bool tracked = tape.tracks({&x});
  auto out = new_output<Real>(x->shape(), tracked);
  for (Index o = 0; o < outer; ++o) {
    for (Index in = 0; in < inner; ++in) {
      const Real* src = x->raw() + o * n * inner + in;
      Real* dst = out->raw() + o * n * inner + in;
      Real hi = src[0];
      for (Index i = 1; i < n; ++i) hi = std::max(hi, src[i * inner]);
      Real total = 0;
      for (Index i = 0; i < n; ++i) {
        dst[i * inner] = std::exp(src[i * inner] - hi);
        total += dst[i * inner];
      }
      for (Index i = 0; i < n; ++i) dst[i * inner] /= total;
    }
  }
  if (tracked) {
    tape.record(out, [x, out, outer, inner, n] {
      for (Index o = 0; o < outer; ++o) {
        for (Index in = 0; in < inner; ++in) {
          const Index base = o * n * inner + in;
          const Real* y = out->raw() + base;
          const Real* g = out->grad().data() + base;
          Real dot = 0;
          for (Index i = 0; i < n; ++i) dot += y[i * inner] * g[i * inner];
          Real* gx = x->grad().data() + base;
          for (Index i = 0; i < n; ++i) {
            gx[i * inner] += y[i * inner] * (g[i * inner] - dot);
          }
        }
      }
    });
  }
  return out;
}

template <typename Real>
Var<Real> masked_softmax(Tape<Real>& tape, const Var<Real>& x,
                         const Tensor<Real>& mask) {
  if (mask.size() != x->size()) {
    throw ShapeError("masked_softmax: mask " + shape_string(mask.shape()) +
                     " does not match " + shape_string(x->shape()));
  }
  const Index n = last_dim(x->shape());
  const Index rows = x->size() / n;
  const bool tracked = tape.tracks({&x});
  auto out = new_output<Real>(x->shape(), tracked);
  for (Index r = 0; r < rows; ++r) {
    const Real* src = x->raw() + r * n;
    const Real* m = mask.raw() + r * n;
    Real* dst = out->raw() + r * n;
    bool any = false;
    Real hi = 0;
    for (Index i = 0; i < n; ++i) {
      if (m[i] == Real(0)) continue;
      hi = any ? std::max(hi, src[i]) : src[i];
      any = true;
    }
    if (!any) throw InputError("masked_softmax: row with no valid entry");
    Real total = 0;
    for (Index i = 0; i < n; ++i) {
      dst[i] = m[i] == Real(0) ? Real(0) : std::exp(src[i] - hi);
      total += dst[i];
    }
    for (Index i = 0; i < n; ++i) dst[i] /= total;
  }
  if (tracked) {
    tape.record(out, [x, out, rows, n] {
      for (Index r = 0; r < rows; ++r) {
        const Real* y = out->raw() + r * n;
        const Real* g = out->grad().data() + r * n;
        Real dot = 0;
        for (Index i = 0; i < n; ++i) dot += y[i] * g[i];
        Real* gx = x->grad().data() + r * n;
        for (Index i = 0; i < n; ++i) gx[i] += y[i] * (g[i] - dot);
      }
    });
  }
  return out;
}

namespace {

// Writes log-softmax of each row of `logits` into `logp`.
template <typename Real>
void log_softmax_rows(const Real* logits, Index rows, Index n, Real* logp) {
  for (Index r = 0; r < rows; ++r) {
    const Real* src = logits + r * n;
    Real* dst = logp + r * n;
    const Real hi = *std::max_element(src, src + n);
    Real total = 0;
    for (Index i = 0; i < n; ++i) total += std::exp(src[i] - hi);
    const Real log_total = std::log(total) + hi;
    for (Index i = 0; i < n; ++i) dst[i] = src[i] - log_total;
  }
}

}  // namespace

template <typename Real>
Var<Real> cross_entropy(Tape<Real>& tape, const Var<Real>& logits,
                        std::span<const int> classes) {
  const Index n = last_dim(logits->shape());
  const Index rows = logits->size() / n;
  if (static_cast<Index>(classes.size()) != rows) {
    throw ShapeError("cross_entropy: " + std::to_string(classes.size()) +
                     " targets for " + std::to_string(rows) + " rows");
  }
  auto logp = std::make_shared<std::vector<Real>>(logits->size());
  log_softmax_rows(logits->raw(), rows, n, logp->data());
  Index count = 0;
  Real loss = 0;
  for (Index r = 0; r < rows; ++r) {
    const int c = classes[r];
    if (c < 0) continue;
    if (c >= n) {
      throw ShapeError("cross_entropy: class " + std::to_string(c) +
                       " out of range for " + std::to_string(n) + " classes");
    }
    loss -= (*logp)[r * n + c];
    ++count;
  }
  if (count > 0) loss /= static_cast<Real>(count);
  const bool tracked = tape.tracks({&logits});
  auto out = new_output<Real>(Shape{}, tracked);
  (*out)[0] = loss;
  if (tracked && count > 0) {
    std::vector<int> targets(classes.begin(), classes.end());
    tape.record(out, [logits, out, logp, targets = std::move(targets), rows, n,
                      count] {
      const Real g = out->grad()[0] / static_cast<Real>(count);
      Real* gx = logits->grad().data();
      for (Index r = 0; r < rows; ++r) {
        if (targets[r] < 0) continue;
        for (Index i = 0; i < n; ++i) {
          gx[r * n + i] += g * std::exp((*logp)[r * n + i]);
        }
        gx[r * n + targets[r]] -= g;
      }
    });
  }
  return out;
}

template <typename Real>
Var<Real> soft_cross_entropy(Tape<Real>& tape, const Var<Real>& logits,
                             const Tensor<Real>& target,
                             std::span<const Real> row_mask) {
  if (target.shape() != logits->shape()) {
    throw ShapeError("soft_cross_entropy: target " +
                     shape_string(target.shape()) + " does not match logits " +
                     shape_string(logits->shape()));
  }
  const Index n = last_dim(logits->shape());
  const Index rows = logits->size() / n;
  if (static_cast<Index>(row_mask.size()) != rows) {
    throw ShapeError("soft_cross_entropy: mask length " +
                     std::to_string(row_mask.size()) + " for " +
                     std::to_string(rows) + " rows");
  }
  auto logp = std::make_shared<std::vector<Real>>(logits->size());
  log_softmax_rows(logits->raw(), rows, n, logp->data());
  Index count = 0;
  Real loss = 0;
  for (Index r = 0; r < rows; ++r) {
    if (row_mask[r] == Real(0)) continue;
    for (Index i = 0; i < n; ++i) {
      const Real t = target[r * n + i];
      if (t != Real(0)) loss -= t * (*logp)[r * n + i];
    }
    ++count;
  }
  if (count > 0) loss /= static_cast<Real>(count);
  const bool tracked = tape.tracks({&logits});
  auto out = new_output<Real>(Shape{}, tracked);
  (*out)[0] = loss;
  if (tracked && count > 0) {
    std::vector<Real> used(row_mask.begin(), row_mask.end());
    auto tgt = std::make_shared<Tensor<Real>>(target);
    tape.record(out, [logits, out, logp, tgt, used = std::move(used), rows, n,
                      count] {
      const Real g = out->grad()[0] / static_cast<Real>(count);
      Real* gx = logits->grad().data();
      for (Index r = 0; r < rows; ++r) {
        if (used[r] == Real(0)) continue;
        Real mass = 0;
        for (Index i = 0; i < n; ++i) mass += (*tgt)[r * n + i];
        for (Index i = 0; i < n; ++i) {
          gx[r * n + i] +=
              g * (mass * std::exp((*logp)[r * n + i]) - (*tgt)[r * n + i]);
        }
      }
    });
  }
  return out;
}

template <typename Real>
Var<Real> sum(Tape<Real>& tape, const Var<Real>& x) {
  const bool tracked = tape.tracks({&x});
  auto out = new_output<Real>(Shape{}, tracked);
  Real total = 0;
  for (Real v : x->data()) total += v;
  (*out)[0] = total;
  if (tracked) {
    tape.record(out, [x, out] {
      const Real g = out->grad()[0];
      for (Real& gx : x->grad()) gx += g;
    });
  }
  return out;
}

template <typename Real>
Var<Real> sum_squares(Tape<Real>& tape, const Var<Real>& x) {
  const bool tracked = tape.tracks({&x});
  auto out = new_output<Real>(Shape{}, tracked);
  Real total = 0;
  for (Real v : x->data()) total += v * v;
  (*out)[0] = total;
  if (tracked) {
    tape.record(out, [x, out] {
      const Real g = out->grad()[0];
      auto gx = x->grad();
      for (Index i = 0; i < x->size(); ++i) gx[i] += Real(2) * g * (*x)[i];
    });
  }
  return out;
}

template <typename Real>
Var<Real> reshape(Tape<Real>& tape, const Var<Real>& x, Shape shape) {
  if (shape_size(shape) != x->size()) {
    throw ShapeError("reshape: cannot view " + shape_string(x->shape()) +
                     " as " + shape_string(shape));
  }
  const bool tracked = tape.tracks({&x});
  auto out = new_output<Real>(std::move(shape), tracked);
  std::copy(x->data().begin(), x->data().end(), out->raw());
  if (tracked) {
    tape.record(out, [x, out] {
      auto gx = x->grad();
      auto g = out->grad();
      for (Index i = 0; i < x->size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

template <typename Real>
Var<Real> concat_last(Tape<Real>& tape, const Var<Real>& a, const Var<Real>& b) {
  Shape lead_a = a->shape(), lead_b = b->shape();
  if (lead_a.empty() || lead_b.empty()) {
    throw ShapeError("concat_last: scalars cannot be concatenated");
  }
  const Index ca = lead_a.back(), cb = lead_b.back();
  lead_a.pop_back();
  lead_b.pop_back();
  if (lead_a != lead_b) {
    throw ShapeError("concat_last: leading dimensions differ for " +
                     shape_string(a->shape()) + " and " +
                     shape_string(b->shape()));
  }
  const Index rows = shape_size(lead_a);
  Shape shape = lead_a;
  shape.push_back(ca + cb);
  const bool tracked = tape.tracks({&a, &b});
  auto out = new_output<Real>(shape, tracked);
  for (Index r = 0; r < rows; ++r) {
    std::copy_n(a->raw() + r * ca, ca, out->raw() + r * (ca + cb));
    std::copy_n(b->raw() + r * cb, cb, out->raw() + r * (ca + cb) + ca);
  }
  if (tracked) {
    tape.record(out, [a, b, out, rows, ca, cb] {
      const Real* g = out->grad().data();
      for (Index r = 0; r < rows; ++r) {
        if (a->requires_grad()) {
          Real* ga = a->grad().data() + r * ca;
          for (Index c = 0; c < ca; ++c) ga[c] += g[r * (ca + cb) + c];
        }
        if (b->requires_grad()) {
          Real* gb = b->grad().data() + r * cb;
          for (Index c = 0; c < cb; ++c) gb[c] += g[r * (ca + cb) + ca + c];
        }
      }
    });
  }
  return out;
}

template <typename Real>
Var<Real> reverse_sequences(Tape<Real>& tape, const Var<Real>& x,
                            std::span<const int> lengths) {
  if (x->rank() != 3 || static_cast<Index>(lengths.size()) != x->dim(0)) {
    throw ShapeError("reverse_sequences: expected [batch x T x C] with one "
                     "length per sequence, got " + shape_string(x->shape()));
  }
  const Index batch = x->dim(0), steps = x->dim(1), c = x->dim(2);
  // Source timestep of every output timestep.
  auto source = std::make_shared<std::vector<Index>>(batch * steps);
  for (Index b = 0; b < batch; ++b) {
    const Index len = lengths[b];
    if (len < 0 || len > steps) {
      throw ShapeError("reverse_sequences: length out of range");
    }
    for (Index t = 0; t < steps; ++t) {
      (*source)[b * steps + t] = b * steps + (t < len ? len - 1 - t : t);
    }
  }
  const bool tracked = tape.tracks({&x});
  auto out = new_output<Real>(x->shape(), tracked);
  for (Index r = 0; r < batch * steps; ++r) {
    std::copy_n(x->raw() + (*source)[r] * c, c, out->raw() + r * c);
  }
  if (tracked) {
    tape.record(out, [x, out, source, c] {
      const Real* g = out->grad().data();
      Real* gx = x->grad().data();
      for (std::size_t r = 0; r < source->size(); ++r) {
        Real* dst = gx + (*source)[r] * c;
        for (Index j = 0; j < c; ++j) dst[j] += g[r * c + j];
      }
    });
  }
  return out;
}

template <typename Real>
Var<Real> expand_leading(Tape<Real>& tape, const Var<Real>& x,
                         const Shape& leading) {
  const Index copies = shape_size(leading);
  Shape shape = leading;
  shape.insert(shape.end(), x->shape().begin(), x->shape().end());
  const Index n = x->size();
  const bool tracked = tape.tracks({&x});
  auto out = new_output<Real>(shape, tracked);
  for (Index r = 0; r < copies; ++r) {
    std::copy_n(x->raw(), n, out->raw() + r * n);
  }
  if (tracked) {
    tape.record(out, [x, out, copies, n] {
      const Real* g = out->grad().data();
      Real* gx = x->grad().data();
      for (Index r = 0; r < copies; ++r) {
        for (Index i = 0; i < n; ++i) gx[i] += g[r * n + i];
      }
    });
  }
  return out;
}

template <typename Real>
Var<Real> expand_time(Tape<Real>& tape, const Var<Real>& x, Index steps) {
  if (x->rank() != 2) {
    throw ShapeError("expand_time expects [batch x C], got " +
                     shape_string(x->shape()));
  }
  const Index batch = x->dim(0), c = x->dim(1);
  const bool tracked = tape.tracks({&x});
  auto out = new_output<Real>({batch, steps, c}, tracked);
  for (Index b = 0; b < batch; ++b) {
    for (Index t = 0; t < steps; ++t) {
      std::copy_n(x->raw() + b * c, c, out->raw() + (b * steps + t) * c);
    }
  }
  if (tracked) {
    tape.record(out, [x, out, batch, steps, c] {
      const Real* g = out->grad().data();
      Real* gx = x->grad().data();
      for (Index b = 0; b < batch; ++b) {
        for (Index t = 0; t < steps; ++t) {
          for (Index j = 0; j < c; ++j) {
            gx[b * c + j] += g[(b * steps + t) * c + j];
          }
        }
      }
    });
  }
  return out;
}

template <typename Real>
Var<Real> weighted_time_sum(Tape<Real>& tape, const Var<Real>& values,
                            const Var<Real>& alpha) {
  if (values->rank() != 3 || alpha->rank() != 2 ||
      values->dim(0) != alpha->dim(0) || values->dim(1) != alpha->dim(1)) {
    throw ShapeError("weighted_time_sum: values " +
                     shape_string(values->shape()) + " vs weights " +
                     shape_string(alpha->shape()));
  }
  const Index batch = values->dim(0), steps = values->dim(1),
              d = values->dim(2);
  const bool tracked = tape.tracks({&values, &alpha});
  auto out = new_output<Real>({batch, d}, tracked);
  for (Index b = 0; b < batch; ++b) {
    Real* dst = out->raw() + b * d;
    for (Index t = 0; t < steps; ++t) {
      const Real w = (*alpha)[b * steps + t];
      const Real* src = values->raw() + (b * steps + t) * d;
      for (Index j = 0; j < d; ++j) dst[j] += w * src[j];
    }
  }
  if (tracked) {
    tape.record(out, [values, alpha, out, batch, steps, d] {
      const Real* g = out->grad().data();
      for (Index b = 0; b < batch; ++b) {
        for (Index t = 0; t < steps; ++t) {
          const Index row = b * steps + t;
          if (values->requires_grad()) {
            Real* gv = values->grad().data() + row * d;
            const Real w = (*alpha)[row];
            for (Index j = 0; j < d; ++j) gv[j] += w * g[b * d + j];
          }
          if (alpha->requires_grad()) {
            const Real* v = values->raw() + row * d;
            Real dot = 0;
            for (Index j = 0; j < d; ++j) dot += v[j] * g[b * d + j];
            alpha->grad()[row] += dot;
          }
        }
      }
    });
  }
  return out;
}

template <typename Real>
Var<Real> mask_rows(Tape<Real>& tape, const Var<Real>& x,
                    const Tensor<Real>& mask) {
  check_mask_rows(*x, mask, "mask_rows");
  const Index rows = mask.size();
  const Index c = x->size() / rows;
  const bool tracked = tape.tracks({&x});
  auto out = new_output<Real>(x->shape(), tracked);
  for (Index r = 0; r < rows; ++r) {
    if (mask[r] != Real(0)) std::copy_n(x->raw() + r * c, c, out->raw() + r * c);
  }
  if (tracked) {
    auto keep = std::make_shared<Tensor<Real>>(mask);
    tape.record(out, [x, out, keep, rows, c] {
      const Real* g = out->grad().data();
      Real* gx = x->grad().data();
      for (Index r = 0; r < rows; ++r) {
        if ((*keep)[r] == Real(0)) continue;
        for (Index j = 0; j < c; ++j) gx[r * c + j] += g[r * c + j];
      }
    });
  }
  return out;
}

#define PQRNN_INSTANTIATE_OPS(Real)                                           \
  template Var<Real> matmul(Tape<Real>&, const Var<Real>&, const Var<Real>&); \
  template Var<Real> transpose(Tape<Real>&, const Var<Real>&);                \
  template Var<Real> conv1d_time(Tape<Real>&, const Var<Real>&,               \
                                 const Var<Real>&, const Tensor<Real>&);      \
  template Var<Real> sigmoid(Tape<Real>&, const Var<Real>&);                  \
  template Var<Real> tanh(Tape<Real>&, const Var<Real>&);                     \
  template Var<Real> relu(Tape<Real>&, const Var<Real>&);                     \
  template Var<Real> add(Tape<Real>&, const Var<Real>&, const Var<Real>&);    \
  template Var<Real> sub(Tape<Real>&, const Var<Real>&, const Var<Real>&);    \
  template Var<Real> mul(Tape<Real>&, const Var<Real>&, const Var<Real>&);    \
  template Var<Real> affine(Tape<Real>&, const Var<Real>&, Real, Real);       \
  template Var<Real> softmax(Tape<Real>&, const Var<Real>&, int);              \
  template Var<Real> masked_softmax(Tape<Real>&, const Var<Real>&,            \
                                    const Tensor<Real>&);                     \
  template Var<Real> cross_entropy(Tape<Real>&, const Var<Real>&,             \
                                   std::span<const int>);                     \
  template Var<Real> soft_cross_entropy(Tape<Real>&, const Var<Real>&,        \
                                        const Tensor<Real>&,                  \
                                        std::span<const Real>);               \
  template Var<Real> sum(Tape<Real>&, const Var<Real>&);                      \
  template Var<Real> sum_squares(Tape<Real>&, const Var<Real>&);              \
  template Var<Real> reshape(Tape<Real>&, const Var<Real>&, Shape);           \
  template Var<Real> concat_last(Tape<Real>&, const Var<Real>&,               \
                                 const Var<Real>&);                           \
  template Var<Real> reverse_sequences(Tape<Real>&, const Var<Real>&,         \
                                       std::span<const int>);                 \
  template Var<Real> expand_leading(Tape<Real>&, const Var<Real>&,            \
                                    const Shape&);                            \
  template Var<Real> expand_time(Tape<Real>&, const Var<Real>&, Index);       \
  template Var<Real> weighted_time_sum(Tape<Real>&, const Var<Real>&,         \
                                       const Var<Real>&);                     \
  template Var<Real> mask_rows(Tape<Real>&, const Var<Real>&,                 \
                               const Tensor<Real>&);

PQRNN_INSTANTIATE_OPS(float)
PQRNN_INSTANTIATE_OPS(double)

#undef PQRNN_INSTANTIATE_OPS

}  // namespace pqrnn
