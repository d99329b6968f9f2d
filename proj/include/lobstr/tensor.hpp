// Copyright 2026 The lobstr Authors
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

#ifndef LOBSTR_TENSOR_HPP_
#define LOBSTR_TENSOR_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace lobstr {

class Rng;

/// Dense row-major tensor of 64-bit floats with an optional gradient slot.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;
  std::vector<double> g;  // empty until ensure_grad()

  Tensor() = default;
  explicit Tensor(std::vector<int> s);

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor uniform(std::vector<int> s, double lo, double hi, Rng& rng);

  int64_t size() const;
  int rows() const;  // 1 for vectors
  int cols() const;  // trailing dimension

  void ensure_grad();
  void zero_grad();
  bool finite() const;
};

/// Reverse-mode tape over 2-D values. Leaves reference external Tensor
/// storage and accumulate into its gradient slot; interior nodes are owned by
/// the tape. One forward per tape; backward() consumes it.
class Tape {
 public:
  struct T {
    int id = -1;
    int rows = 0;
    int cols = 0;
  };

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Parameter leaf: values read from t.v, gradients accumulated into t.g
  /// (ensure_grad is called here).
  T leaf(Tensor& t);

  /// Constant input (no gradient): data copied, row-major.
  T value(int rows, int cols, const double* data);

  T matmul(T a, T b);
  T add(T a, T b);
  T sub(T a, T b);
  T mul(T a, T b);                  // elementwise
  T add_bias(T a, T bias);          // bias (1 x n) broadcast over rows
  T affine(T a, double k, double c);  // k*a + c elementwise
  T sigmoid(T a);
  T tanh_(T a);
  T relu(T a);

  /// Fused GRU step for a whole batch:
  ///   z = sig(x Wz + h Uz + bz), r = sig(x Wr + h Ur + br),
  ///   c = tanh(x Wh + (r.h) Uh + bh), h' = (1-z).h + z.c
  T gru_step(T x, T h, T wz, T uz, T bz, T wr, T ur, T br, T wh, T uh, T bh);

  T sum(T a);                                   // scalar
  T mean_abs_diff(T a, const double* target);   // scalar, mean over elements

  /// Mean over rows of the 2-class cross entropy of one foot's logit pair
  /// (columns 2*foot, 2*foot+1). labels[b] is the true class (1 = contact).
  T softmax_ce_foot(T logits, const std::vector<uint8_t>& labels, int foot);

  /// Scalar combination sum_i coef_i * term_i.
  T add_scaled(const std::vector<std::pair<T, double>>& terms);

  /// Per-row custom loss: fn(row_values, grad_out, row_index) returns the
  /// row's loss and writes d(row loss)/d(row) into grad_out. Result is
  /// scale * sum of row losses.
  using RowLoss =
      std::function<double(const double* x, double* gx, int row)>;
  T per_row_loss(T input, const RowLoss& fn, double scale);

  const std::vector<double>& values(T t) const;
  double scalar(T t) const;

  /// Reverse pass from a scalar node; populates leaf gradients and clears
  /// the tape. Throws Error when t is not a scalar recorded on this tape or
  /// when the tape was already consumed.
  void backward(T t);

  bool consumed() const { return consumed_; }

 private:
  struct Node;
  int add_node(int rows, int cols, Tensor* external);
  double* val(int id);
  const double* val(int id) const;
  double* grad(int id);
  void check(T t) const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

/// Forces single-threaded deterministic BLAS; called lazily by the tape but
/// callable earlier (e.g. before timing).
void ensure_blas_single_thread();

}  // namespace lobstr

#endif  // LOBSTR_TENSOR_HPP_
