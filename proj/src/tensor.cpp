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

#include "lobstr/tensor.hpp"

#include <cblas.h>

#include <cmath>
#include <cstring>
#include <utility>

#include "lobstr/error.hpp"
#include "lobstr/rng.hpp"

extern "C" void openblas_set_num_threads(int);

namespace lobstr {

void ensure_blas_single_thread() {
  static const bool done = [] {
    openblas_set_num_threads(1);
    return true;
  }();
  (void)done;
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw DataError("tensor dimensions must be positive");
    n *= d;
  }
  v.assign(static_cast<size_t>(n), 0.0);
}

Tensor Tensor::uniform(std::vector<int> s, double lo, double hi, Rng& rng) {
  Tensor t(std::move(s));
  for (double& x : t.v) x = rng.uniform(lo, hi);
  return t;
}

int64_t Tensor::size() const {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

int Tensor::rows() const {
  if (shape.size() == 1) return 1;
  if (shape.size() == 2) return shape[0];
  throw DataError("tensor is not 1-D or 2-D");
}

int Tensor::cols() const {
  if (shape.size() == 1) return shape[0];
  if (shape.size() == 2) return shape[1];
  throw DataError("tensor is not 1-D or 2-D");
}

void Tensor::ensure_grad() {
  if (g.size() != v.size()) g.assign(v.size(), 0.0);
}

void Tensor::zero_grad() { g.assign(v.size(), 0.0); }

bool Tensor::finite() const {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

namespace {

// Fixed-order reference product: every output element accumulates its k terms
// strictly in sequence, so a row's result does not depend on how many other
// rows the product has. This keeps per-sample contributions bit-stable across
// batch sizes (duplicate a sample and its gradient doubles exactly).
void small_dgemm(bool trans_a, bool trans_b, int m, int n, int k,
                 const double* a, int lda, const double* b, int ldb,
                 double beta, double* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) {
        const double av = trans_a ? a[static_cast<size_t>(p) * lda + i]
                                  : a[static_cast<size_t>(i) * lda + p];
        const double bv = trans_b ? b[static_cast<size_t>(j) * ldb + p]
                                  : b[static_cast<size_t>(p) * ldb + j];
        acc += av * bv;
      }
      double* out = c + static_cast<size_t>(i) * ldc + j;
      *out = beta == 0.0 ? acc : *out * beta + acc;
    }
  }
}

// C (m x n) = beta*C + A (m x k) * B (k x n), row-major, optional transposes
// interpreted on the stored shapes. Small products run on the fixed-order
// loop above; large (training-sized) products dispatch to BLAS.
void dgemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a,
           int lda, const double* b, int ldb, double beta, double* c, int ldc) {
  const int64_t work = static_cast<int64_t>(m) * n * k;
  if (work <= (1 << 18)) {
    small_dgemm(trans_a, trans_b, m, n, k, a, lda, b, ldb, beta, c, ldc);
    return;
  }
  ensure_blas_single_thread();
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, 1.0, a, lda, b, ldb,
              beta, c, ldc);
}

double stable_sigmoid(double x) {
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

struct Tape::Node {
  int rows = 0;
  int cols = 0;
  Tensor* external = nullptr;     // leaf storage, else owned
  std::vector<double> value;      // owned value (interior / constant)
  std::vector<double> grad_buf;   // owned gradient (interior)
  std::function<void()> back;     // empty for leaves and constants
  size_t len() const { return static_cast<size_t>(rows) * cols; }
};

Tape::Tape() { ensure_blas_single_thread(); }
Tape::~Tape() = default;

int Tape::add_node(int rows, int cols, Tensor* external) {
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.external = external;
  if (external == nullptr) n.value.assign(static_cast<size_t>(rows) * cols, 0.0);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

double* Tape::val(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  return n.external ? n.external->v.data() : n.value.data();
}

const double* Tape::val(int id) const {
  const Node& n = nodes_[static_cast<size_t>(id)];
  return n.external ? n.external->v.data() : n.value.data();
}

double* Tape::grad(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.external != nullptr) return n.external->g.data();
  return n.grad_buf.data();
}

void Tape::check(T t) const {
  if (t.id < 0 || t.id >= static_cast<int>(nodes_.size()))
    throw Error("tape node is not part of this tape");
  const Node& n = nodes_[static_cast<size_t>(t.id)];
  if (n.rows != t.rows || n.cols != t.cols)
    throw Error("tape node shape mismatch");
}

Tape::T Tape::leaf(Tensor& t) {
  if (consumed_) throw Error("tape already consumed by backward");
  t.ensure_grad();
  const int id = add_node(t.rows(), t.cols(), &t);
  return {id, t.rows(), t.cols()};
}

Tape::T Tape::value(int rows, int cols, const double* data) {
  if (consumed_) throw Error("tape already consumed by backward");
  if (rows <= 0 || cols <= 0) throw DataError("tape value needs positive dims");
  const int id = add_node(rows, cols, nullptr);
  std::memcpy(val(id), data, static_cast<size_t>(rows) * cols * sizeof(double));
  return {id, rows, cols};
}

Tape::T Tape::matmul(T a, T b) {
  check(a);
  check(b);
  if (a.cols != b.rows)
    throw DataError("matmul shape mismatch: (" + std::to_string(a.rows) + "x" +
                    std::to_string(a.cols) + ") * (" + std::to_string(b.rows) +
                    "x" + std::to_string(b.cols) + ")");
  const int id = add_node(a.rows, b.cols, nullptr);
  const int m = a.rows, n = b.cols, k = a.cols;
  dgemm(false, false, m, n, k, val(a.id), k, val(b.id), n, 0.0, val(id), n);
  nodes_[static_cast<size_t>(id)].back = [this, id, a, b, m, n, k] {
    const double* gc = grad(id);
    // dA += gC * B^T ; dB += A^T * gC
    dgemm(false, true, m, k, n, gc, n, val(b.id), n, 1.0, grad(a.id), k);
    dgemm(true, false, k, n, m, val(a.id), k, gc, n, 1.0, grad(b.id), n);
  };
  return {id, a.rows, b.cols};
}

Tape::T Tape::add(T a, T b) {
  check(a);
  check(b);
  if (a.rows != b.rows || a.cols != b.cols)
    throw DataError("elementwise add shape mismatch");
  const int id = add_node(a.rows, a.cols, nullptr);
  const double* pa = val(a.id);
  const double* pb = val(b.id);
  double* pc = val(id);
  const size_t len = nodes_[static_cast<size_t>(id)].len();
  for (size_t i = 0; i < len; ++i) pc[i] = pa[i] + pb[i];
  nodes_[static_cast<size_t>(id)].back = [this, id, a, b, len] {
    const double* gc = grad(id);
    double* ga = grad(a.id);
    double* gb = grad(b.id);
    for (size_t i = 0; i < len; ++i) {
      ga[i] += gc[i];
      gb[i] += gc[i];
    }
  };
  return {id, a.rows, a.cols};
}

Tape::T Tape::sub(T a, T b) {
  check(a);
  check(b);
  if (a.rows != b.rows || a.cols != b.cols)
    throw DataError("elementwise sub shape mismatch");
  const int id = add_node(a.rows, a.cols, nullptr);
  const double* pa = val(a.id);
  const double* pb = val(b.id);
  double* pc = val(id);
  const size_t len = nodes_[static_cast<size_t>(id)].len();
  for (size_t i = 0; i < len; ++i) pc[i] = pa[i] - pb[i];
  nodes_[static_cast<size_t>(id)].back = [this, id, a, b, len] {
    const double* gc = grad(id);
    double* ga = grad(a.id);
    double* gb = grad(b.id);
    for (size_t i = 0; i < len; ++i) {
      ga[i] += gc[i];
      gb[i] -= gc[i];
    }
  };
  return {id, a.rows, a.cols};
}

Tape::T Tape::mul(T a, T b) {
  check(a);
  check(b);
  if (a.rows != b.rows || a.cols != b.cols)
    throw DataError("elementwise mul shape mismatch");
  const int id = add_node(a.rows, a.cols, nullptr);
  const double* pa = val(a.id);
  const double* pb = val(b.id);
  double* pc = val(id);
  const size_t len = nodes_[static_cast<size_t>(id)].len();
  for (size_t i = 0; i < len; ++i) pc[i] = pa[i] * pb[i];
  nodes_[static_cast<size_t>(id)].back = [this, id, a, b, len] {
    const double* gc = grad(id);
    const double* pa2 = val(a.id);
    const double* pb2 = val(b.id);
    double* ga = grad(a.id);
    double* gb = grad(b.id);
    for (size_t i = 0; i < len; ++i) {
      ga[i] += gc[i] * pb2[i];
      gb[i] += gc[i] * pa2[i];
    }
  };
  return {id, a.rows, a.cols};
}

Tape::T Tape::add_bias(T a, T bias) {
  check(a);
  check(bias);
  if (bias.rows != 1 || bias.cols != a.cols)
    throw DataError("bias must be a row vector matching columns");
  const int id = add_node(a.rows, a.cols, nullptr);
  const double* pa = val(a.id);
  const double* pb = val(bias.id);
  double* pc = val(id);
  for (int r = 0; r < a.rows; ++r)
    for (int c = 0; c < a.cols; ++c)
      pc[r * a.cols + c] = pa[r * a.cols + c] + pb[c];
  nodes_[static_cast<size_t>(id)].back = [this, id, a, bias] {
    const double* gc = grad(id);
    double* ga = grad(a.id);
    double* gb = grad(bias.id);
    const size_t len = static_cast<size_t>(a.rows) * a.cols;
    for (size_t i = 0; i < len; ++i) ga[i] += gc[i];
    for (int r = 0; r < a.rows; ++r)
      for (int c = 0; c < a.cols; ++c) gb[c] += gc[r * a.cols + c];
  };
  return {id, a.rows, a.cols};
}

Tape::T Tape::affine(T a, double k, double c) {
  check(a);
  const int id = add_node(a.rows, a.cols, nullptr);
  const double* pa = val(a.id);
  double* pc = val(id);
  const size_t len = nodes_[static_cast<size_t>(id)].len();
  for (size_t i = 0; i < len; ++i) pc[i] = k * pa[i] + c;
  nodes_[static_cast<size_t>(id)].back = [this, id, a, k, len] {
    const double* gc = grad(id);
    double* ga = grad(a.id);
    for (size_t i = 0; i < len; ++i) ga[i] += k * gc[i];
  };
  return {id, a.rows, a.cols};
}

Tape::T Tape::sigmoid(T a) {
  check(a);
  const int id = add_node(a.rows, a.cols, nullptr);
  const double* pa = val(a.id);
  double* pc = val(id);
  const size_t len = nodes_[static_cast<size_t>(id)].len();
  for (size_t i = 0; i < len; ++i) pc[i] = stable_sigmoid(pa[i]);
  nodes_[static_cast<size_t>(id)].back = [this, id, a, len] {
    const double* gc = grad(id);
    const double* pc2 = val(id);
    double* ga = grad(a.id);
    for (size_t i = 0; i < len; ++i)
      ga[i] += gc[i] * pc2[i] * (1.0 - pc2[i]);
  };
  return {id, a.rows, a.cols};
}

Tape::T Tape::tanh_(T a) {
  check(a);
  const int id = add_node(a.rows, a.cols, nullptr);
  const double* pa = val(a.id);
  double* pc = val(id);
  const size_t len = nodes_[static_cast<size_t>(id)].len();
  for (size_t i = 0; i < len; ++i) pc[i] = std::tanh(pa[i]);
  nodes_[static_cast<size_t>(id)].back = [this, id, a, len] {
    const double* gc = grad(id);
    const double* pc2 = val(id);
    double* ga = grad(a.id);
    for (size_t i = 0; i < len; ++i)
      ga[i] += gc[i] * (1.0 - pc2[i] * pc2[i]);
  };
  return {id, a.rows, a.cols};
}

Tape::T Tape::relu(T a) {
  check(a);
  const int id = add_node(a.rows, a.cols, nullptr);
  const double* pa = val(a.id);
  double* pc = val(id);
  const size_t len = nodes_[static_cast<size_t>(id)].len();
  for (size_t i = 0; i < len; ++i) pc[i] = pa[i] > 0.0 ? pa[i] : 0.0;
  nodes_[static_cast<size_t>(id)].back = [this, id, a, len] {
    const double* gc = grad(id);
    const double* pa2 = val(a.id);
    double* ga = grad(a.id);
    for (size_t i = 0; i < len; ++i)
      if (pa2[i] > 0.0) ga[i] += gc[i];
  };
  return {id, a.rows, a.cols};
}

Tape::T Tape::gru_step(T x, T h, T wz, T uz, T bz, T wr, T ur, T br, T wh,
                       T uh, T bh) {
  check(x);
  check(h);
  const int batch = x.rows;
  const int in = x.cols;
  const int hid = h.cols;
  if (h.rows != batch) throw DataError("gru_step batch mismatch");
  auto expect = [&](T t, int r, int c, const char* name) {
    check(t);
    if (t.rows != r || t.cols != c)
      throw DataError(std::string("gru_step weight shape mismatch for ") +
                      name);
  };
  expect(wz, in, hid, "w_z");
  expect(uz, hid, hid, "u_z");
  expect(bz, 1, hid, "b_z");
  expect(wr, in, hid, "w_r");
  expect(ur, hid, hid, "u_r");
  expect(br, 1, hid, "b_r");
  expect(wh, in, hid, "w_h");
  expect(uh, hid, hid, "u_h");
  expect(bh, 1, hid, "b_h");

  const size_t len = static_cast<size_t>(batch) * hid;
  std::vector<double> z(len), r(len), c(len), rh(len);

  // a_z = x Wz + h Uz + bz (z reused as accumulator), likewise r.
  auto gate_pre = [&](std::vector<double>& out, T w, T u, T b) {
    for (int row = 0; row < batch; ++row)
      std::memcpy(out.data() + static_cast<size_t>(row) * hid, val(b.id),
                  static_cast<size_t>(hid) * sizeof(double));
    dgemm(false, false, batch, hid, in, val(x.id), in, val(w.id), hid, 1.0,
          out.data(), hid);
    dgemm(false, false, batch, hid, hid, val(h.id), hid, val(u.id), hid, 1.0,
          out.data(), hid);
  };
  gate_pre(z, wz, uz, bz);
  gate_pre(r, wr, ur, br);
  for (size_t i = 0; i < len; ++i) z[i] = stable_sigmoid(z[i]);
  for (size_t i = 0; i < len; ++i) r[i] = stable_sigmoid(r[i]);

  const double* ph = val(h.id);
  for (size_t i = 0; i < len; ++i) rh[i] = r[i] * ph[i];
  for (int row = 0; row < batch; ++row)
    std::memcpy(c.data() + static_cast<size_t>(row) * hid, val(bh.id),
                static_cast<size_t>(hid) * sizeof(double));
  dgemm(false, false, batch, hid, in, val(x.id), in, val(wh.id), hid, 1.0,
        c.data(), hid);
  dgemm(false, false, batch, hid, hid, rh.data(), hid, val(uh.id), hid, 1.0,
        c.data(), hid);
  for (size_t i = 0; i < len; ++i) c[i] = std::tanh(c[i]);

  const int id = add_node(batch, hid, nullptr);
  double* out = val(id);
  for (size_t i = 0; i < len; ++i)
    out[i] = (1.0 - z[i]) * ph[i] + z[i] * c[i];

  nodes_[static_cast<size_t>(id)].back = [this, id, x, h, wz, uz, bz, wr, ur,
                                          br, wh, uh, bh, batch, in, hid, len,
                                          z = std::move(z), r = std::move(r),
                                          c = std::move(c),
                                          rh = std::move(rh)] {
    const double* gout = grad(id);
    const double* hv = val(h.id);
    std::vector<double> da_z(len), da_r(len), da_c(len), drh(len);
    std::vector<double> colsum(static_cast<size_t>(hid));
    // Batch column sums go through a temporary so the shared bias leaf gets
    // exactly one addition per step; summing rows directly into the
    // accumulator would round once per row and break exact batch linearity.
    auto add_colsum = [&](const std::vector<double>& a, int bias_id) {
      std::fill(colsum.begin(), colsum.end(), 0.0);
      for (int row = 0; row < batch; ++row)
        for (int k = 0; k < hid; ++k)
          colsum[static_cast<size_t>(k)] +=
              a[static_cast<size_t>(row) * hid + k];
      double* gb = grad(bias_id);
      for (int k = 0; k < hid; ++k) gb[k] += colsum[static_cast<size_t>(k)];
    };

    // dz = g.(c-h); dc = g.z; dh += g.(1-z); da_c = dc.(1-c^2)
    for (size_t i = 0; i < len; ++i) {
      const double dz = gout[i] * (c[i] - hv[i]);
      da_z[i] = dz * z[i] * (1.0 - z[i]);
      da_c[i] = gout[i] * z[i] * (1.0 - c[i] * c[i]);
    }
    double* gh = grad(h.id);
    for (size_t i = 0; i < len; ++i) gh[i] += gout[i] * (1.0 - z[i]);

    // candidate branch
    dgemm(true, false, in, hid, batch, val(x.id), in, da_c.data(), hid, 1.0,
          grad(wh.id), hid);
    dgemm(true, false, hid, hid, batch, rh.data(), hid, da_c.data(), hid, 1.0,
          grad(uh.id), hid);
    add_colsum(da_c, bh.id);
    // d(r.h) = da_c Uh^T
    dgemm(false, true, batch, hid, hid, da_c.data(), hid, val(uh.id), hid, 0.0,
          drh.data(), hid);
    for (size_t i = 0; i < len; ++i) {
      const double dr = drh[i] * hv[i];
      da_r[i] = dr * r[i] * (1.0 - r[i]);
      gh[i] += drh[i] * r[i];
    }

    // reset gate
    dgemm(true, false, in, hid, batch, val(x.id), in, da_r.data(), hid, 1.0,
          grad(wr.id), hid);
    dgemm(true, false, hid, hid, batch, hv, hid, da_r.data(), hid, 1.0,
          grad(ur.id), hid);
    add_colsum(da_r, br.id);
    dgemm(false, true, batch, hid, hid, da_r.data(), hid, val(ur.id), hid, 1.0,
          gh, hid);

    // update gate
    dgemm(true, false, in, hid, batch, val(x.id), in, da_z.data(), hid, 1.0,
          grad(wz.id), hid);
    dgemm(true, false, hid, hid, batch, hv, hid, da_z.data(), hid, 1.0,
          grad(uz.id), hid);
    add_colsum(da_z, bz.id);
    dgemm(false, true, batch, hid, hid, da_z.data(), hid, val(uz.id), hid, 1.0,
          gh, hid);

    // input
    double* gx = grad(x.id);
    dgemm(false, true, batch, in, hid, da_z.data(), hid, val(wz.id), hid, 1.0,
          gx, in);
    dgemm(false, true, batch, in, hid, da_r.data(), hid, val(wr.id), hid, 1.0,
          gx, in);
    dgemm(false, true, batch, in, hid, da_c.data(), hid, val(wh.id), hid, 1.0,
          gx, in);
  };
  return {id, batch, hid};
}

Tape::T Tape::sum(T a) {
  check(a);
  const int id = add_node(1, 1, nullptr);
  const double* pa = val(a.id);
  const size_t len = static_cast<size_t>(a.rows) * a.cols;
  double s = 0.0;
  for (size_t i = 0; i < len; ++i) s += pa[i];
  val(id)[0] = s;
  nodes_[static_cast<size_t>(id)].back = [this, id, a, len] {
    const double g0 = grad(id)[0];
    double* ga = grad(a.id);
    for (size_t i = 0; i < len; ++i) ga[i] += g0;
  };
  return {id, 1, 1};
}

Tape::T Tape::mean_abs_diff(T a, const double* target) {
  check(a);
  const int id = add_node(1, 1, nullptr);
  const double* pa = val(a.id);
  const size_t len = static_cast<size_t>(a.rows) * a.cols;
  std::vector<double> sign(len, 0.0);
  double s = 0.0;
  for (size_t i = 0; i < len; ++i) {
    const double d = pa[i] - target[i];
    s += std::fabs(d);
    sign[i] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
  }
  const double inv = 1.0 / static_cast<double>(len);
  val(id)[0] = s * inv;
  nodes_[static_cast<size_t>(id)].back = [this, id, a, inv, len,
                                          sign = std::move(sign)] {
    const double g0 = grad(id)[0] * inv;
    double* ga = grad(a.id);
    for (size_t i = 0; i < len; ++i) ga[i] += g0 * sign[i];
  };
  return {id, 1, 1};
}

Tape::T Tape::softmax_ce_foot(T logits, const std::vector<uint8_t>& labels,
                              int foot) {
  check(logits);
  if (logits.cols < 2 * (foot + 1))
    throw DataError("softmax_ce_foot: logits too narrow");
  if (static_cast<int>(labels.size()) != logits.rows)
    throw DataError("softmax_ce_foot: label count mismatch");
  const int batch = logits.rows;
  const int stride = logits.cols;
  const int base = 2 * foot;
  const double* pl = val(logits.id);
  std::vector<double> p1(static_cast<size_t>(batch));  // P(class 1)
  double loss = 0.0;
  for (int b = 0; b < batch; ++b) {
    const double l0 = pl[static_cast<size_t>(b) * stride + base];
    const double l1 = pl[static_cast<size_t>(b) * stride + base + 1];
    const double m = l0 > l1 ? l0 : l1;
    const double e0 = std::exp(l0 - m);
    const double e1 = std::exp(l1 - m);
    const double denom = e0 + e1;
    const double prob1 = e1 / denom;
    p1[static_cast<size_t>(b)] = prob1;
    const uint8_t y = labels[static_cast<size_t>(b)];
    if (y > 1) throw DataError("contact label must be 0 or 1");
    const double py = y == 1 ? prob1 : e0 / denom;
    loss -= std::log(py > 1e-300 ? py : 1e-300);
  }
  const int id = add_node(1, 1, nullptr);
  const double inv = 1.0 / static_cast<double>(batch);
  val(id)[0] = loss * inv;
  nodes_[static_cast<size_t>(id)].back = [this, id, logits, labels, batch,
                                          stride, base, inv,
                                          p1 = std::move(p1)] {
    const double g0 = grad(id)[0] * inv;
    double* gl = grad(logits.id);
    for (int b = 0; b < batch; ++b) {
      const double prob1 = p1[static_cast<size_t>(b)];
      const double y = labels[static_cast<size_t>(b)] == 1 ? 1.0 : 0.0;
      // d loss / d l1 = p1 - y ; d loss / d l0 = (1-p1) - (1-y)
      gl[static_cast<size_t>(b) * stride + base] += g0 * ((1.0 - prob1) - (1.0 - y));
      gl[static_cast<size_t>(b) * stride + base + 1] += g0 * (prob1 - y);
    }
  };
  return {id, 1, 1};
}

Tape::T Tape::add_scaled(const std::vector<std::pair<T, double>>& terms) {
  if (terms.empty()) throw DataError("add_scaled needs at least one term");
  double s = 0.0;
  for (const auto& [t, coef] : terms) {
    check(t);
    if (t.rows != 1 || t.cols != 1)
      throw DataError("add_scaled terms must be scalars");
    s += coef * val(t.id)[0];
  }
  const int id = add_node(1, 1, nullptr);
  val(id)[0] = s;
  nodes_[static_cast<size_t>(id)].back = [this, id, terms] {
    const double g0 = grad(id)[0];
    for (const auto& [t, coef] : terms) grad(t.id)[0] += g0 * coef;
  };
  return {id, 1, 1};
}

Tape::T Tape::per_row_loss(T input, const RowLoss& fn, double scale) {
  check(input);
  const int batch = input.rows;
  const int width = input.cols;
  const double* pin = val(input.id);
  std::vector<double> gx(static_cast<size_t>(batch) * width, 0.0);
  double total = 0.0;
  for (int b = 0; b < batch; ++b)
    total += fn(pin + static_cast<size_t>(b) * width,
                gx.data() + static_cast<size_t>(b) * width, b);
  const int id = add_node(1, 1, nullptr);
  val(id)[0] = total * scale;
  nodes_[static_cast<size_t>(id)].back = [this, id, input, scale, batch, width,
                                          gx = std::move(gx)] {
    const double g0 = grad(id)[0] * scale;
    double* gi = grad(input.id);
    const size_t len = static_cast<size_t>(batch) * width;
    for (size_t i = 0; i < len; ++i) gi[i] += g0 * gx[i];
  };
  return {id, 1, 1};
}

const std::vector<double>& Tape::values(T t) const {
  check(t);
  const Node& n = nodes_[static_cast<size_t>(t.id)];
  if (n.external != nullptr) return n.external->v;
  return n.value;
}

double Tape::scalar(T t) const {
  check(t);
  if (t.rows != 1 || t.cols != 1) throw Error("node is not a scalar");
  return val(t.id)[0];
}

void Tape::backward(T t) {
  if (consumed_) throw Error("backward already ran on this tape");
  check(t);
  if (t.rows != 1 || t.cols != 1)
    throw Error("backward requires a scalar loss node");
  if (nodes_.empty()) throw Error("backward called on an empty tape");
  // Allocate interior gradients.
  for (Node& n : nodes_) {
    if (n.external == nullptr) n.grad_buf.assign(n.len(), 0.0);
  }
  grad(t.id)[0] = 1.0;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.back) n.back();
  }
  consumed_ = true;
  nodes_.clear();
}

}  // namespace lobstr
