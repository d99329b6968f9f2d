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

#include "lobstr/network.hpp"

#include <cblas.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "lobstr/error.hpp"
#include "lobstr/rng.hpp"

namespace lobstr {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// y = W^T x + y for row-major W [in x out], single sample.
void matvec_t(const double* w, const double* x, int in, int out, double* y) {
  ensure_blas_single_thread();
  cblas_dgemv(CblasRowMajor, CblasTrans, in, out, 1.0, w, out, x, 1, 1.0, y, 1);
}

struct GruScratch {
  std::vector<double> z, r, c, rh;
  explicit GruScratch(int hidden) : z(hidden), r(hidden), c(hidden), rh(hidden) {}
};

void gru_cell_impl(const double* x, const double* h_prev,
                   const NetworkParams& p, GruScratch& s, double* h_out) {
  const int in = p.dims.input;
  const int hid = p.dims.hidden;
  std::memcpy(s.z.data(), p.b_z.v.data(), sizeof(double) * hid);
  matvec_t(p.w_z.v.data(), x, in, hid, s.z.data());
  matvec_t(p.u_z.v.data(), h_prev, hid, hid, s.z.data());
  std::memcpy(s.r.data(), p.b_r.v.data(), sizeof(double) * hid);
  matvec_t(p.w_r.v.data(), x, in, hid, s.r.data());
  matvec_t(p.u_r.v.data(), h_prev, hid, hid, s.r.data());
  for (int k = 0; k < hid; ++k) s.z[k] = stable_sigmoid(s.z[k]);
  for (int k = 0; k < hid; ++k) s.r[k] = stable_sigmoid(s.r[k]);
  for (int k = 0; k < hid; ++k) s.rh[k] = s.r[k] * h_prev[k];
  std::memcpy(s.c.data(), p.b_h.v.data(), sizeof(double) * hid);
  matvec_t(p.w_h.v.data(), x, in, hid, s.c.data());
  matvec_t(p.u_h.v.data(), s.rh.data(), hid, hid, s.c.data());
  for (int k = 0; k < hid; ++k) s.c[k] = std::tanh(s.c[k]);
  for (int k = 0; k < hid; ++k)
    h_out[k] = (1.0 - s.z[k]) * h_prev[k] + s.z[k] * s.c[k];
}

}  // namespace

NetworkParams::NetworkParams(NetDims d)
    : dims(d),
      w_z({d.input, d.hidden}),
      u_z({d.hidden, d.hidden}),
      b_z({d.hidden}),
      w_r({d.input, d.hidden}),
      u_r({d.hidden, d.hidden}),
      b_r({d.hidden}),
      w_h({d.input, d.hidden}),
      u_h({d.hidden, d.hidden}),
      b_h({d.hidden}),
      latent_w({d.hidden, d.latent}),
      latent_b({d.latent}),
      pose_w({d.latent, NetDims::kPose}),
      pose_b({NetDims::kPose}),
      contact_w({d.latent, NetDims::kContact}),
      contact_b({NetDims::kContact}) {
  if (d.input <= 0 || d.hidden <= 0 || d.latent <= 0)
    throw DataError("network dimensions must be positive");
}

NetworkParams NetworkParams::init(NetDims d, uint64_t seed) {
  NetworkParams p(d);
  Rng rng(seed);
  auto fill = [&rng](Tensor& t, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& x : t.v) x = rng.uniform(-bound, bound);
  };
  fill(p.w_z, d.input);
  fill(p.u_z, d.hidden);
  fill(p.b_z, d.hidden);
  fill(p.w_r, d.input);
  fill(p.u_r, d.hidden);
  fill(p.b_r, d.hidden);
  fill(p.w_h, d.input);
  fill(p.u_h, d.hidden);
  fill(p.b_h, d.hidden);
  fill(p.latent_w, d.hidden);
  fill(p.latent_b, d.hidden);
  fill(p.pose_w, d.latent);
  fill(p.pose_b, d.latent);
  fill(p.contact_w, d.latent);
  fill(p.contact_b, d.latent);
  return p;
}

std::vector<std::pair<std::string, Tensor*>> NetworkParams::named() {
  return {{"gru.w_z", &w_z},       {"gru.u_z", &u_z},
          {"gru.b_z", &b_z},       {"gru.w_r", &w_r},
          {"gru.u_r", &u_r},       {"gru.b_r", &b_r},
          {"gru.w_h", &w_h},       {"gru.u_h", &u_h},
          {"gru.b_h", &b_h},       {"latent.w", &latent_w},
          {"latent.b", &latent_b}, {"pose.w", &pose_w},
          {"pose.b", &pose_b},     {"contact.w", &contact_w},
          {"contact.b", &contact_b}};
}

std::vector<std::pair<std::string, const Tensor*>> NetworkParams::named()
    const {
  auto mut = const_cast<NetworkParams*>(this)->named();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mut.size());
  for (auto& [name, t] : mut) out.emplace_back(name, t);
  return out;
}

void NetworkParams::ensure_grads() {
  for (auto& [name, t] : named()) t->ensure_grad();
}

void NetworkParams::zero_grads() {
  for (auto& [name, t] : named()) t->zero_grad();
}

bool NetworkParams::finite() const {
  for (const auto& [name, t] : named())
    if (!t->finite()) return false;
  return true;
}

void NetworkParams::validate() const {
  for (const auto& [name, t] : named())
    if (!t->finite())
      throw NumericError("non-finite value in parameter tensor " + name);
}

int64_t NetworkParams::parameter_count() const {
  int64_t n = 0;
  for (const auto& [name, t] : named()) n += t->size();
  return n;
}

std::vector<double> gru_cell(const std::vector<double>& x,
                             const std::vector<double>& h_prev,
                             const NetworkParams& params) {
  if (static_cast<int>(x.size()) != params.dims.input)
    throw DataError("gru_cell: input length " + std::to_string(x.size()) +
                    " does not match network input dim " +
                    std::to_string(params.dims.input));
  if (static_cast<int>(h_prev.size()) != params.dims.hidden)
    throw DataError("gru_cell: hidden length " + std::to_string(h_prev.size()) +
                    " does not match network hidden dim " +
                    std::to_string(params.dims.hidden));
  GruScratch scratch(params.dims.hidden);
  std::vector<double> h(params.dims.hidden);
  gru_cell_impl(x.data(), h_prev.data(), params, scratch, h.data());
  return h;
}

std::vector<double> encode_steps(const double* xs, int steps,
                                 const NetworkParams& params) {
  if (steps <= 0) throw DataError("encode_steps: need at least one step");
  const int in = params.dims.input;
  const int hid = params.dims.hidden;
  const int lat = params.dims.latent;
  GruScratch scratch(hid);
  std::vector<double> h(hid, 0.0), h_next(hid);
  for (int t = 0; t < steps; ++t) {
    gru_cell_impl(xs + static_cast<size_t>(t) * in, h.data(), params, scratch,
                  h_next.data());
    h.swap(h_next);
  }
  std::vector<double> latent(lat);
  std::memcpy(latent.data(), params.latent_b.v.data(), sizeof(double) * lat);
  matvec_t(params.latent_w.v.data(), h.data(), hid, lat, latent.data());
  for (double& v : latent) v = v > 0.0 ? v : 0.0;
  return latent;
}

std::vector<double> encode(const FeatureWindow& window,
                           const NetworkParams& params) {
  if (params.dims.input != FeatureVector::kSize)
    throw DataError("encode: network input dim must be 37 for FeatureWindow");
  std::vector<double> xs(static_cast<size_t>(FeatureWindow::kFrames) *
                         FeatureVector::kSize);
  for (int t = 0; t < FeatureWindow::kFrames; ++t)
    std::memcpy(xs.data() + static_cast<size_t>(t) * FeatureVector::kSize,
                window.frames[static_cast<size_t>(t)].x.data(),
                sizeof(double) * FeatureVector::kSize);
  return encode_steps(xs.data(), FeatureWindow::kFrames, params);
}

NetworkOutput forward(const FeatureWindow& window,
                      const NetworkParams& params) {
  params.validate();
  const std::vector<double> latent = encode(window, params);
  const int lat = params.dims.latent;
  NetworkOutput out;
  std::memcpy(out.pose.data(), params.pose_b.v.data(),
              sizeof(double) * NetDims::kPose);
  matvec_t(params.pose_w.v.data(), latent.data(), lat, NetDims::kPose,
           out.pose.data());
  std::memcpy(out.logits.data(), params.contact_b.v.data(),
              sizeof(double) * NetDims::kContact);
  matvec_t(params.contact_w.v.data(), latent.data(), lat, NetDims::kContact,
           out.logits.data());
  for (double v : out.pose)
    if (!std::isfinite(v)) throw NumericError("non-finite pose output");
  for (double v : out.logits)
    if (!std::isfinite(v)) throw NumericError("non-finite contact logits");
  return out;
}

std::array<double, 4> contact_probabilities(
    const std::array<double, 4>& logits) {
  std::array<double, 4> p{};
  for (int foot = 0; foot < 2; ++foot) {
    const double l0 = logits[static_cast<size_t>(2 * foot)];
    const double l1 = logits[static_cast<size_t>(2 * foot + 1)];
    const double m = l0 > l1 ? l0 : l1;
    const double e0 = std::exp(l0 - m);
    const double e1 = std::exp(l1 - m);
    const double denom = e0 + e1;
    p[static_cast<size_t>(2 * foot)] = e0 / denom;
    p[static_cast<size_t>(2 * foot + 1)] = e1 / denom;
  }
  return p;
}

BatchGraph forward_batch(Tape& tape, const double* xs_time_major, int batch,
                         NetworkParams& params) {
  if (batch <= 0) throw DataError("forward_batch: batch must be positive");
  const int in = params.dims.input;
  const int hid = params.dims.hidden;
  const Tape::T wz = tape.leaf(params.w_z), uz = tape.leaf(params.u_z),
                bz = tape.leaf(params.b_z), wr = tape.leaf(params.w_r),
                ur = tape.leaf(params.u_r), br = tape.leaf(params.b_r),
                wh = tape.leaf(params.w_h), uh = tape.leaf(params.u_h),
                bh = tape.leaf(params.b_h);
  const Tape::T lw = tape.leaf(params.latent_w), lb = tape.leaf(params.latent_b);
  const Tape::T pw = tape.leaf(params.pose_w), pb = tape.leaf(params.pose_b);
  const Tape::T cw = tape.leaf(params.contact_w),
                cb = tape.leaf(params.contact_b);

  const std::vector<double> zeros(static_cast<size_t>(batch) * hid, 0.0);
  Tape::T h = tape.value(batch, hid, zeros.data());
  for (int t = 0; t < FeatureWindow::kFrames; ++t) {
    const Tape::T x = tape.value(
        batch, in,
        xs_time_major + static_cast<size_t>(t) * batch * in);
    h = tape.gru_step(x, h, wz, uz, bz, wr, ur, br, wh, uh, bh);
  }
  const Tape::T latent = tape.relu(tape.add_bias(tape.matmul(h, lw), lb));
  BatchGraph g;
  g.pose = tape.add_bias(tape.matmul(latent, pw), pb);
  g.logits = tape.add_bias(tape.matmul(latent, cw), cb);
  return g;
}

namespace {

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw ParseError(std::string("checkpoint truncated while reading ") + what);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace

void save_params(const NetworkParams& params, const std::string& path) {
  static_assert(sizeof(float) == 4);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out.write("LBCK", 4);
  write_u32(out, kCheckpointVersion);
  const auto tensors = params.named();
  write_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > 255) throw DataError("tensor name too long");
    const unsigned char name_len = static_cast<unsigned char>(name.size());
    out.write(reinterpret_cast<const char*>(&name_len), 1);
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const unsigned char ndim = static_cast<unsigned char>(t->shape.size());
    out.write(reinterpret_cast<const char*>(&ndim), 1);
    for (int d : t->shape) write_u32(out, static_cast<uint32_t>(d));
    const unsigned char dtype = 0;  // float32
    out.write(reinterpret_cast<const char*>(&dtype), 1);
    std::vector<float> payload(t->v.size());
    for (size_t i = 0; i < t->v.size(); ++i)
      payload[i] = static_cast<float>(t->v[i]);
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(float)));
  }
  if (!out) throw DataError("checkpoint write failed: " + path);
}

NetworkParams load_params(const std::string& path, NetDims expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[4];
  if (!in.read(magic, 4))
    throw ParseError("checkpoint truncated while reading magic");
  if (std::memcmp(magic, "LBCK", 4) != 0)
    throw ParseError(
        "checkpoint version error: bad magic bytes (expected \"LBCK\")");
  const uint32_t version = read_u32(in, "version");
  if (version != kCheckpointVersion)
    throw ParseError("checkpoint version error: unsupported version " +
                     std::to_string(version) + " (expected " +
                     std::to_string(kCheckpointVersion) + ")");
  const uint32_t count = read_u32(in, "tensor count");

  struct Entry {
    std::vector<int> shape;
    std::vector<float> payload;
  };
  std::map<std::string, Entry> entries;
  for (uint32_t i = 0; i < count; ++i) {
    unsigned char name_len = 0;
    if (!in.read(reinterpret_cast<char*>(&name_len), 1))
      throw ParseError("checkpoint truncated while reading tensor name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len))
      throw ParseError("checkpoint truncated while reading tensor name");
    unsigned char ndim = 0;
    if (!in.read(reinterpret_cast<char*>(&ndim), 1))
      throw ParseError("checkpoint truncated while reading tensor rank");
    Entry e;
    int64_t n = 1;
    for (unsigned char d = 0; d < ndim; ++d) {
      const uint32_t dim = read_u32(in, "tensor shape");
      e.shape.push_back(static_cast<int>(dim));
      n *= dim;
    }
    unsigned char dtype = 0xff;
    if (!in.read(reinterpret_cast<char*>(&dtype), 1))
      throw ParseError("checkpoint truncated while reading dtype");
    if (dtype != 0)
      throw ParseError("checkpoint tensor \"" + name +
                       "\" has unsupported dtype " + std::to_string(dtype));
    e.payload.resize(static_cast<size_t>(n));
    if (!in.read(reinterpret_cast<char*>(e.payload.data()),
                 static_cast<std::streamsize>(e.payload.size() * sizeof(float))))
      throw ParseError("checkpoint truncated while reading payload of \"" +
                       name + "\"");
    entries.emplace(std::move(name), std::move(e));
  }

  NetworkParams params(expected);
  for (auto& [name, t] : params.named()) {
    auto it = entries.find(name);
    if (it == entries.end())
      throw DataError("checkpoint is missing tensor \"" + name + "\"");
    if (it->second.shape != t->shape)
      throw DataError("checkpoint tensor \"" + name + "\" has shape " +
                      shape_string(it->second.shape) +
                      " but the configured network expects " +
                      shape_string(t->shape));
    for (size_t i = 0; i < t->v.size(); ++i)
      t->v[i] = static_cast<double>(it->second.payload[i]);
  }
  return params;
}

GradCheckReport grad_check(
    NetworkParams& params,
    const std::function<double(NetworkParams&)>& loss_value,
    const std::function<void(NetworkParams&)>& accumulate_grads,
    double eps, int max_entries_per_tensor, double denom_floor) {
  if (eps <= 0) throw DataError("grad_check: eps must be positive");
  if (denom_floor <= 0) throw DataError("grad_check: denom_floor must be positive");
  accumulate_grads(params);
  // Snapshot analytic gradients before FD evaluations disturb anything.
  std::vector<std::vector<double>> analytic;
  for (auto& [name, t] : params.named()) analytic.push_back(t->g);

  GradCheckReport report;
  size_t tensor_index = 0;
  for (auto& [name, t] : params.named()) {
    GradCheckEntry entry;
    entry.name = name;
    const int64_t n = t->size();
    int64_t stride = 1;
    if (max_entries_per_tensor > 0 && n > max_entries_per_tensor)
      stride = (n + max_entries_per_tensor - 1) / max_entries_per_tensor;
    for (int64_t i = 0; i < n; i += stride) {
      const double saved = t->v[static_cast<size_t>(i)];
      t->v[static_cast<size_t>(i)] = saved + eps;
      const double up = loss_value(params);
      t->v[static_cast<size_t>(i)] = saved - eps;
      const double down = loss_value(params);
      t->v[static_cast<size_t>(i)] = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double an = analytic[tensor_index][static_cast<size_t>(i)];
      const double diff = std::fabs(fd - an);
      const double scale = std::max({std::fabs(fd), std::fabs(an), denom_floor});
      entry.max_rel = std::max(entry.max_rel, diff / scale);
      entry.max_abs = std::max(entry.max_abs, diff);
      ++entry.checked;
    }
    report.worst_rel = std::max(report.worst_rel, entry.max_rel);
    report.tensors.push_back(std::move(entry));
    ++tensor_index;
  }
  // Restore the analytic gradients for the caller.
  tensor_index = 0;
  for (auto& [name, t] : params.named()) t->g = analytic[tensor_index++];
  return report;
}

namespace {

// y += W^T x for row-major W [in x out]: stream rows, accumulate on y.
void matvec_t_f32(const float* w, const float* x, int in, int out, float* y) {
  for (int i = 0; i < in; ++i) {
    const float xi = x[i];
    if (xi == 0.0f) continue;
    const float* row = w + static_cast<size_t>(i) * out;
    for (int j = 0; j < out; ++j) y[j] += xi * row[j];
  }
}

std::vector<float> to_f32(const Tensor& t) {
  std::vector<float> out(t.v.size());
  for (size_t i = 0; i < t.v.size(); ++i) out[i] = static_cast<float>(t.v[i]);
  return out;
}

}  // namespace

FastNet::FastNet(const NetworkParams& params) : dims_(params.dims) {
  params.validate();
  w_z_ = to_f32(params.w_z);
  u_z_ = to_f32(params.u_z);
  b_z_ = to_f32(params.b_z);
  w_r_ = to_f32(params.w_r);
  u_r_ = to_f32(params.u_r);
  b_r_ = to_f32(params.b_r);
  w_h_ = to_f32(params.w_h);
  u_h_ = to_f32(params.u_h);
  b_h_ = to_f32(params.b_h);
  latent_w_ = to_f32(params.latent_w);
  latent_b_ = to_f32(params.latent_b);
  pose_w_ = to_f32(params.pose_w);
  pose_b_ = to_f32(params.pose_b);
  contact_w_ = to_f32(params.contact_w);
  contact_b_ = to_f32(params.contact_b);
}

void FastNet::forward(const float* window, float* pose48, float* logits4) const {
  const int in = dims_.input;
  const int hid = dims_.hidden;
  const int lat = dims_.latent;
  std::vector<float> h(static_cast<size_t>(hid), 0.0f);
  std::vector<float> az(static_cast<size_t>(hid));
  std::vector<float> ar(static_cast<size_t>(hid));
  std::vector<float> ac(static_cast<size_t>(hid));
  std::vector<float> rh(static_cast<size_t>(hid));
  for (int t = 0; t < FeatureWindow::kFrames; ++t) {
    const float* x = window + static_cast<size_t>(t) * in;
    std::memcpy(az.data(), b_z_.data(), sizeof(float) * hid);
    matvec_t_f32(w_z_.data(), x, in, hid, az.data());
    matvec_t_f32(u_z_.data(), h.data(), hid, hid, az.data());
    std::memcpy(ar.data(), b_r_.data(), sizeof(float) * hid);
    matvec_t_f32(w_r_.data(), x, in, hid, ar.data());
    matvec_t_f32(u_r_.data(), h.data(), hid, hid, ar.data());
    for (int k = 0; k < hid; ++k) {
      const float z = 1.0f / (1.0f + std::exp(-az[k]));
      az[k] = z;
      const float r = 1.0f / (1.0f + std::exp(-ar[k]));
      rh[k] = r * h[k];
    }
    std::memcpy(ac.data(), b_h_.data(), sizeof(float) * hid);
    matvec_t_f32(w_h_.data(), x, in, hid, ac.data());
    matvec_t_f32(u_h_.data(), rh.data(), hid, hid, ac.data());
    for (int k = 0; k < hid; ++k) {
      const float c = std::tanh(ac[k]);
      h[k] = (1.0f - az[k]) * h[k] + az[k] * c;
    }
  }
  std::vector<float> latent(static_cast<size_t>(lat));
  std::memcpy(latent.data(), latent_b_.data(), sizeof(float) * lat);
  matvec_t_f32(latent_w_.data(), h.data(), hid, lat, latent.data());
  for (int k = 0; k < lat; ++k) latent[k] = latent[k] > 0.0f ? latent[k] : 0.0f;
  std::memcpy(pose48, pose_b_.data(), sizeof(float) * NetDims::kPose);
  matvec_t_f32(pose_w_.data(), latent.data(), lat, NetDims::kPose, pose48);
  std::memcpy(logits4, contact_b_.data(), sizeof(float) * NetDims::kContact);
  matvec_t_f32(contact_w_.data(), latent.data(), lat, NetDims::kContact,
               logits4);
}

NetworkOutput FastNet::forward(const FeatureWindow& window) const {
  if (dims_.input != FeatureVector::kSize)
    throw DataError("FastNet: network input dim must be 37 for FeatureWindow");
  std::vector<float> xs(static_cast<size_t>(FeatureWindow::kFrames) *
                        FeatureVector::kSize);
  for (int t = 0; t < FeatureWindow::kFrames; ++t)
    for (int k = 0; k < FeatureVector::kSize; ++k)
      xs[static_cast<size_t>(t) * FeatureVector::kSize + k] = static_cast<float>(
          window.frames[static_cast<size_t>(t)].x[static_cast<size_t>(k)]);
  float pose[NetDims::kPose];
  float logits[NetDims::kContact];
  forward(xs.data(), pose, logits);
  NetworkOutput out;
  for (int i = 0; i < NetDims::kPose; ++i) out.pose[static_cast<size_t>(i)] = pose[i];
  for (int i = 0; i < NetDims::kContact; ++i)
    out.logits[static_cast<size_t>(i)] = logits[i];
  return out;
}

}  // namespace lobstr
