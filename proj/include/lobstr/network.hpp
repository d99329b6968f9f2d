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

#ifndef LOBSTR_NETWORK_HPP_
#define LOBSTR_NETWORK_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "lobstr/feature.hpp"
#include "lobstr/tensor.hpp"

namespace lobstr {

/// Layer widths. Defaults are the full-size model; tests shrink them.
struct NetDims {
  int input = FeatureVector::kSize;  // 37
  int hidden = 1024;
  int latent = 128;
  static constexpr int kPose = 48;     // 8 joints x 6-dof rotation
  static constexpr int kContact = 4;   // 2 feet x 2 classes

  bool operator==(const NetDims&) const = default;
};

struct NetworkOutput {
  std::array<double, NetDims::kPose> pose{};
  std::array<double, NetDims::kContact> logits{};
};

/// All learnable tensors. Weight matrices are stored row-major [in x out]
/// so a batch row-vector product is x * W.
struct NetworkParams {
  NetDims dims;
  Tensor w_z, u_z, b_z;
  Tensor w_r, u_r, b_r;
  Tensor w_h, u_h, b_h;
  Tensor latent_w, latent_b;
  Tensor pose_w, pose_b;
  Tensor contact_w, contact_b;

  NetworkParams() : NetworkParams(NetDims{}) {}
  explicit NetworkParams(NetDims d);  // zero-initialized

  /// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per tensor.
  static NetworkParams init(NetDims d, uint64_t seed);

  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;

  void ensure_grads();
  void zero_grads();
  bool finite() const;
  /// Throws NumericError naming the first non-finite tensor.
  void validate() const;
  int64_t parameter_count() const;
};

/// One GRU step on a single sample (reference double-precision path):
///   z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br),
///   c = tanh(Wh x + Uh (r.h) + bh), h' = (1-z).h + z.c
std::vector<double> gru_cell(const std::vector<double>& x,
                             const std::vector<double>& h_prev,
                             const NetworkParams& params);

/// Runs `steps` GRU steps from a zero hidden state over xs (row-major
/// [steps x input]) and applies the latent linear + ReLU.
std::vector<double> encode_steps(const double* xs, int steps,
                                 const NetworkParams& params);

std::vector<double> encode(const FeatureWindow& window,
                           const NetworkParams& params);

/// Full forward pass (validates parameter finiteness, fail-fast).
NetworkOutput forward(const FeatureWindow& window, const NetworkParams& params);

/// Per-foot 2-class softmax over the 4 logits; entries (0,1) are the left
/// foot's (no-contact, contact) probabilities, (2,3) the right foot's.
std::array<double, 4> contact_probabilities(const std::array<double, 4>& logits);

/// Batched tape forward. xs_time_major is [FeatureWindow::kFrames][batch]
/// [input]: each timestep is one contiguous batch-by-input matrix.
struct BatchGraph {
  Tape::T pose;    // [batch x 48]
  Tape::T logits;  // [batch x 4]
};
BatchGraph forward_batch(Tape& tape, const double* xs_time_major, int batch,
                         NetworkParams& params);

/// Checkpoint I/O. Little-endian file: magic "LBCK", version u32, tensor
/// count u32, then per tensor: name length u8, name bytes, ndim u8,
/// dims u32 each, dtype u8 (0 = float32), row-major float32 payload.
inline constexpr uint32_t kCheckpointVersion = 1;
void save_params(const NetworkParams& params, const std::string& path);
NetworkParams load_params(const std::string& path, NetDims expected);

/// Analytic-vs-central-finite-difference comparison per tensor.
struct GradCheckEntry {
  std::string name;
  double max_rel = 0.0;   // max over checked entries of relative error
  double max_abs = 0.0;   // max absolute difference
  int checked = 0;
};
struct GradCheckReport {
  std::vector<GradCheckEntry> tensors;
  double worst_rel = 0.0;
  bool passed(double tolerance) const { return worst_rel < tolerance; }
};

/// loss_value evaluates the loss at the current params; accumulate_grads
/// zeroes gradients and fills them analytically. max_entries_per_tensor = 0
/// checks every entry; otherwise a deterministic strided subset. denom_floor
/// keeps the relative error meaningful for near-zero gradients: a central
/// difference carries cancellation noise of roughly ulp(loss)/(2*eps), so
/// differences are measured against at least this scale.
GradCheckReport grad_check(
    NetworkParams& params,
    const std::function<double(NetworkParams&)>& loss_value,
    const std::function<void(NetworkParams&)>& accumulate_grads,
    double eps = 1e-5, int max_entries_per_tensor = 0,
    double denom_floor = 1e-6);

/// Float32 real-time inference path: contiguous row-major float weights and
/// hand-written single-thread kernels with a fixed summation order. Forward
/// is pure; one instance may be shared across threads.
class FastNet {
 public:
  explicit FastNet(const NetworkParams& params);

  /// window: row-major [kFrames x input] floats.
  void forward(const float* window, float* pose48, float* logits4) const;
  NetworkOutput forward(const FeatureWindow& window) const;

  const NetDims& dims() const { return dims_; }

 private:
  NetDims dims_;
  std::vector<float> w_z_, u_z_, b_z_;
  std::vector<float> w_r_, u_r_, b_r_;
  std::vector<float> w_h_, u_h_, b_h_;
  std::vector<float> latent_w_, latent_b_;
  std::vector<float> pose_w_, pose_b_;
  std::vector<float> contact_w_, contact_b_;
};

}  // namespace lobstr

#endif  // LOBSTR_NETWORK_HPP_
