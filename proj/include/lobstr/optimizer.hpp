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

#ifndef LOBSTR_OPTIMIZER_HPP_
#define LOBSTR_OPTIMIZER_HPP_

#include <cstdint>
#include <vector>

#include "lobstr/network.hpp"

namespace lobstr {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;  // added outside the square root

  /// Throws DataError unless betas are in [0,1) and eps is positive.
  void validate() const;
};

/// Adam with bias correction. Moment buffers mirror the parameter shapes and
/// are zero at construction; step() reads the gradients currently stored on
/// the parameter tensors.
class Adam {
 public:
  explicit Adam(const NetworkParams& params, AdamConfig cfg = AdamConfig{});

  /// One update: m = b1*m + (1-b1)*g, v = b2*v + (1-b2)*g^2, then
  /// p -= lr * (m/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps).
  /// Throws DataError on a non-positive lr or when parameter shapes no
  /// longer match the state built at construction.
  void step(NetworkParams& params, double lr);

  int64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// Learning rate after `completed_epochs` full epochs of decay:
/// initial * decay^completed_epochs (so the first epoch runs at `initial`).
double learning_rate(double initial, double decay, int completed_epochs);

}  // namespace lobstr

#endif  // LOBSTR_OPTIMIZER_HPP_
