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

#include "lobstr/optimizer.hpp"

#include <cmath>
#include <string>

#include "lobstr/error.hpp"

namespace lobstr {

void AdamConfig::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw DataError("adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw DataError("adam eps must be positive");
  }
}

Adam::Adam(const NetworkParams& params, AdamConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  for (const auto& [name, tensor] : params.named()) {
    (void)name;
    m_.emplace_back(tensor->v.size(), 0.0);
    v_.emplace_back(tensor->v.size(), 0.0);
  }
}

void Adam::step(NetworkParams& params, double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    throw DataError("adam: learning rate must be positive");
  }
  auto named = params.named();
  if (named.size() != m_.size()) {
    throw DataError("adam: parameter set changed since construction");
  }
  params.ensure_grads();
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < named.size(); ++i) {
    Tensor& t = *named[i].second;
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    if (t.v.size() != m.size()) {
      throw DataError("adam: parameter '" + named[i].first +
                      "' changed shape since construction");
    }
    for (size_t j = 0; j < m.size(); ++j) {
      const double g = t.g[j];
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      t.v[j] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

double learning_rate(double initial, double decay, int completed_epochs) {
  return initial * std::pow(decay, static_cast<double>(completed_epochs));
}

}  // namespace lobstr
