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

#ifndef LOBSTR_LOSSES_HPP_
#define LOBSTR_LOSSES_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "lobstr/geometry.hpp"
#include "lobstr/skeleton.hpp"

namespace lobstr {

/// Weights of the four training-loss terms. The contact weight is applied as
/// contact/2 to each foot, so the printed total is
///   pose*L_pose + fk*L_fk + velocity*L_vel + (contact/2)*(L_left + L_right).
struct LossWeights {
  double pose = 1.0;
  double fk = 0.1;
  double velocity = 0.1;
  double contact = 1e-6;

  /// Throws DataError unless every weight is finite and non-negative.
  void validate() const;
};

/// Unweighted values of the five loss terms (contact kept per foot).
struct LossComponents {
  double pose = 0.0;
  double fk = 0.0;
  double velocity = 0.0;
  double contact_left = 0.0;
  double contact_right = 0.0;
};

/// Weighted sum exactly as printed above. Throws NumericError naming the
/// first non-finite component.
double total_loss(const LossComponents& c, const LossWeights& w);

/// Leg-chain geometry extracted from a skeleton once, so the per-sample FK
/// losses need only the 48 pose scalars and a root transform. `slot` is the
/// joint's index in the lower-body order (block 6*slot of the pose vector).
struct FkContext {
  struct ChainLink {
    int slot = 0;
    Vec3 offset = Vec3::Zero();
  };
  std::array<std::vector<ChainLink>, 2> chains;  // left, right; hip..foot
  std::array<Vec3, 2> toe_offsets;
};

/// Throws DataError when the skeleton lacks lower-body / toe annotations.
FkContext make_fk_context(const Skeleton& skeleton);

/// Toe-base world position of one side (0 left, 1 right) for a 48-scalar
/// pose under the given root. Throws NumericError on degenerate blocks.
Vec3 toe_position(const double* pose48, const Transform& root,
                  const FkContext& ctx, int side);

/// Mean absolute difference over the 48 pose scalars.
double loss_pose(const double* pred48, const double* target48);

/// Mean over both feet of the Euclidean distance between predicted and
/// target toe-base positions, both FK-evaluated under the same root.
double loss_fk(const double* pred48, const double* target48,
               const Transform& root, const FkContext& ctx);
double loss_fk(const double* pred48, const double* target48,
               const Transform& root, const Skeleton& skeleton);

/// Mean over both feet of the norm of the toe-base velocity error: the
/// difference between predicted and target positions is formed literally as
///   (p_pred_i - p_target_{i-1}) - (p_target_i - p_target_{i-1}),
/// each frame FK-evaluated under its own root.
double loss_velocity(const double* pred48, const double* target48,
                     const double* prev_target48, const Transform& root,
                     const Transform& prev_root, const FkContext& ctx);
double loss_velocity(const double* pred48, const double* target48,
                     const double* prev_target48, const Transform& root,
                     const Transform& prev_root, const Skeleton& skeleton);

/// Gradient versions: accumulate d(loss)/d(pred) into gx48 (callers hand in
/// a zeroed or partially accumulated buffer) and return the loss value.
double loss_fk_grad(const double* pred48, const double* target48,
                    const Transform& root, const FkContext& ctx, double* gx48);
double loss_velocity_grad(const double* pred48, const double* target48,
                          const double* prev_target48, const Transform& root,
                          const Transform& prev_root, const FkContext& ctx,
                          double* gx48);

/// Two-class softmax cross entropy of one foot's logit pair; label is the
/// true class, 1 meaning contact. Throws DataError on other labels.
double contact_ce(const double* logits2, int label);

/// Mean of the left and right per-foot cross entropies; logits are the
/// 4-vector [left0, left1, right0, right1].
double loss_contact(const std::array<double, 4>& logits,
                    const std::array<uint8_t, 2>& labels);

}  // namespace lobstr

#endif  // LOBSTR_LOSSES_HPP_
