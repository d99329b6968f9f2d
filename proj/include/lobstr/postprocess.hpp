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

#ifndef LOBSTR_POSTPROCESS_HPP_
#define LOBSTR_POSTPROCESS_HPP_

#include <array>
#include <vector>

#include "lobstr/geometry.hpp"
#include "lobstr/skeleton.hpp"

namespace lobstr {

/// Damped-least-squares IK settings plus the contact-release blend window.
struct IkConfig {
  int max_iterations = 50;
  double tolerance = 1e-3;  // meters
  double damping = 0.1;
  int blend_window = 10;  // frames of slow-in-slow-out release
  double max_step = 0.2;  // per-iteration clamp on the position error, meters

  /// Throws DataError unless every field is positive.
  void validate() const;
};

/// Per-foot contact decision: softmax probability of the contact class
/// strictly above 0.5 (a tie is no contact). Throws NumericError on
/// non-finite logits. Logits are [left0, left1, right0, right1] with class 1
/// meaning contact.
std::array<bool, 2> decide_contact(const std::array<double, 4>& logits);

/// Thresholded variant with an optional hysteresis band: a foot that was not
/// in contact needs p > threshold + hysteresis to enter, one already in
/// contact keeps it while p > threshold - hysteresis.
std::array<bool, 2> decide_contact(const std::array<double, 4>& logits,
                                   const std::array<bool, 2>& previous,
                                   double threshold, double hysteresis);

/// Slow-in-slow-out ramp (1 - cos(pi s)) / 2; s is clamped to [0, 1].
double blend_alpha(double s);

struct IkResult {
  Pose pose;
  bool converged = false;
  int iterations = 0;
  double error = 0.0;  // final end-effector distance to the target, meters
};

/// Damped-least-squares IK on one leg chain. `chain` lists consecutive
/// parent-child joint ids from the first moving joint down to the designated
/// toe-base end effector (which is not rotated). Iterates until the toe-base
/// is within tolerance of the target or max_iterations is reached; an
/// unreachable target yields the best-effort pose with converged = false.
/// Joints outside the chain are never modified. Throws DataError on a
/// malformed chain and NumericError on a non-finite target.
IkResult jacobian_ik(const Skeleton& skeleton, const Pose& pose,
                     const std::vector<int>& chain, const Vec3& target,
                     const IkConfig& config = IkConfig{});

/// Per-foot contact machine: Free, Locked on a world-space target, or
/// Blending back toward the network output after a release.
struct FootState {
  enum class Kind { kFree, kLocked, kBlending };
  Kind kind = Kind::kFree;
  Vec3 target = Vec3::Zero();  // Locked target, or Blending anchor
  int elapsed = 0;             // completed blend frames, in [0, blend_window)
};

struct PostprocessConfig {
  IkConfig ik;
  double threshold = 0.5;    // contact probability threshold
  double hysteresis = 0.0;   // band around the threshold, see decide_contact
  bool snap_to_floor = false;  // lock targets at Y = 0 instead of captured Y

  /// Throws DataError on a non-positive band layout or bad IK settings.
  void validate() const;
};

struct PostprocessResult {
  Pose pose;
  std::array<FootState, 2> state;
};

/// One frame of contact preservation. Per foot: a rising contact edge locks
/// the current toe-base world position (Y clamped to the floor from below,
/// or snapped onto it when configured); while locked, IK pins the toe-base
/// to the stored target; a falling edge blends the target from the lock
/// anchor back to the network's toe-base over blend_window frames with
/// blend_alpha pacing, after which the foot is free and the network pose
/// passes through untouched. Re-contact during a blend locks at the current
/// blended target. Legs are solved independently; joints outside a foot's
/// chain are never modified.
PostprocessResult postprocess_step(const Skeleton& skeleton, const Pose& pose,
                                   const std::array<bool, 2>& contacts,
                                   const std::array<FootState, 2>& state,
                                   const PostprocessConfig& config);

}  // namespace lobstr

#endif  // LOBSTR_POSTPROCESS_HPP_
