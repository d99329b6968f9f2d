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

#ifndef LOBSTR_FEATURE_HPP_
#define LOBSTR_FEATURE_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "lobstr/geometry.hpp"
#include "lobstr/skeleton.hpp"

namespace lobstr {

/// Ground-planar frame anchored at the pelvis: Y is world up, Z the pelvis
/// forward direction projected onto the ground, X their cross product.
struct ReferenceFrame {
  Transform t;
};

/// World transforms of the four tracked end effectors at one instant.
struct TrackerFrame {
  Transform head;
  Transform left_hand;
  Transform right_hand;
  Transform pelvis;
  double timestamp = 0.0;  // seconds

  bool finite() const {
    return head.finite() && left_hand.finite() && right_hand.finite() &&
           pelvis.finite();
  }
};

/// One input feature vector: reference-frame velocity, three end-effector
/// velocities relative to the reference, and the reference height.
/// Each velocity block is [linear (3, m/frame), angular (6, forward+up)].
struct FeatureVector {
  static constexpr int kSize = 37;
  static constexpr int kRef = 0;
  static constexpr int kHead = 9;
  static constexpr int kLeftHand = 18;
  static constexpr int kRightHand = 27;
  static constexpr int kHeight = 36;

  std::array<double, kSize> x{};
};

/// 45 consecutive feature vectors, oldest first.
struct FeatureWindow {
  static constexpr int kFrames = 45;
  std::array<FeatureVector, kFrames> frames;
};

/// One supervised sample: an input window plus the pose / contact targets at
/// the window's final frame.
struct TrainingSample {
  FeatureWindow window;
  std::array<double, 48> target_pose{};     // 8 joints x [forward, up]
  std::array<uint8_t, 2> target_contact{};  // left, right; 1 = contact
};

/// How the reference frame's own angular velocity is formed. kRelative is the
/// frame-to-frame rotation inv(q_{i-1}) * q_i; kLiteral conjugates it as
/// inv(q_i) * inv(q_{i-1}) * q_i, which for the (yaw-only) reference equals
/// the inverse of the previous absolute heading and therefore changes when
/// the whole scene is yawed. kRelative is the default; see the config key
/// reference_angular_mode.
enum class RefAngular { kRelative, kLiteral };

/// Builds the reference frame from a pelvis transform.
/// Throws NumericError when the pelvis forward axis is within 1 degree of
/// vertical (no usable heading).
ReferenceFrame compute_reference(const Transform& pelvis);

/// Velocity of a tracked joint between consecutive frames, expressed in the
/// reference frame: linear part from reference-local positions (each frame
/// using its own reference), angular part the frame-to-frame rotation of the
/// reference-local orientation.
std::array<double, 9> joint_velocity(const Transform& prev,
                                     const Transform& cur,
                                     const ReferenceFrame& prev_ref,
                                     const ReferenceFrame& cur_ref);

/// Velocity of the reference frame itself: linear part inv(q_i)(p_i -
/// p_{i-1}), angular part per the chosen mode.
std::array<double, 9> reference_velocity(const ReferenceFrame& prev_ref,
                                         const ReferenceFrame& cur_ref,
                                         RefAngular mode = RefAngular::kRelative);

/// Feature vector for the step prev -> cur.
FeatureVector feature_vector(const TrackerFrame& prev, const TrackerFrame& cur,
                             RefAngular mode = RefAngular::kRelative);

/// Window ending at clip frame i (inclusive); needs frames i-45..i.
/// Throws DataError when history is insufficient.
FeatureWindow build_window(const MotionClip& clip, int i,
                           RefAngular mode = RefAngular::kRelative);

/// Window from 46 consecutive tracker frames (oldest first).
FeatureWindow build_window_from_trackers(const TrackerFrame* frames,
                                         RefAngular mode = RefAngular::kRelative);

/// FK world transforms of head, finger bases, and root for every frame.
/// Throws DataError when the skeleton lacks the tracker joint annotations.
std::vector<TrackerFrame> synthesize_trackers(const MotionClip& clip);

/// Simulated tracker noise: position shifted by a uniform random direction
/// scaled by a N(0, pos_sigma) sample; rotation pre-multiplied by a
/// random-axis rotation with angle uniform in [0, max_rot_deg] degrees.
/// Deterministic per seed.
std::vector<TrackerFrame> augment_noise(const std::vector<TrackerFrame>& frames,
                                        uint64_t seed, double pos_sigma = 0.01,
                                        double max_rot_deg = 1.5);

/// Per-frame (left, right) contact labels: 1 iff toe-base world height is
/// strictly below 0.01 m.
std::vector<std::array<uint8_t, 2>> label_contacts(const MotionClip& clip);

/// The 48 pose targets: forward+up of each designated lower-body joint's
/// local rotation, in the skeleton's lower_body order.
std::array<double, 48> pose_targets(const Skeleton& skeleton, const Pose& pose);

/// Decodes 48 scalars back to 8 rotations (Gram-Schmidt per joint).
/// Propagates NumericError on degenerate blocks.
std::array<Rotation, 8> decode_pose48(const double* x);

/// Writes 8 lower-body rotations into a pose.
void apply_lower_body(const Skeleton& skeleton,
                      const std::array<Rotation, 8>& rotations, Pose& pose);

}  // namespace lobstr

#endif  // LOBSTR_FEATURE_HPP_
