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

#pragma once

#include <array>
#include <string>
#include <vector>

#include "lobstr/geometry.hpp"

namespace lobstr {

struct Joint {
  std::string name;
  int parent = -1;           // -1 for the root
  Vec3 offset = Vec3::Zero();  // translation from the parent, meters
};

/// Joint hierarchy in topological order (parent index < child index).
/// The eight lower-body joints (hip joints, upper legs, lower legs, feet,
/// per side) and the two toe-base joints are designated explicitly; which
/// named joints play those roles is data, not code.
struct Skeleton {
  std::vector<Joint> joints;
  // Designated ids; -1 until annotated (e.g. a freshly parsed BVH skeleton).
  std::array<int, 8> lower_body{-1, -1, -1, -1, -1, -1, -1, -1};
  std::array<int, 2> toe_bases{-1, -1};
  int head = -1;
  int left_hand = -1;   // finger-base joints standing in for hand trackers
  int right_hand = -1;

  int index_of(const std::string& name) const;  // -1 when absent

  /// Moving leg chain for one side: ancestors of the toe-base from the hip
  /// joint down to the foot, excluding the root. All of them must be
  /// lower-body joints.
  std::vector<int> leg_chain(int side) const;

  /// Throws DataError when the structural invariants do not hold.
  void validate() const;
};

struct Pose {
  Transform root;
  std::vector<Rotation> rotations;  // one per non-root joint, index j-1
};

enum class Category { kLocomotion, kSitStand, kUpperBody, kOther };

const char* category_name(Category c);
Category category_from_name(const std::string& s);

struct MotionClip {
  Skeleton skeleton;
  double fps = 0.0;
  std::vector<Pose> frames;
  std::string name;
  Category category = Category::kOther;
};

/// World transform of every joint: world(j) = world(parent) * (offset, local
/// rotation); the root uses pose.root directly.
std::vector<Transform> fk(const Skeleton& skeleton, const Pose& pose);

/// World transforms for a single root-to-joint chain; cheaper than full fk
/// when only one branch matters. Returns transforms for the joints listed in
/// `chain` (which must be a root-descendant path, root excluded).
std::vector<Transform> fk_chain(const Skeleton& skeleton, const Pose& pose,
                                const std::vector<int>& chain);

/// Uniform scale of all offsets and root positions plus a root height shift.
/// Rotations are untouched.
MotionClip retarget_scale(const MotionClip& clip, double scale,
                          double root_shift_y);

/// Downsample to target_fps. Positions are interpolated linearly, rotations
/// by shortest-arc slerp. Upsampling is refused.
MotionClip resample(const MotionClip& clip, double target_fps);

/// The 1m-root-height reference skeleton that training data is retargeted
/// onto. Legs reach the floor exactly in T-pose.
Skeleton standard_skeleton();

/// All-identity pose with the root raised to `root_height`.
Pose tpose(const Skeleton& skeleton, double root_height = 1.0);

Skeleton load_skeleton_json(const std::string& path);
void save_skeleton_json(const Skeleton& skeleton, const std::string& path);

}  // namespace lobstr
