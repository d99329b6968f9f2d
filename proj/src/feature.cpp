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

#include "lobstr/feature.hpp"

#include <algorithm>
#include <cmath>

#include "lobstr/error.hpp"
#include "lobstr/rng.hpp"

namespace lobstr {

namespace {

constexpr double kPi = 3.14159265358979323846;
// sin(1 degree): minimum ground-plane component of a usable pelvis forward.
const double kMinHeading = std::sin(kPi / 180.0);

void encode_d(const Vec3& v, const Rotation& w, double* out) {
  out[0] = v.x();
  out[1] = v.y();
  out[2] = v.z();
  SixDof sd = rot_to_6d(w);
  auto a = sd.to_array();
  for (int i = 0; i < 6; ++i) out[3 + i] = a[i];
}

}  // namespace

ReferenceFrame compute_reference(const Transform& pelvis) {
  Vec3 f = pelvis.rot.m.col(2);
  double h = std::sqrt(f.x() * f.x() + f.z() * f.z());
  if (h < kMinHeading) {
    throw NumericError(
        "pelvis forward axis is within 1 degree of vertical; no heading");
  }
  Vec3 z(f.x() / h, 0.0, f.z() / h);
  Vec3 y(0.0, 1.0, 0.0);
  Vec3 x(z.z(), 0.0, -z.x());  // y cross z
  ReferenceFrame ref;
  ref.t.rot.m.col(0) = x;
  ref.t.rot.m.col(1) = y;
  ref.t.rot.m.col(2) = z;
  ref.t.pos = pelvis.pos;
  return ref;
}

std::array<double, 9> joint_velocity(const Transform& prev,
                                     const Transform& cur,
                                     const ReferenceFrame& prev_ref,
                                     const ReferenceFrame& cur_ref) {
  Vec3 p_prev = prev_ref.t.rot.inverse() * (prev.pos - prev_ref.t.pos);
  Vec3 p_cur = cur_ref.t.rot.inverse() * (cur.pos - cur_ref.t.pos);
  Rotation q_prev = prev_ref.t.rot.inverse() * prev.rot;
  Rotation q_cur = cur_ref.t.rot.inverse() * cur.rot;
  std::array<double, 9> out;
  encode_d(p_cur - p_prev, q_prev.inverse() * q_cur, out.data());
  return out;
}

std::array<double, 9> reference_velocity(const ReferenceFrame& prev_ref,
                                         const ReferenceFrame& cur_ref,
                                         RefAngular mode) {
  Vec3 v = cur_ref.t.rot.inverse() * (cur_ref.t.pos - prev_ref.t.pos);
  Rotation w;
  if (mode == RefAngular::kRelative) {
    w = prev_ref.t.rot.inverse() * cur_ref.t.rot;
  } else {
    w = cur_ref.t.rot.inverse() * prev_ref.t.rot.inverse() * cur_ref.t.rot;
  }
  std::array<double, 9> out;
  encode_d(v, w, out.data());
  return out;
}

FeatureVector feature_vector(const TrackerFrame& prev, const TrackerFrame& cur,
                             RefAngular mode) {
  ReferenceFrame rp = compute_reference(prev.pelvis);
  ReferenceFrame rc = compute_reference(cur.pelvis);
  FeatureVector f;
  auto d_ref = reference_velocity(rp, rc, mode);
  auto d_head = joint_velocity(prev.head, cur.head, rp, rc);
  auto d_lh = joint_velocity(prev.left_hand, cur.left_hand, rp, rc);
  auto d_rh = joint_velocity(prev.right_hand, cur.right_hand, rp, rc);
  std::copy(d_ref.begin(), d_ref.end(), f.x.begin() + FeatureVector::kRef);
  std::copy(d_head.begin(), d_head.end(), f.x.begin() + FeatureVector::kHead);
  std::copy(d_lh.begin(), d_lh.end(), f.x.begin() + FeatureVector::kLeftHand);
  std::copy(d_rh.begin(), d_rh.end(),
            f.x.begin() + FeatureVector::kRightHand);
  f.x[FeatureVector::kHeight] = cur.pelvis.pos.y();
  return f;
}

FeatureWindow build_window_from_trackers(const TrackerFrame* frames,
                                         RefAngular mode) {
  FeatureWindow w;
  for (int k = 0; k < FeatureWindow::kFrames; ++k) {
    w.frames[k] = feature_vector(frames[k], frames[k + 1], mode);
  }
  return w;
}

FeatureWindow build_window(const MotionClip& clip, int i, RefAngular mode) {
  if (i < FeatureWindow::kFrames ||
      i >= static_cast<int>(clip.frames.size())) {
    throw DataError("build_window: frame " + std::to_string(i) +
                    " lacks the required 45 predecessors");
  }
  std::vector<TrackerFrame> trackers = synthesize_trackers(clip);
  return build_window_from_trackers(trackers.data() + (i - 45), mode);
}

std::vector<TrackerFrame> synthesize_trackers(const MotionClip& clip) {
  const Skeleton& s = clip.skeleton;
  if (s.head < 0 || s.left_hand < 0 || s.right_hand < 0) {
    throw DataError(
        "skeleton lacks head/hand tracker joint annotations; cannot "
        "synthesize trackers");
  }
  std::vector<TrackerFrame> out;
  out.reserve(clip.frames.size());
  for (size_t i = 0; i < clip.frames.size(); ++i) {
    auto world = fk(s, clip.frames[i]);
    TrackerFrame t;
    t.head = world[s.head];
    t.left_hand = world[s.left_hand];
    t.right_hand = world[s.right_hand];
    t.pelvis = world[0];
    t.timestamp = static_cast<double>(i) / clip.fps;
    out.push_back(t);
  }
  return out;
}

std::vector<TrackerFrame> augment_noise(const std::vector<TrackerFrame>& frames,
                                        uint64_t seed, double pos_sigma,
                                        double max_rot_deg) {
  Rng rng(seed);
  double max_rot = max_rot_deg * kPi / 180.0;
  std::vector<TrackerFrame> out = frames;
  for (TrackerFrame& f : out) {
    for (Transform* t :
         {&f.head, &f.left_hand, &f.right_hand, &f.pelvis}) {
      Vec3 dir = rng.unit_vector();
      double mag = rng.normal(0.0, pos_sigma);
      t->pos += dir * mag;
      Vec3 axis = rng.unit_vector();
      double ang = rng.uniform(0.0, max_rot);
      t->rot = from_axis_angle(axis, ang) * t->rot;
    }
  }
  return out;
}

std::vector<std::array<uint8_t, 2>> label_contacts(const MotionClip& clip) {
  const Skeleton& s = clip.skeleton;
  if (s.toe_bases[0] < 0 || s.toe_bases[1] < 0) {
    throw DataError("skeleton lacks toe-base annotations");
  }
  std::vector<std::array<uint8_t, 2>> out;
  out.reserve(clip.frames.size());
  for (const Pose& p : clip.frames) {
    auto world = fk(s, p);
    std::array<uint8_t, 2> label;
    for (int side = 0; side < 2; ++side) {
      label[side] = world[s.toe_bases[side]].pos.y() < 0.01 ? 1 : 0;
    }
    out.push_back(label);
  }
  return out;
}

std::array<double, 48> pose_targets(const Skeleton& skeleton,
                                    const Pose& pose) {
  std::array<double, 48> out;
  for (int k = 0; k < 8; ++k) {
    int j = skeleton.lower_body[k];
    if (j < 0) throw DataError("skeleton lacks lower-body annotations");
    SixDof sd = rot_to_6d(pose.rotations[j - 1]);
    auto a = sd.to_array();
    for (int i = 0; i < 6; ++i) out[6 * k + i] = a[i];
  }
  return out;
}

std::array<Rotation, 8> decode_pose48(const double* x) {
  std::array<Rotation, 8> out;
  for (int k = 0; k < 8; ++k) {
    out[k] = sixdof_to_rot(SixDof::from_array(x + 6 * k));
  }
  return out;
}

void apply_lower_body(const Skeleton& skeleton,
                      const std::array<Rotation, 8>& rotations, Pose& pose) {
  for (int k = 0; k < 8; ++k) {
    int j = skeleton.lower_body[k];
    if (j < 0) throw DataError("skeleton lacks lower-body annotations");
    pose.rotations[j - 1] = rotations[k];
  }
}

}  // namespace lobstr
