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

#include "lobstr/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "lobstr/error.hpp"

namespace lobstr {

int Skeleton::index_of(const std::string& name) const {
  for (size_t i = 0; i < joints.size(); ++i) {
    if (joints[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<int> Skeleton::leg_chain(int side) const {
  std::vector<int> chain;
  int j = joints[toe_bases[side]].parent;
  while (j > 0) {
    chain.push_back(j);
    j = joints[j].parent;
  }
  std::reverse(chain.begin(), chain.end());
  for (int c : chain) {
    if (std::find(lower_body.begin(), lower_body.end(), c) ==
        lower_body.end()) {
      throw DataError("leg chain joint '" + joints[c].name +
                      "' is not a designated lower-body joint");
    }
  }
  return chain;
}

void Skeleton::validate() const {
  if (joints.empty()) throw DataError("skeleton has no joints");
  if (joints[0].parent != -1) throw DataError("joint 0 must be the root");
  for (size_t j = 1; j < joints.size(); ++j) {
    if (joints[j].parent < 0 || joints[j].parent >= static_cast<int>(j)) {
      throw DataError("skeleton joints are not in topological order at '" +
                      joints[j].name + "'");
    }
  }
  std::set<int> seen;
  for (int id : lower_body) seen.insert(id);
  for (int id : toe_bases) seen.insert(id);
  if (seen.size() != 10) {
    throw DataError("lower-body and toe-base ids must be 10 distinct joints");
  }
  int n = static_cast<int>(joints.size());
  for (int id : seen) {
    if (id <= 0 || id >= n) {
      throw DataError("designated joint id out of range");
    }
  }
  leg_chain(0);
  leg_chain(1);
}

const char* category_name(Category c) {
  switch (c) {
    case Category::kLocomotion:
      return "locomotion";
    case Category::kSitStand:
      return "sit-stand";
    case Category::kUpperBody:
      return "upper-body";
    default:
      return "other";
  }
}

Category category_from_name(const std::string& s) {
  if (s == "locomotion") return Category::kLocomotion;
  if (s == "sit-stand") return Category::kSitStand;
  if (s == "upper-body") return Category::kUpperBody;
  if (s == "other") return Category::kOther;
  throw DataError("unknown category '" + s + "'");
}

std::vector<Transform> fk(const Skeleton& skeleton, const Pose& pose) {
  size_t n = skeleton.joints.size();
  if (pose.rotations.size() + 1 != n) {
    throw DataError("pose joint-rotation count does not match skeleton");
  }
  std::vector<Transform> world(n);
  world[0] = pose.root;
  for (size_t j = 1; j < n; ++j) {
    const Transform& p = world[skeleton.joints[j].parent];
    world[j] =
        p * Transform{pose.rotations[j - 1], skeleton.joints[j].offset};
  }
  return world;
}

std::vector<Transform> fk_chain(const Skeleton& skeleton, const Pose& pose,
                                const std::vector<int>& chain) {
  std::vector<Transform> out;
  out.reserve(chain.size());
  Transform cur = pose.root;
  int prev = 0;
  for (int j : chain) {
    if (skeleton.joints[j].parent != prev) {
      throw DataError("fk_chain: joints do not form a root-descendant path");
    }
    cur = cur * Transform{pose.rotations[j - 1], skeleton.joints[j].offset};
    out.push_back(cur);
    prev = j;
  }
  return out;
}

MotionClip retarget_scale(const MotionClip& clip, double scale,
                          double root_shift_y) {
  if (!(scale > 0.0)) throw DataError("retarget_scale: scale must be > 0");
  MotionClip out = clip;
  for (auto& j : out.skeleton.joints) {
    j.offset *= scale;
  }
  for (auto& f : out.frames) {
    f.root.pos *= scale;
    f.root.pos.y() += root_shift_y;
  }
  return out;
}

MotionClip resample(const MotionClip& clip, double target_fps) {
  // Tolerate fps recovered from a rounded frame-time value.
  if (target_fps > clip.fps + 1e-6) {
    throw DataError("resample: upsampling requested (" +
                    std::to_string(clip.fps) + " -> " +
                    std::to_string(target_fps) + " fps)");
  }
  MotionClip out;
  out.skeleton = clip.skeleton;
  out.fps = target_fps;
  out.name = clip.name;
  out.category = clip.category;
  if (clip.frames.empty()) return out;
  if (std::abs(target_fps - clip.fps) < 1e-6) {
    out.frames = clip.frames;
    return out;
  }

  size_t n_in = clip.frames.size();
  double step = clip.fps / target_fps;  // source frames per output frame
  size_t n_out = static_cast<size_t>(
                     std::floor(static_cast<double>(n_in - 1) / step)) +
                 1;
  out.frames.reserve(n_out);
  for (size_t k = 0; k < n_out; ++k) {
    double t = static_cast<double>(k) * step;
    size_t i0 = static_cast<size_t>(std::floor(t));
    double a = t - static_cast<double>(i0);
    if (i0 >= n_in - 1 || a == 0.0) {
      out.frames.push_back(clip.frames[std::min(i0, n_in - 1)]);
      continue;
    }
    const Pose& f0 = clip.frames[i0];
    const Pose& f1 = clip.frames[i0 + 1];
    Pose p;
    p.root.pos = (1.0 - a) * f0.root.pos + a * f1.root.pos;
    p.root.rot = slerp(f0.root.rot, f1.root.rot, a);
    p.rotations.resize(f0.rotations.size());
    for (size_t j = 0; j < p.rotations.size(); ++j) {
      p.rotations[j] = slerp(f0.rotations[j], f1.rotations[j], a);
    }
    out.frames.push_back(std::move(p));
  }
  return out;
}

Skeleton standard_skeleton() {
  Skeleton s;
  auto add = [&s](const char* name, const char* parent, double x, double y,
                  double z) {
    Joint j;
    j.name = name;
    j.parent = parent[0] ? s.index_of(parent) : -1;
    j.offset = Vec3(x, y, z);
    s.joints.push_back(j);
  };
  // Left is +X; the character faces +Z, Y is up. Leg offsets sum to a 1m
  // drop so the toe bases sit on the floor with the root at 1m in T-pose.
  add("Hips", "", 0, 0, 0);
  add("LHipJoint", "Hips", 0.10, -0.06, 0);
  add("LeftUpLeg", "LHipJoint", 0, -0.04, 0);
  add("LeftLeg", "LeftUpLeg", 0, -0.42, 0);
  add("LeftFoot", "LeftLeg", 0, -0.40, 0);
  add("LeftToeBase", "LeftFoot", 0, -0.08, 0.12);
  add("RHipJoint", "Hips", -0.10, -0.06, 0);
  add("RightUpLeg", "RHipJoint", 0, -0.04, 0);
  add("RightLeg", "RightUpLeg", 0, -0.42, 0);
  add("RightFoot", "RightLeg", 0, -0.40, 0);
  add("RightToeBase", "RightFoot", 0, -0.08, 0.12);
  add("Spine", "Hips", 0, 0.12, 0);
  add("Spine1", "Spine", 0, 0.13, 0);
  add("Neck", "Spine1", 0, 0.14, 0);
  add("Head", "Neck", 0, 0.10, 0);
  add("LeftShoulder", "Spine1", 0.07, 0.10, 0);
  add("LeftArm", "LeftShoulder", 0.12, 0, 0);
  add("LeftForeArm", "LeftArm", 0.28, 0, 0);
  add("LeftHand", "LeftForeArm", 0.26, 0, 0);
  add("LeftFingerBase", "LeftHand", 0.08, 0, 0);
  add("RightShoulder", "Spine1", -0.07, 0.10, 0);
  add("RightArm", "RightShoulder", -0.12, 0, 0);
  add("RightForeArm", "RightArm", -0.28, 0, 0);
  add("RightHand", "RightForeArm", -0.26, 0, 0);
  add("RightFingerBase", "RightHand", -0.08, 0, 0);

  auto id = [&s](const char* n) { return s.index_of(n); };
  s.lower_body = {id("LHipJoint"), id("LeftUpLeg"), id("LeftLeg"),
                  id("LeftFoot"), id("RHipJoint"), id("RightUpLeg"),
                  id("RightLeg"), id("RightFoot")};
  s.toe_bases = {id("LeftToeBase"), id("RightToeBase")};
  s.head = id("Head");
  s.left_hand = id("LeftFingerBase");
  s.right_hand = id("RightFingerBase");
  s.validate();
  return s;
}

Pose tpose(const Skeleton& skeleton, double root_height) {
  Pose p;
  p.root.pos = Vec3(0, root_height, 0);
  p.rotations.assign(skeleton.joints.size() - 1, Rotation::identity());
  return p;
}

Skeleton load_skeleton_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open skeleton file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("skeleton file '" + path + "': " + e.what());
  }
  Skeleton s;
  try {
    for (const auto& ent : j.at("joints")) {
      Joint joint;
      joint.name = ent.at("name").get<std::string>();
      std::string parent = ent.value("parent", std::string());
      if (parent.empty()) {
        joint.parent = -1;
      } else {
        joint.parent = s.index_of(parent);
        if (joint.parent < 0) {
          throw DataError("skeleton parent '" + parent +
                          "' not defined before '" + joint.name + "'");
        }
      }
      auto off = ent.at("offset");
      joint.offset = Vec3(off.at(0).get<double>(), off.at(1).get<double>(),
                          off.at(2).get<double>());
      s.joints.push_back(joint);
    }
    auto resolve = [&s](const nlohmann::json& names, auto& out) {
      size_t i = 0;
      for (const auto& n : names) {
        int id = s.index_of(n.get<std::string>());
        if (id < 0) {
          throw DataError("skeleton names joint '" + n.get<std::string>() +
                          "' that does not exist");
        }
        out[i++] = id;
      }
      if (i != out.size()) throw DataError("wrong number of designated joints");
    };
    resolve(j.at("lower_body"), s.lower_body);
    resolve(j.at("toe_bases"), s.toe_bases);
    if (j.contains("trackers")) {
      const auto& t = j["trackers"];
      auto opt = [&s, &t](const char* key) {
        if (!t.contains(key)) return -1;
        int id = s.index_of(t[key].get<std::string>());
        if (id < 0) {
          throw DataError(std::string("tracker joint '") +
                          t[key].get<std::string>() + "' does not exist");
        }
        return id;
      };
      s.head = opt("head");
      s.left_hand = opt("left_hand");
      s.right_hand = opt("right_hand");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("skeleton file '" + path + "': " + e.what());
  }
  s.validate();
  return s;
}

void save_skeleton_json(const Skeleton& skeleton, const std::string& path) {
  nlohmann::ordered_json j;
  for (const auto& joint : skeleton.joints) {
    nlohmann::ordered_json ent;
    ent["name"] = joint.name;
    ent["parent"] =
        joint.parent < 0 ? "" : skeleton.joints[joint.parent].name;
    ent["offset"] = {joint.offset.x(), joint.offset.y(), joint.offset.z()};
    j["joints"].push_back(ent);
  }
  auto names = [&skeleton](const auto& ids) {
    std::vector<std::string> out;
    for (int id : ids) out.push_back(skeleton.joints[id].name);
    return out;
  };
  j["lower_body"] = names(skeleton.lower_body);
  j["toe_bases"] = names(skeleton.toe_bases);
  if (skeleton.head >= 0) {
    j["trackers"]["head"] = skeleton.joints[skeleton.head].name;
  }
  if (skeleton.left_hand >= 0) {
    j["trackers"]["left_hand"] = skeleton.joints[skeleton.left_hand].name;
  }
  if (skeleton.right_hand >= 0) {
    j["trackers"]["right_hand"] = skeleton.joints[skeleton.right_hand].name;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write skeleton file '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace lobstr
