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

#include "lobstr/bvh.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "lobstr/error.hpp"
#include "lobstr/geometry.hpp"

namespace lobstr {

namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

enum class Channel {
  kXpos,
  kYpos,
  kZpos,
  kXrot,
  kYrot,
  kZrot,
};

struct JointChannels {
  int joint;  // index into skeleton.joints
  std::vector<Channel> channels;
};

// Whitespace tokenizer that remembers the 1-based line each token came from.
class Tokenizer {
 public:
  explicit Tokenizer(std::istream& in) : in_(in) {}

  // Returns an empty string at end of input.
  std::string next() {
    while (pos_ >= line_.size()) {
      if (!std::getline(in_, line_)) return std::string();
      ++line_no_;
      pos_ = 0;
      skip_space();
      if (pos_ >= line_.size()) continue;
      break;
    }
    size_t start = pos_;
    while (pos_ < line_.size() && !std::isspace(static_cast<unsigned char>(
                                      line_[pos_]))) {
      ++pos_;
    }
    std::string tok = line_.substr(start, pos_ - start);
    skip_space();
    return tok;
  }

  std::string expect(const char* what) {
    std::string tok = next();
    if (tok.empty()) {
      fail(std::string("unexpected end of input, expected ") + what);
    }
    return tok;
  }

  void expect_exact(const char* literal) {
    std::string tok = expect(literal);
    if (tok != literal) {
      fail("expected '" + std::string(literal) + "', got '" + tok + "'");
    }
  }

  double expect_number(const char* what) {
    std::string tok = expect(what);
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') {
      fail("expected " + std::string(what) + ", got '" + tok + "'");
    }
    return v;
  }

  // Reads the next non-blank line whole (for frame data).
  bool next_line(std::string& out) {
    if (pos_ < line_.size()) {
      out = line_.substr(pos_);
      pos_ = line_.size();
      return true;
    }
    while (std::getline(in_, line_)) {
      ++line_no_;
      pos_ = line_.size();
      bool blank = true;
      for (char c : line_) {
        if (!std::isspace(static_cast<unsigned char>(c))) {
          blank = false;
          break;
        }
      }
      if (blank) continue;
      out = line_;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("bvh line " + std::to_string(line_no_) + ": " + msg);
  }

  int line_no() const { return line_no_; }

 private:
  void skip_space() {
    while (pos_ < line_.size() &&
           std::isspace(static_cast<unsigned char>(line_[pos_]))) {
      ++pos_;
    }
  }

  std::istream& in_;
  std::string line_;
  size_t pos_ = 0;
  int line_no_ = 0;
};

Channel channel_from_token(Tokenizer& tok, const std::string& t) {
  if (t == "Xposition") return Channel::kXpos;
  if (t == "Yposition") return Channel::kYpos;
  if (t == "Zposition") return Channel::kZpos;
  if (t == "Xrotation") return Channel::kXrot;
  if (t == "Yrotation") return Channel::kYrot;
  if (t == "Zrotation") return Channel::kZrot;
  tok.fail("unsupported channel token '" + t + "'");
}

struct ParserState {
  Skeleton skeleton;
  std::vector<JointChannels> layout;
  double unit_scale;
};

void parse_offset(Tokenizer& tok, Vec3& out, double unit_scale) {
  tok.expect_exact("OFFSET");
  out.x() = tok.expect_number("offset x") * unit_scale;
  out.y() = tok.expect_number("offset y") * unit_scale;
  out.z() = tok.expect_number("offset z") * unit_scale;
}

// Parses the body of a joint block after its '{'. parent == -1 for the root.
void parse_joint_body(Tokenizer& tok, ParserState& st, int joint_index) {
  parse_offset(tok, st.skeleton.joints[joint_index].offset, st.unit_scale);

  std::string t = tok.expect("CHANNELS or a child joint");
  if (t == "CHANNELS") {
    int n = static_cast<int>(tok.expect_number("channel count"));
    if (n < 0 || n > 6) tok.fail("channel count out of range");
    JointChannels jc;
    jc.joint = joint_index;
    for (int i = 0; i < n; ++i) {
      jc.channels.push_back(
          channel_from_token(tok, tok.expect("channel token")));
    }
    st.layout.push_back(std::move(jc));
    t = tok.expect("child joint or '}'");
  }

  while (true) {
    if (t == "JOINT") {
      std::string name = tok.expect("joint name");
      Joint j;
      j.name = name;
      j.parent = joint_index;
      st.skeleton.joints.push_back(j);
      int child = static_cast<int>(st.skeleton.joints.size()) - 1;
      tok.expect_exact("{");
      parse_joint_body(tok, st, child);
    } else if (t == "End") {
      std::string site = tok.expect("'Site'");
      if (site != "Site") tok.fail("expected 'End Site'");
      tok.expect_exact("{");
      Vec3 ignored;
      parse_offset(tok, ignored, st.unit_scale);
      tok.expect_exact("}");
    } else if (t == "}") {
      return;
    } else {
      tok.fail("unexpected token '" + t + "' in joint block");
    }
    t = tok.expect("child joint or '}'");
  }
}

}  // namespace

std::pair<Skeleton, MotionClip> parse_bvh(std::istream& in,
                                          double unit_scale) {
  if (!(unit_scale > 0.0)) {
    throw DataError("bvh unit scale must be positive");
  }
  Tokenizer tok(in);
  tok.expect_exact("HIERARCHY");
  tok.expect_exact("ROOT");

  ParserState st;
  st.unit_scale = unit_scale;
  Joint root;
  root.name = tok.expect("root name");
  root.parent = -1;
  st.skeleton.joints.push_back(root);
  tok.expect_exact("{");
  parse_joint_body(tok, st, 0);

  tok.expect_exact("MOTION");
  tok.expect_exact("Frames:");
  int frame_count = static_cast<int>(tok.expect_number("frame count"));
  if (frame_count < 0) tok.fail("negative frame count");
  std::string ft = tok.expect("'Frame Time:'");
  if (ft != "Frame") tok.fail("expected 'Frame Time:', got '" + ft + "'");
  tok.expect_exact("Time:");
  double frame_time = tok.expect_number("frame time");
  if (!(frame_time > 0.0)) tok.fail("frame time must be positive");

  size_t total_channels = 0;
  for (const auto& jc : st.layout) total_channels += jc.channels.size();

  MotionClip clip;
  clip.skeleton = st.skeleton;
  clip.fps = 1.0 / frame_time;
  clip.frames.reserve(frame_count);

  size_t n_joints = st.skeleton.joints.size();
  std::vector<double> values;
  values.reserve(total_channels);
  std::string line;
  for (int f = 0; f < frame_count; ++f) {
    if (!tok.next_line(line)) {
      tok.fail("motion data ends at frame " + std::to_string(f) + " of " +
               std::to_string(frame_count));
    }
    values.clear();
    const char* p = line.c_str();
    char* end = nullptr;
    while (true) {
      double v = std::strtod(p, &end);
      if (end == p) break;
      values.push_back(v);
      p = end;
    }
    while (*p != '\0' && std::isspace(static_cast<unsigned char>(*p))) ++p;
    if (*p != '\0') {
      tok.fail("frame " + std::to_string(f) + ": unparsable value near '" +
               std::string(p).substr(0, 12) + "'");
    }
    if (values.size() != total_channels) {
      tok.fail("frame " + std::to_string(f) + ": expected " +
               std::to_string(total_channels) + " values, got " +
               std::to_string(values.size()));
    }

    Pose pose;
    pose.rotations.assign(n_joints - 1, Rotation::identity());
    size_t vi = 0;
    for (const auto& jc : st.layout) {
      Vec3 trans = Vec3::Zero();
      Rotation rot = Rotation::identity();
      for (Channel c : jc.channels) {
        double v = values[vi++];
        switch (c) {
          case Channel::kXpos:
            trans.x() += v * unit_scale;
            break;
          case Channel::kYpos:
            trans.y() += v * unit_scale;
            break;
          case Channel::kZpos:
            trans.z() += v * unit_scale;
            break;
          case Channel::kXrot:
            rot = rot * rot_x(v * kDegToRad);
            break;
          case Channel::kYrot:
            rot = rot * rot_y(v * kDegToRad);
            break;
          case Channel::kZrot:
            rot = rot * rot_z(v * kDegToRad);
            break;
        }
      }
      if (jc.joint == 0) {
        pose.root.rot = rot;
        pose.root.pos = st.skeleton.joints[0].offset + trans;
      } else {
        pose.rotations[jc.joint - 1] = rot;
        // Poses carry no per-joint translation, so interior position
        // channels are only tolerated while their values stay zero.
        if (trans.norm() > 0.0) {
          tok.fail("frame " + std::to_string(f) +
                   ": non-root translation channels are not supported");
        }
      }
    }
    clip.frames.push_back(std::move(pose));
  }
  return {st.skeleton, std::move(clip)};
}

std::pair<Skeleton, MotionClip> parse_bvh_file(const std::string& path,
                                               double unit_scale) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open bvh file '" + path + "'");
  auto out = parse_bvh(in, unit_scale);
  size_t slash = path.find_last_of('/');
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  if (base.size() > 4 && base.substr(base.size() - 4) == ".bvh") {
    base = base.substr(0, base.size() - 4);
  }
  out.second.name = base;
  return out;
}

namespace {

void write_joint(std::ostream& out, const Skeleton& s, int j,
                 const std::vector<std::vector<int>>& children,
                 double unit_scale, int depth) {
  std::string ind(depth * 2, ' ');
  const Joint& joint = s.joints[j];
  if (j == 0) {
    out << "ROOT " << joint.name << "\n";
  } else {
    out << ind << "JOINT " << joint.name << "\n";
  }
  out << ind << "{\n";
  std::string ind2((depth + 1) * 2, ' ');
  Vec3 off = joint.offset / unit_scale;
  out << ind2 << "OFFSET " << off.x() << " " << off.y() << " " << off.z()
      << "\n";
  if (j == 0) {
    out << ind2
        << "CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation "
           "Yrotation\n";
  } else {
    out << ind2 << "CHANNELS 3 Zrotation Xrotation Yrotation\n";
  }
  if (children[j].empty()) {
    out << ind2 << "End Site\n" << ind2 << "{\n";
    out << std::string((depth + 2) * 2, ' ') << "OFFSET 0 0 0\n";
    out << ind2 << "}\n";
  } else {
    for (int c : children[j]) {
      write_joint(out, s, c, children, unit_scale, depth + 1);
    }
  }
  out << ind << "}\n";
}

}  // namespace

void write_bvh(std::ostream& out, const MotionClip& clip, double unit_scale) {
  if (!(unit_scale > 0.0)) {
    throw DataError("bvh unit scale must be positive");
  }
  const Skeleton& s = clip.skeleton;
  if (s.joints.empty()) throw DataError("cannot write an empty skeleton");
  std::vector<std::vector<int>> children(s.joints.size());
  for (size_t j = 1; j < s.joints.size(); ++j) {
    children[s.joints[j].parent].push_back(static_cast<int>(j));
  }

  out << std::setprecision(10);
  out << "HIERARCHY\n";
  write_joint(out, s, 0, children, unit_scale, 0);
  out << "MOTION\n";
  out << "Frames: " << clip.frames.size() << "\n";
  out << "Frame Time: " << std::fixed << std::setprecision(10)
      << (1.0 / clip.fps) << "\n";
  out << std::setprecision(6);
  for (const Pose& p : clip.frames) {
    Vec3 pos = (p.root.pos - s.joints[0].offset) / unit_scale;
    Vec3 e = to_euler_zxy(p.root.rot) * kRadToDeg;
    out << pos.x() << " " << pos.y() << " " << pos.z() << " " << e[0] << " "
        << e[1] << " " << e[2];
    for (size_t j = 1; j < s.joints.size(); ++j) {
      Vec3 je = to_euler_zxy(p.rotations[j - 1]) * kRadToDeg;
      out << " " << je[0] << " " << je[1] << " " << je[2];
    }
    out << "\n";
  }
}

void write_bvh_file(const std::string& path, const MotionClip& clip,
                    double unit_scale) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write bvh file '" + path + "'");
  write_bvh(out, clip, unit_scale);
}

bool annotate_standard_names(Skeleton& skeleton) {
  static const char* kLower[8] = {"LHipJoint", "LeftUpLeg",  "LeftLeg",
                                  "LeftFoot",  "RHipJoint",  "RightUpLeg",
                                  "RightLeg",  "RightFoot"};
  static const char* kToes[2] = {"LeftToeBase", "RightToeBase"};
  std::array<int, 8> lower;
  std::array<int, 2> toes;
  for (int i = 0; i < 8; ++i) {
    lower[i] = skeleton.index_of(kLower[i]);
    if (lower[i] < 0) return false;
  }
  for (int i = 0; i < 2; ++i) {
    toes[i] = skeleton.index_of(kToes[i]);
    if (toes[i] < 0) return false;
  }
  int head = skeleton.index_of("Head");
  int lhand = skeleton.index_of("LeftFingerBase");
  int rhand = skeleton.index_of("RightFingerBase");
  if (lhand < 0) lhand = skeleton.index_of("LeftHand");
  if (rhand < 0) rhand = skeleton.index_of("RightHand");
  if (head < 0 || lhand < 0 || rhand < 0) return false;
  skeleton.lower_body = lower;
  skeleton.toe_bases = toes;
  skeleton.head = head;
  skeleton.left_hand = lhand;
  skeleton.right_hand = rhand;
  skeleton.validate();
  return true;
}

}  // namespace lobstr
