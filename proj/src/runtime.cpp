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

#include "lobstr/runtime.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <utility>

#include <json.hpp>

#include "lobstr/bvh.hpp"
#include "lobstr/error.hpp"

namespace lobstr {

namespace {

using Clock = std::chrono::steady_clock;

double micros(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::micro>(b - a).count();
}

bool rotation_finite(const Rotation& r) { return r.m.allFinite(); }

}  // namespace

// ---------------------------------------------------------------------------
// Calibration

void Calibration::validate() const {
  if (!(height_scale > 0.0) || !std::isfinite(height_scale)) {
    throw DataError("calibration: height scale must be positive and finite");
  }
  if (!rotation_finite(head) || !rotation_finite(left_hand) ||
      !rotation_finite(right_hand) || !rotation_finite(pelvis)) {
    throw DataError("calibration: non-finite rotational offset");
  }
}

Calibration calibrate(const TrackerFrame& tpose_frame,
                      const Skeleton& skeleton) {
  if (!tpose_frame.finite()) {
    throw NumericError("calibrate: non-finite tracker frame");
  }
  if (skeleton.head < 0 || skeleton.left_hand < 0 || skeleton.right_hand < 0) {
    throw DataError("calibrate: skeleton lacks tracker joint annotations");
  }
  double tracked = tpose_frame.pelvis.pos.y();
  if (!(tracked > 0.0)) {
    throw DataError("calibrate: tracked pelvis height must be positive, got " +
                    std::to_string(tracked));
  }
  Pose reference = tpose(skeleton);
  std::vector<Transform> world = fk(skeleton, reference);
  Calibration cal;
  cal.head = tpose_frame.head.rot.inverse() * world[skeleton.head].rot;
  cal.left_hand =
      tpose_frame.left_hand.rot.inverse() * world[skeleton.left_hand].rot;
  cal.right_hand =
      tpose_frame.right_hand.rot.inverse() * world[skeleton.right_hand].rot;
  cal.pelvis = tpose_frame.pelvis.rot.inverse() * world[0].rot;
  cal.height_scale = reference.root.pos.y() / tracked;
  cal.validate();
  return cal;
}

TrackerFrame apply_calibration(const TrackerFrame& frame,
                               const Calibration& cal) {
  TrackerFrame out = frame;
  out.head.rot = frame.head.rot * cal.head;
  out.left_hand.rot = frame.left_hand.rot * cal.left_hand;
  out.right_hand.rot = frame.right_hand.rot * cal.right_hand;
  out.pelvis.rot = frame.pelvis.rot * cal.pelvis;
  out.pelvis.pos.y() *= cal.height_scale;
  return out;
}

namespace {

nlohmann::ordered_json rot_json(const Rotation& r) {
  auto a = rot_to_6d(r).to_array();
  return nlohmann::ordered_json(a);
}

Rotation rot_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 6) {
    throw DataError(what + ": rotation must be an array of 6 numbers");
  }
  double a[6];
  for (size_t i = 0; i < 6; ++i) {
    if (!j[i].is_number()) {
      throw DataError(what + ": rotation must be an array of 6 numbers");
    }
    a[i] = j[i].get<double>();
  }
  try {
    return sixdof_to_rot(SixDof::from_array(a));
  } catch (const NumericError& e) {
    throw DataError(what + ": " + e.what());
  }
}

}  // namespace

void save_calibration_json(const Calibration& cal, const std::string& path) {
  cal.validate();
  nlohmann::ordered_json j;
  j["height_scale"] = cal.height_scale;
  j["head"] = rot_json(cal.head);
  j["left_hand"] = rot_json(cal.left_hand);
  j["right_hand"] = rot_json(cal.right_hand);
  j["pelvis"] = rot_json(cal.pelvis);
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw DataError("failed writing '" + path + "'");
}

Calibration load_calibration_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open calibration file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("calibration file '" + path + "': " + e.what());
  }
  const char* keys[] = {"height_scale", "head", "left_hand", "right_hand",
                        "pelvis"};
  for (const char* k : keys) {
    if (!j.contains(k)) {
      throw DataError("calibration file '" + path + "': missing key '" +
                      std::string(k) + "'");
    }
  }
  if (!j["height_scale"].is_number()) {
    throw DataError("calibration file '" + path +
                    "': height_scale must be a number");
  }
  Calibration cal;
  cal.height_scale = j["height_scale"].get<double>();
  cal.head = rot_from_json(j["head"], "calibration head");
  cal.left_hand = rot_from_json(j["left_hand"], "calibration left_hand");
  cal.right_hand = rot_from_json(j["right_hand"], "calibration right_hand");
  cal.pelvis = rot_from_json(j["pelvis"], "calibration pelvis");
  cal.validate();
  return cal;
}

// ---------------------------------------------------------------------------
// Streaming session

void SessionConfig::validate() const { post.validate(); }

namespace {

const NetworkParams& session_checked(const NetworkParams& params) {
  params.validate();
  if (params.dims.input != FeatureVector::kSize) {
    throw DataError("session: network input width " +
                    std::to_string(params.dims.input) +
                    " does not match the feature size " +
                    std::to_string(FeatureVector::kSize));
  }
  return params;
}

}  // namespace

StreamSession::StreamSession(const NetworkParams& params,
                             const Skeleton& skeleton,
                             const SessionConfig& config)
    : net_(session_checked(params)),
      skeleton_(skeleton),
      cfg_(config),
      window_(static_cast<size_t>(FeatureWindow::kFrames) *
              FeatureVector::kSize) {
  skeleton_.validate();
  cfg_.validate();
  base_pose_ = tpose(skeleton_);
}

StepResult StreamSession::step(const TrackerFrame& calibrated) {
  auto t0 = Clock::now();
  auto held = [&]() {
    StepResult r = last_;
    r.status = StepStatus::kHeld;
    auto t = Clock::now();
    r.latency = StepLatency{micros(t0, t), 0.0, 0.0, micros(t0, t)};
    return r;
  };
  if (!calibrated.finite()) return held();
  // A finite frame whose pelvis forward is too vertical to define a heading
  // cannot enter the feature pipeline; treat it like invalid input rather
  // than killing a live stream.
  try {
    compute_reference(calibrated.pelvis);
  } catch (const NumericError&) {
    return held();
  }

  const int kW = FeatureWindow::kFrames;
  ring_[static_cast<size_t>(count_ % kWarmFrames)] = calibrated;
  if (count_ >= 1) {
    const TrackerFrame& prev =
        ring_[static_cast<size_t>((count_ - 1) % kWarmFrames)];
    rows_[static_cast<size_t>((count_ - 1) % kW)] =
        feature_vector(prev, calibrated, cfg_.ref_mode);
  }
  ++count_;

  if (count_ < kWarmFrames) {
    StepResult r;
    r.status = StepStatus::kWarmUp;
    auto t = Clock::now();
    r.latency = StepLatency{micros(t0, t), 0.0, 0.0, micros(t0, t)};
    last_ = r;
    return r;
  }

  for (int r = 0; r < kW; ++r) {
    const FeatureVector& fv =
        rows_[static_cast<size_t>((count_ - kWarmFrames + r) % kW)];
    float* dst = window_.data() + static_cast<size_t>(r) * FeatureVector::kSize;
    for (int c = 0; c < FeatureVector::kSize; ++c) {
      dst[c] = static_cast<float>(fv.x[c]);
    }
  }
  auto t1 = Clock::now();

  std::array<float, 48> pose_f{};
  std::array<float, 4> logits_f{};
  net_.forward(window_.data(), pose_f.data(), logits_f.data());
  auto t2 = Clock::now();

  StepResult out;
  try {
    std::array<double, 4> logits_d;
    for (int i = 0; i < 4; ++i) logits_d[i] = logits_f[i];
    std::array<double, 4> probs = contact_probabilities(logits_d);
    std::array<bool, 2> contacts = decide_contact(
        logits_d, last_.contacts, cfg_.post.threshold, cfg_.post.hysteresis);

    std::array<double, 48> pose_d;
    for (int i = 0; i < 48; ++i) pose_d[i] = pose_f[i];
    std::array<Rotation, 8> decoded = decode_pose48(pose_d.data());

    Pose pose = base_pose_;
    pose.root = calibrated.pelvis;
    apply_lower_body(skeleton_, decoded, pose);
    if (cfg_.postprocess) {
      PostprocessResult pr =
          postprocess_step(skeleton_, pose, contacts, feet_, cfg_.post);
      pose = std::move(pr.pose);
      feet_ = pr.state;
    }

    out.status = StepStatus::kOk;
    out.contacts = contacts;
    for (int i = 0; i < 4; ++i) {
      out.probabilities[i] = static_cast<float>(probs[i]);
    }
    for (int j = 0; j < 8; ++j) {
      out.rotations[j] = pose.rotations[skeleton_.lower_body[j] - 1];
      auto a = rot_to_6d(out.rotations[j]).to_array();
      for (int c = 0; c < 6; ++c) {
        out.pose[j * 6 + c] = static_cast<float>(a[c]);
      }
    }
  } catch (const NumericError&) {
    // A degenerate network output block cannot be delivered; the input was
    // valid (and stays buffered), so hold the previous output and stay live.
    return held();
  }
  auto t3 = Clock::now();
  out.latency = StepLatency{micros(t0, t1), micros(t1, t2), micros(t2, t3),
                            micros(t0, t3)};
  last_ = out;
  return out;
}

// ---------------------------------------------------------------------------
// Recordings

namespace {

nlohmann::ordered_json tracker_json(const Transform& t) {
  nlohmann::ordered_json j;
  j["pos"] = std::array<double, 3>{t.pos.x(), t.pos.y(), t.pos.z()};
  j["rot"] = rot_json(t.rot);
  return j;
}

Transform tracker_from_json(const nlohmann::json& line, const char* key,
                            int line_no) {
  std::string what = "recording line " + std::to_string(line_no);
  if (!line.contains(key) || !line[key].is_object()) {
    throw DataError(what + ": missing tracker object '" + key + "'");
  }
  const nlohmann::json& j = line[key];
  if (!j.contains("pos") || !j["pos"].is_array() || j["pos"].size() != 3) {
    throw DataError(what + ": '" + key + ".pos' must be an array of 3 numbers");
  }
  Transform t;
  for (size_t i = 0; i < 3; ++i) {
    if (!j["pos"][i].is_number()) {
      throw DataError(what + ": '" + key +
                      ".pos' must be an array of 3 numbers");
    }
    t.pos[static_cast<int>(i)] = j["pos"][i].get<double>();
  }
  if (!j.contains("rot")) {
    throw DataError(what + ": missing '" + std::string(key) + ".rot'");
  }
  t.rot = rot_from_json(j["rot"], what + ": '" + key + ".rot'");
  return t;
}

}  // namespace

void save_recording(const std::vector<TrackerFrame>& frames,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  for (size_t i = 0; i < frames.size(); ++i) {
    const TrackerFrame& f = frames[i];
    if (!f.finite()) {
      throw NumericError("recording frame " + std::to_string(i) +
                         " is not finite");
    }
    nlohmann::ordered_json j;
    j["frame"] = i;
    j["time"] = f.timestamp;
    j["head"] = tracker_json(f.head);
    j["left_hand"] = tracker_json(f.left_hand);
    j["right_hand"] = tracker_json(f.right_hand);
    j["pelvis"] = tracker_json(f.pelvis);
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

std::vector<TrackerFrame> load_recording(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open recording '" + path + "'");
  std::vector<TrackerFrame> frames;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    bool blank = true;
    for (char c : line) {
      if (c != ' ' && c != '\t' && c != '\r') {
        blank = false;
        break;
      }
    }
    if (blank) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("recording line " + std::to_string(line_no) + ": " +
                       e.what());
    }
    std::string what = "recording line " + std::to_string(line_no);
    if (!j.is_object()) throw DataError(what + ": expected an object");
    if (!j.contains("frame") || !j["frame"].is_number_integer()) {
      throw DataError(what + ": missing integer 'frame'");
    }
    int64_t id = j["frame"].get<int64_t>();
    if (id != static_cast<int64_t>(frames.size())) {
      throw DataError(what + ": frame id " + std::to_string(id) +
                      " out of order (expected " +
                      std::to_string(frames.size()) + ")");
    }
    TrackerFrame f;
    f.timestamp = 0.0;
    if (j.contains("time")) {
      if (!j["time"].is_number()) {
        throw DataError(what + ": 'time' must be a number");
      }
      f.timestamp = j["time"].get<double>();
    }
    f.head = tracker_from_json(j, "head", line_no);
    f.left_hand = tracker_from_json(j, "left_hand", line_no);
    f.right_hand = tracker_from_json(j, "right_hand", line_no);
    f.pelvis = tracker_from_json(j, "pelvis", line_no);
    frames.push_back(f);
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Wire protocol

namespace {

void put_u32(uint8_t* p, uint32_t v) {
  p[0] = static_cast<uint8_t>(v & 0xff);
  p[1] = static_cast<uint8_t>((v >> 8) & 0xff);
  p[2] = static_cast<uint8_t>((v >> 16) & 0xff);
  p[3] = static_cast<uint8_t>((v >> 24) & 0xff);
}

uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

void put_f32(uint8_t* p, float f) { put_u32(p, std::bit_cast<uint32_t>(f)); }

float get_f32(const uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

void put_tracker(uint8_t* p, const Transform& t) {
  put_f32(p + 0, static_cast<float>(t.pos.x()));
  put_f32(p + 4, static_cast<float>(t.pos.y()));
  put_f32(p + 8, static_cast<float>(t.pos.z()));
  auto a = rot_to_6d(t.rot).to_array();
  for (int i = 0; i < 6; ++i) {
    put_f32(p + 12 + 4 * i, static_cast<float>(a[i]));
  }
}

Transform get_tracker(const uint8_t* p) {
  float v[9];
  bool finite = true;
  for (int i = 0; i < 9; ++i) {
    v[i] = get_f32(p + 4 * i);
    finite = finite && std::isfinite(v[i]);
  }
  Transform t;
  if (!finite) {
    // Poison the transform so the session's held-output path takes over;
    // never run the axis decoder on garbage.
    t.pos = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
    return t;
  }
  t.pos = Vec3(v[0], v[1], v[2]);
  double a[6];
  for (int i = 0; i < 6; ++i) a[i] = v[3 + i];
  try {
    t.rot = sixdof_to_rot(SixDof::from_array(a));
  } catch (const NumericError&) {
    // Degenerate axes: same held-output treatment as non-finite input.
    t.pos = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
  }
  return t;
}

}  // namespace

void encode_request(uint32_t frame_id, const TrackerFrame& frame,
                    uint8_t* out) {
  out[0] = 'L';
  out[1] = 'B';
  out[2] = 'S';
  out[3] = 'T';
  out[4] = kWireVersion;
  put_u32(out + 5, frame_id);
  put_tracker(out + 9, frame.head);
  put_tracker(out + 45, frame.left_hand);
  put_tracker(out + 81, frame.right_hand);
  put_tracker(out + 117, frame.pelvis);
}

uint32_t decode_request(const uint8_t* in, TrackerFrame* frame) {
  if (in[0] != 'L' || in[1] != 'B' || in[2] != 'S' || in[3] != 'T') {
    throw ParseError("request: bad magic");
  }
  if (in[4] != kWireVersion) {
    throw ParseError("request: unsupported protocol version " +
                     std::to_string(static_cast<int>(in[4])));
  }
  uint32_t id = get_u32(in + 5);
  frame->head = get_tracker(in + 9);
  frame->left_hand = get_tracker(in + 45);
  frame->right_hand = get_tracker(in + 81);
  frame->pelvis = get_tracker(in + 117);
  frame->timestamp = static_cast<double>(id) / 45.0;
  return id;
}

void encode_response(uint32_t frame_id, uint8_t status, const StepResult& r,
                     uint8_t* out) {
  put_u32(out, frame_id);
  out[4] = status;
  for (int i = 0; i < 48; ++i) put_f32(out + 5 + 4 * i, r.pose[i]);
  for (int i = 0; i < 4; ++i) put_f32(out + 197 + 4 * i, r.probabilities[i]);
  out[213] = r.contacts[0] ? 1 : 0;
  out[214] = r.contacts[1] ? 1 : 0;
}

WireResponse decode_response(const uint8_t* in) {
  WireResponse r;
  r.frame_id = get_u32(in);
  r.status = in[4];
  for (int i = 0; i < 48; ++i) r.pose[i] = get_f32(in + 5 + 4 * i);
  for (int i = 0; i < 4; ++i) r.probabilities[i] = get_f32(in + 197 + 4 * i);
  r.contacts[0] = in[213] != 0;
  r.contacts[1] = in[214] != 0;
  return r;
}

TrackerFrame quantize_to_wire(uint32_t frame_id, const TrackerFrame& frame) {
  std::array<uint8_t, kWireRequestSize> buf;
  encode_request(frame_id, frame, buf.data());
  TrackerFrame out;
  decode_request(buf.data(), &out);
  return out;
}

// ---------------------------------------------------------------------------
// Offline replay

void ReplayOptions::validate() const {
  session.validate();
  calibration.validate();
  if (!(fps > 0.0) || !std::isfinite(fps)) {
    throw DataError("replay: fps must be positive and finite");
  }
  if (dims.input <= 0 || dims.hidden <= 0 || dims.latent <= 0) {
    throw DataError("replay: invalid network dimensions");
  }
}

ReplayStats replay(const std::string& recording_path,
                   const std::string& checkpoint_path,
                   const std::string& output_path,
                   const ReplayOptions& options) {
  options.validate();
  std::vector<TrackerFrame> frames = load_recording(recording_path);
  NetworkParams params = load_params(checkpoint_path, options.dims);
  Skeleton skeleton = standard_skeleton();
  StreamSession session(params, skeleton, options.session);

  std::ofstream out(output_path);
  if (!out) throw DataError("cannot open '" + output_path + "' for writing");

  MotionClip grafted;
  const bool want_bvh = !options.bvh_path.empty();
  if (want_bvh) {
    grafted.skeleton = skeleton;
    grafted.fps = options.fps;
    grafted.name = "replay";
    grafted.category = Category::kOther;
  }
  Pose base = tpose(skeleton);

  ReplayStats stats;
  stats.frames_in = static_cast<int64_t>(frames.size());
  for (size_t i = 0; i < frames.size(); ++i) {
    TrackerFrame wire = quantize_to_wire(static_cast<uint32_t>(i), frames[i]);
    TrackerFrame cal = apply_calibration(wire, options.calibration);
    StepResult r = session.step(cal);
    if (r.status == StepStatus::kWarmUp) continue;
    nlohmann::ordered_json j;
    j["frame"] = i;
    j["status"] = r.status == StepStatus::kOk ? "ok" : "held";
    {
      std::array<double, 48> pose;
      for (int k = 0; k < 48; ++k) pose[k] = r.pose[k];
      j["pose"] = pose;
      std::array<double, 4> probs;
      for (int k = 0; k < 4; ++k) probs[k] = r.probabilities[k];
      j["probabilities"] = probs;
      j["contacts"] = std::array<bool, 2>{r.contacts[0], r.contacts[1]};
    }
    out << j.dump() << '\n';
    ++stats.poses_out;
    if (want_bvh) {
      Pose p = base;
      p.root = cal.pelvis;
      apply_lower_body(skeleton, r.rotations, p);
      grafted.frames.push_back(std::move(p));
    }
  }
  if (!out) throw DataError("failed writing '" + output_path + "'");
  out.close();
  if (want_bvh) write_bvh_file(options.bvh_path, grafted);
  return stats;
}

}  // namespace lobstr
