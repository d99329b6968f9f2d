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

#ifndef LOBSTR_RUNTIME_HPP_
#define LOBSTR_RUNTIME_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lobstr/feature.hpp"
#include "lobstr/geometry.hpp"
#include "lobstr/network.hpp"
#include "lobstr/postprocess.hpp"
#include "lobstr/skeleton.hpp"

namespace lobstr {

// ---------------------------------------------------------------------------
// Calibration

/// Per-tracker rotational offsets plus the user's height scale, captured from
/// a single T-pose frame. Offsets right-multiply the raw tracker orientations
/// so that, at the calibration instant, each corrected orientation equals the
/// matching skeleton joint's T-pose orientation.
struct Calibration {
  Rotation head;
  Rotation left_hand;
  Rotation right_hand;
  Rotation pelvis;
  double height_scale = 1.0;

  /// Throws DataError on a non-positive or non-finite scale or a non-finite
  /// offset.
  void validate() const;
};

/// Offsets from one stationary T-pose frame: per tracker,
/// inverse(tracked orientation) * skeleton T-pose joint orientation; the
/// height scale is the skeleton's T-pose pelvis height over the tracked
/// pelvis height. Throws DataError when the tracked pelvis height is not
/// positive or the skeleton lacks tracker annotations, NumericError on a
/// non-finite frame.
Calibration calibrate(const TrackerFrame& tpose_frame,
                      const Skeleton& skeleton);

/// Right-multiplies each orientation by its offset and scales the pelvis
/// height (world Y) by the height scale, so downstream feature assembly sees
/// the reference height mapped onto the skeleton's scale. Hand and head
/// positions are left untouched; velocity scaling is deliberately not done.
TrackerFrame apply_calibration(const TrackerFrame& frame,
                               const Calibration& cal);

void save_calibration_json(const Calibration& cal, const std::string& path);
Calibration load_calibration_json(const std::string& path);

// ---------------------------------------------------------------------------
// Streaming session

enum class StepStatus : uint8_t {
  kOk = 0,      // pose delivered
  kWarmUp = 1,  // buffering; no pose yet
  kHeld = 2,    // invalid input frame; previous output repeated
};

/// Wall-clock cost of one step, split by stage. The three stage entries
/// cover buffer/feature assembly, the network forward pass, and contact
/// decision + post-processing + re-encoding; total_us is measured across the
/// whole step with the same clock.
struct StepLatency {
  double feature_us = 0.0;
  double forward_us = 0.0;
  double postprocess_us = 0.0;
  double total_us = 0.0;
};

struct StepResult {
  StepStatus status = StepStatus::kWarmUp;
  /// Delivered lower-body pose, re-encoded as 8 forward/up blocks. With
  /// post-processing enabled these are the IK-adjusted rotations; disabled,
  /// the decoded network prediction. Zero while warming up.
  std::array<float, 48> pose{};
  /// Per-foot (no-contact, contact) probabilities, order left then right.
  std::array<float, 4> probabilities{};
  std::array<bool, 2> contacts{};
  /// The same delivered rotations, decoded, for programmatic consumers.
  std::array<Rotation, 8> rotations{};
  StepLatency latency;
};

struct SessionConfig {
  PostprocessConfig post;
  bool postprocess = true;  // disable for raw-network A/B runs
  RefAngular ref_mode = RefAngular::kRelative;

  void validate() const;  // delegates to post.validate()
};

/// Real-time inference loop over calibrated tracker frames: keeps the last
/// 46 accepted frames (45 velocity steps need one extra predecessor), runs
/// the float32 forward path once warm, and maintains the per-foot contact
/// machines across frames. Deterministic: output depends only on the
/// parameters, the config, and the frames accepted so far.
class StreamSession {
 public:
  static constexpr int kWarmFrames = FeatureWindow::kFrames + 1;  // 46

  /// Throws DataError on an unvalidatable skeleton or config.
  StreamSession(const NetworkParams& params, const Skeleton& skeleton,
                const SessionConfig& config = SessionConfig{});

  /// Feeds one calibrated frame. Non-finite input rejects the frame (it is
  /// not buffered) and returns the previous output with status kHeld.
  StepResult step(const TrackerFrame& calibrated);

  bool warm() const { return count_ >= kWarmFrames; }
  int64_t frames_accepted() const { return count_; }
  const std::array<FootState, 2>& foot_state() const { return feet_; }

 private:
  FastNet net_;
  Skeleton skeleton_;
  SessionConfig cfg_;
  Pose base_pose_;
  std::array<TrackerFrame, kWarmFrames> ring_;
  std::array<FeatureVector, FeatureWindow::kFrames> rows_;
  int64_t count_ = 0;
  std::array<FootState, 2> feet_{};
  StepResult last_;
  std::vector<float> window_;  // scratch, [45 x input] row-major
};

// ---------------------------------------------------------------------------
// Tracker recordings (JSON Lines)

/// One frame per line:
///   {"frame": 0, "time": 0.0,
///    "head": {"pos": [x,y,z], "rot": [fx,fy,fz,ux,uy,uz]}, "left_hand": ...,
///    "right_hand": ..., "pelvis": ...}
/// with rotations as forward/up axis pairs. Loading re-orthonormalizes the
/// axes; malformed JSON raises ParseError and schema violations DataError,
/// both citing the 1-based line number.
void save_recording(const std::vector<TrackerFrame>& frames,
                    const std::string& path);
std::vector<TrackerFrame> load_recording(const std::string& path);

// ---------------------------------------------------------------------------
// Wire protocol
//
// Request (153 bytes): magic "LBST", version byte, frame id (u32 LE), then
// 4 trackers x 9 little-endian f32 (position xyz + forward/up axes), order
// head, left hand, right hand, pelvis.
// Response (215 bytes): frame id (u32 LE), status byte (StepStatus values,
// 3 = protocol error), 48 f32 pose, 4 f32 contact probabilities, 2 contact
// bytes (left, right; 0/1).

inline constexpr uint8_t kWireVersion = 1;
inline constexpr size_t kWireRequestSize = 4 + 1 + 4 + 4 * 9 * 4;
inline constexpr size_t kWireResponseSize = 4 + 1 + 48 * 4 + 4 * 4 + 2;
inline constexpr uint8_t kWireStatusError = 3;

void encode_request(uint32_t frame_id, const TrackerFrame& frame,
                    uint8_t* out);
/// Throws ParseError on bad magic or version. Non-finite payloads yield a
/// frame whose finite() is false (the session then holds); a finite but
/// degenerate axis pair propagates NumericError from the decoder.
uint32_t decode_request(const uint8_t* in, TrackerFrame* frame);

void encode_response(uint32_t frame_id, uint8_t status, const StepResult& r,
                     uint8_t* out);

struct WireResponse {
  uint32_t frame_id = 0;
  uint8_t status = 0;
  std::array<float, 48> pose{};
  std::array<float, 4> probabilities{};
  std::array<bool, 2> contacts{};
};
WireResponse decode_response(const uint8_t* in);

/// Round-trips a frame through the request codec so offline inputs carry
/// exactly the float32 precision the socket path delivers; offline replay
/// and the server feed sessions through this same funnel, which is what
/// makes the two transports bit-identical.
TrackerFrame quantize_to_wire(uint32_t frame_id, const TrackerFrame& frame);

// ---------------------------------------------------------------------------
// Offline replay

struct ReplayOptions {
  SessionConfig session;
  Calibration calibration;  // identity by default
  NetDims dims;             // expected checkpoint shape
  std::string bvh_path;     // non-empty: also write a grafted BVH
  double fps = 45.0;

  void validate() const;
};

struct ReplayStats {
  int64_t frames_in = 0;
  int64_t poses_out = 0;
};

/// Streams a recording through a fresh session and writes one JSON line per
/// delivered frame: {"frame": id, "status": "ok"|"held", "pose": [48],
/// "probabilities": [4], "contacts": [l, r]}. The numeric payload is
/// serialized at float32 precision, matching the socket transport. With
/// bvh_path set, also writes the delivered lower body grafted onto the
/// skeleton with the tracker-driven root. An empty recording yields an empty
/// output file.
ReplayStats replay(const std::string& recording_path,
                   const std::string& checkpoint_path,
                   const std::string& output_path,
                   const ReplayOptions& options = ReplayOptions{});

// ---------------------------------------------------------------------------
// TCP service

/// Single-client, sequential server: accept one connection, answer one
/// response per request until the peer disconnects. A fresh StreamSession is
/// created per connection (each client warms up independently). Requests are
/// raw tracker frames; calibration is applied server-side.
class Server {
 public:
  /// Throws DataError on bad inputs (skeleton, config, calibration).
  Server(const NetworkParams& params, const Skeleton& skeleton,
         const SessionConfig& config = SessionConfig{},
         const Calibration& calibration = Calibration{});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds on 127.0.0.1; port 0 picks an ephemeral port. Returns the bound
  /// port. Throws Error on socket failures.
  uint16_t listen(uint16_t port);

  /// Accepts and serves one client to completion. Returns false when the
  /// accept wait times out (timeout_ms >= 0) without a connection. A short
  /// read, a protocol error, or a disconnect ends the client without
  /// throwing.
  bool serve_one_client(int accept_timeout_ms = -1);

  void close();

 private:
  NetworkParams params_;
  Skeleton skeleton_;
  SessionConfig cfg_;
  Calibration cal_;
  int listen_fd_ = -1;
};

}  // namespace lobstr

#endif  // LOBSTR_RUNTIME_HPP_
