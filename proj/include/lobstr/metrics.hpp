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

#ifndef LOBSTR_METRICS_HPP_
#define LOBSTR_METRICS_HPP_

// Evaluation metrics and report emission: contact-label accuracy, per-joint
// rotational error, toe-base positional error, toe-base distance error with
// a per-category breakdown, and the body-movement statistic that flags
// over-smoothed (collapsed) output motion.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lobstr/geometry.hpp"
#include "lobstr/skeleton.hpp"

namespace lobstr {

/// Toe-base distance error broken down by motion category, mirroring the
/// per-category rows of an evaluation table plus a frame-weighted total.
/// Slots follow the Category enum order; empty categories report 0 error.
struct CategoryBreakdown {
  std::array<int64_t, 4> frames{};
  std::array<double, 4> error_cm{};
  int64_t total_frames = 0;
  double total_cm = 0.0;
};

/// One evaluation run, ready for JSON emission.
struct MetricsReport {
  std::string config_hash;    // hash of the config the run used
  std::string checkpoint_id;  // identifies the evaluated checkpoint
  std::string dataset_hash;   // hash of the dataset manifest
  int64_t frames = 0;

  double contact_accuracy = 0.0;      // fraction of correct labels, [0, 1]
  double rotational_error_deg = 0.0;  // mean geodesic error per joint
  double positional_error_cm = 0.0;   // mean toe-base error over both feet
  CategoryBreakdown toe_distance;     // |toe gap pred - toe gap gt| per class
  double body_movement_deg = 0.0;     // mean summed joint update per frame

  /// Throws DataError when a fraction leaves [0, 1], an error is negative
  /// or non-finite, or the per-category frame counts don't sum to the total.
  void validate() const;
};

/// Fraction of matching per-foot labels over 2N comparisons.
/// Throws DataError on length mismatch or empty streams.
double contact_accuracy(const std::vector<std::array<bool, 2>>& pred,
                        const std::vector<std::array<bool, 2>>& gt);

/// Mean geodesic angle between corresponding joint rotations, in degrees.
double rotational_error_deg(const std::array<Rotation, 8>& pred,
                            const std::array<Rotation, 8>& gt);

/// 48-channel overload; decodes both sides first.
/// Throws NumericError when either side fails to decode.
double rotational_error_deg(const std::array<double, 48>& pred,
                            const std::array<double, 48>& gt);

/// Both poses are FK-evaluated with the ground-truth root; returns the mean
/// Euclidean toe-base distance over the two feet, in centimetres.
double positional_error_cm(const std::array<Rotation, 8>& pred,
                           const std::array<Rotation, 8>& gt,
                           const Transform& gt_root, const Skeleton& skeleton);

/// World positions of the two toe bases (left, right) under FK.
std::array<Vec3, 2> toe_positions(const Skeleton& skeleton, const Pose& pose);

/// Per frame |  ||L-R||_pred - ||L-R||_gt  | in centimetres, averaged per
/// category and overall. Inputs are metres; all three streams must be
/// frame-aligned (DataError otherwise).
CategoryBreakdown toe_base_distance_error(
    const std::vector<std::array<Vec3, 2>>& pred,
    const std::vector<std::array<Vec3, 2>>& gt,
    const std::vector<Category>& categories);

/// Mean over frame transitions of the summed per-joint geodesic update,
/// in degrees per frame. Throws DataError on fewer than 2 frames.
double body_movement_deg(const std::vector<std::array<Rotation, 8>>& stream);

/// FNV-1a 64-bit hash as a 16-digit lowercase hex string.
std::string hash_bytes(const void* data, size_t n);

/// Hash of a file's contents. Throws DataError when unreadable.
std::string hash_file(const std::string& path);

/// Writes the report as JSON with a stable key order, so identical runs
/// produce byte-identical files. Throws DataError on an unwritable path.
void emit_report(const MetricsReport& report, const std::string& path);

/// Parses a report back. Throws ParseError on malformed JSON and DataError
/// on schema violations; the result is validate()d.
MetricsReport load_report(const std::string& path);

}  // namespace lobstr

#endif  // LOBSTR_METRICS_HPP_
