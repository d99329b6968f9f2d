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

#ifndef LOBSTR_DATASET_HPP_
#define LOBSTR_DATASET_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lobstr/feature.hpp"
#include "lobstr/skeleton.hpp"

namespace lobstr {

/// One prepared clip, kept in its serialized precision (32-bit floats) so
/// that saving what was loaded reproduces the file byte for byte.
/// Per frame: 4 tracker transforms (position 3 + forward/up 6 each, order
/// head, left hand, right hand, pelvis), 48 pose targets, 2 contact labels.
struct DatasetClip {
  std::string name;
  Category category = Category::kOther;
  uint64_t noise_seed = 0;
  std::vector<std::array<float, 36>> trackers;
  std::vector<std::array<float, 48>> targets;
  std::vector<std::array<uint8_t, 2>> contacts;

  size_t frames() const { return trackers.size(); }

  /// Decodes one frame's trackers (Gram-Schmidt on the stored axes).
  TrackerFrame tracker_frame(size_t i, double fps) const;
};

struct Dataset {
  double fps = 45.0;
  Skeleton skeleton;
  std::vector<DatasetClip> clips;

  size_t total_frames() const;
  std::array<size_t, 4> category_frames() const;  // by Category order
};

struct DatasetConfig {
  uint64_t noise_seed = 1;  // clip k is augmented with seed noise_seed + k
  bool add_noise = true;
  double pos_sigma = 0.01;
  double max_rot_deg = 1.5;
};

/// Packs prepared clips (already 45 fps, retargeted, annotated) into a
/// dataset: synthesized trackers with optional noise, pose targets, and
/// contact labels (labeled on the clean motion). Throws DataError on an
/// empty clip list, a clip shorter than 46 frames, or mismatched skeletons.
Dataset build_dataset(const std::vector<MotionClip>& clips,
                      const DatasetConfig& config);

/// Writes manifest.json plus one .bin per clip into dir (created if needed).
void save_dataset(const Dataset& dataset, const std::string& dir);

/// Loads a dataset from a directory containing manifest.json (or a direct
/// path to the manifest file).
Dataset load_dataset(const std::string& path);

}  // namespace lobstr

#endif  // LOBSTR_DATASET_HPP_
