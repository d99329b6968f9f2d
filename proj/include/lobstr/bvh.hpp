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

#ifndef LOBSTR_BVH_HPP_
#define LOBSTR_BVH_HPP_

#include <iosfwd>
#include <string>
#include <utility>

#include "lobstr/skeleton.hpp"

namespace lobstr {

/// Parses a BVH document. Offsets and translations are multiplied by
/// unit_scale to land in meters. Rotation channels (degrees) are composed in
/// their declared order. End Site blocks are validated and consumed but not
/// retained as joints; translation channels on non-root joints add to the
/// static offset. Parse failures throw ParseError citing the input line.
///
/// The returned skeleton has no designated lower-body/toe/tracker ids; callers
/// annotate it afterwards (see annotate_standard_names or a skeleton file).
std::pair<Skeleton, MotionClip> parse_bvh(std::istream& in,
                                          double unit_scale = 1.0);
std::pair<Skeleton, MotionClip> parse_bvh_file(const std::string& path,
                                               double unit_scale = 1.0);

/// Writes a clip as BVH: root gets translation + ZXY rotation channels, every
/// other joint ZXY rotation channels, leaves a zero-offset End Site. Values
/// are divided by unit_scale on the way out.
void write_bvh(std::ostream& out, const MotionClip& clip,
               double unit_scale = 1.0);
void write_bvh_file(const std::string& path, const MotionClip& clip,
                    double unit_scale = 1.0);

/// Fills the designated joint ids by the conventional names used throughout
/// (LHipJoint, LeftUpLeg, ..., LeftToeBase, Head, LeftFingerBase, ...).
/// Returns false when any name is missing; the skeleton is untouched then.
bool annotate_standard_names(Skeleton& skeleton);

}  // namespace lobstr

#endif  // LOBSTR_BVH_HPP_
