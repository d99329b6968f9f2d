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

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include <array>

namespace lobstr {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// A rotation stored as a right-handed orthonormal 3x3 matrix.
/// Columns are the rotated X/Y/Z basis vectors.
struct Rotation {
  Mat3 m = Mat3::Identity();

  Rotation() = default;
  explicit Rotation(const Mat3& mat) : m(mat) {}

  static Rotation identity() { return Rotation(); }

  Rotation inverse() const { return Rotation(m.transpose()); }
  Rotation operator*(const Rotation& o) const { return Rotation(m * o.m); }
  Vec3 operator*(const Vec3& v) const { return m * v; }

  bool approx_equal(const Rotation& o, double tol) const {
    return (m - o.m).cwiseAbs().maxCoeff() <= tol;
  }

  /// Max deviation from orthonormality: ||R^T R - I||_inf plus det defect.
  double orthonormal_defect() const;
};

Rotation rot_x(double rad);
Rotation rot_y(double rad);
Rotation rot_z(double rad);

/// Axis-angle exponential map; w encodes axis * angle in radians.
Rotation exp_map(const Vec3& w);

/// Inverse of exp_map; returns axis * angle with angle in [0, pi].
Vec3 log_map(const Rotation& r);

Rotation from_axis_angle(const Vec3& axis, double rad);

/// Geodesic angle between two rotations, radians in [0, pi].
double geodesic_angle(const Rotation& a, const Rotation& b);

/// Shortest-arc spherical interpolation, t in [0, 1].
Rotation slerp(const Rotation& a, const Rotation& b, double t);

/// Forward/up axis pair encoding a rotation in 6 scalars [forward, up].
/// Forward is the rotated Z axis, up the rotated Y axis.
struct SixDof {
  Vec3 forward{0.0, 0.0, 1.0};
  Vec3 up{0.0, 1.0, 0.0};

  static SixDof identity() { return SixDof{}; }

  std::array<double, 6> to_array() const {
    return {forward.x(), forward.y(), forward.z(), up.x(), up.y(), up.z()};
  }
  static SixDof from_array(const double* v) {
    return SixDof{Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5])};
  }
};

/// Reads the forward (Z) and up (Y) columns of the rotation matrix.
SixDof rot_to_6d(const Rotation& r);

/// Gram-Schmidt decode: forward is normalized first, up is made orthogonal
/// to it, right completes the right-handed frame. Accepts non-orthonormal
/// input; throws NumericError on parallel or near-zero vectors.
Rotation sixdof_to_rot(const SixDof& v);

/// Rigid transform: rotation then translation.
struct Transform {
  Rotation rot;
  Vec3 pos = Vec3::Zero();

  static Transform identity() { return Transform{}; }

  Transform operator*(const Transform& o) const {
    return Transform{rot * o.rot, pos + rot * o.pos};
  }
  Vec3 operator*(const Vec3& v) const { return pos + rot * v; }
  Transform inverse() const {
    Rotation ri = rot.inverse();
    return Transform{ri, -(ri * pos)};
  }
  bool finite() const {
    return m_finite(rot.m) && pos.allFinite();
  }

 private:
  static bool m_finite(const Mat3& m) { return m.allFinite(); }
};

enum class Axis { X, Y, Z };

Rotation rot_about(Axis a, double rad);

/// Composes elementary rotations in the listed order (leftmost first), the
/// convention BVH channel lists use.
Rotation euler_compose(const Axis* axes, const double* rad, int n);

/// Decomposes r into Z-X-Y angles such that
/// rot_z(z) * rot_x(x) * rot_y(y) == r. Returns (z, x, y) in radians.
/// Near gimbal lock (|sin x| ~ 1) the y angle is fixed to zero.
Vec3 to_euler_zxy(const Rotation& r);

}  // namespace lobstr
