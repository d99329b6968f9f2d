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

#include "lobstr/geometry.hpp"

#include <cmath>

#include "lobstr/error.hpp"

namespace lobstr {

double Rotation::orthonormal_defect() const {
  Mat3 g = m.transpose() * m - Mat3::Identity();
  double d = g.cwiseAbs().maxCoeff();
  return std::max(d, std::abs(m.determinant() - 1.0));
}

Rotation rot_x(double rad) {
  double c = std::cos(rad), s = std::sin(rad);
  Mat3 m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return Rotation(m);
}

Rotation rot_y(double rad) {
  double c = std::cos(rad), s = std::sin(rad);
  Mat3 m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return Rotation(m);
}

Rotation rot_z(double rad) {
  double c = std::cos(rad), s = std::sin(rad);
  Mat3 m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return Rotation(m);
}

Rotation rot_about(Axis a, double rad) {
  switch (a) {
    case Axis::X:
      return rot_x(rad);
    case Axis::Y:
      return rot_y(rad);
    default:
      return rot_z(rad);
  }
}

Rotation exp_map(const Vec3& w) {
  double angle = w.norm();
  Mat3 k;
  k << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  if (angle < 1e-12) {
    // Second-order series keeps the result orthonormal to machine precision.
    return Rotation(Mat3(Mat3::Identity() + k + 0.5 * (k * k)));
  }
  double a = std::sin(angle) / angle;
  double b = (1.0 - std::cos(angle)) / (angle * angle);
  return Rotation(Mat3(Mat3::Identity() + a * k + b * (k * k)));
}

Vec3 log_map(const Rotation& r) {
  const Mat3& m = r.m;
  Vec3 skew(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  // atan2 of (sin, cos) read straight off the matrix is well conditioned
  // everywhere, unlike acos of the trace near pi.
  double s = 0.5 * skew.norm();
  double c = std::clamp((m.trace() - 1.0) * 0.5, -1.0, 1.0);
  double angle = std::atan2(s, c);
  if (angle < 1e-10) {
    return 0.5 * skew;
  }
  if (angle > M_PI - 1e-4) {
    // Near pi the skew part vanishes; recover the axis from the symmetric
    // part via its largest diagonal element.
    Mat3 s = 0.5 * (m + Mat3::Identity());
    int i = 0;
    if (s(1, 1) > s(0, 0)) i = 1;
    if (s(2, 2) > s(i, i)) i = 2;
    Vec3 axis;
    axis[i] = std::sqrt(std::max(s(i, i), 0.0));
    for (int j = 0; j < 3; ++j) {
      if (j != i) axis[j] = s(i, j) / axis[i];
    }
    axis.normalize();
    // Pick the sign consistent with the (possibly tiny) skew part.
    if (axis.dot(skew) < 0.0) axis = -axis;
    return axis * angle;
  }
  return (angle / (2.0 * s)) * skew;
}

Rotation from_axis_angle(const Vec3& axis, double rad) {
  double n = axis.norm();
  if (n < 1e-12) {
    throw NumericError("from_axis_angle: zero axis");
  }
  return exp_map(axis * (rad / n));
}

double geodesic_angle(const Rotation& a, const Rotation& b) {
  double cos_a =
      std::clamp(((a.m.transpose() * b.m).trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(cos_a);
}

Rotation slerp(const Rotation& a, const Rotation& b, double t) {
  Vec3 w = log_map(Rotation(a.m.transpose() * b.m));
  return a * exp_map(t * w);
}

SixDof rot_to_6d(const Rotation& r) {
  return SixDof{r.m.col(2), r.m.col(1)};
}

Rotation sixdof_to_rot(const SixDof& v) {
  double fn = v.forward.norm();
  if (fn < 1e-8) {
    throw NumericError("sixdof_to_rot: near-zero forward vector");
  }
  Vec3 f = v.forward / fn;
  Vec3 u = v.up - v.up.dot(f) * f;
  double un = u.norm();
  if (un < 1e-8) {
    throw NumericError("sixdof_to_rot: up vector parallel to forward");
  }
  u /= un;
  Vec3 r = u.cross(f);
  Mat3 m;
  m.col(0) = r;
  m.col(1) = u;
  m.col(2) = f;
  return Rotation(m);
}

Rotation euler_compose(const Axis* axes, const double* rad, int n) {
  Rotation r;
  for (int i = 0; i < n; ++i) {
    r = r * rot_about(axes[i], rad[i]);
  }
  return r;
}

Vec3 to_euler_zxy(const Rotation& r) {
  // R = Rz(z) * Rx(x) * Ry(y):
  //   R(2,1) = sin x
  //   R(2,0) = -cos x sin y,  R(2,2) = cos x cos y
  //   R(0,1) = -sin z cos x,  R(1,1) = cos z cos x
  const Mat3& m = r.m;
  double sx = std::clamp(m(2, 1), -1.0, 1.0);
  double x = std::asin(sx);
  if (std::abs(sx) > 1.0 - 1e-9) {
    // Gimbal lock: y and z are coupled; fix y = 0.
    double z = std::atan2(m(1, 0), m(0, 0));
    return Vec3(z, x, 0.0);
  }
  double y = std::atan2(-m(2, 0), m(2, 2));
  double z = std::atan2(-m(0, 1), m(1, 1));
  return Vec3(z, x, y);
}

}  // namespace lobstr
