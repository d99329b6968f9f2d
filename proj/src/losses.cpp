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

#include "lobstr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lobstr/error.hpp"

namespace lobstr {

void LossWeights::validate() const {
  struct {
    const char* name;
    double v;
  } parts[] = {{"pose", pose},
               {"fk", fk},
               {"velocity", velocity},
               {"contact", contact}};
  for (const auto& p : parts) {
    if (!(std::isfinite(p.v) && p.v >= 0.0)) {
      throw DataError(std::string("loss weight '") + p.name +
                      "' must be finite and non-negative");
    }
  }
}

double total_loss(const LossComponents& c, const LossWeights& w) {
  struct {
    const char* name;
    double v;
  } parts[] = {{"pose", c.pose},
               {"fk", c.fk},
               {"velocity", c.velocity},
               {"contact_left", c.contact_left},
               {"contact_right", c.contact_right}};
  for (const auto& p : parts) {
    if (!std::isfinite(p.v)) {
      throw NumericError(std::string("total_loss: non-finite ") + p.name +
                         " component");
    }
  }
  return w.pose * c.pose + w.fk * c.fk + w.velocity * c.velocity +
         0.5 * w.contact * (c.contact_left + c.contact_right);
}

FkContext make_fk_context(const Skeleton& skeleton) {
  for (int id : skeleton.lower_body) {
    if (id < 0) throw DataError("skeleton lacks lower-body annotations");
  }
  for (int id : skeleton.toe_bases) {
    if (id < 0) throw DataError("skeleton lacks toe-base annotations");
  }
  FkContext ctx;
  for (int side = 0; side < 2; ++side) {
    for (int j : skeleton.leg_chain(side)) {
      auto it = std::find(skeleton.lower_body.begin(),
                          skeleton.lower_body.end(), j);
      int slot = static_cast<int>(it - skeleton.lower_body.begin());
      ctx.chains[side].push_back({slot, skeleton.joints[j].offset});
    }
    ctx.toe_offsets[side] = skeleton.joints[skeleton.toe_bases[side]].offset;
  }
  return ctx;
}

Vec3 toe_position(const double* pose48, const Transform& root,
                  const FkContext& ctx, int side) {
  Transform t = root;
  for (const auto& link : ctx.chains[side]) {
    Rotation r = sixdof_to_rot(SixDof::from_array(pose48 + 6 * link.slot));
    t = t * Transform{r, link.offset};
  }
  return t * ctx.toe_offsets[side];
}

double loss_pose(const double* pred48, const double* target48) {
  double s = 0.0;
  for (int i = 0; i < 48; ++i) s += std::abs(pred48[i] - target48[i]);
  return s / 48.0;
}

double loss_fk(const double* pred48, const double* target48,
               const Transform& root, const FkContext& ctx) {
  double total = 0.0;
  for (int side = 0; side < 2; ++side) {
    Vec3 p = toe_position(pred48, root, ctx, side);
    Vec3 q = toe_position(target48, root, ctx, side);
    total += (p - q).norm();
  }
  return 0.5 * total;
}

double loss_fk(const double* pred48, const double* target48,
               const Transform& root, const Skeleton& skeleton) {
  return loss_fk(pred48, target48, root, make_fk_context(skeleton));
}

double loss_velocity(const double* pred48, const double* target48,
                     const double* prev_target48, const Transform& root,
                     const Transform& prev_root, const FkContext& ctx) {
  double total = 0.0;
  for (int side = 0; side < 2; ++side) {
    Vec3 p_pred = toe_position(pred48, root, ctx, side);
    Vec3 p_tgt = toe_position(target48, root, ctx, side);
    Vec3 p_prev = toe_position(prev_target48, prev_root, ctx, side);
    Vec3 e = (p_pred - p_prev) - (p_tgt - p_prev);
    total += e.norm();
  }
  return 0.5 * total;
}

double loss_velocity(const double* pred48, const double* target48,
                     const double* prev_target48, const Transform& root,
                     const Transform& prev_root, const Skeleton& skeleton) {
  return loss_velocity(pred48, target48, prev_target48, root, prev_root,
                       make_fk_context(skeleton));
}

double contact_ce(const double* logits2, int label) {
  if (label != 0 && label != 1) {
    throw DataError("contact label must be 0 or 1");
  }
  const double l0 = logits2[0];
  const double l1 = logits2[1];
  const double m = l0 > l1 ? l0 : l1;
  const double e0 = std::exp(l0 - m);
  const double e1 = std::exp(l1 - m);
  const double denom = e0 + e1;
  const double py = (label == 1 ? e1 : e0) / denom;
  return -std::log(py > 1e-300 ? py : 1e-300);
}

double loss_contact(const std::array<double, 4>& logits,
                    const std::array<uint8_t, 2>& labels) {
  return 0.5 * (contact_ce(logits.data(), labels[0]) +
                contact_ce(logits.data() + 2, labels[1]));
}

namespace {

// Minimal scalar reverse-mode tape used to differentiate the toe-base FK
// chain with respect to the 48 pose scalars. Values are computed eagerly;
// backward() walks the nodes once in reverse. The derivative of sqrt at an
// exact zero is taken as 0 (the subgradient used throughout this codebase
// for kinked losses).
class RTape {
 public:
  RTape() { nodes_.reserve(4096); }

  int konst(double v) { return push(kConst, -1, -1, v); }
  int add(int a, int b) { return push(kAdd, a, b, nodes_[a].v + nodes_[b].v); }
  int sub(int a, int b) { return push(kSub, a, b, nodes_[a].v - nodes_[b].v); }
  int mul(int a, int b) { return push(kMul, a, b, nodes_[a].v * nodes_[b].v); }
  int div(int a, int b) { return push(kDiv, a, b, nodes_[a].v / nodes_[b].v); }
  int sqrt_(int a) { return push(kSqrt, a, -1, std::sqrt(nodes_[a].v)); }

  double val(int i) const { return nodes_[static_cast<size_t>(i)].v; }
  double grad(int i) const { return grad_[static_cast<size_t>(i)]; }

  void backward(int f) {
    grad_.assign(nodes_.size(), 0.0);
    grad_[static_cast<size_t>(f)] = 1.0;
    for (int i = f; i >= 0; --i) {
      const double g = grad_[static_cast<size_t>(i)];
      if (g == 0.0) continue;
      const Node& n = nodes_[static_cast<size_t>(i)];
      switch (n.op) {
        case kConst:
          break;
        case kAdd:
          grad_[static_cast<size_t>(n.a)] += g;
          grad_[static_cast<size_t>(n.b)] += g;
          break;
        case kSub:
          grad_[static_cast<size_t>(n.a)] += g;
          grad_[static_cast<size_t>(n.b)] -= g;
          break;
        case kMul:
          grad_[static_cast<size_t>(n.a)] += g * nodes_[static_cast<size_t>(n.b)].v;
          grad_[static_cast<size_t>(n.b)] += g * nodes_[static_cast<size_t>(n.a)].v;
          break;
        case kDiv: {
          const double bv = nodes_[static_cast<size_t>(n.b)].v;
          grad_[static_cast<size_t>(n.a)] += g / bv;
          grad_[static_cast<size_t>(n.b)] -=
              g * nodes_[static_cast<size_t>(i)].v / bv;
          break;
        }
        case kSqrt:
          if (n.v != 0.0) grad_[static_cast<size_t>(n.a)] += g / (2.0 * n.v);
          break;
      }
    }
  }

 private:
  enum Op : uint8_t { kConst, kAdd, kSub, kMul, kDiv, kSqrt };
  struct Node {
    Op op;
    int a;
    int b;
    double v;
  };

  int push(Op op, int a, int b, double v) {
    nodes_.push_back({op, a, b, v});
    return static_cast<int>(nodes_.size()) - 1;
  }

  std::vector<Node> nodes_;
  std::vector<double> grad_;
};

struct RV3 {
  int x, y, z;
};
struct RM3 {
  int m[3][3];  // [row][col]
};

RV3 rv3(RTape& t, const Vec3& v) {
  return {t.konst(v.x()), t.konst(v.y()), t.konst(v.z())};
}

RM3 rm3(RTape& t, const Mat3& m) {
  RM3 out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out.m[i][j] = t.konst(m(i, j));
  return out;
}

RV3 add(RTape& t, RV3 a, RV3 b) {
  return {t.add(a.x, b.x), t.add(a.y, b.y), t.add(a.z, b.z)};
}

RV3 sub(RTape& t, RV3 a, RV3 b) {
  return {t.sub(a.x, b.x), t.sub(a.y, b.y), t.sub(a.z, b.z)};
}

RV3 scale(RTape& t, RV3 a, int s) {
  return {t.mul(a.x, s), t.mul(a.y, s), t.mul(a.z, s)};
}

int dot(RTape& t, RV3 a, RV3 b) {
  return t.add(t.add(t.mul(a.x, b.x), t.mul(a.y, b.y)), t.mul(a.z, b.z));
}

RV3 cross(RTape& t, RV3 a, RV3 b) {
  return {t.sub(t.mul(a.y, b.z), t.mul(a.z, b.y)),
          t.sub(t.mul(a.z, b.x), t.mul(a.x, b.z)),
          t.sub(t.mul(a.x, b.y), t.mul(a.y, b.x))};
}

RV3 matvec(RTape& t, const RM3& a, RV3 v) {
  RV3 out;
  int* o = &out.x;
  for (int i = 0; i < 3; ++i) {
    o[i] = t.add(t.add(t.mul(a.m[i][0], v.x), t.mul(a.m[i][1], v.y)),
                 t.mul(a.m[i][2], v.z));
  }
  return out;
}

RM3 matmul(RTape& t, const RM3& a, const RM3& b) {
  RM3 c;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      c.m[i][j] = t.add(t.add(t.mul(a.m[i][0], b.m[0][j]),
                              t.mul(a.m[i][1], b.m[1][j])),
                        t.mul(a.m[i][2], b.m[2][j]));
    }
  }
  return c;
}

// Gram-Schmidt decode of one 6-scalar block, mirroring sixdof_to_rot.
// Callers must have pre-validated the block (see validate_blocks).
RM3 decode6(RTape& t, const int* in6) {
  RV3 fwd{in6[0], in6[1], in6[2]};
  RV3 up{in6[3], in6[4], in6[5]};
  int fn = t.sqrt_(dot(t, fwd, fwd));
  RV3 f{t.div(fwd.x, fn), t.div(fwd.y, fn), t.div(fwd.z, fn)};
  int d = dot(t, up, f);
  RV3 u_raw = sub(t, up, scale(t, f, d));
  int un = t.sqrt_(dot(t, u_raw, u_raw));
  RV3 u{t.div(u_raw.x, un), t.div(u_raw.y, un), t.div(u_raw.z, un)};
  RV3 r = cross(t, u, f);
  RM3 out;
  out.m[0][0] = r.x; out.m[0][1] = u.x; out.m[0][2] = f.x;
  out.m[1][0] = r.y; out.m[1][1] = u.y; out.m[1][2] = f.y;
  out.m[2][0] = r.z; out.m[2][1] = u.z; out.m[2][2] = f.z;
  return out;
}

// Throws the canonical decode error before any tape nodes are built, so the
// gradient path fails exactly like the plain path on degenerate blocks.
void validate_blocks(const double* pose48, const FkContext& ctx, int side) {
  for (const auto& link : ctx.chains[side]) {
    sixdof_to_rot(SixDof::from_array(pose48 + 6 * link.slot));
  }
}

// Toe-base world position of one side, built on the tape from the 48 input
// node ids. Mirrors toe_position().
RV3 toe_rv(RTape& t, const int* in48, const Transform& root,
           const FkContext& ctx, int side) {
  RM3 rot = rm3(t, root.rot.m);
  RV3 pos = rv3(t, root.pos);
  for (const auto& link : ctx.chains[side]) {
    pos = add(t, pos, matvec(t, rot, rv3(t, link.offset)));
    rot = matmul(t, rot, decode6(t, in48 + 6 * link.slot));
  }
  return add(t, pos, matvec(t, rot, rv3(t, ctx.toe_offsets[side])));
}

}  // namespace

// The target toes are evaluated through the same tape arithmetic as the
// prediction (as constants) rather than through the Eigen-based plain path.
// The two paths can disagree by an ulp, and at pred == target that noise
// would be normalized into an arbitrary unit direction; identical arithmetic
// makes the difference exactly zero there, so the distance's zero-subgradient
// branch is taken and the gradient vanishes as it should.
double loss_fk_grad(const double* pred48, const double* target48,
                    const Transform& root, const FkContext& ctx,
                    double* gx48) {
  for (int side = 0; side < 2; ++side) {
    validate_blocks(pred48, ctx, side);
    validate_blocks(target48, ctx, side);
  }
  RTape t;
  int in[48], tin[48];
  for (int i = 0; i < 48; ++i) in[i] = t.konst(pred48[i]);
  for (int i = 0; i < 48; ++i) tin[i] = t.konst(target48[i]);
  int dist[2];
  for (int side = 0; side < 2; ++side) {
    RV3 e = sub(t, toe_rv(t, in, root, ctx, side),
                toe_rv(t, tin, root, ctx, side));
    dist[side] = t.sqrt_(dot(t, e, e));
  }
  int total = t.mul(t.add(dist[0], dist[1]), t.konst(0.5));
  t.backward(total);
  for (int i = 0; i < 48; ++i) gx48[i] += t.grad(in[i]);
  return t.val(total);
}

double loss_velocity_grad(const double* pred48, const double* target48,
                          const double* prev_target48, const Transform& root,
                          const Transform& prev_root, const FkContext& ctx,
                          double* gx48) {
  for (int side = 0; side < 2; ++side) {
    validate_blocks(pred48, ctx, side);
    validate_blocks(target48, ctx, side);
    validate_blocks(prev_target48, ctx, side);
  }
  RTape t;
  int in[48], tin[48], pin[48];
  for (int i = 0; i < 48; ++i) in[i] = t.konst(pred48[i]);
  for (int i = 0; i < 48; ++i) tin[i] = t.konst(target48[i]);
  for (int i = 0; i < 48; ++i) pin[i] = t.konst(prev_target48[i]);
  int dist[2];
  for (int side = 0; side < 2; ++side) {
    RV3 t_prev = toe_rv(t, pin, prev_root, ctx, side);
    RV3 vp = sub(t, toe_rv(t, in, root, ctx, side), t_prev);
    RV3 vt = sub(t, toe_rv(t, tin, root, ctx, side), t_prev);
    RV3 e = sub(t, vp, vt);
    dist[side] = t.sqrt_(dot(t, e, e));
  }
  int total = t.mul(t.add(dist[0], dist[1]), t.konst(0.5));
  t.backward(total);
  for (int i = 0; i < 48; ++i) gx48[i] += t.grad(in[i]);
  return t.val(total);
}

}  // namespace lobstr
