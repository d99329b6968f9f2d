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

#include "lobstr/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "lobstr/error.hpp"

namespace lobstr {

void IkConfig::validate() const {
  if (max_iterations <= 0) {
    throw DataError("ik config: max iterations must be positive");
  }
  if (!(tolerance > 0.0) || !std::isfinite(tolerance)) {
    throw DataError("ik config: tolerance must be positive");
  }
  if (!(damping > 0.0) || !std::isfinite(damping)) {
    throw DataError("ik config: damping must be positive");
  }
  if (blend_window <= 0) {
    throw DataError("ik config: blend window must be positive");
  }
  if (!(max_step > 0.0) || !std::isfinite(max_step)) {
    throw DataError("ik config: max step must be positive");
  }
}

void PostprocessConfig::validate() const {
  ik.validate();
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw DataError("postprocess config: threshold must lie in (0, 1)");
  }
  if (!(hysteresis >= 0.0) || threshold - hysteresis <= 0.0 ||
      threshold + hysteresis >= 1.0) {
    throw DataError(
        "postprocess config: hysteresis band must keep both thresholds in "
        "(0, 1)");
  }
}

namespace {

// P(class 1) of one foot's logit pair, max-shifted for stability.
double contact_probability(double l0, double l1) {
  const double m = std::max(l0, l1);
  const double e0 = std::exp(l0 - m);
  const double e1 = std::exp(l1 - m);
  return e1 / (e0 + e1);
}

void check_logits(const std::array<double, 4>& logits) {
  for (double l : logits) {
    if (!std::isfinite(l)) {
      throw NumericError("contact logits must be finite");
    }
  }
}

}  // namespace

std::array<bool, 2> decide_contact(const std::array<double, 4>& logits) {
  check_logits(logits);
  return {contact_probability(logits[0], logits[1]) > 0.5,
          contact_probability(logits[2], logits[3]) > 0.5};
}

std::array<bool, 2> decide_contact(const std::array<double, 4>& logits,
                                   const std::array<bool, 2>& previous,
                                   double threshold, double hysteresis) {
  check_logits(logits);
  std::array<bool, 2> out{};
  for (int foot = 0; foot < 2; ++foot) {
    const double p = contact_probability(logits[static_cast<size_t>(2 * foot)],
                                         logits[static_cast<size_t>(2 * foot) + 1]);
    const double cut = previous[static_cast<size_t>(foot)]
                           ? threshold - hysteresis
                           : threshold + hysteresis;
    out[static_cast<size_t>(foot)] = p > cut;
  }
  return out;
}

double blend_alpha(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return (1.0 - std::cos(std::numbers::pi * s)) / 2.0;
}

namespace {

void check_chain(const Skeleton& skeleton, const Pose& pose,
                 const std::vector<int>& chain) {
  if (pose.rotations.size() + 1 != skeleton.joints.size()) {
    throw DataError("pose has " + std::to_string(pose.rotations.size()) +
                    " rotations for a skeleton with " +
                    std::to_string(skeleton.joints.size()) + " joints");
  }
  if (chain.size() < 2) {
    throw DataError(
        "ik chain needs at least one moving joint and an end effector");
  }
  for (int j : chain) {
    if (j <= 0 || j >= static_cast<int>(skeleton.joints.size())) {
      throw DataError("ik chain joint id " + std::to_string(j) +
                      " is out of range");
    }
  }
  if (skeleton.joints[static_cast<size_t>(chain.front())].parent != 0) {
    throw DataError("ik chain must start at a child of the root");
  }
  for (size_t i = 1; i < chain.size(); ++i) {
    if (skeleton.joints[static_cast<size_t>(chain[i])].parent != chain[i - 1]) {
      throw DataError("ik chain is not a consecutive parent-child path at '" +
                      skeleton.joints[static_cast<size_t>(chain[i])].name +
                      "'");
    }
  }
  const int end = chain.back();
  if (end != skeleton.toe_bases[0] && end != skeleton.toe_bases[1]) {
    throw DataError("ik chain must end at a designated toe-base joint");
  }
}

}  // namespace

IkResult jacobian_ik(const Skeleton& skeleton, const Pose& pose,
                     const std::vector<int>& chain, const Vec3& target,
                     const IkConfig& config) {
  config.validate();
  check_chain(skeleton, pose, chain);
  if (!target.allFinite()) throw NumericError("ik target must be finite");

  IkResult res;
  res.pose = pose;
  const int moving = static_cast<int>(chain.size()) - 1;
  // The chain starts at a root child, so the first joint's parent frame is
  // the root itself, constant across iterations.
  const Rotation prefix = pose.root.rot;

  for (res.iterations = 0;; ++res.iterations) {
    const std::vector<Transform> world = fk_chain(skeleton, res.pose, chain);
    const Vec3 toe = world.back().pos;
    Vec3 e = target - toe;
    res.error = e.norm();
    if (res.error <= config.tolerance) {
      res.converged = true;
      return res;
    }
    if (res.iterations >= config.max_iterations) {
      res.converged = false;
      return res;
    }
    // A clamped error keeps far (or unreachable) targets from commanding
    // huge rotations in one iteration.
    if (res.error > config.max_step) e *= config.max_step / res.error;

    Eigen::Matrix<double, 3, Eigen::Dynamic> jac(3, 3 * moving);
    for (int c = 0; c < moving; ++c) {
      const Vec3 r = toe - world[static_cast<size_t>(c)].pos;
      jac.col(3 * c + 0) = Vec3::UnitX().cross(r);
      jac.col(3 * c + 1) = Vec3::UnitY().cross(r);
      jac.col(3 * c + 2) = Vec3::UnitZ().cross(r);
    }
    const Mat3 a = jac * jac.transpose() +
                   config.damping * config.damping * Mat3::Identity();
    const Vec3 y = a.ldlt().solve(e);
    const Eigen::VectorXd dtheta = jac.transpose() * y;

    // Build the candidate pose for a given fraction of the solved step.
    // Every joint's world-frame increment is taken against the pre-update
    // parent frames captured in `world`.
    auto stepped = [&](double scale) {
      Pose trial = res.pose;
      for (int c = 0; c < moving; ++c) {
        const Vec3 w = scale * Vec3(dtheta[3 * c], dtheta[3 * c + 1],
                                    dtheta[3 * c + 2]);
        const Rotation parent =
            c == 0 ? prefix : world[static_cast<size_t>(c) - 1].rot;
        const Mat3 local = parent.m.transpose() * exp_map(w).m * parent.m;
        const size_t slot =
            static_cast<size_t>(chain[static_cast<size_t>(c)]) - 1;
        trial.rotations[slot] = Rotation(local) * trial.rotations[slot];
      }
      return trial;
    };

    // Backtracking line search on the true error. The solved step is only a
    // linearization; near a singular (stretched) configuration its full
    // length can wrap around nonlinearly and orbit the target instead of
    // approaching it. Halving until the error strictly decreases makes the
    // iteration monotone, whose only stationary point is the best reachable
    // position along the pull direction.
    double scale = 1.0;
    bool improved = false;
    for (int h = 0; h < 12 && !improved; ++h, scale *= 0.5) {
      Pose trial = stepped(scale);
      const Vec3 trial_toe = fk_chain(skeleton, trial, chain).back().pos;
      if ((target - trial_toe).norm() < res.error) {
        res.pose = std::move(trial);
        improved = true;
      }
    }
    if (!improved) {
      // Numerically stationary: no fraction of the step helps.
      res.converged = false;
      return res;
    }
  }
}

namespace {

Vec3 toe_world(const Skeleton& skeleton, const Pose& pose,
               const std::vector<int>& chain) {
  return fk_chain(skeleton, pose, chain).back().pos;
}

void check_state(const FootState& st, const IkConfig& ik) {
  if (!st.target.allFinite()) {
    throw DataError("foot state target must be finite");
  }
  if (st.kind == FootState::Kind::kBlending &&
      (st.elapsed < 0 || st.elapsed >= ik.blend_window)) {
    throw DataError("blending state elapsed " + std::to_string(st.elapsed) +
                    " is outside [0, " + std::to_string(ik.blend_window) + ")");
  }
  if (st.kind == FootState::Kind::kLocked && st.target.y() < 0.0) {
    throw DataError("locked target must not be below the floor");
  }
}

}  // namespace

PostprocessResult postprocess_step(const Skeleton& skeleton, const Pose& pose,
                                   const std::array<bool, 2>& contacts,
                                   const std::array<FootState, 2>& state,
                                   const PostprocessConfig& config) {
  config.validate();
  for (const FootState& st : state) check_state(st, config.ik);

  PostprocessResult out;
  out.pose = pose;
  out.state = state;

  for (int side = 0; side < 2; ++side) {
    std::vector<int> chain = skeleton.leg_chain(side);
    chain.push_back(skeleton.toe_bases[static_cast<size_t>(side)]);
    const FootState& st = state[static_cast<size_t>(side)];
    FootState& next = out.state[static_cast<size_t>(side)];
    const bool contact = contacts[static_cast<size_t>(side)];

    // The network's toe-base for this frame; chains are disjoint, so the
    // other leg's correction cannot move it.
    const Vec3 net_toe = toe_world(skeleton, pose, chain);

    auto lock_at = [&](Vec3 target) {
      target.y() = config.snap_to_floor ? 0.0 : std::max(target.y(), 0.0);
      next.kind = FootState::Kind::kLocked;
      next.target = target;
      next.elapsed = 0;
      out.pose = jacobian_ik(skeleton, out.pose, chain, target, config.ik).pose;
    };
    auto blend_frame = [&](const Vec3& anchor, int k) {
      if (k >= config.ik.blend_window) {
        // Final ramp value is exactly 1: the target is the network toe-base
        // itself, the correction vanishes, and the foot is free again.
        next.kind = FootState::Kind::kFree;
        next.target = Vec3::Zero();
        next.elapsed = 0;
        return;
      }
      const double a =
          blend_alpha(static_cast<double>(k) / config.ik.blend_window);
      const Vec3 target = (1.0 - a) * anchor + a * net_toe;
      next.kind = FootState::Kind::kBlending;
      next.target = anchor;
      next.elapsed = k;
      out.pose = jacobian_ik(skeleton, out.pose, chain, target, config.ik).pose;
    };

    switch (st.kind) {
      case FootState::Kind::kFree:
        if (contact) lock_at(net_toe);
        break;
      case FootState::Kind::kLocked:
        if (contact) {
          out.pose =
              jacobian_ik(skeleton, out.pose, chain, st.target, config.ik)
                  .pose;
        } else {
          blend_frame(st.target, 1);
        }
        break;
      case FootState::Kind::kBlending:
        if (contact) {
          // Re-contact mid-release: advance the ramp one more frame and
          // freeze that blended position as the new lock target, so the
          // toe-base stays continuous.
          const int k = std::min(st.elapsed + 1, config.ik.blend_window);
          const double a =
              blend_alpha(static_cast<double>(k) / config.ik.blend_window);
          lock_at((1.0 - a) * st.target + a * net_toe);
        } else {
          blend_frame(st.target, st.elapsed + 1);
        }
        break;
    }
  }
  return out;
}

}  // namespace lobstr
