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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lobstr/error.hpp"
#include "lobstr/feature.hpp"
#include "lobstr/metrics.hpp"
#include "lobstr/rng.hpp"
#include "lobstr/skeleton.hpp"

using namespace lobstr;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::path("tmp_") += name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::array<Rotation, 8> identity_pose() {
  std::array<Rotation, 8> out;
  out.fill(Rotation::identity());
  return out;
}

std::array<Rotation, 8> random_pose(Rng& rng) {
  std::array<Rotation, 8> out;
  for (auto& r : out) {
    r = exp_map(rng.unit_vector() * rng.uniform(0.0, 2.5));
  }
  return out;
}

MetricsReport sample_report() {
  MetricsReport r;
  r.config_hash = "0123456789abcdef";
  r.checkpoint_id = "epoch-0300";
  r.dataset_hash = "fedcba9876543210";
  r.frames = 1234;
  r.contact_accuracy = 0.8577;
  r.rotational_error_deg = 8.53;
  r.positional_error_cm = 6.63;
  r.toe_distance.frames = {700, 300, 134, 100};
  r.toe_distance.error_cm = {3.4, 5.1, 2.2, 4.0};
  r.toe_distance.total_frames = 1234;
  r.toe_distance.total_cm = 3.75;
  r.body_movement_deg = 2.9;
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Contact accuracy

TEST_CASE("contact accuracy counts per-foot label matches") {
  std::vector<std::array<bool, 2>> gt = {
      {true, false}, {true, true}, {false, false}, {false, true}};
  CHECK(contact_accuracy(gt, gt) == 1.0);

  // One foot always wrong, the other always right.
  std::vector<std::array<bool, 2>> half = gt;
  for (auto& f : half) f[0] = !f[0];
  CHECK(contact_accuracy(half, gt) == 0.5);

  // A single wrong label out of 8 comparisons.
  std::vector<std::array<bool, 2>> one = gt;
  one[2][1] = !one[2][1];
  CHECK(contact_accuracy(one, gt) == Approx(7.0 / 8.0));

  std::vector<std::array<bool, 2>> shorter(gt.begin(), gt.begin() + 3);
  CHECK_THROWS_AS(contact_accuracy(shorter, gt), DataError);
  CHECK_THROWS_AS(contact_accuracy({}, {}), DataError);
}

// ---------------------------------------------------------------------------
// Rotational error

TEST_CASE("rotational error is the mean geodesic angle per joint") {
  std::array<Rotation, 8> gt = identity_pose();
  CHECK(rotational_error_deg(gt, gt) == 0.0);

  // One joint off by 16 degrees, the rest exact: 16/8 = 2 per joint.
  std::array<Rotation, 8> pred = gt;
  pred[3] = rot_y(16.0 * kPi / 180.0);
  CHECK(rotational_error_deg(pred, gt) == Approx(2.0).epsilon(1e-12));

  // The axis does not matter.
  pred[3] = rot_x(16.0 * kPi / 180.0);
  CHECK(rotational_error_deg(pred, gt) == Approx(2.0).epsilon(1e-12));
}

TEST_CASE("rotational error matches an axis-angle oracle") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    std::array<Rotation, 8> gt = random_pose(rng);
    std::array<Rotation, 8> pred;
    double expected = 0.0;
    for (size_t j = 0; j < 8; ++j) {
      double angle = rng.uniform(0.0, kPi * 0.95);
      pred[j] = gt[j] * exp_map(rng.unit_vector() * angle);
      expected += angle;
    }
    expected = expected / 8.0 * 180.0 / kPi;
    CHECK(rotational_error_deg(pred, gt) == Approx(expected).epsilon(1e-9));
    // Symmetry in the arguments.
    CHECK(rotational_error_deg(pred, gt) ==
          Approx(rotational_error_deg(gt, pred)).epsilon(1e-12));
  }
}

TEST_CASE("the 48-channel overload agrees with the rotation overload") {
  Rng rng(7);
  std::array<Rotation, 8> pred = random_pose(rng);
  std::array<Rotation, 8> gt = random_pose(rng);
  std::array<double, 48> pred48, gt48;
  for (size_t j = 0; j < 8; ++j) {
    SixDof dp = rot_to_6d(pred[j]);
    SixDof dg = rot_to_6d(gt[j]);
    auto ap = dp.to_array();
    auto ag = dg.to_array();
    for (size_t k = 0; k < 6; ++k) {
      pred48[j * 6 + k] = ap[k];
      gt48[j * 6 + k] = ag[k];
    }
  }
  CHECK(rotational_error_deg(pred48, gt48) ==
        Approx(rotational_error_deg(pred, gt)).epsilon(1e-9));

  std::array<double, 48> degenerate{};
  CHECK_THROWS_AS(rotational_error_deg(degenerate, gt48), NumericError);
}

// ---------------------------------------------------------------------------
// Positional error

TEST_CASE("positional error is zero for identical poses") {
  Skeleton sk = standard_skeleton();
  std::array<Rotation, 8> pose = identity_pose();
  Pose tp = tpose(sk);
  CHECK(positional_error_cm(pose, pose, tp.root, sk) == 0.0);
}

TEST_CASE("a hip rotation moves the toe by the chord of its arc") {
  Skeleton sk = standard_skeleton();
  Pose tp = tpose(sk);
  std::vector<Transform> world = fk(sk, tp);

  // Identify the left hip: first joint of the left leg chain.
  std::vector<int> chain = sk.leg_chain(0);
  int hip = chain.front();
  int toe = sk.toe_bases[0];
  // Which of the 8 lower-body slots is the hip?
  int slot = -1;
  for (int j = 0; j < 8; ++j) {
    if (sk.lower_body[static_cast<size_t>(j)] == hip) slot = j;
  }
  REQUIRE(slot >= 0);

  const double angle = kPi / 2.0;
  std::array<Rotation, 8> gt = identity_pose();
  std::array<Rotation, 8> pred = identity_pose();
  pred[static_cast<size_t>(slot)] = rot_x(angle);

  // With every other joint at identity the leg below the hip is rigid, so
  // the toe travels on a circle about the hip's x axis: the displacement is
  // the chord 2 r sin(angle/2), with r the toe's distance to that axis.
  Vec3 hip_pos = world[static_cast<size_t>(hip)].pos;
  Vec3 toe_pos = world[static_cast<size_t>(toe)].pos;
  Vec3 axis = world[static_cast<size_t>(hip)].rot.m.col(0);
  Vec3 d = toe_pos - hip_pos;
  double r = (d - d.dot(axis) * axis).norm();
  double expected_cm = 2.0 * r * std::sin(angle / 2.0) * 100.0 / 2.0;

  CHECK(positional_error_cm(pred, gt, tp.root, sk) ==
        Approx(expected_cm).epsilon(1e-9));
  // Symmetric given the shared root.
  CHECK(positional_error_cm(gt, pred, tp.root, sk) ==
        Approx(expected_cm).epsilon(1e-9));
}

// ---------------------------------------------------------------------------
// Toe-base distance error

TEST_CASE("toe-base distance error compares foot gaps") {
  std::vector<std::array<Vec3, 2>> gt = {
      {Vec3(0, 0, 0.125), Vec3(0, 0, -0.125)},  // 25 cm apart
  };
  std::vector<std::array<Vec3, 2>> pred = {
      {Vec3(0, 0, 0.15), Vec3(0, 0, -0.15)},  // 30 cm apart
  };
  std::vector<Category> cat = {Category::kLocomotion};

  CategoryBreakdown same = toe_base_distance_error(gt, gt, cat);
  CHECK(same.total_cm == 0.0);
  CHECK(same.total_frames == 1);

  CategoryBreakdown b = toe_base_distance_error(pred, gt, cat);
  CHECK(b.total_cm == Approx(5.0).epsilon(1e-12));
  CHECK(b.error_cm[0] == Approx(5.0).epsilon(1e-12));
  CHECK(b.frames[0] == 1);
  CHECK(b.frames[1] == 0);
  CHECK(b.error_cm[1] == 0.0);
}

TEST_CASE("toe-base distance error averages per category and overall") {
  // Two locomotion frames with errors 2 cm and 4 cm, one sit-stand frame
  // with error 9 cm.
  auto pair = [](double gap) {
    return std::array<Vec3, 2>{Vec3(0, 0, gap / 2.0), Vec3(0, 0, -gap / 2.0)};
  };
  std::vector<std::array<Vec3, 2>> gt = {pair(0.20), pair(0.20), pair(0.20)};
  std::vector<std::array<Vec3, 2>> pred = {pair(0.22), pair(0.16),
                                           pair(0.29)};
  std::vector<Category> cat = {Category::kLocomotion, Category::kLocomotion,
                               Category::kSitStand};
  CategoryBreakdown b = toe_base_distance_error(pred, gt, cat);
  CHECK(b.frames[0] == 2);
  CHECK(b.error_cm[0] == Approx(3.0).epsilon(1e-9));
  CHECK(b.frames[1] == 1);
  CHECK(b.error_cm[1] == Approx(9.0).epsilon(1e-9));
  CHECK(b.total_frames == 3);
  CHECK(b.total_cm == Approx(5.0).epsilon(1e-9));

  std::vector<Category> wrong = {Category::kLocomotion};
  CHECK_THROWS_AS(toe_base_distance_error(pred, gt, wrong), DataError);
  std::vector<std::array<Vec3, 2>> shorter(gt.begin(), gt.begin() + 2);
  CHECK_THROWS_AS(toe_base_distance_error(pred, shorter, cat), DataError);
}

// ---------------------------------------------------------------------------
// Body movement

TEST_CASE("body movement averages summed joint updates per transition") {
  std::vector<std::array<Rotation, 8>> frozen(5, identity_pose());
  CHECK(body_movement_deg(frozen) == 0.0);

  // A single joint rotating one degree per frame.
  std::vector<std::array<Rotation, 8>> turning;
  for (int t = 0; t < 10; ++t) {
    std::array<Rotation, 8> p = identity_pose();
    p[2] = rot_y(t * 1.0 * kPi / 180.0);
    turning.push_back(p);
  }
  CHECK(body_movement_deg(turning) == Approx(1.0).epsilon(1e-9));

  // Alternating +-5 degrees on one joint: every transition is 5 degrees.
  std::vector<std::array<Rotation, 8>> alternating;
  for (int t = 0; t < 9; ++t) {
    std::array<Rotation, 8> p = identity_pose();
    p[5] = rot_x((t % 2 == 0 ? 5.0 : 0.0) * kPi / 180.0);
    alternating.push_back(p);
  }
  CHECK(body_movement_deg(alternating) == Approx(5.0).epsilon(1e-9));

  CHECK_THROWS_AS(body_movement_deg({}), DataError);
  CHECK_THROWS_AS(body_movement_deg({identity_pose()}), DataError);
}

TEST_CASE("body movement of a concatenation is the weighted mean of parts") {
  Rng rng(3);
  std::vector<std::array<Rotation, 8>> stream;
  for (int t = 0; t < 21; ++t) stream.push_back(random_pose(rng));

  // Split into two parts sharing the boundary frame, so the transitions of
  // the parts partition the transitions of the whole.
  for (size_t k : {size_t{5}, size_t{10}, size_t{17}}) {
    std::vector<std::array<Rotation, 8>> a(stream.begin(),
                                           stream.begin() + k + 1);
    std::vector<std::array<Rotation, 8>> b(stream.begin() + k, stream.end());
    double na = static_cast<double>(a.size() - 1);
    double nb = static_cast<double>(b.size() - 1);
    double weighted =
        (body_movement_deg(a) * na + body_movement_deg(b) * nb) / (na + nb);
    CHECK(body_movement_deg(stream) == Approx(weighted).epsilon(1e-12));
  }
}

// ---------------------------------------------------------------------------
// Rigid invariance

TEST_CASE("metrics are invariant to a shared ground-plane transform") {
  Skeleton sk = standard_skeleton();
  Rng rng(9);
  std::array<Rotation, 8> pred = random_pose(rng);
  std::array<Rotation, 8> gt = random_pose(rng);
  Pose tp = tpose(sk);

  Transform g;
  g.rot = rot_y(1.234);
  g.pos = Vec3(3.0, 0.0, -2.0);

  double before = positional_error_cm(pred, gt, tp.root, sk);
  Transform moved = g * tp.root;
  double after = positional_error_cm(pred, gt, moved, sk);
  CHECK(after == Approx(before).epsilon(1e-9));

  // Toe-distance error under the same transform of every position.
  std::vector<std::array<Vec3, 2>> p, q, tp2, tq2;
  std::vector<Category> cat;
  for (int i = 0; i < 15; ++i) {
    std::array<Vec3, 2> a = {rng.unit_vector(), rng.unit_vector()};
    std::array<Vec3, 2> b = {rng.unit_vector(), rng.unit_vector()};
    p.push_back(a);
    q.push_back(b);
    auto apply = [&](const Vec3& v) { return g.rot.m * v + g.pos; };
    tp2.push_back({apply(a[0]), apply(a[1])});
    tq2.push_back({apply(b[0]), apply(b[1])});
    cat.push_back(static_cast<Category>(i % 4));
  }
  CategoryBreakdown b0 = toe_base_distance_error(p, q, cat);
  CategoryBreakdown b1 = toe_base_distance_error(tp2, tq2, cat);
  CHECK(b1.total_cm == Approx(b0.total_cm).epsilon(1e-9));
  for (int c = 0; c < 4; ++c) {
    CHECK(b1.error_cm[static_cast<size_t>(c)] ==
          Approx(b0.error_cm[static_cast<size_t>(c)]).epsilon(1e-9));
  }
}

// ---------------------------------------------------------------------------
// Hashes

TEST_CASE("FNV-1a hash matches published reference values") {
  CHECK(hash_bytes("", 0) == "cbf29ce484222325");
  CHECK(hash_bytes("a", 1) == "af63dc4c8601ec8c");
  CHECK(hash_bytes("foobar", 6) == "85944171f73967e8");
}

TEST_CASE("file hashing reads bytes exactly") {
  TempDir tmp("metrics_hash");
  std::string path = (tmp.path / "blob.bin").string();
  std::string content = "lower body\n\0tracker";
  content.resize(19);
  std::ofstream(path, std::ios::binary).write(content.data(), 19);
  CHECK(hash_file(path) == hash_bytes(content.data(), 19));
  CHECK_THROWS_AS(hash_file((tmp.path / "missing").string()), DataError);
}

// ---------------------------------------------------------------------------
// Report emission

TEST_CASE("report emission is deterministic and lossless") {
  TempDir tmp("metrics_report");
  MetricsReport r = sample_report();

  std::string p1 = (tmp.path / "a.json").string();
  std::string p2 = (tmp.path / "b.json").string();
  emit_report(r, p1);
  emit_report(r, p2);

  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  CHECK(slurp(p1) == slurp(p2));
  CHECK(!slurp(p1).empty());

  MetricsReport back = load_report(p1);
  CHECK(back.config_hash == r.config_hash);
  CHECK(back.checkpoint_id == r.checkpoint_id);
  CHECK(back.dataset_hash == r.dataset_hash);
  CHECK(back.frames == r.frames);
  CHECK(back.contact_accuracy == r.contact_accuracy);
  CHECK(back.rotational_error_deg == r.rotational_error_deg);
  CHECK(back.positional_error_cm == r.positional_error_cm);
  CHECK(back.body_movement_deg == r.body_movement_deg);
  for (int c = 0; c < 4; ++c) {
    CHECK(back.toe_distance.frames[static_cast<size_t>(c)] ==
          r.toe_distance.frames[static_cast<size_t>(c)]);
    CHECK(back.toe_distance.error_cm[static_cast<size_t>(c)] ==
          r.toe_distance.error_cm[static_cast<size_t>(c)]);
  }
  CHECK(back.toe_distance.total_frames == r.toe_distance.total_frames);
  CHECK(back.toe_distance.total_cm == r.toe_distance.total_cm);

  // Re-emitting the loaded report reproduces the file byte for byte.
  std::string p3 = (tmp.path / "c.json").string();
  emit_report(back, p3);
  CHECK(slurp(p3) == slurp(p1));
}

TEST_CASE("the report table mirrors the per-category row structure") {
  TempDir tmp("metrics_table");
  std::string path = (tmp.path / "r.json").string();
  emit_report(sample_report(), path);
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  size_t loco = text.find("\"locomotion\"");
  size_t sit = text.find("\"sit-stand\"");
  size_t upper = text.find("\"upper-body\"");
  size_t other = text.find("\"other\"");
  size_t total = text.find("\"total\"");
  CHECK(loco != std::string::npos);
  CHECK(loco < sit);
  CHECK(sit < upper);
  CHECK(upper < other);
  CHECK(other < total);
}

TEST_CASE("report validation and loading reject bad content") {
  TempDir tmp("metrics_badreport");
  MetricsReport r = sample_report();
  r.contact_accuracy = 1.5;
  CHECK_THROWS_AS(r.validate(), DataError);
  CHECK_THROWS_AS(emit_report(r, (tmp.path / "x.json").string()), DataError);

  r = sample_report();
  r.positional_error_cm = -0.1;
  CHECK_THROWS_AS(r.validate(), DataError);

  r = sample_report();
  r.toe_distance.total_frames = 999;  // no longer the category sum
  CHECK_THROWS_AS(r.validate(), DataError);

  std::string good = (tmp.path / "good.json").string();
  emit_report(sample_report(), good);

  std::ofstream(tmp.path / "corrupt.json") << "{ nope";
  CHECK_THROWS_AS(load_report((tmp.path / "corrupt.json").string()),
                  ParseError);

  std::ofstream(tmp.path / "thin.json") << "{\"config_hash\": \"x\"}";
  CHECK_THROWS_AS(load_report((tmp.path / "thin.json").string()), DataError);

  CHECK_THROWS_AS(load_report((tmp.path / "absent.json").string()),
                  DataError);
}
