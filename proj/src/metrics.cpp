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

#include "lobstr/metrics.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "lobstr/error.hpp"
#include "lobstr/feature.hpp"

namespace lobstr {

namespace {

constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

void check_fraction(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    throw DataError(std::string(name) + " must be a fraction in [0, 1]");
  }
}

void check_error(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0) {
    throw DataError(std::string(name) + " must be finite and non-negative");
  }
}

}  // namespace

void MetricsReport::validate() const {
  check_fraction(contact_accuracy, "contact_accuracy");
  check_error(rotational_error_deg, "rotational_error_deg");
  check_error(positional_error_cm, "positional_error_cm");
  check_error(body_movement_deg, "body_movement_deg");
  if (frames < 0) throw DataError("frames must be non-negative");
  int64_t sum = 0;
  for (int c = 0; c < 4; ++c) {
    if (toe_distance.frames[static_cast<size_t>(c)] < 0) {
      throw DataError("per-category frame counts must be non-negative");
    }
    check_error(toe_distance.error_cm[static_cast<size_t>(c)],
                "toe_base_distance_error_cm");
    sum += toe_distance.frames[static_cast<size_t>(c)];
  }
  if (sum != toe_distance.total_frames) {
    throw DataError("per-category frame counts do not sum to the total");
  }
  check_error(toe_distance.total_cm, "toe_base_distance_error_cm total");
}

double contact_accuracy(const std::vector<std::array<bool, 2>>& pred,
                        const std::vector<std::array<bool, 2>>& gt) {
  if (pred.size() != gt.size()) {
    throw DataError("contact_accuracy: streams have " +
                    std::to_string(pred.size()) + " and " +
                    std::to_string(gt.size()) + " frames");
  }
  if (pred.empty()) {
    throw DataError("contact_accuracy: empty streams");
  }
  int64_t correct = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    correct += pred[i][0] == gt[i][0];
    correct += pred[i][1] == gt[i][1];
  }
  return static_cast<double>(correct) /
         static_cast<double>(2 * pred.size());
}

double rotational_error_deg(const std::array<Rotation, 8>& pred,
                            const std::array<Rotation, 8>& gt) {
  double sum = 0.0;
  for (size_t j = 0; j < 8; ++j) {
    sum += geodesic_angle(pred[j], gt[j]);
  }
  return sum / 8.0 * kRadToDeg;
}

double rotational_error_deg(const std::array<double, 48>& pred,
                            const std::array<double, 48>& gt) {
  return rotational_error_deg(decode_pose48(pred.data()),
                              decode_pose48(gt.data()));
}

std::array<Vec3, 2> toe_positions(const Skeleton& skeleton, const Pose& pose) {
  std::vector<Transform> world = fk(skeleton, pose);
  return {world[static_cast<size_t>(skeleton.toe_bases[0])].pos,
          world[static_cast<size_t>(skeleton.toe_bases[1])].pos};
}

double positional_error_cm(const std::array<Rotation, 8>& pred,
                           const std::array<Rotation, 8>& gt,
                           const Transform& gt_root,
                           const Skeleton& skeleton) {
  Pose base = tpose(skeleton);
  base.root = gt_root;

  Pose p = base;
  apply_lower_body(skeleton, pred, p);
  std::array<Vec3, 2> tp = toe_positions(skeleton, p);

  Pose g = base;
  apply_lower_body(skeleton, gt, g);
  std::array<Vec3, 2> tg = toe_positions(skeleton, g);

  double sum = (tp[0] - tg[0]).norm() + (tp[1] - tg[1]).norm();
  return sum / 2.0 * 100.0;
}

CategoryBreakdown toe_base_distance_error(
    const std::vector<std::array<Vec3, 2>>& pred,
    const std::vector<std::array<Vec3, 2>>& gt,
    const std::vector<Category>& categories) {
  if (pred.size() != gt.size() || pred.size() != categories.size()) {
    throw DataError("toe_base_distance_error: misaligned streams (" +
                    std::to_string(pred.size()) + " pred, " +
                    std::to_string(gt.size()) + " gt, " +
                    std::to_string(categories.size()) + " categories)");
  }
  CategoryBreakdown out;
  std::array<double, 4> sums{};
  double total_sum = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    double dp = (pred[i][0] - pred[i][1]).norm();
    double dg = (gt[i][0] - gt[i][1]).norm();
    double err = std::abs(dp - dg) * 100.0;
    auto c = static_cast<size_t>(categories[i]);
    sums[c] += err;
    ++out.frames[c];
    total_sum += err;
  }
  for (size_t c = 0; c < 4; ++c) {
    if (out.frames[c] > 0) {
      out.error_cm[c] = sums[c] / static_cast<double>(out.frames[c]);
    }
    out.total_frames += out.frames[c];
  }
  if (out.total_frames > 0) {
    out.total_cm = total_sum / static_cast<double>(out.total_frames);
  }
  return out;
}

double body_movement_deg(const std::vector<std::array<Rotation, 8>>& stream) {
  if (stream.size() < 2) {
    throw DataError("body_movement: need at least 2 frames, got " +
                    std::to_string(stream.size()));
  }
  double sum = 0.0;
  for (size_t i = 1; i < stream.size(); ++i) {
    for (size_t j = 0; j < 8; ++j) {
      sum += geodesic_angle(stream[i - 1][j], stream[i][j]);
    }
  }
  return sum / static_cast<double>(stream.size() - 1) * kRadToDeg;
}

std::string hash_bytes(const void* data, size_t n) {
  const auto* p = static_cast<const uint8_t*>(data);
  uint64_t h = 14695981039346656037ull;  // FNV-1a offset basis
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;  // FNV-1a prime
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string s = buf.str();
  return hash_bytes(s.data(), s.size());
}

namespace {

nlohmann::ordered_json breakdown_to_json(const CategoryBreakdown& b) {
  nlohmann::ordered_json j;
  for (int c = 0; c < 4; ++c) {
    nlohmann::ordered_json row;
    row["frames"] = b.frames[static_cast<size_t>(c)];
    row["error_cm"] = b.error_cm[static_cast<size_t>(c)];
    j[category_name(static_cast<Category>(c))] = row;
  }
  nlohmann::ordered_json total;
  total["frames"] = b.total_frames;
  total["error_cm"] = b.total_cm;
  j["total"] = total;
  return j;
}

const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) {
    throw DataError(std::string("report: missing '") + key + "'");
  }
  return j[key];
}

double number_field(const nlohmann::json& j, const char* key) {
  const nlohmann::json& v = require(j, key);
  if (!v.is_number()) {
    throw DataError(std::string("report: '") + key + "' must be a number");
  }
  return v.get<double>();
}

std::string string_field(const nlohmann::json& j, const char* key) {
  const nlohmann::json& v = require(j, key);
  if (!v.is_string()) {
    throw DataError(std::string("report: '") + key + "' must be a string");
  }
  return v.get<std::string>();
}

}  // namespace

void emit_report(const MetricsReport& report, const std::string& path) {
  report.validate();
  nlohmann::ordered_json j;
  j["config_hash"] = report.config_hash;
  j["checkpoint_id"] = report.checkpoint_id;
  j["dataset_hash"] = report.dataset_hash;
  j["frames"] = report.frames;
  j["contact_accuracy"] = report.contact_accuracy;
  j["rotational_error_deg"] = report.rotational_error_deg;
  j["positional_error_cm"] = report.positional_error_cm;
  j["toe_base_distance_error_cm"] = breakdown_to_json(report.toe_distance);
  j["body_movement_deg"] = report.body_movement_deg;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path);
}

MetricsReport load_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  if (!j.is_object()) throw DataError("report: expected a JSON object");

  MetricsReport r;
  r.config_hash = string_field(j, "config_hash");
  r.checkpoint_id = string_field(j, "checkpoint_id");
  r.dataset_hash = string_field(j, "dataset_hash");
  const nlohmann::json& frames = require(j, "frames");
  if (!frames.is_number_integer()) {
    throw DataError("report: 'frames' must be an integer");
  }
  r.frames = frames.get<int64_t>();
  r.contact_accuracy = number_field(j, "contact_accuracy");
  r.rotational_error_deg = number_field(j, "rotational_error_deg");
  r.positional_error_cm = number_field(j, "positional_error_cm");
  r.body_movement_deg = number_field(j, "body_movement_deg");

  const nlohmann::json& table = require(j, "toe_base_distance_error_cm");
  if (!table.is_object()) {
    throw DataError("report: 'toe_base_distance_error_cm' must be an object");
  }
  for (int c = 0; c < 4; ++c) {
    const char* name = category_name(static_cast<Category>(c));
    const nlohmann::json& row = require(table, name);
    const nlohmann::json& n = require(row, "frames");
    if (!n.is_number_integer()) {
      throw DataError(std::string("report: '") + name +
                      ".frames' must be an integer");
    }
    r.toe_distance.frames[static_cast<size_t>(c)] = n.get<int64_t>();
    r.toe_distance.error_cm[static_cast<size_t>(c)] =
        number_field(row, "error_cm");
  }
  const nlohmann::json& total = require(table, "total");
  const nlohmann::json& tn = require(total, "frames");
  if (!tn.is_number_integer()) {
    throw DataError("report: 'total.frames' must be an integer");
  }
  r.toe_distance.total_frames = tn.get<int64_t>();
  r.toe_distance.total_cm = number_field(total, "error_cm");

  r.validate();
  return r;
}

}  // namespace lobstr
