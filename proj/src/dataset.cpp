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

#include "lobstr/dataset.hpp"

#include <algorithm>
#include <bit>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "lobstr/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "dataset payloads are little-endian; big-endian hosts would "
              "need byte swapping");

namespace lobstr {

namespace {

namespace fs = std::filesystem;

constexpr size_t kFrameBytes = 36 * 4 + 48 * 4 + 2;

void encode_transform(const Transform& t, float* out) {
  out[0] = static_cast<float>(t.pos.x());
  out[1] = static_cast<float>(t.pos.y());
  out[2] = static_cast<float>(t.pos.z());
  auto sd = rot_to_6d(t.rot).to_array();
  for (int i = 0; i < 6; ++i) out[3 + i] = static_cast<float>(sd[i]);
}

Transform decode_transform(const float* in) {
  SixDof sd;
  sd.forward = Vec3(in[3], in[4], in[5]);
  sd.up = Vec3(in[6], in[7], in[8]);
  return Transform{sixdof_to_rot(sd), Vec3(in[0], in[1], in[2])};
}

std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
              (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  if (out.empty()) out = "clip";
  return out;
}

nlohmann::ordered_json skeleton_to_json(const Skeleton& s) {
  nlohmann::ordered_json j;
  for (const auto& joint : s.joints) {
    nlohmann::ordered_json ent;
    ent["name"] = joint.name;
    ent["parent"] = joint.parent < 0 ? "" : s.joints[joint.parent].name;
    ent["offset"] = {joint.offset.x(), joint.offset.y(), joint.offset.z()};
    j["joints"].push_back(ent);
  }
  auto names = [&s](const auto& ids) {
    std::vector<std::string> out;
    for (int id : ids) out.push_back(s.joints[id].name);
    return out;
  };
  j["lower_body"] = names(s.lower_body);
  j["toe_bases"] = names(s.toe_bases);
  j["trackers"]["head"] = s.joints[s.head].name;
  j["trackers"]["left_hand"] = s.joints[s.left_hand].name;
  j["trackers"]["right_hand"] = s.joints[s.right_hand].name;
  return j;
}

Skeleton skeleton_from_json(const nlohmann::json& j) {
  Skeleton s;
  for (const auto& ent : j.at("joints")) {
    Joint joint;
    joint.name = ent.at("name").get<std::string>();
    std::string parent = ent.value("parent", std::string());
    joint.parent = parent.empty() ? -1 : s.index_of(parent);
    if (!parent.empty() && joint.parent < 0) {
      throw DataError("manifest skeleton parent '" + parent +
                      "' not defined before '" + joint.name + "'");
    }
    auto off = ent.at("offset");
    joint.offset = Vec3(off.at(0).get<double>(), off.at(1).get<double>(),
                        off.at(2).get<double>());
    s.joints.push_back(joint);
  }
  auto resolve = [&s](const nlohmann::json& names, auto& out) {
    size_t i = 0;
    for (const auto& n : names) {
      int id = s.index_of(n.get<std::string>());
      if (id < 0) {
        throw DataError("manifest skeleton names missing joint '" +
                        n.get<std::string>() + "'");
      }
      out[i++] = id;
    }
  };
  resolve(j.at("lower_body"), s.lower_body);
  resolve(j.at("toe_bases"), s.toe_bases);
  const auto& t = j.at("trackers");
  s.head = s.index_of(t.at("head").get<std::string>());
  s.left_hand = s.index_of(t.at("left_hand").get<std::string>());
  s.right_hand = s.index_of(t.at("right_hand").get<std::string>());
  if (s.head < 0 || s.left_hand < 0 || s.right_hand < 0) {
    throw DataError("manifest skeleton tracker joints missing");
  }
  s.validate();
  return s;
}

}  // namespace

TrackerFrame DatasetClip::tracker_frame(size_t i, double fps) const {
  const float* f = trackers[i].data();
  TrackerFrame t;
  t.head = decode_transform(f + 0);
  t.left_hand = decode_transform(f + 9);
  t.right_hand = decode_transform(f + 18);
  t.pelvis = decode_transform(f + 27);
  t.timestamp = static_cast<double>(i) / fps;
  return t;
}

size_t Dataset::total_frames() const {
  size_t n = 0;
  for (const auto& c : clips) n += c.frames();
  return n;
}

std::array<size_t, 4> Dataset::category_frames() const {
  std::array<size_t, 4> out{};
  for (const auto& c : clips) {
    out[static_cast<int>(c.category)] += c.frames();
  }
  return out;
}

Dataset build_dataset(const std::vector<MotionClip>& clips,
                      const DatasetConfig& config) {
  if (clips.empty()) throw DataError("build_dataset: no clips supplied");
  Dataset ds;
  ds.fps = clips[0].fps;
  ds.skeleton = clips[0].skeleton;
  ds.skeleton.validate();

  for (size_t k = 0; k < clips.size(); ++k) {
    const MotionClip& clip = clips[k];
    if (clip.frames.size() < 46) {
      throw DataError("clip '" + clip.name + "' has " +
                      std::to_string(clip.frames.size()) +
                      " frames; at least 46 are required");
    }
    if (clip.skeleton.joints.size() != ds.skeleton.joints.size()) {
      throw DataError("clip '" + clip.name +
                      "' uses a different skeleton than the first clip");
    }
    for (size_t j = 0; j < clip.skeleton.joints.size(); ++j) {
      if (clip.skeleton.joints[j].name != ds.skeleton.joints[j].name) {
        throw DataError("clip '" + clip.name +
                        "' uses a different skeleton than the first clip");
      }
    }

    DatasetClip out;
    out.name = clip.name.empty() ? "clip" + std::to_string(k) : clip.name;
    out.category = clip.category;
    out.noise_seed = config.noise_seed + k;

    std::vector<TrackerFrame> trackers = synthesize_trackers(clip);
    if (config.add_noise) {
      trackers = augment_noise(trackers, out.noise_seed, config.pos_sigma,
                               config.max_rot_deg);
    }
    auto labels = label_contacts(clip);

    out.trackers.resize(trackers.size());
    out.targets.resize(trackers.size());
    out.contacts = std::move(labels);
    for (size_t i = 0; i < trackers.size(); ++i) {
      float* f = out.trackers[i].data();
      encode_transform(trackers[i].head, f + 0);
      encode_transform(trackers[i].left_hand, f + 9);
      encode_transform(trackers[i].right_hand, f + 18);
      encode_transform(trackers[i].pelvis, f + 27);
      auto tgt = pose_targets(clip.skeleton, clip.frames[i]);
      for (int t = 0; t < 48; ++t) {
        out.targets[i][t] = static_cast<float>(tgt[t]);
      }
    }
    ds.clips.push_back(std::move(out));
  }
  return ds;
}

void save_dataset(const Dataset& dataset, const std::string& dir) {
  fs::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["fps"] = dataset.fps;
  manifest["skeleton"] = skeleton_to_json(dataset.skeleton);

  std::vector<std::string> used;
  for (const auto& clip : dataset.clips) {
    std::string base = sanitize(clip.name);
    std::string file = base + ".bin";
    int suffix = 1;
    while (std::find(used.begin(), used.end(), file) != used.end()) {
      file = base + "_" + std::to_string(suffix++) + ".bin";
    }
    used.push_back(file);

    nlohmann::ordered_json ent;
    ent["name"] = clip.name;
    ent["category"] = category_name(clip.category);
    ent["frames"] = clip.frames();
    ent["path"] = file;
    ent["noise_seed"] = clip.noise_seed;
    manifest["clips"].push_back(ent);

    std::ofstream out(fs::path(dir) / file, std::ios::binary);
    if (!out) throw DataError("cannot write clip payload '" + file + "'");
    for (size_t i = 0; i < clip.frames(); ++i) {
      out.write(reinterpret_cast<const char*>(clip.trackers[i].data()),
                36 * sizeof(float));
      out.write(reinterpret_cast<const char*>(clip.targets[i].data()),
                48 * sizeof(float));
      out.write(reinterpret_cast<const char*>(clip.contacts[i].data()), 2);
    }
  }

  auto totals = dataset.category_frames();
  nlohmann::ordered_json cat;
  for (int c = 0; c < 4; ++c) {
    cat[category_name(static_cast<Category>(c))] = totals[c];
  }
  manifest["category_frames"] = cat;

  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw DataError("cannot write dataset manifest in '" + dir + "'");
  out << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& path) {
  fs::path manifest_path(path);
  if (fs::is_directory(manifest_path)) {
    manifest_path /= "manifest.json";
  }
  std::ifstream in(manifest_path);
  if (!in) {
    throw DataError("cannot open dataset manifest '" +
                    manifest_path.string() + "'");
  }
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("dataset manifest: " + std::string(e.what()));
  }

  Dataset ds;
  try {
    ds.fps = manifest.at("fps").get<double>();
    ds.skeleton = skeleton_from_json(manifest.at("skeleton"));
    fs::path dir = manifest_path.parent_path();
    for (const auto& ent : manifest.at("clips")) {
      DatasetClip clip;
      clip.name = ent.at("name").get<std::string>();
      clip.category = category_from_name(ent.at("category").get<std::string>());
      clip.noise_seed = ent.at("noise_seed").get<uint64_t>();
      size_t frames = ent.at("frames").get<size_t>();
      fs::path file = dir / ent.at("path").get<std::string>();

      std::ifstream bin(file, std::ios::binary);
      if (!bin) {
        throw DataError("cannot open clip payload '" + file.string() + "'");
      }
      bin.seekg(0, std::ios::end);
      size_t size = static_cast<size_t>(bin.tellg());
      bin.seekg(0);
      if (size != frames * kFrameBytes) {
        throw DataError("clip payload '" + file.string() + "' is " +
                        std::to_string(size) + " bytes; expected " +
                        std::to_string(frames * kFrameBytes));
      }
      clip.trackers.resize(frames);
      clip.targets.resize(frames);
      clip.contacts.resize(frames);
      for (size_t i = 0; i < frames; ++i) {
        bin.read(reinterpret_cast<char*>(clip.trackers[i].data()),
                 36 * sizeof(float));
        bin.read(reinterpret_cast<char*>(clip.targets[i].data()),
                 48 * sizeof(float));
        bin.read(reinterpret_cast<char*>(clip.contacts[i].data()), 2);
      }
      if (!bin) {
        throw DataError("short read on clip payload '" + file.string() + "'");
      }
      ds.clips.push_back(std::move(clip));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("dataset manifest: " + std::string(e.what()));
  }
  return ds;
}

}  // namespace lobstr
