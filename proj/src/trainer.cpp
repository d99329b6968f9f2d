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

#include "lobstr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "lobstr/error.hpp"
#include "lobstr/tensor.hpp"

namespace lobstr {

void TrainConfig::validate() const {
  if (epochs <= 0 || batch_size <= 0 || steps_per_epoch <= 0) {
    throw DataError("train config: epochs, batch size, and steps per epoch "
                    "must be positive");
  }
  if (!(initial_lr > 0.0) || !std::isfinite(initial_lr)) {
    throw DataError("train config: initial learning rate must be positive");
  }
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) {
    throw DataError("train config: lr decay must lie in (0, 1]");
  }
  if (window != FeatureWindow::kFrames) {
    throw DataError("train config: window length must be " +
                    std::to_string(FeatureWindow::kFrames));
  }
  if (checkpoint_every < 0) {
    throw DataError("train config: checkpoint cadence must be >= 0");
  }
  weights.validate();
  adam.validate();
}

PreparedDataset prepare_dataset(const Dataset& dataset, RefAngular mode) {
  if (dataset.clips.empty()) throw DataError("dataset has no clips");
  PreparedDataset out;
  out.fps = dataset.fps;
  out.skeleton = dataset.skeleton;
  out.fk = make_fk_context(dataset.skeleton);
  out.clips.reserve(dataset.clips.size());
  for (const DatasetClip& clip : dataset.clips) {
    const int n = static_cast<int>(clip.frames());
    if (n < FeatureWindow::kFrames + 1) {
      throw DataError("clip '" + clip.name + "' has " + std::to_string(n) +
                      " frames; a training window needs " +
                      std::to_string(FeatureWindow::kFrames + 1));
    }
    PreparedClip p;
    p.frames = n;
    std::vector<TrackerFrame> tf(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      tf[static_cast<size_t>(i)] =
          clip.tracker_frame(static_cast<size_t>(i), dataset.fps);
    }
    p.rows.resize(static_cast<size_t>(n));
    for (int i = 1; i < n; ++i) {
      p.rows[static_cast<size_t>(i)] =
          feature_vector(tf[static_cast<size_t>(i) - 1],
                         tf[static_cast<size_t>(i)], mode);
    }
    p.targets.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < 48; ++k) {
        p.targets[static_cast<size_t>(i)][static_cast<size_t>(k)] =
            static_cast<double>(
                clip.targets[static_cast<size_t>(i)][static_cast<size_t>(k)]);
      }
    }
    p.contacts.assign(clip.contacts.begin(), clip.contacts.end());
    p.roots.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      p.roots[static_cast<size_t>(i)] = tf[static_cast<size_t>(i)].pelvis;
    }
    out.clips.push_back(std::move(p));
    out.total_frames += static_cast<uint64_t>(n);
    out.cum_frames.push_back(out.total_frames);
  }
  return out;
}

std::vector<BatchSample> sample_batch(const PreparedDataset& data, Rng& rng,
                                      int count) {
  if (data.clips.empty() || data.total_frames == 0) {
    throw DataError("cannot sample from an empty dataset");
  }
  if (count <= 0) throw DataError("batch size must be positive");
  std::vector<BatchSample> batch;
  batch.reserve(static_cast<size_t>(count));
  for (int k = 0; k < count; ++k) {
    // Integer draw over total frames makes p(clip) = frames/total exactly.
    const uint64_t r = rng.uniform_int(data.total_frames);
    const size_t c = static_cast<size_t>(
        std::upper_bound(data.cum_frames.begin(), data.cum_frames.end(), r) -
        data.cum_frames.begin());
    const PreparedClip& clip = data.clips[c];
    const uint64_t span =
        static_cast<uint64_t>(clip.frames - clip.first_valid);
    const int frame = clip.first_valid + static_cast<int>(rng.uniform_int(span));
    batch.push_back({static_cast<int>(c), frame});
  }
  std::sort(batch.begin(), batch.end(), [](BatchSample a, BatchSample b) {
    return a.clip != b.clip ? a.clip < b.clip : a.frame < b.frame;
  });
  return batch;
}

namespace {

void check_sample(const PreparedDataset& data, BatchSample s) {
  if (s.clip < 0 || s.clip >= static_cast<int>(data.clips.size())) {
    throw DataError("batch sample references clip " + std::to_string(s.clip) +
                    " outside the dataset");
  }
  const PreparedClip& clip = data.clips[static_cast<size_t>(s.clip)];
  if (s.frame < clip.first_valid || s.frame >= clip.frames) {
    throw DataError("batch sample frame " + std::to_string(s.frame) +
                    " is outside the admissible window range");
  }
}

}  // namespace

TrainingSample materialize(const PreparedDataset& data, BatchSample s) {
  check_sample(data, s);
  const PreparedClip& clip = data.clips[static_cast<size_t>(s.clip)];
  TrainingSample out;
  const int start = s.frame - (FeatureWindow::kFrames - 1);
  for (int t = 0; t < FeatureWindow::kFrames; ++t) {
    out.window.frames[static_cast<size_t>(t)] =
        clip.rows[static_cast<size_t>(start + t)];
  }
  out.target_pose = clip.targets[static_cast<size_t>(s.frame)];
  out.target_contact = clip.contacts[static_cast<size_t>(s.frame)];
  return out;
}

BatchLossValues batch_loss_grad(const PreparedDataset& data,
                                const std::vector<BatchSample>& batch,
                                NetworkParams& params, const LossWeights& w) {
  if (batch.empty()) throw DataError("batch loss needs at least one sample");
  w.validate();
  for (BatchSample s : batch) check_sample(data, s);
  std::vector<BatchSample> sorted = batch;
  std::sort(sorted.begin(), sorted.end(), [](BatchSample a, BatchSample b) {
    return a.clip != b.clip ? a.clip < b.clip : a.frame < b.frame;
  });

  const int b = static_cast<int>(sorted.size());
  const int in = FeatureVector::kSize;
  std::vector<double> xs(static_cast<size_t>(FeatureWindow::kFrames) * b * in);
  std::vector<double> targets(static_cast<size_t>(b) * 48);
  std::vector<uint8_t> labels_left(static_cast<size_t>(b));
  std::vector<uint8_t> labels_right(static_cast<size_t>(b));
  struct RowCtx {
    const double* target;
    const double* prev_target;
    Transform root;
    Transform prev_root;
    bool has_velocity;
  };
  std::vector<RowCtx> rows(static_cast<size_t>(b));
  for (int i = 0; i < b; ++i) {
    const BatchSample s = sorted[static_cast<size_t>(i)];
    const PreparedClip& clip = data.clips[static_cast<size_t>(s.clip)];
    const int start = s.frame - (FeatureWindow::kFrames - 1);
    for (int t = 0; t < FeatureWindow::kFrames; ++t) {
      const auto& row = clip.rows[static_cast<size_t>(start + t)].x;
      std::copy(row.begin(), row.end(),
                xs.begin() + (static_cast<size_t>(t) * b + i) * in);
    }
    const auto& tgt = clip.targets[static_cast<size_t>(s.frame)];
    std::copy(tgt.begin(), tgt.end(),
              targets.begin() + static_cast<size_t>(i) * 48);
    labels_left[static_cast<size_t>(i)] =
        clip.contacts[static_cast<size_t>(s.frame)][0];
    labels_right[static_cast<size_t>(i)] =
        clip.contacts[static_cast<size_t>(s.frame)][1];
    RowCtx& ctx = rows[static_cast<size_t>(i)];
    ctx.target = clip.targets[static_cast<size_t>(s.frame)].data();
    ctx.root = clip.roots[static_cast<size_t>(s.frame)];
    ctx.has_velocity = s.frame > clip.first_valid;
    if (ctx.has_velocity) {
      ctx.prev_target = clip.targets[static_cast<size_t>(s.frame) - 1].data();
      ctx.prev_root = clip.roots[static_cast<size_t>(s.frame) - 1];
    } else {
      ctx.prev_target = nullptr;
    }
  }

  Tape tape;
  BatchGraph graph = forward_batch(tape, xs.data(), b, params);
  const double inv_b = 1.0 / static_cast<double>(b);
  Tape::T pose_term = tape.mean_abs_diff(graph.pose, targets.data());
  Tape::T fk_term = tape.per_row_loss(
      graph.pose,
      [&](const double* x, double* gx, int row) {
        const RowCtx& ctx = rows[static_cast<size_t>(row)];
        return loss_fk_grad(x, ctx.target, ctx.root, data.fk, gx);
      },
      inv_b);
  Tape::T vel_term = tape.per_row_loss(
      graph.pose,
      [&](const double* x, double* gx, int row) {
        const RowCtx& ctx = rows[static_cast<size_t>(row)];
        if (!ctx.has_velocity) return 0.0;
        return loss_velocity_grad(x, ctx.target, ctx.prev_target, ctx.root,
                                  ctx.prev_root, data.fk, gx);
      },
      inv_b);
  Tape::T left = tape.softmax_ce_foot(graph.logits, labels_left, 0);
  Tape::T right = tape.softmax_ce_foot(graph.logits, labels_right, 1);
  Tape::T total = tape.add_scaled({{pose_term, w.pose},
                                   {fk_term, w.fk},
                                   {vel_term, w.velocity},
                                   {left, 0.5 * w.contact},
                                   {right, 0.5 * w.contact}});
  BatchLossValues out;
  out.components.pose = tape.scalar(pose_term);
  out.components.fk = tape.scalar(fk_term);
  out.components.velocity = tape.scalar(vel_term);
  out.components.contact_left = tape.scalar(left);
  out.components.contact_right = tape.scalar(right);
  out.total = tape.scalar(total);
  tape.backward(total);
  return out;
}

namespace {

const TrainConfig& validated(const TrainConfig& config) {
  config.validate();
  return config;
}

}  // namespace

Trainer::Trainer(const Dataset& dataset, const TrainConfig& config)
    : cfg_(validated(config)),
      data_(prepare_dataset(dataset, config.ref_mode)),
      params_(NetworkParams::init(config.dims, config.seed)),
      adam_(params_, config.adam),
      rng_(config.seed ^ 0x9E3779B97F4A7C15ULL) {}

BatchLossValues Trainer::step(double lr) {
  std::vector<BatchSample> batch = sample_batch(data_, rng_, cfg_.batch_size);
  params_.zero_grads();
  BatchLossValues v = batch_loss_grad(data_, batch, params_, cfg_.weights);
  const double comps[] = {v.components.pose,         v.components.fk,
                          v.components.velocity,     v.components.contact_left,
                          v.components.contact_right, v.total};
  for (double c : comps) {
    if (!std::isfinite(c)) {
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "training loss became non-finite (pose=%g fk=%g "
                    "velocity=%g contact=%g/%g total=%g)",
                    v.components.pose, v.components.fk, v.components.velocity,
                    v.components.contact_left, v.components.contact_right,
                    v.total);
      throw NumericError(buf);
    }
  }
  adam_.step(params_, lr);
  if (!params_.finite()) {
    throw NumericError("parameters became non-finite after the update at lr " +
                       std::to_string(lr));
  }
  return v;
}

std::vector<EpochLogEntry> Trainer::run() {
  if (ran_) throw Error("this trainer has already run");
  ran_ = true;
  const bool writing = !cfg_.out_dir.empty();
  std::ofstream csv;
  if (writing) {
    std::filesystem::create_directories(cfg_.out_dir);
    csv.open(cfg_.out_dir + "/loss_curve.csv", std::ios::trunc);
    if (!csv) throw DataError("cannot write to '" + cfg_.out_dir + "'");
    csv << "epoch,lr,pose,fk,velocity,contact,total\n";
  }
  auto checkpoint = [&](const std::string& name) {
    if (writing) save_params(params_, cfg_.out_dir + "/" + name);
  };
  std::vector<EpochLogEntry> curve;
  curve.reserve(static_cast<size_t>(cfg_.epochs));
  for (int epoch = 1; epoch <= cfg_.epochs; ++epoch) {
    const double lr = learning_rate(cfg_.initial_lr, cfg_.lr_decay, epoch - 1);
    EpochLogEntry e;
    e.epoch = epoch;
    e.lr = lr;
    try {
      for (int s = 0; s < cfg_.steps_per_epoch; ++s) {
        BatchLossValues v = step(lr);
        e.pose += v.components.pose;
        e.fk += v.components.fk;
        e.velocity += v.components.velocity;
        e.contact +=
            0.5 * (v.components.contact_left + v.components.contact_right);
        e.total += v.total;
      }
    } catch (const NumericError& err) {
      if (writing) {
        save_params(params_, cfg_.out_dir + "/diverged.lbck");
        std::ofstream dump(cfg_.out_dir + "/diverged.txt", std::ios::trunc);
        dump << "epoch " << epoch << " of " << cfg_.epochs << ", step "
             << adam_.steps() << ", lr " << lr << "\n"
             << err.what() << "\n";
      }
      throw NumericError("epoch " + std::to_string(epoch) + ": " + err.what());
    }
    const double inv = 1.0 / static_cast<double>(cfg_.steps_per_epoch);
    e.pose *= inv;
    e.fk *= inv;
    e.velocity *= inv;
    e.contact *= inv;
    e.total *= inv;
    curve.push_back(e);
    if (writing) {
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.lr,
                    e.pose, e.fk, e.velocity, e.contact, e.total);
      csv << buf;
      csv.flush();
    }
    if (cfg_.checkpoint_every > 0 && epoch % cfg_.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "epoch_%06d.lbck", epoch);
      checkpoint(name);
    }
  }
  checkpoint("final.lbck");
  return curve;
}

std::vector<EpochLogEntry> train(const Dataset& dataset,
                                 const TrainConfig& config) {
  Trainer trainer(dataset, config);
  return trainer.run();
}

}  // namespace lobstr
