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

#ifndef LOBSTR_TRAINER_HPP_
#define LOBSTR_TRAINER_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "lobstr/dataset.hpp"
#include "lobstr/feature.hpp"
#include "lobstr/losses.hpp"
#include "lobstr/network.hpp"
#include "lobstr/optimizer.hpp"
#include "lobstr/rng.hpp"

namespace lobstr {

struct TrainConfig {
  int epochs = 1500;
  int batch_size = 256;
  int steps_per_epoch = 1;
  double initial_lr = 1e-3;
  double lr_decay = 0.999;
  int window = FeatureWindow::kFrames;
  LossWeights weights;
  AdamConfig adam;
  uint64_t seed = 0;
  int checkpoint_every = 50;  // epochs; 0 disables periodic checkpoints
  std::string out_dir;        // empty: no checkpoints or CSV written
  NetDims dims;
  RefAngular ref_mode = RefAngular::kRelative;

  /// Throws DataError on non-positive counts/rates, decay outside (0,1],
  /// a window length other than FeatureWindow::kFrames, or bad weights.
  void validate() const;
};

/// Per-clip feature rows and supervision decoded once up front. rows[i]
/// holds the feature step (i-1 -> i); index 0 is unused. A window ending at
/// frame i uses rows i-44..i, so the earliest admissible i is 45.
struct PreparedClip {
  std::vector<FeatureVector> rows;
  std::vector<std::array<double, 48>> targets;
  std::vector<std::array<uint8_t, 2>> contacts;
  std::vector<Transform> roots;  // pelvis transform per frame
  int frames = 0;
  int first_valid = FeatureWindow::kFrames;
};

struct PreparedDataset {
  double fps = 45.0;
  Skeleton skeleton;
  FkContext fk;
  std::vector<PreparedClip> clips;
  std::vector<uint64_t> cum_frames;  // cumulative clip frame counts
  uint64_t total_frames = 0;
};

PreparedDataset prepare_dataset(const Dataset& dataset,
                                RefAngular mode = RefAngular::kRelative);

/// One drawn training window, identified by clip and final frame.
struct BatchSample {
  int clip = 0;
  int frame = 0;
};

/// `count` independent draws: a clip with probability proportional to its
/// frame count, then a final frame uniform over the admissible range. The
/// batch is returned sorted by (clip, frame) — the canonical order that
/// makes every batch reduction independent of draw order.
std::vector<BatchSample> sample_batch(const PreparedDataset& data, Rng& rng,
                                      int count);

/// Copies one sample out as an explicit window/target pair.
TrainingSample materialize(const PreparedDataset& data, BatchSample s);

struct BatchLossValues {
  LossComponents components;  // batch means, contact kept per foot
  double total = 0.0;         // weighted
};

/// Runs the batched tape forward, forms the weighted loss, and accumulates
/// d(total)/d(params) into the parameter gradients (callers zero them
/// first). The batch is canonicalized internally, so the value and the
/// gradients are invariant to sample order. Samples whose window ends at a
/// clip's first admissible frame contribute zero to the velocity term.
BatchLossValues batch_loss_grad(const PreparedDataset& data,
                                const std::vector<BatchSample>& batch,
                                NetworkParams& params, const LossWeights& w);

struct EpochLogEntry {
  int epoch = 0;  // 1-based
  double lr = 0.0;
  double pose = 0.0;
  double fk = 0.0;
  double velocity = 0.0;
  double contact = 0.0;  // mean of the two per-foot terms
  double total = 0.0;
};

/// Owns the parameters, optimizer state, and sampling stream. Deterministic
/// per seed: same config and dataset give bitwise-identical curves.
class Trainer {
 public:
  Trainer(const Dataset& dataset, const TrainConfig& config);

  /// Runs config.epochs epochs (steps_per_epoch optimizer steps each).
  /// Logs per-epoch mean components; when out_dir is set, writes
  /// loss_curve.csv, periodic checkpoints, and final.lbck. Runs once;
  /// throws Error on reuse and NumericError (after a diagnostic dump)
  /// when the loss or the parameters go non-finite.
  std::vector<EpochLogEntry> run();

  /// One optimizer step at the given learning rate.
  BatchLossValues step(double lr);

  NetworkParams& params() { return params_; }
  const PreparedDataset& data() const { return data_; }
  int64_t steps_taken() const { return adam_.steps(); }

 private:
  TrainConfig cfg_;
  PreparedDataset data_;
  NetworkParams params_;
  Adam adam_;
  Rng rng_;
  bool ran_ = false;
};

/// Convenience wrapper: Trainer(dataset, config).run().
std::vector<EpochLogEntry> train(const Dataset& dataset,
                                 const TrainConfig& config);

}  // namespace lobstr

#endif  // LOBSTR_TRAINER_HPP_
