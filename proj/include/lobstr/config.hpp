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

#ifndef LOBSTR_CONFIG_HPP_
#define LOBSTR_CONFIG_HPP_

// Key-value run configuration shared by the CLI subcommands. The format is
// one `key = value` pair per line; `#` starts a comment (whole-line or
// trailing); blank lines are ignored. Unknown keys, duplicate keys, and
// malformed values are DataErrors naming the offending line, so a typo can
// never silently fall back to a default.
//
// Keys:
//   reference_angular_mode        relative | literal
//   net.hidden, net.latent        layer sizes
//   train.epochs, train.batch_size, train.steps_per_epoch
//   train.initial_lr, train.lr_decay, train.seed, train.checkpoint_every
//   train.window
//   train.weights.pose, train.weights.fk, train.weights.velocity,
//   train.weights.contact
//   train.adam.beta1, train.adam.beta2, train.adam.epsilon
//   dataset.noise_seed, dataset.add_noise, dataset.pos_sigma,
//   dataset.max_rot_deg
//   postprocess.enabled, postprocess.threshold, postprocess.hysteresis,
//   postprocess.snap_to_floor
//   ik.max_iterations, ik.tolerance, ik.damping, ik.blend_window,
//   ik.max_step
//   serve.port

#include <cstdint>
#include <string>

#include "lobstr/dataset.hpp"
#include "lobstr/runtime.hpp"
#include "lobstr/trainer.hpp"

namespace lobstr {

/// Everything tunable from one config file. `reference_angular_mode` is a
/// single key applied to both the training and the streaming pipeline so
/// the two can never disagree.
struct RunConfig {
  TrainConfig train;       // includes net dims, loss weights, Adam settings
  DatasetConfig dataset;   // noise augmentation
  SessionConfig session;   // post-processing and streaming behaviour
  uint16_t serve_port = 4545;

  /// Throws DataError on any invalid field combination.
  void validate() const;
};

/// Parses config text. Throws DataError on unknown/duplicate keys or bad
/// values (naming the line), and validates the result.
RunConfig parse_config_text(const std::string& text);

/// Reads and parses a config file. Throws DataError when unreadable.
RunConfig load_config(const std::string& path);

/// Resolves which config file to use: an explicitly given path wins, else
/// the LOBSTR_CONFIG environment variable, else empty (built-in defaults).
std::string resolve_config_path(const std::string& explicit_path);

}  // namespace lobstr

#endif  // LOBSTR_CONFIG_HPP_
