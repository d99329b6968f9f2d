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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "lobstr/config.hpp"
#include "lobstr/error.hpp"

using namespace lobstr;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::path("tmp_") += name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct EnvGuard {
  std::string name;
  explicit EnvGuard(const char* n) : name(n) { unsetenv(n); }
  ~EnvGuard() { unsetenv(name.c_str()); }
  void set(const std::string& v) { setenv(name.c_str(), v.c_str(), 1); }
};

}  // namespace

TEST_CASE("empty config text yields the built-in defaults") {
  RunConfig cfg = parse_config_text("");
  CHECK(cfg.train.epochs == 1500);
  CHECK(cfg.train.batch_size == 256);
  CHECK(cfg.train.initial_lr == 1e-3);
  CHECK(cfg.train.lr_decay == 0.999);
  CHECK(cfg.train.dims.hidden == 1024);
  CHECK(cfg.train.dims.latent == 128);
  CHECK(cfg.train.weights.pose == 1.0);
  CHECK(cfg.train.weights.contact == 1e-6);
  CHECK(cfg.train.ref_mode == RefAngular::kRelative);
  CHECK(cfg.session.ref_mode == RefAngular::kRelative);
  CHECK(cfg.session.postprocess);
  CHECK(cfg.session.post.threshold == 0.5);
  CHECK(cfg.session.post.ik.blend_window == 10);
  CHECK(cfg.dataset.add_noise);
  CHECK(cfg.dataset.pos_sigma == 0.01);
  CHECK(cfg.serve_port == 4545);
}

TEST_CASE("every key lands in its field") {
  const char* text = R"(
# full configuration exercise
reference_angular_mode = literal

net.hidden = 256          # smaller test net
net.latent = 64

train.epochs = 12
train.batch_size = 32
train.steps_per_epoch = 3
train.initial_lr = 0.002
train.lr_decay = 0.99
train.seed = 123456789012345
train.checkpoint_every = 4
train.weights.pose = 2.0
train.weights.fk = 0.25
train.weights.velocity = 0.125
train.weights.contact = 0.001
train.adam.beta1 = 0.85
train.adam.beta2 = 0.995
train.adam.epsilon = 1e-7

dataset.noise_seed = 77
dataset.add_noise = false
dataset.pos_sigma = 0.02
dataset.max_rot_deg = 2.5

postprocess.enabled = false
postprocess.threshold = 0.6
postprocess.hysteresis = 0.05
postprocess.snap_to_floor = true
ik.max_iterations = 25
ik.tolerance = 0.002
ik.damping = 0.2
ik.blend_window = 8
ik.max_step = 0.1

serve.port = 9999
)";
  RunConfig cfg = parse_config_text(text);
  CHECK(cfg.train.ref_mode == RefAngular::kLiteral);
  CHECK(cfg.session.ref_mode == RefAngular::kLiteral);
  CHECK(cfg.train.dims.hidden == 256);
  CHECK(cfg.train.dims.latent == 64);
  CHECK(cfg.train.epochs == 12);
  CHECK(cfg.train.batch_size == 32);
  CHECK(cfg.train.steps_per_epoch == 3);
  CHECK(cfg.train.initial_lr == 0.002);
  CHECK(cfg.train.lr_decay == 0.99);
  CHECK(cfg.train.seed == 123456789012345ull);
  CHECK(cfg.train.checkpoint_every == 4);
  CHECK(cfg.train.weights.pose == 2.0);
  CHECK(cfg.train.weights.fk == 0.25);
  CHECK(cfg.train.weights.velocity == 0.125);
  CHECK(cfg.train.weights.contact == 0.001);
  CHECK(cfg.train.adam.beta1 == 0.85);
  CHECK(cfg.train.adam.beta2 == 0.995);
  CHECK(cfg.train.adam.eps == 1e-7);
  CHECK(cfg.dataset.noise_seed == 77);
  CHECK_FALSE(cfg.dataset.add_noise);
  CHECK(cfg.dataset.pos_sigma == 0.02);
  CHECK(cfg.dataset.max_rot_deg == 2.5);
  CHECK_FALSE(cfg.session.postprocess);
  CHECK(cfg.session.post.threshold == 0.6);
  CHECK(cfg.session.post.hysteresis == 0.05);
  CHECK(cfg.session.post.snap_to_floor);
  CHECK(cfg.session.post.ik.max_iterations == 25);
  CHECK(cfg.session.post.ik.tolerance == 0.002);
  CHECK(cfg.session.post.ik.damping == 0.2);
  CHECK(cfg.session.post.ik.blend_window == 8);
  CHECK(cfg.session.post.ik.max_step == 0.1);
  CHECK(cfg.serve_port == 9999);
}

TEST_CASE("malformed lines are rejected with their line number") {
  CHECK_THROWS_WITH_AS(parse_config_text("train.epochs 12\n"),
                       doctest::Contains("line 1"), DataError);
  CHECK_THROWS_WITH_AS(parse_config_text("\n\nnot.a.key = 3\n"),
                       doctest::Contains("line 3"), DataError);
  CHECK_THROWS_WITH_AS(parse_config_text("\nnot.a.key = 3\n"),
                       doctest::Contains("unknown key"), DataError);
  CHECK_THROWS_WITH_AS(parse_config_text("train.epochs = twelve\n"),
                       doctest::Contains("integer"), DataError);
  CHECK_THROWS_WITH_AS(parse_config_text("train.initial_lr = fast\n"),
                       doctest::Contains("number"), DataError);
  CHECK_THROWS_WITH_AS(parse_config_text("dataset.add_noise = maybe\n"),
                       doctest::Contains("true or false"), DataError);
  CHECK_THROWS_WITH_AS(parse_config_text("reference_angular_mode = euler\n"),
                       doctest::Contains("relative or literal"), DataError);
  CHECK_THROWS_WITH_AS(parse_config_text("= 3\n"), doctest::Contains("key"),
                       DataError);
}

TEST_CASE("duplicate keys are rejected, naming both lines") {
  const char* text = "train.epochs = 5\ntrain.seed = 1\ntrain.epochs = 6\n";
  CHECK_THROWS_WITH_AS(parse_config_text(text), doctest::Contains("line 3"),
                       DataError);
  CHECK_THROWS_WITH_AS(parse_config_text(text), doctest::Contains("line 1"),
                       DataError);
  CHECK_THROWS_WITH_AS(parse_config_text(text),
                       doctest::Contains("duplicate"), DataError);
}

TEST_CASE("values are validated after parsing") {
  CHECK_THROWS_AS(parse_config_text("train.epochs = 0\n"), DataError);
  CHECK_THROWS_AS(parse_config_text("train.lr_decay = 1.5\n"), DataError);
  CHECK_THROWS_AS(parse_config_text("postprocess.threshold = 1.5\n"),
                  DataError);
  CHECK_THROWS_AS(parse_config_text("ik.damping = -0.5\n"), DataError);
  CHECK_THROWS_AS(parse_config_text("serve.port = 0\n"), DataError);
  CHECK_THROWS_AS(parse_config_text("serve.port = 70000\n"), DataError);
  CHECK_THROWS_AS(parse_config_text("dataset.pos_sigma = -1\n"), DataError);
  CHECK_THROWS_AS(parse_config_text("train.initial_lr = 1e400\n"), DataError);
}

TEST_CASE("config files load from disk") {
  TempDir tmp("config_load");
  std::string path = (tmp.path / "run.conf").string();
  std::ofstream(path) << "train.epochs = 7\nserve.port = 5000\n";
  RunConfig cfg = load_config(path);
  CHECK(cfg.train.epochs == 7);
  CHECK(cfg.serve_port == 5000);
  CHECK_THROWS_AS(load_config((tmp.path / "absent.conf").string()),
                  DataError);
}

TEST_CASE("config path resolution prefers the explicit flag over the env") {
  EnvGuard guard("LOBSTR_CONFIG");
  CHECK(resolve_config_path("") == "");
  CHECK(resolve_config_path("explicit.conf") == "explicit.conf");
  guard.set("from_env.conf");
  CHECK(resolve_config_path("") == "from_env.conf");
  CHECK(resolve_config_path("explicit.conf") == "explicit.conf");
}
