// Copyright 2026 The HyperMix Authors
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

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hypermix/data.hpp"
#include "hypermix/eval.hpp"
#include "hypermix/metatrain.hpp"
#include "hypermix/nets.hpp"

namespace hypermix::app {

/// Flat `section.key = value` configuration. Every key has a default; setting
/// an unknown key or an unparsable value throws ConfigError.
class RunConfig {
 public:
  RunConfig();

  static RunConfig from_text(const std::string& text, const std::string& origin = "<text>");
  static RunConfig from_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool has(const std::string& key) const;

  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;

  std::uint64_t seed() const;
  std::string out_dir() const { return get("out"); }

  /// Every key except `seed` and `out`, one `key = value` per line, sorted.
  std::string canonical() const;
  /// FNV-1a 64 of canonical().
  std::uint64_t hash() const;
  std::string hash_hex() const;
  /// Grid axes: every `sweep.grid.<key>` entry, keyed by the target key.
  std::map<std::string, std::vector<std::string>> sweep_grid() const;

  data::DatasetSpec dataset_spec() const;
  std::vector<int> extractor_hidden() const { return get_int_list("model.hidden"); }
  int feat_dim() const { return get_int("model.feat_dim"); }
  std::vector<int> hyper_hidden() const { return get_int_list("model.hyper_hidden"); }
  nets::PretrainConfig pretrain_config() const;
  mix::MetaTrainConfig metatrain_config() const;
  /// Evaluation settings for one noise level.
  eval::EvalConfig eval_config(double noise) const;
  std::vector<double> noise_levels() const { return get_double_list("eval.noise"); }

  /// Documented key table: key, default, description.
  struct KeyInfo {
    std::string key;
    std::string default_value;
    std::string help;
  };
  static const std::vector<KeyInfo>& keys();

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::vector<std::string>> grid_;
};

std::string fnv1a_hex(std::uint64_t h);

}  // namespace hypermix::app
