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

#include <string>
#include <vector>

#include "hypermix/data.hpp"
#include "hypermix/mixing.hpp"
#include "hypermix/nets.hpp"
#include "hypermix/rng.hpp"

namespace hypermix::mix {

/// Meta-training recipes, selected on the command line by their lowercase token.
enum class Method { kPlain, kParamMix, kOoeMix, kHyperMix, kOe, kOec, kProtoNet };

std::string method_name(Method m);
/// Throws ConfigError listing the valid tokens.
Method parse_method(const std::string& token);
const std::vector<std::string>& method_tokens();

bool uses_param_mix(Method m);
bool uses_ooe_mix(Method m);

struct MetaTrainConfig {
  Method method = Method::kHyperMix;
  int epochs = 50;
  int batches_per_epoch = 50;
  int episodes_per_batch = 4;
  int ways = 5;
  int shots = 5;
  int queries_per_class = 5;
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0;
  bool finetune_extractor = true;
  MixConfig mix;

  void validate() const;
};

struct MetaTrainResult {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_accuracy;  // IND query accuracy during training
  long param_mix_pairs = 0;
  long param_mix_same_class = 0;
};

/// Episodic training on the base split. Each batch averages the episode
/// losses and takes one optimizer step. Episode e of batch b in epoch t draws
/// from rng.split(t).split(b).split(e), with independent sub-streams for
/// sampling, ParamMix, OOE-Mix, and plain OOE queries, so disabling an
/// augmentation leaves every other draw unchanged.
MetaTrainResult metatrain(nets::FeatureExtractor& f, nets::HyperNetwork& h, const data::Dataset& ds,
                          const MetaTrainConfig& cfg, RandomStream rng);

}  // namespace hypermix::mix
