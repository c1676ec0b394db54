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
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "app/config.hpp"
#include "hypermix/eval.hpp"
#include "hypermix/metatrain.hpp"

namespace hypermix::app {

/// Streams derived from the run seed.
enum SeedStream : std::uint64_t {
  kInitExtractor = 1,
  kPretrain = 2,
  kInitHyper = 3,
  kMetatrain = 4,
  kEvaluate = 5,
  kDiagnose = 6,
};
std::uint64_t derived_seed(std::uint64_t seed, SeedStream stream);

struct Models {
  nets::FeatureExtractor f;
  std::optional<nets::HyperNetwork> h;  // absent for protonet
  mix::Method method = mix::Method::kHyperMix;
};

nets::PretrainResult run_pretrain(const RunConfig& cfg, const data::Dataset& ds);
mix::MetaTrainResult run_metatrain(const RunConfig& cfg, const data::Dataset& ds, Models& models);
eval::EvalOutput run_eval(const RunConfig& cfg, const data::Dataset& ds, const Models& models, double noise,
                          int threads);

struct PipelineResult {
  std::vector<double> pretrain_loss;
  mix::MetaTrainResult meta;
  std::vector<double> noise;
  std::vector<eval::EvalOutput> evals;  // aligned with noise
};

/// pretrain -> metatrain -> evaluate at every configured noise level.
PipelineResult run_pipeline(const RunConfig& cfg, int threads = 1);

/// Worker count from HYPERMIX_THREADS (default: hardware concurrency).
int worker_threads();

/// ROC points (fpr, tpr) from pooled scores, starting at (0,0) and ending at (1,1).
std::vector<std::pair<double, double>> roc_points(const std::vector<double>& ind, const std::vector<double>& ood);

std::string report_json(const RunConfig& cfg, const std::vector<double>& noise,
                        const std::vector<eval::EvalOutput>& evals);

void cmd_pretrain(const RunConfig& cfg, std::ostream& log);
void cmd_metatrain(const RunConfig& cfg, const std::string& extractor_path, std::ostream& log);
void cmd_eval(const RunConfig& cfg, const std::string& model_path, std::ostream& log);
void cmd_sweep(const RunConfig& cfg, std::ostream& log);
void cmd_diagnose_cov(const RunConfig& cfg, const std::string& extractor_path, std::ostream& log);

}  // namespace hypermix::app
