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
#include <string>
#include <vector>

#include "hypermix/data.hpp"
#include "hypermix/nets.hpp"
#include "hypermix/score.hpp"

namespace hypermix::eval {

using diff::Matrix;

/// P(ind > ood) + 0.5 P(ind == ood), computed from midranks.
double auroc(const std::vector<double>& ind, const std::vector<double>& ood);

/// tau is the largest score with fraction(ind >= tau) >= target; returns
/// fraction(ood >= tau).
double fpr_at_tpr(const std::vector<double>& ind, const std::vector<double>& ood, double target = 0.9);

/// Accuracy over records whose truth is an in-episode class.
double ind_accuracy(const std::vector<ood::ScoreRecord>& records);

struct MeanHw {
  double mean = 0.0;
  double hw = 0.0;  // 1.96 * sample std / sqrt(n); 0 for a single value
};

MeanHw mean_hw(const std::vector<double>& values);

enum class ModelKind { kHyperNetwork, kProtoNet };

struct OodMixTest {
  data::OodMix mode = data::OodMix::kIneOoe;
  data::MixLambda lambda{20.0, 20.0, std::nullopt};
};

struct EvalConfig {
  std::vector<ood::ScoreMethod> methods = {ood::ScoreMethod::kMsp};
  int episodes = 400;
  int ways = 5;
  int shots = 5;
  int ind_queries = 10;
  int ood_queries = 10;
  double noise_frac = 0.0;
  data::Split split = data::Split::kNovel;
  ModelKind model = ModelKind::kHyperNetwork;
  std::optional<double> odin_temperature;  // default depends on shots
  double odin_eps = ood::kOdinEps;
  std::optional<OodMixTest> ood_mix;  // replaces the OOD queries with synthesized ones

  void validate(const data::DatasetSpec& spec) const;
};

struct EvalReport {
  std::string method;
  int n_episodes = 0;
  std::uint64_t seed = 0;
  MeanHw ind_acc;
  MeanHw auroc;
  MeanHw fpr90;
  std::vector<double> episode_acc;
  std::vector<double> episode_auroc;
  std::vector<double> episode_fpr90;
};

struct EvalOutput {
  std::vector<EvalReport> reports;  // one per method, in request order
  std::vector<ood::ScoreRecord> records;  // episode-major, then method, then query
};

/// Episode e draws from RandomStream(seed).split(e). `h` may be null for
/// ModelKind::kProtoNet. Episodes are spread over `threads` workers; results
/// do not depend on the worker count.
EvalOutput evaluate(const nets::FeatureExtractor& f, const nets::HyperNetwork* h,
                    const data::Dataset& ds, const EvalConfig& cfg, std::uint64_t seed,
                    int threads = 1);

struct CovSpectrum {
  int shots = 0;
  int ways = 0;
  int support_size = 0;
  std::vector<double> singular_values;  // non-increasing
};

/// Singular values of the unregularized pooled covariance of the final
/// embedding for one sampled support per entry of `shots_list`.
std::vector<CovSpectrum> covariance_rank_diagnostic(const nets::FeatureExtractor& f,
                                                    const data::Dataset& ds,
                                                    const std::vector<int>& shots_list, int ways,
                                                    data::Split split, std::uint64_t seed);

}  // namespace hypermix::eval
