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

#include <optional>
#include <string>
#include <vector>

#include "hypermix/data.hpp"
#include "hypermix/diff.hpp"
#include "hypermix/nets.hpp"
#include "hypermix/rng.hpp"

namespace hypermix::mix {

using diff::Matrix;
using diff::RowVector;
using diff::Value;

/// Mixing hyperparameters. Unset counts resolve per episode: ParamMix adds
/// K*N mixed supports (2KN in total), OOE-Mix adds as many queries as the
/// episode has IND queries.
struct MixConfig {
  double a_pm = 2.0;
  double b_pm = 5.0;
  double a_om = 20.0;
  double b_om = 20.0;
  std::optional<int> n_param_mix;
  std::optional<int> n_ooe_mix;
  double beta_oe = 1.0;

  void validate() const;
  data::MixLambda param_lambda() const { return {a_pm, b_pm, std::nullopt}; }
  data::MixLambda ooe_lambda() const { return {a_om, b_om, std::nullopt}; }
};

struct MixedSample {
  RowVector x;
  RowVector y;
};

/// x = lambda x1 + (1 - lambda) x2, y = lambda y1 + (1 - lambda) y2.
MixedSample mixup(const MixedSample& s1, const MixedSample& s2, double lambda);

struct ParamMixResult {
  nets::SoftSupport support;  // originals (one-hot) first, then mixed rows
  int mixed = 0;
  int same_class_pairs = 0;
};

/// Appends `n_mix` Mixup samples built from uniformly random ordered pairs of
/// distinct support rows, with a fresh lambda per pair.
ParamMixResult parammix_augment(const Matrix& support_x, const std::vector<int>& support_y,
                                int ways, int n_mix, const data::MixLambda& lambda,
                                RandomStream& rng);

/// Soft-label weighted aggregation of the per-sample weight codes.
nets::ClassifierGraph parammix_aggregate_graph(const nets::HyperNetwork& h,
                                               const nets::FeatureExtractor& f,
                                               const nets::SoftSupport& support);
nets::ClassifierParams parammix_aggregate(const nets::HyperNetwork& h,
                                          const nets::FeatureExtractor& f,
                                          const nets::SoftSupport& support);

struct LabeledBatch {
  Matrix x;
  Matrix labels;
};

/// Queries mixing one unused in-episode sample (one-hot label, class drawn
/// uniformly) with one out-of-episode sample (label 1/N), a fresh lambda per
/// pair. Throws SamplingError when either pool is empty.
LabeledBatch ooemix_augment(const data::Episode& ep, const data::Dataset& ds, int count,
                            const data::MixLambda& lambda, RandomStream& rng);

/// Plain out-of-episode queries with uniform labels, drawn without replacement.
LabeledBatch ooe_queries(const data::Episode& ep, const data::Dataset& ds, int count,
                         RandomStream& rng);

/// CCE(IND) + beta * CCE(OOE against the uniform distribution).
Value oe_loss(const Value& ind_probs, const Matrix& ind_targets, const Value& ooe_probs,
              double beta);

/// max_c log p(c | x) per row, from logits.
Value max_log_prob(const Value& logits);

/// -sum_IND log sigmoid(s) - sum_OOE log(1 - sigmoid(s)).
Value oec_loss(const Value& ind_scores, const Value& ooe_scores);

}  // namespace hypermix::mix
