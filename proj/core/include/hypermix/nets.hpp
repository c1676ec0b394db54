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
#include "hypermix/diff.hpp"
#include "hypermix/rng.hpp"

namespace hypermix::nets {

using diff::Matrix;
using diff::Value;

/// Fully connected network with relu between layers and a linear output.
class Mlp {
 public:
  Mlp() = default;
  /// He-normal weights scaled by `output_gain` on the last layer; zero biases.
  Mlp(std::vector<int> sizes, RandomStream& rng, double output_gain = 1.0);

  const std::vector<int>& sizes() const { return sizes_; }
  int in_dim() const { return sizes_.front(); }
  int out_dim() const { return sizes_.back(); }
  std::size_t num_layers() const { return weights_.size(); }

  /// When `taps` is given it receives the post-relu output of every hidden
  /// layer followed by the final output.
  Value forward(const Value& x, std::vector<Value>* taps = nullptr) const;
  Matrix forward(const Matrix& x, std::vector<Matrix>* taps = nullptr) const;

  void register_params(diff::ParamSet& params, const std::string& prefix) const;
  void set_trainable(bool on);

  /// Deep copy; the clone shares no graph nodes with this network.
  Mlp clone() const;

  void save_to(diff::Checkpoint& ckpt, const std::string& prefix) const;
  static Mlp load_from(const diff::Checkpoint& ckpt, const std::string& prefix);

 private:
  std::vector<int> sizes_;
  std::vector<Value> weights_;  // in x out
  std::vector<Value> biases_;   // 1 x out
};

/// Backbone F. Tap points for Mahalanobis statistics are every hidden layer
/// plus the final embedding.
struct FeatureExtractor {
  Mlp mlp;

  static FeatureExtractor create(int input_dim, const std::vector<int>& hidden, int feat_dim,
                                 RandomStream& rng);
  int feat_dim() const { return mlp.out_dim(); }
  Value embed(const Value& x) const { return mlp.forward(x); }
  Matrix embed(const Matrix& x) const { return mlp.forward(x); }
  std::vector<Matrix> taps(const Matrix& x) const;
  FeatureExtractor clone() const { return {mlp.clone()}; }
};

/// Hypernetwork H: maps one embedding to a weight code of feat_dim + 1
/// entries, the last of which becomes the class bias.
struct HyperNetwork {
  Mlp mlp;

  static HyperNetwork create(int feat_dim, const std::vector<int>& hidden, RandomStream& rng);
  int code_dim() const { return mlp.out_dim(); }
  Value codes(const Value& feats) const { return mlp.forward(feats); }
  HyperNetwork clone() const { return {mlp.clone()}; }
};

/// Generated linear classifier: logits = W f + b.
struct ClassifierParams {
  Matrix weight;  // ways x feat_dim
  Matrix bias;    // 1 x ways
};

/// Classifier held as graph values, so a loss can reach H (and F).
struct ClassifierGraph {
  Value weight;  // ways x feat_dim
  Value bias;    // 1 x ways

  ClassifierParams freeze() const { return {weight.data(), bias.data()}; }
};

/// Support rows paired with soft labels (rows of `labels` are distributions).
struct SoftSupport {
  Matrix x;
  Matrix labels;  // S x ways
};

Matrix one_hot(const std::vector<int>& labels, int ways);

/// Rows sorted by (label row, x row) lexicographically. Aggregation runs in
/// this order, so generated classifiers do not depend on support order.
std::vector<Eigen::Index> canonical_order(const Matrix& x, const Matrix& labels);

/// w_n = (sum_s y_sn)^-1 sum_s y_sn H(F(x_s)), bias from the extra code entry.
/// Throws AggregationError naming the class whose label mass is zero.
ClassifierGraph aggregate_classifier(const HyperNetwork& h, const FeatureExtractor& f,
                                     const SoftSupport& support);

/// Mean of the per-sample codes of each class. Requires exactly `shots`
/// samples for each of `ways` labels.
ClassifierGraph generate_classifier_graph(const HyperNetwork& h, const FeatureExtractor& f,
                                          const Matrix& support_x,
                                          const std::vector<int>& support_y, int shots, int ways);
ClassifierParams generate_classifier(const HyperNetwork& h, const FeatureExtractor& f,
                                     const Matrix& support_x, const std::vector<int>& support_y,
                                     int shots, int ways);

Value classifier_logits(const ClassifierGraph& c, const Value& feats);
Matrix classifier_logits(const ClassifierParams& c, const Matrix& feats);

/// softmax(W F(x) + b), one row per query.
Matrix classify(const ClassifierParams& c, const FeatureExtractor& f, const Matrix& x);

/// Per-class mean embedding of the support.
Value prototypes(const Value& support_feats, const std::vector<int>& support_y, int ways);
/// softmax over negative squared Euclidean distance to the class prototypes.
Matrix protonet_classify(const FeatureExtractor& f, const Matrix& support_x,
                         const std::vector<int>& support_y, int ways, const Matrix& x);

struct PretrainConfig {
  int epochs = 50;
  int batch_size = 64;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double gamma = 0.2;
  std::vector<double> milestones = {0.6, 0.8};  // fractions of epochs
  int holdout_per_class = 0;  // last samples of every base class left out
};

struct PretrainResult {
  FeatureExtractor extractor;
  std::vector<double> epoch_loss;
};

/// Supervised CCE pretraining of F through a temporary |C_b|-way linear head
/// that is discarded afterwards. Mini-batches are reshuffled every epoch.
PretrainResult pretrain_extractor(FeatureExtractor init, const data::Dataset& ds,
                                  const PretrainConfig& cfg, RandomStream rng);

}  // namespace hypermix::nets
