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

#include "hypermix/nets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hypermix/error.hpp"

namespace hypermix::nets {
namespace {

bool row_less(const Matrix& m, Eigen::Index a, Eigen::Index b) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (m(a, j) != m(b, j)) return m(a, j) < m(b, j);
  }
  return false;
}

bool row_equal(const Matrix& m, Eigen::Index a, Eigen::Index b) {
  return !row_less(m, a, b) && !row_less(m, b, a);
}

Matrix permute_rows(const Matrix& m, const std::vector<Eigen::Index>& order) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < order.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(order[i]);
  return out;
}

}  // namespace

// --- Mlp -------------------------------------------------------------------

Mlp::Mlp(std::vector<int> sizes, RandomStream& rng, double output_gain) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw ConfigError("Mlp: need at least an input and an output size");
  for (int s : sizes_) {
    if (s <= 0) throw ConfigError("Mlp: layer sizes must be positive");
  }
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int fan_in = sizes_[l];
    const int fan_out = sizes_[l + 1];
    double stddev = std::sqrt(2.0 / fan_in);
    if (l + 2 == sizes_.size()) stddev *= output_gain;
    Matrix w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = stddev * rng.normal();
    }
    weights_.push_back(Value::leaf(std::move(w)));
    biases_.push_back(Value::leaf(Matrix::Zero(1, fan_out)));
  }
}

Value Mlp::forward(const Value& x, std::vector<Value>* taps) const {
  if (x.cols() != in_dim()) {
    throw DimensionError("Mlp: input has " + std::to_string(x.cols()) + " columns, expected " +
                         std::to_string(in_dim()));
  }
  Value h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = diff::add_row(diff::matmul(h, weights_[l]), biases_[l]);
    if (l + 1 < weights_.size()) h = diff::relu(h);
    if (taps) taps->push_back(h);
  }
  return h;
}

Matrix Mlp::forward(const Matrix& x, std::vector<Matrix>* taps) const {
  diff::NoGradGuard guard;
  std::vector<Value> vtaps;
  Value out = forward(Value::constant(x), taps ? &vtaps : nullptr);
  if (taps) {
    for (const auto& t : vtaps) taps->push_back(t.data());
  }
  return out.data();
}

void Mlp::register_params(diff::ParamSet& params, const std::string& prefix) const {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    params.add(prefix + ".w" + std::to_string(l), weights_[l]);
    params.add(prefix + ".b" + std::to_string(l), biases_[l]);
  }
}

void Mlp::set_trainable(bool on) {
  for (auto& w : weights_) w.set_requires_grad(on);
  for (auto& b : biases_) b.set_requires_grad(on);
}

Mlp Mlp::clone() const {
  Mlp out;
  out.sizes_ = sizes_;
  for (const auto& w : weights_) {
    Value v = Value::leaf(w.data());
    v.set_requires_grad(w.requires_grad());
    out.weights_.push_back(v);
  }
  for (const auto& b : biases_) {
    Value v = Value::leaf(b.data());
    v.set_requires_grad(b.requires_grad());
    out.biases_.push_back(v);
  }
  return out;
}

void Mlp::save_to(diff::Checkpoint& ckpt, const std::string& prefix) const {
  Matrix sizes(1, static_cast<Eigen::Index>(sizes_.size()));
  for (std::size_t i = 0; i < sizes_.size(); ++i) sizes(0, static_cast<Eigen::Index>(i)) = sizes_[i];
  ckpt.tensors[prefix + ".sizes"] = sizes;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    ckpt.tensors[prefix + ".w" + std::to_string(l)] = weights_[l].data();
    ckpt.tensors[prefix + ".b" + std::to_string(l)] = biases_[l].data();
  }
}

Mlp Mlp::load_from(const diff::Checkpoint& ckpt, const std::string& prefix) {
  auto find = [&](const std::string& name) -> const Matrix& {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) throw IoError("checkpoint has no tensor '" + name + "'");
    return it->second;
  };
  const Matrix& sizes = find(prefix + ".sizes");
  Mlp out;
  for (Eigen::Index i = 0; i < sizes.size(); ++i) out.sizes_.push_back(static_cast<int>(sizes(0, i)));
  if (out.sizes_.size() < 2) throw IoError("checkpoint: '" + prefix + "' has fewer than two layers");
  for (std::size_t l = 0; l + 1 < out.sizes_.size(); ++l) {
    const Matrix& w = find(prefix + ".w" + std::to_string(l));
    const Matrix& b = find(prefix + ".b" + std::to_string(l));
    if (w.rows() != out.sizes_[l] || w.cols() != out.sizes_[l + 1] || b.rows() != 1 ||
        b.cols() != out.sizes_[l + 1]) {
      throw IoError("checkpoint: layer " + std::to_string(l) + " of '" + prefix +
                    "' does not match the recorded architecture");
    }
    out.weights_.push_back(Value::leaf(w));
    out.biases_.push_back(Value::leaf(b));
  }
  return out;
}

// --- F / H -----------------------------------------------------------------

FeatureExtractor FeatureExtractor::create(int input_dim, const std::vector<int>& hidden,
                                          int feat_dim, RandomStream& rng) {
  std::vector<int> sizes{input_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(feat_dim);
  return {Mlp(std::move(sizes), rng)};
}

std::vector<Matrix> FeatureExtractor::taps(const Matrix& x) const {
  std::vector<Matrix> out;
  mlp.forward(x, &out);
  return out;
}

HyperNetwork HyperNetwork::create(int feat_dim, const std::vector<int>& hidden, RandomStream& rng) {
  std::vector<int> sizes{feat_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(feat_dim + 1);
  // Small output layer so an untrained H yields near-uniform predictions.
  return {Mlp(std::move(sizes), rng, 0.1)};
}

// --- classifier generation -------------------------------------------------

Matrix one_hot(const std::vector<int>& labels, int ways) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), ways);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= ways) {
      throw DomainError("one_hot: label " + std::to_string(labels[i]) + " outside 0.." +
                        std::to_string(ways - 1));
    }
    out(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return out;
}

std::vector<Eigen::Index> canonical_order(const Matrix& x, const Matrix& labels) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    // Larger label mass on lower classes first, then x lexicographically.
    for (Eigen::Index j = 0; j < labels.cols(); ++j) {
      if (labels(a, j) != labels(b, j)) return labels(a, j) > labels(b, j);
    }
    if (!row_equal(x, a, b)) return row_less(x, a, b);
    return a < b;
  });
  return order;
}

ClassifierGraph aggregate_classifier(const HyperNetwork& h, const FeatureExtractor& f,
                                     const SoftSupport& support) {
  const Matrix& labels = support.labels;
  if (labels.rows() != support.x.rows()) {
    throw DimensionError("aggregate_classifier: " + std::to_string(support.x.rows()) +
                         " samples but " + std::to_string(labels.rows()) + " labels");
  }
  if (h.code_dim() != f.feat_dim() + 1) {
    throw DimensionError("aggregate_classifier: hypernetwork emits " + std::to_string(h.code_dim()) +
                         " entries, expected feat_dim + 1 = " + std::to_string(f.feat_dim() + 1));
  }
  const auto order = canonical_order(support.x, labels);
  const Matrix xs = permute_rows(support.x, order);
  const Matrix ls = permute_rows(labels, order);
  const Eigen::Index ways = ls.cols();

  Matrix agg = ls.transpose();
  for (Eigen::Index n = 0; n < ways; ++n) {
    const double mass = agg.row(n).sum();
    if (!(mass > 0.0)) {
      throw AggregationError("class " + std::to_string(n) + " has zero label mass in the support set");
    }
    agg.row(n) /= mass;
  }
  Value codes = h.codes(f.embed(Value::constant(xs)));
  Value full = diff::matmul(Value::constant(std::move(agg)), codes);
  const Eigen::Index d = f.feat_dim();
  return {diff::slice_cols(full, 0, d), diff::transpose(diff::slice_cols(full, d, 1))};
}

ClassifierGraph generate_classifier_graph(const HyperNetwork& h, const FeatureExtractor& f,
                                          const Matrix& support_x,
                                          const std::vector<int>& support_y, int shots, int ways) {
  std::vector<int> counts(static_cast<std::size_t>(ways), 0);
  for (int y : support_y) {
    if (y < 0 || y >= ways) throw DomainError("support label " + std::to_string(y) + " out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  for (int n = 0; n < ways; ++n) {
    if (counts[static_cast<std::size_t>(n)] != shots) {
      throw AggregationError("class " + std::to_string(n) + " has " +
                             std::to_string(counts[static_cast<std::size_t>(n)]) +
                             " support samples, expected " + std::to_string(shots));
    }
  }
  return aggregate_classifier(h, f, {support_x, one_hot(support_y, ways)});
}

ClassifierParams generate_classifier(const HyperNetwork& h, const FeatureExtractor& f,
                                     const Matrix& support_x, const std::vector<int>& support_y,
                                     int shots, int ways) {
  diff::NoGradGuard guard;
  return generate_classifier_graph(h, f, support_x, support_y, shots, ways).freeze();
}

Value classifier_logits(const ClassifierGraph& c, const Value& feats) {
  return diff::add_row(diff::matmul(feats, diff::transpose(c.weight)), c.bias);
}

Matrix classifier_logits(const ClassifierParams& c, const Matrix& feats) {
  diff::NoGradGuard guard;
  return classifier_logits(ClassifierGraph{Value::constant(c.weight), Value::constant(c.bias)},
                           Value::constant(feats))
      .data();
}

Matrix classify(const ClassifierParams& c, const FeatureExtractor& f, const Matrix& x) {
  diff::NoGradGuard guard;
  return diff::softmax_rows(Value::constant(classifier_logits(c, f.embed(x)))).data();
}

Value prototypes(const Value& support_feats, const std::vector<int>& support_y, int ways) {
  Matrix avg = one_hot(support_y, ways).transpose();
  for (Eigen::Index n = 0; n < ways; ++n) {
    const double count = avg.row(n).sum();
    if (count == 0.0) throw AggregationError("class " + std::to_string(n) + " has no support samples");
    avg.row(n) /= count;
  }
  return diff::matmul(Value::constant(std::move(avg)), support_feats);
}

Matrix protonet_classify(const FeatureExtractor& f, const Matrix& support_x,
                         const std::vector<int>& support_y, int ways, const Matrix& x) {
  diff::NoGradGuard guard;
  Value protos = prototypes(Value::constant(f.embed(support_x)), support_y, ways);
  Value d = diff::sqdist(Value::constant(f.embed(x)), protos);
  return diff::softmax_rows(diff::scale(d, -1.0)).data();
}

// --- pretraining -------------------------------------------------------------

PretrainResult pretrain_extractor(FeatureExtractor init, const data::Dataset& ds,
                                  const PretrainConfig& cfg, RandomStream rng) {
  if (cfg.epochs < 0 || cfg.batch_size <= 0) {
    throw ConfigError("pretrain: epochs must be >= 0 and batch_size > 0");
  }
  const auto base = ds.classes_in(data::Split::kBase);
  const int spc = ds.spec().samples_per_class;
  if (cfg.holdout_per_class < 0 || cfg.holdout_per_class >= spc) {
    throw ConfigError("pretrain: holdout_per_class must lie in [0, samples_per_class)");
  }
  PretrainResult result{std::move(init), {}};
  if (cfg.epochs == 0) return result;

  FeatureExtractor& f = result.extractor;
  RandomStream head_rng = rng.split(0);
  RandomStream order_rng = rng.split(1);
  Mlp head({f.feat_dim(), static_cast<int>(base.size())}, head_rng);

  std::vector<int> samples;
  std::vector<int> label_of_sample(static_cast<std::size_t>(ds.num_samples()), -1);
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto s = ds.samples_of(base[i]);
    for (int k = 0; k < spc - cfg.holdout_per_class; ++k) {
      samples.push_back(s[static_cast<std::size_t>(k)]);
      label_of_sample[static_cast<std::size_t>(s[static_cast<std::size_t>(k)])] = static_cast<int>(i);
    }
  }

  diff::ParamSet params;
  f.mlp.register_params(params, "F");
  head.register_params(params, "head");
  diff::Sgd opt(cfg.lr, cfg.momentum, cfg.weight_decay);
  const int nclass = static_cast<int>(base.size());
  const int d = ds.spec().input_dim;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = cfg.lr;
    for (double m : cfg.milestones) {
      if (epoch >= static_cast<int>(std::floor(m * cfg.epochs))) lr *= cfg.gamma;
    }
    opt.set_lr(lr);
    order_rng.partial_shuffle(std::span<int>(samples), samples.size());
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(samples.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Matrix xb(static_cast<Eigen::Index>(end - start), d);
      std::vector<int> yb;
      for (std::size_t i = start; i < end; ++i) {
        const int s = samples[i];
        xb.row(static_cast<Eigen::Index>(i - start)) = ds.features().row(s);
        yb.push_back(label_of_sample[static_cast<std::size_t>(s)]);
      }
      params.zero_grads();
      Value logits = head.forward(f.embed(Value::constant(std::move(xb))));
      Value loss = diff::cce_loss(diff::softmax_rows(logits), one_hot(yb, nclass));
      loss.backward();
      opt.step(params);
      loss_sum += loss.item();
      ++batches;
    }
    result.epoch_loss.push_back(loss_sum / batches);
  }
  return result;
}

}  // namespace hypermix::nets
