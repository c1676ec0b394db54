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

#include "hypermix/mixing.hpp"

#include <algorithm>

#include "hypermix/error.hpp"

namespace hypermix::mix {

void MixConfig::validate() const {
  if (!(a_pm > 0 && b_pm > 0 && a_om > 0 && b_om > 0)) {
    throw ConfigError("mix: Beta shape parameters must be > 0");
  }
  if ((n_param_mix && *n_param_mix < 0) || (n_ooe_mix && *n_ooe_mix < 0)) {
    throw ConfigError("mix: counts must be >= 0");
  }
  if (beta_oe < 0) throw ConfigError("mix: beta_oe must be >= 0");
}

MixedSample mixup(const MixedSample& s1, const MixedSample& s2, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("mixup: lambda outside [0, 1]");
  if (s1.x.size() != s2.x.size() || s1.y.size() != s2.y.size()) {
    throw DimensionError("mixup: samples differ in shape");
  }
  return {lambda * s1.x + (1.0 - lambda) * s2.x, lambda * s1.y + (1.0 - lambda) * s2.y};
}

ParamMixResult parammix_augment(const Matrix& support_x, const std::vector<int>& support_y,
                                int ways, int n_mix, const data::MixLambda& lambda,
                                RandomStream& rng) {
  const auto s = static_cast<Eigen::Index>(support_y.size());
  if (support_x.rows() != s) throw DimensionError("parammix_augment: x and labels disagree");
  if (n_mix < 0) throw ConfigError("parammix_augment: negative mix count");
  if (n_mix > 0 && s < 2) throw SamplingError("parammix_augment: need at least two support samples");

  const Matrix labels = nets::one_hot(support_y, ways);
  ParamMixResult out;
  out.support.x.resize(s + n_mix, support_x.cols());
  out.support.labels.resize(s + n_mix, ways);
  out.support.x.topRows(s) = support_x;
  out.support.labels.topRows(s) = labels;
  for (int m = 0; m < n_mix; ++m) {
    const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(s)));
    auto j = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(s - 1)));
    if (j >= i) ++j;
    const double lam = lambda.draw(rng);
    const MixedSample mixed = mixup({support_x.row(i), labels.row(i)},
                                    {support_x.row(j), labels.row(j)}, lam);
    out.support.x.row(s + m) = mixed.x;
    out.support.labels.row(s + m) = mixed.y;
    if (support_y[static_cast<std::size_t>(i)] == support_y[static_cast<std::size_t>(j)]) {
      ++out.same_class_pairs;
    }
  }
  out.mixed = n_mix;
  return out;
}

nets::ClassifierGraph parammix_aggregate_graph(const nets::HyperNetwork& h,
                                               const nets::FeatureExtractor& f,
                                               const nets::SoftSupport& support) {
  return nets::aggregate_classifier(h, f, support);
}

nets::ClassifierParams parammix_aggregate(const nets::HyperNetwork& h,
                                          const nets::FeatureExtractor& f,
                                          const nets::SoftSupport& support) {
  diff::NoGradGuard guard;
  return parammix_aggregate_graph(h, f, support).freeze();
}

LabeledBatch ooemix_augment(const data::Episode& ep, const data::Dataset& ds, int count,
                            const data::MixLambda& lambda, RandomStream& rng) {
  const int ways = ep.ways;
  LabeledBatch out{Matrix(count, ds.spec().input_dim), Matrix(count, ways)};
  if (count == 0) return out;
  std::vector<int> ooe_all;
  for (const auto& pool : ep.ooe_pool) ooe_all.insert(ooe_all.end(), pool.begin(), pool.end());
  if (ooe_all.empty()) throw SamplingError("OOE-Mix: out-of-episode pool is empty");
  const RowVector uniform = RowVector::Constant(ways, 1.0 / ways);
  for (int m = 0; m < count; ++m) {
    const auto label = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(ways)));
    const auto& pool = ep.ine_pool.at(label);
    if (pool.empty()) throw SamplingError("OOE-Mix: in-episode pool of label " + std::to_string(label) + " is empty");
    const int ine = pool[static_cast<std::size_t>(rng.below(pool.size()))];
    const int ooe = ooe_all[static_cast<std::size_t>(rng.below(ooe_all.size()))];
    const double lam = lambda.draw(rng);
    RowVector onehot = RowVector::Zero(ways);
    onehot(static_cast<Eigen::Index>(label)) = 1.0;
    const MixedSample mixed = mixup({ds.features().row(ine), onehot}, {ds.features().row(ooe), uniform}, lam);
    out.x.row(m) = mixed.x;
    out.labels.row(m) = mixed.y;
  }
  return out;
}

LabeledBatch ooe_queries(const data::Episode& ep, const data::Dataset& ds, int count,
                         RandomStream& rng) {
  std::vector<int> ooe_all;
  for (const auto& pool : ep.ooe_pool) ooe_all.insert(ooe_all.end(), pool.begin(), pool.end());
  if (static_cast<int>(ooe_all.size()) < count) {
    throw SamplingError("OOE queries: requested " + std::to_string(count) + ", pool holds " +
                        std::to_string(ooe_all.size()));
  }
  const auto picks = rng.choose(ooe_all.size(), static_cast<std::size_t>(count));
  LabeledBatch out{Matrix(count, ds.spec().input_dim),
                   Matrix::Constant(count, ep.ways, 1.0 / ep.ways)};
  for (int m = 0; m < count; ++m) out.x.row(m) = ds.features().row(ooe_all[picks[static_cast<std::size_t>(m)]]);
  return out;
}

Value oe_loss(const Value& ind_probs, const Matrix& ind_targets, const Value& ooe_probs,
              double beta) {
  if (beta < 0) throw ConfigError("oe_loss: beta must be >= 0");
  Value loss = diff::cce_loss(ind_probs, ind_targets);
  if (ooe_probs.rows() == 0) return loss;
  const Matrix uniform = Matrix::Constant(ooe_probs.rows(), ooe_probs.cols(), 1.0 / ooe_probs.cols());
  return diff::add(loss, diff::scale(diff::cce_loss(ooe_probs, uniform), beta));
}

Value max_log_prob(const Value& logits) { return diff::max_rows(diff::log_softmax_rows(logits)); }

Value oec_loss(const Value& ind_scores, const Value& ooe_scores) {
  // -log sigmoid(s) = softplus(-s);  -log(1 - sigmoid(s)) = softplus(s)
  Value ind = diff::sum(diff::softplus(diff::scale(ind_scores, -1.0)));
  if (ooe_scores.rows() == 0) return ind;
  return diff::add(ind, diff::sum(diff::softplus(ooe_scores)));
}

}  // namespace hypermix::mix
