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

#include "hypermix/metatrain.hpp"

#include <algorithm>

#include "hypermix/error.hpp"

namespace hypermix::mix {
namespace {

constexpr std::uint64_t kSampleStream = 0;
constexpr std::uint64_t kParamMixStream = 1;
constexpr std::uint64_t kOoeMixStream = 2;
constexpr std::uint64_t kOoeQueryStream = 3;

struct EpisodeOutcome {
  Value loss;
  int correct = 0;
  int ind = 0;
  int mixed_pairs = 0;
  int same_class = 0;
};

int count_correct(const Matrix& scores, const std::vector<int>& truth) {
  int correct = 0;
  for (std::size_t q = 0; q < truth.size(); ++q) {
    Eigen::Index best = 0;
    scores.row(static_cast<Eigen::Index>(q)).maxCoeff(&best);
    if (best == truth[q]) ++correct;
  }
  return correct;
}

EpisodeOutcome run_episode(const nets::FeatureExtractor& f, const nets::HyperNetwork& h,
                           const data::Dataset& ds, const MetaTrainConfig& cfg, RandomStream ep_rng) {
  RandomStream sample_rng = ep_rng.split(kSampleStream);
  const int q_ind = cfg.queries_per_class * cfg.ways;
  data::Episode ep = data::sample_episode(ds, data::Split::kBase, cfg.ways, cfg.shots, q_ind, 0, sample_rng);
  const Matrix ind_targets = nets::one_hot(ep.query_truth, cfg.ways);

  EpisodeOutcome out;
  out.ind = q_ind;

  if (cfg.method == Method::kProtoNet) {
    Value protos = nets::prototypes(f.embed(Value::constant(ep.support_x)), ep.support_y, cfg.ways);
    Value logits = diff::scale(diff::sqdist(f.embed(Value::constant(ep.query_x)), protos), -1.0);
    Value probs = diff::softmax_rows(logits);
    out.loss = diff::cce_loss(probs, ind_targets);
    out.correct = count_correct(probs.data(), ep.query_truth);
    return out;
  }

  nets::SoftSupport support{ep.support_x, nets::one_hot(ep.support_y, cfg.ways)};
  if (uses_param_mix(cfg.method)) {
    RandomStream pm_rng = ep_rng.split(kParamMixStream);
    const int n_mix = cfg.mix.n_param_mix.value_or(cfg.ways * cfg.shots);
    ParamMixResult pm = parammix_augment(ep.support_x, ep.support_y, cfg.ways, n_mix,
                                         cfg.mix.param_lambda(), pm_rng);
    support = std::move(pm.support);
    out.mixed_pairs = pm.mixed;
    out.same_class = pm.same_class_pairs;
  }
  const nets::ClassifierGraph clf = nets::aggregate_classifier(h, f, support);

  Matrix query_x = ep.query_x;
  Matrix targets = ind_targets;
  int extra = 0;
  const int n_ooe = cfg.mix.n_ooe_mix.value_or(q_ind);
  if (uses_ooe_mix(cfg.method) && n_ooe > 0) {
    RandomStream om_rng = ep_rng.split(kOoeMixStream);
    LabeledBatch mixed = ooemix_augment(ep, ds, n_ooe, cfg.mix.ooe_lambda(), om_rng);
    query_x.conservativeResize(q_ind + n_ooe, Eigen::NoChange);
    targets.conservativeResize(q_ind + n_ooe, Eigen::NoChange);
    query_x.bottomRows(n_ooe) = mixed.x;
    targets.bottomRows(n_ooe) = mixed.labels;
    extra = n_ooe;
  } else if ((cfg.method == Method::kOe || cfg.method == Method::kOec) && n_ooe > 0) {
    RandomStream oq_rng = ep_rng.split(kOoeQueryStream);
    LabeledBatch pure = ooe_queries(ep, ds, n_ooe, oq_rng);
    query_x.conservativeResize(q_ind + n_ooe, Eigen::NoChange);
    targets.conservativeResize(q_ind + n_ooe, Eigen::NoChange);
    query_x.bottomRows(n_ooe) = pure.x;
    targets.bottomRows(n_ooe) = pure.labels;
    extra = n_ooe;
  }

  Value logits = nets::classifier_logits(clf, f.embed(Value::constant(std::move(query_x))));
  out.correct = count_correct(logits.data().topRows(q_ind), ep.query_truth);

  std::vector<Eigen::Index> ind_rows(static_cast<std::size_t>(q_ind));
  std::vector<Eigen::Index> ooe_rows(static_cast<std::size_t>(extra));
  for (int i = 0; i < q_ind; ++i) ind_rows[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < extra; ++i) ooe_rows[static_cast<std::size_t>(i)] = q_ind + i;

  switch (cfg.method) {
    case Method::kOe: {
      Value probs = diff::softmax_rows(logits);
      out.loss = oe_loss(diff::gather_rows(probs, ind_rows), ind_targets,
                         diff::gather_rows(probs, ooe_rows), cfg.mix.beta_oe);
      break;
    }
    case Method::kOec: {
      Value probs = diff::softmax_rows(diff::gather_rows(logits, ind_rows));
      Value scores = max_log_prob(logits);
      Value binary = oec_loss(diff::gather_rows(scores, ind_rows), diff::gather_rows(scores, ooe_rows));
      out.loss = diff::add(diff::cce_loss(probs, ind_targets),
                           diff::scale(binary, 1.0 / static_cast<double>(q_ind + extra)));
      break;
    }
    default:
      out.loss = diff::cce_loss(diff::softmax_rows(logits), targets);
      break;
  }
  return out;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::kPlain: return "plain";
    case Method::kParamMix: return "parammix";
    case Method::kOoeMix: return "ooemix";
    case Method::kHyperMix: return "hypermix";
    case Method::kOe: return "oe";
    case Method::kOec: return "oec";
    case Method::kProtoNet: return "protonet";
  }
  return "?";
}

const std::vector<std::string>& method_tokens() {
  static const std::vector<std::string> tokens{"plain", "parammix", "ooemix", "hypermix",
                                               "oe",    "oec",      "protonet"};
  return tokens;
}

Method parse_method(const std::string& token) {
  static const Method all[] = {Method::kPlain, Method::kParamMix, Method::kOoeMix, Method::kHyperMix,
                               Method::kOe,    Method::kOec,      Method::kProtoNet};
  for (Method m : all) {
    if (method_name(m) == token) return m;
  }
  std::string valid;
  for (const auto& t : method_tokens()) valid += (valid.empty() ? "" : ", ") + t;
  throw ConfigError("unknown training method '" + token + "' (valid: " + valid + ")");
}

bool uses_param_mix(Method m) { return m == Method::kParamMix || m == Method::kHyperMix; }
bool uses_ooe_mix(Method m) { return m == Method::kOoeMix || m == Method::kHyperMix; }

void MetaTrainConfig::validate() const {
  if (epochs < 0 || batches_per_epoch <= 0 || episodes_per_batch <= 0) {
    throw ConfigError("metatrain: epochs >= 0, batches and episodes per batch > 0 required");
  }
  if (ways < 2 || shots <= 0 || queries_per_class <= 0) {
    throw ConfigError("metatrain: ways >= 2, shots > 0 and queries_per_class > 0 required");
  }
  if (lr < 0) throw ConfigError("metatrain: negative learning rate");
  mix.validate();
}

MetaTrainResult metatrain(nets::FeatureExtractor& f, nets::HyperNetwork& h, const data::Dataset& ds,
                          const MetaTrainConfig& cfg, RandomStream rng) {
  cfg.validate();
  ds.spec().validate(cfg.ways);
  const bool protonet = cfg.method == Method::kProtoNet;
  if ((uses_ooe_mix(cfg.method) || cfg.method == Method::kOe || cfg.method == Method::kOec) &&
      ds.spec().n_base <= cfg.ways) {
    throw ConfigError("metatrain: method '" + method_name(cfg.method) +
                      "' needs out-of-episode classes but the base split has only " +
                      std::to_string(ds.spec().n_base));
  }

  diff::ParamSet params;
  const bool train_f = protonet || cfg.finetune_extractor;
  f.mlp.set_trainable(train_f);
  if (train_f) f.mlp.register_params(params, "F");
  if (!protonet) {
    h.mlp.set_trainable(true);
    h.mlp.register_params(params, "H");
  }
  diff::Sgd opt(cfg.lr, cfg.momentum, cfg.weight_decay);

  MetaTrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const RandomStream epoch_rng = rng.split(static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    long correct = 0;
    long total = 0;
    for (int b = 0; b < cfg.batches_per_epoch; ++b) {
      const RandomStream batch_rng = epoch_rng.split(static_cast<std::uint64_t>(b));
      params.zero_grads();
      Value batch_loss;
      for (int e = 0; e < cfg.episodes_per_batch; ++e) {
        EpisodeOutcome o = run_episode(f, h, ds, cfg, batch_rng.split(static_cast<std::uint64_t>(e)));
        batch_loss = batch_loss.defined() ? diff::add(batch_loss, o.loss) : o.loss;
        correct += o.correct;
        total += o.ind;
        result.param_mix_pairs += o.mixed_pairs;
        result.param_mix_same_class += o.same_class;
      }
      batch_loss = diff::scale(batch_loss, 1.0 / cfg.episodes_per_batch);
      batch_loss.backward();
      opt.step(params);
      loss_sum += batch_loss.item();
    }
    result.epoch_loss.push_back(loss_sum / cfg.batches_per_epoch);
    result.epoch_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(total));
  }
  f.mlp.set_trainable(true);
  h.mlp.set_trainable(true);
  return result;
}

}  // namespace hypermix::mix
