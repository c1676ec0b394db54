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

#include "hypermix/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include <Eigen/SVD>

#include "hypermix/error.hpp"

namespace hypermix::eval {

using diff::Value;

double auroc(const std::vector<double>& ind, const std::vector<double>& ood) {
  if (ind.empty() || ood.empty()) throw MetricError("auroc: both score lists must be non-empty");
  struct Item {
    double score;
    bool is_ind;
  };
  std::vector<Item> all;
  all.reserve(ind.size() + ood.size());
  for (double s : ind) all.push_back({s, true});
  for (double s : ood) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

  // Twice the IND rank sum, so tied midranks stay integral.
  double rank_sum2 = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    std::size_t n_ind = 0;
    while (j < all.size() && all[j].score == all[i].score) n_ind += all[j++].is_ind ? 1 : 0;
    rank_sum2 += static_cast<double>(n_ind) * static_cast<double>(i + 1 + j);
    i = j;
  }
  const auto n1 = static_cast<double>(ind.size());
  const auto n0 = static_cast<double>(ood.size());
  const double u2 = rank_sum2 - n1 * (n1 + 1.0);
  return (0.5 * u2) / (n1 * n0);
}

double fpr_at_tpr(const std::vector<double>& ind, const std::vector<double>& ood, double target) {
  if (ind.empty() || ood.empty()) throw MetricError("fpr_at_tpr: both score lists must be non-empty");
  if (!(target > 0.0 && target <= 1.0)) throw MetricError("fpr_at_tpr: target must lie in (0, 1]");
  std::vector<double> sorted = ind;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto n1 = static_cast<double>(ind.size());
  double tau = sorted.back();
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    if (k + 1 < sorted.size() && sorted[k + 1] == sorted[k]) continue;
    if (static_cast<double>(k + 1) / n1 >= target) {
      tau = sorted[k];
      break;
    }
  }
  const auto hits = std::count_if(ood.begin(), ood.end(), [tau](double s) { return s >= tau; });
  return static_cast<double>(hits) / static_cast<double>(ood.size());
}

double ind_accuracy(const std::vector<ood::ScoreRecord>& records) {
  std::size_t n = 0;
  std::size_t correct = 0;
  for (const auto& r : records) {
    if (r.truth == data::kOod) continue;
    ++n;
    if (r.pred == r.truth) ++correct;
  }
  if (n == 0) throw MetricError("ind_accuracy: no in-distribution queries");
  return static_cast<double>(correct) / static_cast<double>(n);
}

MeanHw mean_hw(const std::vector<double>& values) {
  if (values.empty()) throw MetricError("mean_hw: no values");
  const auto n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

void EvalConfig::validate(const data::DatasetSpec& spec) const {
  if (methods.empty()) throw ConfigError("evaluate: empty method list");
  if (episodes <= 0) throw ConfigError("evaluate: episodes must be positive");
  if (ways < 2 || shots <= 0) throw ConfigError("evaluate: ways >= 2 and shots > 0 required");
  if (ind_queries <= 0 || ood_queries <= 0) throw ConfigError("evaluate: query counts must be positive");
  if (!(noise_frac >= 0.0 && noise_frac <= 1.0)) throw ConfigError("evaluate: noise must lie in [0, 1]");
  if (odin_temperature && !(*odin_temperature > 0.0)) throw ConfigError("evaluate: ODIN temperature must be positive");
  if (!(odin_eps >= 0.0)) throw ConfigError("evaluate: ODIN eps must be non-negative");
  spec.validate(ways);
  const int n_split = split == data::Split::kBase  ? spec.n_base
                      : split == data::Split::kVal ? spec.n_val
                                                   : spec.n_novel;
  if (n_split <= ways) {
    throw ConfigError("evaluate: split '" + data::split_name(split) + "' has " + std::to_string(n_split) +
                      " classes; " + std::to_string(ways) + "-way episodes need out-of-episode classes");
  }
  const int per_class_ind = (ind_queries + ways - 1) / ways;
  const int extra = noise_frac > 0.0 ? shots : 0;
  if (shots + per_class_ind > spec.samples_per_class) {
    throw ConfigError("evaluate: " + std::to_string(shots) + " shots plus " + std::to_string(per_class_ind) +
                      " queries per class exceed " + std::to_string(spec.samples_per_class) +
                      " samples per class");
  }
  if (extra > spec.samples_per_class) {
    throw ConfigError("evaluate: noise replacement needs more samples per class than available");
  }
  if (ood_queries > (n_split - ways) * spec.samples_per_class) {
    throw ConfigError("evaluate: not enough out-of-episode samples for " + std::to_string(ood_queries) +
                      " OOD queries");
  }
}

namespace {

constexpr std::uint64_t kSampleStream = 0;
constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kPairingStream = 2;
constexpr std::uint64_t kOodMixStream = 3;

struct EpisodeResult {
  std::vector<double> acc, auc, fpr;  // per method
  std::vector<ood::ScoreRecord> records;
};

EpisodeResult run_episode(const nets::FeatureExtractor& f, const nets::HyperNetwork* h,
                          const data::Dataset& ds, const EvalConfig& cfg, const RandomStream& root,
                          int index) {
  const RandomStream ep_rng = root.split(static_cast<std::uint64_t>(index));
  RandomStream sample_rng = ep_rng.split(kSampleStream);
  data::Episode ep =
      data::sample_episode(ds, cfg.split, cfg.ways, cfg.shots, cfg.ind_queries, cfg.ood_queries, sample_rng);
  if (cfg.noise_frac > 0.0) {
    RandomStream pair_rng = ep_rng.split(kPairingStream);
    RandomStream noise_rng = ep_rng.split(kNoiseStream);
    const auto pairing = data::make_noise_pairing(ep, pair_rng);
    ep = data::inject_support_noise(ep, ds, cfg.noise_frac, pairing, noise_rng);
  }
  Matrix query_x = ep.query_x;
  if (cfg.ood_mix) {
    RandomStream mix_rng = ep_rng.split(kOodMixStream);
    query_x = data::mix_ood_testset(ep, ds, cfg.ood_mix->mode, cfg.ood_mix->lambda, mix_rng).x;
  }

  ood::LogitFn logits;
  if (cfg.model == ModelKind::kProtoNet) {
    Matrix protos;
    {
      diff::NoGradGuard guard;
      protos = nets::prototypes(Value::constant(f.embed(ep.support_x)), ep.support_y, cfg.ways).data();
    }
    logits = [&f, protos](const Value& x) {
      return diff::scale(diff::sqdist(f.embed(x), Value::constant(protos)), -1.0);
    };
  } else {
    const nets::ClassifierParams clf =
        nets::generate_classifier(*h, f, ep.support_x, ep.support_y, cfg.shots, cfg.ways);
    logits = [&f, clf](const Value& x) {
      return nets::classifier_logits(
          nets::ClassifierGraph{Value::constant(clf.weight), Value::constant(clf.bias)}, f.embed(x));
    };
  }

  Matrix probs;
  {
    diff::NoGradGuard guard;
    probs = diff::softmax_rows(logits(Value::constant(query_x))).data();
  }
  const std::vector<ood::Scored> msp = ood::score_msp_rows(probs);

  std::optional<std::vector<Matrix>> support_taps;
  std::optional<std::vector<Matrix>> query_taps;
  auto taps = [&]() {
    if (!support_taps) {
      support_taps = f.taps(ep.support_x);
      query_taps = f.taps(query_x);
    }
  };

  EpisodeResult out;
  for (ood::ScoreMethod method : cfg.methods) {
    std::vector<double> scores(msp.size());
    switch (method) {
      case ood::ScoreMethod::kMsp:
        for (std::size_t q = 0; q < msp.size(); ++q) scores[q] = msp[q].score;
        break;
      case ood::ScoreMethod::kEntropy:
        scores = ood::score_entropy_rows(probs);
        break;
      case ood::ScoreMethod::kOdin: {
        const double t = cfg.odin_temperature.value_or(ood::default_odin_temperature(cfg.shots));
        const auto odin = ood::score_odin(logits, query_x, t, cfg.odin_eps);
        for (std::size_t q = 0; q < odin.size(); ++q) scores[q] = odin[q].score;
        break;
      }
      case ood::ScoreMethod::kDm: {
        taps();
        const auto stats = ood::fit_gaussian_stats(*support_taps, ep.support_y, cfg.ways);
        scores = ood::score_dm(stats, *query_taps);
        break;
      }
      case ood::ScoreMethod::kPnml: {
        taps();
        const auto stats = ood::fit_pnml_stats(support_taps->back());
        const auto xg = ood::pnml_xg(stats, query_taps->back());
        for (std::size_t q = 0; q < msp.size(); ++q) {
          scores[q] = ood::score_pnml(probs.row(static_cast<Eigen::Index>(q)), xg[q]);
        }
        break;
      }
    }
    std::vector<double> ind;
    std::vector<double> oods;
    std::vector<ood::ScoreRecord> recs;
    const std::string name = ood::score_method_name(method);
    for (std::size_t q = 0; q < scores.size(); ++q) {
      if (!std::isfinite(scores[q])) {
        throw DomainError("evaluate: non-finite " + name + " score in episode " + std::to_string(index));
      }
      const int truth = ep.query_truth[q];
      (truth == data::kOod ? oods : ind).push_back(scores[q]);
      recs.push_back({index, static_cast<int>(q), name, scores[q], msp[q].pred, truth});
    }
    out.acc.push_back(ind_accuracy(recs));
    out.auc.push_back(auroc(ind, oods));
    out.fpr.push_back(fpr_at_tpr(ind, oods, 0.9));
    out.records.insert(out.records.end(), recs.begin(), recs.end());
  }
  return out;
}

}  // namespace

EvalOutput evaluate(const nets::FeatureExtractor& f, const nets::HyperNetwork* h, const data::Dataset& ds,
                    const EvalConfig& cfg, std::uint64_t seed, int threads) {
  cfg.validate(ds.spec());
  if (cfg.model == ModelKind::kHyperNetwork && h == nullptr) {
    throw ConfigError("evaluate: hypernetwork model requested without a hypernetwork");
  }
  nets::FeatureExtractor frozen_f = f.clone();
  frozen_f.mlp.set_trainable(false);
  std::optional<nets::HyperNetwork> frozen_h;
  if (h) {
    frozen_h = h->clone();
    frozen_h->mlp.set_trainable(false);
  }
  const nets::HyperNetwork* hp = frozen_h ? &*frozen_h : nullptr;
  const RandomStream root(seed);

  std::vector<EpisodeResult> results(static_cast<std::size_t>(cfg.episodes));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&]() {
    for (int e = next++; e < cfg.episodes; e = next++) {
      try {
        results[static_cast<std::size_t>(e)] = run_episode(frozen_f, hp, ds, cfg, root, e);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = cfg.episodes;
      }
    }
  };
  const int n_workers = std::clamp(threads, 1, cfg.episodes);
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  EvalOutput out;
  for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
    EvalReport rep;
    rep.method = ood::score_method_name(cfg.methods[m]);
    rep.n_episodes = cfg.episodes;
    rep.seed = seed;
    for (const auto& r : results) {
      rep.episode_acc.push_back(r.acc[m]);
      rep.episode_auroc.push_back(r.auc[m]);
      rep.episode_fpr90.push_back(r.fpr[m]);
    }
    rep.ind_acc = mean_hw(rep.episode_acc);
    rep.auroc = mean_hw(rep.episode_auroc);
    rep.fpr90 = mean_hw(rep.episode_fpr90);
    out.reports.push_back(std::move(rep));
  }
  for (auto& r : results) {
    out.records.insert(out.records.end(), std::make_move_iterator(r.records.begin()),
                       std::make_move_iterator(r.records.end()));
  }
  return out;
}

std::vector<CovSpectrum> covariance_rank_diagnostic(const nets::FeatureExtractor& f, const data::Dataset& ds,
                                                    const std::vector<int>& shots_list, int ways,
                                                    data::Split split, std::uint64_t seed) {
  const RandomStream root(seed);
  std::vector<CovSpectrum> out;
  for (std::size_t i = 0; i < shots_list.size(); ++i) {
    const int shots = shots_list[i];
    if (shots <= 0 || shots > ds.spec().samples_per_class) {
      throw ConfigError("diagnose-cov: shots " + std::to_string(shots) + " outside 1.." +
                        std::to_string(ds.spec().samples_per_class));
    }
    RandomStream rng = root.split(i);
    const data::Episode ep = data::sample_episode(ds, split, ways, shots, 0, 0, rng);
    const auto stats = ood::fit_gaussian_stats({f.embed(ep.support_x)}, ep.support_y, ways);
    Eigen::JacobiSVD<Matrix> svd(stats.layers.front().cov);
    const Eigen::VectorXd sv = svd.singularValues();
    CovSpectrum spec;
    spec.shots = shots;
    spec.ways = ways;
    spec.support_size = shots * ways;
    spec.singular_values.assign(sv.data(), sv.data() + sv.size());
    std::sort(spec.singular_values.begin(), spec.singular_values.end(), std::greater<>());
    out.push_back(std::move(spec));
  }
  return out;
}

}  // namespace hypermix::eval
