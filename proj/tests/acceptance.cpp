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

// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "app/commands.hpp"
#include "hypermix/eval.hpp"
#include "hypermix/metatrain.hpp"
#include "hypermix/score.hpp"
#include "support/fd_cases.hpp"
#include "support/oracles.hpp"

namespace {

using namespace hypermix;
using Clock = std::chrono::steady_clock;
using diff::Matrix;
using diff::RowVector;
using diff::Value;

// Pinned tolerances.
constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-4;
constexpr int kFdSeeds = 100;
constexpr double kFdBudgetSec = 10.0;
constexpr int kIdentityInputs = 1000;
constexpr int kMetricInstances = 1000;
constexpr int kMetricMaxScores = 100;
constexpr double kMetricBudgetSec = 30.0;
constexpr double kPnmlTol = 1e-12;
constexpr double kDmExpected = -0.9189;
constexpr double kDmTol = 1e-4;
constexpr double kRankZero = 1e-10;
constexpr int kTrendSeeds = 5;
constexpr int kTrendEpisodes = 400;
constexpr double kHyperMixMargin = 0.01;
constexpr double kPipelineBudgetSec = 15.0 * 60.0;
constexpr double kInversionTol = 0.005;
const std::vector<double> kNoiseLevels = {0.0, 0.1, 0.2, 0.3, 0.4};

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_case;
  std::size_t checked = 0;
  for (int seed = 0; seed < kFdSeeds; ++seed) {
    RandomStream rng(static_cast<std::uint64_t>(seed), 101);
    for (const auto& c : oracle::fd_cases(rng)) {
      const double rel = oracle::finite_difference(c.op, c.inputs, rng, kFdStep).max_rel;
      ++checked;
      if (rel > worst) {
        worst = rel;
        worst_case = c.name + " seed " + std::to_string(seed);
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < kFdRelTol && secs < kFdBudgetSec,
          std::to_string(checked) + " checks, worst rel err " + fmt("%.3g", worst) + " (" + worst_case + "), " +
              fmt("%.2f", secs) + " s"};
}

nets::FeatureExtractor small_extractor(RandomStream& rng) { return nets::FeatureExtractor::create(16, {64, 64}, 32, rng); }

Outcome formula_identities() {
  // ODIN(T=1, eps=0) against MSP on 1000 random inputs.
  RandomStream rng(7, 202);
  RandomStream rf = rng.split(0), rh = rng.split(1), rx = rng.split(2);
  nets::FeatureExtractor f = small_extractor(rf);
  nets::HyperNetwork h = nets::HyperNetwork::create(32, {256, 256}, rh);
  f.mlp.set_trainable(false);
  h.mlp.set_trainable(false);
  const Matrix support = oracle::random_matrix(rx, 25, 16);
  std::vector<int> labels;
  for (int n = 0; n < 5; ++n) labels.insert(labels.end(), 5, n);
  const nets::ClassifierParams clf = nets::generate_classifier(h, f, support, labels, 5, 5);
  const ood::LogitFn logits = [&](const Value& x) {
    return nets::classifier_logits(nets::ClassifierGraph{Value::constant(clf.weight), Value::constant(clf.bias)},
                                   f.embed(x));
  };
  const Matrix queries = oracle::random_matrix(rx, kIdentityInputs, 16, 2.0);
  const auto odin = ood::score_odin(logits, queries, 1.0, 0.0);
  const auto msp = ood::score_msp_rows(nets::classify(clf, f, queries));
  int odin_mismatch = 0;
  for (int i = 0; i < kIdentityInputs; ++i) {
    if (odin[i].score != msp[i].score || odin[i].pred != msp[i].pred) ++odin_mismatch;
  }

  // ParamMix aggregation with one-hot labels against the plain classifier.
  const nets::ClassifierParams pm =
      mix::parammix_aggregate(h, f, nets::SoftSupport{support, nets::one_hot(labels, 5)});
  const bool pm_equal = pm.weight == clf.weight && pm.bias == clf.bias;

  // HyperMix with zero mix counts against plain meta-training.
  data::DatasetSpec spec;
  spec.seed = 3;
  const data::Dataset ds = data::Dataset::generate(spec);
  auto trajectory = [&](mix::Method method, bool zero_counts) {
    RandomStream r(11);
    RandomStream r1 = r.split(0), r2 = r.split(1);
    nets::FeatureExtractor ff = small_extractor(r1);
    nets::HyperNetwork hh = nets::HyperNetwork::create(32, {256, 256}, r2);
    mix::MetaTrainConfig mc;
    mc.method = method;
    mc.epochs = 3;
    mc.batches_per_epoch = 5;
    if (zero_counts) {
      mc.mix.n_param_mix = 0;
      mc.mix.n_ooe_mix = 0;
    }
    return mix::metatrain(ff, hh, ds, mc, r.split(2)).epoch_loss;
  };
  const auto plain = trajectory(mix::Method::kPlain, false);
  const auto zero = trajectory(mix::Method::kHyperMix, true);
  const bool traj_equal = plain == zero;

  return {odin_mismatch == 0 && pm_equal && traj_equal,
          "odin/msp mismatches " + std::to_string(odin_mismatch) + "/" + std::to_string(kIdentityInputs) +
              ", parammix one-hot " + (pm_equal ? "bitwise equal" : "DIFFERS") + ", zero-mix trajectory " +
              (traj_equal ? "identical" : "DIFFERS")};
}

Outcome metric_oracles() {
  const auto t0 = Clock::now();
  RandomStream rng(5, 303);
  int auroc_bad = 0, fpr_bad = 0;
  for (int i = 0; i < kMetricInstances; ++i) {
    const auto n1 = 1 + rng.below(kMetricMaxScores);
    const auto n0 = 1 + rng.below(kMetricMaxScores);
    // Coarse grid on half the instances to force ties.
    const bool coarse = i % 2 == 0;
    auto draw = [&](double shift) {
      const double u = rng.uniform() + shift;
      return coarse ? std::floor(u * 8.0) / 8.0 : u;
    };
    std::vector<double> ind(n1), ood(n0);
    for (auto& v : ind) v = draw(0.3);
    for (auto& v : ood) v = draw(0.0);
    if (eval::auroc(ind, ood) != oracle::pairwise_auroc(ind, ood)) ++auroc_bad;
    if (eval::fpr_at_tpr(ind, ood, 0.9) != oracle::sweep_fpr(ind, ood, 0.9)) ++fpr_bad;
  }
  const double secs = seconds_since(t0);
  return {auroc_bad == 0 && fpr_bad == 0 && secs < kMetricBudgetSec,
          "auroc mismatches " + std::to_string(auroc_bad) + ", fpr@90 mismatches " + std::to_string(fpr_bad) +
              " over " + std::to_string(kMetricInstances) + " instances, " + fmt("%.2f", secs) + " s"};
}

Outcome spot_values() {
  RandomStream rng(9, 404);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    RowVector p(5);
    for (Eigen::Index c = 0; c < 5; ++c) p(c) = rng.uniform() + 1e-3;
    p /= p.sum();
    worst = std::max(worst, std::abs(ood::score_pnml(p, 0.0) - 1.0));
  }
  Matrix feats(4, 1);
  feats << 0.0, 2.0, 4.0, 6.0;
  const auto stats = ood::fit_gaussian_stats({feats}, {0, 0, 1, 1}, 2);
  Matrix q(1, 1);
  q << 1.0;
  const double dm = ood::score_dm(stats, {q})[0];
  return {worst <= kPnmlTol && std::abs(dm - kDmExpected) <= kDmTol,
          "pNML |score - 1| at x^T g = 0: " + fmt("%.3g", worst) + "; DM 1-D example " + fmt("%.6f", dm)};
}

Outcome covariance_diagnostic() {
  app::RunConfig cfg;
  const data::Dataset ds = data::Dataset::generate(cfg.dataset_spec());
  const nets::PretrainResult pre = app::run_pretrain(cfg, ds);
  const auto few = eval::covariance_rank_diagnostic(pre.extractor, ds, {5}, 5, data::Split::kNovel, 1);
  const auto many = eval::covariance_rank_diagnostic(pre.extractor, ds, {50}, 10, data::Split::kNovel, 1);
  auto below = [](const eval::CovSpectrum& s) {
    return std::count_if(s.singular_values.begin(), s.singular_values.end(), [](double v) { return v < kRankZero; });
  };
  const auto z_few = below(few[0]);
  const auto z_many = below(many[0]);
  const bool ok = pre.extractor.feat_dim() == 32 && z_few >= 12 && z_many == 0;
  return {ok, "25 samples: " + std::to_string(z_few) + " of 32 below 1e-10 (need >= 12); " +
                  std::to_string(many[0].support_size) + " samples: " + std::to_string(z_many) +
                  " below 1e-10 (need 0); smallest " + fmt("%.3g", many[0].singular_values.back())};
}

// ---------------------------------------------------------------------------

struct Curve {
  std::vector<std::vector<double>> auroc;  // [noise][seed]
  std::vector<std::vector<double>> acc;
};

struct TrendData {
  std::map<std::string, Curve> curves;  // "<train>/<score>"
  std::vector<double> plain_msp, ooemix_msp, hypermix_msp;  // per seed, noise 0
  std::vector<double> pipeline_seconds;
};

TrendData run_trend_experiments() {
  TrendData td;
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"plain", "msp,entropy,odin,dm,pnml"}, {"ooemix", "msp"}, {"hypermix", "msp"},
      {"parammix", "msp"},                   {"oe", "msp"},     {"oec", "msp"}};
  for (int seed = 0; seed < kTrendSeeds; ++seed) {
    app::RunConfig cfg;
    cfg.set("seed", std::to_string(seed));
    cfg.set("eval.episodes", std::to_string(kTrendEpisodes));
    auto t0 = Clock::now();
    const data::Dataset ds = data::Dataset::generate(cfg.dataset_spec());
    const nets::PretrainResult pre = app::run_pretrain(cfg, ds);
    double pipeline = seconds_since(t0);
    for (const auto& [method, scorers] : runs) {
      t0 = Clock::now();
      app::RunConfig c = cfg;
      c.set("metatrain.method", method);
      c.set("eval.methods", scorers);
      app::Models models{pre.extractor.clone(), std::nullopt, mix::Method::kPlain};
      app::run_metatrain(c, ds, models);
      const double train_seconds = seconds_since(t0);
      const bool headline = method == "plain" || method == "ooemix" || method == "hypermix";
      for (std::size_t k = 0; k < kNoiseLevels.size(); ++k) {
        const auto te = Clock::now();
        const eval::EvalOutput out = app::run_eval(c, ds, models, kNoiseLevels[k], 1);
        if (k == 0 && headline) pipeline += seconds_since(te);
        for (const auto& rep : out.reports) {
          Curve& curve = td.curves[method + "/" + rep.method];
          curve.auroc.resize(kNoiseLevels.size());
          curve.acc.resize(kNoiseLevels.size());
          curve.auroc[k].push_back(rep.auroc.mean);
          curve.acc[k].push_back(rep.ind_acc.mean);
          if (k == 0 && rep.method == "msp") {
            if (method == "plain") td.plain_msp.push_back(rep.auroc.mean);
            if (method == "ooemix") td.ooemix_msp.push_back(rep.auroc.mean);
            if (method == "hypermix") td.hypermix_msp.push_back(rep.auroc.mean);
          }
        }
      }
      if (headline) pipeline += train_seconds;
    }
    td.pipeline_seconds.push_back(pipeline);
    std::printf("  seed %d: plain %.4f  ooemix %.4f  hypermix %.4f  (%.1f s)\n", seed, td.plain_msp.back(),
                td.ooemix_msp.back(), td.hypermix_msp.back(), pipeline);
    std::fflush(stdout);
  }
  return td;
}

Outcome trend_table1(const TrendData& td) {
  const double plain = median(td.plain_msp);
  const double ooe = median(td.ooemix_msp);
  const double hyper = median(td.hypermix_msp);
  double total = 0.0;
  for (double s : td.pipeline_seconds) total += s;
  const bool ok = hyper - plain >= kHyperMixMargin && ooe > plain && total < kPipelineBudgetSec;
  return {ok, "median MSP AUROC plain " + fmt("%.4f", plain) + ", ooemix " + fmt("%.4f", ooe) + ", hypermix " +
                  fmt("%.4f", hyper) + " (margin " + fmt("%+.2f", 100.0 * (hyper - plain)) + " pts); pipeline " +
                  fmt("%.0f", total) + " s"};
}

bool monotone(const std::vector<double>& v, std::string& why) {
  int inversions = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double rise = v[i] - v[i - 1];
    if (rise > 0.0) {
      ++inversions;
      if (rise > kInversionTol) {
        why = "rise of " + fmt("%.4f", rise) + " at level " + std::to_string(i);
        return false;
      }
    }
  }
  if (inversions > 1) {
    why = std::to_string(inversions) + " inversions";
    return false;
  }
  return true;
}

Outcome trend_noise(const TrendData& td) {
  std::string failures;
  for (const auto& [name, curve] : td.curves) {
    std::vector<double> auc, acc;
    for (std::size_t k = 0; k < kNoiseLevels.size(); ++k) {
      auc.push_back(median(curve.auroc[k]));
      acc.push_back(median(curve.acc[k]));
    }
    std::string why;
    if (!monotone(auc, why)) failures += " " + name + " auroc: " + why + ";";
    if (!monotone(acc, why)) failures += " " + name + " acc: " + why + ";";
    std::printf("  %-18s auroc", name.c_str());
    for (double v : auc) std::printf(" %.4f", v);
    std::printf("  acc");
    for (double v : acc) std::printf(" %.4f", v);
    std::printf("\n");
  }
  return {failures.empty(), failures.empty() ? std::to_string(td.curves.size()) + " method curves non-increasing"
                                             : "violations:" + failures};
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> read_payloads(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string name = std::filesystem::relative(e.path(), dir).string();
    if (e.path().filename().string().rfind("manifest_", 0) == 0) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[name] = ss.str();
  }
  return out;
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / ("hypermix_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const char* text =
      "pretrain.epochs = 3\n"
      "metatrain.epochs = 2\n"
      "metatrain.batches = 3\n"
      "eval.episodes = 20\n"
      "eval.noise = 0,0.2\n"
      "sweep.grid.mix.a_pm = 1.0|2.0\n";
  std::ostringstream sink;
  auto run_all = [&](const fs::path& out) {
    app::RunConfig cfg = app::RunConfig::from_text(text);
    cfg.set("seed", "17");
    cfg.set("out", out.string());
    app::cmd_pretrain(cfg, sink);
    app::cmd_metatrain(cfg, (out / "extractor.ckpt").string(), sink);
    app::cmd_eval(cfg, (out / "model.ckpt").string(), sink);
    app::cmd_diagnose_cov(cfg, (out / "extractor.ckpt").string(), sink);
    app::RunConfig sweep_cfg = cfg;
    sweep_cfg.set("out", (out / "sweep").string());
    app::cmd_sweep(sweep_cfg, sink);
  };
  run_all(root / "a");
  run_all(root / "b");
  const auto a = read_payloads(root / "a");
  const auto b = read_payloads(root / "b");
  std::string diffs;
  for (const auto& [name, content] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second != content) diffs += " " + name;
  }
  if (a.size() != b.size()) diffs += " (file sets differ)";

  // Worker count must not change evaluation results.
  app::RunConfig cfg = app::RunConfig::from_text(text);
  cfg.set("seed", "17");
  const data::Dataset ds = data::Dataset::generate(cfg.dataset_spec());
  app::Models models{app::run_pretrain(cfg, ds).extractor, std::nullopt, mix::Method::kPlain};
  app::run_metatrain(cfg, ds, models);
  const auto one = app::run_eval(cfg, ds, models, 0.2, 1);
  const auto four = app::run_eval(cfg, ds, models, 0.2, 4);
  bool threads_equal = one.records.size() == four.records.size();
  for (std::size_t i = 0; threads_equal && i < one.records.size(); ++i) {
    threads_equal = one.records[i].score == four.records[i].score && one.records[i].pred == four.records[i].pred;
  }
  fs::remove_all(root);
  return {diffs.empty() && threads_equal && !a.empty(),
          std::to_string(a.size()) + " payload files compared" + (diffs.empty() ? "" : ", differing:" + diffs) +
              (threads_equal ? "; 1 vs 4 workers identical" : "; worker count changes results")};
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  TrendData trend;
  bool trend_ready = false;
  auto ensure_trend = [&]() -> const TrendData& {
    if (!trend_ready) {
      trend = run_trend_experiments();
      trend_ready = true;
    }
    return trend;
  };
  const std::vector<Entry> entries = {
      {1, "gradient correctness", gradient_correctness},
      {2, "formula identities", formula_identities},
      {3, "metric oracles", metric_oracles},
      {4, "pNML and DM spot values", spot_values},
      {5, "covariance degeneracy diagnostic", covariance_diagnostic},
      {6, "trend: HyperMix and OOE-Mix over plain MSP", [&] { return trend_table1(ensure_trend()); }},
      {7, "trend: metrics non-increasing in support noise", [&] { return trend_noise(ensure_trend()); }},
      {8, "determinism of command payloads", determinism},
  };
  int failed = 0;
  for (const auto& e : entries) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = e.run();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    std::printf("[%s] criterion %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", e.id, e.name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d of %zu acceptance criteria passed\n", static_cast<int>(entries.size()) - failed, entries.size());
  return failed == 0 ? 0 : 1;
}
