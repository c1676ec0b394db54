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

#include "app/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "app/svg.hpp"
#include "hypermix/error.hpp"

namespace hypermix::app {
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string noise_tag(double noise) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "noise%g", noise);
  return buf;
}

std::string join_ints(const std::vector<int>& v, char sep) {
  std::string out;
  for (int x : v) out += (out.empty() ? "" : std::string(1, sep)) + std::to_string(x);
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << content;
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::string csv_stamp(const RunConfig& cfg) {
  return "# seed=" + std::to_string(cfg.seed()) + " config_hash=" + cfg.hash_hex() + "\n";
}

json config_json(const RunConfig& cfg) {
  json j = json::object();
  for (const auto& k : RunConfig::keys()) {
    if (k.key != "seed" && k.key != "out") j[k.key] = cfg.get(k.key);
  }
  for (const auto& [key, items] : cfg.sweep_grid()) j["sweep.grid." + key] = items;
  return j;
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const RunConfig& cfg, const std::string& command, json extra) {
  json m;
  m["command"] = command;
  m["seed"] = cfg.seed();
  m["config_hash"] = cfg.hash_hex();
  m["timestamp"] = timestamp();
  for (auto& [k, v] : extra.items()) m[k] = v;
  m["config"] = config_json(cfg);
  write_file((fs::path(cfg.out_dir()) / ("manifest_" + command + ".json")).string(), m.dump(2) + "\n");
}

std::vector<std::string> ckpt_header(const RunConfig& cfg, const std::string& stage) {
  return {"stage " + stage, "seed " + std::to_string(cfg.seed()), "config_hash " + cfg.hash_hex()};
}

std::string arch_line(const std::string& name, const nets::Mlp& m) {
  return "arch " + name + " " + join_ints(m.sizes(), '-');
}

std::optional<std::string> header_value(const diff::Checkpoint& ck, const std::string& key) {
  for (const auto& line : ck.header_comments) {
    if (line.rfind(key + " ", 0) == 0) return line.substr(key.size() + 1);
  }
  return std::nullopt;
}

void warn_seed_mismatch(const diff::Checkpoint& ck, const RunConfig& cfg, const std::string& path,
                        std::ostream& log) {
  const auto s = header_value(ck, "seed");
  if (s && *s != std::to_string(cfg.seed())) {
    log << "warning: " << path << " was written with seed " << *s << ", running with seed " << cfg.seed() << "\n";
  }
}

Models load_models(const std::string& path, const RunConfig& cfg, std::ostream& log) {
  const diff::Checkpoint ck = diff::load_checkpoint(path);
  warn_seed_mismatch(ck, cfg, path, log);
  Models m{nets::FeatureExtractor{nets::Mlp::load_from(ck, "F")}, std::nullopt, mix::Method::kProtoNet};
  if (ck.tensors.count("H.sizes")) m.h = nets::HyperNetwork{nets::Mlp::load_from(ck, "H")};
  const auto method = header_value(ck, "method");
  m.method = method ? mix::parse_method(*method) : (m.h ? mix::Method::kHyperMix : mix::Method::kProtoNet);
  if (m.method != mix::Method::kProtoNet && !m.h) {
    throw IoError("checkpoint '" + path + "' holds no hypernetwork for method " + mix::method_name(m.method));
  }
  return m;
}

json meanhw_json(const eval::MeanHw& m) { return json{{"mean", m.mean}, {"hw", m.hw}}; }

struct Pooled {
  std::vector<double> ind, ood;
};

Pooled pool_scores(const eval::EvalOutput& out, const std::string& method) {
  Pooled p;
  for (const auto& r : out.records) {
    if (r.method != method) continue;
    (r.truth == data::kOod ? p.ood : p.ind).push_back(r.score);
  }
  return p;
}

}  // namespace

std::uint64_t derived_seed(std::uint64_t seed, SeedStream stream) {
  return RandomStream(seed).split(stream).next_u64();
}

int worker_threads() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  if (const char* env = std::getenv("HYPERMIX_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*env == '\0' || *end != '\0' || v <= 0) {
      throw ConfigError("HYPERMIX_THREADS must be a positive integer, got '" + std::string(env) + "'");
    }
    n = static_cast<int>(std::min<long>(v, 1024));
  }
  return n;
}

nets::PretrainResult run_pretrain(const RunConfig& cfg, const data::Dataset& ds) {
  const RandomStream root(cfg.seed());
  RandomStream init = root.split(kInitExtractor);
  nets::FeatureExtractor f0 = nets::FeatureExtractor::create(ds.spec().input_dim, cfg.extractor_hidden(),
                                                             cfg.feat_dim(), init);
  return nets::pretrain_extractor(std::move(f0), ds, cfg.pretrain_config(), root.split(kPretrain));
}

mix::MetaTrainResult run_metatrain(const RunConfig& cfg, const data::Dataset& ds, Models& models) {
  const RandomStream root(cfg.seed());
  const mix::MetaTrainConfig mc = cfg.metatrain_config();
  models.method = mc.method;
  RandomStream init = root.split(kInitHyper);
  nets::HyperNetwork h = models.h ? *models.h : nets::HyperNetwork::create(models.f.feat_dim(), cfg.hyper_hidden(), init);
  mix::MetaTrainResult res = mix::metatrain(models.f, h, ds, mc, root.split(kMetatrain));
  if (mc.method == mix::Method::kProtoNet) {
    models.h.reset();
  } else {
    models.h = std::move(h);
  }
  return res;
}

eval::EvalOutput run_eval(const RunConfig& cfg, const data::Dataset& ds, const Models& models, double noise,
                          int threads) {
  eval::EvalConfig ec = cfg.eval_config(noise);
  ec.model = models.h ? eval::ModelKind::kHyperNetwork : eval::ModelKind::kProtoNet;
  return eval::evaluate(models.f, models.h ? &*models.h : nullptr, ds, ec, derived_seed(cfg.seed(), kEvaluate),
                        threads);
}

PipelineResult run_pipeline(const RunConfig& cfg, int threads) {
  const data::Dataset ds = data::Dataset::generate(cfg.dataset_spec());
  PipelineResult out;
  nets::PretrainResult pre = run_pretrain(cfg, ds);
  out.pretrain_loss = std::move(pre.epoch_loss);
  Models models{std::move(pre.extractor), std::nullopt, mix::Method::kHyperMix};
  out.meta = run_metatrain(cfg, ds, models);
  for (double noise : cfg.noise_levels()) {
    out.noise.push_back(noise);
    out.evals.push_back(run_eval(cfg, ds, models, noise, threads));
  }
  return out;
}

std::vector<std::pair<double, double>> roc_points(const std::vector<double>& ind, const std::vector<double>& ood) {
  if (ind.empty() || ood.empty()) throw MetricError("roc: both score lists must be non-empty");
  std::vector<double> thresholds = ind;
  thresholds.insert(thresholds.end(), ood.begin(), ood.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  std::vector<double> si = ind, so = ood;
  std::sort(si.begin(), si.end(), std::greater<>());
  std::sort(so.begin(), so.end(), std::greater<>());
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
  std::size_t a = 0, b = 0;
  for (double t : thresholds) {
    while (a < si.size() && si[a] >= t) ++a;
    while (b < so.size() && so[b] >= t) ++b;
    pts.emplace_back(static_cast<double>(b) / static_cast<double>(so.size()),
                     static_cast<double>(a) / static_cast<double>(si.size()));
  }
  return pts;
}

std::string report_json(const RunConfig& cfg, const std::vector<double>& noise,
                        const std::vector<eval::EvalOutput>& evals) {
  json j;
  j["seed"] = cfg.seed();
  j["config_hash"] = cfg.hash_hex();
  j["interval"] = "mean +- 1.96 * sample_std / sqrt(n_episodes)";
  json reports = json::array();
  for (std::size_t i = 0; i < evals.size(); ++i) {
    for (const auto& r : evals[i].reports) {
      json rj;
      rj["method"] = r.method;
      rj["noise"] = noise[i];
      rj["n_episodes"] = r.n_episodes;
      rj["seed"] = cfg.seed();
      rj["eval_seed"] = r.seed;
      rj["ind_acc"] = meanhw_json(r.ind_acc);
      rj["auroc"] = meanhw_json(r.auroc);
      rj["fpr90"] = meanhw_json(r.fpr90);
      rj["config"] = config_json(cfg);
      reports.push_back(std::move(rj));
    }
  }
  j["reports"] = std::move(reports);
  return j.dump(2) + "\n";
}

void cmd_pretrain(const RunConfig& cfg, std::ostream& log) {
  ensure_dir(cfg.out_dir());
  const data::Dataset ds = data::Dataset::generate(cfg.dataset_spec());
  const nets::PretrainResult res = run_pretrain(cfg, ds);

  diff::Checkpoint ck;
  ck.header_comments = ckpt_header(cfg, "pretrain");
  ck.header_comments.push_back(arch_line("F", res.extractor.mlp));
  res.extractor.mlp.save_to(ck, "F");
  const std::string ckpt_path = (fs::path(cfg.out_dir()) / "extractor.ckpt").string();
  diff::save_checkpoint(ckpt_path, ck);

  std::string csv = csv_stamp(cfg) + "epoch,loss\n";
  for (std::size_t e = 0; e < res.epoch_loss.size(); ++e) csv += std::to_string(e + 1) + "," + fmt(res.epoch_loss[e]) + "\n";
  write_file((fs::path(cfg.out_dir()) / "pretrain_loss.csv").string(), csv);
  write_manifest(cfg, "pretrain", json{{"outputs", {"extractor.ckpt", "pretrain_loss.csv"}}});
  if (!res.epoch_loss.empty()) log << "pretrain: final loss " << res.epoch_loss.back() << "\n";
  log << "wrote " << ckpt_path << "\n";
}

void cmd_metatrain(const RunConfig& cfg, const std::string& extractor_path, std::ostream& log) {
  const mix::MetaTrainConfig mc = cfg.metatrain_config();
  mc.validate();
  const diff::Checkpoint in = diff::load_checkpoint(extractor_path);
  warn_seed_mismatch(in, cfg, extractor_path, log);
  ensure_dir(cfg.out_dir());
  const data::Dataset ds = data::Dataset::generate(cfg.dataset_spec());
  Models models{nets::FeatureExtractor{nets::Mlp::load_from(in, "F")}, std::nullopt, mc.method};
  const mix::MetaTrainResult res = run_metatrain(cfg, ds, models);

  diff::Checkpoint ck;
  ck.header_comments = ckpt_header(cfg, "metatrain");
  ck.header_comments.push_back("method " + mix::method_name(mc.method));
  ck.header_comments.push_back(arch_line("F", models.f.mlp));
  models.f.mlp.save_to(ck, "F");
  if (models.h) {
    ck.header_comments.push_back(arch_line("H", models.h->mlp));
    models.h->mlp.save_to(ck, "H");
  }
  const std::string ckpt_path = (fs::path(cfg.out_dir()) / "model.ckpt").string();
  diff::save_checkpoint(ckpt_path, ck);

  std::string csv = csv_stamp(cfg) + "epoch,loss,ind_accuracy\n";
  for (std::size_t e = 0; e < res.epoch_loss.size(); ++e) {
    csv += std::to_string(e + 1) + "," + fmt(res.epoch_loss[e]) + "," + fmt(res.epoch_accuracy[e]) + "\n";
  }
  write_file((fs::path(cfg.out_dir()) / "metatrain_loss.csv").string(), csv);
  write_manifest(cfg, "metatrain",
                 json{{"method", mix::method_name(mc.method)},
                      {"extractor", extractor_path},
                      {"param_mix_pairs", res.param_mix_pairs},
                      {"param_mix_same_class_pairs", res.param_mix_same_class},
                      {"outputs", {"model.ckpt", "metatrain_loss.csv"}}});
  if (!res.epoch_loss.empty()) {
    log << "metatrain " << mix::method_name(mc.method) << ": final loss " << res.epoch_loss.back()
        << ", IND query accuracy " << res.epoch_accuracy.back() << "\n";
  }
  log << "wrote " << ckpt_path << "\n";
}

void cmd_eval(const RunConfig& cfg, const std::string& model_path, std::ostream& log) {
  const std::vector<double> levels = cfg.noise_levels();
  const data::Dataset ds = data::Dataset::generate(cfg.dataset_spec());
  for (double noise : levels) cfg.eval_config(noise).validate(ds.spec());
  const Models models = load_models(model_path, cfg, log);
  ensure_dir(cfg.out_dir());
  const fs::path out(cfg.out_dir());
  const int threads = worker_threads();

  std::vector<eval::EvalOutput> evals;
  std::vector<std::string> outputs{"eval_report.json", "roc.csv", "noise_curve.csv"};
  std::string roc_csv = csv_stamp(cfg) + "noise,method,fpr,tpr\n";
  for (double noise : levels) {
    eval::EvalOutput res = run_eval(cfg, ds, models, noise, threads);
    const std::string tag = noise_tag(noise);
    std::ostringstream scores;
    scores << csv_stamp(cfg);
    ood::write_score_csv(scores, res.records);
    write_file((out / ("scores_" + tag + ".csv")).string(), scores.str());
    outputs.push_back("scores_" + tag + ".csv");

    std::vector<Series> curves;
    for (const auto& rep : res.reports) {
      const Pooled p = pool_scores(res, rep.method);
      Series s{rep.method, {}, {}};
      for (const auto& [fpr, tpr] : roc_points(p.ind, p.ood)) {
        roc_csv += fmt(noise) + "," + rep.method + "," + fmt(fpr) + "," + fmt(tpr) + "\n";
        s.x.push_back(fpr);
        s.y.push_back(tpr);
      }
      curves.push_back(std::move(s));
      log << tag << " " << rep.method << ": acc " << rep.ind_acc.mean << " +- " << rep.ind_acc.hw << ", auroc "
          << rep.auroc.mean << " +- " << rep.auroc.hw << ", fpr90 " << rep.fpr90.mean << " +- " << rep.fpr90.hw
          << "\n";
    }
    write_file((out / ("roc_" + tag + ".svg")).string(),
               line_chart_svg({"ROC (" + tag + ")", "false positive rate", "true positive rate", 0, 1, 0, 1}, curves));
    outputs.push_back("roc_" + tag + ".svg");
    evals.push_back(std::move(res));
  }
  write_file((out / "roc.csv").string(), roc_csv);
  write_file((out / "eval_report.json").string(), report_json(cfg, levels, evals));

  std::string curve_csv = csv_stamp(cfg) + "method,noise,ind_acc,ind_acc_hw,auroc,auroc_hw,fpr90,fpr90_hw\n";
  std::vector<Series> acc_series, auc_series;
  for (std::size_t m = 0; m < evals.front().reports.size(); ++m) {
    const std::string& name = evals.front().reports[m].method;
    Series acc{name, {}, {}}, auc{name, {}, {}};
    for (std::size_t i = 0; i < levels.size(); ++i) {
      const auto& r = evals[i].reports[m];
      curve_csv += name + "," + fmt(levels[i]) + "," + fmt(r.ind_acc.mean) + "," + fmt(r.ind_acc.hw) + "," +
                   fmt(r.auroc.mean) + "," + fmt(r.auroc.hw) + "," + fmt(r.fpr90.mean) + "," + fmt(r.fpr90.hw) + "\n";
      acc.x.push_back(levels[i]);
      acc.y.push_back(r.ind_acc.mean);
      auc.x.push_back(levels[i]);
      auc.y.push_back(r.auroc.mean);
    }
    acc_series.push_back(std::move(acc));
    auc_series.push_back(std::move(auc));
  }
  write_file((out / "noise_curve.csv").string(), curve_csv);
  const double x_max = std::max(*std::max_element(levels.begin(), levels.end()), 0.4);
  write_file((out / "noise_accuracy.svg").string(),
             line_chart_svg({"IND accuracy vs support noise", "noise fraction", "IND accuracy", 0, x_max, 0, 1},
                            acc_series));
  write_file((out / "noise_auroc.svg").string(),
             line_chart_svg({"AUROC vs support noise", "noise fraction", "AUROC", 0, x_max, 0, 1}, auc_series));
  outputs.insert(outputs.end(), {"noise_accuracy.svg", "noise_auroc.svg"});
  write_manifest(cfg, "eval", json{{"model", model_path}, {"method", mix::method_name(models.method)},
                                   {"outputs", outputs}});
}

void cmd_sweep(const RunConfig& cfg, std::ostream& log) {
  const auto grid = cfg.sweep_grid();
  std::size_t runs = 1;
  for (const auto& [key, items] : grid) runs *= items.size();
  const auto budget = static_cast<std::size_t>(cfg.get_int("sweep.budget"));
  if (runs > budget) {
    throw ConfigError("sweep grid has " + std::to_string(runs) + " runs, over the budget of " +
                      std::to_string(budget) + " (raise sweep.budget)");
  }
  std::vector<RunConfig> configs;
  for (std::size_t i = 0; i < runs; ++i) {
    RunConfig c = cfg;
    std::size_t rem = i;
    for (auto it = grid.rbegin(); it != grid.rend(); ++it) {
      c.set(it->first, it->second[rem % it->second.size()]);
      rem /= it->second.size();
    }
    c.set("seed", std::to_string(cfg.seed() + i));
    c.set("eval.split", "val");
    c.set("eval.noise", cfg.get("eval.noise").substr(0, cfg.get("eval.noise").find(',')));
    c.set("out", (fs::path(cfg.out_dir()) / ("run_" + std::to_string(i))).string());
    c.eval_config(c.noise_levels().front()).validate(c.dataset_spec());
    configs.push_back(std::move(c));
  }
  ensure_dir(cfg.out_dir());

  std::vector<PipelineResult> results(runs);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&]() {
    for (std::size_t i = next++; i < runs; i = next++) {
      try {
        results[i] = run_pipeline(configs[i], 1);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = runs;
      }
    }
  };
  const int n_workers = std::max(1, std::min(worker_threads(), static_cast<int>(runs)));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<std::size_t> order(runs);
  for (std::size_t i = 0; i < runs; ++i) {
    order[i] = i;
    ensure_dir(configs[i].out_dir());
    write_file((fs::path(configs[i].out_dir()) / "eval_report.json").string(),
               report_json(configs[i], results[i].noise, results[i].evals));
  }
  auto val_auroc = [&](std::size_t i) { return results[i].evals.front().reports.front().auroc.mean; };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val_auroc(a) > val_auroc(b); });

  std::string csv = csv_stamp(cfg) + "rank,index,seed";
  for (const auto& [key, items] : grid) csv += "," + key;
  csv += ",method,val_auroc,val_auroc_hw,val_fpr90,val_ind_acc\n";
  json rows = json::array();
  for (std::size_t r = 0; r < runs; ++r) {
    const std::size_t i = order[r];
    const auto& rep = results[i].evals.front().reports.front();
    csv += std::to_string(r + 1) + "," + std::to_string(i) + "," + std::to_string(configs[i].seed());
    json row{{"rank", r + 1}, {"index", i}, {"seed", configs[i].seed()}};
    for (const auto& [key, items] : grid) {
      csv += "," + configs[i].get(key);
      row[key] = configs[i].get(key);
    }
    csv += "," + rep.method + "," + fmt(rep.auroc.mean) + "," + fmt(rep.auroc.hw) + "," + fmt(rep.fpr90.mean) + "," +
           fmt(rep.ind_acc.mean) + "\n";
    row["method"] = rep.method;
    row["val_auroc"] = meanhw_json(rep.auroc);
    row["val_fpr90"] = meanhw_json(rep.fpr90);
    row["val_ind_acc"] = meanhw_json(rep.ind_acc);
    rows.push_back(std::move(row));
    log << "rank " << r + 1 << ": run " << i << " val auroc " << rep.auroc.mean << "\n";
  }
  write_file((fs::path(cfg.out_dir()) / "sweep_results.csv").string(), csv);
  json summary{{"seed", cfg.seed()}, {"config_hash", cfg.hash_hex()}, {"runs", runs}, {"results", rows}};
  write_file((fs::path(cfg.out_dir()) / "sweep.json").string(), summary.dump(2) + "\n");
  write_manifest(cfg, "sweep", json{{"runs", runs}, {"outputs", {"sweep_results.csv", "sweep.json"}}});
}

void cmd_diagnose_cov(const RunConfig& cfg, const std::string& extractor_path, std::ostream& log) {
  const diff::Checkpoint ck = diff::load_checkpoint(extractor_path);
  warn_seed_mismatch(ck, cfg, extractor_path, log);
  const nets::FeatureExtractor f{nets::Mlp::load_from(ck, "F")};
  const data::Dataset ds = data::Dataset::generate(cfg.dataset_spec());
  const int ways = cfg.get_int("diagnose.ways");
  ds.spec().validate(ways);
  const auto spectra = eval::covariance_rank_diagnostic(f, ds, cfg.get_int_list("diagnose.shots"), ways,
                                                        data::parse_split(cfg.get("diagnose.split")),
                                                        derived_seed(cfg.seed(), kDiagnose));
  ensure_dir(cfg.out_dir());
  std::string csv = csv_stamp(cfg) + "shots,index,singular_value\n";
  std::vector<Series> series;
  double y_min = 0.0, y_max = 0.0;
  for (const auto& s : spectra) {
    Series ser{std::to_string(s.shots) + "-shot", {}, {}};
    int tiny = 0;
    for (std::size_t i = 0; i < s.singular_values.size(); ++i) {
      const double sv = s.singular_values[i];
      csv += std::to_string(s.shots) + "," + std::to_string(i) + "," + fmt(sv) + "\n";
      const double lg = std::log10(std::max(sv, 1e-20));
      ser.x.push_back(static_cast<double>(i));
      ser.y.push_back(lg);
      y_min = std::min(y_min, lg);
      y_max = std::max(y_max, lg);
      if (sv < 1e-10) ++tiny;
    }
    log << s.shots << "-shot " << ways << "-way (" << s.support_size << " samples): " << tiny << " of "
        << s.singular_values.size() << " singular values below 1e-10\n";
    series.push_back(std::move(ser));
  }
  write_file((fs::path(cfg.out_dir()) / "cov_spectrum.csv").string(), csv);
  const double x_max = std::max(1.0, static_cast<double>(f.feat_dim() - 1));
  write_file((fs::path(cfg.out_dir()) / "cov_spectrum.svg").string(),
             line_chart_svg({"Pooled covariance spectrum", "index", "log10 singular value", 0, x_max,
                             std::floor(y_min), std::ceil(y_max) + 1},
                            series));
  write_manifest(cfg, "diagnose-cov", json{{"extractor", extractor_path}, {"outputs", {"cov_spectrum.csv", "cov_spectrum.svg"}}});
}

}  // namespace hypermix::app
