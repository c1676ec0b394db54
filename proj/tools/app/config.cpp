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

#include "app/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "hypermix/error.hpp"

namespace hypermix::app {
namespace {

enum class Kind { kInt, kU64, kDouble, kBool, kIntList, kDoubleList, kString, kMethod, kScoreList, kSplit,
                  kOodMix, kAutoInt, kAutoDouble };

struct KeyDef {
  std::string key;
  Kind kind;
  std::string default_value;
  std::string help;
};

const std::vector<KeyDef>& key_defs() {
  static const std::vector<KeyDef> defs{
      {"seed", Kind::kU64, "0", "run seed; drives data, initialization, training and evaluation"},
      {"out", Kind::kString, "out", "output directory"},
      {"data.input_dim", Kind::kInt, "16", "input dimension"},
      {"data.n_base", Kind::kInt, "64", "base (meta-train) classes"},
      {"data.n_val", Kind::kInt, "16", "validation classes"},
      {"data.n_novel", Kind::kInt, "20", "novel (meta-test) classes"},
      {"data.samples_per_class", Kind::kInt, "60", "samples per class"},
      {"data.class_spread", Kind::kDouble, "0.4", "within-class standard deviation"},
      {"data.center_scale", Kind::kDouble, "1.0", "class centers are uniform in [-scale, scale]^d"},
      {"model.hidden", Kind::kIntList, "64,64", "feature extractor hidden widths"},
      {"model.feat_dim", Kind::kInt, "32", "feature dimension"},
      {"model.hyper_hidden", Kind::kIntList, "256,256", "hypernetwork hidden widths"},
      {"pretrain.epochs", Kind::kInt, "50", "pretraining epochs"},
      {"pretrain.batch_size", Kind::kInt, "64", "pretraining minibatch size"},
      {"pretrain.lr", Kind::kDouble, "0.05", "pretraining learning rate"},
      {"pretrain.momentum", Kind::kDouble, "0.9", "pretraining Nesterov momentum"},
      {"pretrain.weight_decay", Kind::kDouble, "0.0005", "pretraining weight decay"},
      {"pretrain.gamma", Kind::kDouble, "0.2", "learning-rate decay factor at each milestone"},
      {"pretrain.milestones", Kind::kDoubleList, "0.6,0.8", "milestones as fractions of the epochs"},
      {"pretrain.holdout_per_class", Kind::kInt, "0", "base samples per class withheld from pretraining"},
      {"episode.ways", Kind::kInt, "5", "classes per episode (N)"},
      {"episode.shots", Kind::kInt, "5", "support samples per class (K)"},
      {"metatrain.method", Kind::kMethod, "hypermix", "training method token"},
      {"metatrain.epochs", Kind::kInt, "50", "meta-training epochs"},
      {"metatrain.batches", Kind::kInt, "50", "batches per epoch"},
      {"metatrain.episodes_per_batch", Kind::kInt, "4", "episodes per batch"},
      {"metatrain.queries_per_class", Kind::kInt, "5", "IND queries per class at meta-train"},
      {"metatrain.lr", Kind::kDouble, "0.001", "meta-training learning rate"},
      {"metatrain.momentum", Kind::kDouble, "0.9", "meta-training Nesterov momentum"},
      {"metatrain.weight_decay", Kind::kDouble, "0", "meta-training weight decay"},
      {"metatrain.finetune_extractor", Kind::kBool, "true", "also update the feature extractor"},
      {"mix.a_pm", Kind::kDouble, "2.0", "ParamMix Beta a"},
      {"mix.b_pm", Kind::kDouble, "5.0", "ParamMix Beta b"},
      {"mix.a_om", Kind::kDouble, "20.0", "OOE-Mix Beta a"},
      {"mix.b_om", Kind::kDouble, "20.0", "OOE-Mix Beta b"},
      {"mix.n_param_mix", Kind::kAutoInt, "auto", "mixed support samples per episode (auto = K*N)"},
      {"mix.n_ooe_mix", Kind::kAutoInt, "auto", "OOE queries per episode (auto = IND query count)"},
      {"mix.beta_oe", Kind::kDouble, "1.0", "OE loss weight"},
      {"eval.methods", Kind::kScoreList, "msp,entropy,odin,dm,pnml", "scoring methods"},
      {"eval.episodes", Kind::kInt, "400", "meta-test episodes"},
      {"eval.ind_queries", Kind::kInt, "10", "IND queries per episode"},
      {"eval.ood_queries", Kind::kInt, "10", "OOD queries per episode"},
      {"eval.noise", Kind::kDoubleList, "0", "support noise fractions, one report each"},
      {"eval.split", Kind::kSplit, "novel", "evaluation split"},
      {"eval.odin_temperature", Kind::kAutoDouble, "auto", "ODIN temperature (auto = 1 below 10 shots, else 10)"},
      {"eval.odin_eps", Kind::kDouble, "0.002", "ODIN perturbation magnitude"},
      {"eval.ood_mix", Kind::kOodMix, "none", "synthesized OOD queries: none, ine-ooe or ine-ine"},
      {"eval.ood_mix_a", Kind::kDouble, "20.0", "Beta a of the OOD mixing weight"},
      {"eval.ood_mix_b", Kind::kDouble, "20.0", "Beta b of the OOD mixing weight"},
      {"diagnose.ways", Kind::kInt, "5", "ways of the covariance diagnostic"},
      {"diagnose.shots", Kind::kIntList, "1,5,10,20,50", "shots of the covariance diagnostic"},
      {"diagnose.split", Kind::kSplit, "novel", "split of the covariance diagnostic"},
      {"sweep.budget", Kind::kInt, "64", "largest grid a sweep will run"},
  };
  return defs;
}

const KeyDef* find_def(const std::string& key) {
  for (const auto& d : key_defs()) {
    if (d.key == key) return &d;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

long long parse_integer(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno != 0) throw ConfigError("config: " + key + " expects an integer, got '" + v + "'");
  return x;
}

double parse_real(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno != 0 || !std::isfinite(x)) {
    throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
  }
  return x;
}

void check_value(const KeyDef& def, const std::string& v) {
  switch (def.kind) {
    case Kind::kInt:
      if (parse_integer(def.key, v) < 0) throw ConfigError("config: " + def.key + " must be non-negative");
      break;
    case Kind::kU64:
      if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError("config: " + def.key + " expects an unsigned integer, got '" + v + "'");
      }
      errno = 0;
      std::strtoull(v.c_str(), nullptr, 10);
      if (errno != 0) throw ConfigError("config: " + def.key + " out of range");
      break;
    case Kind::kDouble:
      parse_real(def.key, v);
      break;
    case Kind::kBool:
      if (v != "true" && v != "false") throw ConfigError("config: " + def.key + " expects true or false");
      break;
    case Kind::kIntList:
      if (v.empty()) throw ConfigError("config: " + def.key + " must not be empty");
      for (const auto& item : split_on(v, ',')) {
        if (parse_integer(def.key, item) <= 0) throw ConfigError("config: " + def.key + " entries must be positive");
      }
      break;
    case Kind::kDoubleList:
      if (v.empty()) throw ConfigError("config: " + def.key + " must not be empty");
      for (const auto& item : split_on(v, ',')) parse_real(def.key, item);
      break;
    case Kind::kString:
      if (v.empty()) throw ConfigError("config: " + def.key + " must not be empty");
      break;
    case Kind::kMethod:
      mix::parse_method(v);
      break;
    case Kind::kScoreList:
      if (v.empty()) throw ConfigError("config: " + def.key + " needs at least one method");
      for (const auto& item : split_on(v, ',')) ood::parse_score_method(item);
      break;
    case Kind::kSplit:
      data::parse_split(v);
      break;
    case Kind::kOodMix:
      if (v != "none") data::parse_ood_mix(v);
      break;
    case Kind::kAutoInt:
      if (v != "auto" && parse_integer(def.key, v) < 0) throw ConfigError("config: " + def.key + " must be non-negative");
      break;
    case Kind::kAutoDouble:
      if (v != "auto") parse_real(def.key, v);
      break;
  }
}

constexpr char kGridPrefix[] = "sweep.grid.";

}  // namespace

RunConfig::RunConfig() {
  for (const auto& d : key_defs()) values_[d.key] = d.default_value;
}

RunConfig RunConfig::from_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), path);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key.rfind(kGridPrefix, 0) == 0) {
    const std::string target = key.substr(sizeof(kGridPrefix) - 1);
    const KeyDef* def = find_def(target);
    if (!def || target == "seed" || target == "out" || target.rfind("sweep.", 0) == 0) {
      throw ConfigError("config: sweep grid axis '" + target + "' is not a sweepable key");
    }
    std::vector<std::string> items = split_on(value, '|');
    if (items.empty()) throw ConfigError("config: sweep grid axis '" + target + "' has no values");
    for (const auto& item : items) check_value(*def, item);
    grid_[target] = std::move(items);
    return;
  }
  const KeyDef* def = find_def(key);
  if (!def) throw ConfigError("config: unknown key '" + key + "'");
  check_value(*def, value);
  values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config: unknown key '" + key + "'");
  return it->second;
}

bool RunConfig::has(const std::string& key) const { return find_def(key) != nullptr; }

int RunConfig::get_int(const std::string& key) const { return static_cast<int>(parse_integer(key, get(key))); }
double RunConfig::get_double(const std::string& key) const { return parse_real(key, get(key)); }
bool RunConfig::get_bool(const std::string& key) const { return get(key) == "true"; }

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (const auto& item : split_on(get(key), ',')) out.push_back(static_cast<int>(parse_integer(key, item)));
  return out;
}

std::vector<double> RunConfig::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_on(get(key), ',')) out.push_back(parse_real(key, item));
  return out;
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const { return split_on(get(key), ','); }

std::uint64_t RunConfig::seed() const { return std::strtoull(get("seed").c_str(), nullptr, 10); }

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    if (k == "seed" || k == "out") continue;
    out += k + " = " + v + "\n";
  }
  for (const auto& [k, items] : grid_) {
    std::string joined;
    for (const auto& i : items) joined += (joined.empty() ? "" : "|") + i;
    out += kGridPrefix + k + " = " + joined + "\n";
  }
  return out;
}

std::uint64_t RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string RunConfig::hash_hex() const { return fnv1a_hex(hash()); }

std::map<std::string, std::vector<std::string>> RunConfig::sweep_grid() const { return grid_; }

data::DatasetSpec RunConfig::dataset_spec() const {
  data::DatasetSpec s;
  s.input_dim = get_int("data.input_dim");
  s.n_base = get_int("data.n_base");
  s.n_val = get_int("data.n_val");
  s.n_novel = get_int("data.n_novel");
  s.samples_per_class = get_int("data.samples_per_class");
  s.class_spread = get_double("data.class_spread");
  s.center_scale = get_double("data.center_scale");
  s.seed = seed();
  return s;
}

nets::PretrainConfig RunConfig::pretrain_config() const {
  nets::PretrainConfig c;
  c.epochs = get_int("pretrain.epochs");
  c.batch_size = get_int("pretrain.batch_size");
  c.lr = get_double("pretrain.lr");
  c.momentum = get_double("pretrain.momentum");
  c.weight_decay = get_double("pretrain.weight_decay");
  c.gamma = get_double("pretrain.gamma");
  c.milestones = get_double_list("pretrain.milestones");
  c.holdout_per_class = get_int("pretrain.holdout_per_class");
  return c;
}

mix::MetaTrainConfig RunConfig::metatrain_config() const {
  mix::MetaTrainConfig c;
  c.method = mix::parse_method(get("metatrain.method"));
  c.epochs = get_int("metatrain.epochs");
  c.batches_per_epoch = get_int("metatrain.batches");
  c.episodes_per_batch = get_int("metatrain.episodes_per_batch");
  c.ways = get_int("episode.ways");
  c.shots = get_int("episode.shots");
  c.queries_per_class = get_int("metatrain.queries_per_class");
  c.lr = get_double("metatrain.lr");
  c.momentum = get_double("metatrain.momentum");
  c.weight_decay = get_double("metatrain.weight_decay");
  c.finetune_extractor = get_bool("metatrain.finetune_extractor");
  c.mix.a_pm = get_double("mix.a_pm");
  c.mix.b_pm = get_double("mix.b_pm");
  c.mix.a_om = get_double("mix.a_om");
  c.mix.b_om = get_double("mix.b_om");
  if (get("mix.n_param_mix") != "auto") c.mix.n_param_mix = get_int("mix.n_param_mix");
  if (get("mix.n_ooe_mix") != "auto") c.mix.n_ooe_mix = get_int("mix.n_ooe_mix");
  c.mix.beta_oe = get_double("mix.beta_oe");
  return c;
}

eval::EvalConfig RunConfig::eval_config(double noise) const {
  eval::EvalConfig c;
  c.methods.clear();
  for (const auto& t : get_list("eval.methods")) c.methods.push_back(ood::parse_score_method(t));
  c.episodes = get_int("eval.episodes");
  c.ways = get_int("episode.ways");
  c.shots = get_int("episode.shots");
  c.ind_queries = get_int("eval.ind_queries");
  c.ood_queries = get_int("eval.ood_queries");
  c.noise_frac = noise;
  c.split = data::parse_split(get("eval.split"));
  c.model = get("metatrain.method") == "protonet" ? eval::ModelKind::kProtoNet : eval::ModelKind::kHyperNetwork;
  if (get("eval.odin_temperature") != "auto") c.odin_temperature = get_double("eval.odin_temperature");
  c.odin_eps = get_double("eval.odin_eps");
  if (get("eval.ood_mix") != "none") {
    c.ood_mix = eval::OodMixTest{data::parse_ood_mix(get("eval.ood_mix")),
                                 {get_double("eval.ood_mix_a"), get_double("eval.ood_mix_b"), std::nullopt}};
  }
  return c;
}

const std::vector<RunConfig::KeyInfo>& RunConfig::keys() {
  static const std::vector<KeyInfo> info = [] {
    std::vector<KeyInfo> out;
    for (const auto& d : key_defs()) out.push_back({d.key, d.default_value, d.help});
    return out;
  }();
  return info;
}

}  // namespace hypermix::app
