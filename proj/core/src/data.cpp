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

#include "hypermix/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <sstream>

#include "hypermix/error.hpp"

namespace hypermix::data {
namespace {

constexpr std::uint64_t kCenterStream = 1;
constexpr std::uint64_t kSampleStream = 2;

Split split_for_class(const DatasetSpec& spec, int cls) {
  if (cls < spec.n_base) return Split::kBase;
  if (cls < spec.n_base + spec.n_val) return Split::kVal;
  return Split::kNovel;
}

template <typename T>
T take_at(std::vector<T>& v, std::size_t i) {
  T out = v[i];
  v.erase(v.begin() + static_cast<std::ptrdiff_t>(i));
  return out;
}

}  // namespace

std::string split_name(Split s) {
  switch (s) {
    case Split::kBase: return "base";
    case Split::kVal: return "val";
    case Split::kNovel: return "novel";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "base") return Split::kBase;
  if (s == "val") return Split::kVal;
  if (s == "novel") return Split::kNovel;
  throw ConfigError("unknown split '" + s + "' (valid: base, val, novel)");
}

void DatasetSpec::validate(int ways) const {
  if (input_dim <= 0) throw ConfigError("data.input_dim must be positive");
  if (samples_per_class <= 0) throw ConfigError("data.samples_per_class must be positive");
  if (!(class_spread >= 0.0)) throw ConfigError("data.class_spread must be >= 0");
  if (!(center_scale > 0.0)) throw ConfigError("data.center_scale must be > 0");
  const std::pair<const char*, int> splits[] = {
      {"base", n_base}, {"val", n_val}, {"novel", n_novel}};
  for (const auto& [name, count] : splits) {
    if (count < ways) {
      throw ConfigError(std::string("split '") + name + "' has " + std::to_string(count) +
                        " classes, fewer than ways=" + std::to_string(ways));
    }
  }
  if (n_base < 2 * ways) {
    throw ConfigError("data.n_base must be >= 2 * ways so out-of-episode pools are non-empty");
  }
}

Dataset Dataset::generate(const DatasetSpec& spec) {
  if (spec.input_dim <= 0 || spec.samples_per_class <= 0 || spec.num_classes() <= 0) {
    throw ConfigError("Dataset::generate: empty dataset spec");
  }
  Dataset ds;
  ds.spec_ = spec;
  const int d = spec.input_dim;
  const int nc = spec.num_classes();
  const int spc = spec.samples_per_class;
  ds.centers_.resize(nc, d);
  ds.x_.resize(static_cast<Eigen::Index>(nc) * spc, d);
  const RandomStream root(spec.seed);
  const RandomStream center_root = root.split(kCenterStream);
  const RandomStream sample_root = root.split(kSampleStream);
  for (int c = 0; c < nc; ++c) {
    ds.class_split_.push_back(split_for_class(spec, c));
    RandomStream crng = center_root.split(static_cast<std::uint64_t>(c));
    for (int j = 0; j < d; ++j) {
      ds.centers_(c, j) = (2.0 * crng.uniform() - 1.0) * spec.center_scale;
    }
    RandomStream srng = sample_root.split(static_cast<std::uint64_t>(c));
    for (int s = 0; s < spc; ++s) {
      const Eigen::Index row = static_cast<Eigen::Index>(c) * spc + s;
      for (int j = 0; j < d; ++j) {
        ds.x_(row, j) = ds.centers_(c, j) + spec.class_spread * srng.normal();
      }
    }
  }
  return ds;
}

std::vector<int> Dataset::classes_in(Split s) const {
  std::vector<int> out;
  for (int c = 0; c < num_classes(); ++c) {
    if (class_split_[static_cast<std::size_t>(c)] == s) out.push_back(c);
  }
  return out;
}

std::vector<int> Dataset::samples_of(int cls) const {
  std::vector<int> out(static_cast<std::size_t>(spec_.samples_per_class));
  std::iota(out.begin(), out.end(), cls * spec_.samples_per_class);
  return out;
}

std::string Dataset::snapshot() const {
  std::string out = "hypermix-data v1\n# seed " + std::to_string(spec_.seed) + "\n";
  char buf[40];
  for (int s = 0; s < num_samples(); ++s) {
    const int c = class_of(s);
    out += std::to_string(c) + " " + split_name(split_of_class(c)) + " " +
           std::to_string(x_.cols());
    for (Eigen::Index j = 0; j < x_.cols(); ++j) {
      std::snprintf(buf, sizeof buf, " %.17g", x_(s, j));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

Dataset Dataset::from_snapshot(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "hypermix-data v1") {
    throw IoError("dataset snapshot: missing 'hypermix-data v1' header");
  }
  Dataset ds;
  std::vector<std::vector<double>> rows;
  std::vector<int> classes;
  int dim = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream cs(line.substr(1));
      std::string key;
      cs >> key;
      if (key == "seed") cs >> ds.spec_.seed;
      continue;
    }
    std::istringstream ls(line);
    int cls = 0, d = 0;
    std::string split;
    ls >> cls >> split >> d;
    if (!ls || d <= 0 || (dim >= 0 && d != dim)) throw IoError("dataset snapshot: bad sample line");
    dim = d;
    std::vector<double> v(static_cast<std::size_t>(d));
    for (auto& e : v) ls >> e;
    if (!ls) throw IoError("dataset snapshot: too few values");
    const Split sp = parse_split(split);
    if (static_cast<std::size_t>(cls) >= ds.class_split_.size()) {
      if (static_cast<std::size_t>(cls) != ds.class_split_.size()) {
        throw IoError("dataset snapshot: classes must appear in order");
      }
      ds.class_split_.push_back(sp);
    }
    classes.push_back(cls);
    rows.push_back(std::move(v));
  }
  if (rows.empty()) throw IoError("dataset snapshot: no samples");
  const int nc = static_cast<int>(ds.class_split_.size());
  if (rows.size() % static_cast<std::size_t>(nc) != 0) {
    throw IoError("dataset snapshot: unequal class sizes");
  }
  const int spc = static_cast<int>(rows.size()) / nc;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] != static_cast<int>(i) / spc) throw IoError("dataset snapshot: samples out of order");
  }
  ds.spec_.input_dim = dim;
  ds.spec_.samples_per_class = spc;
  ds.spec_.n_base = static_cast<int>(std::count(ds.class_split_.begin(), ds.class_split_.end(), Split::kBase));
  ds.spec_.n_val = static_cast<int>(std::count(ds.class_split_.begin(), ds.class_split_.end(), Split::kVal));
  ds.spec_.n_novel = nc - ds.spec_.n_base - ds.spec_.n_val;
  ds.x_.resize(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < dim; ++j) ds.x_(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  }
  ds.centers_ = Matrix::Zero(nc, dim);
  for (int c = 0; c < nc; ++c) {
    ds.centers_.row(c) = ds.x_.middleRows(static_cast<Eigen::Index>(c) * spc, spc).colwise().mean();
  }
  return ds;
}

int Episode::num_ind_queries() const {
  return static_cast<int>(std::count_if(query_truth.begin(), query_truth.end(),
                                         [](int t) { return t != kOod; }));
}

int Episode::num_ood_queries() const {
  return static_cast<int>(query_truth.size()) - num_ind_queries();
}

Episode sample_episode(const Dataset& ds, Split split, int ways, int shots, int q_ind, int q_ood,
                       RandomStream& rng) {
  if (ways <= 0 || shots <= 0 || q_ind < 0 || q_ood < 0) {
    throw ConfigError("sample_episode: ways and shots must be positive, query counts >= 0");
  }
  std::vector<int> split_classes = ds.classes_in(split);
  if (static_cast<int>(split_classes.size()) < ways) {
    throw ConfigError("sample_episode: split '" + split_name(split) + "' has " +
                      std::to_string(split_classes.size()) + " classes, need " +
                      std::to_string(ways));
  }
  rng.partial_shuffle(std::span<int>(split_classes), static_cast<std::size_t>(ways));

  Episode ep;
  ep.split = split;
  ep.ways = ways;
  ep.shots = shots;
  ep.classes.assign(split_classes.begin(), split_classes.begin() + ways);
  ep.ooe_classes.assign(split_classes.begin() + ways, split_classes.end());

  // IND query budget: an even share per class, remainder to random classes.
  std::vector<int> per_class(static_cast<std::size_t>(ways), q_ind / ways);
  const int remainder = q_ind % ways;
  for (std::size_t idx : rng.choose(static_cast<std::size_t>(ways), static_cast<std::size_t>(remainder))) {
    ++per_class[idx];
  }

  const int d = ds.spec().input_dim;
  ep.support_x.resize(static_cast<Eigen::Index>(ways) * shots, d);
  ep.query_x.resize(q_ind + q_ood, d);
  Eigen::Index qrow = 0;
  for (int n = 0; n < ways; ++n) {
    std::vector<int> samples = ds.samples_of(ep.classes[static_cast<std::size_t>(n)]);
    const int need = shots + per_class[static_cast<std::size_t>(n)];
    if (static_cast<int>(samples.size()) < need) {
      throw SamplingError("sample_episode: class " + std::to_string(ep.classes[static_cast<std::size_t>(n)]) +
                          " has " + std::to_string(samples.size()) + " samples, need " +
                          std::to_string(need));
    }
    rng.partial_shuffle(std::span<int>(samples), static_cast<std::size_t>(need));
    for (int k = 0; k < shots; ++k) {
      const int s = samples[static_cast<std::size_t>(k)];
      const Eigen::Index row = static_cast<Eigen::Index>(n) * shots + k;
      ep.support_x.row(row) = ds.features().row(s);
      ep.support_y.push_back(n);
      ep.support_src.push_back(s);
    }
    for (int k = shots; k < need; ++k) {
      const int s = samples[static_cast<std::size_t>(k)];
      ep.query_x.row(qrow++) = ds.features().row(s);
      ep.query_truth.push_back(n);
      ep.query_src.push_back(s);
    }
    ep.ine_pool.emplace_back(samples.begin() + need, samples.end());
    std::sort(ep.ine_pool.back().begin(), ep.ine_pool.back().end());
  }

  std::vector<int> ooe_samples;
  for (int c : ep.ooe_classes) {
    for (int s : ds.samples_of(c)) ooe_samples.push_back(s);
  }
  if (static_cast<int>(ooe_samples.size()) < q_ood) {
    throw SamplingError("sample_episode: " + std::to_string(q_ood) + " OOD queries requested but only " +
                        std::to_string(ooe_samples.size()) + " out-of-episode samples exist");
  }
  rng.partial_shuffle(std::span<int>(ooe_samples), static_cast<std::size_t>(q_ood));
  for (int k = 0; k < q_ood; ++k) {
    const int s = ooe_samples[static_cast<std::size_t>(k)];
    ep.query_x.row(qrow++) = ds.features().row(s);
    ep.query_truth.push_back(kOod);
    ep.query_src.push_back(s);
  }
  std::vector<int> used(ooe_samples.begin(), ooe_samples.begin() + q_ood);
  std::sort(used.begin(), used.end());
  for (int c : ep.ooe_classes) {
    std::vector<int> pool;
    for (int s : ds.samples_of(c)) {
      if (!std::binary_search(used.begin(), used.end(), s)) pool.push_back(s);
    }
    ep.ooe_pool.push_back(std::move(pool));
  }
  return ep;
}

std::vector<int> make_noise_pairing(const Episode& ep, RandomStream& rng) {
  if (ep.ooe_classes.size() < static_cast<std::size_t>(ep.ways)) {
    throw ConfigError("noise pairing needs " + std::to_string(ep.ways) +
                      " out-of-episode classes, episode has " +
                      std::to_string(ep.ooe_classes.size()));
  }
  std::vector<int> classes = ep.ooe_classes;
  rng.partial_shuffle(std::span<int>(classes), static_cast<std::size_t>(ep.ways));
  classes.resize(static_cast<std::size_t>(ep.ways));
  return classes;
}

Episode inject_support_noise(const Episode& ep, const Dataset& ds, double noise_frac,
                             const std::vector<int>& pairing, RandomStream& rng) {
  if (!(noise_frac >= 0.0 && noise_frac <= 1.0)) {
    throw ConfigError("noise fraction must lie in [0, 1]");
  }
  if (noise_frac > 0.4) {
    std::cerr << "warning: noise fraction " << noise_frac << " exceeds the tested range [0, 0.4]\n";
  }
  if (pairing.size() != static_cast<std::size_t>(ep.ways)) {
    throw ConfigError("noise pairing must map each of the " + std::to_string(ep.ways) +
                      " in-episode classes");
  }
  const auto total = static_cast<double>(ep.support_y.size());
  const auto count = static_cast<std::size_t>(std::round(noise_frac * total));
  Episode out = ep;
  if (count == 0) return out;

  std::vector<std::size_t> pool_of(pairing.size());
  for (std::size_t n = 0; n < pairing.size(); ++n) {
    auto it = std::find(ep.ooe_classes.begin(), ep.ooe_classes.end(), pairing[n]);
    if (it == ep.ooe_classes.end()) {
      throw ConfigError("noise pairing maps label " + std::to_string(n) + " to class " +
                        std::to_string(pairing[n]) + ", which is not out-of-episode");
    }
    pool_of[n] = static_cast<std::size_t>(it - ep.ooe_classes.begin());
  }
  const auto rows = rng.choose(ep.support_y.size(), count);
  for (std::size_t row : rows) {
    const auto label = static_cast<std::size_t>(ep.support_y[row]);
    auto& pool = out.ooe_pool[pool_of[label]];
    if (pool.empty()) {
      throw SamplingError("noise injection: OOE class " + std::to_string(pairing[label]) +
                          " has no unused samples left");
    }
    const int s = take_at(pool, static_cast<std::size_t>(rng.below(pool.size())));
    out.support_x.row(static_cast<Eigen::Index>(row)) = ds.features().row(s);
    out.support_src[row] = s;
    out.noisy_support.push_back(static_cast<int>(row));
  }
  std::sort(out.noisy_support.begin(), out.noisy_support.end());
  return out;
}

double MixLambda::draw(RandomStream& rng) const {
  if (fixed) {
    if (*fixed < 0.0 || *fixed > 1.0) throw DomainError("mixing coefficient outside [0, 1]");
    return *fixed;
  }
  if (!(a > 0.0 && b > 0.0)) throw ConfigError("Beta shape parameters must be > 0");
  return rng.beta(a, b);
}

std::string ood_mix_name(OodMix m) { return m == OodMix::kIneOoe ? "ine-ooe" : "ine-ine"; }

OodMix parse_ood_mix(const std::string& s) {
  if (s == "ine-ooe") return OodMix::kIneOoe;
  if (s == "ine-ine") return OodMix::kIneIne;
  throw ConfigError("unknown OOD mixture mode '" + s + "' (valid: ine-ooe, ine-ine)");
}

QuerySet mix_ood_testset(const Episode& ep, const Dataset& ds, OodMix mode, const MixLambda& lambda,
                         RandomStream& rng) {
  if (mode == OodMix::kIneIne && ep.ways < 2) {
    throw ConfigError("INE-INE mixtures need at least 2 in-episode classes");
  }
  auto draw_ine = [&](std::size_t label) {
    const auto& pool = ep.ine_pool.at(label);
    if (pool.empty()) throw SamplingError("OOD mixture: in-episode pool is empty");
    return pool[static_cast<std::size_t>(rng.below(pool.size()))];
  };
  std::vector<int> ooe_all;
  for (const auto& pool : ep.ooe_pool) ooe_all.insert(ooe_all.end(), pool.begin(), pool.end());

  QuerySet out{ep.query_x, ep.query_truth};
  for (std::size_t q = 0; q < ep.query_truth.size(); ++q) {
    if (ep.query_truth[q] != kOod) continue;
    const auto first_label = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(ep.ways)));
    const int a = draw_ine(first_label);
    int b = 0;
    if (mode == OodMix::kIneOoe) {
      if (ooe_all.empty()) throw SamplingError("OOD mixture: out-of-episode pool is empty");
      b = ooe_all[static_cast<std::size_t>(rng.below(ooe_all.size()))];
    } else {
      auto second = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(ep.ways - 1)));
      if (second >= first_label) ++second;
      b = draw_ine(second);
    }
    const double lam = lambda.draw(rng);
    out.x.row(static_cast<Eigen::Index>(q)) =
        lam * ds.features().row(a) + (1.0 - lam) * ds.features().row(b);
  }
  return out;
}

}  // namespace hypermix::data
