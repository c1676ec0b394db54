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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hypermix/diff.hpp"
#include "hypermix/rng.hpp"

namespace hypermix::data {

using diff::Matrix;
using diff::RowVector;

enum class Split { kBase, kVal, kNovel };

std::string split_name(Split s);
Split parse_split(const std::string& s);

/// Class-structured Gaussian dataset description.
struct DatasetSpec {
  int input_dim = 16;
  int n_base = 64;
  int n_val = 16;
  int n_novel = 20;
  int samples_per_class = 60;
  double class_spread = 0.4;
  double center_scale = 1.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError if a field is out of range or some split cannot host
  /// a `ways`-way episode.
  void validate(int ways) const;
  int num_classes() const { return n_base + n_val + n_novel; }
};

/// Immutable after construction. Global class ids run base, then validation,
/// then novel; the samples of class c occupy rows
/// [c * samples_per_class, (c + 1) * samples_per_class).
class Dataset {
 public:
  /// Class c gets a center uniform in [-center_scale, center_scale]^d; each
  /// sample is center + N(0, class_spread^2 I). Deterministic in spec.seed.
  static Dataset generate(const DatasetSpec& spec);

  const DatasetSpec& spec() const { return spec_; }
  const Matrix& features() const { return x_; }
  const Matrix& centers() const { return centers_; }
  int num_samples() const { return static_cast<int>(x_.rows()); }
  int num_classes() const { return static_cast<int>(class_split_.size()); }
  int class_of(int sample) const { return sample / spec_.samples_per_class; }
  Split split_of_class(int cls) const { return class_split_.at(static_cast<std::size_t>(cls)); }
  std::vector<int> classes_in(Split s) const;
  std::vector<int> samples_of(int cls) const;

  /// Text snapshot: `hypermix-data v1`, a `# seed` comment, then one line per
  /// sample `class_id split dim values...`.
  std::string snapshot() const;
  static Dataset from_snapshot(const std::string& text);

 private:
  DatasetSpec spec_;
  Matrix x_;
  Matrix centers_;
  std::vector<Split> class_split_;
};

inline constexpr int kOod = -1;

/// One few-shot task. Labels are episode-local indices 0..ways-1 into
/// `classes`; query_truth holds such a label or kOod. The pools list samples
/// of the split that are in neither the support nor the query set.
struct Episode {
  Split split = Split::kBase;
  int ways = 0;
  int shots = 0;
  std::vector<int> classes;

  Matrix support_x;
  std::vector<int> support_y;
  std::vector<int> support_src;

  Matrix query_x;
  std::vector<int> query_truth;
  std::vector<int> query_src;  // -1 for synthesized queries

  std::vector<int> ooe_classes;
  std::vector<std::vector<int>> ooe_pool;  // aligned with ooe_classes
  std::vector<std::vector<int>> ine_pool;  // indexed by episode label

  std::vector<int> noisy_support;  // support rows whose x was replaced

  int num_ind_queries() const;
  int num_ood_queries() const;
};

/// Draws `ways` classes of the split without replacement, `shots` support and
/// an even share of `q_ind` IND queries per class (the remainder goes to
/// randomly chosen classes), and `q_ood` OOD queries uniformly from the
/// samples of the split's remaining classes.
Episode sample_episode(const Dataset& ds, Split split, int ways, int shots, int q_ind, int q_ood,
                       RandomStream& rng);

/// Random bijection from episode labels to distinct out-of-episode classes.
std::vector<int> make_noise_pairing(const Episode& ep, RandomStream& rng);

/// Replaces x of round(noise_frac * ways * shots) support entries (half away
/// from zero) with samples of the OOE class paired with the entry's label.
/// Labels are left untouched.
Episode inject_support_noise(const Episode& ep, const Dataset& ds, double noise_frac,
                             const std::vector<int>& pairing, RandomStream& rng);

/// Distribution of a mixing coefficient: Beta(a, b), or a fixed value.
struct MixLambda {
  double a = 1.0;
  double b = 1.0;
  std::optional<double> fixed;

  double draw(RandomStream& rng) const;
};

enum class OodMix { kIneOoe, kIneIne };

std::string ood_mix_name(OodMix m);
OodMix parse_ood_mix(const std::string& s);

struct QuerySet {
  Matrix x;
  std::vector<int> truth;
};

/// Query list where every OOD query is replaced by a convex mixture
/// lambda * a + (1 - lambda) * b: INE-OOE mixes an unused in-episode sample
/// with an out-of-episode one, INE-INE mixes samples of two distinct
/// in-episode classes. IND queries are kept as they are.
QuerySet mix_ood_testset(const Episode& ep, const Dataset& ds, OodMix mode, const MixLambda& lambda,
                         RandomStream& rng);

}  // namespace hypermix::data
