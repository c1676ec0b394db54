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

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "hypermix/diff.hpp"

namespace hypermix::ood {

using diff::Matrix;
using diff::RowVector;
using diff::Value;

/// Post-hoc scoring rules. Every score is oriented so that higher means more
/// in-distribution.
enum class ScoreMethod { kMsp, kEntropy, kOdin, kDm, kPnml };

std::string score_method_name(ScoreMethod m);
ScoreMethod parse_score_method(const std::string& token);
const std::vector<std::string>& score_method_tokens();

struct ScoreRecord {
  int episode = 0;
  int query = 0;
  std::string method;
  double score = 0.0;
  int pred = 0;
  int truth = 0;  // class index, or data::kOod
};

struct Scored {
  double score = 0.0;
  int pred = 0;
};

/// Max probability; ties resolve to the lowest index.
Scored score_msp(const RowVector& probs);
/// Sum_c p_c log max(p_c, kLogFloor), the negated entropy.
double score_entropy(const RowVector& probs);

std::vector<Scored> score_msp_rows(const Matrix& probs);
std::vector<double> score_entropy_rows(const Matrix& probs);

using LogitFn = std::function<Value(const Value&)>;

/// Temperature-scaled softmax at the perturbed input
/// x - eps * sign(grad_x(-log max_c p(c | x; T))). Rows are independent.
Matrix odin_probs(const LogitFn& logits, const Matrix& x, double temperature, double eps);
std::vector<Scored> score_odin(const LogitFn& logits, const Matrix& x, double temperature,
                               double eps);

/// ODIN defaults used when no explicit temperature is configured.
double default_odin_temperature(int shots);
inline constexpr double kOdinEps = 0.002;

/// 1e-6 * trace(cov) / dim, never below 1e-12.
double default_cov_eps(const Matrix& cov);

struct GaussianLayer {
  Matrix means;  // ways x dim
  Matrix cov;    // unregularized pooled covariance
  double eps = 0.0;
  Eigen::LLT<Matrix> chol;  // of cov + eps I
  double log_det = 0.0;
};

struct GaussianStats {
  std::vector<GaussianLayer> layers;
};

/// Class means and pooled maximum-likelihood covariance for every layer.
/// `layer_feats[l]` holds one row per support sample.
GaussianStats fit_gaussian_stats(const std::vector<Matrix>& layer_feats,
                                 const std::vector<int>& labels, int ways,
                                 std::optional<double> eps_cov = std::nullopt);

/// Per-layer Gaussian log-density under each class, maximized over classes.
Matrix dm_layer_scores(const GaussianStats& stats, const std::vector<Matrix>& query_feats);
/// Maximum over layers of dm_layer_scores.
std::vector<double> score_dm(const GaussianStats& stats, const std::vector<Matrix>& query_feats);

struct PnmlStats {
  Eigen::LLT<Matrix> chol;  // of X^T X + eps I
  double eps = 0.0;
  int dim = 0;
};

PnmlStats fit_pnml_stats(const Matrix& support_feats, std::optional<double> eps_cov = std::nullopt);
/// x^T (X^T X + eps I)^{-1} x for every row.
std::vector<double> pnml_xg(const PnmlStats& stats, const Matrix& feats);
/// Regret of one query; probabilities are floored at kLogFloor.
double pnml_regret(const RowVector& probs, double xg);
double score_pnml(const RowVector& probs, double xg);

void write_score_csv(std::ostream& os, const std::vector<ScoreRecord>& records);

}  // namespace hypermix::ood
