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

#include "hypermix/score.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "hypermix/error.hpp"

namespace hypermix::ood {

std::string score_method_name(ScoreMethod m) {
  switch (m) {
    case ScoreMethod::kMsp: return "msp";
    case ScoreMethod::kEntropy: return "entropy";
    case ScoreMethod::kOdin: return "odin";
    case ScoreMethod::kDm: return "dm";
    case ScoreMethod::kPnml: return "pnml";
  }
  return "?";
}

const std::vector<std::string>& score_method_tokens() {
  static const std::vector<std::string> tokens{"msp", "entropy", "odin", "dm", "pnml"};
  return tokens;
}

ScoreMethod parse_score_method(const std::string& token) {
  static const ScoreMethod all[] = {ScoreMethod::kMsp, ScoreMethod::kEntropy, ScoreMethod::kOdin,
                                    ScoreMethod::kDm, ScoreMethod::kPnml};
  for (ScoreMethod m : all) {
    if (score_method_name(m) == token) return m;
  }
  std::string valid;
  for (const auto& t : score_method_tokens()) valid += (valid.empty() ? "" : ", ") + t;
  throw ConfigError("unknown scoring method '" + token + "' (valid: " + valid + ")");
}

Scored score_msp(const RowVector& probs) {
  Scored s{probs(0), 0};
  for (Eigen::Index c = 1; c < probs.size(); ++c) {
    if (probs(c) > s.score) s = {probs(c), static_cast<int>(c)};
  }
  return s;
}

double score_entropy(const RowVector& probs) {
  double acc = 0.0;
  for (Eigen::Index c = 0; c < probs.size(); ++c) {
    acc += probs(c) * std::log(std::max(probs(c), diff::kLogFloor));
  }
  return acc;
}

std::vector<Scored> score_msp_rows(const Matrix& probs) {
  std::vector<Scored> out;
  out.reserve(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) out.push_back(score_msp(probs.row(r)));
  return out;
}

std::vector<double> score_entropy_rows(const Matrix& probs) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) out.push_back(score_entropy(probs.row(r)));
  return out;
}

Matrix odin_probs(const LogitFn& logits, const Matrix& x, double temperature, double eps) {
  if (!(temperature > 0.0)) throw ConfigError("ODIN temperature must be positive");
  if (!(eps >= 0.0)) throw ConfigError("ODIN perturbation magnitude must be non-negative");
  const double inv_t = 1.0 / temperature;
  Matrix xt = x;
  if (eps > 0.0) {
    const Matrix g = diff::input_gradient(logits, x, [inv_t](const Value& out) {
      return diff::scale(diff::sum(diff::max_rows(diff::log_softmax_rows(diff::scale(out, inv_t)))), -1.0);
    });
    xt -= eps * g.unaryExpr([](double v) { return double((v > 0.0) - (v < 0.0)); });
  }
  diff::NoGradGuard guard;
  return diff::softmax_rows(diff::scale(logits(Value::constant(xt)), inv_t)).data();
}

std::vector<Scored> score_odin(const LogitFn& logits, const Matrix& x, double temperature,
                               double eps) {
  return score_msp_rows(odin_probs(logits, x, temperature, eps));
}

double default_odin_temperature(int shots) { return shots >= 10 ? 10.0 : 1.0; }

double default_cov_eps(const Matrix& cov) {
  const double dim = static_cast<double>(std::max<Eigen::Index>(cov.rows(), 1));
  return std::max(1e-6 * cov.trace() / dim, 1e-12);
}

namespace {

Eigen::LLT<Matrix> regularized_cholesky(const Matrix& m, double eps, double* log_det) {
  Matrix reg = m;
  reg.diagonal().array() += eps;
  Eigen::LLT<Matrix> llt(reg);
  if (llt.info() != Eigen::Success) {
    throw DomainError("regularized covariance is not positive definite (eps " + std::to_string(eps) + ")");
  }
  if (log_det) *log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return llt;
}

}  // namespace

GaussianStats fit_gaussian_stats(const std::vector<Matrix>& layer_feats,
                                 const std::vector<int>& labels, int ways,
                                 std::optional<double> eps_cov) {
  std::vector<int> counts(static_cast<std::size_t>(ways), 0);
  for (int y : labels) {
    if (y < 0 || y >= ways) throw DomainError("gaussian stats: label " + std::to_string(y) + " out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  for (int n = 0; n < ways; ++n) {
    if (counts[static_cast<std::size_t>(n)] == 0) {
      throw DomainError("gaussian stats: class " + std::to_string(n) + " has no support samples");
    }
  }
  GaussianStats stats;
  for (const Matrix& feats : layer_feats) {
    if (feats.rows() != static_cast<Eigen::Index>(labels.size())) {
      throw DimensionError("gaussian stats: feature rows do not match labels");
    }
    GaussianLayer layer;
    layer.means = Matrix::Zero(ways, feats.cols());
    for (std::size_t s = 0; s < labels.size(); ++s) {
      layer.means.row(labels[s]) += feats.row(static_cast<Eigen::Index>(s));
    }
    for (int n = 0; n < ways; ++n) layer.means.row(n) /= counts[static_cast<std::size_t>(n)];
    Matrix centered = feats;
    for (std::size_t s = 0; s < labels.size(); ++s) {
      centered.row(static_cast<Eigen::Index>(s)) -= layer.means.row(labels[s]);
    }
    Matrix cov = centered.transpose() * centered / static_cast<double>(labels.size());
    layer.cov = 0.5 * (cov + cov.transpose());
    layer.eps = eps_cov.value_or(default_cov_eps(layer.cov));
    layer.chol = regularized_cholesky(layer.cov, layer.eps, &layer.log_det);
    stats.layers.push_back(std::move(layer));
  }
  return stats;
}

Matrix dm_layer_scores(const GaussianStats& stats, const std::vector<Matrix>& query_feats) {
  if (query_feats.size() != stats.layers.size()) {
    throw DimensionError("dm: " + std::to_string(query_feats.size()) + " query layers for " +
                         std::to_string(stats.layers.size()) + " fitted layers");
  }
  const Eigen::Index q = query_feats.empty() ? 0 : query_feats.front().rows();
  Matrix out(q, static_cast<Eigen::Index>(stats.layers.size()));
  for (std::size_t l = 0; l < stats.layers.size(); ++l) {
    const GaussianLayer& layer = stats.layers[l];
    const Matrix& feats = query_feats[l];
    const auto dim = static_cast<double>(feats.cols());
    const double base = dim * std::log(2.0 * std::numbers::pi) + layer.log_det;
    Eigen::VectorXd best = Eigen::VectorXd::Constant(q, -std::numeric_limits<double>::infinity());
    for (Eigen::Index c = 0; c < layer.means.rows(); ++c) {
      Eigen::MatrixXd diffs = (feats.rowwise() - layer.means.row(c)).transpose();
      layer.chol.matrixL().solveInPlace(diffs);
      const Eigen::VectorXd logp = -0.5 * (diffs.colwise().squaredNorm().transpose().array() + base);
      best = best.cwiseMax(logp);
    }
    out.col(static_cast<Eigen::Index>(l)) = best;
  }
  return out;
}

std::vector<double> score_dm(const GaussianStats& stats, const std::vector<Matrix>& query_feats) {
  const Matrix per_layer = dm_layer_scores(stats, query_feats);
  std::vector<double> out(static_cast<std::size_t>(per_layer.rows()));
  for (Eigen::Index r = 0; r < per_layer.rows(); ++r) out[static_cast<std::size_t>(r)] = per_layer.row(r).maxCoeff();
  return out;
}

PnmlStats fit_pnml_stats(const Matrix& support_feats, std::optional<double> eps_cov) {
  PnmlStats stats;
  const Matrix gram = support_feats.transpose() * support_feats;
  stats.dim = static_cast<int>(support_feats.cols());
  stats.eps = eps_cov.value_or(default_cov_eps(gram));
  stats.chol = regularized_cholesky(0.5 * (gram + gram.transpose()), stats.eps, nullptr);
  return stats;
}

std::vector<double> pnml_xg(const PnmlStats& stats, const Matrix& feats) {
  if (feats.cols() != stats.dim) throw DimensionError("pnml: feature dimension mismatch");
  Eigen::MatrixXd t = feats.transpose();
  stats.chol.matrixL().solveInPlace(t);
  const Eigen::VectorXd xg = t.colwise().squaredNorm().transpose();
  return {xg.data(), xg.data() + xg.size()};
}

double pnml_regret(const RowVector& probs, double xg) {
  if (!(xg >= 0.0)) throw DomainError("pnml: x^T g must be non-negative");
  double acc = 0.0;
  for (Eigen::Index c = 0; c < probs.size(); ++c) {
    const double p = std::max(probs(c), diff::kLogFloor);
    acc += p / (p + std::pow(p, xg) * (1.0 - p));
  }
  return std::log(acc);
}

double score_pnml(const RowVector& probs, double xg) { return 1.0 - pnml_regret(probs, xg); }

void write_score_csv(std::ostream& os, const std::vector<ScoreRecord>& records) {
  os << "episode,query,method,score,pred,truth\n";
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.17g", r.score);
    os << r.episode << ',' << r.query << ',' << r.method << ',' << buf << ',' << r.pred << ','
       << r.truth << '\n';
  }
}

}  // namespace hypermix::ood
