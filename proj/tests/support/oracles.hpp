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

// Independent reference implementations used by the tests. Nothing here calls
// into the library's metric or scoring code.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "hypermix/diff.hpp"
#include "hypermix/rng.hpp"

namespace oracle {

using hypermix::diff::Matrix;
using hypermix::diff::Value;

inline double pairwise_auroc(const std::vector<double>& ind, const std::vector<double>& ood) {
  double hits = 0.0;
  for (double a : ind) {
    for (double b : ood) hits += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  }
  return hits / (static_cast<double>(ind.size()) * static_cast<double>(ood.size()));
}

inline double sweep_fpr(const std::vector<double>& ind, const std::vector<double>& ood, double target) {
  std::vector<double> candidates = ind;
  candidates.insert(candidates.end(), ood.begin(), ood.end());
  double best = -INFINITY;
  for (double t : candidates) {
    const double tpr = static_cast<double>(std::count_if(ind.begin(), ind.end(), [t](double s) { return s >= t; })) /
                       static_cast<double>(ind.size());
    if (tpr >= target) best = std::max(best, t);
  }
  return static_cast<double>(std::count_if(ood.begin(), ood.end(), [best](double s) { return s >= best; })) /
         static_cast<double>(ood.size());
}

inline std::vector<double> softmax(const std::vector<double>& z) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  std::vector<double> out;
  double total = 0.0;
  for (double v : z) total += std::exp(v - m);
  for (double v : z) out.push_back(std::exp(v - m) / total);
  return out;
}

inline double gaussian_logpdf_1d(double x, double mu, double var) {
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * (x - mu) * (x - mu) / var;
}

inline double pnml_gamma(const std::vector<double>& p, double xg) {
  double acc = 0.0;
  for (double v : p) acc += v / (v + std::pow(v, xg) * (1.0 - v));
  return std::log(acc);
}

/// Projects an op output to a scalar with fixed random weights so every
/// output entry contributes to the checked gradient.
struct FdResult {
  double max_rel = 0.0;
};

/// Relative error ||analytic - numeric|| / max(||numeric||, 1e-8) per input,
/// central differences with the given step.
inline FdResult finite_difference(const std::function<Value(const std::vector<Value>&)>& op,
                                  const std::vector<Matrix>& inputs, hypermix::RandomStream& rng,
                                  double step = 1e-5) {
  std::vector<Value> leaves;
  for (const auto& m : inputs) leaves.push_back(Value::leaf(m));
  Value out = op(leaves);
  Matrix proj(out.rows(), out.cols());
  for (Eigen::Index i = 0; i < proj.size(); ++i) proj.data()[i] = rng.uniform() - 0.5;
  auto scalar = [&](const Value& o) { return hypermix::diff::sum(hypermix::diff::mul(o, Value::constant(proj))); };
  scalar(out).backward();

  auto eval_at = [&](const std::vector<Matrix>& xs) {
    hypermix::diff::NoGradGuard guard;
    std::vector<Value> cs;
    for (const auto& m : xs) cs.push_back(Value::constant(m));
    return scalar(op(cs)).item();
  };
  FdResult res;
  std::vector<Matrix> xs = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Matrix numeric(inputs[k].rows(), inputs[k].cols());
    for (Eigen::Index i = 0; i < numeric.size(); ++i) {
      const double orig = xs[k].data()[i];
      xs[k].data()[i] = orig + step;
      const double up = eval_at(xs);
      xs[k].data()[i] = orig - step;
      const double down = eval_at(xs);
      xs[k].data()[i] = orig;
      numeric.data()[i] = (up - down) / (2.0 * step);
    }
    const double rel = (leaves[k].grad() - numeric).norm() / std::max(numeric.norm(), 1e-8);
    res.max_rel = std::max(res.max_rel, rel);
  }
  return res;
}

inline Matrix random_matrix(hypermix::RandomStream& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

/// Entries pushed at least `gap` away from zero, for kinked ops.
inline Matrix away_from_zero(Matrix m, double gap) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double& v = m.data()[i];
    if (std::abs(v) < gap) v = v < 0 ? v - gap : v + gap;
  }
  return m;
}

}  // namespace oracle
