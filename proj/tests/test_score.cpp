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

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "doctest.h"
#include "hypermix/data.hpp"
#include "hypermix/error.hpp"
#include "hypermix/score.hpp"
#include "support/oracles.hpp"

using namespace hypermix;
using namespace hypermix::ood;
using diff::Matrix;
using diff::RowVector;
using diff::Value;

namespace {

RowVector row(std::initializer_list<double> v) {
  RowVector r(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) r(i++) = x;
  return r;
}

Matrix col(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

LogitFn linear_logits(const Matrix& w) {
  return [w](const Value& x) { return diff::matmul(x, Value::constant(w)); };
}

}  // namespace

TEST_SUITE("oodscore") {

TEST_CASE("MSP examples") {
  const Scored a = score_msp(row({0.7, 0.2, 0.1}));
  CHECK(a.score == 0.7);
  CHECK(a.pred == 0);
  CHECK(score_msp(RowVector::Constant(5, 0.2)).score == 0.2);
  const Scored tie = score_msp(row({0.5, 0.5}));
  CHECK(tie.score == 0.5);
  CHECK(tie.pred == 0);
  CHECK(score_msp(row({0.1, 0.3, 0.3, 0.3})).pred == 1);
}

TEST_CASE("entropy examples") {
  CHECK(score_entropy(RowVector::Constant(4, 0.25)) == doctest::Approx(-std::log(4.0)).epsilon(1e-15));
  CHECK(score_entropy(row({1.0, 0.0, 0.0})) == 0.0);
  const double expect = 0.8 * std::log(0.8) + 0.2 * std::log(0.2);
  CHECK(score_entropy(row({0.8, 0.2})) == doctest::Approx(-0.5004).epsilon(1e-4));
  CHECK(std::abs(score_entropy(row({0.8, 0.2})) - expect) < 1e-15);
  CHECK(std::isfinite(score_entropy(row({0.0, 1.0}))));
}

TEST_CASE("method tokens") {
  CHECK(score_method_tokens() == std::vector<std::string>{"msp", "entropy", "odin", "dm", "pnml"});
  for (const auto& t : score_method_tokens()) CHECK(score_method_name(parse_score_method(t)) == t);
  CHECK_THROWS_AS(parse_score_method("energy"), ConfigError);
}

TEST_CASE("ODIN temperature example and limits") {
  // Identity logits: x is the logit row itself.
  const LogitFn id = [](const Value& x) { return x; };
  const Matrix x = (Matrix(1, 3) << 2.0, 1.0, 0.0).finished();
  const auto s = score_odin(id, x, 10.0, 0.0);
  const auto expect = oracle::softmax({0.2, 0.1, 0.0});
  CHECK(s[0].score == doctest::Approx(0.3672).epsilon(1e-4));
  CHECK(std::abs(s[0].score - expect[0]) < 1e-15);

  RandomStream rng(2);
  const Matrix xs = oracle::random_matrix(rng, 20, 4);
  const Matrix w = oracle::random_matrix(rng, 4, 5);
  for (const auto& sc : score_odin(linear_logits(w), xs, 1e9, kOdinEps)) {
    CHECK(sc.score == doctest::Approx(0.2).epsilon(1e-6));
  }
  CHECK_THROWS_AS(score_odin(id, x, 0.0, 0.0), ConfigError);
  CHECK_THROWS_AS(score_odin(id, x, 1.0, -1.0), ConfigError);
  CHECK(default_odin_temperature(5) == 1.0);
  CHECK(default_odin_temperature(10) == 10.0);
}

TEST_CASE("ODIN at T=1 without perturbation equals MSP bitwise") {
  RandomStream rng(3);
  const Matrix w = oracle::random_matrix(rng, 6, 5);
  const Matrix x = oracle::random_matrix(rng, 1000, 6, 2.0);
  const auto odin = score_odin(linear_logits(w), x, 1.0, 0.0);
  const auto msp = score_msp_rows(diff::softmax_rows(Value::constant(x * w)).data());
  for (std::size_t i = 0; i < msp.size(); ++i) {
    REQUIRE(odin[i].score == msp[i].score);
    REQUIRE(odin[i].pred == msp[i].pred);
  }
}

TEST_CASE("ODIN perturbation moves against the loss gradient") {
  // Two classes with logits (x0, -x0): -log p_max falls as x0 moves away from 0.
  const Matrix w = (Matrix(1, 2) << 1.0, -1.0).finished();
  const Matrix x = (Matrix(2, 1) << 0.3, -0.4).finished();
  const double eps = 0.05;
  const Matrix p = odin_probs(linear_logits(w), x, 1.0, eps);
  const auto at = [&](double v) { return oracle::softmax({v, -v}); };
  CHECK(p(0, 0) == doctest::Approx(at(0.3 + eps)[0]).epsilon(1e-12));
  CHECK(p(1, 1) == doctest::Approx(at(-0.4 - eps)[1]).epsilon(1e-12));
}

TEST_CASE("Gaussian statistics in one dimension") {
  const GaussianStats st = fit_gaussian_stats({col({0, 2, 4, 6})}, {0, 0, 1, 1}, 2);
  REQUIRE(st.layers.size() == 1);
  const GaussianLayer& l = st.layers[0];
  CHECK(l.means(0, 0) == 1.0);
  CHECK(l.means(1, 0) == 5.0);
  CHECK(l.cov(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(l.eps == doctest::Approx(1e-6).epsilon(1e-12));

  const auto s = score_dm(st, {col({1.0, 3.0, 100.0})});
  const double oracle_val = oracle::gaussian_logpdf_1d(1.0, 1.0, 1.0 + 1e-6);
  CHECK(s[0] == doctest::Approx(-0.9189).epsilon(1e-4));
  CHECK(std::abs(s[0] - oracle_val) < 1e-12);
  CHECK(std::abs(s[1] - std::max(oracle::gaussian_logpdf_1d(3.0, 1.0, 1.0 + 1e-6),
                                  oracle::gaussian_logpdf_1d(3.0, 5.0, 1.0 + 1e-6))) < 1e-12);
  CHECK(s[0] >= s[1]);
  CHECK(s[1] >= s[2]);
}

TEST_CASE("degenerate support regularizes to eps I") {
  const Matrix same = Matrix::Constant(6, 3, 2.5);
  const GaussianStats st = fit_gaussian_stats({same}, {0, 0, 1, 1, 2, 2}, 3);
  const GaussianLayer& l = st.layers[0];
  CHECK(l.cov.isZero(0.0));
  CHECK(l.eps == 1e-12);
  CHECK(l.log_det == doctest::Approx(3.0 * std::log(1e-12)).epsilon(1e-12));
  CHECK(std::isfinite(score_dm(st, {Matrix::Constant(1, 3, 2.6)})[0]));
  CHECK_THROWS_AS(fit_gaussian_stats({same}, {0, 0, 0, 0, 0, 0}, 2), DomainError);
  CHECK_THROWS_AS(fit_gaussian_stats({same}, {0, 1}, 2), DimensionError);
}

TEST_CASE("covariance rank, symmetry and regularized spectrum") {
  RandomStream rng(4);
  for (const auto& [ways, shots] : std::vector<std::pair<int, int>>{{5, 1}, {5, 5}, {3, 4}}) {
    const int n = ways * shots;
    const Matrix feats = oracle::random_matrix(rng, n, 32);
    std::vector<int> y;
    for (int c = 0; c < ways; ++c) {
      for (int k = 0; k < shots; ++k) y.push_back(c);
    }
    const GaussianLayer l = fit_gaussian_stats({feats}, y, ways).layers[0];
    CHECK((l.cov - l.cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    Eigen::FullPivLU<Matrix> lu(l.cov);
    lu.setThreshold(1e-10);
    CHECK(lu.rank() <= n - ways);
    Eigen::SelfAdjointEigenSolver<Matrix> es(l.cov + l.eps * Matrix::Identity(32, 32));
    CHECK(es.eigenvalues().minCoeff() >= l.eps * (1.0 - 1e-6));
    CHECK(l.eps == doctest::Approx(std::max(1e-6 * l.cov.trace() / 32.0, 1e-12)));
  }
}

TEST_CASE("DM takes the maximum over layers") {
  // Layer A: the 1-D example. Layer B: constant 3, so its density is sharp around 3.
  const std::vector<Matrix> support{col({0, 2, 4, 6}), col({3, 3, 3, 3})};
  const GaussianStats st = fit_gaussian_stats(support, {0, 0, 1, 1}, 2);
  const double eps_a = 1e-6, eps_b = 1e-12;
  const auto a_score = [&](double v) {
    return std::max(oracle::gaussian_logpdf_1d(v, 1.0, 1.0 + eps_a), oracle::gaussian_logpdf_1d(v, 5.0, 1.0 + eps_a));
  };
  const auto s = score_dm(st, {col({1.0, 1.0}), col({3.0, 4.0})});
  // On the constant, layer B dominates.
  CHECK(std::abs(s[0] - oracle::gaussian_logpdf_1d(3.0, 3.0, eps_b)) < 1e-9);
  CHECK(s[0] > a_score(1.0));
  // Off the constant, layer B collapses and layer A decides.
  CHECK(std::abs(s[1] - a_score(1.0)) < 1e-12);
  const Matrix per = dm_layer_scores(st, {col({1.0, 1.0}), col({3.0, 4.0})});
  CHECK(per.cols() == 2);
  CHECK(per(1, 1) < per(1, 0));
  CHECK_THROWS_AS(score_dm(st, {col({1.0})}), DimensionError);
}

TEST_CASE("pNML examples") {
  CHECK(score_pnml(row({0.3, 0.7}), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(pnml_regret(row({0.2, 0.5, 0.3}), 0.0)) <= 1e-12);

  const double gamma = oracle::pnml_gamma({0.9, 0.1}, 1.0);
  CHECK(gamma == doctest::Approx(0.36145).epsilon(1e-4));
  CHECK(std::abs(pnml_regret(row({0.9, 0.1}), 1.0) - gamma) < 1e-15);
  CHECK(score_pnml(row({0.9, 0.1}), 1.0) == doctest::Approx(0.63855).epsilon(1e-4));
  CHECK_THROWS_AS(pnml_regret(row({0.5, 0.5}), -1.0), DomainError);

  RandomStream rng(5);
  for (int t = 0; t < 10000; ++t) {
    const int n = 2 + static_cast<int>(rng.below(8));
    RowVector z(n);
    for (int c = 0; c < n; ++c) z(c) = 3.0 * rng.normal();
    const RowVector p = diff::softmax_rows(Value::constant(Matrix(z))).data();
    const double xg = t % 10 == 0 ? 0.0 : std::exp(6.0 * rng.uniform() - 3.0);
    const double g = pnml_regret(p, xg);
    REQUIRE(g >= -1e-12);
    REQUIRE(std::isfinite(g));
  }
}

TEST_CASE("pNML data-matrix statistics") {
  RandomStream rng(6);
  const Matrix support = oracle::random_matrix(rng, 10, 4);
  const PnmlStats st = fit_pnml_stats(support);
  const Matrix gram = support.transpose() * support;
  CHECK(st.eps == doctest::Approx(1e-6 * gram.trace() / 4.0));
  const Matrix q = oracle::random_matrix(rng, 3, 4);
  const auto xg = pnml_xg(st, q);
  const Matrix inv = (gram + st.eps * Matrix::Identity(4, 4)).inverse();
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double expect = (q.row(i) * inv * q.row(i).transpose())(0, 0);
    CHECK(xg[static_cast<std::size_t>(i)] == doctest::Approx(expect).epsilon(1e-10));
    CHECK(xg[static_cast<std::size_t>(i)] >= 0.0);
  }
  CHECK_THROWS_AS(pnml_xg(st, Matrix::Zero(1, 3)), DimensionError);
}

TEST_CASE("score CSV format") {
  std::ostringstream os;
  write_score_csv(os, {{0, 1, "msp", 0.1, 2, 3}, {4, 5, "dm", -1.0 / 3.0, 0, data::kOod}});
  CHECK(os.str() ==
        "episode,query,method,score,pred,truth\n"
        "0,1,msp,0.10000000000000001,2,3\n"
        "4,5,dm,-0.33333333333333331,0,-1\n");
}

}  // TEST_SUITE
