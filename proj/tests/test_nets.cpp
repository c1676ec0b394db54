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

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "doctest.h"
#include "hypermix/data.hpp"
#include "hypermix/error.hpp"
#include "hypermix/nets.hpp"
#include "support/oracles.hpp"

using namespace hypermix;
using namespace hypermix::nets;
using diff::Matrix;
using diff::Value;

namespace {

struct Pair {
  FeatureExtractor f;
  HyperNetwork h;
};

Pair make_pair_nets(std::uint64_t seed, int in = 6, int feat = 4) {
  RandomStream rng(seed);
  FeatureExtractor f = FeatureExtractor::create(in, {8}, feat, rng);
  HyperNetwork h = HyperNetwork::create(feat, {16}, rng);
  return {std::move(f), std::move(h)};
}

std::vector<int> labels_for(int ways, int shots) {
  std::vector<int> y;
  for (int n = 0; n < ways; ++n) {
    for (int k = 0; k < shots; ++k) y.push_back(n);
  }
  return y;
}

Matrix codes_of(const Pair& p, const Matrix& x) {
  diff::NoGradGuard guard;
  return p.h.codes(p.f.embed(Value::constant(x))).data();
}

}  // namespace

TEST_SUITE("nets") {

TEST_CASE("architecture shapes") {
  RandomStream rng(1);
  const FeatureExtractor f = FeatureExtractor::create(16, {64, 64}, 32, rng);
  const HyperNetwork h = HyperNetwork::create(32, {256, 256}, rng);
  CHECK(f.feat_dim() == 32);
  CHECK(h.code_dim() == 33);
  const Matrix x = oracle::random_matrix(rng, 7, 16);
  const auto taps = f.taps(x);
  REQUIRE(taps.size() == 3);
  CHECK(taps[0].cols() == 64);
  CHECK(taps[2] == f.embed(x));
  CHECK(f.embed(x).allFinite());
  CHECK_THROWS_AS(f.embed(Matrix::Zero(2, 5)), DimensionError);
  CHECK_THROWS_AS(Mlp({4}, rng), ConfigError);
}

TEST_CASE("single-shot classifier copies the codes") {
  const Pair p = make_pair_nets(2);
  RandomStream rng(3);
  const Matrix x = oracle::random_matrix(rng, 2, 6);
  const Matrix c = codes_of(p, x);
  const ClassifierParams w = generate_classifier(p.h, p.f, x, {0, 1}, 1, 2);
  CHECK(w.weight.row(0) == c.row(0).head(4));
  CHECK(w.weight.row(1) == c.row(1).head(4));
  CHECK(w.bias(0, 0) == c(0, 4));
  CHECK(w.bias(0, 1) == c(1, 4));
}

TEST_CASE("classifier generation is a per-class mean of codes") {
  const Pair p = make_pair_nets(4);
  RandomStream rng(5);
  const int ways = 3, shots = 4;
  const Matrix x = oracle::random_matrix(rng, ways * shots, 6);
  const auto y = labels_for(ways, shots);
  const ClassifierParams w = generate_classifier(p.h, p.f, x, y, shots, ways);
  const Matrix c = codes_of(p, x);
  for (int n = 0; n < ways; ++n) {
    const Matrix mean_code = c.middleRows(n * shots, shots).colwise().mean();
    CHECK((w.weight.row(n) - mean_code.leftCols(4)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(w.bias(0, n) - mean_code(0, 4)) < 1e-12);
  }

  SUBCASE("permutation gives bit-identical weights") {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(x.rows()));
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<Eigen::Index>(i);
    for (int t = 0; t < 10; ++t) {
      std::vector<std::size_t> order(perm.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.partial_shuffle(std::span<std::size_t>(order), order.size());
      Matrix xp(x.rows(), x.cols());
      std::vector<int> yp;
      for (std::size_t i = 0; i < order.size(); ++i) {
        xp.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(order[i]));
        yp.push_back(y[order[i]]);
      }
      const ClassifierParams wp = generate_classifier(p.h, p.f, xp, yp, shots, ways);
      CHECK(wp.weight == w.weight);
      CHECK(wp.bias == w.bias);
    }
  }

  SUBCASE("duplicating the support leaves the weights unchanged") {
    Matrix x2(2 * x.rows(), x.cols());
    x2 << x, x;
    std::vector<int> y2 = y;
    y2.insert(y2.end(), y.begin(), y.end());
    const ClassifierParams wd = generate_classifier(p.h, p.f, x2, y2, 2 * shots, ways);
    CHECK((wd.weight - w.weight).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((wd.bias - w.bias).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("classifier generation errors") {
  const Pair p = make_pair_nets(6);
  const Matrix x = Matrix::Ones(4, 6);
  CHECK_THROWS_AS(generate_classifier(p.h, p.f, x, {0, 0, 0, 1}, 2, 2), AggregationError);
  CHECK_THROWS_AS(generate_classifier(p.h, p.f, x, {0, 0, 2, 2}, 2, 2), DomainError);
  CHECK_THROWS_AS(aggregate_classifier(p.h, p.f, {x, one_hot({0, 0, 0, 0}, 2)}), AggregationError);
  CHECK_THROWS_AS(one_hot({3}, 2), DomainError);
  const Pair wrong = make_pair_nets(7, 6, 5);
  CHECK_THROWS_AS(aggregate_classifier(wrong.h, p.f, {x, one_hot({0, 0, 1, 1}, 2)}), DimensionError);
}

TEST_CASE("classify examples") {
  RandomStream rng(8);
  const FeatureExtractor f = FeatureExtractor::create(3, {5}, 2, rng);
  const Matrix x = oracle::random_matrix(rng, 6, 3);

  const Matrix u = classify({Matrix::Zero(4, 2), Matrix::Zero(1, 4)}, f, x);
  CHECK((u.array() - 0.25).abs().maxCoeff() < 1e-15);

  const ClassifierParams c{oracle::random_matrix(rng, 3, 2), oracle::random_matrix(rng, 1, 3)};
  const Matrix p = classify(c, f, x);
  ClassifierParams shifted = c;
  shifted.bias.array() += 4.0;
  const Matrix q = classify(shifted, f, x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-9);
    Eigen::Index a = 0, b = 0;
    p.row(i).maxCoeff(&a);
    q.row(i).maxCoeff(&b);
    CHECK(a == b);
  }

  // Zero weights leave logits = bias = (2, 0).
  const Matrix two = classify({Matrix::Zero(2, 2), (Matrix(1, 2) << 2.0, 0.0).finished()}, f, x.topRows(1));
  const auto expect = oracle::softmax({2.0, 0.0});
  CHECK(two(0, 0) == doctest::Approx(0.8808).epsilon(1e-4));
  CHECK(std::abs(two(0, 0) - expect[0]) < 1e-15);
  CHECK(std::abs(two(0, 1) - expect[1]) < 1e-15);
}

TEST_CASE("protonet examples") {
  // Identity extractor on 1-D inputs: one hidden relu layer that passes positives.
  FeatureExtractor id;
  {
    diff::Checkpoint ck;
    ck.tensors["F.sizes"] = (Matrix(1, 3) << 1, 1, 1).finished();
    ck.tensors["F.w0"] = Matrix::Ones(1, 1);
    ck.tensors["F.b0"] = Matrix::Zero(1, 1);
    ck.tensors["F.w1"] = Matrix::Ones(1, 1);
    ck.tensors["F.b1"] = Matrix::Zero(1, 1);
    id.mlp = Mlp::load_from(ck, "F");
  }
  const Matrix support = (Matrix(2, 1) << 0.0, 2.0).finished();
  const Matrix p = protonet_classify(id, support, {0, 1}, 2, (Matrix(1, 1) << 0.5).finished());
  const auto expect = oracle::softmax({-0.25, -2.25});
  CHECK(p(0, 0) == doctest::Approx(0.8808).epsilon(1e-4));
  CHECK(std::abs(p(0, 0) - expect[0]) < 1e-15);

  const Matrix mid = protonet_classify(id, support, {0, 1}, 2, (Matrix(1, 1) << 1.0).finished());
  CHECK(mid(0, 0) == doctest::Approx(0.5).epsilon(1e-15));

  const Matrix far = (Matrix(2, 1) << 0.0, 100.0).finished();
  CHECK(protonet_classify(id, far, {0, 1}, 2, (Matrix(1, 1) << 0.0).finished())(0, 0) == 1.0);
  CHECK_THROWS_AS(protonet_classify(id, support, {0, 0}, 2, support), AggregationError);
}

TEST_CASE("mlp checkpoint round trip and clone") {
  RandomStream rng(9);
  const FeatureExtractor f = FeatureExtractor::create(4, {6, 5}, 3, rng);
  diff::Checkpoint ck;
  f.mlp.save_to(ck, "F");
  const diff::Checkpoint back = diff::parse_checkpoint(diff::format_checkpoint(ck));
  const FeatureExtractor g{Mlp::load_from(back, "F")};
  const Matrix x = oracle::random_matrix(rng, 5, 4);
  CHECK(g.embed(x) == f.embed(x));
  CHECK(g.mlp.sizes() == f.mlp.sizes());
  CHECK_THROWS_AS(Mlp::load_from(back, "H"), IoError);

  FeatureExtractor c = f.clone();
  diff::ParamSet ps;
  c.mlp.register_params(ps, "c");
  for (const auto& [name, v] : ps.entries()) {
    Value leaf = v;
    leaf.mutable_data().array() += 1.0;
  }
  CHECK(c.embed(x) != f.embed(x));
}

TEST_CASE("pretraining") {
  const data::Dataset ds = data::Dataset::generate(data::DatasetSpec{});
  RandomStream init_rng(21);
  const FeatureExtractor init = FeatureExtractor::create(16, {64, 64}, 32, init_rng);

  SUBCASE("zero epochs returns the initialization") {
    PretrainConfig cfg;
    cfg.epochs = 0;
    const PretrainResult r = pretrain_extractor(init.clone(), ds, cfg, RandomStream(1));
    const Matrix x = ds.features().topRows(10);
    CHECK(r.extractor.embed(x) == init.embed(x));
    CHECK(r.epoch_loss.empty());
  }

  SUBCASE("config errors") {
    PretrainConfig cfg;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(pretrain_extractor(init.clone(), ds, cfg, RandomStream(1)), ConfigError);
    cfg = PretrainConfig{};
    cfg.holdout_per_class = 60;
    CHECK_THROWS_AS(pretrain_extractor(init.clone(), ds, cfg, RandomStream(1)), ConfigError);
  }

  SUBCASE("median loss is non-increasing over the first five epochs") {
    std::vector<std::vector<double>> curves;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      RandomStream r(seed, 5);
      FeatureExtractor f0 = FeatureExtractor::create(16, {64, 64}, 32, r);
      PretrainConfig cfg;
      cfg.epochs = 5;
      // Milestones of the 50-epoch default schedule, expressed against 5 epochs.
      cfg.milestones = {6.0, 8.0};
      curves.push_back(pretrain_extractor(std::move(f0), ds, cfg, r.split(1)).epoch_loss);
    }
    std::vector<double> median;
    for (std::size_t e = 0; e < 5; ++e) {
      std::vector<double> col;
      for (const auto& c : curves) col.push_back(c.at(e));
      std::sort(col.begin(), col.end());
      median.push_back(col[2]);
    }
    for (std::size_t e = 1; e < median.size(); ++e) CHECK(median[e] <= median[e - 1]);
  }

  SUBCASE("linear probe on held-out base samples") {
    PretrainConfig cfg;
    cfg.holdout_per_class = 10;
    const PretrainResult r = pretrain_extractor(init.clone(), ds, cfg, RandomStream(2));
    CHECK(r.epoch_loss.size() == 50);

    // Ridge least-squares probe on one-hot targets, fit on the training rows.
    const auto base = ds.classes_in(data::Split::kBase);
    const int spc = ds.spec().samples_per_class;
    const int train_per = spc - cfg.holdout_per_class;
    const auto nb = static_cast<Eigen::Index>(base.size());
    const Eigen::Index d = r.extractor.feat_dim() + 1;
    Matrix xtr(nb * train_per, d), ytr = Matrix::Zero(nb * train_per, nb);
    Matrix xte(nb * cfg.holdout_per_class, d);
    std::vector<Eigen::Index> yte;
    Eigen::Index itr = 0, ite = 0;
    for (Eigen::Index c = 0; c < nb; ++c) {
      const auto samples = ds.samples_of(base[static_cast<std::size_t>(c)]);
      for (int k = 0; k < spc; ++k) {
        Matrix row(1, d);
        row << r.extractor.embed(Matrix(ds.features().row(samples[static_cast<std::size_t>(k)]))), 1.0;
        if (k < train_per) {
          xtr.row(itr) = row;
          ytr(itr++, c) = 1.0;
        } else {
          xte.row(ite++) = row;
          yte.push_back(c);
        }
      }
    }
    const Matrix gram = xtr.transpose() * xtr + 1e-3 * Matrix::Identity(d, d);
    const Matrix w = gram.ldlt().solve(xtr.transpose() * ytr);
    const Matrix scores = xte * w;
    int correct = 0;
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
      Eigen::Index best = 0;
      scores.row(i).maxCoeff(&best);
      correct += best == yte[static_cast<std::size_t>(i)] ? 1 : 0;
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(scores.rows());
    MESSAGE("linear probe accuracy " << acc);
    CHECK(acc > 0.9);
  }
}

}  // TEST_SUITE
