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

#include "hypermix/diff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "hypermix/error.hpp"

namespace hypermix::diff {
namespace {

thread_local bool t_grad_enabled = true;

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << "[" << m.rows() << "x" << m.cols() << "]";
  return os.str();
}

void require_same_shape(const char* op, const Value& a, const Value& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.data()) + " vs " +
                         shape_str(b.data()));
  }
}

void require_finite(const char* op, const Matrix& m) {
  if (!m.allFinite()) throw DomainError(std::string(op) + ": non-finite input");
}

}  // namespace

// --- Value -----------------------------------------------------------------

Value Value::leaf(Matrix data) {
  auto n = std::make_shared<Node>();
  n->grad = Matrix::Zero(data.rows(), data.cols());
  n->data = std::move(data);
  n->requires_grad = true;
  return Value(std::move(n));
}

Value Value::constant(Matrix data) {
  auto n = std::make_shared<Node>();
  n->grad = Matrix::Zero(data.rows(), data.cols());
  n->data = std::move(data);
  n->requires_grad = false;
  return Value(std::move(n));
}

Value Value::scalar(double v, bool requires_grad) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return requires_grad ? leaf(std::move(m)) : constant(std::move(m));
}

const Matrix& Value::data() const { return node_->data; }
Matrix& Value::mutable_data() { return node_->data; }
const Matrix& Value::grad() const { return node_->grad; }
Matrix& Value::mutable_grad() { return node_->grad; }
bool Value::requires_grad() const { return node_->requires_grad; }

void Value::set_requires_grad(bool on) {
  if (!node_->is_leaf) throw DomainError("set_requires_grad: only leaves can be toggled");
  node_->requires_grad = on;
}

double Value::item() const {
  if (rows() != 1 || cols() != 1) {
    throw DimensionError("item: expected a 1x1 value, got " + shape_str(data()));
  }
  return data()(0, 0);
}

void Value::backward() const {
  Node* root = node_.get();
  if (!root->requires_grad) {
    root->grad.setOnes();
    return;
  }
  // Iterative post-order DFS over nodes that require a gradient.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    if (!n->is_leaf) n->grad.setZero();
  }
  if (root->is_leaf) {
    root->grad.array() += 1.0;
    return;
  }
  root->grad.setOnes();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->is_leaf && n->backward_fn) n->backward_fn(*n);
  }
}

Value make_node(Matrix data, std::vector<Value> parents, std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->grad = Matrix::Zero(data.rows(), data.cols());
  n->data = std::move(data);
  bool needs = false;
  if (t_grad_enabled) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    n->is_leaf = false;
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node_);
    n->backward_fn = std::move(backward);
  }
  return Value(std::move(n));
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

// --- primitives ------------------------------------------------------------

Value matmul(const Value& a, const Value& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.data()) + " x " +
                         shape_str(b.data()));
  }
  Matrix out = a.data() * b.data();
  return make_node(std::move(out), {a, b}, [](Node& n) {
    if (n.parent_needs_grad(0)) n.parent_grad(0).noalias() += n.grad * n.parent_data(1).transpose();
    if (n.parent_needs_grad(1)) n.parent_grad(1).noalias() += n.parent_data(0).transpose() * n.grad;
  });
}

Value transpose(const Value& a) {
  Matrix out = a.data().transpose();
  return make_node(std::move(out), {a}, [](Node& n) { n.parent_grad(0) += n.grad.transpose(); });
}

Value add(const Value& a, const Value& b) {
  require_same_shape("add", a, b);
  Matrix out = a.data() + b.data();
  return make_node(std::move(out), {a, b}, [](Node& n) {
    if (n.parent_needs_grad(0)) n.parent_grad(0) += n.grad;
    if (n.parent_needs_grad(1)) n.parent_grad(1) += n.grad;
  });
}

Value sub(const Value& a, const Value& b) {
  require_same_shape("sub", a, b);
  Matrix out = a.data() - b.data();
  return make_node(std::move(out), {a, b}, [](Node& n) {
    if (n.parent_needs_grad(0)) n.parent_grad(0) += n.grad;
    if (n.parent_needs_grad(1)) n.parent_grad(1) -= n.grad;
  });
}

Value mul(const Value& a, const Value& b) {
  require_same_shape("mul", a, b);
  Matrix out = a.data().cwiseProduct(b.data());
  return make_node(std::move(out), {a, b}, [](Node& n) {
    if (n.parent_needs_grad(0)) n.parent_grad(0) += n.grad.cwiseProduct(n.parent_data(1));
    if (n.parent_needs_grad(1)) n.parent_grad(1) += n.grad.cwiseProduct(n.parent_data(0));
  });
}

Value scale(const Value& a, double c) {
  Matrix out = a.data() * c;
  return make_node(std::move(out), {a}, [c](Node& n) { n.parent_grad(0) += c * n.grad; });
}

Value relu(const Value& a) {
  Matrix out = a.data().cwiseMax(0.0);
  return make_node(std::move(out), {a}, [](Node& n) {
    n.parent_grad(0).array() += (n.parent_data(0).array() > 0.0).select(n.grad.array(), 0.0);
  });
}

Value exp(const Value& a) {
  Matrix out = a.data().array().exp().matrix();
  return make_node(std::move(out), {a}, [](Node& n) {
    n.parent_grad(0) += n.grad.cwiseProduct(n.data);
  });
}

Value log(const Value& a) {
  if ((a.data().array() <= 0.0).any()) throw DomainError("log: non-positive entry");
  Matrix out = a.data().array().log().matrix();
  return make_node(std::move(out), {a}, [](Node& n) {
    n.parent_grad(0).array() += n.grad.array() / n.parent_data(0).array();
  });
}

Value log_floor(const Value& a, double floor) {
  Matrix out = a.data().cwiseMax(floor).array().log().matrix();
  return make_node(std::move(out), {a}, [floor](Node& n) {
    const auto& x = n.parent_data(0).array();
    n.parent_grad(0).array() += (x > floor).select(n.grad.array() / x, 0.0);
  });
}

Value softplus(const Value& a) {
  const auto& x = a.data().array();
  Matrix out = (x.max(0.0) + (-x.abs()).exp().log1p()).matrix();
  return make_node(std::move(out), {a}, [](Node& n) {
    const auto& x = n.parent_data(0).array();
    n.parent_grad(0).array() += n.grad.array() / (1.0 + (-x).exp());
  });
}

Value add_row(const Value& a, const Value& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: expected a 1x" + std::to_string(a.cols()) + " row, got " +
                         shape_str(row.data()));
  }
  Matrix out = a.data().rowwise() + row.data().row(0);
  return make_node(std::move(out), {a, row}, [](Node& n) {
    if (n.parent_needs_grad(0)) n.parent_grad(0) += n.grad;
    if (n.parent_needs_grad(1)) n.parent_grad(1) += n.grad.colwise().sum();
  });
}

Value slice_cols(const Value& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw DimensionError("slice_cols: range [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") outside " + shape_str(a.data()));
  }
  Matrix out = a.data().middleCols(start, count);
  return make_node(std::move(out), {a}, [start, count](Node& n) {
    n.parent_grad(0).middleCols(start, count) += n.grad;
  });
}

Value concat_rows(const Value& a, const Value& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("concat_rows: column mismatch " + shape_str(a.data()) + " vs " +
                         shape_str(b.data()));
  }
  Matrix out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a.data();
  out.bottomRows(b.rows()) = b.data();
  const Eigen::Index top = a.rows();
  return make_node(std::move(out), {a, b}, [top](Node& n) {
    if (n.parent_needs_grad(0)) n.parent_grad(0) += n.grad.topRows(top);
    if (n.parent_needs_grad(1)) n.parent_grad(1) += n.grad.bottomRows(n.grad.rows() - top);
  });
}

Value gather_rows(const Value& a, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) {
      throw DimensionError("gather_rows: row " + std::to_string(rows[i]) + " outside " +
                           shape_str(a.data()));
    }
    out.row(static_cast<Eigen::Index>(i)) = a.data().row(rows[i]);
  }
  return make_node(std::move(out), {a}, [rows](Node& n) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      n.parent_grad(0).row(rows[i]) += n.grad.row(static_cast<Eigen::Index>(i));
    }
  });
}

Value sum(const Value& a) {
  Matrix out(1, 1);
  out(0, 0) = a.data().sum();
  return make_node(std::move(out), {a}, [](Node& n) {
    n.parent_grad(0).array() += n.grad(0, 0);
  });
}

Value mean(const Value& a) {
  const double count = static_cast<double>(a.data().size());
  if (count == 0) throw DimensionError("mean: empty value");
  Matrix out(1, 1);
  out(0, 0) = a.data().sum() / count;
  return make_node(std::move(out), {a}, [count](Node& n) {
    n.parent_grad(0).array() += n.grad(0, 0) / count;
  });
}

Value max_rows(const Value& a) {
  if (a.cols() == 0) throw DimensionError("max_rows: no columns");
  Matrix out(a.rows(), 1);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < a.cols(); ++j) {
      if (a.data()(i, j) > a.data()(i, best)) best = j;
    }
    arg[static_cast<std::size_t>(i)] = best;
    out(i, 0) = a.data()(i, best);
  }
  return make_node(std::move(out), {a}, [arg](Node& n) {
    for (std::size_t i = 0; i < arg.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      n.parent_grad(0)(r, arg[i]) += n.grad(r, 0);
    }
  });
}

Value softmax_rows(const Value& logits) {
  require_finite("softmax_rows", logits.data());
  const Matrix& x = logits.data();
  Matrix out = (x.colwise() - x.rowwise().maxCoeff()).array().exp().matrix();
  out.array().colwise() /= out.rowwise().sum().array();
  return make_node(std::move(out), {logits}, [](Node& n) {
    const Eigen::VectorXd dot = n.grad.cwiseProduct(n.data).rowwise().sum();
    n.parent_grad(0).array() += n.data.array() * (n.grad.colwise() - dot).array();
  });
}

Value log_softmax_rows(const Value& logits) {
  require_finite("log_softmax_rows", logits.data());
  const Matrix& x = logits.data();
  const Eigen::VectorXd mx = x.rowwise().maxCoeff();
  Matrix shifted = x.colwise() - mx;
  const Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log().matrix();
  Matrix out = shifted.colwise() - lse;
  return make_node(std::move(out), {logits}, [](Node& n) {
    const Eigen::VectorXd gsum = n.grad.rowwise().sum();
    Matrix p = n.data.array().exp().matrix();
    n.parent_grad(0) += n.grad - Matrix(p.array().colwise() * gsum.array());
  });
}

Value sqdist(const Value& x, const Value& p) {
  if (x.cols() != p.cols()) {
    throw DimensionError("sqdist: feature mismatch " + shape_str(x.data()) + " vs " +
                         shape_str(p.data()));
  }
  const Eigen::VectorXd xn = x.data().rowwise().squaredNorm();
  const Eigen::VectorXd pn = p.data().rowwise().squaredNorm();
  Matrix out = -2.0 * x.data() * p.data().transpose();
  out.colwise() += xn;
  out.rowwise() += pn.transpose();
  return make_node(std::move(out), {x, p}, [](Node& n) {
    const Matrix& xd = n.parent_data(0);
    const Matrix& pd = n.parent_data(1);
    if (n.parent_needs_grad(0)) {
      const Eigen::VectorXd rs = n.grad.rowwise().sum();
      n.parent_grad(0) += 2.0 * (Matrix(xd.array().colwise() * rs.array()) - n.grad * pd);
    }
    if (n.parent_needs_grad(1)) {
      const Eigen::VectorXd cs = n.grad.colwise().sum().transpose();
      n.parent_grad(1) += 2.0 * (Matrix(pd.array().colwise() * cs.array()) -
                                 n.grad.transpose() * xd);
    }
  });
}

Value cce_loss(const Value& probs, const Matrix& targets) {
  if (probs.rows() != targets.rows() || probs.cols() != targets.cols()) {
    throw DimensionError("cce_loss: probs " + shape_str(probs.data()) + " vs targets " +
                         shape_str(targets));
  }
  if (probs.rows() == 0) throw DimensionError("cce_loss: empty batch");
  for (Eigen::Index i = 0; i < targets.rows(); ++i) {
    if ((targets.row(i).array() < 0.0).any() || std::abs(targets.row(i).sum() - 1.0) > 1e-6) {
      throw DomainError("cce_loss: target row " + std::to_string(i) + " is not a distribution");
    }
  }
  const double m = static_cast<double>(probs.rows());
  Matrix clamped = probs.data().cwiseMax(kLogFloor).cwiseMin(1.0 - kLogFloor);
  Matrix out(1, 1);
  out(0, 0) = -(targets.array() * clamped.array().log()).sum() / m;
  return make_node(std::move(out), {probs}, [targets, clamped = std::move(clamped), m](Node& n) {
    n.parent_grad(0).array() -= n.grad(0, 0) / m * targets.array() / clamped.array();
  });
}

Matrix input_gradient(const std::function<Value(const Value&)>& model, const Matrix& x,
                      const std::function<Value(const Value&)>& select) {
  Value input = Value::leaf(x);
  Value out = select(model(input));
  if (out.rows() != 1 || out.cols() != 1) {
    throw DimensionError("input_gradient: selector must produce a scalar");
  }
  out.backward();
  return input.grad();
}

// --- ParamSet / Sgd --------------------------------------------------------

void ParamSet::add(const std::string& name, const Value& leaf) {
  if (!leaf.defined() || !leaf.requires_grad()) {
    throw ConfigError("ParamSet::add: '" + name + "' is not a trainable leaf");
  }
  for (const auto& [n, v] : entries_) {
    if (n == name) throw ConfigError("ParamSet::add: duplicate name '" + name + "'");
    if (v.node() == leaf.node()) throw ConfigError("ParamSet::add: leaf registered twice ('" + name + "')");
  }
  entries_.emplace_back(name, leaf);
}

void ParamSet::zero_grads() {
  for (auto& [name, v] : entries_) v.mutable_grad().setZero();
}

const Value& ParamSet::at(const std::string& name) const {
  for (const auto& [n, v] : entries_) {
    if (n == name) return v;
  }
  throw ConfigError("ParamSet: no parameter named '" + name + "'");
}

bool ParamSet::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == name; });
}

Sgd::Sgd(double lr, double momentum, double weight_decay)
    : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
  if (lr < 0.0) throw ConfigError("Sgd: learning rate must be >= 0");
  if (momentum < 0.0) throw ConfigError("Sgd: momentum must be >= 0");
  if (weight_decay < 0.0) throw ConfigError("Sgd: weight decay must be >= 0");
}

void Sgd::set_lr(double lr) {
  if (lr < 0.0) throw ConfigError("Sgd: learning rate must be >= 0");
  lr_ = lr;
}

void Sgd::step(ParamSet& params) {
  auto& entries = params.entries();
  if (velocity_.empty()) {
    for (const auto& [name, v] : entries) velocity_.push_back(Matrix::Zero(v.rows(), v.cols()));
  }
  if (velocity_.size() != entries.size()) {
    throw ConfigError("Sgd::step: parameter set changed between steps");
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Value w = entries[i].second;
    Matrix g = w.grad() + weight_decay_ * w.data();
    velocity_[i] = momentum_ * velocity_[i] + g;
    w.mutable_data() -= lr_ * (g + momentum_ * velocity_[i]);
  }
}

}  // namespace hypermix::diff
