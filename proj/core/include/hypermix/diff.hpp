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

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace hypermix::diff {

/// Dense real array of rank <= 2. Vectors are stored as 1 x n rows.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// Floor applied to every probability before a log is taken.
inline constexpr double kLogFloor = 1e-12;

struct Node;

/// Handle to a node of a define-by-run computation graph.
///
/// Copies of a Value share the node. data and grad always have the same
/// shape. Graph edges only point to parents that require a gradient, so a
/// subgraph built purely from constants costs nothing at backward time.
class Value {
 public:
  Value() = default;

  /// Trainable leaf.
  static Value leaf(Matrix data);
  /// Leaf that never receives a gradient.
  static Value constant(Matrix data);
  static Value scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Matrix& data() const;
  Matrix& mutable_data();
  const Matrix& grad() const;
  Matrix& mutable_grad();
  Eigen::Index rows() const { return data().rows(); }
  Eigen::Index cols() const { return data().cols(); }
  bool requires_grad() const;
  void set_requires_grad(bool on);

  /// Value of a 1 x 1 node.
  double item() const;

  /// Reverse pass from this node. The root gradient is set to ones, interior
  /// gradients are recomputed from scratch, and leaf gradients accumulate, so
  /// two calls without zeroing double every leaf gradient.
  void backward() const;

  const Node* node() const { return node_.get(); }

 private:
  friend Value make_node(Matrix, std::vector<Value>, std::function<void(Node&)>);
  friend struct Node;
  explicit Value(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;
};

struct Node {
  Matrix data;
  Matrix grad;
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Matrix& parent_grad(std::size_t i) { return parents[i]->grad; }
  const Matrix& parent_data(std::size_t i) const { return parents[i]->data; }
  bool parent_needs_grad(std::size_t i) const { return parents[i]->requires_grad; }
};

/// Builds an interior node. Parents that do not require a gradient are kept
/// so the backward rule can read their data, but the node itself only
/// requires a gradient if at least one parent does and grad mode is enabled.
Value make_node(Matrix data, std::vector<Value> parents, std::function<void(Node&)> backward);

/// Thread-local switch; while disabled every op returns a constant.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// --- primitives -----------------------------------------------------------

Value matmul(const Value& a, const Value& b);
Value transpose(const Value& a);
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value scale(const Value& a, double c);
Value relu(const Value& a);
Value exp(const Value& a);
/// Natural log; throws DomainError on any entry <= 0.
Value log(const Value& a);
/// log(max(a, floor)); gradient passes through unclamped entries only.
Value log_floor(const Value& a, double floor = kLogFloor);
/// log(1 + exp(a)), evaluated stably.
Value softplus(const Value& a);

/// a (m x n) + row (1 x n) broadcast over rows.
Value add_row(const Value& a, const Value& row);
/// Columns [start, start + count).
Value slice_cols(const Value& a, Eigen::Index start, Eigen::Index count);
/// Stacks rows of a over rows of b.
Value concat_rows(const Value& a, const Value& b);
/// Rows of a selected by index, in the given order.
Value gather_rows(const Value& a, const std::vector<Eigen::Index>& rows);

Value sum(const Value& a);
Value mean(const Value& a);
/// m x 1 maximum of each row; the gradient goes to the lowest-index maximum.
Value max_rows(const Value& a);

Value softmax_rows(const Value& logits);
Value log_softmax_rows(const Value& logits);
/// Squared Euclidean distance between every row of x (m x d) and of p (n x d).
Value sqdist(const Value& x, const Value& p);

/// Mean over rows of -sum_c y_c log(clamp(p_c, floor, 1 - floor)).
/// Targets must be row distributions (non-negative, sum 1 +- 1e-6).
Value cce_loss(const Value& probs, const Matrix& soft_targets);

/// Gradient of select(model(x)) with respect to the input x alone.
/// Parameters referenced by model are expected to be constants or frozen.
Matrix input_gradient(const std::function<Value(const Value&)>& model, const Matrix& x,
                      const std::function<Value(const Value&)>& select);

// --- parameters and optimisation -----------------------------------------

/// Named set of trainable leaves; each leaf may be registered once.
class ParamSet {
 public:
  void add(const std::string& name, const Value& leaf);
  void zero_grads();
  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, Value>>& entries() const { return entries_; }
  const Value& at(const std::string& name) const;
  bool contains(const std::string& name) const;

 private:
  std::vector<std::pair<std::string, Value>> entries_;
};

/// SGD with Nesterov momentum and L2 weight decay added to the gradient.
///
///   g = grad + wd * w;  v = mu * v + g;  w -= lr * (g + mu * v)
class Sgd {
 public:
  Sgd(double lr, double momentum, double weight_decay);

  void step(ParamSet& params);
  void set_lr(double lr);
  double lr() const { return lr_; }

 private:
  double lr_;
  double momentum_;
  double weight_decay_;
  std::vector<Matrix> velocity_;
};

// --- checkpoint file -------------------------------------------------------

/// Tensors in a checkpoint, keyed by name. Header comment lines are free-form
/// metadata (seed, config hash, architecture).
struct Checkpoint {
  std::vector<std::string> header_comments;
  std::map<std::string, Matrix> tensors;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);
std::string format_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& text, const std::string& origin = "<memory>");

}  // namespace hypermix::diff
