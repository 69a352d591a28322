// Copyright 2026 the softgaz authors
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
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "softgaz/rng.hpp"

namespace softgaz::ad {

// Dense row-major tensor of doubles. Rank 0 = scalar, 1 = vector,
// 2 = matrix; nothing higher is needed here.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s);

  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols);

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  std::string shape_str() const;

  double& at(std::size_t i) { return data[i]; }
  double at(std::size_t i) const { return data[i]; }
  double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
};

// Named trainable array with gradient and momentum state.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor velocity;

  Parameter(std::string n, Tensor init);
  void zero_grad();
};

class ParameterSet {
 public:
  Parameter& create(const std::string& name, Tensor init);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

// One SGD-with-momentum update over every parameter in the set. Gradients
// are first rescaled so their global L2 norm does not exceed `clip`
// (clip <= 0 disables clipping). Gradients are zeroed afterwards.
void sgd_step(ParameterSet& params, double lr, double momentum, double clip);

// Reverse-mode tape. Operations append nodes; `backward` walks the tape
// once in reverse creation order (creation order is topological).
class Graph {
 public:
  using Ref = int;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Ref constant(Tensor t);
  Ref param(Parameter& p);

  Ref add(Ref a, Ref b);
  Ref add_n(const std::vector<Ref>& xs);
  Ref add_row_bias(Ref m, Ref bias);  // [r,c] + [c], broadcast over rows
  Ref add_col_bias(Ref m, Ref bias);  // [r,c] + [r], broadcast over cols
  Ref mul(Ref a, Ref b);
  Ref scale(Ref a, double c);
  Ref matmul(Ref a, Ref b);  // [m,k]x[k,n] -> [m,n], or [k]x[k,n] -> [n]
  Ref concat_cols(const std::vector<Ref>& ms);
  Ref concat_vec(const std::vector<Ref>& vs);
  Ref stack_rows(const std::vector<Ref>& vs);  // n vectors [c] -> [n,c]
  Ref row(Ref m, std::size_t i);
  Ref at(Ref v, std::size_t i);
  Ref at(Ref m, std::size_t i, std::size_t j);
  Ref slice(Ref v, std::size_t begin, std::size_t len);
  Ref tanh(Ref x);
  Ref sigmoid(Ref x);
  Ref max_over_axis(Ref m, int axis);
  Ref embedding_lookup(Parameter& table, const std::vector<int>& ids);
  Ref gather_windows(Ref m, int window);  // same padding, odd window
  Ref sum(Ref x);
  Ref logsumexp(Ref v);
  Ref logsumexp_axis(Ref m, int axis);
  Ref softmax_cross_entropy(Ref logits, std::size_t gold);
  Ref binary_cross_entropy(Ref logits, Tensor targets);  // sigmoid fused
  Ref dropout(Ref x, double rate, Rng& rng);

  // Composites built from the primitives above.
  Ref conv1d_same(Ref seq, Ref filters, Ref bias, int window);
  Ref max_pool_over_time(Ref m) { return max_over_axis(m, 0); }
  // Returns (h', c'). Weight layout: [in+h, 4h] with gate order i,f,g,o.
  std::pair<Ref, Ref> lstm_step(Ref w, Ref b, Ref x, Ref h, Ref c);

  const Tensor& value(Ref r) const { return nodes_[static_cast<std::size_t>(r)].value; }
  double scalar_value(Ref r) const;

  // Single-use; a second call without a fresh graph is an error.
  void backward(Ref loss);
  const Tensor& grad(Ref r) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    std::function<void()> back;
  };

  Ref push(Tensor value, bool needs_grad, std::function<void()> back);
  Tensor& grad_buf(Ref r);
  const Node& node(Ref r) const { return nodes_[static_cast<std::size_t>(r)]; }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Glorot-style uniform init for weight matrices.
Tensor init_uniform(std::vector<std::size_t> shape, double limit, Rng& rng);
Tensor init_glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace softgaz::ad
