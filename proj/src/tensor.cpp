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

#include "softgaz/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "softgaz/error.hpp"

namespace softgaz::ad {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
  data.assign(shape_numel(shape), 0.0);
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data = {v};
  return t;
}

Tensor Tensor::vector(std::vector<double> v) {
  Tensor t;
  t.shape = {v.size()};
  t.data = std::move(v);
  return t;
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Parameter::Parameter(std::string n, Tensor init)
    : name(std::move(n)), value(std::move(init)) {
  grad = Tensor(value.shape);
  velocity = Tensor(value.shape);
}

void Parameter::zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }

Parameter& ParameterSet::create(const std::string& name, Tensor init) {
  if (find(name)) throw InternalError("duplicate parameter name: " + name);
  params_.push_back(std::make_unique<Parameter>(name, std::move(init)));
  return *params_.back();
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

std::vector<Parameter*> ParameterSet::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterSet::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

void sgd_step(ParameterSet& params, double lr, double momentum, double clip) {
  double sq = 0.0;
  for (Parameter* p : params.all()) {
    for (double g : p->grad.data) sq += g * g;
  }
  double scale = 1.0;
  if (clip > 0.0) {
    double norm = std::sqrt(sq);
    if (norm > clip) scale = clip / norm;
  }
  for (Parameter* p : params.all()) {
    for (std::size_t i = 0; i < p->value.data.size(); ++i) {
      double v = momentum * p->velocity.data[i] - lr * scale * p->grad.data[i];
      p->velocity.data[i] = v;
      p->value.data[i] += v;
    }
    p->zero_grad();
  }
}

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

Graph::Ref Graph::push(Tensor value, bool needs_grad, std::function<void()> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<Ref>(nodes_.size() - 1);
}

Tensor& Graph::grad_buf(Ref r) {
  Node& n = nodes_[static_cast<std::size_t>(r)];
  if (n.grad.data.empty() && n.value.numel() > 0) n.grad = Tensor(n.value.shape);
  return n.grad;
}

const Tensor& Graph::grad(Ref r) const { return nodes_[static_cast<std::size_t>(r)].grad; }

double Graph::scalar_value(Ref r) const {
  const Tensor& t = value(r);
  if (t.numel() != 1) throw InternalError("expected a scalar node, got shape " + t.shape_str());
  return t.data[0];
}

Graph::Ref Graph::constant(Tensor t) { return push(std::move(t), false, nullptr); }

Graph::Ref Graph::param(Parameter& p) {
  Tensor v = p.value;
  Parameter* pp = &p;
  Ref r = push(std::move(v), true, nullptr);
  nodes_[static_cast<std::size_t>(r)].back = [this, r, pp]() {
    const Tensor& g = grad_buf(r);
    for (std::size_t i = 0; i < g.data.size(); ++i) pp->grad.data[i] += g.data[i];
  };
  return r;
}

Graph::Ref Graph::add(Ref a, Ref b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) {
    throw InvalidInput("add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  }
  Tensor out = ta;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += tb.data[i];
  bool ng = node(a).needs_grad || node(b).needs_grad;
  Ref r = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, a, b]() {
      const Tensor& g = grad_buf(r);
      Tensor& ga = grad_buf(a);
      Tensor& gb = grad_buf(b);
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        ga.data[i] += g.data[i];
        gb.data[i] += g.data[i];
      }
    };
  }
  return r;
}

Graph::Ref Graph::add_n(const std::vector<Ref>& xs) {
  if (xs.empty()) throw InvalidInput("add_n: empty operand list");
  Tensor out = value(xs[0]);
  bool ng = node(xs[0]).needs_grad;
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const Tensor& t = value(xs[k]);
    if (!t.same_shape(out)) {
      throw InvalidInput("add_n: shape mismatch " + out.shape_str() + " vs " + t.shape_str());
    }
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += t.data[i];
    ng = ng || node(xs[k]).needs_grad;
  }
  std::vector<Ref> parents = xs;
  Ref r = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, parents]() {
      const Tensor& g = grad_buf(r);
      for (Ref p : parents) {
        Tensor& gp = grad_buf(p);
        for (std::size_t i = 0; i < g.data.size(); ++i) gp.data[i] += g.data[i];
      }
    };
  }
  return r;
}

Graph::Ref Graph::add_row_bias(Ref m, Ref bias) {
  const Tensor& tm = value(m);
  const Tensor& tb = value(bias);
  if (tm.rank() != 2 || tb.rank() != 1 || tm.cols() != tb.numel()) {
    throw InvalidInput("add_row_bias: shape mismatch " + tm.shape_str() + " vs " + tb.shape_str());
  }
  Tensor out = tm;
  for (std::size_t i = 0; i < tm.rows(); ++i) {
    for (std::size_t j = 0; j < tm.cols(); ++j) out.at(i, j) += tb.at(j);
  }
  bool ng = node(m).needs_grad || node(bias).needs_grad;
  Ref r = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, m, bias]() {
      const Tensor& g = grad_buf(r);
      Tensor& gm = grad_buf(m);
      Tensor& gb = grad_buf(bias);
      std::size_t rows = g.rows(), cols = g.cols();
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
          gm.at(i, j) += g.at(i, j);
          gb.at(j) += g.at(i, j);
        }
      }
    };
  }
  return r;
}

Graph::Ref Graph::add_col_bias(Ref m, Ref bias) {
  const Tensor& tm = value(m);
  const Tensor& tb = value(bias);
  if (tm.rank() != 2 || tb.rank() != 1 || tm.rows() != tb.numel()) {
    throw InvalidInput("add_col_bias: shape mismatch " + tm.shape_str() + " vs " + tb.shape_str());
  }
  Tensor out = tm;
  for (std::size_t i = 0; i < tm.rows(); ++i) {
    for (std::size_t j = 0; j < tm.cols(); ++j) out.at(i, j) += tb.at(i);
  }
  bool ng = node(m).needs_grad || node(bias).needs_grad;
  Ref r = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, m, bias]() {
      const Tensor& g = grad_buf(r);
      Tensor& gm = grad_buf(m);
      Tensor& gb = grad_buf(bias);
      std::size_t rows = g.rows(), cols = g.cols();
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
          gm.at(i, j) += g.at(i, j);
          gb.at(i) += g.at(i, j);
        }
      }
    };
  }
  return r;
}

Graph::Ref Graph::mul(Ref a, Ref b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) {
    throw InvalidInput("mul: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  }
  Tensor out = ta;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= tb.data[i];
  bool ng = node(a).needs_grad || node(b).needs_grad;
  Ref r = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, a, b]() {
      const Tensor& g = grad_buf(r);
      const Tensor& va = value(a);
      const Tensor& vb = value(b);
      Tensor& ga = grad_buf(a);
      Tensor& gb = grad_buf(b);
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        ga.data[i] += g.data[i] * vb.data[i];
        gb.data[i] += g.data[i] * va.data[i];
      }
    };
  }
  return r;
}

Graph::Ref Graph::scale(Ref a, double c) {
  Tensor out = value(a);
  for (double& v : out.data) v *= c;
  bool ng = node(a).needs_grad;
  Ref r = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, a, c]() {
      const Tensor& g = grad_buf(r);
      Tensor& ga = grad_buf(a);
      for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += c * g.data[i];
    };
  }
  return r;
}

Graph::Ref Graph::matmul(Ref a, Ref b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (tb.rank() != 2) throw InvalidInput("matmul: rhs must be a matrix, got " + tb.shape_str());
  bool vec = ta.rank() == 1;
  std::size_t m = vec ? 1 : ta.rows();
  std::size_t k = vec ? ta.numel() : ta.cols();
  if ((ta.rank() != 1 && ta.rank() != 2) || k != tb.rows()) {
    throw InvalidInput("matmul: shape mismatch " + ta.shape_str() + " x " + tb.shape_str());
  }
  std::size_t n = tb.cols();
  Tensor out = vec ? Tensor({n}) : Tensor({m, n});
  // i-k-j order keeps rhs accesses sequential.
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = ta.data.data() + i * k;
    double* orow = out.data.data() + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      double av = arow[kk];
      if (av == 0.0) continue;
      const double* brow = tb.data.data() + kk * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  bool ng = node(a).needs_grad || node(b).needs_grad;
  Ref r = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, a, b, m, k, n]() {
      const Tensor& g = grad_buf(r);
      const Tensor& va = value(a);
      const Tensor& vb = value(b);
      Tensor& ga = grad_buf(a);
      Tensor& gb = grad_buf(b);
      // dA = G * B^T
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g.data.data() + i * n;
        double* garow = ga.data.data() + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double* brow = vb.data.data() + kk * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          garow[kk] += acc;
        }
      }
      // dB = A^T * G
      for (std::size_t i = 0; i < m; ++i) {
        const double* arow = va.data.data() + i * k;
        const double* grow = g.data.data() + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
          double av = arow[kk];
          if (av == 0.0) continue;
          double* gbrow = gb.data.data() + kk * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
        }
      }
    };
  }
  return r;
}

Graph::Ref Graph::concat_cols(const std::vector<Ref>& ms) {
  if (ms.empty()) throw InvalidInput("concat_cols: empty operand list");
  std::size_t rows = value(ms[0]).rows();
  std::size_t cols = 0;
  bool ng = false;
  for (Ref m : ms) {
    const Tensor& t = value(m);
    if (t.rank() != 2 || t.rows() != rows) {
      throw InvalidInput("concat_cols: incompatible shape " + t.shape_str());
    }
    cols += t.cols();
    ng = ng || node(m).needs_grad;
  }
  Tensor out({rows, cols});
  std::size_t off = 0;
  for (Ref m : ms) {
    const Tensor& t = value(m);
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy(t.data.begin() + static_cast<long>(i * t.cols()),
                t.data.begin() + static_cast<long>((i + 1) * t.cols()),
                out.data.begin() + static_cast<long>(i * cols + off));
    }
    off += t.cols();
  }
  std::vector<Ref> parents = ms;
  Ref r = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, parents, rows, cols]() {
      const Tensor& g = grad_buf(r);
      std::size_t off = 0;
      for (Ref m : parents) {
        Tensor& gm = grad_buf(m);
        std::size_t c = gm.cols();
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < c; ++j) gm.at(i, j) += g.data[i * cols + off + j];
        }
        off += c;
      }
    };
  }
  return r;
}

Graph::Ref Graph::concat_vec(const std::vector<Ref>& vs) {
  if (vs.empty()) throw InvalidInput("concat_vec: empty operand list");
  std::size_t n = 0;
  bool ng = false;
  for (Ref v : vs) {
    const Tensor& t = value(v);
    if (t.rank() != 1) throw InvalidInput("concat_vec: operand is not a vector: " + t.shape_str());
    n += t.numel();
    ng = ng || node(v).needs_grad;
  }
  Tensor out({n});
  std::size_t off = 0;
  for (Ref v : vs) {
    const Tensor& t = value(v);
    std::copy(t.data.begin(), t.data.end(), out.data.begin() + static_cast<long>(off));
    off += t.numel();
  }
  std::vector<Ref> parents = vs;
  Ref r = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, parents]() {
      const Tensor& g = grad_buf(r);
      std::size_t off = 0;
      for (Ref v : parents) {
        Tensor& gv = grad_buf(v);
        for (std::size_t i = 0; i < gv.data.size(); ++i) gv.data[i] += g.data[off + i];
        off += gv.data.size();
      }
    };
  }
  return r;
}

Graph::Ref Graph::stack_rows(const std::vector<Ref>& vs) {
  if (vs.empty()) throw InvalidInput("stack_rows: empty operand list");
  std::size_t cols = value(vs[0]).numel();
  bool ng = false;
  for (Ref v : vs) {
    const Tensor& t = value(v);
    if (t.rank() != 1 || t.numel() != cols) {
      throw InvalidInput("stack_rows: incompatible shape " + t.shape_str());
    }
    ng = ng || node(v).needs_grad;
  }
  Tensor out({vs.size(), cols});
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const Tensor& t = value(vs[i]);
    std::copy(t.data.begin(), t.data.end(), out.data.begin() + static_cast<long>(i * cols));
  }
  std::vector<Ref> parents = vs;
  Ref r = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, parents, cols]() {
      const Tensor& g = grad_buf(r);
      for (std::size_t i = 0; i < parents.size(); ++i) {
        Tensor& gv = grad_buf(parents[i]);
        for (std::size_t j = 0; j < cols; ++j) gv.data[j] += g.data[i * cols + j];
      }
    };
  }
  return r;
}

Graph::Ref Graph::row(Ref m, std::size_t i) {
  const Tensor& tm = value(m);
  if (tm.rank() != 2 || i >= tm.rows()) {
    throw InvalidInput("row: bad index " + std::to_string(i) + " for " + tm.shape_str());
  }
  Tensor out({tm.cols()});
  std::copy(tm.data.begin() + static_cast<long>(i * tm.cols()),
            tm.data.begin() + static_cast<long>((i + 1) * tm.cols()), out.data.begin());
  bool ng = node(m).needs_grad;
  Ref r = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, m, i]() {
      const Tensor& g = grad_buf(r);
      Tensor& gm = grad_buf(m);
      for (std::size_t j = 0; j < g.data.size(); ++j) gm.at(i, j) += g.data[j];
    };
  }
  return r;
}

Graph::Ref Graph::at(Ref v, std::size_t i) {
  const Tensor& tv = value(v);
  if (tv.rank() != 1 || i >= tv.numel()) {
    throw InvalidInput("at: bad index " + std::to_string(i) + " for " + tv.shape_str());
  }
  bool ng = node(v).needs_grad;
  Ref r = push(Tensor::scalar(tv.at(i)), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, v, i]() {
      grad_buf(v).data[i] += grad_buf(r).data[0];
    };
  }
  return r;
}

Graph::Ref Graph::at(Ref m, std::size_t i, std::size_t j) {
  const Tensor& tm = value(m);
  if (tm.rank() != 2 || i >= tm.rows() || j >= tm.cols()) {
    throw InvalidInput("at: bad index for " + tm.shape_str());
  }
  bool ng = node(m).needs_grad;
  Ref r = push(Tensor::scalar(tm.at(i, j)), ng, nullptr);
  if (ng) {
    std::size_t flat = i * tm.cols() + j;
    nodes_[static_cast<std::size_t>(r)].back = [this, r, m, flat]() {
      grad_buf(m).data[flat] += grad_buf(r).data[0];
    };
  }
  return r;
}

Graph::Ref Graph::slice(Ref v, std::size_t begin, std::size_t len) {
  const Tensor& tv = value(v);
  if (tv.rank() != 1 || begin + len > tv.numel()) {
    throw InvalidInput("slice: out of range for " + tv.shape_str());
  }
  Tensor out({len});
  std::copy(tv.data.begin() + static_cast<long>(begin),
            tv.data.begin() + static_cast<long>(begin + len), out.data.begin());
  bool ng = node(v).needs_grad;
  Ref r = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, v, begin, len]() {
      const Tensor& g = grad_buf(r);
      Tensor& gv = grad_buf(v);
      for (std::size_t i = 0; i < len; ++i) gv.data[begin + i] += g.data[i];
    };
  }
  return r;
}

Graph::Ref Graph::tanh(Ref x) {
  Tensor out = value(x);
  for (double& v : out.data) v = std::tanh(v);
  bool ng = node(x).needs_grad;
  Ref r = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, x]() {
      const Tensor& g = grad_buf(r);
      const Tensor& y = value(r);
      Tensor& gx = grad_buf(x);
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        gx.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
      }
    };
  }
  return r;
}

Graph::Ref Graph::sigmoid(Ref x) {
  Tensor out = value(x);
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  bool ng = node(x).needs_grad;
  Ref r = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, x]() {
      const Tensor& g = grad_buf(r);
      const Tensor& y = value(r);
      Tensor& gx = grad_buf(x);
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        gx.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
      }
    };
  }
  return r;
}

Graph::Ref Graph::max_over_axis(Ref m, int axis) {
  const Tensor& tm = value(m);
  if (tm.rank() != 2 || (axis != 0 && axis != 1)) {
    throw InvalidInput("max_over_axis: need a matrix and axis 0 or 1, got " + tm.shape_str());
  }
  std::size_t out_len = axis == 0 ? tm.cols() : tm.rows();
  Tensor out({out_len});
  // First argmax wins; keeps the backward pass deterministic under ties.
  std::vector<std::size_t> arg(out_len, 0);
  if (axis == 0) {
    for (std::size_t j = 0; j < tm.cols(); ++j) {
      double best = tm.at(0, j);
      std::size_t bi = 0;
      for (std::size_t i = 1; i < tm.rows(); ++i) {
        if (tm.at(i, j) > best) {
          best = tm.at(i, j);
          bi = i;
        }
      }
      out.at(j) = best;
      arg[j] = bi;
    }
  } else {
    for (std::size_t i = 0; i < tm.rows(); ++i) {
      double best = tm.at(i, 0);
      std::size_t bj = 0;
      for (std::size_t j = 1; j < tm.cols(); ++j) {
        if (tm.at(i, j) > best) {
          best = tm.at(i, j);
          bj = j;
        }
      }
      out.at(i) = best;
      arg[i] = bj;
    }
  }
  bool ng = node(m).needs_grad;
  Ref r = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, m, axis, arg]() {
      const Tensor& g = grad_buf(r);
      Tensor& gm = grad_buf(m);
      for (std::size_t k = 0; k < g.data.size(); ++k) {
        if (axis == 0) {
          gm.at(arg[k], k) += g.data[k];
        } else {
          gm.at(k, arg[k]) += g.data[k];
        }
      }
    };
  }
  return r;
}

Graph::Ref Graph::embedding_lookup(Parameter& table, const std::vector<int>& ids) {
  const Tensor& tv = table.value;
  if (tv.rank() != 2) throw InvalidInput("embedding_lookup: table must be a matrix");
  std::size_t d = tv.cols();
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    int id = ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= tv.rows()) {
      throw InvalidInput("embedding_lookup: id out of range: " + std::to_string(id));
    }
    std::copy(tv.data.begin() + static_cast<long>(static_cast<std::size_t>(id) * d),
              tv.data.begin() + static_cast<long>((static_cast<std::size_t>(id) + 1) * d),
              out.data.begin() + static_cast<long>(i * d));
  }
  Parameter* pt = &table;
  Ref r = push(std::move(out), true, nullptr);
  std::vector<int> idcopy = ids;
  nodes_[static_cast<std::size_t>(r)].back = [this, r, pt, idcopy, d]() {
    const Tensor& g = grad_buf(r);
    for (std::size_t i = 0; i < idcopy.size(); ++i) {
      double* dst = pt->grad.data.data() + static_cast<std::size_t>(idcopy[i]) * d;
      const double* src = g.data.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  };
  return r;
}

Graph::Ref Graph::gather_windows(Ref m, int window) {
  const Tensor& tm = value(m);
  if (tm.rank() != 2 || window < 1 || window % 2 == 0) {
    throw InvalidInput("gather_windows: need a matrix and an odd window");
  }
  std::size_t rows = tm.rows(), cols = tm.cols();
  int half = window / 2;
  Tensor out({rows, static_cast<std::size_t>(window) * cols});
  for (std::size_t t = 0; t < rows; ++t) {
    for (int w = -half; w <= half; ++w) {
      long src = static_cast<long>(t) + w;
      if (src < 0 || src >= static_cast<long>(rows)) continue;
      std::size_t off = static_cast<std::size_t>(w + half) * cols;
      for (std::size_t j = 0; j < cols; ++j) {
        out.at(t, off + j) = tm.at(static_cast<std::size_t>(src), j);
      }
    }
  }
  bool ng = node(m).needs_grad;
  Ref r = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, m, window, rows, cols]() {
      const Tensor& g = grad_buf(r);
      Tensor& gm = grad_buf(m);
      int half = window / 2;
      for (std::size_t t = 0; t < rows; ++t) {
        for (int w = -half; w <= half; ++w) {
          long src = static_cast<long>(t) + w;
          if (src < 0 || src >= static_cast<long>(rows)) continue;
          std::size_t off = static_cast<std::size_t>(w + half) * cols;
          for (std::size_t j = 0; j < cols; ++j) {
            gm.at(static_cast<std::size_t>(src), j) += g.at(t, off + j);
          }
        }
      }
    };
  }
  return r;
}

Graph::Ref Graph::sum(Ref x) {
  const Tensor& tx = value(x);
  double s = 0.0;
  for (double v : tx.data) s += v;
  bool ng = node(x).needs_grad;
  Ref r = push(Tensor::scalar(s), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, x]() {
      double g = grad_buf(r).data[0];
      Tensor& gx = grad_buf(x);
      for (double& v : gx.data) v += g;
    };
  }
  return r;
}

namespace {

double lse(const double* v, std::size_t n, std::size_t stride) {
  double m = v[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, v[i * stride]);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i * stride] - m);
  return m + std::log(s);
}

}  // namespace

Graph::Ref Graph::logsumexp(Ref v) {
  const Tensor& tv = value(v);
  if (tv.rank() != 1 || tv.numel() == 0) {
    throw InvalidInput("logsumexp: need a non-empty vector, got " + tv.shape_str());
  }
  double out = lse(tv.data.data(), tv.numel(), 1);
  bool ng = node(v).needs_grad;
  Ref r = push(Tensor::scalar(out), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, v]() {
      double g = grad_buf(r).data[0];
      double y = value(r).data[0];
      const Tensor& tv = value(v);
      Tensor& gv = grad_buf(v);
      for (std::size_t i = 0; i < tv.data.size(); ++i) {
        gv.data[i] += g * std::exp(tv.data[i] - y);
      }
    };
  }
  return r;
}

Graph::Ref Graph::logsumexp_axis(Ref m, int axis) {
  const Tensor& tm = value(m);
  if (tm.rank() != 2 || (axis != 0 && axis != 1)) {
    throw InvalidInput("logsumexp_axis: need a matrix and axis 0 or 1");
  }
  std::size_t rows = tm.rows(), cols = tm.cols();
  std::size_t out_len = axis == 0 ? cols : rows;
  Tensor out({out_len});
  for (std::size_t k = 0; k < out_len; ++k) {
    if (axis == 0) {
      out.at(k) = lse(tm.data.data() + k, rows, cols);
    } else {
      out.at(k) = lse(tm.data.data() + k * cols, cols, 1);
    }
  }
  bool ng = node(m).needs_grad;
  Ref r = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, m, axis, rows, cols]() {
      const Tensor& g = grad_buf(r);
      const Tensor& y = value(r);
      const Tensor& tm = value(m);
      Tensor& gm = grad_buf(m);
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
          std::size_t k = axis == 0 ? j : i;
          gm.at(i, j) += g.at(k) * std::exp(tm.at(i, j) - y.at(k));
        }
      }
    };
  }
  return r;
}

Graph::Ref Graph::softmax_cross_entropy(Ref logits, std::size_t gold) {
  const Tensor& tl = value(logits);
  if (tl.rank() != 1 || gold >= tl.numel()) {
    throw InvalidInput("softmax_cross_entropy: need a vector and a valid gold index");
  }
  double z = lse(tl.data.data(), tl.numel(), 1);
  bool ng = node(logits).needs_grad;
  Ref r = push(Tensor::scalar(z - tl.at(gold)), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, logits, gold, z]() {
      double g = grad_buf(r).data[0];
      const Tensor& tl = value(logits);
      Tensor& gl = grad_buf(logits);
      for (std::size_t i = 0; i < tl.data.size(); ++i) {
        double p = std::exp(tl.data[i] - z);
        gl.data[i] += g * (p - (i == gold ? 1.0 : 0.0));
      }
    };
  }
  return r;
}

Graph::Ref Graph::binary_cross_entropy(Ref logits, Tensor targets) {
  const Tensor& tl = value(logits);
  if (!tl.same_shape(targets)) {
    throw InvalidInput("binary_cross_entropy: shape mismatch " + tl.shape_str() + " vs " + targets.shape_str());
  }
  for (double t : targets.data) {
    if (t < 0.0 || t > 1.0) {
      throw InvalidInput("binary_cross_entropy: target outside [0,1]");
    }
  }
  // Stable sigmoid cross-entropy: max(z,0) - z*t + log1p(exp(-|z|)).
  double loss = 0.0;
  for (std::size_t i = 0; i < tl.data.size(); ++i) {
    double z = tl.data[i];
    double t = targets.data[i];
    loss += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
  }
  bool ng = node(logits).needs_grad;
  Ref r = push(Tensor::scalar(loss), ng, nullptr);
  if (ng) {
    Tensor tg = std::move(targets);
    nodes_[static_cast<std::size_t>(r)].back = [this, r, logits, tg]() {
      double g = grad_buf(r).data[0];
      const Tensor& tl = value(logits);
      Tensor& gl = grad_buf(logits);
      for (std::size_t i = 0; i < tl.data.size(); ++i) {
        double s = 1.0 / (1.0 + std::exp(-tl.data[i]));
        gl.data[i] += g * (s - tg.data[i]);
      }
    };
  }
  return r;
}

Graph::Ref Graph::dropout(Ref x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw InvalidInput("dropout: rate must lie in [0,1)");
  if (rate == 0.0) return x;
  const Tensor& tx = value(x);
  double keep = 1.0 - rate;
  std::vector<double> mask(tx.numel());
  for (double& m : mask) m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  Tensor out = tx;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= mask[i];
  bool ng = node(x).needs_grad;
  Ref r = push(std::move(out), ng, nullptr);
  if (ng) {
    nodes_[static_cast<std::size_t>(r)].back = [this, r, x, mask]() {
      const Tensor& g = grad_buf(r);
      Tensor& gx = grad_buf(x);
      for (std::size_t i = 0; i < g.data.size(); ++i) gx.data[i] += g.data[i] * mask[i];
    };
  }
  return r;
}

Graph::Ref Graph::conv1d_same(Ref seq, Ref filters, Ref bias, int window) {
  const Tensor& ts = value(seq);
  if (ts.rank() != 2) throw InvalidInput("conv1d_same: input must be [T,d]");
  if (value(filters).rank() != 2 ||
      value(filters).rows() != static_cast<std::size_t>(window) * ts.cols()) {
    throw InvalidInput("conv1d_same: filter shape mismatch " + value(filters).shape_str());
  }
  Ref win = gather_windows(seq, window);
  Ref conv = matmul(win, filters);
  return add_row_bias(conv, bias);
}

std::pair<Graph::Ref, Graph::Ref> Graph::lstm_step(Ref w, Ref b, Ref x, Ref h, Ref c) {
  std::size_t hd = value(h).numel();
  if (value(w).rank() != 2 || value(w).cols() != 4 * hd ||
      value(w).rows() != value(x).numel() + hd) {
    throw InvalidInput("lstm_step: weight shape mismatch " + value(w).shape_str());
  }
  Ref xh = concat_vec({x, h});
  Ref z = add(matmul(xh, w), b);
  Ref gi = sigmoid(slice(z, 0, hd));
  Ref gf = sigmoid(slice(z, hd, hd));
  Ref gg = tanh(slice(z, 2 * hd, hd));
  Ref go = sigmoid(slice(z, 3 * hd, hd));
  Ref c_new = add(mul(gf, c), mul(gi, gg));
  Ref h_new = mul(go, tanh(c_new));
  return {h_new, c_new};
}

void Graph::backward(Ref loss) {
  if (backward_done_) {
    throw InternalError("backward already ran on this graph; build a fresh graph");
  }
  const Tensor& lt = value(loss);
  if (lt.numel() != 1) {
    throw InvalidInput("backward: loss must be a scalar, got " + lt.shape_str());
  }
  backward_done_ = true;
  grad_buf(loss).data[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.back) continue;
    if (n.grad.data.empty()) continue;  // never contributed to the loss
    n.back();
  }
}

Tensor init_uniform(std::vector<std::size_t> shape, double limit, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-limit, limit);
  return t;
}

Tensor init_glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return init_uniform({fan_in, fan_out}, limit, rng);
}

}  // namespace softgaz::ad
