// Copyright 2026 The privrec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "privrec/rng.hpp"

namespace privrec::tensor {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major f64 tensor. Everything at this scale fits comfortably in
// 64-bit floats, which keeps gradient checks free of precision noise.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != count(shape)) throw ShapeError("tensor value count does not match shape");
  }

  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) {
      if (d == 0) throw ShapeError("zero extent in shape");
      n *= d;
    }
    return n;
  }

  static Tensor zeros(std::vector<std::size_t> shape) {
    std::size_t n = count(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
  }

  static Tensor full(std::vector<std::size_t> shape, double v) {
    std::size_t n = count(shape);
    return Tensor(std::move(shape), std::vector<double>(n, v));
  }

  // Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
  static Tensor init_uniform(std::vector<std::size_t> shape, std::size_t fan_in, rng::Engine& engine) {
    Tensor t = zeros(std::move(shape));
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t.values) v = (engine.uniform() * 2.0 - 1.0) * bound;
    return t;
  }

  std::size_t size() const { return values.size(); }
  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

inline void check_finite(const Tensor& t, const char* op) {
  for (double v : t.values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + " produced a non-finite value");
  }
}

using NodeId = int;

// Dynamically recorded computation graph, rebuilt per mini-batch. Nodes are
// created in topological order, so reverse creation order is a valid
// backward schedule.
class Graph {
 public:
  // Leaf holding trainable values; receives a gradient after backward().
  NodeId parameter(Tensor value) { return add_node(std::move(value), {}, true, nullptr); }

  // Leaf without gradient tracking (inputs, targets).
  NodeId constant(Tensor value) { return add_node(std::move(value), {}, false, nullptr); }

  const Tensor& value(NodeId id) const { return nodes_[id].value; }

  // Zero tensor when the loss does not reach this node.
  const Tensor& grad(NodeId id) {
    Node& n = nodes_[id];
    if (n.grad.values.empty()) n.grad = Tensor::zeros(n.value.shape);
    return n.grad;
  }

  NodeId matmul(NodeId a, NodeId b) {
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    if (A.shape.size() != 2 || B.shape.size() != 2 || A.shape[1] != B.shape[0]) {
      throw ShapeError("matmul shapes incompatible: " + shape_string(A.shape) + " x " + shape_string(B.shape));
    }
    std::size_t n = A.shape[0], k = A.shape[1], m = B.shape[1];
    Tensor out = Tensor::zeros({n, m});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t kk = 0; kk < k; ++kk) {
        double a_ik = A.values[i * k + kk];
        if (a_ik == 0.0) continue;
        const double* brow = &B.values[kk * m];
        double* orow = &out.values[i * m];
        for (std::size_t j = 0; j < m; ++j) orow[j] += a_ik * brow[j];
      }
    }
    return add_node(std::move(out), {a, b}, wants_grad(a) || wants_grad(b), [a, b, n, k, m](Graph& g, Node& node) {
      const Tensor& A = g.nodes_[a].value;
      const Tensor& B = g.nodes_[b].value;
      if (g.wants_grad(a)) {
        Tensor& dA = g.grad_ref(a);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < m; ++j) {
            double go = node.grad.values[i * m + j];
            if (go == 0.0) continue;
            for (std::size_t kk = 0; kk < k; ++kk) dA.values[i * k + kk] += go * B.values[kk * m + j];
          }
        }
      }
      if (g.wants_grad(b)) {
        Tensor& dB = g.grad_ref(b);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t kk = 0; kk < k; ++kk) {
            double a_ik = A.values[i * k + kk];
            if (a_ik == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j) dB.values[kk * m + j] += a_ik * node.grad.values[i * m + j];
          }
        }
      }
    });
  }

  // Elementwise addition; b may also be a suffix shape of a, broadcast over
  // the leading axis (bias addition).
  NodeId add(NodeId a, NodeId b) {
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    bool same = A.shape == B.shape;
    bool suffix = !same && A.shape.size() == B.shape.size() + 1 &&
                  std::equal(B.shape.begin(), B.shape.end(), A.shape.begin() + 1);
    if (!same && !suffix) {
      throw ShapeError("add shapes incompatible: " + shape_string(A.shape) + " + " + shape_string(B.shape));
    }
    Tensor out = A;
    std::size_t bn = B.size();
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += B.values[i % bn];
    return add_node(std::move(out), {a, b}, wants_grad(a) || wants_grad(b), [a, b, bn](Graph& g, Node& node) {
      if (g.wants_grad(a)) {
        Tensor& dA = g.grad_ref(a);
        for (std::size_t i = 0; i < node.grad.size(); ++i) dA.values[i] += node.grad.values[i];
      }
      if (g.wants_grad(b)) {
        Tensor& dB = g.grad_ref(b);
        for (std::size_t i = 0; i < node.grad.size(); ++i) dB.values[i % bn] += node.grad.values[i];
      }
    });
  }

  NodeId mul(NodeId a, NodeId b) {
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    if (A.shape != B.shape) {
      throw ShapeError("mul shapes incompatible: " + shape_string(A.shape) + " * " + shape_string(B.shape));
    }
    Tensor out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] *= B.values[i];
    return add_node(std::move(out), {a, b}, wants_grad(a) || wants_grad(b), [a, b](Graph& g, Node& node) {
      const Tensor& A = g.nodes_[a].value;
      const Tensor& B = g.nodes_[b].value;
      if (g.wants_grad(a)) {
        Tensor& dA = g.grad_ref(a);
        for (std::size_t i = 0; i < node.grad.size(); ++i) dA.values[i] += node.grad.values[i] * B.values[i];
      }
      if (g.wants_grad(b)) {
        Tensor& dB = g.grad_ref(b);
        for (std::size_t i = 0; i < node.grad.size(); ++i) dB.values[i] += node.grad.values[i] * A.values[i];
      }
    });
  }

  NodeId scale(NodeId a, double c) {
    Tensor out = nodes_[a].value;
    for (auto& v : out.values) v *= c;
    return add_node(std::move(out), {a}, wants_grad(a), [a, c](Graph& g, Node& node) {
      if (!g.wants_grad(a)) return;
      Tensor& dA = g.grad_ref(a);
      for (std::size_t i = 0; i < node.grad.size(); ++i) dA.values[i] += c * node.grad.values[i];
    });
  }

  NodeId relu(NodeId a) {
    Tensor out = nodes_[a].value;
    for (auto& v : out.values) v = v > 0.0 ? v : 0.0;
    return add_node(std::move(out), {a}, wants_grad(a), [a](Graph& g, Node& node) {
      if (!g.wants_grad(a)) return;
      const Tensor& A = g.nodes_[a].value;
      Tensor& dA = g.grad_ref(a);
      for (std::size_t i = 0; i < node.grad.size(); ++i) {
        if (A.values[i] > 0.0) dA.values[i] += node.grad.values[i];
      }
    });
  }

  NodeId tanh(NodeId a) {
    Tensor out = nodes_[a].value;
    for (auto& v : out.values) v = std::tanh(v);
    return add_node(std::move(out), {a}, wants_grad(a), [a](Graph& g, Node& node) {
      if (!g.wants_grad(a)) return;
      Tensor& dA = g.grad_ref(a);
      for (std::size_t i = 0; i < node.grad.size(); ++i) {
        double t = node.value.values[i];
        dA.values[i] += node.grad.values[i] * (1.0 - t * t);
      }
    });
  }

  // Row-wise softmax over the last axis, stabilized by max subtraction.
  NodeId softmax(NodeId a) {
    const Tensor& A = nodes_[a].value;
    std::size_t c = A.shape.back();
    std::size_t r = A.size() / c;
    Tensor out = A;
    for (std::size_t i = 0; i < r; ++i) {
      double* row = &out.values[i * c];
      double mx = *std::max_element(row, row + c);
      double sum = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
      }
      for (std::size_t j = 0; j < c; ++j) row[j] /= sum;
    }
    return add_node(std::move(out), {a}, wants_grad(a), [a, r, c](Graph& g, Node& node) {
      if (!g.wants_grad(a)) return;
      Tensor& dA = g.grad_ref(a);
      for (std::size_t i = 0; i < r; ++i) {
        const double* s = &node.value.values[i * c];
        const double* go = &node.grad.values[i * c];
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += go[j] * s[j];
        for (std::size_t j = 0; j < c; ++j) dA.values[i * c + j] += s[j] * (go[j] - dot);
      }
    });
  }

  NodeId reshape(NodeId a, std::vector<std::size_t> shape) {
    if (Tensor::count(shape) != nodes_[a].value.size()) {
      throw ShapeError("reshape from " + shape_string(nodes_[a].value.shape) + " to " + shape_string(shape) +
                       " changes element count");
    }
    Tensor out(std::move(shape), nodes_[a].value.values);
    return add_node(std::move(out), {a}, wants_grad(a), [a](Graph& g, Node& node) {
      if (!g.wants_grad(a)) return;
      Tensor& dA = g.grad_ref(a);
      for (std::size_t i = 0; i < node.grad.size(); ++i) dA.values[i] += node.grad.values[i];
    });
  }

  NodeId sum(NodeId a) {
    double s = std::accumulate(nodes_[a].value.values.begin(), nodes_[a].value.values.end(), 0.0);
    return add_node(Tensor({1}, {s}), {a}, wants_grad(a), [a](Graph& g, Node& node) {
      if (!g.wants_grad(a)) return;
      Tensor& dA = g.grad_ref(a);
      for (auto& v : dA.values) v += node.grad.values[0];
    });
  }

  NodeId mean(NodeId a) {
    std::size_t n = nodes_[a].value.size();
    double s = std::accumulate(nodes_[a].value.values.begin(), nodes_[a].value.values.end(), 0.0);
    return add_node(Tensor({1}, {s / static_cast<double>(n)}), {a}, wants_grad(a), [a, n](Graph& g, Node& node) {
      if (!g.wants_grad(a)) return;
      Tensor& dA = g.grad_ref(a);
      double go = node.grad.values[0] / static_cast<double>(n);
      for (auto& v : dA.values) v += go;
    });
  }

  // (r, c) -> (r): sums each row.
  NodeId row_sum(NodeId a) {
    const Tensor& A = nodes_[a].value;
    if (A.shape.size() != 2) throw ShapeError("row_sum expects a matrix, got " + shape_string(A.shape));
    std::size_t r = A.shape[0], c = A.shape[1];
    Tensor out = Tensor::zeros({r});
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) out.values[i] += A.values[i * c + j];
    }
    return add_node(std::move(out), {a}, wants_grad(a), [a, r, c](Graph& g, Node& node) {
      if (!g.wants_grad(a)) return;
      Tensor& dA = g.grad_ref(a);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) dA.values[i * c + j] += node.grad.values[i];
      }
    });
  }

  // Mean of (pred - target)^2; the training loss.
  NodeId squared_error(NodeId pred, NodeId target) {
    const Tensor& P = nodes_[pred].value;
    const Tensor& T = nodes_[target].value;
    if (P.shape != T.shape) {
      throw ShapeError("squared_error shapes differ: " + shape_string(P.shape) + " vs " + shape_string(T.shape));
    }
    std::size_t n = P.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = P.values[i] - T.values[i];
      s += d * d;
    }
    return add_node(Tensor({1}, {s / static_cast<double>(n)}), {pred, target},
                    wants_grad(pred) || wants_grad(target), [pred, target, n](Graph& g, Node& node) {
                      const Tensor& P = g.nodes_[pred].value;
                      const Tensor& T = g.nodes_[target].value;
                      double go = node.grad.values[0] * 2.0 / static_cast<double>(n);
                      if (g.wants_grad(pred)) {
                        Tensor& dP = g.grad_ref(pred);
                        for (std::size_t i = 0; i < n; ++i) dP.values[i] += go * (P.values[i] - T.values[i]);
                      }
                      if (g.wants_grad(target)) {
                        Tensor& dT = g.grad_ref(target);
                        for (std::size_t i = 0; i < n; ++i) dT.values[i] -= go * (P.values[i] - T.values[i]);
                      }
                    });
  }

  // Mean softmax cross-entropy against integer class labels, fused with the
  // log-sum-exp for stability.
  NodeId cross_entropy_with_logits(NodeId logits, const std::vector<int>& labels) {
    const Tensor& L = nodes_[logits].value;
    if (L.shape.size() != 2 || L.shape[0] != labels.size()) {
      throw ShapeError("cross_entropy_with_logits: logits " + shape_string(L.shape) + " vs " +
                       std::to_string(labels.size()) + " labels");
    }
    std::size_t r = L.shape[0], c = L.shape[1];
    for (int y : labels) {
      if (y < 0 || static_cast<std::size_t>(y) >= c) throw std::out_of_range("label out of range");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
      const double* row = &L.values[i * c];
      double mx = *std::max_element(row, row + c);
      double sum = 0.0;
      for (std::size_t j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
      total += mx + std::log(sum) - row[labels[i]];
    }
    return add_node(Tensor({1}, {total / static_cast<double>(r)}), {logits}, wants_grad(logits),
                    [logits, labels, r, c](Graph& g, Node& node) {
                      if (!g.wants_grad(logits)) return;
                      const Tensor& L = g.nodes_[logits].value;
                      Tensor& dL = g.grad_ref(logits);
                      double go = node.grad.values[0] / static_cast<double>(r);
                      for (std::size_t i = 0; i < r; ++i) {
                        const double* row = &L.values[i * c];
                        double mx = *std::max_element(row, row + c);
                        double sum = 0.0;
                        for (std::size_t j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
                        for (std::size_t j = 0; j < c; ++j) {
                          double p = std::exp(row[j] - mx) / sum;
                          dL.values[i * c + j] += go * (p - (static_cast<int>(j) == labels[i] ? 1.0 : 0.0));
                        }
                      }
                    });
  }

  // Passes values forward unchanged and blocks all gradient flow.
  NodeId stop_gradient(NodeId a) {
    Tensor out = nodes_[a].value;
    return add_node(std::move(out), {a}, false, nullptr);
  }

  // Embedding lookup: rows of `table` selected by index, duplicates allowed.
  NodeId gather_rows(NodeId table, const std::vector<int>& indices) {
    const Tensor& T = nodes_[table].value;
    if (T.shape.size() != 2) throw ShapeError("gather_rows expects a matrix, got " + shape_string(T.shape));
    std::size_t c = T.shape[1];
    for (int i : indices) {
      if (i < 0 || static_cast<std::size_t>(i) >= T.shape[0]) throw std::out_of_range("gather_rows index out of range");
    }
    Tensor out = Tensor::zeros({indices.size(), c});
    for (std::size_t i = 0; i < indices.size(); ++i) {
      std::copy_n(&T.values[static_cast<std::size_t>(indices[i]) * c], c, &out.values[i * c]);
    }
    return add_node(std::move(out), {table}, wants_grad(table), [table, indices, c](Graph& g, Node& node) {
      if (!g.wants_grad(table)) return;
      Tensor& dT = g.grad_ref(table);
      for (std::size_t i = 0; i < indices.size(); ++i) {
        for (std::size_t j = 0; j < c; ++j) {
          dT.values[static_cast<std::size_t>(indices[i]) * c + j] += node.grad.values[i * c + j];
        }
      }
    });
  }

  // Column range [begin, end) of a matrix.
  NodeId slice_cols(NodeId a, std::size_t begin, std::size_t end) {
    const Tensor& A = nodes_[a].value;
    if (A.shape.size() != 2 || begin >= end || end > A.shape[1]) {
      throw ShapeError("slice_cols [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " +
                       shape_string(A.shape));
    }
    std::size_t r = A.shape[0], c = A.shape[1], w = end - begin;
    Tensor out = Tensor::zeros({r, w});
    for (std::size_t i = 0; i < r; ++i) {
      std::copy_n(&A.values[i * c + begin], w, &out.values[i * w]);
    }
    return add_node(std::move(out), {a}, wants_grad(a), [a, begin, r, c, w](Graph& g, Node& node) {
      if (!g.wants_grad(a)) return;
      Tensor& dA = g.grad_ref(a);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < w; ++j) dA.values[i * c + begin + j] += node.grad.values[i * w + j];
      }
    });
  }

  // Per-row matrix-vector product: params row b is an (m x n) matrix flattened
  // row-major, vec row b has length n; output row b = matrix_b * vec_b.
  NodeId batched_matvec(NodeId params, NodeId vec, std::size_t m, std::size_t n) {
    const Tensor& P = nodes_[params].value;
    const Tensor& V = nodes_[vec].value;
    if (P.shape.size() != 2 || V.shape.size() != 2 || P.shape[0] != V.shape[0] || P.shape[1] != m * n ||
        V.shape[1] != n) {
      throw ShapeError("batched_matvec: params " + shape_string(P.shape) + ", vec " + shape_string(V.shape) +
                       ", m=" + std::to_string(m) + ", n=" + std::to_string(n));
    }
    std::size_t b = P.shape[0];
    Tensor out = Tensor::zeros({b, m});
    for (std::size_t i = 0; i < b; ++i) {
      const double* mat = &P.values[i * m * n];
      const double* v = &V.values[i * n];
      double* o = &out.values[i * m];
      for (std::size_t row = 0; row < m; ++row) {
        double s = 0.0;
        for (std::size_t col = 0; col < n; ++col) s += mat[row * n + col] * v[col];
        o[row] = s;
      }
    }
    return add_node(std::move(out), {params, vec}, wants_grad(params) || wants_grad(vec),
                    [params, vec, b, m, n](Graph& g, Node& node) {
                      const Tensor& P = g.nodes_[params].value;
                      const Tensor& V = g.nodes_[vec].value;
                      if (g.wants_grad(params)) {
                        Tensor& dP = g.grad_ref(params);
                        for (std::size_t i = 0; i < b; ++i) {
                          for (std::size_t row = 0; row < m; ++row) {
                            double go = node.grad.values[i * m + row];
                            if (go == 0.0) continue;
                            for (std::size_t col = 0; col < n; ++col) {
                              dP.values[i * m * n + row * n + col] += go * V.values[i * n + col];
                            }
                          }
                        }
                      }
                      if (g.wants_grad(vec)) {
                        Tensor& dV = g.grad_ref(vec);
                        for (std::size_t i = 0; i < b; ++i) {
                          for (std::size_t row = 0; row < m; ++row) {
                            double go = node.grad.values[i * m + row];
                            if (go == 0.0) continue;
                            for (std::size_t col = 0; col < n; ++col) {
                              dV.values[i * n + col] += go * P.values[i * m * n + row * n + col];
                            }
                          }
                        }
                      }
                    });
  }

  // Reverse accumulation from a scalar loss. Creation order is topological,
  // so one reverse sweep visits every node after all of its consumers.
  void backward(NodeId loss) {
    if (nodes_[loss].value.size() != 1) {
      throw ShapeError("backward requires a scalar loss, got " + shape_string(nodes_[loss].value.shape));
    }
    grad_ref(loss).values[0] = 1.0;
    for (NodeId id = loss; id >= 0; --id) {
      Node& node = nodes_[id];
      if (!node.backward_fn || node.grad.values.empty()) continue;
      node.backward_fn(*this, node);
    }
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until touched
    bool requires_grad = false;
    std::function<void(Graph&, Node&)> backward_fn;
  };

  bool wants_grad(NodeId id) const { return nodes_[id].requires_grad; }

  Tensor& grad_ref(NodeId id) {
    Node& n = nodes_[id];
    if (n.grad.values.empty()) n.grad = Tensor::zeros(n.value.shape);
    return n.grad;
  }

  NodeId add_node(Tensor value, std::vector<NodeId> inputs, bool requires_grad,
                  std::function<void(Graph&, Node&)> backward_fn) {
    (void)inputs;
    check_finite(value, "op");
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    node.backward_fn = std::move(backward_fn);
    nodes_.push_back(std::move(node));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Adam optimizer over named parameter groups.

struct AdamState {
  std::vector<Tensor> m;  // first moments, one per parameter group
  std::vector<Tensor> v;  // second moments
  long step = 0;
};

inline void adam_step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads,
                      AdamState& state, double lr, double beta1 = 0.9, double beta2 = 0.999,
                      double eps_hat = 1e-8) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.push_back(Tensor::zeros(p->shape));
      state.v.push_back(Tensor::zeros(p->shape));
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: state size mismatch");
  state.step++;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = *params[p];
    const Tensor& g = *grads[p];
    if (w.shape != g.shape) {
      throw ShapeError("adam_step: shape mismatch " + shape_string(w.shape) + " vs " + shape_string(g.shape));
    }
    Tensor& m = state.m[p];
    Tensor& v = state.v[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m.values[i] = beta1 * m.values[i] + (1.0 - beta1) * g.values[i];
      v.values[i] = beta2 * v.values[i] + (1.0 - beta2) * g.values[i] * g.values[i];
      double mhat = m.values[i] / bc1;
      double vhat = v.values[i] / bc2;
      w.values[i] -= lr * mhat / (std::sqrt(vhat) + eps_hat);
    }
    check_finite(w, "adam_step");
  }
}

}  // namespace privrec::tensor
