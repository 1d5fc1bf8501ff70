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

#include "privrec/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "gradcheck.hpp"
#include "privrec/rng.hpp"

namespace tensor = privrec::tensor;
namespace rng = privrec::rng;
using gradcheck::BuildFn;
using gradcheck::random_tensor;
using tensor::Graph;
using tensor::NodeId;
using tensor::Tensor;

namespace {

// Central-difference check of d(loss)/d(input) for every input element.
void check_gradients(std::vector<Tensor> inputs, const BuildFn& build, std::uint64_t weight_seed,
                     double tol = 1e-4) {
  double err = gradcheck::max_grad_error(std::move(inputs), build, weight_seed);
  ASSERT_LE(err, tol);
}

}  // namespace

TEST(Tensor, ConstructionAndAccessors) {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(t.at(1, 2), 6.0);
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), tensor::ShapeError);
  EXPECT_THROW(Tensor::zeros({0, 3}), tensor::ShapeError);
  rng::Engine e(1);
  Tensor u = Tensor::init_uniform({4, 4}, 16, e);
  for (double v : u.values) EXPECT_LE(std::abs(v), 0.25);
}

TEST(Graph, MatmulMatchesTripleLoopOracle) {
  rng::Engine e(2);
  for (int trial = 0; trial < 10; ++trial) {
    std::size_t m = 1 + e.index(5), k = 1 + e.index(5), n = 1 + e.index(5);
    Tensor A = random_tensor({m, k}, e), B = random_tensor({k, n}, e);
    Graph g;
    const Tensor& C = g.value(g.matmul(g.constant(A), g.constant(B)));
    ASSERT_EQ(C.shape, (std::vector<std::size_t>{m, n}));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t x = 0; x < k; ++x) s += A.values[i * k + x] * B.values[x * n + j];
        ASSERT_NEAR(C.values[i * n + j], s, 1e-12);
      }
    }
  }
}

TEST(Graph, ForwardValueExamples) {
  Graph g;
  NodeId x = g.constant(Tensor({1, 3}, {-1.0, 0.0, 2.0}));
  EXPECT_EQ(g.value(g.relu(x)).values, (std::vector<double>{0.0, 0.0, 2.0}));

  NodeId s = g.softmax(g.constant(Tensor({1, 2}, {0.0, 0.0})));
  EXPECT_DOUBLE_EQ(g.value(s).values[0], 0.5);
  EXPECT_DOUBLE_EQ(g.value(s).values[1], 0.5);

  NodeId s2 = g.softmax(g.constant(Tensor({1, 2}, {1000.0, 1000.0})));  // stability
  EXPECT_DOUBLE_EQ(g.value(s2).values[0], 0.5);

  NodeId t = g.tanh(g.constant(Tensor({2}, {0.0, 1.0})));
  EXPECT_DOUBLE_EQ(g.value(t).values[0], 0.0);
  EXPECT_NEAR(g.value(t).values[1], std::tanh(1.0), 1e-15);

  NodeId se = g.squared_error(g.constant(Tensor({2}, {1.0, 2.0})), g.constant(Tensor({2}, {2.0, 4.0})));
  EXPECT_DOUBLE_EQ(g.value(se).values[0], (1.0 + 4.0) / 2.0);

  NodeId bm = g.batched_matvec(g.constant(Tensor({1, 6}, {1, 2, 3, 4, 5, 6})),
                               g.constant(Tensor({1, 3}, {1.0, 0.5, -1.0})), 2, 3);
  EXPECT_DOUBLE_EQ(g.value(bm).values[0], 1.0 + 1.0 - 3.0);
  EXPECT_DOUBLE_EQ(g.value(bm).values[1], 4.0 + 2.5 - 6.0);

  NodeId gr = g.gather_rows(g.constant(Tensor({3, 2}, {1, 2, 3, 4, 5, 6})), {2, 0, 2});
  EXPECT_EQ(g.value(gr).values, (std::vector<double>{5, 6, 1, 2, 5, 6}));

  NodeId sc = g.slice_cols(g.constant(Tensor({2, 3}, {1, 2, 3, 4, 5, 6})), 1, 3);
  EXPECT_EQ(g.value(sc).values, (std::vector<double>{2, 3, 5, 6}));

  NodeId ce = g.cross_entropy_with_logits(g.constant(Tensor({1, 2}, {0.0, 0.0})), {1});
  EXPECT_NEAR(g.value(ce).values[0], std::log(2.0), 1e-12);
}

TEST(Graph, AddBroadcastsSuffix) {
  Graph g;
  NodeId a = g.constant(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  NodeId b = g.constant(Tensor({3}, {10, 20, 30}));
  EXPECT_EQ(g.value(g.add(a, b)).values, (std::vector<double>{11, 22, 33, 14, 25, 36}));
  NodeId c = g.constant(Tensor({2, 3}, {1, 1, 1, 1, 1, 1}));
  EXPECT_EQ(g.value(g.add(a, c)).values, (std::vector<double>{2, 3, 4, 5, 6, 7}));
}

TEST(Graph, ShapeErrorsAreDetected) {
  Graph g;
  NodeId a = g.constant(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  NodeId b = g.constant(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  EXPECT_THROW(g.matmul(a, b), tensor::ShapeError);
  EXPECT_THROW(g.add(a, g.constant(Tensor({2}, {1, 2}))), tensor::ShapeError);
  EXPECT_THROW(g.reshape(a, {4, 2}), tensor::ShapeError);
  EXPECT_THROW(g.slice_cols(a, 2, 2), tensor::ShapeError);
  EXPECT_THROW(g.batched_matvec(a, b, 2, 2), tensor::ShapeError);
  EXPECT_THROW(g.backward(a), std::invalid_argument);  // non-scalar loss
}

TEST(Graph, NonFiniteValuesRaiseNumericError) {
  Graph g;
  NodeId big = g.constant(Tensor({1}, {1e308}));
  EXPECT_THROW(g.scale(g.scale(big, 10.0), 10.0), tensor::NumericError);
}

TEST(Graph, GradientAccumulatesAcrossUses) {
  Graph g;
  NodeId x = g.parameter(Tensor({1}, {3.0}));
  g.backward(g.sum(g.add(x, x)));
  EXPECT_DOUBLE_EQ(g.grad(x).values[0], 2.0);
}

TEST(Graph, StopGradientBlocksFlow) {
  Graph g;
  NodeId x = g.parameter(Tensor({2}, {2.0, 3.0}));
  NodeId y = g.parameter(Tensor({2}, {5.0, 7.0}));
  NodeId z = g.sum(g.mul(x, g.stop_gradient(y)));
  g.backward(z);
  EXPECT_EQ(g.grad(y).values, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(g.grad(x).values, (std::vector<double>{5.0, 7.0}));
}

TEST(Graph, SumGradientIsOnes) {
  Graph g;
  NodeId x = g.parameter(Tensor({2, 2}, {1, 2, 3, 4}));
  g.backward(g.sum(x));
  EXPECT_EQ(g.grad(x).values, (std::vector<double>{1, 1, 1, 1}));
}

// Finite-difference checks, several random shapes and seeds per op.

TEST(GradCheck, Matmul) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    rng::Engine e(seed);
    std::size_t m = 2 + e.index(3), k = 2 + e.index(3), n = 2 + e.index(3);
    check_gradients({random_tensor({m, k}, e), random_tensor({k, n}, e)},
                    [](Graph& g, const std::vector<NodeId>& in) { return g.matmul(in[0], in[1]); }, seed);
  }
}

TEST(GradCheck, AddEqualAndBroadcast) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    rng::Engine e(10 + seed);
    std::size_t r = 2 + e.index(3), c = 2 + e.index(3);
    check_gradients({random_tensor({r, c}, e), random_tensor({r, c}, e)},
                    [](Graph& g, const std::vector<NodeId>& in) { return g.add(in[0], in[1]); }, seed);
    check_gradients({random_tensor({r, c}, e), random_tensor({c}, e)},
                    [](Graph& g, const std::vector<NodeId>& in) { return g.add(in[0], in[1]); }, seed);
  }
}

TEST(GradCheck, MulScaleReluTanh) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    rng::Engine e(20 + seed);
    std::size_t r = 2 + e.index(3), c = 2 + e.index(3);
    check_gradients({random_tensor({r, c}, e), random_tensor({r, c}, e)},
                    [](Graph& g, const std::vector<NodeId>& in) { return g.mul(in[0], in[1]); }, seed);
    check_gradients({random_tensor({r, c}, e)},
                    [](Graph& g, const std::vector<NodeId>& in) { return g.scale(in[0], -2.5); }, seed);
    // Keep inputs away from the relu kink so central differences are valid.
    check_gradients({random_tensor({r, c}, e, 1e-3)},
                    [](Graph& g, const std::vector<NodeId>& in) { return g.relu(in[0]); }, seed);
    check_gradients({random_tensor({r, c}, e)},
                    [](Graph& g, const std::vector<NodeId>& in) { return g.tanh(in[0]); }, seed);
  }
}

TEST(GradCheck, SoftmaxAndCrossEntropy) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    rng::Engine e(30 + seed);
    std::size_t r = 2 + e.index(3), c = 2 + e.index(4);
    check_gradients({random_tensor({r, c}, e)},
                    [](Graph& g, const std::vector<NodeId>& in) { return g.softmax(in[0]); }, seed);
    std::vector<int> labels;
    for (std::size_t i = 0; i < r; ++i) labels.push_back(static_cast<int>(e.index(c)));
    check_gradients({random_tensor({r, c}, e)},
                    [labels](Graph& g, const std::vector<NodeId>& in) {
                      return g.cross_entropy_with_logits(in[0], labels);
                    },
                    seed);
  }
}

TEST(GradCheck, ReshapeSumMeanRowSum) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    rng::Engine e(40 + seed);
    check_gradients({random_tensor({2, 6}, e)},
                    [](Graph& g, const std::vector<NodeId>& in) { return g.reshape(in[0], {3, 4}); }, seed);
    check_gradients({random_tensor({3, 3}, e)},
                    [](Graph& g, const std::vector<NodeId>& in) { return g.sum(in[0]); }, seed);
    check_gradients({random_tensor({3, 3}, e)},
                    [](Graph& g, const std::vector<NodeId>& in) { return g.mean(in[0]); }, seed);
    check_gradients({random_tensor({3, 4}, e)},
                    [](Graph& g, const std::vector<NodeId>& in) { return g.row_sum(in[0]); }, seed);
  }
}

TEST(GradCheck, SquaredError) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    rng::Engine e(50 + seed);
    check_gradients({random_tensor({5}, e), random_tensor({5}, e)},
                    [](Graph& g, const std::vector<NodeId>& in) { return g.squared_error(in[0], in[1]); },
                    seed);
  }
}

TEST(GradCheck, GatherSliceBatchedMatvec) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    rng::Engine e(60 + seed);
    std::vector<int> idx{1, 0, 3, 1};
    check_gradients({random_tensor({4, 3}, e)},
                    [idx](Graph& g, const std::vector<NodeId>& in) { return g.gather_rows(in[0], idx); },
                    seed);
    check_gradients({random_tensor({3, 5}, e)},
                    [](Graph& g, const std::vector<NodeId>& in) { return g.slice_cols(in[0], 1, 4); }, seed);
    check_gradients({random_tensor({2, 12}, e), random_tensor({2, 4}, e)},
                    [](Graph& g, const std::vector<NodeId>& in) { return g.batched_matvec(in[0], in[1], 3, 4); },
                    seed);
  }
}

TEST(GradCheck, CompositeMlp) {
  // A small network chaining most ops, checked end to end.
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    rng::Engine e(70 + seed);
    check_gradients(
        {random_tensor({4, 3}, e, 1e-2), random_tensor({3, 5}, e), random_tensor({5}, e),
         random_tensor({5, 2}, e)},
        [](Graph& g, const std::vector<NodeId>& in) {
          NodeId h = g.relu(g.add(g.matmul(in[0], in[1]), in[2]));
          return g.tanh(g.matmul(h, in[3]));
        },
        seed, 2e-4);
  }
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Tensor w({2}, {1.0, -2.0});
  Tensor grad = Tensor::zeros({2});
  tensor::AdamState state;
  tensor::adam_step({&w}, {&grad}, state, 0.1);
  EXPECT_EQ(w.values, (std::vector<double>{1.0, -2.0}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // With bias correction the first update is lr * g / (|g| + eps_term).
  Tensor w({1}, {0.0});
  Tensor grad({1}, {0.5});
  tensor::AdamState state;
  tensor::adam_step({&w}, {&grad}, state, 0.1);
  EXPECT_NEAR(w.values[0], -0.1, 1e-6);
}

TEST(Adam, ConvergesOnQuadratic) {
  // f(w) = (w0 - 3)^2 + 2 * (w1 + 1)^2.
  Tensor w({2}, {0.0, 0.0});
  tensor::AdamState state;
  for (int step = 0; step < 2000; ++step) {
    Tensor grad({2}, {2.0 * (w.values[0] - 3.0), 4.0 * (w.values[1] + 1.0)});
    tensor::adam_step({&w}, {&grad}, state, 0.05);
  }
  Tensor final_grad({2}, {2.0 * (w.values[0] - 3.0), 4.0 * (w.values[1] + 1.0)});
  EXPECT_LT(std::abs(final_grad.values[0]), 1e-3);
  EXPECT_LT(std::abs(final_grad.values[1]), 1e-3);
  EXPECT_NEAR(w.values[0], 3.0, 1e-3);
  EXPECT_NEAR(w.values[1], -1.0, 1e-3);
}

TEST(Adam, RejectsMismatchedShapes) {
  Tensor w({2}, {1.0, 2.0});
  Tensor grad({3}, {1.0, 2.0, 3.0});
  tensor::AdamState state;
  EXPECT_THROW(tensor::adam_step({&w}, {&grad}, state, 0.1), tensor::ShapeError);
}
