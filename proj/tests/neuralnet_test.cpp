#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "vitor/backbones.hpp"
#include "vitor/neuralnet.hpp"

using namespace vitor;
using namespace vitor::nn;

namespace {

Network random_net(Rng& rng, const std::vector<std::size_t>& dims, double dropout = 0.0) {
  Network net;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    DenseLayer d(dims[k], dims[k + 1]);
    d.glorot_init(rng);
    for (auto& b : d.biases) b = rng.uniform(-0.5, 0.5);
    const bool last = k + 2 == dims.size();
    net.add(std::move(d), last ? Activation::identity : Activation::relu, last ? 0.0 : dropout);
  }
  return net;
}

// Loss = 0.5 * sum(y^2) so the gradient w.r.t. the output is y.
double loss_of(const Network& net, const std::vector<double>& x) {
  const auto y = net.forward(x, Mode::eval);
  double s = 0.0;
  for (double v : y) s += 0.5 * v * v;
  return s;
}

}  // namespace

TEST(Forward, IdentityReluExample) {
  Network net;
  DenseLayer d(2, 2);
  d.weights = {1, 0, 0, 1};
  net.add(d, Activation::relu);
  EXPECT_EQ(net.forward(std::vector<double>{1.0, -2.0}, Mode::eval), (std::vector<double>{1.0, 0.0}));
}

TEST(Forward, DimensionMismatch) {
  Network net;
  net.add(DenseLayer(3, 2), Activation::relu);
  EXPECT_THROW(net.add(DenseLayer(4, 1), Activation::identity), Error);
  EXPECT_THROW(net.forward(std::vector<double>{1.0}, Mode::eval), Error);
  EXPECT_THROW(DenseLayer(0, 3), Error);
}

TEST(Forward, DropoutModes) {
  Rng init(1);
  auto net0 = random_net(init, {6, 8, 8, 1}, 0.0);
  auto net1 = net0;
  for (auto& l : net1.layers())
    if (l.activation == Activation::relu) l.dropout = 0.1;
  const std::vector<double> x = {0.1, -0.2, 0.3, 0.9, -1.0, 0.5};
  Rng a(1), b(999);
  EXPECT_EQ(net0.forward(x, Mode::train, &a), net0.forward(x, Mode::train, &b));
  EXPECT_EQ(net1.forward(x, Mode::eval), net0.forward(x, Mode::eval));
  EXPECT_THROW(net1.forward(x, Mode::train, nullptr), Error);
}

TEST(Forward, DropoutExpectation) {
  Network net;
  DenseLayer d(4, 4);
  d.weights = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
  net.add(d, Activation::relu, 0.3);
  const std::vector<double> x = {0.5, 1.0, 2.0, 3.0};
  Rng rng(17);
  std::vector<double> mean(4, 0.0);
  constexpr int kMasks = 10000;
  for (int i = 0; i < kMasks; ++i) {
    const auto y = net.forward(x, Mode::train, &rng);
    for (std::size_t k = 0; k < 4; ++k) mean[k] += y[k] / kMasks;
  }
  const auto eval = net.forward(x, Mode::eval);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(mean[k], eval[k], 0.02 * eval[k]);
}

TEST(Hinge, Examples) {
  EXPECT_EQ(pairwise_hinge_loss(3.0, 1.0, 1.0), 0.0);
  EXPECT_EQ(pairwise_hinge_loss(0.4, 0.4, 1.0), 1.0);
  EXPECT_EQ(pairwise_hinge_loss(1.25, 1.0, 1.0), 0.75);
  EXPECT_EQ(pairwise_hinge_grad(1.25, 1.0, 1.0), -1.0);
  EXPECT_EQ(pairwise_hinge_grad(2.0, 1.0, 1.0), 0.0);  // kink
  EXPECT_EQ(pairwise_hinge_grad(5.0, 1.0, 1.0), 0.0);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double p = rng.uniform(-3, 3), n = rng.uniform(-3, 3), m = rng.uniform(0.1, 2);
    const double l = pairwise_hinge_loss(p, n, m);
    EXPECT_GE(l, 0.0);
    EXPECT_EQ(l == 0.0, p - n >= m);
  }
}

TEST(Backward, LinearLayerGradientIsOuterProduct) {
  Network net;
  DenseLayer d(3, 2);
  d.weights = {1, 2, 3, 4, 5, 6};
  net.add(d, Activation::identity);
  const std::vector<double> x = {0.5, -1.0, 2.0};
  Tape tape;
  net.forward(x, Mode::eval, nullptr, &tape);
  auto g = net.zero_gradients();
  const std::vector<double> up = {2.0, -3.0};
  std::vector<double> gx;
  net.backward(tape, up, g, &gx);
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(g[0].weights[o * 3 + i], up[o] * x[i]);
  EXPECT_EQ(g[0].biases, up);
  EXPECT_EQ(gx, (std::vector<double>{2 * 1 - 3 * 4, 2 * 2 - 3 * 5, 2 * 3 - 3 * 6}));
}

TEST(Backward, ReluBlocksNegativePreActivation) {
  Network net;
  DenseLayer d(1, 1);
  d.weights = {1.0};
  net.add(d, Activation::relu);
  Tape tape;
  net.forward(std::vector<double>{-2.0}, Mode::eval, nullptr, &tape);
  auto g = net.zero_gradients();
  net.backward(tape, std::vector<double>{1.0}, g);
  EXPECT_EQ(g[0].weights[0], 0.0);
  EXPECT_EQ(g[0].biases[0], 0.0);
}

TEST(Backward, DropoutScalingIsPropagated) {
  Network net;
  DenseLayer d(1, 1);
  d.weights = {2.0};
  net.add(d, Activation::relu, 0.5);
  Rng rng(0);
  for (int i = 0; i < 20; ++i) {
    Tape tape;
    const double y = net.forward(std::vector<double>{3.0}, Mode::train, &rng, &tape)[0];
    auto g = net.zero_gradients();
    net.backward(tape, std::vector<double>{1.0}, g);
    // y = scale * 2 * 3, dy/dw = scale * 3
    EXPECT_EQ(g[0].weights[0], y / 2.0);
  }
}

TEST(Backward, MatchesCentralDifferences) {
  Rng rng(12345);
  const double h = 1e-4;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t layers = 1 + rng.index(3);
    std::vector<std::size_t> dims;
    for (std::size_t k = 0; k <= layers; ++k) dims.push_back(1 + rng.index(16));
    auto net = random_net(rng, dims);
    std::vector<double> x(dims[0]);
    for (auto& v : x) v = rng.uniform(-1, 1);
    Tape tape;
    const auto y = net.forward(x, Mode::eval, nullptr, &tape);
    auto g = net.zero_gradients();
    net.backward(tape, y, g);
    double worst = 0.0;
    for (std::size_t k = 0; k < net.layers().size(); ++k) {
      for (auto [param, grad] : {std::pair{&net.layers()[k].dense.weights, &g[k].weights},
                                 std::pair{&net.layers()[k].dense.biases, &g[k].biases}}) {
        for (std::size_t i = 0; i < param->size(); ++i) {
          const double saved = (*param)[i];
          (*param)[i] = saved + h;
          const double up = loss_of(net, x);
          (*param)[i] = saved - h;
          const double down = loss_of(net, x);
          (*param)[i] = saved;
          const double fd = (up - down) / (2 * h);
          const double an = (*grad)[i];
          worst = std::max(worst, std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-6}));
        }
      }
    }
    EXPECT_LT(worst, 1e-4) << "trial " << trial;
  }
}

TEST(L2, PenaltyAndGradient) {
  Rng rng(8);
  auto net = random_net(rng, {3, 4, 2});
  double expect = 0.0;
  for (const auto& l : net.layers())
    for (double w : l.dense.weights) expect += w * w;
  EXPECT_DOUBLE_EQ(l2_penalty(net), expect);
  auto g = net.zero_gradients();
  add_l2_gradient(net, g, 0.25);
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    for (std::size_t i = 0; i < g[k].weights.size(); ++i)
      EXPECT_DOUBLE_EQ(g[k].weights[i], 2 * 0.25 * net.layers()[k].dense.weights[i]);
    for (double b : g[k].biases) EXPECT_EQ(b, 0.0);
  }
}

namespace {

// Scalar Adam written out from its recurrence.
std::vector<double> oracle_adam(double w, const std::vector<double>& grads, double lr) {
  double m = 0, v = 0;
  std::vector<double> traj;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    const double g = grads[t - 1];
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, static_cast<double>(t)));
    const double vh = v / (1 - std::pow(0.999, static_cast<double>(t)));
    w -= lr * mh / (std::sqrt(vh) + 1e-8);
    traj.push_back(w);
  }
  return traj;
}

std::vector<double> library_adam(double w0, const std::vector<double>& grads, double lr) {
  std::vector<double> w = {w0};
  AdamState st;
  st.lr = lr;
  std::vector<double> traj;
  for (double g : grads) {
    std::vector<double> gv = {g};
    std::vector<std::span<double>> p = {std::span<double>(w)};
    std::vector<std::span<const double>> gs = {std::span<const double>(gv)};
    adam_step(p, gs, st);
    traj.push_back(w[0]);
  }
  return traj;
}

}  // namespace

TEST(Adam, FirstStepIsLearningRate) {
  for (double g : {3.0, -0.01, 1e4}) {
    const auto t = library_adam(1.0, {g}, 1e-3);
    EXPECT_NEAR(std::fabs(t[0] - 1.0), 1e-3, 1e-9);
    EXPECT_EQ(t[0] < 1.0, g > 0);
  }
}

TEST(Adam, ZeroGradientIsFixedPoint) {
  const auto t = library_adam(0.7, std::vector<double>(50, 0.0), 0.1);
  for (double w : t) EXPECT_EQ(w, 0.7);
}

TEST(Adam, MatchesRecurrence) {
  const std::vector<double> g = {2.0, -2.0};
  const auto lib = library_adam(0.0, g, 0.01);
  const auto ref = oracle_adam(0.0, g, 0.01);
  EXPECT_DOUBLE_EQ(lib[1], ref[1]);
  EXPECT_LT(std::fabs(lib[1]), 2 * 0.01);
  Rng rng(4);
  std::vector<double> gs;
  for (int i = 0; i < 100; ++i) gs.push_back(rng.uniform(-1, 1));
  const auto a = library_adam(0.3, gs, 1e-3), b = oracle_adam(0.3, gs, 1e-3);
  for (std::size_t i = 0; i < gs.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
}

TEST(Adam, ShapeMismatch) {
  std::vector<double> w(3), g(2);
  std::vector<std::span<double>> p = {std::span<double>(w)};
  std::vector<std::span<const double>> gs = {std::span<const double>(g)};
  AdamState st;
  EXPECT_THROW(adam_step(p, gs, st), Error);
}

TEST(CountParameters, DenseAndBackbones) {
  EXPECT_EQ(count_parameters(ParamRow{LayerKind::dense, 1, 25088, 4096, true}), 102764544u);
  EXPECT_EQ(count_parameters(backbones::vgg16_conv_table()), 14714688u);
  // Bias-free convolutions plus batch-norm scale/shift, everything before the classifier.
  EXPECT_EQ(count_parameters(backbones::resnet152_conv_table()), 58143808u);
  EXPECT_EQ(count_parameters(ParamRow{LayerKind::conv, 3, 3, 64, true}), (9u * 3u + 1u) * 64u);
}
