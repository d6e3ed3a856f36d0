#include <cmath>
#include <fstream>
#include <functional>

#include "helpers.hpp"
#include "morse/nn_model.hpp"
#include "morse/nn_ops.hpp"
#include "morse/synth.hpp"

using namespace morse;
using namespace morse::nn;

using check::conv_op;
using check::conv_oracle;
using check::maxpool_oracle;
using check::Op;
using check::pick;
using check::random_tensor;
using check::random_vector;

// ---------------------------------------------------------------- oracles

TEST(Conv, OneByOneIdentity) {
  Rng rng(1);
  const Tensor x = random_tensor({1, 2, 3, 4}, rng);
  Tensor y;
  std::vector<double> cols;
  const std::vector<double> w{1.0}, b{0.0};
  conv2d_forward(x, w, b, {1, 1, 1, 1, 1, 1}, y, cols);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.data()[i], x.data()[i]);
}

TEST(Conv, ThreeByFourMatchesOracle) {
  Rng rng(2);
  const Tensor x = random_tensor({1, 1, 3, 4}, rng);
  const ConvGeometry g{1, 2, 1, 1, 1, 1};
  const auto w = random_vector(2, rng), b = random_vector(1, rng);
  Tensor y;
  std::vector<double> cols;
  conv2d_forward(x, w, b, g, y, cols);
  const Tensor o = conv_oracle(x, w, b, g);
  ASSERT_EQ(y.shape(), o.shape());
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y.data()[i], o.data()[i], 1e-12);
}

TEST(Conv, RandomInstancesMatchOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 60; ++trial) EXPECT_LE(check::conv_oracle_case(rng), 1e-12) << "trial " << trial;
}

TEST(Conv, LargeBatchUsesSeveralChunks) {
  Rng rng(4);
  const ConvGeometry g{1, 12, 1, 1, 1, 12};
  const Tensor x = random_tensor({1, 80, 6, 250}, rng);
  const auto w = random_vector(g.weight_count(), rng), b = random_vector(12, rng);
  Tensor y;
  std::vector<double> cols;
  conv2d_forward(x, w, b, g, y, cols);
  const Tensor o = conv_oracle(x, w, b, g);
  for (std::size_t i = 0; i < y.size(); ++i) ASSERT_NEAR(y.data()[i], o.data()[i], 1e-12);
}

TEST(Conv, RejectsBadShapes) {
  Tensor x({2, 1, 3, 3}), y;
  std::vector<double> cols, w(2 * 1 * 4), b(1);
  EXPECT_MORSE_ERROR(conv2d_forward(x, w, b, {4, 1, 1, 1, 2, 1}, y, cols), "ShapeMismatch");
  EXPECT_MORSE_ERROR(conv2d_forward(x, w, b, {1, 1, 1, 1, 3, 1}, y, cols), "ShapeMismatch");
}

TEST(MaxPool, Examples) {
  Tensor x({1, 1, 1, 4});
  x.data()[0] = 1;
  x.data()[1] = 3;
  x.data()[2] = 2;
  x.data()[3] = 0;
  Tensor y;
  std::vector<std::size_t> arg;
  maxpool_forward(x, 1, 4, y, arg);
  ASSERT_EQ(y.size(), 1u);
  EXPECT_EQ(y.data()[0], 3.0);

  Tensor flat({2, 2, 2, 6}, 1.5), dy, dx;
  maxpool_forward(flat, 2, 3, y, arg);
  dy = Tensor(y.shape(), 1.0);
  maxpool_backward(dy, arg, flat.shape(), dx);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 6; ++j)
          EXPECT_EQ(dx.at(c, n, i, j), (i == 0 && j % 3 == 0) ? 1.0 : 0.0);
}

TEST(MaxPool, RandomInstancesMatchOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 60; ++trial) EXPECT_EQ(check::maxpool_oracle_case(rng), 0u) << "trial " << trial;
}

TEST(GlobalPool, AverageAndMaxMatchOracle) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Shape in{pick(rng, 1, 4), pick(rng, 1, 3), pick(rng, 1, 4), pick(rng, 1, 9)};
    const Tensor x = random_tensor(in, rng);
    Tensor avg, mx;
    std::vector<std::size_t> arg;
    global_pool_forward(x, GlobalPoolMode::Average, avg, arg);
    global_pool_forward(x, GlobalPoolMode::Max, mx, arg);
    for (std::size_t c = 0; c < in.c; ++c)
      for (std::size_t n = 0; n < in.n; ++n) {
        double s = 0.0, m = -INFINITY;
        for (std::size_t i = 0; i < in.h; ++i)
          for (std::size_t j = 0; j < in.w; ++j) {
            s += x.at(c, n, i, j);
            m = std::max(m, x.at(c, n, i, j));
          }
        EXPECT_NEAR(avg.at(c, n, 0, 0), s / static_cast<double>(in.h * in.w), 1e-12);
        EXPECT_EQ(mx.at(c, n, 0, 0), m);
      }
  }
}

TEST(LatentPool, AveragingKernelEqualsAveragePoolExactly) {
  Rng rng(7);
  for (std::size_t pw : {2u, 4u}) {
    const std::size_t ch = 3;
    const ConvGeometry g{1, pw, 1, pw, ch, ch};
    std::vector<double> w(g.weight_count(), 0.0), b(ch, 0.0);
    for (std::size_t o = 0; o < ch; ++o)
      for (std::size_t v = 0; v < pw; ++v) w[(o * ch + o) * pw + v] = 1.0 / static_cast<double>(pw);
    // Dyadic inputs keep every sum exact.
    Tensor x({ch, 2, 1, pw * 7});
    for (double& v : x.data()) v = std::ldexp(static_cast<double>(rng.below(1024)) - 512.0, -4);
    Tensor y;
    std::vector<double> cols;
    conv2d_forward(x, w, b, g, y, cols);
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t j = 0; j < 7; ++j) {
          double s = 0.0;
          for (std::size_t v = 0; v < pw; ++v) s += x.at(c, n, 0, j * pw + v);
          EXPECT_EQ(y.at(c, n, 0, j), s / static_cast<double>(pw));
        }
  }
}

TEST(Softmax, UniformForEqualLogits) {
  Tensor x({6, 1, 1, 1}, 0.0), y;
  softmax_forward(x, y);
  for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 1.0 / 6.0);
}

TEST(Dropout, EvalModeIsIdentity) {
  Rng rng(8);
  const Tensor x = random_tensor({3, 2, 1, 5}, rng);
  Tensor y;
  std::vector<double> mask{1.0};
  dropout_forward(x, 0.5, false, nullptr, y, mask);
  EXPECT_TRUE(mask.empty());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.data()[i], x.data()[i]);
}

TEST(Dropout, TrainingScalesSurvivors) {
  Rng rng(9);
  const Tensor x = random_tensor({4, 8, 1, 50}, rng);
  Tensor y;
  std::vector<double> mask;
  Rng drop(10);
  dropout_forward(x, 0.25, true, &drop, y, mask);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (y.data()[i] == 0.0) ++zeros;
    else EXPECT_DOUBLE_EQ(y.data()[i], x.data()[i] / 0.75);
  }
  const double rate = static_cast<double>(zeros) / static_cast<double>(x.size());
  EXPECT_NEAR(rate, 0.25, 0.03);
}

// ---------------------------------------------------------------- gradients

namespace {
// Each case draws a fresh random shape, parameter set and upstream gradient.
void expect_gradients(double (*one_case)(Rng&), std::uint64_t seed, int trials = 20) {
  Rng rng(seed);
  for (int trial = 0; trial < trials; ++trial) EXPECT_LT(one_case(rng), 1e-6) << "trial " << trial;
}
}  // namespace

TEST(Gradients, Conv) { expect_gradients(check::grad_conv_case, 11, 25); }

// Repeated calls land their scratch buffers at different heap offsets; the
// results must not change in the last bit.
TEST(Conv, BitwiseStableAcrossBufferPlacement) {
  Rng rng(15);
  for (int trial = 0; trial < 60; ++trial) {
    ConvGeometry g;
    g.c_in = pick(rng, 1, 3);
    g.c_out = pick(rng, 1, 3);
    g.kh = pick(rng, 1, 3);
    g.kw = pick(rng, 1, 4);
    g.sh = pick(rng, 1, 2);
    g.sw = pick(rng, 1, 3);
    const Tensor x = random_tensor({g.c_in, pick(rng, 1, 3), g.kh + pick(rng, 0, 3), g.kw + pick(rng, 0, 7)}, rng);
    const auto p = random_vector(g.weight_count() + g.c_out, rng);
    const Op op = conv_op(g);
    const Tensor y0 = op.forward(x, p);
    const Tensor dy = random_tensor(y0.shape(), rng);
    std::vector<double> dp0(p.size(), 0.0);
    const Tensor dx0 = op.backward(x, p, dy, dp0);
    std::vector<std::vector<char>> shift;
    for (int k = 1; k <= 6; ++k) {
      shift.emplace_back(static_cast<std::size_t>(8 * k));
      const Tensor y = op.forward(x, p);
      std::vector<double> dp(p.size(), 0.0);
      const Tensor dx = op.backward(x, p, dy, dp);
      ASSERT_TRUE(std::equal(y.data().begin(), y.data().end(), y0.data().begin())) << "trial " << trial;
      ASSERT_TRUE(std::equal(dx.data().begin(), dx.data().end(), dx0.data().begin())) << "trial " << trial;
      ASSERT_EQ(dp, dp0) << "trial " << trial;
    }
  }
}

TEST(Gradients, LatentPool) { expect_gradients(check::grad_latent_pool_case, 12); }
TEST(Gradients, MaxPool) { expect_gradients(check::grad_maxpool_case, 13); }
TEST(Gradients, GlobalAveragePool) {
  expect_gradients([](Rng& r) { return check::grad_global_pool_case(r, GlobalPoolMode::Average); }, 14);
}
TEST(Gradients, GlobalMaxPool) {
  expect_gradients([](Rng& r) { return check::grad_global_pool_case(r, GlobalPoolMode::Max); }, 24);
}
TEST(Gradients, Dense) { expect_gradients(check::grad_dense_case, 15); }
TEST(Gradients, Relu) { expect_gradients(check::grad_relu_case, 16); }
TEST(Gradients, Dropout) { expect_gradients(check::grad_dropout_case, 17); }
TEST(Gradients, Softmax) { expect_gradients(check::grad_softmax_case, 18); }
TEST(Gradients, SoftmaxCrossEntropy) { expect_gradients(check::grad_softmax_xent_case, 19); }
// Small chain using every layer type, with random init, input and labels.
TEST(Gradients, NetworkEndToEnd) { expect_gradients(check::grad_network_case, 21, 5); }

// ---------------------------------------------------------------- models

namespace {

// Independent per-layer count from the layer hyperparameters alone.
std::size_t count_oracle(const ModelSpec& spec) {
  std::size_t total = 0;
  for (const auto& l : spec.layers) {
    if (auto* c = std::get_if<Conv2DSpec>(&l)) total += c->kh * c->kw * c->c_in * c->c_out + c->c_out;
    if (auto* p = std::get_if<LatentPoolSpec>(&l))
      total += p->ph * p->pw * p->channels * p->channels + p->channels;
    if (auto* d = std::get_if<DenseSpec>(&l)) total += d->n_in * d->n_out + d->n_out;
  }
  return total;
}

}  // namespace

TEST(Model, ParameterCounts) {
  const auto mx = make_spec(Variant::CnnMax), lp = make_spec(Variant::CnnLp);
  EXPECT_EQ(Network(mx).param_count(), 54254u);
  EXPECT_EQ(Network(lp).param_count(), 56018u);
  EXPECT_EQ(count_oracle(mx), 54254u);
  EXPECT_EQ(count_oracle(lp), 56018u);
  EXPECT_EQ(layer_param_count(DenseSpec{32, 6}), 198u);
  EXPECT_EQ(layer_param_count(LatentPoolSpec{1, 4, 12}), 588u);
  EXPECT_EQ(layer_param_count(LatentPoolSpec{1, 2, 24}), 1176u);
  std::vector<std::size_t> conv_counts;
  for (const auto& l : mx.layers) {
    if (std::holds_alternative<Conv2DSpec>(l) || std::holds_alternative<DenseSpec>(l)) {
      conv_counts.push_back(layer_param_count(l));
    }
  }
  EXPECT_EQ(conv_counts, (std::vector<std::size_t>{144, 3192, 50720, 198}));
}

TEST(Model, ShapeChain) {
  const auto chain = shape_chain(make_spec(Variant::CnnLp));
  const std::vector<std::array<std::size_t, 3>> expected{
      {12, 6, 240}, {12, 6, 240}, {12, 6, 60}, {12, 6, 60}, {24, 6, 50}, {24, 6, 50}, {24, 6, 25},
      {24, 6, 25},  {32, 1, 15},  {32, 1, 15}, {32, 1, 1},  {32, 1, 1},  {6, 1, 1},   {6, 1, 1}};
  ASSERT_EQ(chain.size(), expected.size());
  for (std::size_t i = 0; i < chain.size(); ++i) {
    EXPECT_EQ(chain[i].c, expected[i][0]) << "layer " << i;
    EXPECT_EQ(chain[i].h, expected[i][1]) << "layer " << i;
    EXPECT_EQ(chain[i].w, expected[i][2]) << "layer " << i;
  }
  const auto mx = shape_chain(make_spec(Variant::CnnMax));
  for (std::size_t i = 0; i < chain.size(); ++i) EXPECT_EQ(mx[i], chain[i]) << "layer " << i;
}

TEST(Model, ShapeCheckRejectsMutations) {
  auto spec = make_spec(Variant::CnnMax);
  spec.layers[4] = Conv2DSpec{1, 11, 13, 24};
  EXPECT_MORSE_ERROR(shape_chain(spec), "ShapeMismatch");
  spec = make_spec(Variant::CnnMax);
  spec.layers[12] = DenseSpec{31, 6};
  EXPECT_MORSE_ERROR(shape_chain(spec), "ShapeMismatch");
  spec = make_spec(Variant::CnnLp);
  spec.layers[8] = Conv2DSpec{7, 25, 24, 32};
  EXPECT_MORSE_ERROR(shape_chain(spec), "ShapeMismatch");
}

TEST(Model, DecideRules) {
  std::array<double, 6> p{0.02, 0.02, 0.02, 0.02, 0.9, 0.02};
  auto d = decide(p);
  EXPECT_EQ(d.label, GestureLabel::Fire);
  EXPECT_DOUBLE_EQ(d.confidence, 0.9);
  std::array<double, 6> q{0.09, 0.09, 0.09, 0.09, 0.55, 0.09};
  EXPECT_EQ(decide(q, 0.6).label, GestureLabel::Random);
  std::array<double, 6> u;
  u.fill(1.0 / 6.0);
  EXPECT_EQ(decide(u).label, GestureLabel::Random);
  std::array<double, 6> tie{0.0, 0.0, 0.5, 0.5, 0.0, 0.0};
  EXPECT_EQ(decide(tie).label, GestureLabel::RecommendedEvacuation);
}

TEST(Model, EvalForwardIsDeterministic) {
  const auto d = synth::gen_dataset({.n_subjects = 1, .per_class = 2});
  Model m(make_spec(Variant::CnnLp), compute_norm_stats(d), 5);
  for (const auto& s : d.samples) {
    const auto a = m.probabilities(s.window);
    const auto b = m.probabilities(s.window);
    EXPECT_EQ(a, b);
    double sum = 0.0;
    for (double v : a) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  std::vector<ImuWindow> ws;
  for (const auto& s : d.samples) ws.push_back(s.window);
  const auto batched = m.probabilities(ws, 5);
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const auto single = m.probabilities(ws[i]);
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(batched[i][k], single[k], 1e-12);
  }
}

TEST(Model, InitIsSeededHeUniform) {
  Network a(make_spec(Variant::CnnMax)), b(make_spec(Variant::CnnMax));
  a.init_he_uniform(3);
  b.init_he_uniform(3);
  EXPECT_TRUE(std::equal(a.params().values().begin(), a.params().values().end(),
                         b.params().values().begin()));
  const double limit = std::sqrt(6.0 / 11.0);  // conv1: fan_in 1*1*11
  for (double v : a.params().weights(0)) EXPECT_LE(std::abs(v), limit);
  for (double v : a.params().biases(0)) EXPECT_EQ(v, 0.0);
}

TEST(Model, DumpActivations) {
  ModelSpec spec;
  spec.layers = {Conv2DSpec{1, 1, 1, 1}, GlobalPoolSpec{}, DenseSpec{1, 6}, SoftmaxSpec{}};
  NormStats unit;
  unit.std.fill(1.0);
  Model m(spec, unit, 1);
  m.network().params().weights(0)[0] = 1.0;
  m.network().params().biases(0)[0] = 0.0;
  Rng rng(30);
  ImuWindow w;
  for (double& v : w.values()) v = rng.normal();
  for (std::size_t row = 0; row < kChannels; ++row) {
    const auto dump = dump_activations(m, w, 0, row);
    ASSERT_EQ(dump.series.size(), 1u);
    for (std::size_t t = 0; t < kWindowLength; ++t) EXPECT_EQ(dump.series[0][t], w.at(row, t));
  }

  const auto d = synth::gen_dataset({.n_subjects = 1, .per_class = 1});
  Model std_model(make_spec(Variant::CnnLp), compute_norm_stats(d), 2);
  const auto conv2 = dump_activations(std_model, d.samples[0].window, 4);
  EXPECT_EQ(conv2.series.size(), 24u);
  EXPECT_EQ(conv2.series[0].size(), 50u);
  morse::test::TempDir dir("act");
  save_activation_csv(dir / "a.csv", conv2);
  std::ifstream is(dir / "a.csv");
  std::string line;
  std::size_t rows = 0;
  std::getline(is, line);  // header
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 24u);
  EXPECT_MORSE_ERROR(dump_activations(std_model, d.samples[0].window, 99), "InvalidLayer");
}
