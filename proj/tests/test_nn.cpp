#include "spu/adam.hpp"
#include "spu/categorical.hpp"
#include "spu/checkpoint.hpp"
#include "spu/policy_net.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace spu::nn;
using spu::test::central_difference;
using spu::test::relative_error;

namespace {

Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

/// Independent forward pass written against the documented parameter layout.
Vector reference_forward(const std::vector<int>& sizes, const Vector& params, Vector x) {
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    Vector y(out);
    for (int i = 0; i < out; ++i) {
      double acc = params(offset + static_cast<Eigen::Index>(in) * out + i);
      for (int j = 0; j < in; ++j) acc += params(offset + static_cast<Eigen::Index>(j) * out + i) * x(j);
      y(i) = (l + 2 < sizes.size()) ? std::tanh(acc) : acc;
    }
    offset += static_cast<Eigen::Index>(in + 1) * out;
    x = y;
  }
  return x;
}

PolicyNet random_policy(std::mt19937_64& rng, HeadKind kind, int state_dim, int action_dim) {
  PolicyNet net(kind, state_dim, action_dim, {8, 6});
  // Larger weights than the default init so that gradients are not dominated by round-off.
  net.set_parameters(random_vector(rng, net.num_params(), 0.5));
  return net;
}

PolicyNet with_params(PolicyNet net, const Vector& params) {
  net.set_parameters(params);
  return net;
}

}  // namespace

TEST(Mlp, ParameterCount) {
  const Mlp mlp({3, 64, 64, 2});
  EXPECT_EQ(mlp.num_params(), 4 * 64 + 65 * 64 + 65 * 2);
  EXPECT_THROW(Mlp({3}), std::invalid_argument);
  EXPECT_THROW(Mlp({3, 0, 1}), std::invalid_argument);
}

TEST(Mlp, MatchesReferenceForward) {
  std::mt19937_64 rng(1);
  const std::vector<int> sizes{4, 7, 5, 3};
  Mlp mlp(sizes);
  mlp.set_params(random_vector(rng, mlp.num_params()));
  Matrix batch(4, 6);
  for (int m = 0; m < 6; ++m) batch.col(m) = random_vector(rng, 4, 2.0);
  const Matrix out = mlp.forward(batch);
  for (int m = 0; m < 6; ++m) {
    EXPECT_LT((out.col(m) - reference_forward(sizes, mlp.params(), batch.col(m))).cwiseAbs().maxCoeff(),
              1e-13);
  }
}

TEST(Mlp, TanhAccurateAcrossRange) {
  Mlp mlp({1, 1, 1});
  Vector p(4);
  p << 1.0, 0.0, 1.0, 0.0;  // identity weights into and out of one tanh unit
  mlp.set_params(p);
  for (double x = -30.0; x <= 30.0; x += 0.013) {
    const double got = mlp.forward(Matrix::Constant(1, 1, x))(0, 0);
    ASSERT_NEAR(got, std::tanh(x), 1e-15) << x;
  }
}

TEST(Mlp, RejectsWrongInputDimension) {
  const Mlp mlp({3, 4, 1});
  EXPECT_THROW(mlp.forward(Matrix::Zero(2, 1)), std::invalid_argument);
}

TEST(Mlp, SeededInitIsReproducible) {
  Mlp a({3, 64, 2});
  Mlp b({3, 64, 2});
  std::mt19937_64 r1(9), r2(9);
  a.init(r1, 1.0, 0.01);
  b.init(r2, 1.0, 0.01);
  EXPECT_EQ(a.params(), b.params());
}

TEST(PolicyNet, ZeroWeightsGiveUniformCategorical) {
  PolicyNet net(HeadKind::categorical, 3, 5);
  net.set_parameters(Vector::Zero(net.num_params()));
  const auto out = net.forward(Matrix::Random(3, 2));
  EXPECT_LT((out.probs().array() - 0.2).abs().maxCoeff(), 1e-15);
}

TEST(PolicyNet, ZeroWeightsGaussianHasZeroMeanUnitStd) {
  PolicyNet net(HeadKind::gaussian, 3, 2);
  std::mt19937_64 rng(0);
  net.init(rng);
  Vector p = net.parameters();
  p.head(net.trunk().num_params()).setZero();
  net.set_parameters(p);
  const auto out = net.forward(Matrix::Random(3, 1));
  EXPECT_EQ(out.head.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(out.log_std, Vector::Zero(2));
}

TEST(PolicyNet, CategoricalRowsOnSimplex) {
  std::mt19937_64 rng(2);
  const auto net = random_policy(rng, HeadKind::categorical, 4, 8);
  const Matrix probs = net.forward(Matrix::Random(4, 50) * 3.0).probs();
  EXPECT_LT((probs.colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-10);
  EXPECT_GE(probs.minCoeff(), 0.0);
}

TEST(PolicyNet, LogProbExamples) {
  PolicyNet cat(HeadKind::categorical, 2, 4);
  cat.set_parameters(Vector::Zero(cat.num_params()));
  EXPECT_NEAR(cat.log_prob(Vector::Ones(2), Action::discrete(3)), std::log(0.25), 1e-15);
  EXPECT_THROW(cat.log_prob(Vector::Ones(2), Action::discrete(4)), std::out_of_range);

  PolicyNet gauss(HeadKind::gaussian, 2, 1);
  gauss.set_parameters(Vector::Zero(gauss.num_params()));
  EXPECT_NEAR(gauss.log_prob(Vector::Ones(2), Action::continuous(Vector::Zero(1))), -0.91894, 1e-5);
  EXPECT_NEAR(gauss.log_prob(Vector::Ones(2), Action::continuous(Vector::Zero(1))),
              -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
}

TEST(PolicyNet, CategoricalProbabilitiesSumToOne) {
  std::mt19937_64 rng(3);
  for (int k = 2; k <= 8; ++k) {
    const auto net = random_policy(rng, HeadKind::categorical, 3, k);
    const Vector s = random_vector(rng, 3);
    double total = 0.0;
    for (int a = 0; a < k; ++a) total += std::exp(net.log_prob(s, Action::discrete(a)));
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(PolicyNet, SoftmaxInvariantToOutputBiasShift) {
  std::mt19937_64 rng(4);
  const auto net = random_policy(rng, HeadKind::categorical, 3, 4);
  Vector p = net.parameters();
  p.tail(4).array() += 2.5;  // output-layer bias of the trunk
  const auto shifted = with_params(net, p);
  const Matrix states = Matrix::Random(3, 5);
  EXPECT_LT((net.forward(states).probs() - shifted.forward(states).probs()).cwiseAbs().maxCoeff(),
            1e-14);
}

TEST(KlBetween, Examples) {
  std::mt19937_64 rng(5);
  const auto net = random_policy(rng, HeadKind::categorical, 3, 4);
  const Vector s = random_vector(rng, 3);
  EXPECT_EQ(kl_between(net, net, s), 0.0);

  const auto other = random_policy(rng, HeadKind::categorical, 3, 4);
  const Vector p = net.forward(s).probs().col(0);
  const Vector q = other.forward(s).probs().col(0);
  EXPECT_NEAR(kl_between(net, other, s), spu::kl_categorical(p, q), 1e-12);

  PolicyNet g1(HeadKind::gaussian, 1, 1);
  PolicyNet g0(HeadKind::gaussian, 1, 1);
  Vector params = Vector::Zero(g1.num_params());
  g0.set_parameters(params);
  params(params.size() - 2) = 1.0;  // output bias -> mean 1
  g1.set_parameters(params);
  EXPECT_NEAR(kl_between(g1, g0, Vector::Zero(1)), 0.5, 1e-15);

  EXPECT_THROW(kl_between(net, g0, s), std::invalid_argument);
}

TEST(KlBetween, NonnegativeOnRandomPairs) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto kind = trial % 2 ? HeadKind::gaussian : HeadKind::categorical;
    const auto a = random_policy(rng, kind, 3, 3);
    const auto b = random_policy(rng, kind, 3, 3);
    EXPECT_GE(kl_between(a, b, random_vector(rng, 3)), 0.0);
  }
}

TEST(Gradients, LogProbMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const auto kind = trial % 2 ? HeadKind::gaussian : HeadKind::categorical;
    const auto net = random_policy(rng, kind, 3, 3);
    const Vector s = random_vector(rng, 3);
    const Action a = kind == HeadKind::categorical
                         ? Action::discrete(static_cast<int>(rng() % 3))
                         : Action::continuous(random_vector(rng, 3));
    const Vector analytic = net.grad_log_prob(s, a);
    const Vector numeric = central_difference(
        [&](const Vector& p) { return with_params(net, p).log_prob(s, a); }, net.parameters());
    EXPECT_LT(relative_error(analytic, numeric), 1e-4) << "trial " << trial;
  }
}

TEST(Gradients, KlMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto kind = trial % 2 ? HeadKind::gaussian : HeadKind::categorical;
    const auto net = random_policy(rng, kind, 3, 3);
    const auto ref = random_policy(rng, kind, 3, 3);
    const Vector s = random_vector(rng, 3);
    const Vector analytic = grad_kl_between(net, ref, s);
    const Vector numeric = central_difference(
        [&](const Vector& p) { return kl_between(with_params(net, p), ref, s); }, net.parameters());
    EXPECT_LT(relative_error(analytic, numeric), 1e-4) << "trial " << trial;
  }
}

TEST(Gradients, KlGradientVanishesAtReference) {
  std::mt19937_64 rng(9);
  for (auto kind : {HeadKind::categorical, HeadKind::gaussian}) {
    const auto net = random_policy(rng, kind, 3, 3);
    EXPECT_LT(grad_kl_between(net, net, random_vector(rng, 3)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Gradients, BatchedBackwardSumsPerSampleGradients) {
  std::mt19937_64 rng(10);
  const auto net = random_policy(rng, HeadKind::categorical, 3, 4);
  Matrix states(3, 5);
  ActionBatch actions;
  for (int m = 0; m < 5; ++m) {
    states.col(m) = random_vector(rng, 3);
    actions.indices.push_back(m % 4);
  }
  const auto out = net.forward(states);
  const Vector batched = net.backward(out, d_log_prob(out, actions));
  Vector summed = Vector::Zero(net.num_params());
  for (int m = 0; m < 5; ++m) summed += net.grad_log_prob(states.col(m), Action::discrete(m % 4));
  EXPECT_LT(relative_error(batched, summed), 1e-12);
}

TEST(ValueNet, MseGradientMatchesReference) {
  std::mt19937_64 rng(11);
  ValueNet critic(3, {8, 6});
  critic.set_parameters(random_vector(rng, critic.num_params(), 0.5));
  const Vector s = random_vector(rng, 3);
  const double target = 0.7;
  Vector grad;
  const double loss = critic.mse_loss(s, Vector::Constant(1, target), &grad);
  const double v = critic.value(s);
  EXPECT_NEAR(loss, (v - target) * (v - target), 1e-15);
  // 2 (V - target) grad V, with grad V from finite differences of a reference forward.
  const Vector grad_v = central_difference(
      [&](const Vector& p) { return reference_forward({3, 8, 6, 1}, p, s)(0); }, critic.parameters());
  EXPECT_LT(relative_error(grad, 2.0 * (v - target) * grad_v), 1e-6);
}

TEST(ValueNet, MseGradientOnBatchMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  ValueNet critic(2, {5});
  std::mt19937_64 init_rng(0);
  critic.init(init_rng);
  const Matrix states = Matrix::Random(2, 7);
  const Vector targets = random_vector(rng, 7);
  Vector grad;
  critic.mse_loss(states, targets, &grad);
  const Vector numeric = central_difference(
      [&](const Vector& p) {
        ValueNet c = critic;
        c.set_parameters(p);
        return c.mse_loss(states, targets);
      },
      critic.parameters());
  EXPECT_LT(relative_error(grad, numeric), 1e-4);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Vector params = Vector::LinSpaced(5, -1.0, 1.0);
  const Vector before = params;
  AdamState state(5, 3e-4);
  adam_step(params, Vector::Zero(5), state);
  EXPECT_EQ(params, before);
}

TEST(Adam, FirstStepHasMagnitudeAlpha) {
  for (double scale : {1e-3, 1.0, 1e6}) {
    Vector params = Vector::Zero(3);
    AdamState state(3, 3e-4);
    Vector g(3);
    g << scale, -2.0 * scale, 0.5 * scale;
    adam_step(params, g, state);
    for (int i = 0; i < 3; ++i) {
      EXPECT_NEAR(params(i), -3e-4 * (g(i) > 0 ? 1.0 : -1.0), 3e-4 * 1e-2) << scale;
    }
  }
}

TEST(Adam, LearningRateMultiplierScalesStep) {
  Vector a = Vector::Zero(2), b = Vector::Zero(2);
  AdamState sa(2, 1e-3), sb(2, 1e-3);
  adam_step(a, Vector::Ones(2), sa, 1.0);
  adam_step(b, Vector::Ones(2), sb, 0.25);
  EXPECT_NEAR(b(0), 0.25 * a(0), 1e-15);
  Vector c = Vector::Zero(2);
  AdamState sc(2, 1e-3);
  adam_step(c, Vector::Ones(2), sc, 0.0);
  EXPECT_EQ(c, Vector::Zero(2));
}

TEST(Adam, RejectsNonFiniteAndMismatchedGradients) {
  Vector params = Vector::Zero(2);
  AdamState state(2, 1e-3);
  EXPECT_THROW(adam_step(params, Vector::Constant(2, NAN), state), NonFiniteGradient);
  EXPECT_THROW(adam_step(params, Vector::Zero(3), state), std::invalid_argument);
}

TEST(Adam, TrajectoriesAreBitIdentical) {
  auto run = [] {
    std::mt19937_64 rng(13);
    Vector params = random_vector(rng, 10);
    AdamState state(10, 1e-2);
    for (int i = 0; i < 50; ++i) adam_step(params, random_vector(rng, 10), state, 0.5);
    return params;
  };
  EXPECT_EQ(run(), run());
}

TEST(Checkpoint, PolicyAndValueRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "spu_test_checkpoint";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(14);
  PolicyNet pol(HeadKind::gaussian, 3, 2, {16});
  pol.init(rng);
  Vector p = pol.parameters();
  p.tail(2) << -0.3, 0.2;
  pol.set_parameters(p);
  save_policy(dir / "policy.bin", pol);
  const auto loaded = load_policy(dir / "policy.bin");
  EXPECT_EQ(loaded.kind(), HeadKind::gaussian);
  EXPECT_EQ(loaded.parameters(), pol.parameters());
  EXPECT_EQ(loaded.log_std(), pol.log_std());

  ValueNet critic(3, {16});
  critic.init(rng);
  save_value(dir / "value.bin", critic);
  EXPECT_EQ(load_value(dir / "value.bin").parameters(), critic.parameters());
  EXPECT_THROW(load_policy(dir / "value.bin"), CheckpointError);
}

TEST(Checkpoint, DetectsTruncationAndTrailingBytes) {
  const auto dir = std::filesystem::temp_directory_path() / "spu_test_checkpoint";
  std::filesystem::create_directories(dir);
  const auto path = dir / "raw.bin";
  write_params(path, {{"kind", "raw"}}, Vector::LinSpaced(4, 0, 3));
  Vector params;
  const auto header = read_params(path, params);
  EXPECT_EQ(header["num_params"], 4);
  EXPECT_EQ(params, Vector::LinSpaced(4, 0, 3));

  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  EXPECT_THROW(read_params(path, params), CheckpointError);

  write_params(path, {{"kind", "raw"}}, Vector::LinSpaced(4, 0, 3));
  std::ofstream(path, std::ios::app | std::ios::binary) << "x";
  EXPECT_THROW(read_params(path, params), CheckpointError);
  EXPECT_THROW(read_params(dir / "missing.bin", params), CheckpointError);
}
