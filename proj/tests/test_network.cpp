#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "tavlab/network.hpp"

using namespace tavlab;

namespace {
std::vector<double> seeded_input(std::uint64_t seed, std::size_t dim) {
  SplitMix64 rng(seed);
  std::vector<double> x(dim);
  for (double& v : x) v = rng.next_normal();
  return x;
}
}  // namespace

TEST_CASE("activation values and derivative conventions") {
  const auto relu_neg = activation_eval(Activation::relu, -1.0);
  CHECK(relu_neg.value == 0.0);
  CHECK(relu_neg.d1 == 0.0);
  CHECK(relu_neg.d2 == 0.0);
  const auto relu_zero = activation_eval(Activation::relu, 0.0);
  CHECK(relu_zero.d1 == 0.0);  // subgradient fixed to 0

  const auto sig = activation_eval(Activation::sigmoid, 0.0);
  CHECK(sig.value == 0.5);
  CHECK(sig.d1 == 0.25);
  CHECK(sig.d2 == 0.0);

  SplitMix64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const double z = 8.0 * rng.next_normal();
    const auto t = activation_eval(Activation::tanh, z);
    CHECK(t.d2 == Catch::Approx(-2.0 * t.value * t.d1).margin(1e-12));
  }
}

TEST_CASE("derivative sup bounds hold on a dense grid") {
  for (Activation a : {Activation::relu, Activation::sigmoid, Activation::tanh}) {
    const double beta = beta_phi(a);
    const double gamma = gamma_phi(a);
    double seen_d1 = 0.0, seen_d2 = 0.0;
    for (double z = -50.0; z <= 50.0; z += 0.01) {
      const auto v = activation_eval(a, z);
      seen_d1 = std::max(seen_d1, std::abs(v.d1));
      seen_d2 = std::max(seen_d2, std::abs(v.d2));
    }
    CHECK(seen_d1 <= beta + 1e-15);
    CHECK(seen_d2 <= gamma + 1e-15);
    // the bounds are attained somewhere (tight constants)
    CHECK(seen_d1 >= beta * 0.999);
    if (gamma > 0.0) CHECK(seen_d2 >= gamma * 0.999);
  }
}

TEST_CASE("forward on degenerate networks") {
  MlpArchitecture arch{{2, 3, 2}, Activation::tanh, false};
  const MlpModel zero = zero_model(arch);
  const auto logits = forward(zero, {1.0, -2.0});
  CHECK(logits == std::vector<double>{0.0, 0.0});

  MlpArchitecture single{{2, 2}, Activation::relu, false};
  MlpModel identity = zero_model(single);
  identity.weights[0].at(0, 0) = 1.0;
  identity.weights[0].at(1, 1) = 1.0;
  CHECK(forward(identity, {1.0, 2.0}) == std::vector<double>{1.0, 2.0});

  CHECK_THROWS_AS(forward(zero, {1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("forward matches a straight-line recomputation") {
  MlpArchitecture arch{{5, 9, 4}, Activation::relu, false};
  const MlpModel model = random_init(arch, 31);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto x = seeded_input(900 + s, 5);
    CHECK(forward(model, x) == oracle::straight_line_forward(model, x));
  }
}

TEST_CASE("trace is internally consistent") {
  MlpArchitecture arch{{4, 7, 6, 3}, Activation::sigmoid, false};
  const MlpModel model = random_init(arch, 77);
  const auto x = seeded_input(13, 4);
  ForwardTrace trace;
  const auto logits = forward(model, x, &trace);
  REQUIRE(trace.preacts.size() == 3);
  REQUIRE(trace.acts.size() == 4);
  CHECK(trace.acts[0] == x);
  CHECK(trace.acts[3] == logits);
  for (std::size_t l = 0; l + 1 < 3; ++l)
    for (std::size_t j = 0; j < trace.preacts[l].size(); ++j)
      CHECK(trace.acts[l + 1][j] ==
            activation_eval(arch.activation, trace.preacts[l][j]).value);
}

TEST_CASE("relu networks are positively homogeneous in the input") {
  MlpArchitecture arch{{6, 10, 8, 3}, Activation::relu, false};
  const MlpModel model = random_init(arch, 3);
  const auto x = seeded_input(44, 6);
  const auto base = forward(model, x);
  for (double c : {2.0, 0.5, 8.0}) {  // powers of two scale bit-exactly
    auto cx = x;
    for (double& v : cx) v *= c;
    const auto scaled_logits = forward(model, cx);
    for (std::size_t k = 0; k < base.size(); ++k)
      CHECK(scaled_logits[k] == c * base[k]);
  }
  for (double c : {3.0, 0.7}) {
    auto cx = x;
    for (double& v : cx) v *= c;
    const auto scaled_logits = forward(model, cx);
    for (std::size_t k = 0; k < base.size(); ++k)
      CHECK(scaled_logits[k] == Catch::Approx(c * base[k]).epsilon(1e-12));
  }
}

TEST_CASE("flatten layout and round-trips") {
  MlpArchitecture arch{{4, 8, 3}, Activation::tanh, false};
  CHECK(arch.param_count() == 56);
  CHECK(flatten(zero_model(arch)) == ParamVector(56, 0.0));

  const MlpModel model = random_init(arch, 15);
  const ParamVector v = flatten(model);
  const MlpModel back = unflatten(arch, v);
  CHECK(flatten(back) == v);
  // layer-major, row-major: first entry is W^(1)(0,0), entry 32 is W^(2)(0,0)
  CHECK(v[0] == model.weights[0].at(0, 0));
  CHECK(v[32] == model.weights[1].at(0, 0));

  CHECK_THROWS_AS(unflatten(arch, ParamVector(55, 0.0)), std::invalid_argument);

  MlpArchitecture biased{{4, 8, 3}, Activation::tanh, true};
  CHECK(biased.param_count() == 56 + 11);
  const MlpModel bmodel = random_init(biased, 16);
  CHECK(flatten(unflatten(biased, flatten(bmodel))) == flatten(bmodel));
}

TEST_CASE("architecture validation") {
  CHECK_THROWS_AS((MlpArchitecture{{4}, Activation::tanh, false}).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS((MlpArchitecture{{4, 0, 3}, Activation::tanh, false}).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS((MlpArchitecture{{4, 3}, Activation::identity, false}).validate(),
                  std::invalid_argument);
}
