#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "tavlab/loss.hpp"
#include "tavlab/taskgen.hpp"

using namespace tavlab;

namespace {

TaskDataset small_task(std::uint64_t seed = 7, std::size_t n = 40) {
  return make_task(seed, n, 6, 3, 1.0, 3.0);
}

MlpModel tanh_net(std::uint64_t seed = 2) {
  return random_init({{6, 10, 3}, Activation::tanh, false}, seed);
}

}  // namespace

TEST_CASE("loss on degenerate models") {
  const TaskDataset ds = small_task();
  const MlpModel zero = zero_model({{6, 10, 3}, Activation::tanh, false});
  // uniform softmax: every per-sample term is exactly log 3; the mean
  // reduction costs a couple of ulps
  CHECK(loss(zero, ds) == Catch::Approx(std::log(3.0)).margin(1e-15));

  // one sample, +30 logit on the true class: loss saturates at ~0
  TaskDataset one;
  one.task_id = "one";
  one.input_dim = 2;
  one.num_classes = 2;
  one.inputs = {{1.0, 0.0}};
  one.labels = {0};
  one.m_x_bound = 1.0;
  MlpModel direct = zero_model({{2, 2}, Activation::tanh, false});
  direct.weights[0].at(0, 0) = 30.0;
  CHECK(loss(direct, one) < 1e-12);

  TaskDataset empty = one;
  empty.inputs.clear();
  empty.labels.clear();
  CHECK_THROWS_AS(loss(zero_model({{2, 2}, Activation::tanh, false}), empty),
                  std::invalid_argument);
}

TEST_CASE("loss matches a literal per-sample recomputation") {
  const TaskDataset ds = small_task(11);
  const MlpModel model = tanh_net(5);
  CHECK(loss(model, ds) ==
        Catch::Approx(oracle::naive_mean_cross_entropy(model, ds)).margin(1e-14));
}

TEST_CASE("softmax state and logits hessian") {
  const SoftmaxState vertex{{1.0, 0.0, 0.0}};
  const DenseMatrix h0 = logits_hessian(vertex);
  for (double v : h0.data) CHECK(v == 0.0);

  const SoftmaxState half{{0.5, 0.5}};
  const DenseMatrix h1 = logits_hessian(half);
  CHECK(h1.at(0, 0) == 0.25);
  CHECK(h1.at(0, 1) == -0.25);
  CHECK(h1.at(1, 0) == -0.25);
  CHECK(h1.at(1, 1) == 0.25);

  SplitMix64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + trial % 5;
    std::vector<double> p(k);
    double sum = 0.0;
    for (double& x : p) {
      x = -std::log(rng.next_unit_open());
      sum += x;
    }
    for (double& x : p) x /= sum;
    const DenseMatrix h = logits_hessian({p});
    const auto ev = oracle::symmetric_eigenvalues(h);
    CHECK(ev.back() <= 0.5 + 1e-12);
    CHECK(ev.front() >= -1e-12);  // PSD
    double trace = 0.0, psq = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      trace += h.at(i, i);
      psq += p[i] * p[i];
    }
    CHECK(trace == Catch::Approx(1.0 - psq).margin(1e-12));
    CHECK(trace <= 1.0 - 1.0 / static_cast<double>(k) + 1e-12);
  }
}

TEST_CASE("per-sample softmax gradient norm stays below sqrt(2)") {
  const TaskDataset ds = small_task(23);
  const MlpModel model = tanh_net(9);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    SoftmaxState sm = softmax_stable(forward(model, ds.inputs[i]));
    sm.p[ds.labels[i]] -= 1.0;
    double norm_sq = 0.0;
    for (double g : sm.p) norm_sq += g * g;
    CHECK(std::sqrt(norm_sq) <= std::sqrt(2.0) + 1e-15);
  }
}

TEST_CASE("gradient: last-layer rows sum to zero") {
  const TaskDataset ds = small_task(3);
  const MlpModel model = tanh_net(8);
  const ParamVector g = grad(model, ds);
  // W^(2) block occupies the last 30 slots (3x10), rows of length 10
  const std::size_t offset = 6 * 10;
  for (std::size_t c = 0; c < 10; ++c) {
    double col_sum = 0.0;
    for (std::size_t r = 0; r < 3; ++r) col_sum += g[offset + r * 10 + c];
    CHECK(std::abs(col_sum) <= 1e-15);
  }
}

TEST_CASE("gradient matches central finite differences") {
  const TaskDataset ds = small_task(5, 25);
  for (Activation a : {Activation::tanh, Activation::sigmoid}) {
    const MlpModel model = random_init({{6, 10, 3}, a, false}, 21);
    const FdReport report = fd_check(model, ds, FdMode::grad);
    CHECK(report.max_rel_error < 1e-6);
  }
  // biased networks differentiate exactly too
  const MlpModel biased = random_init({{6, 8, 3}, Activation::tanh, true}, 22);
  CHECK(fd_check(biased, ds, FdMode::grad).max_rel_error < 1e-6);
}

TEST_CASE("gradient is invariant under dataset duplication") {
  const TaskDataset ds = small_task(29, 20);
  TaskDataset doubled = ds;
  doubled.inputs.insert(doubled.inputs.end(), ds.inputs.begin(), ds.inputs.end());
  doubled.labels.insert(doubled.labels.end(), ds.labels.begin(), ds.labels.end());
  const MlpModel model = tanh_net(30);
  const ParamVector g1 = grad(model, ds);
  const ParamVector g2 = grad(model, doubled);
  ParamVector diff = subtract(g1, g2);
  CHECK(norm2(diff) <= 1e-14 * (1.0 + norm2(g1)));
}

TEST_CASE("fd_check on an all-zero model sits at the noise floor") {
  // Zero weights and tanh(0) = 0 make the loss locally constant: both the
  // analytic gradient and the differences vanish.
  const TaskDataset ds = small_task(31, 10);
  const MlpModel zero = zero_model({{6, 10, 3}, Activation::tanh, false});
  const FdReport report = fd_check(zero, ds, FdMode::grad);
  CHECK(report.max_rel_error <= 1e-10);
  CHECK(norm2(grad(zero, ds)) == 0.0);
}

TEST_CASE("hvp on the zero direction") {
  const TaskDataset ds = small_task(37, 15);
  const MlpModel model = tanh_net(12);
  const ParamVector hv = hvp(model, ds, ParamVector(model.arch.param_count(), 0.0));
  CHECK(norm2(hv) == 0.0);
}

TEST_CASE("hvp matches finite differences of the gradient") {
  const TaskDataset ds = small_task(41, 25);
  for (Activation a : {Activation::tanh, Activation::sigmoid, Activation::relu}) {
    const MlpModel model = random_init({{6, 10, 3}, a, false}, 33);
    const FdReport report = fd_check(model, ds, FdMode::hvp);
    CHECK(report.max_rel_error < 1e-5);
  }
}

TEST_CASE("hvp against basis-direction finite differences") {
  const TaskDataset ds = small_task(43, 20);
  const MlpModel model = tanh_net(14);
  const std::size_t p = model.arch.param_count();
  for (std::size_t i : {std::size_t{0}, p / 2, p - 1}) {
    ParamVector e(p, 0.0);
    e[i] = 1.0;
    const ParamVector analytic = hvp(model, ds, e);
    const ParamVector fd = oracle::fd_hessian_column(model, ds, e, 1e-5);
    double scale = std::max(norm_inf(analytic), 1e-12);
    for (std::size_t j = 0; j < p; ++j)
      CHECK(std::abs(analytic[j] - fd[j]) / scale < 1e-5);
  }
}

TEST_CASE("hessian symmetry as a bilinear form") {
  const TaskDataset ds = small_task(47, 30);
  const MlpModel model = tanh_net(18);
  SplitMix64 rng(50);
  for (int trial = 0; trial < 5; ++trial) {
    ParamVector v(model.arch.param_count()), w(model.arch.param_count());
    for (double& x : v) x = rng.next_normal();
    for (double& x : w) x = rng.next_normal();
    const double a = dot(hvp(model, ds, v), w);
    const double b = dot(hvp(model, ds, w), v);
    CHECK(std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)));
  }
}

TEST_CASE("single-layer relu: hvp is exactly the Gauss-Newton product") {
  // A single linear layer has no parameter curvature at all, so the claim
  // "relu makes the network-curvature term vanish" is exact here.
  TaskDataset ds = small_task(53, 20);
  const MlpModel model = random_init({{6, 3}, Activation::relu, false}, 40);
  SplitMix64 rng(60);
  ParamVector v(model.arch.param_count());
  for (double& x : v) x = rng.next_normal();
  const ParamVector hv = hvp(model, ds, v);
  const ParamVector gn = oracle::gauss_newton_product(model, ds, v);
  CHECK(norm2(subtract(hv, gn)) <= 1e-14 * (1.0 + norm2(hv)));
}

TEST_CASE("deep relu keeps a nonzero cross-layer curvature term") {
  // Depth >= 2 relu networks are piecewise multilinear in the weights, not
  // linear: the Hessian is not the Gauss-Newton matrix and need not be PSD.
  const TaskDataset ds = small_task(7, 40);
  const MlpModel model = random_init({{6, 10, 3}, Activation::relu, false}, 2);
  SplitMix64 rng(61);
  ParamVector v(model.arch.param_count());
  for (double& x : v) x = rng.next_normal();
  const ParamVector hv = hvp(model, ds, v);
  const ParamVector gn = oracle::gauss_newton_product(model, ds, v);
  CHECK(norm2(subtract(hv, gn)) > 0.1 * norm2(hv));

  const FullHessian fh = full_hessian(model, ds);
  const auto ev = oracle::symmetric_eigenvalues(fh.matrix);
  CHECK(ev.front() < -1e-3);  // measured indefiniteness on this fixture
}

TEST_CASE("single-layer hessian is PSD") {
  const TaskDataset ds = small_task(7, 40);
  const MlpModel model = random_init({{6, 3}, Activation::relu, false}, 4);
  const FullHessian fh = full_hessian(model, ds);
  const auto ev = oracle::symmetric_eigenvalues(fh.matrix);
  CHECK(ev.front() >= -1e-10);
}

TEST_CASE("full hessian: hvp consistency, symmetry, size cap") {
  const TaskDataset ds = small_task(59, 20);
  const MlpModel model = tanh_net(25);
  const std::size_t p = model.arch.param_count();
  const FullHessian fh = full_hessian(model, ds);
  CHECK(fh.raw_asymmetry < 1e-9);

  SplitMix64 rng(70);
  ParamVector v(p);
  for (double& x : v) x = rng.next_normal();
  const ParamVector hv = hvp(model, ds, v);
  std::vector<double> dense_v;
  matvec(fh.matrix, v, dense_v);
  double err = 0.0;
  for (std::size_t i = 0; i < p; ++i) err = std::max(err, std::abs(dense_v[i] - hv[i]));
  CHECK(err <= 1e-10 * (1.0 + norm_inf(hv)));

  CHECK_THROWS_WITH(full_hessian(model, ds, p - 1), "hessian too large");
}

TEST_CASE("hessian spectral norm operator path matches the dense path") {
  const TaskDataset ds = small_task(61, 20);
  const MlpModel model = tanh_net(26);
  const FullHessian fh = full_hessian(model, ds);
  const double dense = oracle::svd_spectral_norm(fh.matrix);
  CHECK(hessian_spectral_norm(model, ds) == Catch::Approx(dense).epsilon(1e-7));
}

TEST_CASE("relu fd_check flags kink crossings when they happen") {
  // A preactivation within eps of zero guarantees a sign flip inside the
  // central-difference stencil.
  TaskDataset ds;
  ds.task_id = "kink";
  ds.input_dim = 1;
  ds.num_classes = 2;
  ds.inputs = {{1.0}};
  ds.labels = {0};
  ds.m_x_bound = 1.0;
  MlpModel model = zero_model({{1, 1, 2}, Activation::relu, false});
  model.weights[0].at(0, 0) = 1e-7;  // h = 1e-7, flips under the 1e-5 step
  model.weights[1].at(0, 0) = 1.0;
  const FdReport report = fd_check(model, ds, FdMode::grad);
  CHECK(report.kink_crossings > 0);
}
