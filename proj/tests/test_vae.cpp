#include <cmath>
#include <random>

#include "doctest.h"
#include "lvae/errors.hpp"
#include "lvae/vae.hpp"
#include "oracles/kl_monte_carlo.hpp"
#include "oracles/naive_vae.hpp"
#include "test_util.hpp"

using lvae::Tensor;
using lvae::VaeModel;

namespace {

std::vector<oracle::Vec> rows_of(const Tensor& t) {
  std::vector<oracle::Vec> out;
  for (std::size_t r = 0; r < t.rows(); ++r)
    out.emplace_back(t.row(r).begin(), t.row(r).end());
  return out;
}

// Random small model with non-trivial biases so every path is exercised.
VaeModel random_small_model(std::uint64_t seed, std::size_t hidden = 8,
                            std::size_t latent = 2) {
  VaeModel m = VaeModel::initialized(hidden, latent, seed);
  std::mt19937_64 rng(seed ^ 0xb1a5);
  for (auto& layer : m.layers())
    layer.bias = testutil::random_tensor(layer.bias.shape(), rng, -0.3, 0.3);
  return m;
}

}  // namespace

TEST_CASE("encode of a zero network is zero") {
  const VaeModel m = VaeModel::zeros(16, 2);
  std::mt19937_64 rng(1);
  const auto code = lvae::encode(m, testutil::random_images(3, rng));
  CHECK(code.mu == Tensor({3, 2}));
  CHECK(code.logvar == Tensor({3, 2}));
}

TEST_CASE("encode is deterministic and matches the naive oracle") {
  const VaeModel a = random_small_model(7, 32, 3);
  const VaeModel b = random_small_model(7, 32, 3);
  std::mt19937_64 rng(2);
  const Tensor x = testutil::random_images(4, rng);
  const auto ca = lvae::encode(a, x);
  const auto cb = lvae::encode(b, x);
  CHECK(ca.mu == cb.mu);
  CHECK(ca.logvar == cb.logvar);

  oracle::NaiveVae naive(a);
  for (std::size_t r = 0; r < 4; ++r) {
    const oracle::Vec xr(x.row(r).begin(), x.row(r).end());
    const auto h = naive.hidden(xr);
    const auto mu = naive.mu_of(h);
    const auto lv = naive.logvar_of(h);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(ca.mu(r, k) == doctest::Approx(mu[k]).epsilon(1e-12));
      CHECK(ca.logvar(r, k) == doctest::Approx(lv[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("encode rejects non-784 input") {
  const VaeModel m = VaeModel::zeros(4, 2);
  CHECK_THROWS_AS(lvae::encode(m, Tensor({1, 783})), lvae::DimensionError);
  CHECK_THROWS_AS(lvae::decode(m, Tensor({1, 3})), lvae::DimensionError);
  CHECK_THROWS_AS(lvae::encode(VaeModel{}, Tensor({1, 784})), lvae::ModelError);
}

TEST_CASE("encode saturates logvar") {
  VaeModel m = VaeModel::zeros(4, 2);
  m.enc_logvar().bias = Tensor::vector({50.0, -50.0});
  const auto code = lvae::encode(m, Tensor({1, 784}));
  CHECK(code.logvar(0, 0) == lvae::kLogvarMax);
  CHECK(code.logvar(0, 1) == lvae::kLogvarMin);
}

TEST_CASE("reparameterize") {
  SUBCASE("vanishing variance collapses to mu") {
    lvae::Rng rng(9);
    const Tensor mu = Tensor::matrix(1, 2, {0.3, -1.2});
    const Tensor z = lvae::reparameterize(mu, Tensor({1, 2}, -60.0), rng);
    CHECK(std::abs(z[0] - 0.3) < 1e-12);
    CHECK(std::abs(z[1] + 1.2) < 1e-12);
  }
  SUBCASE("same seed gives identical samples") {
    lvae::Rng r1(42), r2(42);
    const Tensor mu({5, 2}), lv({5, 2});
    CHECK(lvae::reparameterize(mu, lv, r1) == lvae::reparameterize(mu, lv, r2));
  }
  SUBCASE("standard normal moments over 1e5 samples") {
    lvae::Rng rng(123);
    const std::size_t n = 100000;
    const Tensor z = lvae::reparameterize(Tensor({n, 2}), Tensor({n, 2}), rng);
    for (std::size_t k = 0; k < 2; ++k) {
      double m = 0.0, m2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        m += z(i, k);
        m2 += z(i, k) * z(i, k);
      }
      m /= n;
      const double var = m2 / n - m * m;
      CHECK(std::abs(m) < 0.02);
      CHECK(var >= 0.96);
      CHECK(var <= 1.04);
    }
  }
}

TEST_CASE("decode") {
  SUBCASE("zero decoder gives 0.5 everywhere") {
    const VaeModel m = VaeModel::zeros(8, 2);
    const Tensor out = lvae::decode(m, Tensor::matrix(2, 2, {3, -1, 0.5, 9}));
    CHECK(out == Tensor({2, 784}, 0.5));
  }
  SUBCASE("outputs inside (0,1) and match the naive oracle") {
    const VaeModel m = random_small_model(31, 16, 2);
    std::mt19937_64 rng(4);
    const Tensor z = testutil::random_tensor({3, 2}, rng, -3, 3);
    const Tensor out = lvae::decode(m, z);
    oracle::NaiveVae naive(m);
    for (std::size_t r = 0; r < 3; ++r) {
      const auto want = naive.decode({z(r, 0), z(r, 1)});
      for (std::size_t i = 0; i < 784; ++i) {
        CHECK(out(r, i) > 0.0);
        CHECK(out(r, i) < 1.0);
        CHECK(out(r, i) == doctest::Approx(want[i]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("loss terms") {
  const Tensor x({1, 784}, 0.0);
  const Tensor xh({1, 784}, 0.5);
  SUBCASE("standard normal posterior has zero KL") {
    const auto t = lvae::loss(x, xh, Tensor({1, 2}), Tensor({1, 2}));
    CHECK(t.kl == 0.0);
    CHECK(t.bce == doctest::Approx(784 * std::log(2.0)));
    CHECK(t.total == t.bce + t.kl);
  }
  SUBCASE("unit mean shift") {
    const auto t = lvae::loss(x, xh, Tensor::matrix(1, 1, {1}), Tensor({1, 1}));
    CHECK(t.kl == 0.5);
  }
  SUBCASE("batch mean") {
    const Tensor mu = Tensor::matrix(2, 1, {1, 0});
    const auto t = lvae::loss(Tensor({2, 784}), Tensor({2, 784}, 0.5), mu, Tensor({2, 1}));
    CHECK(t.kl == 0.25);
  }
}

TEST_CASE("KL is non-negative and zero only at the prior") {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 1000; ++i) {
    const Tensor mu = testutil::random_tensor({1, 3}, rng, -3, 3);
    const Tensor lv = testutil::random_tensor({1, 3}, rng, -5, 5);
    CHECK(lvae::kl_divergence(mu.data(), lv.data()) > 0.0);
  }
  CHECK(std::abs(lvae::kl_divergence(std::vector<double>{0, 0},
                                     std::vector<double>{0, 0})) <= 1e-12);
}

TEST_CASE("closed-form KL agrees with Monte-Carlo") {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> mu_d(-2, 2), lv_d(-2, 2);
  for (int draw = 0; draw < 5; ++draw) {
    std::vector<double> mu{mu_d(rng), mu_d(rng)}, lv{lv_d(rng), lv_d(rng)};
    const double closed = lvae::kl_divergence(mu, lv);
    const double mc = oracle::kl_monte_carlo(mu, lv, 100000, 1000 + draw);
    CHECK(std::abs(closed - mc) / closed < 0.02);
  }
}

TEST_CASE("pipeline preserves batch size and image width") {
  const VaeModel m = random_small_model(5, 16, 2);
  std::mt19937_64 rng(8);
  lvae::Rng noise(8);
  const Tensor x = testutil::random_images(6, rng);
  const auto code = lvae::encode(m, x);
  const Tensor out = lvae::decode(m, lvae::reparameterize(code.mu, code.logvar, noise));
  CHECK(out.shape() == std::vector<std::size_t>{6, 784});
}

TEST_CASE("forward_backward reports the same loss as the public path") {
  VaeModel m = random_small_model(12, 8, 2);
  std::mt19937_64 rng(13);
  const Tensor x = testutil::random_images(4, rng);
  lvae::Rng noise(14);
  const Tensor eps = lvae::standard_normal({4, 2}, noise);
  const auto code = lvae::encode(m, x);
  const Tensor xh = lvae::decode(m, lvae::reparameterize(code.mu, code.logvar, eps));
  const auto want = lvae::loss(x, xh, code.mu, code.logvar);
  const auto got = lvae::forward_backward(m, x, eps);
  CHECK(got.total == doctest::Approx(want.total).epsilon(1e-12));
  CHECK(got.kl == doctest::Approx(want.kl).epsilon(1e-12));
}

TEST_CASE("end-to-end gradients match finite differences") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    VaeModel m = random_small_model(100 + seed);
    std::mt19937_64 rng(200 + seed);
    lvae::Rng noise(300 + seed);
    const Tensor x = testutil::random_images(4, rng);
    const Tensor eps = lvae::standard_normal({4, 2}, noise);
    lvae::forward_backward(m, x, eps);
    const auto fd = oracle::finite_difference_gradients(m, rows_of(x), rows_of(eps), 1e-5);
    for (int l = 0; l < VaeModel::kLayerCount; ++l) {
      const auto& layer = m.layer(l);
      const auto gw = layer.grad_weights.data();
      const auto gb = layer.grad_bias.data();
      for (std::size_t i = 0; i < gw.size(); ++i)
        worst = std::max(worst, testutil::rel_error(gw[i], fd[l][i], 1e-5));
      for (std::size_t i = 0; i < gb.size(); ++i)
        worst = std::max(worst, testutil::rel_error(gb[i], fd[l][gw.size() + i], 1e-5));
    }
  }
  MESSAGE("worst relative error " << worst);
  CHECK(worst < 1e-4);
}

TEST_CASE("frozen layers accumulate no gradient") {
  VaeModel m = random_small_model(3);
  m.freeze_up_to(VaeModel::kEncLogvar);
  std::mt19937_64 rng(1);
  lvae::Rng noise(1);
  lvae::forward_backward(m, testutil::random_images(2, rng),
                         lvae::standard_normal({2, 2}, noise));
  for (int l = 0; l <= VaeModel::kEncLogvar; ++l)
    CHECK(m.layer(l).grad_weights == Tensor(m.layer(l).grad_weights.shape()));
  bool decoder_moved = false;
  for (double g : m.dec_out().grad_weights.data()) decoder_moved |= g != 0.0;
  CHECK(decoder_moved);
  CHECK_THROWS_AS(m.freeze_up_to(5), lvae::ConfigError);
}

TEST_CASE("checkpoint round trip and header layout") {
  const VaeModel m = random_small_model(55, 8, 3);
  const auto bytes = lvae::checkpoint_bytes(m);
  REQUIRE(bytes.size() == 4 + 2 + 4 + 4 + 8 * m.parameter_count());
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "LVAE");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 8);
  CHECK(bytes[10] == 3);
  // First weight of enc_hidden, little-endian f64.
  std::uint64_t first = 0;
  for (int i = 0; i < 8; ++i) first |= std::uint64_t(bytes[14 + i]) << (8 * i);
  CHECK(std::bit_cast<double>(first) == m.enc_hidden().weights[0]);

  const VaeModel back = lvae::model_from_checkpoint(bytes);
  CHECK(back.same_parameters(m));
  CHECK(lvae::checkpoint_bytes(back) == bytes);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(lvae::model_from_checkpoint(bad), lvae::ModelError);
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(lvae::model_from_checkpoint(truncated), lvae::ModelError);
}
