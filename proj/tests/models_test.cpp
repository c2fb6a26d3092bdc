#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "lpc/checkpoint.hpp"
#include "lpc/errors.hpp"
#include "lpc/models.hpp"
#include "testutil.hpp"

using namespace lpc;

namespace {

// Linear-Gaussian model (no hidden layers, fixed scale) with the decoder
// weights overwritten to a known W, b.
GenerativeModel linear_gaussian_model(const Mat& w, const std::vector<double>& b,
                                      double sigma, double prior_var = 1.0) {
  GenerativeModel m = GenerativeModel::make(
      w.cols, w.rows, {}, Likelihood::kDiagonalGaussian, RngStream(0),
      DecoderScaleMode::kFixed, sigma, prior_var);
  m.params.get("dec.head_w").mutable_data() = w.a;
  m.params.get("dec.head_b").mutable_data() = b;
  return m;
}

Mat randn_mat(std::int64_t r, std::int64_t c, RngStream& rng,
              double scale = 1.0) {
  Mat m(r, c);
  for (auto& v : m.a) v = scale * rng.normal();
  return m;
}

}  // namespace

TEST_CASE("log_joint of the unit model at the origin") {
  Mat w(1, 1);
  w.at(0, 0) = 1.0;
  GenerativeModel m = linear_gaussian_model(w, {0.0}, 1.0);
  Mat x(1, 1, 0.0), z(1, 1, 0.0);
  double expected = -std::log(2.0 * std::numbers::pi);  // two unit normals at 0
  CHECK(log_joint(m, x, z) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(-1.8379).epsilon(1e-4));
}

TEST_CASE("linear-Gaussian log_joint matches closed-form densities") {
  RngStream rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    std::int64_t d = 3, n = 5;
    Mat w = randn_mat(d, n, rng);
    std::vector<double> b(n);
    for (auto& v : b) v = rng.normal();
    double sigma = 0.5 + rng.uniform();
    double pv = 0.5 + rng.uniform();
    GenerativeModel m = linear_gaussian_model(w, b, sigma, pv);

    Mat z = randn_mat(2, d, rng);
    Mat x = randn_mat(2, n, rng);
    double oracle = 0.0;
    for (std::int64_t row = 0; row < 2; ++row) {
      for (std::int64_t j = 0; j < d; ++j) {
        oracle += testutil::gauss_logpdf(z.at(row, j), 0.0, std::sqrt(pv));
      }
      for (std::int64_t j = 0; j < n; ++j) {
        double mean = b[static_cast<std::size_t>(j)];
        for (std::int64_t k = 0; k < d; ++k) mean += z.at(row, k) * w.at(k, j);
        oracle += testutil::gauss_logpdf(x.at(row, j), mean, sigma);
      }
    }
    CHECK(log_joint(m, x, z) == doctest::Approx(oracle).epsilon(1e-10));
  }
}

TEST_CASE("batched log_joint equals sum of per-example log_joints") {
  RngStream rng(22);
  GenerativeModel m =
      GenerativeModel::make(4, 2, {8}, Likelihood::kDiagonalGaussian,
                            RngStream(5));
  Mat x = randn_mat(6, 4, rng);
  Mat z = randn_mat(6, 2, rng);
  double batched = log_joint(m, x, z);
  double summed = 0.0;
  for (std::int64_t i = 0; i < 6; ++i) summed += log_joint(m, x.row(i), z.row(i));
  CHECK(batched == doctest::Approx(summed).epsilon(1e-12));
}

TEST_CASE("grad of log_joint w.r.t. z matches finite differences across likelihoods") {
  RngStream rng(23);
  for (Likelihood lik :
       {Likelihood::kDiagonalGaussian, Likelihood::kDiscretizedGaussian}) {
    GenerativeModel m = GenerativeModel::make(3, 2, {6}, lik, RngStream(7));
    for (int trial = 0; trial < 10; ++trial) {
      Mat z = randn_mat(2, 2, rng);
      Mat x(2, 3);
      if (lik == Likelihood::kDiscretizedGaussian) {
        for (auto& v : x.a) {
          v = std::round(rng.uniform() * 255.0) / 255.0;
        }
      } else {
        x = randn_mat(2, 3, rng);
      }
      JointEval eval = eval_log_joint(m, x, z, false);
      auto fd = testutil::finite_diff_vector(
          [&](const std::vector<double>& zv) {
            Mat zz = z;
            zz.a = zv;
            return log_joint(m, x, zz);
          },
          z.a);
      CHECK(testutil::rel_error(eval.z_grad.a, fd) < 1e-4);
    }
  }
}

TEST_CASE("eval_log_joint theta gradient matches finite differences") {
  RngStream rng(29);
  GenerativeModel m = GenerativeModel::make(
      3, 2, {5}, Likelihood::kDiagonalGaussian, RngStream(11));
  Mat x = randn_mat(2, 3, rng);
  Mat z = randn_mat(2, 2, rng);
  JointEval eval = eval_log_joint(m, x, z, true);
  REQUIRE(eval.has_theta);
  auto fd = testutil::finite_diff_params(
      [&](const ParamSet&) { return log_joint(m, x, z); }, m.params);
  CHECK(testutil::rel_error_params(eval.theta_grad, fd) < 1e-4);
}

TEST_CASE("discretized gaussian: top bin approaches probability one") {
  Mat x(1, 1, 1.0);  // top of the grid
  Mat mean(1, 1, 50.0);
  Mat scale(1, 1, 1.0);
  double lp = discretized_gaussian_logpmf_value(x, mean, scale);
  CHECK(lp == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("discretized gaussian normalizes over the 256-level grid") {
  RngStream rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    double mu = rng.uniform(-0.4, 1.4);
    double sigma = std::exp(rng.uniform(std::log(0.003), std::log(2.0)));
    double total = 0.0;
    for (int level = 0; level < 256; ++level) {
      Mat x(1, 1, level / 255.0);
      Mat m(1, 1, mu), s(1, 1, sigma);
      total += std::exp(discretized_gaussian_logpmf_value(x, m, s));
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("discretized gaussian matches quadrature over a bin") {
  double mu = 128.0 / 255.0;
  double sigma = 0.1;
  Mat x(1, 1, mu), m(1, 1, mu), s(1, 1, sigma);
  double lp = discretized_gaussian_logpmf_value(x, m, s);
  double h = 1.0 / 510.0;
  double mass = testutil::gauss_mass_quadrature(mu, sigma, mu - h, mu + h);
  CHECK(lp == doctest::Approx(std::log(mass)).epsilon(1e-8));
}

TEST_CASE("discretized gaussian floors zero-probability bins and counts them") {
  counters().reset();
  Mat x(1, 1, 0.0);
  Mat m(1, 1, 1.0);       // mean at the far end
  Mat s(1, 1, 0.001);     // tiny scale: bin probability underflows
  double lp = discretized_gaussian_logpmf_value(x, m, s);
  CHECK(lp == doctest::Approx(std::log(1e-12)).epsilon(1e-12));
  CHECK(counters().discretized_floor_hits.load() > 0);
}

TEST_CASE("discretized gaussian rejects observations off the grid") {
  Mat x(1, 1, 0.5);  // not a multiple of 1/255
  Mat m(1, 1, 0.5), s(1, 1, 0.1);
  CHECK_THROWS_AS(discretized_gaussian_logpmf_value(x, m, s), Error);
}

TEST_CASE("fresh encoder maps any input to mu=0 and sigma=softplus(0)") {
  WarmStartModel w = WarmStartModel::make(5, 3, {8, 8}, RngStream(3));
  RngStream rng(77);
  Mat x(4, 5);
  for (auto& v : x.a) v = rng.normal();
  Mat mu, sigma;
  w.encode_values(x, mu, sigma);
  const double sp0 = std::log(2.0) / kSoftplusBeta;
  for (double v : mu.a) CHECK(v == 0.0);
  for (double v : sigma.a) CHECK(v == doctest::Approx(sp0).epsilon(1e-14));
}

TEST_CASE("encode is deterministic") {
  WarmStartModel w = WarmStartModel::make(4, 2, {6}, RngStream(9));
  // give the head nonzero weights
  RngStream rng(10);
  for (auto& v : w.params.get("enc.head_w").mutable_data()) v = rng.normal();
  Mat x(3, 4);
  for (auto& v : x.a) v = rng.normal();
  Mat mu1, s1, mu2, s2;
  w.encode_values(x, mu1, s1);
  w.encode_values(x, mu2, s2);
  CHECK(mu1.a == mu2.a);
  CHECK(s1.a == s2.a);
}

TEST_CASE("encoder mean jacobian matches finite differences") {
  WarmStartModel w = WarmStartModel::make(3, 2, {5}, RngStream(13));
  RngStream rng(14);
  for (auto& v : w.params.get("enc.head_w").mutable_data()) v = 0.3 * rng.normal();
  Mat x(2, 3);
  for (auto& v : x.a) v = rng.normal();

  // scalar probe: sum of mu outputs
  auto probe = [&](const ParamSet&) {
    Mat mu, sigma;
    w.encode_values(x, mu, sigma);
    double s = 0.0;
    for (double v : mu.a) s += v;
    return s;
  };
  auto f = [&](const ParamSet&) {
    auto e = w.encode(Tensor::from_mat(x));
    return sum(e.mu);
  };
  auto res = value_and_grad(f, w.params);
  auto fd = testutil::finite_diff_params(probe, w.params);
  CHECK(testutil::rel_error_params(res.grads, fd) < 1e-4);
}

TEST_CASE("encoder sigma stays positive over many random parameter draws") {
  RngStream rng(15);
  std::int64_t checked = 0;
  for (int model_idx = 0; model_idx < 400; ++model_idx) {
    WarmStartModel w = WarmStartModel::make(6, 4, {10}, RngStream(1000 + model_idx));
    // randomize the head too (zero-init otherwise)
    for (auto& v : w.params.get("enc.head_w").mutable_data()) {
      v = 2.0 * rng.normal();
    }
    for (auto& v : w.params.get("enc.head_b").mutable_data()) {
      v = 2.0 * rng.normal();
    }
    Mat x(8, 6);
    for (auto& v : x.a) v = 3.0 * rng.normal();
    Mat mu, sigma;
    w.encode_values(x, mu, sigma);
    for (double s : sigma.a) {
      CHECK(s > 0.0);
      ++checked;
    }
  }
  CHECK(checked == 400 * 8 * 4);
}

TEST_CASE("log_q closed form and permutation symmetry") {
  WarmStartModel w = WarmStartModel::make(3, 3, {}, RngStream(17));
  RngStream rng(18);
  for (auto& v : w.params.get("enc.head_w").mutable_data()) v = 0.4 * rng.normal();
  for (auto& v : w.params.get("enc.head_b").mutable_data()) v = 0.2 * rng.normal();

  Mat x(1, 3);
  for (auto& v : x.a) v = rng.normal();
  Mat mu, sigma;
  w.encode_values(x, mu, sigma);

  SUBCASE("value matches the independent density oracle") {
    for (int trial = 0; trial < 20; ++trial) {
      Mat z(1, 3);
      for (auto& v : z.a) v = rng.normal();
      double oracle = 0.0;
      for (std::int64_t j = 0; j < 3; ++j) {
        oracle += testutil::gauss_logpdf(z.at(0, j), mu.at(0, j), sigma.at(0, j));
      }
      CHECK(log_q(w, x, z) == doctest::Approx(oracle).epsilon(1e-10));
    }
  }

  SUBCASE("mu == z gives the entropy-like value") {
    Mat z = mu;
    double expected = 0.0;
    for (std::int64_t j = 0; j < 3; ++j) {
      expected += -0.5 * std::log(2.0 * std::numbers::pi *
                                  sigma.at(0, j) * sigma.at(0, j));
    }
    CHECK(log_q(w, x, z) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("reparam_sample basics") {
  WarmStartModel w = WarmStartModel::make(3, 2, {4}, RngStream(19));
  RngStream rng(20);
  for (auto& v : w.params.get("enc.head_w").mutable_data()) v = 0.5 * rng.normal();
  for (auto& v : w.params.get("enc.head_b").mutable_data()) v = 0.5 * rng.normal();
  Mat x(1, 3);
  for (auto& v : x.a) v = rng.normal();
  Mat mu, sigma;
  w.encode_values(x, mu, sigma);

  SUBCASE("eps = 0 returns mu") {
    w.params.set_requires_grad(false);
    Tensor z = reparam_sample(w, Tensor::from_mat(x), Tensor::zeros({1, 2}));
    w.params.set_requires_grad(true);
    CHECK(z.data()[0] == doctest::Approx(mu.at(0, 0)).epsilon(1e-14));
    CHECK(z.data()[1] == doctest::Approx(mu.at(0, 1)).epsilon(1e-14));
  }

  SUBCASE("Monte Carlo mean approaches mu") {
    const int n = 100000;
    w.params.set_requires_grad(false);
    double acc0 = 0.0;
    RngStream es(303);
    for (int i = 0; i < n; ++i) {
      Mat eps(1, 2);
      for (auto& v : eps.a) v = es.normal();
      Tensor z = reparam_sample(w, Tensor::from_mat(x), Tensor::from_mat(eps));
      acc0 += z.data()[0];
    }
    w.params.set_requires_grad(true);
    double se = 3.0 * sigma.at(0, 0) / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(acc0 / n - mu.at(0, 0)) < se);
  }

  SUBCASE("gradient through the sample matches finite differences") {
    Mat eps(1, 2);
    RngStream es(304);
    for (auto& v : eps.a) v = es.normal();
    auto f = [&](const ParamSet&) {
      return sum(reparam_sample(w, Tensor::from_mat(x), Tensor::from_mat(eps)));
    };
    auto res = value_and_grad(f, w.params);
    auto fd = testutil::finite_diff_params(
        [&](const ParamSet&) {
          auto& p = const_cast<ParamSet&>(w.params);
          p.set_requires_grad(false);
          Tensor z = reparam_sample(w, Tensor::from_mat(x), Tensor::from_mat(eps));
          p.set_requires_grad(true);
          double s = 0.0;
          for (double v : z.data()) s += v;
          return s;
        },
        w.params);
    CHECK(testutil::rel_error_params(res.grads, fd) < 1e-4);
  }
}

TEST_CASE("ancestral sampling") {
  SUBCASE("identity decoder with tiny scale recovers the prior") {
    Mat w = identity(2);
    GenerativeModel m = linear_gaussian_model(w, {0.0, 0.0}, 1e-6);
    Mat xs = ancestral_sample(m, 20000, RngStream(5));
    std::vector<double> col0;
    for (std::int64_t i = 0; i < xs.rows; ++i) col0.push_back(xs.at(i, 0));
    CHECK(std::abs(testutil::mean_of(col0)) < 3.0 / std::sqrt(20000.0));
    CHECK(testutil::variance_of(col0) == doctest::Approx(1.0).epsilon(0.05));
  }

  SUBCASE("count zero yields an empty set") {
    GenerativeModel m = GenerativeModel::make(
        2, 2, {}, Likelihood::kDiagonalGaussian, RngStream(1));
    Mat xs = ancestral_sample(m, 0, RngStream(5));
    CHECK(xs.rows == 0);
  }

  SUBCASE("fixed seed gives bit-identical output") {
    GenerativeModel m = GenerativeModel::make(
        3, 2, {6}, Likelihood::kDiagonalGaussian, RngStream(2));
    Mat a = ancestral_sample(m, 64, RngStream(42));
    Mat b = ancestral_sample(m, 64, RngStream(42));
    CHECK(a.a == b.a);
  }

  SUBCASE("discretized likelihood emits grid values") {
    GenerativeModel m = GenerativeModel::make(
        4, 2, {6}, Likelihood::kDiscretizedGaussian, RngStream(3));
    Mat xs = ancestral_sample(m, 32, RngStream(9));
    for (double v : xs.a) {
      double level = v * 255.0;
      CHECK(std::abs(level - std::round(level)) < 1e-9);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  GenerativeModel m = GenerativeModel::make(
      4, 3, {7}, Likelihood::kDiagonalGaussian, RngStream(23));
  WarmStartModel w = WarmStartModel::make(4, 3, {7}, RngStream(24));
  RngStream rng(25);
  for (auto& v : w.params.get("enc.head_w").mutable_data()) v = rng.normal();

  Checkpoint ckpt;
  ckpt.add_param_set("gen", m.params);
  ckpt.add_param_set("warm", w.params);
  ckpt.add_scalar("meta.epoch", 3.0);

  std::string path = "/tmp/lpc_models_test.ckpt";
  ckpt.save(path);
  Checkpoint loaded = Checkpoint::load(path);

  GenerativeModel m2 = GenerativeModel::make(
      4, 3, {7}, Likelihood::kDiagonalGaussian, RngStream(999));
  loaded.load_param_set("gen", m2.params);
  for (const auto& [name, t] : m.params) {
    CHECK(t.data() == m2.params.get(name).data());
  }
  CHECK(loaded.get_scalar("meta.epoch") == 3.0);

  // writing again produces identical bytes
  std::string path2 = "/tmp/lpc_models_test2.ckpt";
  loaded.save(path2);
  auto slurp = [](const std::string& p) {
    FILE* f = std::fopen(p.c_str(), "rb");
    REQUIRE(f != nullptr);
    std::string bytes;
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) bytes.append(buf, got);
    std::fclose(f);
    return bytes;
  };
  CHECK(slurp(path) == slurp(path2));
  std::remove(path.c_str());
  std::remove(path2.c_str());
}
