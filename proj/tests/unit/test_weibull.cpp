#include <doctest.h>

#include <cmath>
#include <random>

#include "mcox/moments.hpp"
#include "mcox/weibull_aft.hpp"
#include "oracles.hpp"

using namespace mcox;
using Eigen::VectorXd;

namespace {

struct AftSample {
  RowMatrix x;
  std::vector<double> y;
  std::vector<std::uint8_t> delta;
};

// log T = a + g'x + sigma W with W standard minimum extreme value.
AftSample weibull_sample(std::size_t n, double a, const VectorXd& g, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AftSample s{RowMatrix(static_cast<Eigen::Index>(n), g.size()), {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    double lin = a;
    for (Eigen::Index j = 0; j < g.size(); ++j) {
      s.x(static_cast<Eigen::Index>(i), j) = z(rng);
      lin += g[j] * s.x(static_cast<Eigen::Index>(i), j);
    }
    const double w = std::log(-std::log(1.0 - u(rng)));
    const double t = std::exp(lin + sigma * w);
    const double c = 4.0 * u(rng);
    s.y.push_back(std::min(t, c));
    s.delta.push_back(t < c ? 1 : 0);
  }
  return s;
}

}  // namespace

TEST_SUITE("weibull") {
  TEST_CASE("gradient and hessian match finite differences") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z;
    for (int k = 0; k < 20; ++k) {
      std::vector<double> x{z(rng), z(rng)};
      const double y = std::exp(z(rng));
      const bool event = k % 2 == 0;
      VectorXd theta(4);
      theta << 0.3 * z(rng), 0.3 * z(rng), 0.3 * z(rng), 0.2 * z(rng);
      VectorXd g;
      Eigen::MatrixXd h;
      weibull_subject_loglik(theta, x, y, event, &g, &h);
      auto f = [&](const VectorXd& th) { return weibull_subject_loglik(th, x, y, event); };
      CHECK((g - oracle::fd_gradient(f, theta, 1e-6)).lpNorm<Eigen::Infinity>() < 1e-6);
      CHECK((h - oracle::fd_hessian(f, theta, 1e-4)).lpNorm<Eigen::Infinity>() < 1e-5);
    }
  }

  TEST_CASE("maximum likelihood recovers the generating parameters") {
    VectorXd g(3);
    g << 0.5, -0.3, 0.2;
    const double a = 0.4, sigma = 0.7;
    std::vector<VectorXd> fits;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const AftSample smp = weibull_sample(10000, a, g, sigma, 100 + s);
      fits.push_back(fit_weibull_aft(smp.x, smp.y, smp.delta).slopes);
    }
    const AftSample one = weibull_sample(10000, a, g, sigma, 99);
    const WeibullAftFit fit = fit_weibull_aft(one.x, one.y, one.delta);
    CHECK(fit.converged);
    for (Eigen::Index j = 0; j < 3; ++j) {
      std::vector<double> col;
      for (const auto& f : fits) col.push_back(f[j]);
      const double mc_se = std::sqrt(oracle::sample_variance(col));
      CHECK(std::abs(fit.slopes[j] - g[j]) <= 3.0 * mc_se);
    }
    CHECK(std::exp(fit.log_scale) == doctest::Approx(sigma).epsilon(0.05));
  }

  TEST_CASE("slope score matches the analytic formula") {
    const AftSample smp = weibull_sample(2000, 0.1, VectorXd::Constant(2, 0.3), 0.8, 5);
    const WeibullAftFit fit = fit_weibull_aft(smp.x, smp.y, smp.delta);
    std::vector<double> x{0.4, -1.1};
    const double y = 0.9;
    const VectorXd s = weibull_slope_score(fit, x, y, true);
    const double sigma = std::exp(fit.log_scale);
    const double z = (std::log(y) - fit.intercept - fit.slopes[0] * x[0] - fit.slopes[1] * x[1]) / sigma;
    // d/dgamma of [z - log sigma - exp(z)] is (exp(z) - 1) x / sigma.
    for (int j = 0; j < 2; ++j) CHECK(s[j] == doctest::Approx((std::exp(z) - 1.0) * x[j] / sigma).epsilon(1e-13));
    CHECK(s.allFinite());
  }
}
