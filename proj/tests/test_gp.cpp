#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "aetransfer/error.hpp"
#include "aetransfer/gp.hpp"
#include "aetransfer/oracle.hpp"
#include "aetransfer/random.hpp"
#include "support.hpp"

using namespace aetransfer;
using test_support::random_matrix;
using test_support::random_vector;

namespace {

KernelHyperparams hyper(Eigen::VectorXd gamma, double noise) {
  KernelHyperparams hp;
  hp.gamma = std::move(gamma);
  hp.noise_variance = noise;
  return hp;
}

Eigen::VectorXd smooth_labels(const Eigen::MatrixXd& x) {
  Eigen::VectorXd y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    y(i) = 0.5 + 0.4 * std::sin(x(i, 0)) * std::cos(0.5 * x.row(i).sum());
  return y;
}

// Gradient of the objective in log space [log gamma, log noise] by central
// differences of the LU-based oracle.
Eigen::VectorXd oracle_log_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                    const KernelHyperparams& hp, double alpha, double step) {
  const Eigen::Index dim = hp.gamma.size();
  Eigen::VectorXd theta(dim + 1);
  theta.head(dim) = hp.gamma.array().log();
  theta(dim) = std::log(hp.noise_variance);
  return oracle::central_gradient(
      [&](const Eigen::VectorXd& t) {
        return oracle::dense_nll(x, y, t.head(dim).array().exp(), std::exp(t(dim)), alpha);
      },
      theta, step);
}

bool gradients_agree(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric, double tolerance) {
  const double scale = std::max(1.0, numeric.cwiseAbs().maxCoeff());
  return (analytic - numeric).cwiseAbs().maxCoeff() <= tolerance * scale;
}

}  // namespace

TEST_SUITE("gp") {
  TEST_CASE("descriptor layout") {
    const WindowRecord full{{0, 0, 100, 50}, 1.0, std::nullopt};
    const std::vector<FeatureSpace> spaces{{"bow", 8}, {"hog", 8}};
    const std::map<std::string, Eigen::VectorXd> zero{{"bow", Eigen::VectorXd::Zero(3)},
                                                      {"hog", Eigen::VectorXd::Zero(3)}};
    const Eigen::VectorXd phi = build_descriptor(full, 100, 50, zero, spaces);
    REQUIRE(phi.size() == 11);
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(11);
    expected << 0.5, 0.5, 0, 0, 1, 0, 0, 0, 0, 0, 0;
    CHECK(phi == expected);

    const std::map<std::string, Eigen::VectorXd> blocks{{"hog", Eigen::VectorXd::Constant(3, 2.0)},
                                                        {"bow", Eigen::VectorXd::Constant(3, 1.0)}};
    const std::vector<FeatureSpace> reversed{{"hog", 8}, {"bow", 8}};
    const Eigen::VectorXd a = build_descriptor(full, 100, 50, blocks, spaces);
    CHECK(a == build_descriptor(full, 100, 50, blocks, reversed));
    CHECK(a.segment(5, 3) == Eigen::VectorXd::Constant(3, 1.0));
    CHECK(a.tail(3) == Eigen::VectorXd::Constant(3, 2.0));

    CHECK_THROWS_AS(build_descriptor(full, 100, 50, {{"bow", Eigen::VectorXd::Zero(3)}}, spaces), DataError);
  }

  TEST_CASE("kernel values") {
    const Eigen::VectorXd gamma = Eigen::VectorXd::Ones(3);
    const Eigen::VectorXd a = Eigen::Vector3d(0.2, -1.0, 3.0);
    CHECK(kernel(a, a, hyper(gamma, 0.01)) == 1.0);
    Eigen::VectorXd b = a;
    b(1) += 1.0;
    CHECK(kernel(a, b, hyper(gamma, 0.01)) == doctest::Approx(0.606531).epsilon(1e-6));
    CHECK(kernel(a, b, hyper(gamma, 0.01)) == kernel(b, a, hyper(gamma, 0.01)));

    Eigen::VectorXd scaled_gamma = gamma;
    scaled_gamma(1) = 7.5;
    Eigen::VectorXd as = a, bs = b;
    as(1) *= 7.5;
    bs(1) *= 7.5;
    CHECK(kernel(as, bs, hyper(scaled_gamma, 0.01)) == doctest::Approx(kernel(a, b, hyper(gamma, 0.01))));

    Eigen::VectorXd bad = gamma;
    bad(2) = 0.0;
    CHECK_THROWS_AS(kernel(a, b, hyper(bad, 0.01)), ConfigError);
    CHECK_THROWS_AS(kernel(a, Eigen::VectorXd::Zero(2), hyper(gamma, 0.01)), DataError);
  }

  TEST_CASE("kernel matrix matches the entrywise oracle and is PSD") {
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.below(46));
      const Eigen::MatrixXd x = random_matrix(rng, n, 4, 2.0);
      const Eigen::VectorXd gamma = (random_vector(rng, 4, 0.5)).array().exp();
      const Eigen::MatrixXd k = kernel_matrix(x, x, gamma);
      CHECK((k - oracle::se_kernel(x, x, gamma)).cwiseAbs().maxCoeff() <= 1e-14);
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
      CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
    }
  }

  TEST_CASE("exact likelihood value and gradient") {
    Rng rng(22);
    const Eigen::MatrixXd x = random_matrix(rng, 30, 4);
    const Eigen::VectorXd y = smooth_labels(x);
    for (int trial = 0; trial < 5; ++trial) {
      const auto hp = hyper((random_vector(rng, 4, 0.4)).array().exp() * 1.5, std::exp(rng.uniform(-5.0, -1.0)));
      for (double alpha : {0.0, 1.0, 100.0}) {
        const NllValue nll = nll_objective(hp, x, y, alpha);
        CHECK(test_support::relative_error(nll.value, oracle::dense_nll(x, y, hp.gamma, hp.noise_variance, alpha)) <=
              1e-10);
        CHECK(gradients_agree(nll.gradient, oracle_log_gradient(x, y, hp, alpha, 1e-5), 1e-4));
      }
    }
  }

  TEST_CASE("FITC likelihood gradient matches finite differences") {
    Rng rng(23);
    const Eigen::MatrixXd x = random_matrix(rng, 60, 3);
    const Eigen::VectorXd y = smooth_labels(x);
    const Eigen::MatrixXd pseudo = x.topRows(12);
    const auto hp = hyper(Eigen::Vector3d(0.8, 1.3, 2.0), 0.05);
    const NllValue nll = nll_objective_fitc(hp, x, y, pseudo, 100.0);
    Eigen::VectorXd theta(4);
    theta.head(3) = hp.gamma.array().log();
    theta(3) = std::log(hp.noise_variance);
    const Eigen::VectorXd numeric = oracle::central_gradient(
        [&](const Eigen::VectorXd& t) {
          return nll_objective_fitc(hyper(t.head(3).array().exp(), std::exp(t(3))), x, y, pseudo, 100.0).value;
        },
        theta, 1e-5);
    CHECK(gradients_agree(nll.gradient, numeric, 1e-4));

    // With every point a pseudo-input FITC is exact.
    const NllValue full = nll_objective_fitc(hp, x, y, x, 100.0);
    CHECK(test_support::relative_error(full.value, nll_objective(hp, x, y, 100.0).value) <= 1e-6);
  }

  TEST_CASE("exact posterior matches the dense oracle") {
    Rng rng(24);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::MatrixXd x = random_matrix(rng, 5, 3);
      Eigen::VectorXd y(5);
      for (Eigen::Index i = 0; i < 5; ++i) y(i) = rng.uniform();
      const Eigen::VectorXd gamma = (random_vector(rng, 3, 0.3)).array().exp();
      const double noise = std::exp(rng.uniform(-6.0, -1.0));
      const GpModel model(hyper(gamma, noise), x, y);
      const Eigen::VectorXd target = random_vector(rng, 3);
      const auto ours = posterior_exact(target, model);
      const auto dense = oracle::dense_gp(x, y, gamma, noise, target);
      CHECK(std::abs(ours.mu - dense.mu) <= 1e-10);
      CHECK(std::abs(ours.sigma * ours.sigma - dense.variance) <= 1e-10);
    }
  }

  TEST_CASE("interpolation, prior reversion and variance bound") {
    Rng rng(25);
    const Eigen::MatrixXd x = random_matrix(rng, 20, 3, 3.0);
    Eigen::VectorXd y(20);
    for (Eigen::Index i = 0; i < 20; ++i) y(i) = rng.uniform();
    const GpModel tight(hyper(Eigen::VectorXd::Constant(3, 0.7), 1e-10), x, y);
    for (Eigen::Index i = 0; i < 20; ++i) {
      const auto p = posterior_exact(x.row(i).transpose(), tight);
      CHECK(std::abs(p.mu - y(i)) <= 1e-4);
      CHECK(p.sigma * p.sigma < 1e-4);
    }
    const auto far = posterior_exact(Eigen::VectorXd::Constant(3, 1e4), tight);
    CHECK(std::abs(far.mu) <= 1e-12);
    CHECK(far.sigma * far.sigma == doctest::Approx(1.0).epsilon(1e-12));

    const GpModel loose(hyper(Eigen::VectorXd::Constant(3, 1.5), 0.05), x, y);
    for (int t = 0; t < 200; ++t) {
      const auto p = posterior_exact(random_vector(rng, 3, 3.0), loose);
      CHECK(p.sigma >= 0.0);
      CHECK(p.sigma * p.sigma <= 1.0 + 1e-12);
    }
  }

  TEST_CASE("adding an inducing point never increases the variance") {
    Rng rng(26);
    const Eigen::VectorXd gamma = Eigen::VectorXd::Constant(2, 1.0);
    Eigen::MatrixXd x = random_matrix(rng, 1, 2, 2.0);
    Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 0.5);
    const Eigen::MatrixXd targets = random_matrix(rng, 50, 2, 2.0);
    Eigen::VectorXd previous(50);
    for (Eigen::Index t = 0; t < 50; ++t)
      previous(t) = std::pow(posterior_exact(targets.row(t).transpose(), GpModel(hyper(gamma, 1e-6), x, y)).sigma, 2);
    for (int added = 0; added < 15; ++added) {
      x.conservativeResize(x.rows() + 1, Eigen::NoChange);
      x.row(x.rows() - 1) = random_vector(rng, 2, 2.0).transpose();
      y.conservativeResize(y.size() + 1);
      y(y.size() - 1) = rng.uniform();
      const GpModel model(hyper(gamma, 1e-6), x, y);
      for (Eigen::Index t = 0; t < 50; ++t) {
        const double var = std::pow(posterior_exact(targets.row(t).transpose(), model).sigma, 2);
        CHECK(var <= previous(t) + 1e-8);
        previous(t) = var;
      }
    }
  }

  TEST_CASE("sparse posterior with every point as pseudo-input is exact") {
    Rng rng(27);
    const Eigen::MatrixXd x = random_matrix(rng, 200, 4);
    const GpModel model(hyper(Eigen::Vector4d(1.0, 1.5, 2.0, 0.8), 0.01), x, smooth_labels(x));
    for (int t = 0; t < 20; ++t) {
      const Eigen::VectorXd target = random_vector(rng, 4);
      const auto exact = posterior_exact(target, model);
      const auto sparse = posterior_sparse(target, model, 200, 5);
      CHECK(std::abs(exact.mu - sparse.mu) <= 1e-8);
      CHECK(std::abs(exact.sigma * exact.sigma - sparse.sigma * sparse.sigma) <= 1e-8);
    }
    CHECK_THROWS_AS(posterior_sparse(x.row(0).transpose(), model, 0, 5), ConfigError);
    CHECK_THROWS_AS(posterior_sparse(x.row(0).transpose(), model, 201, 5), ConfigError);
  }

  TEST_CASE("one pseudo-input at the target follows the closed form") {
    // Target at the origin labelled 0.8, the others far away.
    Eigen::MatrixXd x(4, 2);
    x << 0, 0, 0.5, 0.1, 9, 9, -8, 7;
    const Eigen::VectorXd y = Eigen::Vector4d(0.8, 0.3, 0.1, 0.1);
    const double noise = 0.01;
    const Eigen::VectorXd gamma = Eigen::Vector2d(1.0, 1.0);
    const Eigen::MatrixXd k = oracle::se_kernel(x, x.topRows(1), gamma);  // K_fu, K_uu = 1
    double num = 0.0, den = 1.0;
    for (Eigen::Index i = 0; i < 4; ++i) {
      const double g = 1.0 - k(i, 0) * k(i, 0) + noise;
      num += k(i, 0) * y(i) / g;
      den += k(i, 0) * k(i, 0) / g;
    }
    const FitcPredictor fitc(hyper(gamma, noise), x, y, {0});
    const auto p = fitc.predict(Eigen::Vector2d(0.0, 0.0));
    CHECK(p.mu == doctest::Approx(num / den).epsilon(1e-12));
    CHECK(p.sigma * p.sigma == doctest::Approx(1.0 / den).epsilon(1e-10));
    CHECK(std::abs(p.mu - 0.8) < 0.05);
  }

  TEST_CASE("sparse posterior with 100 of 500 pseudo-inputs stays close to exact") {
    Rng rng(28);
    const Eigen::MatrixXd x = random_matrix(rng, 500, 3);
    const GpModel model(hyper(Eigen::Vector3d(1.2, 1.2, 1.2), 0.01), x, smooth_labels(x));
    const FitcPredictor fitc(model, Rng(29).sample_indices(500, 100));
    double deviation = 0.0;
    for (Eigen::Index t = 0; t < 200; ++t) {
      const Eigen::VectorXd target = random_vector(rng, 3);
      deviation += std::abs(fitc.predict(target).mu - posterior_exact(target, model).mu);
    }
    deviation /= 200.0;
    MESSAGE("mean |mu_fitc - mu_exact| = " << deviation);
    CHECK(deviation < 0.05);
  }

  TEST_CASE("quantile score") {
    CHECK(beta(0.5) == 0.0);
    CHECK(score({0.42, 0.3}, 0.5) == 0.42);
    CHECK(score({0.7, 0.1}, 0.8) == doctest::Approx(0.615838).epsilon(1e-6));
    CHECK(beta(0.8) == doctest::Approx(-0.841621).epsilon(1e-6));
    for (double lambda : {0.01, 0.3, 0.5, 0.9, 0.99}) CHECK(score({0.33, 0.0}, lambda) == 0.33);
    double previous = std::numeric_limits<double>::infinity();
    for (int i = 1; i < 100; ++i) {
      const double value = score({0.5, 0.2}, i / 100.0);
      CHECK(value < previous);
      previous = value;
    }
    for (double lambda : {0.0, 1.0, -0.1, 1.5, std::nan("")})
      CHECK_THROWS_AS(score({0.5, 0.1}, lambda), ConfigError);
  }

  TEST_CASE("fitting never ends above its starting objective") {
    Rng rng(30);
    const Eigen::MatrixXd x = random_matrix(rng, 150, 3);
    Eigen::VectorXd y = smooth_labels(x);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += 0.05 * rng.normal();
    GpFitOptions options;
    options.seed = 3;
    const auto fit = fit_hyperparameters(x, y, options);
    CHECK(fit.final_objective <= fit.initial_objective);
    CHECK_FALSE(fit.used_fitc);
    CHECK(fit.final_objective ==
          doctest::Approx(nll_objective(fit.hyperparams, x, y, options.alpha).value).epsilon(1e-10));
    const auto again = fit_hyperparameters(x, y, options);
    CHECK(again.hyperparams == fit.hyperparams);

    options.exact_limit = 100;
    options.pseudo_inputs = 40;
    const auto sparse = fit_hyperparameters(x, y, options);
    CHECK(sparse.used_fitc);
    CHECK(sparse.final_objective <= sparse.initial_objective);
    CHECK_THROWS_AS(fit_hyperparameters(x.topRows(1), y.head(1), options), DataError);
  }

  TEST_CASE("length-scales of a known GP are recovered") {
    // Draw a sample path of a GP with known length-scales, then refit at alpha = 0.
    Rng rng(31);
    const Eigen::Index n = 2000;
    Eigen::MatrixXd x(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) x.row(i) << rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0);
    const Eigen::Vector2d truth(0.7, 1.6);
    const double noise = 0.01;
    Eigen::MatrixXd k = kernel_matrix(x, x, truth);
    k.diagonal().array() += noise;
    const Eigen::LLT<Eigen::MatrixXd> llt(k);
    REQUIRE(llt.info() == Eigen::Success);
    const Eigen::VectorXd y = llt.matrixL() * random_vector(rng, n);

    GpFitOptions options;
    options.alpha = 0.0;
    options.exact_limit = static_cast<std::size_t>(n);
    const auto fit = fit_hyperparameters(x, y, options);
    MESSAGE("recovered gamma = " << fit.hyperparams.gamma.transpose() << ", noise = " << fit.hyperparams.noise_variance);
    for (Eigen::Index j = 0; j < 2; ++j)
      CHECK(std::abs(fit.hyperparams.gamma(j) - truth(j)) <= 0.2 * truth(j));
  }

  TEST_CASE("constant labels drive the noise to its lower bound") {
    Rng rng(32);
    const Eigen::MatrixXd x = random_matrix(rng, 60, 2);
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(60, 0.4);
    GpFitOptions options;
    options.alpha = 0.0;
    const auto fit = fit_hyperparameters(x, y, options);
    CHECK(fit.hyperparams.noise_variance <= 10.0 * options.noise_min);
    // Degenerate limit: 1/2 (n - 1) log(2 pi noise_min) plus O(log n) terms.
    const double floor = 0.5 * 59.0 * std::log(2.0 * std::numbers::pi * options.noise_min);
    CHECK(fit.final_objective <= floor + 0.5 * 59.0 * std::log(10.0) + 10.0);
  }

  TEST_CASE("a large regularizer drives the length-scales to their lower bound") {
    Rng rng(33);
    const Eigen::MatrixXd x = random_matrix(rng, 80, 3);
    GpFitOptions options;
    options.alpha = 1e8;
    const auto fit = fit_hyperparameters(x, smooth_labels(x), options);
    // The bounds are reached asymptotically through the sigmoid reparametrization.
    CHECK(fit.hyperparams.gamma.maxCoeff() <= 3.0 * options.gamma_min);
    CHECK(fit.final_objective < 1e-3 * fit.initial_objective);
  }
}
