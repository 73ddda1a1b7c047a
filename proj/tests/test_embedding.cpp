#include <doctest.h>

#include <cmath>

#include "aetransfer/embedding.hpp"
#include "aetransfer/error.hpp"
#include "aetransfer/esvm.hpp"
#include "aetransfer/random.hpp"
#include "aetransfer/oracle.hpp"
#include "aetransfer/synth.hpp"
#include "support.hpp"

using namespace aetransfer;
using test_support::random_matrix;
using test_support::random_vector;

TEST_SUITE("embedding") {
  TEST_CASE("exact rank-d matrix is reproduced") {
    Rng rng(1);
    const Eigen::MatrixXd a = random_matrix(rng, 40, 3) * random_matrix(rng, 3, 15);
    const auto fit = fit_embedding(a, 3, "f");
    CHECK((fit.u * fit.model.v().transpose() - a).norm() <= 1e-10 * a.norm());
  }

  TEST_CASE("Frobenius error equals the discarded spectrum from the eigen oracle") {
    Rng rng(2);
    const Eigen::MatrixXd a = random_matrix(rng, 50, 20);
    const auto fit = fit_embedding(a, 5, "f");
    const double error = (fit.u * fit.model.v().transpose() - a).norm();
    CHECK(std::abs(error - oracle::truncation_error_eig(a, 5)) <= 1e-8);
    const Eigen::VectorXd oracle_values = oracle::singular_values_eig(a);
    CHECK((fit.singular_values - oracle_values).cwiseAbs().maxCoeff() <= 1e-8);
  }

  TEST_CASE("U has orthonormal columns and V carries the singular values") {
    Rng rng(3);
    const Eigen::MatrixXd a = random_matrix(rng, 30, 12);
    const auto fit = fit_embedding(a, 4, "f");
    CHECK((fit.u.transpose() * fit.u - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-8);
    const Eigen::MatrixXd vtv = fit.model.v().transpose() * fit.model.v();
    for (Eigen::Index j = 0; j < 4; ++j) {
      CHECK(std::sqrt(vtv(j, j)) == doctest::Approx(fit.singular_values(j)).epsilon(1e-10));
      for (Eigen::Index k = 0; k < 4; ++k)
        if (k != j) CHECK(std::abs(vtv(j, k)) <= 1e-8 * fit.singular_values(0) * fit.singular_values(0));
    }
  }

  TEST_CASE("sign rule makes the largest-magnitude entry of each exemplar factor positive") {
    Rng rng(4);
    const Eigen::MatrixXd a = random_matrix(rng, 25, 10);
    const auto fit = fit_embedding(a, 3, "f");
    for (Eigen::Index j = 0; j < 3; ++j) {
      Eigen::Index pivot = 0;
      fit.model.v().col(j).cwiseAbs().maxCoeff(&pivot);
      CHECK(fit.model.v()(pivot, j) > 0.0);
    }
    const auto again = fit_embedding(a, 3, "f");
    CHECK(again.u == fit.u);
    CHECK(again.model == fit.model);
    // Flipping the input's sign flips U but leaves V's orientation fixed.
    const auto flipped = fit_embedding(-a, 3, "f");
    CHECK((flipped.model.v() - fit.model.v()).cwiseAbs().maxCoeff() <= 1e-10);
  }

  TEST_CASE("beats random rank-d factorizations") {
    Rng rng(5);
    const Eigen::MatrixXd a = random_matrix(rng, 40, 15);
    const auto fit = fit_embedding(a, 3, "f");
    const double best = (fit.u * fit.model.v().transpose() - a).norm();
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::MatrixXd u = random_matrix(rng, 40, 3);
      const Eigen::MatrixXd v = random_matrix(rng, 15, 3);
      CHECK(best <= (u * v.transpose() - a).norm());
      // Least-squares-optimal V for the random U is still no better.
      const Eigen::MatrixXd v_opt = u.colPivHouseholderQr().solve(a).transpose();
      CHECK(best <= (u * v_opt.transpose() - a).norm() + 1e-12);
    }
  }

  TEST_CASE("d outside [1, min(rows, cols)] is rejected") {
    const Eigen::MatrixXd a = Eigen::MatrixXd::Ones(5, 3);
    CHECK_THROWS_AS(fit_embedding(a, 0, "f"), ConfigError);
    CHECK_THROWS_AS(fit_embedding(a, 4, "f"), ConfigError);
  }

}

TEST_SUITE("embedding") {
  TEST_CASE("embedding a fitted row returns the matching row of U") {
    Rng rng(6);
    const Eigen::MatrixXd a = random_matrix(rng, 30, 3) * random_matrix(rng, 3, 12);
    const auto fit = fit_embedding(a, 3, "f");
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      CHECK((embed_window(a.row(r).transpose(), fit.model) - fit.u.row(r).transpose()).cwiseAbs().maxCoeff() <= 1e-8);
  }

  TEST_CASE("zero maps to zero and exact preimages are recovered") {
    Rng rng(7);
    const auto fit = fit_embedding(random_matrix(rng, 20, 10), 3, "f");
    CHECK(embed_window(Eigen::VectorXd::Zero(10), fit.model).cwiseAbs().maxCoeff() == 0.0);
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::VectorXd u0 = random_vector(rng, 3, 5.0);
      const Eigen::VectorXd a = fit.model.v() * u0;
      CHECK((embed_window(a, fit.model) - u0).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }

  TEST_CASE("embedding is linear") {
    Rng rng(8);
    const auto fit = fit_embedding(random_matrix(rng, 20, 10), 3, "f");
    const Eigen::VectorXd a = random_vector(rng, 10);
    const Eigen::VectorXd b = random_vector(rng, 10);
    const Eigen::VectorXd lhs = embed_window(2.5 * a - 0.75 * b, fit.model);
    const Eigen::VectorXd rhs = 2.5 * embed_window(a, fit.model) - 0.75 * embed_window(b, fit.model);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-8);
  }

  TEST_CASE("rank-deficient V refuses to embed") {
    Eigen::MatrixXd v(4, 2);
    v << 1, 2, 2, 4, 3, 6, 4, 8;
    const EmbeddingModel model("f", v);
    CHECK_FALSE(model.full_rank());
    CHECK_THROWS_AS(embed_window(Eigen::VectorXd::Ones(4), model), NumericalError);
    CHECK_THROWS_AS(embed_window(Eigen::VectorXd::Ones(4), EmbeddingModel("f", Eigen::MatrixXd::Identity(3, 2))),
                    DataError);
  }

  TEST_CASE("batch embedding matches single rows bit for bit") {
    Rng rng(9);
    const auto fit = fit_embedding(random_matrix(rng, 20, 10), 3, "f");
    const Eigen::MatrixXd rows = random_matrix(rng, 10, 10);
    const Eigen::MatrixXd all = embed_all(rows, fit.model);
    REQUIRE(all.rows() == 10);
    for (Eigen::Index r = 0; r < 10; ++r) CHECK(all.row(r) == embed_window(rows.row(r).transpose(), fit.model).transpose());
    CHECK(embed_all(Eigen::MatrixXd(0, 10), fit.model).rows() == 0);
  }

  TEST_CASE("noise-free synthetic responses have rank d_latent") {
    SynthOptions options;
    options.seed = 4;
    options.n_source = 12;
    options.n_target = 4;
    options.noise = 0.0;
    options.d_latent = 3;
    options.windows_per_image = 20;
    const Dataset data = generate_synthetic(options);
    const std::string space = data.feature_spaces.front().name;
    // The rank bound holds for any affine scorers, so random ones suffice.
    Rng rng(11);
    std::vector<ExemplarModel> models;
    for (int o = 0; o < 8; ++o) {
      ExemplarModel m;
      m.exemplar_id = "e" + std::to_string(o);
      m.feature_space = space;
      m.weights = random_vector(rng, static_cast<Eigen::Index>(data.feature_spaces.front().dim));
      m.bias = rng.normal();
      models.push_back(std::move(m));
    }
    std::vector<WindowRef> refs;
    for (std::size_t i = 0; i < data.images.size(); ++i)
      for (std::size_t w = 0; w < data.images[i].windows.size(); ++w) refs.push_back({i, w});
    const Eigen::MatrixXd a = response_matrix(data, refs, models, space).values;
    auto error = [&](Eigen::Index d) {
      const auto fit = fit_embedding(a, d, space);
      return (fit.u * fit.model.v().transpose() - a).norm() / a.norm();
    };
    CHECK(error(3) <= 1e-10);
    CHECK(error(1) >= 1e-3);
  }
}
