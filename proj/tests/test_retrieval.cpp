#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <boost/math/distributions/normal.hpp>

#include "aetransfer/error.hpp"
#include "aetransfer/oracle.hpp"
#include "aetransfer/random.hpp"
#include "aetransfer/retrieval.hpp"
#include "support.hpp"

using namespace aetransfer;
using test_support::random_matrix;

namespace {

// n evenly spaced quantiles of N(mean, sd^2), a noise-free stand-in for a sample.
Eigen::VectorXd gaussian_cloud(Eigen::Index n, double mean, double sd) {
  const boost::math::normal_distribution<double> normal(mean, sd);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i)
    v(i) = boost::math::quantile(normal, (static_cast<double>(i) + 0.5) / static_cast<double>(n));
  return v;
}

}  // namespace

TEST_SUITE("retrieval") {
  TEST_CASE("grid spans the pooled range with a Silverman bandwidth") {
    Rng rng(41);
    const Eigen::MatrixXd pooled = random_matrix(rng, 400, 3, 2.0);
    const SignatureGrid grid = make_signature_grid(pooled);
    CHECK(grid.points == 256);
    for (Eigen::Index j = 0; j < 3; ++j) {
      const double h = grid.bandwidths(j);
      CHECK(h > 0.0);
      CHECK(grid.lower(j) == doctest::Approx(pooled.col(j).minCoeff() - 3.0 * h));
      CHECK(grid.grid_point(j, 255) == doctest::Approx(pooled.col(j).maxCoeff() + 3.0 * h));
    }
    // Constant columns still get a usable bandwidth.
    const SignatureGrid flat = make_signature_grid(Eigen::MatrixXd::Constant(10, 2, 4.0));
    CHECK(flat.bandwidths.minCoeff() > 0.0);
    CHECK(flat.step.minCoeff() > 0.0);
  }

  TEST_CASE("signatures match a naive sum of Gaussians") {
    Rng rng(42);
    const Eigen::MatrixXd pooled = random_matrix(rng, 300, 2);
    const SignatureGrid grid = make_signature_grid(pooled);
    const Eigen::MatrixXd windows = pooled.topRows(40);
    const ImageSignature sig = image_signature(windows, grid);
    REQUIRE(sig.densities.rows() == 2);
    REQUIRE(sig.densities.cols() == 256);
    CHECK(sig.grid_hash == grid.hash());
    for (Eigen::Index j = 0; j < 2; ++j) {
      Eigen::VectorXd points(256);
      for (Eigen::Index g = 0; g < 256; ++g) points(g) = grid.grid_point(j, g);
      Eigen::VectorXd naive = oracle::naive_kde(windows.col(j), grid.bandwidths(j), points);
      naive.array() += kDensityFloor;
      naive /= naive.sum() * grid.step(j);
      CHECK((sig.densities.row(j).transpose() - naive).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK(std::abs(sig.densities.row(j).sum() * grid.step(j) - 1.0) <= 1e-8);
      CHECK(sig.densities.row(j).minCoeff() > 0.0);
    }
    CHECK(image_signature(windows, grid) == sig);
    CHECK_THROWS_AS(image_signature(Eigen::MatrixXd(0, 2), grid), DataError);
    CHECK_THROWS_AS(image_signature(Eigen::MatrixXd::Zero(3, 5), grid), DataError);
  }

  TEST_CASE("single window gives a Gaussian bump at its value") {
    Rng rng(43);
    const SignatureGrid grid = make_signature_grid(random_matrix(rng, 200, 1));
    Eigen::MatrixXd one(1, 1);
    one << 0.3;
    const ImageSignature sig = image_signature(one, grid);
    Eigen::Index peak = 0;
    sig.densities.row(0).maxCoeff(&peak);
    CHECK(std::abs(grid.grid_point(0, peak) - 0.3) <= grid.step(0));
  }

  TEST_CASE("divergence is a symmetric non-negative discrepancy") {
    Rng rng(44);
    const Eigen::MatrixXd pooled = random_matrix(rng, 300, 3);
    const SignatureGrid grid = make_signature_grid(pooled);
    const ImageSignature a = image_signature(pooled.topRows(50), grid);
    const ImageSignature b = image_signature(pooled.bottomRows(50), grid);
    CHECK(image_divergence(a, a, grid) == 0.0);
    CHECK(image_divergence(a, b, grid) > 1e-10);
    CHECK(image_divergence(a, b, grid) == image_divergence(b, a, grid));

    ImageSignature other_grid = b;
    other_grid.grid_hash ^= 1;
    CHECK_THROWS_AS(image_divergence(a, other_grid, grid), DataError);
  }

  TEST_CASE("divergence of Gaussian clouds follows the closed form") {
    const Eigen::Index n = 20000;
    for (double separation : {0.5, 1.0, 2.0}) {
      Eigen::MatrixXd pooled(2 * n, 1);
      pooled << gaussian_cloud(n, 0.0, 1.0), gaussian_cloud(n, separation, 1.0);
      const SignatureGrid grid = make_signature_grid(pooled);
      const ImageSignature p = image_signature(pooled.topRows(n), grid);
      const ImageSignature q = image_signature(pooled.bottomRows(n), grid);
      // The KDE of a unit Gaussian cloud is N(mean, 1 + h^2).
      const double sd = std::sqrt(1.0 + grid.bandwidths(0) * grid.bandwidths(0));
      const double closed = oracle::symmetric_gaussian_kl(0.0, sd, separation, sd);
      CHECK(std::abs(image_divergence(p, q, grid) - closed) <= 0.05 * closed);
    }
  }

  TEST_CASE("divergence grows with separation") {
    const Eigen::Index n = 2000;
    Eigen::MatrixXd pooled(3 * n, 1);
    pooled << gaussian_cloud(n, 0.0, 1.0), gaussian_cloud(n, 1.0, 1.0), gaussian_cloud(n, 2.0, 1.0);
    const SignatureGrid grid = make_signature_grid(pooled);
    const ImageSignature s0 = image_signature(pooled.topRows(n), grid);
    const ImageSignature s1 = image_signature(pooled.middleRows(n, n), grid);
    const ImageSignature s2 = image_signature(pooled.bottomRows(n), grid);
    CHECK(image_divergence(s0, s2, grid) > image_divergence(s0, s1, grid));
  }

  TEST_CASE("top-k agrees with an exhaustive ranking") {
    Rng rng(45);
    std::vector<Eigen::MatrixXd> clouds;
    Eigen::MatrixXd pooled(0, 2);
    for (int i = 0; i < 21; ++i) {
      Eigen::MatrixXd cloud = random_matrix(rng, 30, 2);
      cloud.col(0).array() += rng.uniform(-2.0, 2.0);
      cloud.col(1) *= rng.uniform(0.5, 2.0);
      clouds.push_back(cloud);
      pooled.conservativeResize(pooled.rows() + 30, Eigen::NoChange);
      pooled.bottomRows(30) = cloud;
    }
    const SignatureGrid grid = make_signature_grid(pooled);
    std::vector<ImageSignature> sigs;
    for (const auto& c : clouds) sigs.push_back(image_signature(c, grid));
    std::vector<SourceSignature> sources;
    std::vector<std::pair<double, std::string>> expected;
    for (int i = 1; i < 21; ++i) {
      const std::string id = "img" + std::to_string(100 + i);
      sources.push_back({id, &sigs[static_cast<std::size_t>(i)]});
      expected.emplace_back(image_divergence(sigs[0], sigs[static_cast<std::size_t>(i)], grid), id);
    }
    std::sort(expected.begin(), expected.end());

    const Shortlist top5 = top_k_sources(sigs[0], sources, 5, grid);
    REQUIRE(top5.image_ids.size() == 5);
    CHECK_FALSE(top5.truncated);
    for (std::size_t i = 0; i < 5; ++i) CHECK(top5.image_ids[i] == expected[i].second);

    const Shortlist all = top_k_sources(sigs[0], sources, 20, grid);
    CHECK_FALSE(all.truncated);
    CHECK(std::is_sorted(all.divergences.begin(), all.divergences.end()));

    const Shortlist more = top_k_sources(sigs[0], sources, 300, grid);
    CHECK(more.truncated);
    CHECK(more.image_ids == all.image_ids);

    // Input order does not matter.
    std::reverse(sources.begin(), sources.end());
    CHECK(top_k_sources(sigs[0], sources, 20, grid).image_ids == all.image_ids);

    // An exact copy of the target ranks first.
    sources.push_back({"zzz-copy", &sigs[0]});
    CHECK(top_k_sources(sigs[0], sources, 3, grid).image_ids.front() == "zzz-copy");
    CHECK_THROWS_AS(top_k_sources(sigs[0], sources, 0, grid), ConfigError);
  }

  TEST_CASE("ties are broken by image id") {
    Rng rng(46);
    const Eigen::MatrixXd pooled = random_matrix(rng, 50, 2);
    const SignatureGrid grid = make_signature_grid(pooled);
    const ImageSignature target = image_signature(pooled.topRows(10), grid);
    const ImageSignature same = image_signature(pooled.bottomRows(10), grid);
    const std::vector<SourceSignature> sources{{"b", &same}, {"c", &same}, {"a", &same}};
    CHECK(top_k_sources(target, sources, 3, grid).image_ids == std::vector<std::string>{"a", "b", "c"});
  }

  TEST_CASE("signature cache round trip and staleness") {
    Rng rng(47);
    const auto dir = test_support::temp_dir("sigcache");
    const Eigen::MatrixXd pooled = random_matrix(rng, 60, 2);
    const SignatureGrid grid = make_signature_grid(pooled, 64);
    const ImageSignature sig = image_signature(pooled.topRows(20), grid);
    const auto path = signature_cache_path(dir, "img7", grid);
    CHECK(path.parent_path() == dir);
    CHECK(path.filename().string().rfind("img7-", 0) == 0);
    CHECK_FALSE(load_signature(path, grid).has_value());
    save_signature(path, sig);
    const auto loaded = load_signature(path, grid);
    REQUIRE(loaded.has_value());
    CHECK(*loaded == sig);

    const SignatureGrid finer = make_signature_grid(pooled, 128);
    CHECK(signature_cache_path(dir, "img7", finer) != path);
    CHECK_FALSE(load_signature(path, finer).has_value());

    std::ofstream(path, std::ios::binary | std::ios::trunc) << "AESIG001";
    CHECK_THROWS_AS(load_signature(path, grid), DataError);
  }
}
