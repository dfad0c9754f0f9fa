//  Copyright 2026 The traitalign Authors. All Rights Reserved.
//
//  Licensed under the Apache License, Version 2.0 (the "License");
//  you may not use this file except in compliance with the License.
//  You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "support.hpp"
#include "traitalign/projection.hpp"

using namespace traitalign;
using traitalign::testing::random_matrix;

namespace {

double max_distance_change(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < a.rows(); ++j) {
      worst = std::max(worst, std::abs((a.row(i) - a.row(j)).norm() - (b.row(i) - b.row(j)).norm()));
    }
  }
  return worst;
}

// Two Gaussian blobs `gap` apart along the first axis.
Matrix blobs(Eigen::Index per_group, Eigen::Index dim, double gap, Rng& rng,
             std::vector<std::string>* groups) {
  Matrix m = random_matrix(2 * per_group, dim, rng);
  m.bottomRows(per_group).col(0).array() += gap;
  if (groups) {
    groups->assign(static_cast<std::size_t>(per_group), "en");
    groups->resize(static_cast<std::size_t>(2 * per_group), "es");
  }
  return m;
}

}  // namespace

TEST_CASE("pca_2d") {
  Rng rng(1);
  SUBCASE("planar input keeps every pairwise distance") {
    for (int trial = 0; trial < 10; ++trial) {
      const Matrix x = random_matrix(25, 2, rng);
      CHECK(max_distance_change(x, pca_2d(x)) < 1e-8);
    }
  }
  SUBCASE("a plane embedded in five dimensions") {
    const Matrix flat = random_matrix(30, 2, rng);
    Matrix x = Matrix::Zero(30, 5);
    x.leftCols(2) = flat;
    x = x * random_orthogonal(5, rng).transpose();
    x.rowwise() += random_matrix(1, 5, rng).row(0);
    CHECK(max_distance_change(flat, pca_2d(x)) < 1e-8);
  }
  SUBCASE("centred, variance-ordered, translation and sign conventions") {
    const Matrix x = random_matrix(40, 6, rng);
    const Matrix p = pca_2d(x);
    CHECK(p.colwise().mean().norm() < 1e-12);
    const Vector var = p.colwise().squaredNorm().transpose();
    CHECK(var(0) >= var(1));
    Matrix shifted = x;
    shifted.rowwise() += random_matrix(1, 6, rng).row(0);
    CHECK((pca_2d(shifted) - p).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((pca_2d(-x) + p).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(pca_2d(Matrix::Ones(1, 3)), ValueError);
    CHECK_THROWS_AS(pca_2d(Matrix::Ones(5, 1)), ValueError);
  }
}

TEST_CASE("tsne_2d") {
  Rng rng(2);
  std::vector<std::string> groups;
  const Matrix x = blobs(20, 5, 12.0, rng, &groups);
  TsneConfig cfg;
  cfg.perplexity = 10.0;

  const auto a = tsne_2d(x, cfg);
  SUBCASE("bit-reproducible for a fixed seed") {
    const auto b = tsne_2d(x, cfg);
    CHECK(a.coords == b.coords);
    CHECK(a.kl_divergence == b.kl_divergence);
    cfg.seed = 2;
    CHECK(tsne_2d(x, cfg).coords != a.coords);
  }
  SUBCASE("separated clusters stay separated") {
    CHECK(a.coords.rows() == 40);
    CHECK(a.coords.allFinite());
    CHECK(a.kl_divergence >= 0.0);
    CHECK(a.perplexity_used == 10.0);
    CHECK(centroid_separation(a.coords, groups) > 3.0);
  }
  SUBCASE("perplexity is capped for small inputs") {
    cfg.perplexity = 30.0;
    const auto small = tsne_2d(x.topRows(10), cfg);
    CHECK(small.perplexity_used == doctest::Approx(3.0));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(tsne_2d(x.topRows(3), cfg), ValueError);
    cfg.perplexity = 0.0;
    CHECK_THROWS_AS(tsne_2d(x, cfg), ConfigError);
  }
}

TEST_CASE("centroid_separation") {
  Matrix m(4, 2);
  m << 0, 0, 0, 2, 10, 0, 10, 2;
  const std::vector<std::string> g{"a", "a", "b", "b"};
  // Centroids (0, 1) and (10, 1); every point is 1 from its centroid.
  CHECK(centroid_separation(m, g) == doctest::Approx(10.0).epsilon(1e-14));

  Rng rng(3);
  std::vector<std::string> groups;
  const Matrix x = blobs(15, 4, 3.0, rng, &groups);
  const double s = centroid_separation(x, groups);
  CHECK(centroid_separation(7.5 * x, groups) == doctest::Approx(s).epsilon(1e-12));
  CHECK(centroid_separation(x * random_orthogonal(4, rng), groups) == doctest::Approx(s).epsilon(1e-12));
  // Pulling the groups apart raises the score.
  CHECK(centroid_separation(blobs(15, 4, 8.0, rng, nullptr), groups) > s);

  CHECK_THROWS_AS(centroid_separation(m, {"a", "a", "a", "a"}), ValueError);
  CHECK_THROWS_AS(centroid_separation(m, {"a", "b"}), ValueError);
  Matrix single(2, 2);
  single << 0, 0, 1, 1;
  CHECK_THROWS_AS(centroid_separation(single, {"a", "b"}), ValueError);
}

TEST_CASE("projection_csv") {
  Matrix c(3, 2);
  c << 0.5, -1.25, 0, 1e-3, 2, 3;
  const std::string csv =
      projection_csv({{"plain", "en"}, {"a,b", "es"}, {"say \"hi\"", "it"}}, c);
  CHECK(csv ==
        "word,language,x,y\n"
        "plain,en,0.5,-1.25\n"
        "\"a,b\",es,0,0.001\n"
        "\"say \"\"hi\"\"\",it,2,3\n");
  CHECK_THROWS_AS(projection_csv({{"x", "en"}}, c), ValueError);
}
