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

#include <cmath>

#include "support.hpp"
#include "traitalign/models.hpp"

using namespace traitalign;
using traitalign::testing::random_matrix;
using traitalign::testing::TempDir;

namespace {

UserDocument doc(std::string lang, std::vector<std::string> tokens) {
  UserDocument d;
  d.user_id = "u";
  d.language = std::move(lang);
  d.tokens = std::move(tokens);
  return d;
}

EmbeddingTable table(std::string lang, std::vector<std::string> words, Matrix v) {
  return EmbeddingTable(std::move(lang), SpaceTag::mono(), std::move(words), std::move(v));
}

TrainConfig fast(LossKind loss) {
  TrainConfig c;
  c.epochs = 200;
  c.batch_size = 8;
  c.adam.lr = 0.05;
  c.loss = loss;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("loss values") {
  const std::vector<double> half{0.5, 0.5, 0.5}, y{1.0, 0.0, 1.0};
  CHECK(loss(LossKind::bce, half, y) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(loss(LossKind::mse, std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 4.0}) == 2.0);
  CHECK(loss(LossKind::mse, y, y) == 0.0);
  // Clamp keeps the worst case finite.
  CHECK(loss(LossKind::bce, std::vector<double>{0.0}, std::vector<double>{1.0}) ==
        doctest::Approx(-std::log(1e-9)).epsilon(1e-12));
  CHECK(parse_loss(loss_name(LossKind::mse)) == LossKind::mse);
  CHECK_THROWS_AS(loss(LossKind::bce, half, std::vector<double>{1.0}), ValueError);
}

TEST_CASE("Adam") {
  Rng rng(1);
  SUBCASE("zero gradient leaves parameters unchanged") {
    Matrix p = random_matrix(3, 4, rng);
    const Matrix before = p;
    Adam adam({0.1});
    std::vector<Matrix*> ps{&p};
    std::vector<Matrix> gs{Matrix::Zero(3, 4)};
    for (int i = 0; i < 5; ++i) adam.step(ps, gs);
    CHECK(p == before);
    CHECK(adam.steps() == 5);
  }
  SUBCASE("first step moves each coordinate by lr against the gradient sign") {
    Matrix p = Matrix::Zero(2, 2);
    Adam adam({0.01});
    std::vector<Matrix*> ps{&p};
    std::vector<Matrix> gs{random_matrix(2, 2, rng)};
    adam.step(ps, gs);
    for (Eigen::Index i = 0; i < 4; ++i) {
      const double g = gs[0].data()[i];
      // Bias-corrected m / sqrt(v) is g / |g|; epsilon perturbs it by < 1e-6.
      CHECK(p.data()[i] == doctest::Approx(-0.01 * g / (std::abs(g) + 1e-8)).epsilon(1e-12));
    }
  }
  SUBCASE("shape mismatch") {
    Matrix p = Matrix::Zero(2, 2);
    Adam adam;
    std::vector<Matrix*> ps{&p};
    std::vector<Matrix> gs{Matrix::Zero(2, 3)};
    CHECK_THROWS_AS(adam.step(ps, gs), ValueError);
  }
}

TEST_CASE("vectorize_average") {
  Matrix en(3, 2);
  en << 1, 0, 0, 1, 2, 2;
  const auto vz = FeatureVectorizer::mono({table("en", {"a", "b", "c"}, en)});

  SUBCASE("mean of known tokens, OOV skipped") {
    const auto f = vectorize_average(doc("en", {"a", "b", "zzz"}), vz);
    CHECK(f.known_tokens == 2);
    CHECK_FALSE(f.all_oov);
    CHECK(f.vector(0) == doctest::Approx(0.5));
    CHECK(f.vector(1) == doctest::Approx(0.5));
  }
  SUBCASE("all OOV is a zero vector with a flag") {
    const auto f = vectorize_average(doc("en", {"x", "y"}), vz);
    CHECK(f.all_oov);
    CHECK(f.vector.isZero());
  }
  SUBCASE("equal-length concatenation averages the averages") {
    const auto d1 = doc("en", {"a", "c"}), d2 = doc("en", {"b", "b"});
    auto both = d1;
    both.tokens.insert(both.tokens.end(), d2.tokens.begin(), d2.tokens.end());
    const Vector expect = 0.5 * (vectorize_average(d1, vz).vector + vectorize_average(d2, vz).vector);
    CHECK((vectorize_average(both, vz).vector - expect).norm() < 1e-12);
  }
  SUBCASE("unknown language") {
    CHECK_THROWS_AS(vectorize_average(doc("fr", {"a"}), vz), MissingArtifactError);
  }
}

TEST_CASE("multilingual and trait vectorizers") {
  Rng rng(2);
  const std::size_t d = 5;
  const EmbeddingTable en = table("en", {"x", "y"}, random_matrix(2, d, rng));
  const EmbeddingTable es = table("es", {"p", "q", "r"}, random_matrix(3, d, rng));
  const OrthogonalMap sem(random_orthogonal(d, rng), MapProvenance::adversarial_refined);
  TraitAlignment ta{"es", "en", {}, {}};
  for (Trait t : kTraits) ta.maps[trait_index(t)] = OrthogonalMap(random_orthogonal(d, rng), MapProvenance::adversarial);
  const std::map<std::string, OrthogonalMap> sem_maps{{"es", sem}};
  const std::map<std::string, TraitAlignment> trait_maps{{"es", ta}};
  const auto es_doc = doc("es", {"p", "r", "zz"});
  const Vector raw = 0.5 * (es.row(0) + es.row(2)).transpose();

  SUBCASE("multi maps source vectors only") {
    const auto vz = FeatureVectorizer::multi({en, es}, sem_maps, "en");
    CHECK(vz.mode() == FeatureMode::multi);
    CHECK((vectorize_average(es_doc, vz).vector - sem.matrix() * raw).norm() < 1e-10);
    CHECK((vectorize_average(doc("en", {"x"}), vz).vector - en.row(0).transpose()).norm() == 0.0);
  }
  SUBCASE("global_trait equals the pre-mapped average") {
    for (Trait t : kTraits) {
      const auto vz = FeatureVectorizer::global_trait({en, es}, sem_maps, trait_maps, "en", t);
      CHECK(vz.trait() == t);
      const Vector expect = ta.map(t).matrix() * (sem.matrix() * raw);
      CHECK((vectorize_average(es_doc, vz).vector - expect).norm() < 1e-10);
      CHECK(vz.table("en").space() == SpaceTag::of_trait(t));
    }
  }
  SUBCASE("missing maps name the step to run") {
    try {
      FeatureVectorizer::multi({en, es}, {}, "en");
      FAIL("expected MissingArtifactError");
    } catch (const MissingArtifactError& e) {
      CHECK(std::string(e.what()).find("align") != std::string::npos);
    }
    TraitAlignment partial = ta;
    partial.maps[trait_index(Trait::Openn)].reset();
    try {
      FeatureVectorizer::global_trait({en, es}, sem_maps, {{"es", partial}}, "en", Trait::Agr);
      FAIL("expected MissingArtifactError");
    } catch (const MissingArtifactError& e) {
      CHECK(std::string(e.what()).find("globaltrait") != std::string::npos);
    }
  }
}

TEST_CASE("linear models") {
  Rng rng(3);
  SUBCASE("separable toy reaches perfect training accuracy") {
    Matrix x = random_matrix(40, 3, rng);
    std::vector<double> y(40);
    for (int i = 0; i < 40; ++i) {
      // Keep a margin around the separating plane.
      if (std::abs(x(i, 0)) < 0.2) x(i, 0) += x(i, 0) < 0 ? -0.2 : 0.2;
      y[i] = x(i, 0) > 0 ? 1.0 : 0.0;
    }
    const auto r = train_linear(x, y, fast(LossKind::bce));
    CHECK(r.loss_curve.size() == 200);
    CHECK(r.loss_curve.back() < r.loss_curve.front());
    for (int i = 0; i < 40; ++i) {
      CHECK((r.model.classify(x.row(i).transpose()) == Label::positive) == (y[i] == 1.0));
    }
  }
  SUBCASE("analytic gradient matches finite differences") {
    for (LossKind kind : {LossKind::bce, LossKind::mse}) {
      const Matrix x = random_matrix(7, 4, rng);
      std::vector<double> y(7);
      for (auto& v : y) v = kind == LossKind::bce ? (rng.uniform() < 0.5 ? 0.0 : 1.0) : rng.normal();
      LinearModel m{random_matrix(4, 1, rng).col(0), 0.3, kind};
      Vector gw;
      double gb = 0.0;
      linear_loss_gradient(m, x, y, gw, gb);
      const double h = 1e-6;
      Vector unused;
      double ub = 0.0;
      for (Eigen::Index i = 0; i < 4; ++i) {
        LinearModel p = m, q = m;
        p.weights(i) += h;
        q.weights(i) -= h;
        const double fd = (linear_loss_gradient(p, x, y, unused, ub) - linear_loss_gradient(q, x, y, unused, ub)) / (2 * h);
        CHECK(std::abs(fd - gw(i)) <= 1e-6 * std::max(1.0, std::abs(fd)));
      }
      LinearModel p = m, q = m;
      p.bias += h;
      q.bias -= h;
      const double fd = (linear_loss_gradient(p, x, y, unused, ub) - linear_loss_gradient(q, x, y, unused, ub)) / (2 * h);
      CHECK(std::abs(fd - gb) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
  SUBCASE("negated features give negated weights") {
    const Matrix x = random_matrix(20, 3, rng);
    std::vector<double> y(20);
    for (int i = 0; i < 20; ++i) y[i] = i % 2;
    auto cfg = fast(LossKind::bce);
    cfg.epochs = 30;
    const auto a = train_linear(x, y, cfg);
    const auto b = train_linear(-x, y, cfg);
    CHECK((a.model.weights + b.model.weights).norm() < 1e-12);
    CHECK(a.model.bias == doctest::Approx(b.model.bias).epsilon(1e-12));
  }
  SUBCASE("swapped labels mirror the decision function") {
    const Matrix x = random_matrix(20, 3, rng);
    std::vector<double> y(20), flipped(20);
    for (int i = 0; i < 20; ++i) {
      y[i] = x(i, 1) > 0.1 ? 1.0 : 0.0;
      flipped[i] = 1.0 - y[i];
    }
    auto cfg = fast(LossKind::bce);
    cfg.epochs = 30;
    const auto a = train_linear(x, y, cfg);
    const auto b = train_linear(x, flipped, cfg);
    CHECK((a.model.weights + b.model.weights).norm() < 1e-9);
    CHECK(std::abs(a.model.bias + b.model.bias) < 1e-9);
  }
  SUBCASE("regression fits a noiseless linear target") {
    const Matrix x = random_matrix(50, 2, rng);
    std::vector<double> y(50);
    for (int i = 0; i < 50; ++i) y[i] = 0.7 * x(i, 0) - 0.2 * x(i, 1) + 0.1;
    const auto r = train_linear(x, y, fast(LossKind::mse));
    CHECK(r.loss_curve.back() < 1e-3);
  }
  SUBCASE("single-class classification data") {
    const Matrix x = random_matrix(5, 2, rng);
    const std::vector<double> y(5, 1.0);
    CHECK_THROWS_AS(train_linear(x, y, fast(LossKind::bce)), ValueError);
  }
  SUBCASE("non-finite inputs abort") {
    Matrix x = random_matrix(6, 2, rng);
    x(2, 1) = std::numeric_limits<double>::quiet_NaN();
    const std::vector<double> y{0, 1, 0, 1, 0, 1};
    CHECK_THROWS_AS(train_linear(x, y, fast(LossKind::bce)), TrainingError);
  }
  SUBCASE("config validation") {
    auto cfg = fast(LossKind::bce);
    cfg.adam.lr = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = fast(LossKind::bce);
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("checkpoints") {
  TempDir dir("ckpt");
  Rng rng(4);
  const LinearModel m{random_matrix(6, 1, rng).col(0), -0.123456789012345678, LossKind::mse};
  const auto ckpt = linear_checkpoint(m, fast(LossKind::mse));
  save_checkpoint(ckpt, dir / "m.json");
  const auto back = linear_from_checkpoint(load_checkpoint(dir / "m.json"));
  CHECK(back.weights == m.weights);
  CHECK(back.bias == m.bias);
  CHECK(back.loss == LossKind::mse);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.json"), IoError);
  CHECK_THROWS_AS(checkpoint_from_json("[1,2]"), SchemaError);
}
