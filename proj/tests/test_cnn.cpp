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
#include "traitalign/cnn.hpp"

using namespace traitalign;
using traitalign::testing::random_matrix;

namespace {

CnnConfig small_config(CnnHead head, std::size_t t_len = 12) {
  CnnConfig c;
  c.widths = {2, 3};
  c.filters = 4;
  c.fc_hidden = 6;
  c.head = head;
  c.max_tokens = t_len;
  return c;
}

TokenIds random_ids(std::size_t t_len, int vocab, Rng& rng) {
  TokenIds ids(t_len);
  for (auto& v : ids) v = static_cast<int>(rng.below(static_cast<std::size_t>(vocab) + 1)) - 1;
  return ids;
}

void check_gradients(const CnnModel& model, const std::vector<TokenIds>& docs,
                     const std::vector<double>& targets) {
  std::vector<const TokenIds*> batch;
  for (const auto& d : docs) batch.push_back(&d);
  std::vector<Matrix> grads;
  model.loss_and_gradients(batch, targets, &grads);
  REQUIRE(grads.size() == model.parameters().size());
  CnnModel probe = model;
  const double h = 1e-6;
  std::size_t checked = 0;
  for (std::size_t b = 0; b < grads.size(); ++b) {
    CAPTURE(model.parameter_names()[b]);
    for (Eigen::Index i = 0; i < grads[b].size(); ++i) {
      const double orig = probe.mutable_parameters()[b].data()[i];
      probe.mutable_parameters()[b].data()[i] = orig + h;
      const double up = probe.loss_and_gradients(batch, targets, nullptr);
      probe.mutable_parameters()[b].data()[i] = orig - h;
      const double down = probe.loss_and_gradients(batch, targets, nullptr);
      probe.mutable_parameters()[b].data()[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grads[b].data()[i];
      CHECK(std::abs(numeric - analytic) <= 1e-4 * std::max(std::abs(numeric), std::abs(analytic)) + 1e-8);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

}  // namespace

TEST_CASE("gradients match finite differences") {
  Rng rng(1);
  const int vocab = 10;
  std::vector<TokenIds> docs;
  for (int i = 0; i < 3; ++i) docs.push_back(random_ids(12, vocab, rng));
  SUBCASE("softmax2 head, one channel") {
    CnnModel m(small_config(CnnHead::softmax2), random_matrix(vocab, 8, rng), std::nullopt, rng);
    check_gradients(m, docs, {1.0, 0.0, 1.0});
  }
  SUBCASE("linear1 head, one channel") {
    CnnModel m(small_config(CnnHead::linear1), random_matrix(vocab, 8, rng), std::nullopt, rng);
    check_gradients(m, docs, {0.3, -0.7, 1.2});
  }
  SUBCASE("two channels") {
    CnnModel m(small_config(CnnHead::softmax2), random_matrix(vocab, 8, rng), random_matrix(vocab, 8, rng), rng);
    CHECK(m.channels() == 2);
    check_gradients(m, docs, {0.0, 1.0, 1.0});
    check_gradients(CnnModel(small_config(CnnHead::linear1), random_matrix(vocab, 8, rng),
                             random_matrix(vocab, 8, rng), rng),
                    docs, {0.5, 0.25, -1.0});
  }
}

TEST_CASE("static channel is frozen") {
  Rng rng(2);
  const int vocab = 10;
  const Matrix frozen = random_matrix(vocab, 8, rng);
  CnnModel m(small_config(CnnHead::softmax2), random_matrix(vocab, 8, rng), frozen, rng);
  for (const auto& name : m.parameter_names()) CHECK(name.find("static") == std::string::npos);
  CHECK(m.parameter_names().front() == "embedding.dynamic");
  std::vector<TokenIds> docs;
  std::vector<double> y;
  for (int i = 0; i < 10; ++i) {
    docs.push_back(random_ids(12, vocab, rng));
    y.push_back(i % 2);
  }
  const Matrix dynamic_before = m.parameters()[0];
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.adam.lr = 0.01;
  train_cnn(m, docs, y, cfg);
  CHECK(*m.static_embeddings() == frozen);
  CHECK(m.parameters()[0] != dynamic_before);
}

TEST_CASE("hand-built forward passes") {
  Rng rng(3);
  SUBCASE("zero network gives p = 0.5") {
    CnnModel m(small_config(CnnHead::softmax2), random_matrix(5, 4, rng), std::nullopt, rng);
    for (auto& p : m.mutable_parameters()) p.setZero();
    CHECK(m.positive_probability(random_ids(12, 5, rng)) == 0.5);
    CnnModel r(small_config(CnnHead::linear1), random_matrix(5, 4, rng), std::nullopt, rng);
    for (auto& p : r.mutable_parameters()) p.setZero();
    CHECK(r.predict_value(random_ids(12, 5, rng)) == 0.0);
  }
  SUBCASE("width-3 summing filter on a 5-token document") {
    CnnConfig c;
    c.widths = {3};
    c.filters = 2;
    c.fc_hidden = 1;
    c.max_tokens = 5;
    Matrix emb(5, 1);
    emb << 1, 2, 3, 4, 5;
    CnnModel m(c, emb, std::nullopt, rng);
    auto& ps = m.mutable_parameters();
    ps[1] << 1, -1, 1, -1, 1, -1;  // filter 0 sums the window, filter 1 negates it
    ps[2].setZero();
    CnnModel::Activations a;
    m.forward({0, 1, 2, 3, 4}, &a);
    // Windows sum to 6, 9, 12.
    CHECK(a.pre_pool_max(0) == 12.0);
    CHECK(a.argmax[0] == 2);
    CHECK(a.pre_pool_max(1) == -6.0);
    CHECK(a.argmax[1] == 0);
    CHECK(a.features(0) == 12.0);
    CHECK(a.features(1) == 0.0);
  }
  SUBCASE("shifting a phrase inside padding does not change the output") {
    CnnModel m(small_config(CnnHead::softmax2, 10), random_matrix(6, 4, rng), random_matrix(6, 4, rng), rng);
    const TokenIds a{-1, -1, 3, 1, 4, -1, -1, -1, -1, -1};
    const TokenIds b{-1, -1, -1, -1, -1, 3, 1, 4, -1, -1};
    CHECK(m.forward(a) == m.forward(b));
  }
  SUBCASE("softmax output") {
    CnnModel m(small_config(CnnHead::softmax2), random_matrix(5, 4, rng), std::nullopt, rng);
    const TokenIds ids = random_ids(12, 5, rng);
    const Vector z = m.forward(ids);
    const double p = m.positive_probability(ids);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    CHECK(p == doctest::Approx(std::exp(z(1)) / (std::exp(z(0)) + std::exp(z(1)))).epsilon(1e-14));
    m.mutable_parameters().back().array() += 3.0;  // shift both logits
    CHECK(m.positive_probability(ids) == doctest::Approx(p).epsilon(1e-12));
    CHECK((m.classify(ids) == Label::positive) == (p >= 0.5));
  }
  SUBCASE("zero-loss regression point has zero gradients") {
    CnnModel m(small_config(CnnHead::linear1), random_matrix(5, 4, rng), std::nullopt, rng);
    const TokenIds ids = random_ids(12, 5, rng);
    const std::vector<const TokenIds*> batch{&ids};
    const std::vector<double> y{m.predict_value(ids)};
    std::vector<Matrix> grads;
    CHECK(m.loss_and_gradients(batch, y, &grads) == 0.0);
    for (const auto& g : grads) CHECK(g.isZero());
  }
  SUBCASE("input length is checked") {
    CnnModel m(small_config(CnnHead::softmax2), random_matrix(5, 4, rng), std::nullopt, rng);
    CHECK_THROWS_AS(m.forward(TokenIds(11, -1)), ValueError);
  }
}

TEST_CASE("vocabulary") {
  UserDocument en{"u1", "en", {"a", "b", "zz", "a"}, {}, std::nullopt};
  UserDocument es{"u2", "es", {"a", "c"}, {}, std::nullopt};
  Matrix ev(2, 2), sv(2, 2);
  ev << 1, 2, 3, 4;
  sv << 5, 6, 7, 8;
  const auto dyn = FeatureVectorizer::mono({EmbeddingTable("en", SpaceTag::mono(), {"a", "b"}, ev),
                                            EmbeddingTable("es", SpaceTag::mono(), {"a", "c"}, sv)});
  const auto stat = FeatureVectorizer::mono({EmbeddingTable("en", SpaceTag::mono(), {"b"}, Matrix::Ones(1, 2)),
                                             EmbeddingTable("es", SpaceTag::mono(), {"a", "c"}, sv)});
  const CnnVocabulary v({&en, &es}, dyn, &stat);
  CHECK(v.size() == 4);  // en:a, en:b, es:a, es:c
  CHECK(v.id("en", "a") != v.id("es", "a"));
  CHECK_FALSE(v.id("en", "zz").has_value());
  CHECK(v.encode(en, 6) == TokenIds{0, 1, -1, 0, -1, -1});
  CHECK(v.encode(en, 2) == TokenIds{0, 1});
  CHECK(v.dynamic_init().row(*v.id("es", "c")) == sv.row(1));
  // en:a has no static vector, so that row stays zero.
  CHECK(v.static_table()->row(*v.id("en", "a")).isZero());
  CHECK(v.static_table()->row(*v.id("en", "b")) == Matrix::Ones(1, 2));
}

TEST_CASE("training") {
  Rng rng(4);
  const int vocab = 30;
  std::vector<TokenIds> docs;
  std::vector<double> y;
  for (int i = 0; i < 20; ++i) {
    docs.push_back(random_ids(30, vocab, rng));
    y.push_back(i < 10 ? 1.0 : 0.0);
  }
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.adam.lr = 0.01;
  cfg.seed = 9;
  CnnConfig c = small_config(CnnHead::softmax2, 30);
  c.filters = 8;

  SUBCASE("fits 20 arbitrary labels") {
    Rng init(5);
    CnnModel m(c, random_matrix(vocab, 8, init), std::nullopt, init);
    const auto r = train_cnn(m, docs, y, cfg);
    CHECK(r.loss_curve.back() < r.loss_curve.front());
    std::size_t right = 0;
    for (int i = 0; i < 20; ++i) right += (m.classify(docs[static_cast<std::size_t>(i)]) == Label::positive) == (y[static_cast<std::size_t>(i)] == 1.0);
    CHECK(right == 20);
  }
  SUBCASE("deterministic and checkpointable") {
    cfg.epochs = 5;
    Rng r1(6), r2(6);
    CnnModel a(c, random_matrix(vocab, 8, r1), random_matrix(vocab, 8, r1), r1);
    CnnModel b(c, random_matrix(vocab, 8, r2), random_matrix(vocab, 8, r2), r2);
    train_cnn(a, docs, y, cfg);
    train_cnn(b, docs, y, cfg);
    for (std::size_t i = 0; i < a.parameters().size(); ++i) CHECK(a.parameters()[i] == b.parameters()[i]);
    const CnnModel back = cnn_from_checkpoint(checkpoint_from_json(checkpoint_to_json(cnn_checkpoint(a, cfg))));
    CHECK(back.parameter_names() == a.parameter_names());
    CHECK(*back.static_embeddings() == *a.static_embeddings());
    for (const auto& d : docs) CHECK(back.forward(d) == a.forward(d));
  }
  SUBCASE("non-finite embeddings abort naming the parameter") {
    Rng init(7);
    Matrix emb = random_matrix(vocab, 8, init);
    emb(3, 0) = std::numeric_limits<double>::infinity();
    CnnModel m(c, emb, std::nullopt, init);
    std::vector<TokenIds> bad(docs);
    bad[0][0] = 3;
    CHECK_THROWS_AS(train_cnn(m, bad, y, cfg), TrainingError);
  }
}
