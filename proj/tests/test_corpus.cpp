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
#include <set>

#include "support.hpp"
#include "traitalign/lexicon.hpp"
#include "traitalign/synthetic.hpp"

using namespace traitalign;
using traitalign::testing::TempDir;

namespace {

using Tokens = std::vector<std::string>;

std::string record(const std::string& id, const std::string& body, const std::string& lang = "en") {
  return R"({"user_id":")" + id + R"(","language":")" + lang +
         R"(","scores":{"Extr":0.1,"Agr":0.2,"Cons":0.3,"Emot":0.4,"Openn":0.5},)" + body + "}\n";
}

Corpus scored(const std::vector<double>& extr) {
  Corpus c;
  c.language = "en";
  for (std::size_t i = 0; i < extr.size(); ++i) {
    UserDocument d;
    d.user_id = "u" + std::to_string(i);
    d.language = "en";
    d.tokens = {"x"};
    d.scores.fill(extr[i]);
    c.users.push_back(d);
  }
  return c;
}

std::vector<Label> extr_labels(const Corpus& c) {
  std::vector<Label> out;
  for (const auto& u : c.users) out.push_back(u.label(Trait::Extr));
  return out;
}

constexpr Label P = Label::positive;
constexpr Label N = Label::negative;

}  // namespace

TEST_CASE("tokenize_tweet") {
  CHECK(tokenize_tweet("Thanks @bob http://x.co !") == Tokens{"thanks", "@username", "@url", "!"});
  CHECK(tokenize_tweet("").empty());
  CHECK(tokenize_tweet("#Fun #fun WWW.A.B") == Tokens{"#fun", "#fun", "@url"});
  CHECK(tokenize_tweet("https://a.b/c?d=1 ok") == Tokens{"@url", "ok"});

  SUBCASE("emoticons stay whole") {
    const auto t = tokenize_tweet("great :) day :-(");
    CHECK(std::find(t.begin(), t.end(), ":)") != t.end());
    CHECK(std::find(t.begin(), t.end(), ":-(") != t.end());
  }
  SUBCASE("never emits whitespace; every @-token becomes @username") {
    Rng rng(2);
    const std::string alphabet = "ab@ #:)!.,\t\nwHtp/";
    for (int trial = 0; trial < 300; ++trial) {
      std::string s;
      const std::size_t len = rng.below(40);
      for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[rng.below(alphabet.size())]);
      for (const auto& tok : tokenize_tweet(s)) {
        CHECK(!tok.empty());
        CHECK(tok.find_first_of(" \t\n\r") == std::string::npos);
        if (tok[0] == '@') CHECK((tok == "@username" || tok == "@url"));
      }
    }
  }
}

TEST_CASE("parse_corpus") {
  SUBCASE("two users, tweets concatenated in order") {
    const std::string text = record("a", R"("tweets":["Hello world","second one"])") +
                             record("b", R"("tweets":["@x hi"])");
    const auto r = parse_corpus(text, CorpusFormat::pan2015_like);
    REQUIRE(r.corpus.users.size() == 2);
    CHECK(r.corpus.users[0].tokens == Tokens{"hello", "world", "second", "one"});
    CHECK(r.corpus.users[1].tokens == Tokens{"@username", "hi"});
    CHECK(r.corpus.users[0].score(Trait::Openn) == 0.5);
  }
  SUBCASE("missing trait score names the user") {
    const std::string text =
        R"({"user_id":"carol","language":"en","scores":{"Extr":0.1,"Agr":0.2,"Cons":0.3,"Emot":0.4},"tweets":["x"]})";
    try {
      parse_corpus(text, CorpusFormat::pan2015_like);
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      CHECK(std::string(e.what()).find("carol") != std::string::npos);
      CHECK(std::string(e.what()).find("Openn") != std::string::npos);
    }
  }
  SUBCASE("pretokenized records keep tokens apart from mention and url rules") {
    const std::string text = record("z", R"("tokens":[["我们","喜欢","@Li"],["WWW.x.cn","Ok"]])", "zh");
    const auto r = parse_corpus(text, CorpusFormat::pretokenized);
    REQUIRE(r.corpus.users.size() == 1);
    CHECK(r.corpus.users[0].tokens == Tokens{"我们", "喜欢", "@username", "@url", "ok"});
  }
  SUBCASE("users without text are skipped with a warning") {
    const std::string text = record("a", R"("tweets":[])") + record("b", R"("tweets":["hi"])");
    const auto r = parse_corpus(text, CorpusFormat::pan2015_like);
    CHECK(r.corpus.users.size() == 1);
    CHECK(r.warnings.size() == 1);
  }
  SUBCASE("duplicate ids are rejected") {
    const std::string text = record("a", R"("tweets":["x"])") + record("a", R"("tweets":["y"])");
    CHECK_THROWS_AS(parse_corpus(text, CorpusFormat::pan2015_like), SchemaError);
  }
}

TEST_CASE("save_corpus and load_corpus round trip") {
  TempDir dir("corpus");
  SyntheticSpec spec;
  const auto data = generate_synthetic_corpus(spec);
  const Corpus& c = data.languages[1].corpus;
  save_corpus(c, dir / "es.jsonl");
  const auto back = load_corpus(dir / "es.jsonl", CorpusFormat::pretokenized).corpus;
  REQUIRE(back.users.size() == c.users.size());
  for (std::size_t i = 0; i < c.users.size(); ++i) {
    CHECK(back.users[i].user_id == c.users[i].user_id);
    CHECK(back.users[i].tokens == c.users[i].tokens);
    for (Trait t : kTraits) CHECK(back.users[i].score(t) == c.users[i].score(t));
  }
}

TEST_CASE("median_split") {
  CHECK(median_split(scored({0.1, 0.5, 0.9})).split_thresholds->at(0) == 0.5);
  CHECK(extr_labels(median_split(scored({0.1, 0.5, 0.9}))) == std::vector<Label>{N, P, P});
  CHECK(median_split(scored({0.2, 0.8})).split_thresholds->at(0) == 0.5);
  CHECK(extr_labels(median_split(scored({0.2, 0.8}))) == std::vector<Label>{N, P});
  CHECK(extr_labels(median_split(scored({0.3, 0.3, 0.3}))) == std::vector<Label>{P, P, P});
  CHECK_THROWS_AS(median_split(scored({0.3})), ValueError);

  SUBCASE("invariant under strictly monotonic transforms") {
    Rng rng(8);
    std::vector<double> s;
    for (int i = 0; i < 31; ++i) s.push_back(std::round(rng.uniform() * 10.0) / 10.0);
    std::vector<double> t;
    for (double v : s) t.push_back(std::exp(3.0 * v) - 7.0);
    CHECK(extr_labels(median_split(scored(s))) == extr_labels(median_split(scored(t))));
  }
  SUBCASE("ties at the median can leave more imbalance than the tie count") {
    // Median 1 with three tied users, yet the classes are 6 and 1.
    const Corpus c = median_split(scored({0, 1, 1, 1, 2, 3, 3}));
    CHECK(c.count(Trait::Extr, P) == 6);
    CHECK(c.count(Trait::Extr, N) == 1);
  }
  SUBCASE("class imbalance bounded by twice the ties at the median") {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> s;
      const std::size_t n = 2 + rng.below(30);
      for (std::size_t i = 0; i < n; ++i) s.push_back(static_cast<double>(rng.below(5)));
      const Corpus c = median_split(scored(s));
      const double med = c.split_thresholds->at(0);
      std::size_t ties = 0;
      for (double v : s) ties += v == med;
      const auto pos = static_cast<long>(c.count(Trait::Extr, P));
      const auto neg = static_cast<long>(c.count(Trait::Extr, N));
      CHECK(pos >= neg);
      CHECK(static_cast<std::size_t>(pos - neg) <= 2 * ties);
    }
  }
}

TEST_CASE("stratified_kfold") {
  auto corpus_with = [](std::size_t pos, std::size_t neg) {
    std::vector<double> s;
    for (std::size_t i = 0; i < pos; ++i) s.push_back(1.0);
    for (std::size_t i = 0; i < neg; ++i) s.push_back(0.0);
    Corpus c = scored(s);
    // Labels set directly so the class sizes are exact.
    c.split_thresholds = PerTrait<double>{};
    for (std::size_t i = 0; i < c.users.size(); ++i) {
      PerTrait<Label> l;
      l.fill(i < pos ? P : N);
      c.users[i].labels = l;
    }
    return c;
  };
  auto per_fold = [](const Corpus& c, const FoldPlan& plan, Label l) {
    std::vector<std::size_t> counts(plan.k, 0);
    for (const auto& u : c.users) {
      if (u.label(plan.trait) == l) ++counts[plan.assignments.at(u.user_id)];
    }
    return counts;
  };

  SUBCASE("5 pos / 5 neg, k=5: one of each per fold") {
    const Corpus c = corpus_with(5, 5);
    const auto plan = stratified_kfold(c, Trait::Extr, 5, 3);
    CHECK(per_fold(c, plan, P) == std::vector<std::size_t>(5, 1));
    CHECK(per_fold(c, plan, N) == std::vector<std::size_t>(5, 1));
    CHECK(stratified_kfold(c, Trait::Extr, 5, 3).assignments == plan.assignments);
  }
  SUBCASE("7 pos / 3 neg, k=3, every seed") {
    const Corpus c = corpus_with(7, 3);
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const auto plan = stratified_kfold(c, Trait::Extr, 3, seed);
      for (auto n : per_fold(c, plan, P)) CHECK((n == 2 || n == 3));
      CHECK(per_fold(c, plan, N) == std::vector<std::size_t>(3, 1));
    }
  }
  SUBCASE("k above the minority class is an error") {
    CHECK_THROWS_AS(stratified_kfold(corpus_with(7, 3), Trait::Extr, 4, 1), ValueError);
  }
  SUBCASE("partition and balance on random corpora") {
    Rng rng(77);
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t pos = 5 + rng.below(20), neg = 5 + rng.below(20), k = 2 + rng.below(4);
      const Corpus c = corpus_with(pos, neg);
      const auto plan = stratified_kfold(c, Trait::Extr, k, trial);
      CHECK(plan.assignments.size() == c.users.size());
      const auto sizes = plan.fold_sizes();
      CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
      const auto pc = per_fold(c, plan, P);
      for (std::size_t f = 0; f < k; ++f) {
        const double ideal = static_cast<double>(pos) * static_cast<double>(sizes[f]) /
                             static_cast<double>(pos + neg);
        CHECK(std::abs(static_cast<double>(pc[f]) - ideal) <= 1.0 + 1e-9);
      }
    }
  }
}

TEST_CASE("synthetic generator") {
  SUBCASE("noise-free languages are exact rotations of the target") {
    SyntheticSpec spec;
    spec.noise_sigma = 0.0;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      spec.planted_rotation_seed = seed;
      const auto data = generate_synthetic_corpus(spec);
      const Matrix& a = data.languages[0].mono.vectors();
      const Matrix& b = data.languages[1].mono.vectors();
      const Matrix r = data.truth.semantic_maps.at("es").transpose();  // target -> es
      CHECK((b - a * r.transpose()).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(orthogonality_error(r) < 1e-10);
    }
  }
  SUBCASE("zero signal never emits a planted word") {
    SyntheticSpec spec;
    spec.trait_signal_strength = 0.0;
    const auto data = generate_synthetic_corpus(spec);
    for (const auto& lang : data.languages) {
      std::set<std::string> planted;
      for (const auto& words : data.truth.trait_words.at(lang.corpus.language)) {
        planted.insert(words.begin(), words.end());
      }
      for (const auto& u : lang.corpus.users) {
        for (const auto& tok : u.tokens) CHECK(!planted.contains(tok));
      }
    }
  }
  SUBCASE("median split recovers the planted labels") {
    const auto data = generate_synthetic_corpus(SyntheticSpec{});
    for (const auto& lang : data.languages) {
      const Corpus c = median_split(lang.corpus);
      for (const auto& u : c.users) {
        const auto& truth = data.truth.planted_labels.at(c.language).at(u.user_id);
        for (Trait t : kTraits) CHECK(u.label(t) == truth[trait_index(t)]);
      }
    }
  }
  SUBCASE("default spec: top-50 tf-idf words recover >= 80% of the planted words") {
    const SyntheticSpec spec;
    const auto data = generate_synthetic_corpus(spec);
    for (const auto& lang : data.languages) {
      const Corpus c = median_split(lang.corpus);
      for (Trait t : kTraits) {
        const auto lex = extract_trait_words(c, t, lang.mono, 50).lexicon.words();
        const auto& planted = data.truth.trait_words.at(c.language)[trait_index(t)];
        std::size_t hit = 0;
        for (const auto& w : planted) hit += std::find(lex.begin(), lex.end(), w) != lex.end();
        CHECK(static_cast<double>(hit) / static_cast<double>(planted.size()) >= 0.8);
      }
    }
  }
  SUBCASE("spec validation") {
    SyntheticSpec spec;
    spec.vocab_size = 10 * spec.trait_words_per_trait - 1;
    CHECK_THROWS_AS(generate_synthetic_corpus(spec), SpecError);
  }
  SUBCASE("fixture files and ground truth round trip") {
    TempDir dir("synth");
    const auto data = generate_synthetic_corpus(SyntheticSpec{});
    write_synthetic_fixture(data, dir.path());
    const auto truth = load_ground_truth(dir / "ground_truth.json");
    CHECK(truth.target_language == "en");
    CHECK((truth.semantic_maps.at("es") - data.truth.semantic_maps.at("es")).norm() == 0.0);
    CHECK(truth.trait_words.at("es") == data.truth.trait_words.at("es"));
    const auto vec = load_vec(dir / "es.vec", "es").table;
    CHECK((vec.vectors() - data.languages[1].mono.vectors()).cwiseAbs().maxCoeff() < 1e-6);
  }
}
