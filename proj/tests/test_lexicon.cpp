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

#include <algorithm>
#include <cmath>
#include <set>

#include "support.hpp"
#include "traitalign/lexicon.hpp"
#include "traitalign/synthetic.hpp"

using namespace traitalign;
using Docs = std::vector<std::vector<std::string>>;

namespace {

// Brute-force tf-idf: linear scans only, no shared code with TfIdfModel.
// Arithmetic is written in the same order as the definition so the
// comparison can be exact.
struct OracleWeights {
  std::map<std::string, double> idf;
  std::vector<std::map<std::string, double>> weights;
};

OracleWeights oracle_tfidf(const Docs& docs, std::size_t min_df) {
  OracleWeights o;
  std::set<std::string> vocab;
  for (const auto& d : docs) vocab.insert(d.begin(), d.end());
  const double n = static_cast<double>(docs.size());
  for (const auto& term : vocab) {
    std::size_t df = 0;
    for (const auto& d : docs) df += std::find(d.begin(), d.end(), term) != d.end() ? 1 : 0;
    if (df >= min_df) o.idf[term] = std::log((1.0 + n) / (1.0 + static_cast<double>(df))) + 1.0;
  }
  for (const auto& d : docs) {
    std::map<std::string, double> w;
    for (const auto& [term, idf] : o.idf) {
      const auto c = std::count(d.begin(), d.end(), term);
      if (c > 0) w[term] = (static_cast<double>(c) / static_cast<double>(d.size())) * idf;
    }
    o.weights.push_back(w);
  }
  return o;
}

std::map<std::string, double> named(const TfIdfModel& m, const std::map<std::size_t, double>& w) {
  std::map<std::string, double> out;
  for (const auto& [i, v] : w) out[m.terms()[i]] = v;
  return out;
}

Corpus labeled_corpus(const std::vector<std::pair<std::vector<std::string>, double>>& users) {
  Corpus c;
  c.language = "en";
  for (std::size_t i = 0; i < users.size(); ++i) {
    UserDocument d;
    d.user_id = "u" + std::to_string(i);
    d.language = "en";
    d.tokens = users[i].first;
    d.scores.fill(users[i].second);
    c.users.push_back(d);
  }
  return median_split(std::move(c));
}

EmbeddingTable table_of(const std::vector<std::string>& words) {
  return EmbeddingTable("en", SpaceTag::mono(), words,
                        Matrix::Ones(static_cast<Eigen::Index>(words.size()), 2));
}

}  // namespace

TEST_CASE("fit_tfidf closed forms") {
  const auto m = fit_tfidf({{"a", "b"}, {"a"}}, 1);
  CHECK(m.doc_count() == 2);
  CHECK(m.df(*m.term_index("a")) == 2);
  CHECK(m.df(*m.term_index("b")) == 1);
  CHECK(m.idf(*m.term_index("a")) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(m.idf(*m.term_index("b")) == doctest::Approx(std::log(1.5) + 1.0).epsilon(1e-15));

  const auto single = fit_tfidf({{"a", "a", "b"}}, 1);
  const auto w = single.transform({"a", "a", "b"});
  // idf is 1 for both terms when N = df = 1.
  CHECK(w.at(*single.term_index("a")) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(w.at(*single.term_index("b")) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("fit_tfidf matches the brute-force oracle exactly") {
  const Docs docs = {{"the", "cat", "sat", "the"},
                     {"a", "dog", "sat"},
                     {"the", "dog", "barked", "loudly", "the", "the"},
                     {"cat", "and", "dog"},
                     {"sat", "sat", "sat", "cat"}};
  for (std::size_t min_df : {1u, 2u, 3u}) {
    const auto model = fit_tfidf(docs, min_df);
    const auto oracle = oracle_tfidf(docs, min_df);
    REQUIRE(model.vocabulary_size() == oracle.idf.size());
    for (const auto& [term, idf] : oracle.idf) CHECK(model.idf(*model.term_index(term)) == idf);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      CHECK(named(model, model.transform(docs[i])) == oracle.weights[i]);
    }
  }
}

TEST_CASE("tf-idf properties") {
  Rng rng(31);
  Docs docs;
  for (int d = 0; d < 12; ++d) {
    std::vector<std::string> doc;
    const std::size_t len = 1 + rng.below(15);
    for (std::size_t i = 0; i < len; ++i) doc.push_back("t" + std::to_string(rng.below(20)));
    docs.push_back(doc);
  }
  const auto model = fit_tfidf(docs, 2);

  SUBCASE("vocabulary is exactly the terms with df >= min_df; idf finite and >= 0") {
    const auto oracle = oracle_tfidf(docs, 2);
    std::vector<std::string> expected;
    for (const auto& [t, v] : oracle.idf) expected.push_back(t);
    CHECK(model.terms() == expected);
    for (std::size_t i = 0; i < model.vocabulary_size(); ++i) {
      CHECK(std::isfinite(model.idf(i)));
      CHECK(model.idf(i) >= 0.0);
    }
  }
  SUBCASE("duplicating the corpus: recomputed weights match the oracle on the doubled corpus") {
    Docs doubled = docs;
    doubled.insert(doubled.end(), docs.begin(), docs.end());
    const auto m2 = fit_tfidf(doubled, 2);
    const auto oracle = oracle_tfidf(doubled, 2);
    for (const auto& [term, idf] : oracle.idf) CHECK(m2.idf(*m2.term_index(term)) == idf);
    for (std::size_t i = 0; i < doubled.size(); ++i) {
      CHECK(named(m2, m2.transform(doubled[i])) == oracle.weights[i]);
    }
    // Term frequencies are unchanged; idf moves with N and df under smoothing.
    for (std::size_t i = 0; i < docs.size(); ++i) {
      for (const auto& [term, w] : named(model, model.transform(docs[i]))) {
        const double tf1 = w / model.idf(*model.term_index(term));
        const double tf2 = named(m2, m2.transform(docs[i])).at(term) / m2.idf(*m2.term_index(term));
        CHECK(tf1 == doctest::Approx(tf2).epsilon(1e-12));
      }
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(fit_tfidf({}, 1), ValueError);
    CHECK_THROWS_AS(fit_tfidf({{}, {}}, 1), ValueError);
  }
}

TEST_CASE("extract_trait_words") {
  // "up" only in high-score users, "down" only in low-score users.
  const Corpus c = labeled_corpus({{{"up", "x", "y"}, 0.9},
                                   {{"up", "x", "z"}, 0.8},
                                   {{"down", "x", "y"}, 0.1},
                                   {{"down", "x", "z"}, 0.2}});
  const auto table = table_of({"up", "down", "x", "y", "z"});

  SUBCASE("contrastive ranking puts the positive-only word first") {
    const auto r = extract_trait_words(c, Trait::Extr, table, 5, {LexiconRanking::contrastive, 1});
    REQUIRE(!r.lexicon.ranked_words.empty());
    CHECK(r.lexicon.ranked_words.front().first == "up");
    CHECK(r.lexicon.ranked_words.back().first == "down");
    for (std::size_t i = 1; i < r.lexicon.ranked_words.size(); ++i) {
      CHECK(r.lexicon.ranked_words[i - 1].second >= r.lexicon.ranked_words[i].second);
    }
  }
  SUBCASE("ties break by ascending word") {
    const auto r = extract_trait_words(c, Trait::Extr, table, 5, {LexiconRanking::contrastive, 1});
    // x, y and z all score 0 in the contrastive ranking.
    std::vector<std::string> mid;
    for (const auto& [w, s] : r.lexicon.ranked_words) {
      if (s == 0.0) mid.push_back(w);
    }
    CHECK(mid == std::vector<std::string>{"x", "y", "z"});
  }
  SUBCASE("words without vectors are dropped; exhaustion is flagged") {
    const auto r = extract_trait_words(c, Trait::Extr, table_of({"down", "x"}), 10, {LexiconRanking::contrastive, 1});
    CHECK(r.exhausted);
    CHECK(r.lexicon.words() == std::vector<std::string>{"x", "down"});
  }
  SUBCASE("deterministic") {
    const auto a = extract_trait_words(c, Trait::Agr, table, 3, {LexiconRanking::positive_only, 1});
    const auto b = extract_trait_words(c, Trait::Agr, table, 3, {LexiconRanking::positive_only, 1});
    CHECK(a.lexicon.ranked_words == b.lexicon.ranked_words);
    CHECK(a.lexicon.ranked_words.size() == 3);
  }
  SUBCASE("no positive users is an error naming the trait") {
    Corpus none = c;
    for (auto& u : none.users) {
      PerTrait<Label> l;
      l.fill(Label::negative);
      u.labels = l;
    }
    try {
      extract_trait_words(none, Trait::Cons, table, 3);
      FAIL("expected ValueError");
    } catch (const ValueError& e) {
      CHECK(std::string(e.what()).find("Cons") != std::string::npos);
    }
  }
}

TEST_CASE("planted recovery and the no-signal baseline") {
  SyntheticSpec spec;
  spec.vocab_size = 3000;
  spec.trait_words_per_trait = 50;
  spec.doc_length = 300;
  spec.languages = {{"en", 100}, {"es", 100}};
  SUBCASE("n = 50 recovers >= 80% of 50 planted words") {
    const auto data = generate_synthetic_corpus(spec);
    for (const auto& lang : data.languages) {
      const Corpus c = median_split(lang.corpus);
      for (Trait t : kTraits) {
        const auto words = extract_trait_words(c, t, lang.mono, 50).lexicon.words();
        const auto& planted = data.truth.trait_words.at(c.language)[trait_index(t)];
        std::size_t hit = 0;
        for (const auto& w : planted) hit += std::find(words.begin(), words.end(), w) != words.end();
        CHECK(static_cast<double>(hit) / 50.0 >= 0.8);
      }
    }
  }
  SUBCASE("zero signal: overlap no better than chance") {
    spec.trait_signal_strength = 0.0;
    const auto data = generate_synthetic_corpus(spec);
    for (const auto& lang : data.languages) {
      const Corpus c = median_split(lang.corpus);
      for (Trait t : kTraits) {
        const auto words = extract_trait_words(c, t, lang.mono, 50).lexicon.words();
        const auto& planted = data.truth.trait_words.at(c.language)[trait_index(t)];
        std::size_t hit = 0;
        for (const auto& w : planted) hit += std::find(words.begin(), words.end(), w) != words.end();
        // Chance: 50 draws from 3000 words hitting a 50-word list, mean 0.83,
        // sd 0.9; four sd above the mean is 4.5.
        CHECK(hit <= 4);
      }
    }
  }
}

TEST_CASE("lexicon JSON round trip") {
  TraitLexicon lex{Trait::Emot, "es", {{"hola", 0.5}, {"adios", 0.125}, {"pero", -1e-17}}};
  const auto back = lexicon_from_json(lexicon_to_json(lex));
  CHECK(back.trait == Trait::Emot);
  CHECK(back.language == "es");
  CHECK(back.ranked_words == lex.ranked_words);
  CHECK_THROWS_AS(lexicon_from_json("{nope"), SchemaError);
}
