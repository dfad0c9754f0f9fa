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

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "traitalign/corpus.hpp"
#include "traitalign/embeddings.hpp"

namespace traitalign {

// tf(t, d) = count(t, d) / |d|
// idf(t)   = ln((1 + N) / (1 + df(t))) + 1
class TfIdfModel {
 public:
  // Terms appearing in fewer than min_df documents are dropped.
  static TfIdfModel fit(const std::vector<std::vector<std::string>>& documents,
                        std::size_t min_df = 2);

  std::size_t doc_count() const { return doc_count_; }
  std::size_t vocabulary_size() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }  // sorted
  std::optional<std::size_t> term_index(std::string_view term) const;
  double idf(std::size_t term) const { return idf_[term]; }
  std::size_t df(std::size_t term) const { return df_[term]; }

  // Sparse tf-idf weights of one document, keyed by term index.
  std::map<std::size_t, double> transform(const std::vector<std::string>& document) const;

 private:
  std::size_t doc_count_ = 0;
  std::vector<std::string> terms_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<double> idf_;
  std::vector<std::size_t> df_;
};

inline TfIdfModel fit_tfidf(const std::vector<std::vector<std::string>>& documents,
                            std::size_t min_df = 2) {
  return TfIdfModel::fit(documents, min_df);
}

struct TraitLexicon {
  Trait trait = Trait::Extr;
  std::string language;
  std::vector<std::pair<std::string, double>> ranked_words;  // non-increasing weight

  std::vector<std::string> words() const;
  std::vector<std::string> top(std::size_t n) const;
};

enum class LexiconRanking {
  contrastive,    // mean weight over positive users minus mean over negative users
  positive_only,  // mean weight over positive users
};

struct LexiconOptions {
  LexiconRanking ranking = LexiconRanking::contrastive;
  std::size_t min_df = 2;
};

struct LexiconResult {
  TraitLexicon lexicon;
  bool exhausted = false;  // fewer than n embeddable terms were available
};

// Ranks the corpus vocabulary for one trait and keeps the top n words that
// have a vector in `table`. Ties are broken by ascending word.
LexiconResult extract_trait_words(const Corpus& corpus, Trait trait, const EmbeddingTable& table,
                                  std::size_t n, const LexiconOptions& options = {});

std::string lexicon_to_json(const TraitLexicon& lexicon);
TraitLexicon lexicon_from_json(std::string_view text);
void save_lexicon(const TraitLexicon& lexicon, const std::filesystem::path& path);
TraitLexicon load_lexicon(const std::filesystem::path& path);

}  // namespace traitalign
