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

#include "traitalign/lexicon.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "traitalign/json_util.hpp"

namespace traitalign {

TfIdfModel TfIdfModel::fit(const std::vector<std::vector<std::string>>& documents,
                           std::size_t min_df) {
  if (documents.empty()) throw ValueError("fit_tfidf needs at least one document");
  if (std::all_of(documents.begin(), documents.end(), [](const auto& d) { return d.empty(); })) {
    throw ValueError("fit_tfidf: all documents are empty");
  }
  std::map<std::string, std::size_t, std::less<>> df;
  for (const auto& doc : documents) {
    std::vector<std::string_view> uniq(doc.begin(), doc.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (auto term : uniq) {
      auto it = df.find(term);
      if (it == df.end()) {
        df.emplace(std::string(term), 1);
      } else {
        ++it->second;
      }
    }
  }
  TfIdfModel model;
  model.doc_count_ = documents.size();
  const double n = static_cast<double>(documents.size());
  for (const auto& [term, count] : df) {
    if (count < min_df) continue;
    model.index_.emplace(term, model.terms_.size());
    model.terms_.push_back(term);
    model.df_.push_back(count);
    model.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  return model;
}

std::optional<std::size_t> TfIdfModel::term_index(std::string_view term) const {
  auto it = index_.find(term);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::map<std::size_t, double> TfIdfModel::transform(const std::vector<std::string>& document) const {
  std::map<std::size_t, double> out;
  if (document.empty()) return out;
  for (const auto& tok : document) {
    if (auto idx = term_index(tok)) out[*idx] += 1.0;
  }
  const double len = static_cast<double>(document.size());
  for (auto& [idx, w] : out) w = (w / len) * idf_[idx];
  return out;
}

std::vector<std::string> TraitLexicon::words() const {
  std::vector<std::string> out;
  out.reserve(ranked_words.size());
  for (const auto& [w, s] : ranked_words) out.push_back(w);
  return out;
}

std::vector<std::string> TraitLexicon::top(std::size_t n) const {
  auto w = words();
  if (w.size() > n) w.resize(n);
  return w;
}

LexiconResult extract_trait_words(const Corpus& corpus, Trait trait, const EmbeddingTable& table,
                                  std::size_t n, const LexiconOptions& options) {
  if (n < 1) throw ValueError("lexicon size n must be >= 1");
  if (!corpus.labeled()) throw ValueError("extract_trait_words needs a median-split corpus");
  std::vector<std::vector<std::string>> docs;
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& u : corpus.users) {
    docs.push_back(u.tokens);
    (u.label(trait) == Label::positive ? n_pos : n_neg)++;
  }
  if (n_pos == 0) {
    throw ValueError("no positive users for trait " + std::string(trait_name(trait)) +
                     " in language '" + corpus.language + "'");
  }
  const TfIdfModel model = TfIdfModel::fit(docs, options.min_df);

  std::vector<double> pos_sum(model.vocabulary_size(), 0.0), neg_sum(model.vocabulary_size(), 0.0);
  for (std::size_t i = 0; i < corpus.users.size(); ++i) {
    auto& sums = corpus.users[i].label(trait) == Label::positive ? pos_sum : neg_sum;
    for (const auto& [idx, w] : model.transform(docs[i])) sums[idx] += w;
  }

  std::vector<std::pair<std::string, double>> scored;
  for (std::size_t t = 0; t < model.vocabulary_size(); ++t) {
    if (!table.contains(model.terms()[t])) continue;
    double score = pos_sum[t] / static_cast<double>(n_pos);
    if (options.ranking == LexiconRanking::contrastive && n_neg > 0) {
      score -= neg_sum[t] / static_cast<double>(n_neg);
    }
    scored.emplace_back(model.terms()[t], score);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  LexiconResult result;
  result.exhausted = scored.size() < n;
  if (scored.size() > n) scored.resize(n);
  result.lexicon = TraitLexicon{trait, corpus.language, std::move(scored)};
  return result;
}

std::string lexicon_to_json(const TraitLexicon& lexicon) {
  json words = json::array();
  for (const auto& [w, s] : lexicon.ranked_words) words.push_back(json::array({w, s}));
  json j{{"trait", std::string(trait_name(lexicon.trait))},
         {"language", lexicon.language},
         {"words", std::move(words)}};
  return j.dump(1);
}

TraitLexicon lexicon_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("lexicon: invalid JSON: ") + e.what());
  }
  TraitLexicon lex;
  try {
    lex.trait = parse_trait(j.at("trait").get<std::string>());
    lex.language = j.at("language").get<std::string>();
    for (const auto& row : j.at("words")) {
      lex.ranked_words.emplace_back(row.at(0).get<std::string>(), row.at(1).get<double>());
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("lexicon: ") + e.what());
  }
  return lex;
}

void save_lexicon(const TraitLexicon& lexicon, const std::filesystem::path& path) {
  write_file(path, lexicon_to_json(lexicon));
}

TraitLexicon load_lexicon(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("lexicon not found: " + path.string());
  return lexicon_from_json(read_file(path));
}

}  // namespace traitalign
