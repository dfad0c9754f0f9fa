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

// Personality-labelled user corpora: tweet tokenization, JSONL manifests,
// median-split labels and stratified folds.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "traitalign/common.hpp"

namespace traitalign {

enum class Label { negative = 0, positive = 1 };

struct UserDocument {
  std::string user_id;
  std::string language;
  std::vector<std::string> tokens;  // all tweets, concatenated in corpus order
  PerTrait<double> scores{};
  std::optional<PerTrait<Label>> labels;

  Label label(Trait t) const;
  double score(Trait t) const { return scores[trait_index(t)]; }
};

enum class CorpusFormat { pan2015_like, pretokenized, synthetic };

std::string_view format_name(CorpusFormat f);
CorpusFormat parse_corpus_format(std::string_view name);

struct Corpus {
  std::string language;
  std::vector<UserDocument> users;
  std::optional<PerTrait<double>> split_thresholds;
  CorpusFormat provenance = CorpusFormat::pan2015_like;
  // Median ties go to the positive class; recorded for reproducibility.
  std::string tie_rule = "score>=median->positive";

  bool labeled() const { return split_thresholds.has_value(); }
  std::size_t count(Trait t, Label l) const;
};

// Whitespace-and-punctuation tokenizer for tweet text. Mentions become
// "@username", links become "@url", hashtags and emoticons stay whole and
// everything is lowercased (ASCII).
std::vector<std::string> tokenize_tweet(std::string_view text);

// Mention/URL/lowercase rules only; used for already-segmented text.
std::string normalize_pretokenized(std::string_view token);

struct CorpusLoadResult {
  Corpus corpus;
  std::vector<std::string> warnings;  // e.g. users skipped for having no text
};

// Line-delimited JSON manifest, one user per line:
// {"user_id": str, "language": str, "scores": {"Extr": x, ...},
//  "tweets": [str]}  or  "tokens": [[str]]
CorpusLoadResult load_corpus(const std::filesystem::path& path, CorpusFormat format);
CorpusLoadResult parse_corpus(std::string_view jsonl, CorpusFormat format);

// Writes a pretokenized-style manifest: each user's tokens are chunked into
// pseudo-tweets of `tokens_per_tweet` tokens.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path,
                 std::size_t tokens_per_tweet = 12);

// Per-trait median of user scores; positive iff score >= median.
Corpus median_split(Corpus corpus);

struct FoldPlan {
  std::size_t k = 5;
  std::uint64_t seed = 0;
  Trait trait = Trait::Extr;
  std::map<std::string, std::size_t> assignments;  // user_id -> fold

  std::vector<std::size_t> fold_sizes() const;
};

// Folds stratified on the labels of one trait; deterministic for a seed.
FoldPlan stratified_kfold(const Corpus& corpus, Trait trait, std::size_t k, std::uint64_t seed);

}  // namespace traitalign
