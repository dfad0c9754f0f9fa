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

// Synthetic corpora with planted ground truth.
//
// The first language is the target. Every other language L gets a random
// rotation R_L with E_L = R_L * E_target (+ noise), so word i of L is the
// translation of word i of the target. For each trait t the target has a
// set of trait words a_t; language L signals trait t with words s_{L,t}
// whose translations satisfy E_target[s_j] = Q_{L,t} E_target[a_j] for a
// rotation Q_{L,t} acting on a 3-dimensional block reserved for trait t.
// With trait_rotation_angle == 0, s_{L,t} = a_t.

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "traitalign/corpus.hpp"
#include "traitalign/embeddings.hpp"

namespace traitalign {

struct SyntheticLanguage {
  std::string code;
  std::size_t users = 40;
};

struct SyntheticSpec {
  std::vector<SyntheticLanguage> languages = {{"en", 40}, {"es", 40}};
  std::size_t vocab_size = 500;
  std::size_t dim = 16;
  std::uint64_t planted_rotation_seed = 7;
  std::uint64_t sample_seed = 11;
  // Probability that a token is drawn from a trait word list (if the user is
  // positive for the drawn trait).
  double trait_signal_strength = 0.3;
  std::size_t trait_words_per_trait = 10;
  double noise_sigma = 0.0;
  double trait_rotation_angle = 1.2;  // radians
  std::size_t doc_length = 120;
  std::size_t clusters = 32;
  double zipf_exponent = 1.0;
};

struct SyntheticTruth {
  std::string target_language;
  // Source -> target rotation per language (identity for the target).
  std::map<std::string, Matrix> semantic_maps;
  // Per source language, per trait: multilingual source -> target rotation.
  std::map<std::string, PerTrait<Matrix>> trait_maps;
  std::map<std::string, PerTrait<std::vector<std::string>>> trait_words;
  // Paired trait words (source word, target word) per language and trait.
  std::map<std::string, PerTrait<std::vector<std::pair<std::string, std::string>>>> trait_pairs;
  std::map<std::string, std::map<std::string, PerTrait<Label>>> planted_labels;
};

struct SyntheticLanguageData {
  Corpus corpus;
  EmbeddingTable mono;
};

struct SyntheticData {
  std::vector<SyntheticLanguageData> languages;
  SyntheticTruth truth;

  const SyntheticLanguageData& language(std::string_view code) const;
};

SyntheticData generate_synthetic_corpus(const SyntheticSpec& spec);

// <dir>/<lang>.vec, <dir>/<lang>.jsonl and <dir>/ground_truth.json
void write_synthetic_fixture(const SyntheticData& data, const std::filesystem::path& dir);
SyntheticTruth load_ground_truth(const std::filesystem::path& path);

// Name of vocabulary entry i in a language.
std::string synthetic_word(std::string_view language, std::size_t index);

}  // namespace traitalign
