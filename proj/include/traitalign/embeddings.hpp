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

// Word embedding tables: fastText .vec I/O, normalization and similarity
// queries.

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "traitalign/common.hpp"

namespace traitalign {

// Which space a table lives in: raw monolingual, semantically aligned
// multilingual, or aligned for one personality trait.
struct SpaceTag {
  enum class Kind { mono, multi, trait };
  Kind kind = Kind::mono;
  Trait trait = Trait::Extr;  // meaningful only for Kind::trait

  static SpaceTag mono() { return {Kind::mono, Trait::Extr}; }
  static SpaceTag multi() { return {Kind::multi, Trait::Extr}; }
  static SpaceTag of_trait(Trait t) { return {Kind::trait, t}; }
  static SpaceTag parse(std::string_view text);
  std::string to_string() const;
  bool operator==(const SpaceTag&) const = default;
};

// Immutable vocabulary -> vector table. Rows are stored contiguously in a
// row-major matrix; rows listed in zero_rows() were zero when normalized.
class EmbeddingTable {
 public:
  EmbeddingTable(std::string language, SpaceTag space, std::size_t dim);
  // Throws ValueError on duplicate words, whitespace in words, dimension
  // mismatch or non-finite values.
  EmbeddingTable(std::string language, SpaceTag space, std::vector<std::string> words,
                 Matrix vectors);

  const std::string& language() const { return language_; }
  SpaceTag space() const { return space_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }

  const std::vector<std::string>& words() const { return words_; }
  const std::string& word(std::size_t row) const { return words_[row]; }
  const Matrix& vectors() const { return vectors_; }
  auto row(std::size_t i) const { return vectors_.row(static_cast<Eigen::Index>(i)); }

  std::optional<std::size_t> find(std::string_view word) const;
  bool contains(std::string_view word) const { return find(word).has_value(); }

  const std::vector<std::size_t>& zero_rows() const { return zero_rows_; }

  // New table with the same words, given vectors and tag.
  EmbeddingTable with_vectors(Matrix vectors, SpaceTag space) const;

 private:
  friend EmbeddingTable normalize(const EmbeddingTable& table);

  std::string language_;
  SpaceTag space_;
  std::size_t dim_;
  std::vector<std::string> words_;
  Matrix vectors_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::size_t> zero_rows_;
};

struct VecLoadResult {
  EmbeddingTable table;
  std::size_t duplicate_words = 0;  // later occurrences dropped
};

// Reads the fastText text format: "<count> <dim>" header, then one
// "word v1 ... vdim" row per line.
VecLoadResult load_vec(const std::filesystem::path& path, std::string language,
                       SpaceTag space = SpaceTag::mono(),
                       std::optional<std::size_t> limit = std::nullopt);
EmbeddingTable parse_vec(std::string_view text, std::string language, SpaceTag space,
                         std::optional<std::size_t> limit, std::size_t* duplicates);
void save_vec(const EmbeddingTable& table, const std::filesystem::path& path);
std::string format_vec(const EmbeddingTable& table);

// Unit L2 rows; zero rows stay zero and are reported in zero_rows().
EmbeddingTable normalize(const EmbeddingTable& table);

// Subtracts the mean vector from every row.
EmbeddingTable center(const EmbeddingTable& table);

struct SimilarityMetric {
  enum class Kind { cosine, csls };
  Kind kind = Kind::cosine;
  std::size_t csls_k = 10;

  static SimilarityMetric cosine() { return {Kind::cosine, 10}; }
  static SimilarityMetric csls(std::size_t k = 10);
};

struct Neighbor {
  std::size_t row;
  std::string word;
  double score;
};

// k best rows of `table` for `query`, descending score, ties by ascending row.
// For CSLS the hubness penalty of each candidate is measured against
// `source_context` (the other side's vectors); with no context the query
// itself is the only source point.
std::vector<Neighbor> nearest_neighbors(const EmbeddingTable& table, const Vector& query,
                                        std::size_t k, SimilarityMetric metric,
                                        const Matrix* source_context = nullptr);

using IndexPair = std::pair<std::size_t, std::size_t>;

// Mean cosine similarity of mapped_source.row(i) and target.row(j) over pairs.
double mean_cosine(const Matrix& mapped_source, const Matrix& target,
                   std::span<const IndexPair> pairs);

// Rows scaled to unit norm; zero rows left zero.
Matrix unit_rows(const Matrix& m);

}  // namespace traitalign
