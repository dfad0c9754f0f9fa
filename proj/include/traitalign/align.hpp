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

// Orthogonal maps between embedding spaces.
//
// Conventions: embeddings are rows, so a batch X is n x d. A map M sends a
// source vector x to M x; on row batches that is X M^T. The Procrustes
// solution for paired rows (x_i, y_i) is M = U V^T with U S V^T = svd(Y^T X).

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "traitalign/discriminator.hpp"
#include "traitalign/embeddings.hpp"
#include "traitalign/lexicon.hpp"

namespace traitalign {

enum class MapProvenance { identity, procrustes, adversarial, adversarial_refined };

std::string_view provenance_name(MapProvenance p);
MapProvenance parse_provenance(std::string_view name);

inline constexpr double kOrthogonalityTolerance = 1e-3;

// A d x d matrix with ||M^T M - I||_F <= tolerance, checked on construction.
class OrthogonalMap {
 public:
  OrthogonalMap(Matrix matrix, MapProvenance provenance,
                double tolerance = kOrthogonalityTolerance);
  static OrthogonalMap identity(std::size_t dim);

  const Matrix& matrix() const { return matrix_; }
  std::size_t dim() const { return static_cast<std::size_t>(matrix_.rows()); }
  MapProvenance provenance() const { return provenance_; }
  double orthogonality_error() const { return traitalign::orthogonality_error(matrix_); }

  Vector apply(const Vector& x) const;
  Matrix apply_rows(const Matrix& rows) const;
  // this * inner: apply `inner` first.
  OrthogonalMap compose(const OrthogonalMap& inner) const;

 private:
  Matrix matrix_;
  MapProvenance provenance_;
};

EmbeddingTable apply_map(const OrthogonalMap& map, const EmbeddingTable& table, SpaceTag space);

struct ProcrustesResult {
  OrthogonalMap map;
  bool unique = true;  // false when the cross-covariance is rank deficient
  double objective = 0.0;  // sum_i ||M x_i - y_i||^2
};

ProcrustesResult procrustes(const Matrix& source, const Matrix& target);

// M' = (1 + beta) M - beta (M M^T) M. Throws TrainingError if the
// orthogonality error grows.
Matrix orthogonalize(const Matrix& m, double beta);

// Discriminator and mapping objectives of the adversarial game, on
// discriminator outputs for the mapped source batch (p) and the target
// batch (q). Label smoothing s turns
// the targets 1 / 0 into 1 - s / s. Probabilities are clamped to
// [1e-9, 1 - 1e-9] before the log.
double discriminator_loss(std::span<const double> p_mapped, std::span<const double> q_target,
                          double smoothing = 0.0);
double mapping_loss(std::span<const double> p_mapped, std::span<const double> q_target,
                    double smoothing = 0.0);
double discriminator_loss(const Discriminator& d, const Matrix& w, const Matrix& source_batch,
                          const Matrix& target_batch, double smoothing = 0.0);
double mapping_loss(const Discriminator& d, const Matrix& w, const Matrix& source_batch,
                    const Matrix& target_batch, double smoothing = 0.0);

enum class MapInit { identity, random_orthogonal };

struct AdversarialConfig {
  std::size_t epochs = 5;
  std::size_t iterations_per_epoch = 2000;
  std::size_t batch_size = 32;
  std::size_t disc_steps_per_map_step = 1;
  double disc_lr = 0.1;
  double map_lr = 0.1;
  double lr_decay = 0.95;  // per epoch
  double orthogonalize_beta = 0.01;
  double label_smoothing = 0.0;
  double disc_input_dropout = 0.1;
  std::size_t disc_hidden = 2048;
  MapInit init = MapInit::identity;
  std::uint64_t seed = 1;
  // Post-training Procrustes refinement rounds on an induced dictionary.
  std::size_t refinement_iterations = 0;
  SimilarityMetric dictionary_metric = SimilarityMetric::cosine();
  // Words used for dictionary induction during validation (0 = all).
  std::size_t validation_words = 0;
  // align_spaces only: independent runs with seeds seed, seed + 1, ...; the
  // one with the best validation score is kept.
  std::size_t restarts = 1;

  static AdversarialConfig desk();
  static AdversarialConfig paper();
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0 = initial map
  double validation = 0.0;
  double disc_loss = 0.0;  // mean over the epoch
  double map_loss = 0.0;
  double max_orthogonality_error = 0.0;
};

struct AdversarialResult {
  OrthogonalMap map;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_validation = 0.0;
  Discriminator discriminator;
  double max_orthogonality_error = 0.0;  // over every map update
  std::size_t map_updates = 0;
  std::size_t shortened_steps = 0;  // map steps halved to stay near-orthogonal
};

// Mutual nearest neighbours between mapped source rows and target rows.
std::vector<IndexPair> induce_dictionary(const Matrix& mapped_source, const Matrix& target,
                                         SimilarityMetric metric = SimilarityMetric::cosine());

// Mean cosine over a dictionary; induced from the current map when
// `dictionary` is empty.
double validation_score(const Matrix& w, const Matrix& source, const Matrix& target,
                        std::span<const IndexPair> dictionary, SimilarityMetric metric);

// Alternating adversarial training of an orthogonal source -> target map.
// Returns the map with the best per-epoch validation score (the initial map
// counts as epoch 0).
AdversarialResult adversarial_train(const Matrix& source, const Matrix& target,
                                    const AdversarialConfig& config,
                                    std::span<const IndexPair> dictionary = {});

struct RefineResult {
  OrthogonalMap map;
  double validation_before = 0.0;
  double validation_after = 0.0;
  bool unique = true;
};

// Exact Procrustes solution on the dictionary pairs.
RefineResult refine_with_procrustes(const OrthogonalMap& w, const Matrix& source,
                                    const Matrix& target, std::span<const IndexPair> dictionary);

// Alternates dictionary induction and Procrustes, keeping the best map.
RefineResult iterative_refinement(const OrthogonalMap& w, const Matrix& source,
                                  const Matrix& target, std::size_t iterations,
                                  SimilarityMetric metric);

struct SemanticAlignment {
  OrthogonalMap map;
  std::vector<EpochRecord> history;
  double validation = 0.0;
  double discriminator_accuracy = 0.0;
};

// Adversarial training followed by config.refinement_iterations Procrustes
// rounds.
SemanticAlignment align_spaces(const Matrix& source, const Matrix& target,
                               const AdversarialConfig& config,
                               std::span<const IndexPair> dictionary = {});

struct TraitMapConfig {
  AdversarialConfig adversarial = AdversarialConfig::desk();
  std::size_t min_lexicon_size = 50;
};

struct TraitMapResult {
  OrthogonalMap map;
  std::vector<EpochRecord> history;
  double validation = 0.0;
  std::size_t source_words = 0;
  std::size_t target_words = 0;
};

struct TraitAlignment {
  std::string source_language;
  std::string target_language;
  PerTrait<std::optional<OrthogonalMap>> maps{};
  PerTrait<std::vector<double>> validation_history;

  const OrthogonalMap& map(Trait t) const;
  bool complete() const;
};

// Multilingual vectors of the lexicon words that have one, in lexicon order.
Matrix lexicon_vectors(const EmbeddingTable& table, const TraitLexicon& lexicon,
                       std::vector<std::string>* used_words = nullptr);

// Trains the map for one trait from source trait words to target trait words.
TraitMapResult train_trait_map(const EmbeddingTable& multi_source,
                               const EmbeddingTable& multi_target,
                               const TraitLexicon& lexicon_source,
                               const TraitLexicon& lexicon_target, const TraitMapConfig& config);

TraitAlignment train_global_trait(const EmbeddingTable& multi_source,
                                  const EmbeddingTable& multi_target,
                                  const PerTrait<TraitLexicon>& lexicons_source,
                                  const PerTrait<TraitLexicon>& lexicons_target,
                                  const TraitMapConfig& config);

struct MapFile {
  OrthogonalMap map;
  std::string source_language;
  std::string target_language;
  std::optional<Trait> trait;
  double validation = 0.0;
};

// JSON header (dim, provenance, languages, trait) followed by the
// row-major matrix. Loading re-checks the orthogonality invariant.
std::string map_to_json(const MapFile& file);
MapFile map_from_json(std::string_view text);
void save_map(const MapFile& file, const std::filesystem::path& path);
MapFile load_map(const std::filesystem::path& path);

}  // namespace traitalign
