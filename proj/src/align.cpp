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

#include "traitalign/align.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "traitalign/json_util.hpp"

namespace traitalign {

namespace {

// After the configured orthogonalization step, further rounds run until the
// error is back under half the invariant tolerance.
constexpr double kEnforcedError = 0.5 * kOrthogonalityTolerance;
constexpr std::size_t kMaxOrthogonalizeRounds = 200;
// Extra rounds use a strong step: the deviation shrinks by 1 - 2 * 0.45 = 0.1
// per round instead of 1 - 2 * beta.
constexpr double kEnforcementBeta = 0.45;
// A map step that would push the error to this level is halved until it does
// not; orthogonalize needs its input strictly inside error 1.
constexpr double kMaxStepError = 0.5;
constexpr std::size_t kMaxStepHalvings = 60;

double clamped(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

double mean_log(std::span<const double> probs, double target) {
  double s = 0.0;
  for (double p : probs) {
    const double c = clamped(p);
    s += target * std::log(c) + (1.0 - target) * std::log(1.0 - c);
  }
  return s / static_cast<double>(probs.size());
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

std::vector<std::size_t> sample_rows(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> out(count);
  for (auto& r : out) r = rng.below(n);
  return out;
}

Matrix head_rows(const Matrix& m, std::size_t limit) {
  if (limit == 0 || limit >= static_cast<std::size_t>(m.rows())) return m;
  return m.topRows(static_cast<Eigen::Index>(limit));
}

// Mean of the k largest entries of each row.
Vector top_k_row_mean(const Matrix& s, std::size_t k) {
  Vector out(s.rows());
  const std::size_t kk = std::min<std::size_t>(k, static_cast<std::size_t>(s.cols()));
  std::vector<double> row(static_cast<std::size_t>(s.cols()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    std::copy(s.row(i).data(), s.row(i).data() + s.cols(), row.begin());
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(kk), row.end(),
                      std::greater<>());
    out(i) = std::accumulate(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(kk), 0.0) /
             static_cast<double>(kk);
  }
  return out;
}

}  // namespace

std::string_view provenance_name(MapProvenance p) {
  switch (p) {
    case MapProvenance::identity: return "identity";
    case MapProvenance::procrustes: return "procrustes";
    case MapProvenance::adversarial: return "adversarial";
    case MapProvenance::adversarial_refined: return "adversarial+refined";
  }
  return "?";
}

MapProvenance parse_provenance(std::string_view name) {
  for (auto p : {MapProvenance::identity, MapProvenance::procrustes, MapProvenance::adversarial,
                 MapProvenance::adversarial_refined}) {
    if (provenance_name(p) == name) return p;
  }
  throw SchemaError("unknown map provenance '" + std::string(name) + "'");
}

OrthogonalMap::OrthogonalMap(Matrix matrix, MapProvenance provenance, double tolerance)
    : matrix_(std::move(matrix)), provenance_(provenance) {
  if (matrix_.rows() != matrix_.cols() || matrix_.rows() == 0) {
    throw ValueError("orthogonal map must be a non-empty square matrix");
  }
  if (!matrix_.allFinite()) throw ValueError("orthogonal map has non-finite entries");
  const double err = traitalign::orthogonality_error(matrix_);
  if (err > tolerance) {
    std::ostringstream ss;
    ss << "matrix is not orthogonal: ||M^T M - I||_F = " << err << " > " << tolerance;
    throw ValueError(ss.str());
  }
}

OrthogonalMap OrthogonalMap::identity(std::size_t dim) {
  return OrthogonalMap(Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)),
                       MapProvenance::identity);
}

Vector OrthogonalMap::apply(const Vector& x) const {
  if (x.size() != matrix_.cols()) throw ValueError("apply_map: dimension mismatch");
  return matrix_ * x;
}

Matrix OrthogonalMap::apply_rows(const Matrix& rows) const {
  if (rows.cols() != matrix_.cols()) throw ValueError("apply_map: dimension mismatch");
  return rows * matrix_.transpose();
}

OrthogonalMap OrthogonalMap::compose(const OrthogonalMap& inner) const {
  if (inner.dim() != dim()) throw ValueError("compose: dimension mismatch");
  return OrthogonalMap(matrix_ * inner.matrix_, provenance_, 2 * kOrthogonalityTolerance);
}

EmbeddingTable apply_map(const OrthogonalMap& map, const EmbeddingTable& table, SpaceTag space) {
  if (map.dim() != table.dim()) {
    throw ValueError("apply_map: map dimension " + std::to_string(map.dim()) +
                     " != table dimension " + std::to_string(table.dim()));
  }
  if (table.empty()) return EmbeddingTable(table.language(), space, table.dim());
  return table.with_vectors(map.apply_rows(table.vectors()), space);
}

ProcrustesResult procrustes(const Matrix& source, const Matrix& target) {
  if (source.rows() == 0) throw ValueError("procrustes needs at least one pair");
  if (source.rows() != target.rows() || source.cols() != target.cols()) {
    throw ValueError("procrustes: source and target shapes differ");
  }
  const Matrix cross = target.transpose() * source;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix m = svd.matrixU() * svd.matrixV().transpose();
  const auto& sv = svd.singularValues();
  const double top = sv(0);
  const bool unique = top > 0.0 && sv(sv.size() - 1) > 1e-12 * top;
  const double objective = (source * m.transpose() - target).squaredNorm();
  return {OrthogonalMap(std::move(m), MapProvenance::procrustes, 1e-9), unique, objective};
}

Matrix orthogonalize(const Matrix& m, double beta) {
  if (!(beta > 0.0 && beta < 0.5)) throw ValueError("orthogonalize: beta must lie in (0, 0.5)");
  const double before = orthogonality_error(m);
  if (!(before < 1.0)) {
    std::ostringstream ss;
    ss << "orthogonalize: matrix too far from orthogonal (error " << before
       << "); use smaller map update steps";
    throw TrainingError(ss.str());
  }
  Matrix out = (1.0 + beta) * m - beta * (m * m.transpose()) * m;
  const double after = orthogonality_error(out);
  if (after > before && after > 1e-10) {
    std::ostringstream ss;
    ss << "orthogonalize diverged (" << before << " -> " << after
       << "); use smaller map update steps";
    throw TrainingError(ss.str());
  }
  return out;
}

double discriminator_loss(std::span<const double> p_mapped, std::span<const double> q_target,
                          double smoothing) {
  if (p_mapped.empty() || q_target.empty()) throw ValueError("loss batches must be non-empty");
  return -mean_log(p_mapped, 1.0 - smoothing) - mean_log(q_target, smoothing);
}

double mapping_loss(std::span<const double> p_mapped, std::span<const double> q_target,
                    double smoothing) {
  if (p_mapped.empty() || q_target.empty()) throw ValueError("loss batches must be non-empty");
  return -mean_log(p_mapped, smoothing) - mean_log(q_target, 1.0 - smoothing);
}

double discriminator_loss(const Discriminator& d, const Matrix& w, const Matrix& source_batch,
                          const Matrix& target_batch, double smoothing) {
  const Vector p = d.predict(source_batch * w.transpose());
  const Vector q = d.predict(target_batch);
  return discriminator_loss(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())),
                            std::span<const double>(q.data(), static_cast<std::size_t>(q.size())),
                            smoothing);
}

double mapping_loss(const Discriminator& d, const Matrix& w, const Matrix& source_batch,
                    const Matrix& target_batch, double smoothing) {
  const Vector p = d.predict(source_batch * w.transpose());
  const Vector q = d.predict(target_batch);
  return mapping_loss(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())),
                      std::span<const double>(q.data(), static_cast<std::size_t>(q.size())),
                      smoothing);
}

AdversarialConfig AdversarialConfig::desk() {
  AdversarialConfig c;
  c.epochs = 5;
  c.iterations_per_epoch = 2000;
  c.disc_hidden = 128;
  return c;
}

AdversarialConfig AdversarialConfig::paper() {
  AdversarialConfig c;
  c.epochs = 5;
  c.iterations_per_epoch = 100000;
  c.disc_hidden = 2048;
  return c;
}

void AdversarialConfig::validate() const {
  if (epochs == 0 || iterations_per_epoch == 0 || batch_size == 0 ||
      disc_steps_per_map_step == 0 || disc_hidden == 0 || restarts == 0) {
    throw ConfigError("adversarial config counts must be positive");
  }
  if (!(orthogonalize_beta > 0.0 && orthogonalize_beta < 0.5)) {
    throw ConfigError("orthogonalize_beta must lie in (0, 0.5)");
  }
  if (!(disc_lr > 0.0) || !(map_lr > 0.0) || !(lr_decay > 0.0)) {
    throw ConfigError("learning rates and decay must be positive");
  }
  if (label_smoothing < 0.0 || label_smoothing > 0.2) {
    throw ConfigError("label_smoothing must lie in [0, 0.2]");
  }
  if (disc_input_dropout < 0.0 || disc_input_dropout >= 1.0) {
    throw ConfigError("disc_input_dropout must lie in [0, 1)");
  }
}

std::vector<IndexPair> induce_dictionary(const Matrix& mapped_source, const Matrix& target,
                                         SimilarityMetric metric) {
  if (mapped_source.rows() == 0 || target.rows() == 0) return {};
  Matrix s = unit_rows(mapped_source) * unit_rows(target).transpose();
  if (metric.kind == SimilarityMetric::Kind::csls) {
    const Vector r_src = top_k_row_mean(s, metric.csls_k);
    const Vector r_tgt = top_k_row_mean(s.transpose(), metric.csls_k);
    s = 2.0 * s;
    s.colwise() -= r_src;
    s.rowwise() -= r_tgt.transpose();
  }
  std::vector<Eigen::Index> best_tgt(static_cast<std::size_t>(s.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) s.row(i).maxCoeff(&best_tgt[static_cast<std::size_t>(i)]);
  std::vector<Eigen::Index> best_src(static_cast<std::size_t>(s.cols()));
  for (Eigen::Index j = 0; j < s.cols(); ++j) s.col(j).maxCoeff(&best_src[static_cast<std::size_t>(j)]);
  std::vector<IndexPair> pairs;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const auto j = best_tgt[static_cast<std::size_t>(i)];
    if (best_src[static_cast<std::size_t>(j)] == i) {
      pairs.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
  }
  return pairs;
}

double validation_score(const Matrix& w, const Matrix& source, const Matrix& target,
                        std::span<const IndexPair> dictionary, SimilarityMetric metric) {
  const Matrix mapped = source * w.transpose();
  if (!dictionary.empty()) return mean_cosine(mapped, target, dictionary);
  const auto pairs = induce_dictionary(mapped, target, metric);
  if (pairs.empty()) return -1.0;
  return mean_cosine(mapped, target, pairs);
}

AdversarialResult adversarial_train(const Matrix& source, const Matrix& target,
                                    const AdversarialConfig& config,
                                    std::span<const IndexPair> dictionary) {
  config.validate();
  if (source.cols() != target.cols()) {
    throw ValueError("adversarial_train: source dim " + std::to_string(source.cols()) +
                     " != target dim " + std::to_string(target.cols()));
  }
  if (source.rows() == 0 || target.rows() == 0) {
    throw ValueError("adversarial_train needs non-empty source and target");
  }
  const auto d = static_cast<std::size_t>(source.cols());
  const std::size_t b = config.batch_size;
  const double s = config.label_smoothing;
  Rng rng(config.seed);
  Discriminator disc(d, config.disc_hidden, config.disc_input_dropout, rng);
  Matrix w = config.init == MapInit::identity ? Matrix(Matrix::Identity(source.cols(), source.cols()))
                                              : random_orthogonal(d, rng);

  const Matrix val_src = head_rows(source, config.validation_words);
  const Matrix val_tgt = head_rows(target, config.validation_words);
  auto validate = [&](const Matrix& m) {
    return validation_score(m, val_src, val_tgt, dictionary, config.dictionary_metric);
  };

  // Disc step inputs: B mapped source rows labelled 1 - s, then B target rows
  // labelled s; each half is averaged separately.
  Vector disc_targets(static_cast<Eigen::Index>(2 * b));
  Vector map_targets(static_cast<Eigen::Index>(2 * b));
  Vector weights = Vector::Constant(static_cast<Eigen::Index>(2 * b), 1.0 / static_cast<double>(b));
  for (std::size_t i = 0; i < b; ++i) {
    disc_targets(static_cast<Eigen::Index>(i)) = 1.0 - s;
    disc_targets(static_cast<Eigen::Index>(b + i)) = s;
    map_targets(static_cast<Eigen::Index>(i)) = s;
    map_targets(static_cast<Eigen::Index>(b + i)) = 1.0 - s;
  }

  std::vector<EpochRecord> history;
  const double initial = validate(w);
  history.push_back({0, initial, 0.0, 0.0, orthogonality_error(w)});
  Matrix best = w;
  double best_val = initial;
  std::size_t best_epoch = 0;
  double disc_lr = config.disc_lr;
  double map_lr = config.map_lr;
  double max_orth = orthogonality_error(w);
  std::size_t updates = 0;
  std::size_t shortened = 0;
  Matrix inputs(static_cast<Eigen::Index>(2 * b), source.cols());
  Matrix grad;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double disc_sum = 0.0, map_sum = 0.0, epoch_orth = 0.0;
    for (std::size_t it = 0; it < config.iterations_per_epoch; ++it) {
      for (std::size_t k = 0; k < config.disc_steps_per_map_step; ++k) {
        const Matrix xb = gather_rows(source, sample_rows(static_cast<std::size_t>(source.rows()), b, rng));
        const Matrix yb = gather_rows(target, sample_rows(static_cast<std::size_t>(target.rows()), b, rng));
        inputs.topRows(static_cast<Eigen::Index>(b)) = xb * w.transpose();
        inputs.bottomRows(static_cast<Eigen::Index>(b)) = yb;
        const double loss = disc.train_step(inputs, disc_targets, weights, disc_lr, rng);
        if (!std::isfinite(loss) || !disc.finite()) {
          std::ostringstream ss;
          ss << "non-finite discriminator loss at epoch " << epoch << " iteration " << it
             << " (loss " << loss << ", ||W||_F " << w.norm() << ")";
          throw TrainingError(ss.str());
        }
        disc_sum += loss / static_cast<double>(config.disc_steps_per_map_step);
      }

      const Matrix xb = gather_rows(source, sample_rows(static_cast<std::size_t>(source.rows()), b, rng));
      const Matrix yb = gather_rows(target, sample_rows(static_cast<std::size_t>(target.rows()), b, rng));
      inputs.topRows(static_cast<Eigen::Index>(b)) = xb * w.transpose();
      inputs.bottomRows(static_cast<Eigen::Index>(b)) = yb;
      const double loss = disc.input_gradient(inputs, map_targets, weights, grad);
      if (!std::isfinite(loss) || !grad.allFinite()) {
        std::ostringstream ss;
        ss << "non-finite mapping loss at epoch " << epoch << " iteration " << it << " (loss "
           << loss << ", ||W||_F " << w.norm() << ")";
        throw TrainingError(ss.str());
      }
      map_sum += loss;
      // d(mapped_i)/dW: mapped_i = W x_i, so dL/dW = sum_i g_i x_i^T.
      Matrix step = map_lr * (grad.topRows(static_cast<Eigen::Index>(b)).transpose() * xb);
      if (orthogonality_error(w - step) >= kMaxStepError) {
        ++shortened;
        for (std::size_t h = 0; h < kMaxStepHalvings && orthogonality_error(w - step) >= kMaxStepError; ++h) {
          step *= 0.5;
        }
      }
      w = orthogonalize(w - step, config.orthogonalize_beta);
      double err = orthogonality_error(w);
      for (std::size_t r = 0; err > kEnforcedError && r < kMaxOrthogonalizeRounds; ++r) {
        w = orthogonalize(w, kEnforcementBeta);
        err = orthogonality_error(w);
      }
      epoch_orth = std::max(epoch_orth, err);
      ++updates;
    }
    max_orth = std::max(max_orth, epoch_orth);
    disc_lr *= config.lr_decay;
    map_lr *= config.lr_decay;

    const double val = validate(w);
    const double n_it = static_cast<double>(config.iterations_per_epoch);
    history.push_back({epoch, val, disc_sum / n_it, map_sum / n_it, epoch_orth});
    if (val > best_val) {
      best_val = val;
      best = w;
      best_epoch = epoch;
    }
  }

  const MapProvenance prov = best_epoch == 0 && config.init == MapInit::identity
                                 ? MapProvenance::identity
                                 : MapProvenance::adversarial;
  return AdversarialResult{OrthogonalMap(best, prov), std::move(history), best_epoch, best_val,
                           std::move(disc), max_orth, updates, shortened};
}

RefineResult refine_with_procrustes(const OrthogonalMap& w, const Matrix& source,
                                    const Matrix& target, std::span<const IndexPair> dictionary) {
  if (dictionary.empty()) throw ValueError("refine_with_procrustes needs a non-empty dictionary");
  Matrix xs(static_cast<Eigen::Index>(dictionary.size()), source.cols());
  Matrix ys(static_cast<Eigen::Index>(dictionary.size()), target.cols());
  for (std::size_t i = 0; i < dictionary.size(); ++i) {
    const auto [a, b] = dictionary[i];
    if (a >= static_cast<std::size_t>(source.rows()) || b >= static_cast<std::size_t>(target.rows())) {
      throw ValueError("refine_with_procrustes: dictionary index out of range");
    }
    xs.row(static_cast<Eigen::Index>(i)) = source.row(static_cast<Eigen::Index>(a));
    ys.row(static_cast<Eigen::Index>(i)) = target.row(static_cast<Eigen::Index>(b));
  }
  const double before = validation_score(w.matrix(), source, target, dictionary, SimilarityMetric::cosine());
  ProcrustesResult p = procrustes(xs, ys);
  const double after = validation_score(p.map.matrix(), source, target, dictionary, SimilarityMetric::cosine());
  OrthogonalMap refined(p.map.matrix(),
                        w.provenance() == MapProvenance::adversarial ||
                                w.provenance() == MapProvenance::adversarial_refined
                            ? MapProvenance::adversarial_refined
                            : MapProvenance::procrustes,
                        1e-9);
  return {std::move(refined), before, after, p.unique};
}

RefineResult iterative_refinement(const OrthogonalMap& w, const Matrix& source,
                                  const Matrix& target, std::size_t iterations,
                                  SimilarityMetric metric) {
  const double start = validation_score(w.matrix(), source, target, {}, metric);
  RefineResult best{w, start, start, true};
  OrthogonalMap current = w;
  for (std::size_t i = 0; i < iterations; ++i) {
    const auto dict = induce_dictionary(current.apply_rows(source), target, metric);
    if (dict.empty()) break;
    RefineResult r = refine_with_procrustes(current, source, target, dict);
    current = r.map;
    const double val = validation_score(current.matrix(), source, target, {}, metric);
    if (val > best.validation_after) {
      best = RefineResult{current, start, val, r.unique};
    }
  }
  return best;
}

namespace {

SemanticAlignment align_once(const Matrix& source, const Matrix& target, const AdversarialConfig& config,
                             std::span<const IndexPair> dictionary) {
  AdversarialResult adv = adversarial_train(source, target, config, dictionary);
  OrthogonalMap map = adv.map;
  double val = adv.best_validation;
  if (config.refinement_iterations > 0) {
    if (!dictionary.empty()) {
      RefineResult r = refine_with_procrustes(map, source, target, dictionary);
      if (r.validation_after >= val) {
        map = r.map;
        val = r.validation_after;
      }
    } else {
      const Matrix src = head_rows(source, config.validation_words);
      const Matrix tgt = head_rows(target, config.validation_words);
      RefineResult r = iterative_refinement(map, src, tgt, config.refinement_iterations,
                                            config.dictionary_metric);
      if (r.validation_after >= val) {
        map = r.map;
        val = r.validation_after;
      }
    }
  }
  const double acc = discriminator_accuracy(adv.discriminator, map.apply_rows(source), target);
  return {std::move(map), std::move(adv.history), val, acc};
}

}  // namespace

SemanticAlignment align_spaces(const Matrix& source, const Matrix& target,
                               const AdversarialConfig& config,
                               std::span<const IndexPair> dictionary) {
  config.validate();
  SemanticAlignment best = align_once(source, target, config, dictionary);
  for (std::size_t r = 1; r < config.restarts; ++r) {
    AdversarialConfig c = config;
    c.seed = config.seed + r;
    SemanticAlignment next = align_once(source, target, c, dictionary);
    // Gains below 1e-9 are rounding; earlier runs win ties.
    if (next.validation > best.validation + 1e-9) best = std::move(next);
  }
  return best;
}

const OrthogonalMap& TraitAlignment::map(Trait t) const {
  const auto& m = maps[trait_index(t)];
  if (!m) throw MissingArtifactError("no trait map for " + std::string(trait_name(t)));
  return *m;
}

bool TraitAlignment::complete() const {
  return std::all_of(maps.begin(), maps.end(), [](const auto& m) { return m.has_value(); });
}

Matrix lexicon_vectors(const EmbeddingTable& table, const TraitLexicon& lexicon,
                       std::vector<std::string>* used_words) {
  std::vector<std::size_t> rows;
  for (const auto& [word, weight] : lexicon.ranked_words) {
    if (auto r = table.find(word)) {
      rows.push_back(*r);
      if (used_words) used_words->push_back(word);
    }
  }
  return gather_rows(table.vectors(), rows);
}

TraitMapResult train_trait_map(const EmbeddingTable& multi_source,
                               const EmbeddingTable& multi_target,
                               const TraitLexicon& lexicon_source,
                               const TraitLexicon& lexicon_target, const TraitMapConfig& config) {
  if (multi_source.dim() != multi_target.dim()) throw ValueError("trait map: dimension mismatch");
  const Matrix x = lexicon_vectors(multi_source, lexicon_source);
  const Matrix y = lexicon_vectors(multi_target, lexicon_target);
  const auto n_x = static_cast<std::size_t>(x.rows());
  const auto n_y = static_cast<std::size_t>(y.rows());
  const std::string trait(trait_name(lexicon_source.trait));
  if (n_x < config.min_lexicon_size || n_y < config.min_lexicon_size) {
    throw ValueError("trait " + trait + ": only " + std::to_string(n_x) + " source / " +
                     std::to_string(n_y) + " target lexicon words have vectors (minimum " +
                     std::to_string(config.min_lexicon_size) + ")");
  }
  AdversarialResult adv = adversarial_train(x, y, config.adversarial);
  OrthogonalMap map = adv.map;
  double val = adv.best_validation;
  if (config.adversarial.refinement_iterations > 0) {
    RefineResult r = iterative_refinement(map, x, y, config.adversarial.refinement_iterations,
                                          config.adversarial.dictionary_metric);
    if (r.validation_after >= val) {
      map = r.map;
      val = r.validation_after;
    }
  }
  return {std::move(map), std::move(adv.history), val, n_x, n_y};
}

TraitAlignment train_global_trait(const EmbeddingTable& multi_source,
                                  const EmbeddingTable& multi_target,
                                  const PerTrait<TraitLexicon>& lexicons_source,
                                  const PerTrait<TraitLexicon>& lexicons_target,
                                  const TraitMapConfig& config) {
  TraitAlignment out;
  out.source_language = multi_source.language();
  out.target_language = multi_target.language();
  for (Trait t : kTraits) {
    const auto ti = trait_index(t);
    if (lexicons_source[ti].trait != t || lexicons_target[ti].trait != t) {
      throw ValueError("lexicon for slot " + std::string(trait_name(t)) + " has the wrong trait");
    }
    TraitMapConfig c = config;
    // Distinct but reproducible seeds per trait.
    c.adversarial.seed = config.adversarial.seed + 1000003ull * (ti + 1);
    TraitMapResult r = train_trait_map(multi_source, multi_target, lexicons_source[ti],
                                       lexicons_target[ti], c);
    out.maps[ti] = r.map;
    for (const auto& h : r.history) out.validation_history[ti].push_back(h.validation);
    out.validation_history[ti].push_back(r.validation);
  }
  return out;
}

std::string map_to_json(const MapFile& file) {
  const Matrix& m = file.map.matrix();
  json header{{"dim", file.map.dim()},
              {"provenance", std::string(provenance_name(file.map.provenance()))},
              {"source_language", file.source_language},
              {"target_language", file.target_language},
              {"trait", file.trait ? json(std::string(trait_name(*file.trait))) : json(nullptr)},
              {"validation", file.validation},
              {"layout", "row-major"}};
  json data = json::array();
  for (Eigen::Index i = 0; i < m.size(); ++i) data.push_back(m.data()[i]);
  json j{{"header", std::move(header)}, {"data", std::move(data)}};
  return j.dump();
}

MapFile map_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("map file: invalid JSON: ") + e.what());
  }
  try {
    const auto& h = j.at("header");
    const auto dim = h.at("dim").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (dim <= 0 || static_cast<Eigen::Index>(data.size()) != dim * dim) {
      throw SchemaError("map file: data length does not match dim^2");
    }
    Matrix m(dim, dim);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = data[static_cast<std::size_t>(i)].get<double>();
    std::optional<Trait> trait;
    if (!h.at("trait").is_null()) trait = parse_trait(h["trait"].get<std::string>());
    return MapFile{OrthogonalMap(std::move(m), parse_provenance(h.at("provenance").get<std::string>())),
                   h.at("source_language").get<std::string>(),
                   h.at("target_language").get<std::string>(), trait,
                   h.value("validation", 0.0)};
  } catch (const json::exception& e) {
    throw SchemaError(std::string("map file: ") + e.what());
  }
}

void save_map(const MapFile& file, const std::filesystem::path& path) {
  write_file(path, map_to_json(file));
}

MapFile load_map(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("map file not found: " + path.string());
  try {
    return map_from_json(read_file(path));
  } catch (const ValueError& e) {
    throw ValueError(path.string() + ": " + e.what());
  }
}

}  // namespace traitalign
