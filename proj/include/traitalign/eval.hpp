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

// Metrics and the cross-validated model grid.

#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "traitalign/cnn.hpp"

namespace traitalign {

struct F1Result {
  double value = 0.0;
  bool undefined = false;  // precision or recall had a zero denominator
};

// F1 of the class `positive`.
F1Result f1_score(std::span<const Label> predictions, std::span<const Label> labels,
                  Label positive = Label::positive);
// Mean of the two per-class F1 values.
double macro_f1(std::span<const Label> predictions, std::span<const Label> labels);

double rmse(std::span<const double> predicted, std::span<const double> truth);

enum class Task { classification, regression };
std::string_view task_name(Task t);
Task parse_task(std::string_view name);

enum class ModelKind { lgr_mono, lgr_multi, lgr_global_trait, cnn_mono, cnn_global_trait };
inline constexpr std::array<ModelKind, 5> kAllModels = {
    ModelKind::lgr_mono, ModelKind::lgr_multi, ModelKind::lgr_global_trait, ModelKind::cnn_mono,
    ModelKind::cnn_global_trait};
std::string_view model_name(ModelKind m);
ModelKind parse_model(std::string_view name);
// Models that add the target-language corpus to training.
bool uses_target_augmentation(ModelKind m);

struct GridConfig {
  std::vector<ModelKind> models{kAllModels.begin(), kAllModels.end()};
  Task task = Task::classification;
  std::size_t k = 5;
  std::uint64_t seed = 1;
  TrainConfig linear_train{};
  TrainConfig cnn_train{};
  CnnConfig cnn{};
  bool macro_f1 = false;
  // Evaluated languages; empty means every corpus.
  std::vector<std::string> languages;

  void validate() const;
};

json grid_to_json(const GridConfig& grid);
GridConfig grid_from_json(const json& j, GridConfig base = {});

struct ExperimentInputs {
  std::string target_language;
  std::map<std::string, Corpus> corpora;  // median-split
  std::vector<EmbeddingTable> mono_tables;
  std::map<std::string, OrthogonalMap> semantic_maps;
  std::map<std::string, TraitAlignment> trait_maps;
};

struct ExperimentReport {
  std::string language;
  ModelKind model = ModelKind::lgr_mono;
  Task task = Task::classification;
  std::string metric;  // "f1", "macro_f1" or "rmse"
  PerTrait<double> values{};
  double average = 0.0;  // mean of the five trait values
  PerTrait<std::vector<double>> folds;
  std::uint64_t seed = 0;
  std::string config_digest;
};

// Runs every (language, model, trait) cell with k-fold cross-validation.
// The target language only runs the -mono models.
std::vector<ExperimentReport> run_experiment(const ExperimentInputs& inputs, const GridConfig& grid);

json reports_to_json(const std::vector<ExperimentReport>& reports);
std::vector<ExperimentReport> reports_from_json(const json& j);

// One block per language: rows are models, columns the five traits and the
// average.
std::string render_table(const std::vector<ExperimentReport>& reports);

}  // namespace traitalign
