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

// Command layer: one JSON config drives align -> lexicon -> globaltrait ->
// {train-eval, project}. Each step records the digests of what it read and
// wrote in <output>/state/<step>.json; downstream steps refuse inputs whose
// digests no longer match unless forced.
//
// Output layout under output_dir:
//   maps/semantic_<lang>.json        maps/trait_<lang>_<Trait>.json
//   lexicons/<lang>_<Trait>.json     reports/<task>.{json,txt}
//   projections/<space>_<method>.{csv,json}
//   state/<step>.json                config/<step>.json (resolved snapshot)

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "traitalign/align.hpp"
#include "traitalign/eval.hpp"
#include "traitalign/json_util.hpp"
#include "traitalign/projection.hpp"
#include "traitalign/synthetic.hpp"

namespace traitalign {

enum class Preset { desk, paper };
std::string_view preset_name(Preset p);
Preset parse_preset(std::string_view name);

struct LanguagePaths {
  std::filesystem::path embeddings;  // .vec
  std::filesystem::path corpus;      // JSONL manifest
  CorpusFormat format = CorpusFormat::pan2015_like;
};

struct PipelineConfig {
  Preset preset = Preset::desk;
  std::uint64_t seed = 1;
  std::string target_language = "en";
  std::map<std::string, LanguagePaths> languages;
  std::filesystem::path output_dir = "out";
  bool normalize_embeddings = true;
  bool center_embeddings = false;
  // Rows read from each .vec (0 = all).
  std::size_t embedding_limit = 0;
  AdversarialConfig alignment;
  TraitMapConfig trait_alignment;
  std::size_t lexicon_size = 3000;
  LexiconOptions lexicon;
  std::size_t visualization_words = 750;
  TsneConfig tsne;
  GridConfig grid;

  // Defaults for a preset before any file values are applied.
  static PipelineConfig defaults(Preset preset);
  // Throws ConfigError unless the target appears exactly once among the
  // languages and there is at least one source language.
  void validate() const;
  std::vector<std::string> source_languages() const;
};

// Relative paths are resolved against `base_dir`. Keys absent from the file
// keep the preset defaults; "preset" in the file selects the base.
PipelineConfig config_from_json(const json& j, const std::filesystem::path& base_dir,
                                std::optional<Preset> preset_override = std::nullopt);
PipelineConfig load_config(const std::filesystem::path& path,
                           std::optional<Preset> preset_override = std::nullopt);
json config_to_json(const PipelineConfig& config);

json adversarial_to_json(const AdversarialConfig& c);
AdversarialConfig adversarial_from_json(const json& j, AdversarialConfig base);

struct RunOptions {
  bool force = false;   // accept stale upstream outputs
  bool quiet = false;   // no progress lines on stderr
};

struct CommandResult {
  std::vector<std::filesystem::path> outputs;
  json summary;  // step-specific numbers, also written to the state file
};

CommandResult cmd_align(const PipelineConfig& config, const RunOptions& options = {});
CommandResult cmd_lexicon(const PipelineConfig& config, const RunOptions& options = {});
CommandResult cmd_globaltrait(const PipelineConfig& config, const RunOptions& options = {});
CommandResult cmd_train_eval(const PipelineConfig& config, const RunOptions& options = {});

enum class ProjectionMethod { pca, tsne };
ProjectionMethod parse_projection_method(std::string_view name);

// space is multi or trait:<Trait>. Words: the top visualization_words of the
// trait lexicon per language (Extr when projecting the multi space unless
// `words_trait` is given).
CommandResult cmd_project(const PipelineConfig& config, SpaceTag space, ProjectionMethod method,
                          std::optional<Trait> words_trait = std::nullopt,
                          const RunOptions& options = {});

// Writes the fixture files and a ready-to-run config.json into `dir`.
CommandResult cmd_synth(const SyntheticSpec& spec, const std::filesystem::path& dir,
                        Preset preset = Preset::desk);

// Paths inside output_dir.
std::filesystem::path semantic_map_path(const PipelineConfig& c, std::string_view lang);
std::filesystem::path trait_map_path(const PipelineConfig& c, std::string_view lang, Trait t);
std::filesystem::path lexicon_path(const PipelineConfig& c, std::string_view lang, Trait t);
std::filesystem::path state_path(const PipelineConfig& c, std::string_view step);

}  // namespace traitalign
