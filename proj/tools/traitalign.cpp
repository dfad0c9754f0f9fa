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

// traitalign: command-line front end. Errors are printed to stderr as one
// JSON object {"error": kind, "message": text} with a nonzero exit code.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "traitalign/pipeline.hpp"

namespace {

using namespace traitalign;

int fail(std::string_view kind, std::string_view message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
  return code;
}

std::vector<SyntheticLanguage> parse_languages(const std::vector<std::string>& specs) {
  std::vector<SyntheticLanguage> out;
  for (const auto& s : specs) {
    const auto colon = s.find(':');
    SyntheticLanguage l;
    l.code = s.substr(0, colon);
    if (colon != std::string::npos) {
      try {
        l.users = std::stoul(s.substr(colon + 1));
      } catch (const std::exception&) {
        throw ConfigError("bad language spec '" + s + "' (expected code:users)");
      }
    }
    if (l.code.empty()) throw ConfigError("bad language spec '" + s + "'");
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Personality-trait-aware cross-lingual embedding alignment"};
  app.require_subcommand(1);

  std::string config_path = "config.json";
  std::optional<std::uint64_t> seed;
  std::string preset_name_arg;
  bool force = false, quiet = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "pipeline config (JSON)");
    sub->add_option("--seed", seed, "overrides the config seed");
    sub->add_option("--preset", preset_name_arg, "desk or paper; overrides the config preset")
        ->check(CLI::IsMember({"desk", "paper"}));
    sub->add_flag("--force", force, "accept stale upstream outputs");
    sub->add_flag("--quiet", quiet, "no progress output");
  };

  auto* align = app.add_subcommand("align", "semantic maps for every source language");
  auto* lexicon = app.add_subcommand("lexicon", "tf-idf trait lexicons for every language");
  auto* globaltrait = app.add_subcommand("globaltrait", "per-trait maps for every source language");
  auto* train_eval = app.add_subcommand("train-eval", "cross-validated model grid");
  auto* project = app.add_subcommand("project", "2-D coordinates of trait words");
  for (auto* sub : {align, lexicon, globaltrait, train_eval, project}) add_common(sub);

  std::string task;
  train_eval->add_option("--task", task, "classification or regression")
      ->check(CLI::IsMember({"classification", "regression"}));

  std::string space = "multi", method = "pca", words_trait;
  project->add_option("--space", space, "multi or trait:<Trait>");
  project->add_option("--method", method, "pca or tsne")->check(CLI::IsMember({"pca", "tsne"}));
  project->add_option("--words-trait", words_trait, "lexicon used for the multi space (default Extr)");

  auto* synth = app.add_subcommand("synth", "write a synthetic fixture and its config");
  SyntheticSpec spec;
  spec.vocab_size = 3000;
  spec.trait_words_per_trait = 50;
  spec.doc_length = 300;
  std::string out_dir = "fixture";
  std::vector<std::string> languages{"en:100", "es:100", "it:100"};
  synth->add_option("--out", out_dir, "fixture directory");
  synth->add_option("--languages", languages, "code:users, target first")->delimiter(',');
  synth->add_option("--vocab", spec.vocab_size, "words per language");
  synth->add_option("--dim", spec.dim, "embedding dimension");
  synth->add_option("--signal", spec.trait_signal_strength, "trait token probability");
  synth->add_option("--trait-words", spec.trait_words_per_trait, "planted words per trait");
  synth->add_option("--noise", spec.noise_sigma, "embedding noise sigma");
  synth->add_option("--doc-length", spec.doc_length, "tokens per user");
  synth->add_option("--seed", seed, "sample seed");
  synth->add_option("--preset", preset_name_arg, "preset written into the config")
      ->check(CLI::IsMember({"desk", "paper"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage_error", e.what(), 2);
  }

  try {
    std::optional<Preset> preset;
    if (!preset_name_arg.empty()) preset = parse_preset(preset_name_arg);
    CommandResult result;
    if (synth->parsed()) {
      spec.languages = parse_languages(languages);
      if (seed) spec.sample_seed = *seed;
      result = cmd_synth(spec, out_dir, preset.value_or(Preset::desk));
    } else {
      PipelineConfig config = load_config(config_path, preset);
      if (seed) config.seed = *seed;
      if (!task.empty()) config.grid.task = parse_task(task);
      const RunOptions options{force, quiet};
      if (align->parsed()) {
        result = cmd_align(config, options);
      } else if (lexicon->parsed()) {
        result = cmd_lexicon(config, options);
      } else if (globaltrait->parsed()) {
        result = cmd_globaltrait(config, options);
      } else if (train_eval->parsed()) {
        result = cmd_train_eval(config, options);
      } else {
        std::optional<Trait> wt;
        if (!words_trait.empty()) wt = parse_trait(words_trait);
        result = cmd_project(config, SpaceTag::parse(space), parse_projection_method(method), wt,
                             options);
      }
    }
    for (const auto& p : result.outputs) std::cout << p.string() << '\n';
    return 0;
  } catch (const Error& e) {
    return fail(e.kind(), e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal_error", e.what(), 3);
  }
}
