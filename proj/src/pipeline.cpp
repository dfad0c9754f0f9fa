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

#include "traitalign/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <iostream>
#include <set>

namespace traitalign {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kAlign = "align";
constexpr std::string_view kLexicon = "lexicon";
constexpr std::string_view kGlobalTrait = "globaltrait";

// FNV-1a, so a language's seed does not depend on which other languages are
// configured.
std::uint64_t language_seed(std::uint64_t seed, std::string_view lang) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : lang) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return seed ^ h;
}

class Progress {
 public:
  Progress(std::string_view step, const RunOptions& options)
      : step_(step), quiet_(options.quiet), start_(std::chrono::steady_clock::now()) {}
  void line(const std::string& message) const {
    if (quiet_) return;
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::cerr << '[' << step_ << " " << format_double(std::round(s * 10.0) / 10.0) << "s] " << message
              << '\n';
  }

 private:
  std::string step_;
  bool quiet_;
  std::chrono::steady_clock::time_point start_;
};

std::string config_digest(const PipelineConfig& c) { return sha256_hex(config_to_json(c).dump()); }

json digest_map(const std::vector<fs::path>& paths) {
  json out = json::object();
  for (const auto& p : paths) out[p.string()] = file_digest(p);
  return out;
}

void write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  write_file(path, j.dump(2) + "\n");
}

void write_state(const PipelineConfig& c, std::string_view step, const std::vector<fs::path>& inputs,
                 const std::vector<fs::path>& outputs, const json& summary) {
  write_json(c.output_dir / "config" / (std::string(step) + ".json"), config_to_json(c));
  write_json(state_path(c, step), json{{"step", step},
                                       {"config_digest", config_digest(c)},
                                       {"inputs", digest_map(inputs)},
                                       {"outputs", digest_map(outputs)},
                                       {"summary", summary}});
}

// Upstream step must have run and everything it read or wrote must still
// hash to the recorded digests.
void require_fresh(const PipelineConfig& c, std::string_view step, const RunOptions& options) {
  const fs::path path = state_path(c, step);
  if (!fs::exists(path)) {
    throw MissingArtifactError("no record of the '" + std::string(step) + "' step in " +
                               c.output_dir.string() + "; run `traitalign " + std::string(step) +
                               "` first");
  }
  json state;
  try {
    state = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  for (const char* section : {"inputs", "outputs"}) {
    for (const auto& [file, digest] : state.at(section).items()) {
      std::string problem;
      if (!fs::exists(file)) {
        problem = "is missing";
      } else if (file_digest(file) != digest.get<std::string>()) {
        problem = "changed since it was recorded";
      }
      if (problem.empty()) continue;
      const std::string msg = std::string(section == std::string("inputs") ? "input " : "output ") +
                              file + " of step '" + std::string(step) + "' " + problem +
                              "; rerun `traitalign " + std::string(step) + "` or pass --force";
      if (!options.force) throw StaleInputError(msg);
      if (!options.quiet) std::cerr << "warning: " << msg << '\n';
    }
  }
}

// Prefixes the message and keeps the concrete error type, so callers can
// still catch e.g. IoError.
template <typename... Kinds>
[[noreturn]] void rethrow_as(const Error& e, const std::string& message) {
  (
      [&] {
        if (dynamic_cast<const Kinds*>(&e)) throw Kinds(message);
      }(),
      ...);
  throw Error(e.kind(), message);
}

template <typename F>
auto with_context(const std::string& context, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    rethrow_as<FormatError, ValueError, SchemaError, SpecError, IoError, ConfigError, TrainingError,
               MissingArtifactError, StaleInputError>(e, context + ": " + e.what());
  }
}

const LanguagePaths& paths_of(const PipelineConfig& c, const std::string& lang) {
  auto it = c.languages.find(lang);
  if (it == c.languages.end()) throw ConfigError("language '" + lang + "' is not configured");
  return it->second;
}

EmbeddingTable load_mono(const PipelineConfig& c, const std::string& lang) {
  const fs::path& p = paths_of(c, lang).embeddings;
  return with_context("embeddings for '" + lang + "'", [&] {
    std::optional<std::size_t> limit;
    if (c.embedding_limit > 0) limit = c.embedding_limit;
    EmbeddingTable t = load_vec(p, lang, SpaceTag::mono(), limit).table;
    if (c.center_embeddings) t = center(t);
    if (c.normalize_embeddings) t = normalize(t);
    return t;
  });
}

Corpus load_labeled_corpus(const PipelineConfig& c, const std::string& lang) {
  const LanguagePaths& p = paths_of(c, lang);
  return with_context("corpus for '" + lang + "'", [&] {
    if (!fs::exists(p.corpus)) throw IoError("corpus file not found: " + p.corpus.string());
    auto loaded = load_corpus(p.corpus, p.format);
    if (loaded.corpus.language.empty()) loaded.corpus.language = lang;
    if (loaded.corpus.language != lang) {
      throw SchemaError(p.corpus.string() + " holds language '" + loaded.corpus.language +
                        "', configured as '" + lang + "'");
    }
    return median_split(std::move(loaded.corpus));
  });
}

std::vector<std::string> all_languages(const PipelineConfig& c) {
  std::vector<std::string> out{c.target_language};
  for (const auto& l : c.source_languages()) out.push_back(l);
  return out;
}

MapFile load_checked_map(const fs::path& path, std::string_view producing_step) {
  if (!fs::exists(path)) {
    throw MissingArtifactError("map " + path.string() + " not found; run `traitalign " +
                               std::string(producing_step) + "` first");
  }
  return with_context(path.string(), [&] { return load_map(path); });
}

TraitLexicon load_checked_lexicon(const fs::path& path) {
  if (!fs::exists(path)) {
    throw MissingArtifactError("lexicon " + path.string() +
                               " not found; run `traitalign lexicon` first");
  }
  return with_context(path.string(), [&] { return load_lexicon(path); });
}

// Target stays in its own space; sources go through their semantic map.
std::map<std::string, EmbeddingTable> multi_tables(const PipelineConfig& c) {
  std::map<std::string, EmbeddingTable> out;
  const EmbeddingTable target = load_mono(c, c.target_language);
  out.emplace(c.target_language, target.with_vectors(target.vectors(), SpaceTag::multi()));
  for (const auto& lang : c.source_languages()) {
    const MapFile m = load_checked_map(semantic_map_path(c, lang), kAlign);
    out.emplace(lang, apply_map(m.map, load_mono(c, lang), SpaceTag::multi()));
  }
  return out;
}

std::vector<fs::path> embedding_paths(const PipelineConfig& c) {
  std::vector<fs::path> out;
  for (const auto& [lang, p] : c.languages) out.push_back(p.embeddings);
  return out;
}

std::vector<fs::path> corpus_paths(const PipelineConfig& c) {
  std::vector<fs::path> out;
  for (const auto& [lang, p] : c.languages) out.push_back(p.corpus);
  return out;
}

std::string ranking_name(LexiconRanking r) {
  return r == LexiconRanking::contrastive ? "contrastive" : "positive-only";
}

LexiconRanking parse_ranking(std::string_view name) {
  if (name == "contrastive") return LexiconRanking::contrastive;
  if (name == "positive-only") return LexiconRanking::positive_only;
  throw ConfigError("unknown lexicon ranking '" + std::string(name) + "'");
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

}  // namespace

std::string_view preset_name(Preset p) { return p == Preset::desk ? "desk" : "paper"; }

Preset parse_preset(std::string_view name) {
  if (name == "desk") return Preset::desk;
  if (name == "paper") return Preset::paper;
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected desk or paper)");
}

PipelineConfig PipelineConfig::defaults(Preset preset) {
  PipelineConfig c;
  c.preset = preset;
  if (preset == Preset::desk) {
    c.alignment = AdversarialConfig::desk();
    c.trait_alignment.adversarial = AdversarialConfig::desk();
    c.grid.cnn.filters = 32;
    c.grid.cnn.max_tokens = 200;
    c.grid.cnn_train.epochs = 40;
    c.grid.cnn_train.adam.lr = 1e-3;
    c.grid.linear_train.adam.lr = 1e-2;
    c.tsne.iterations = 500;
  } else {
    c.alignment = AdversarialConfig::paper();
    c.trait_alignment.adversarial = AdversarialConfig::paper();
  }
  // The semantic map is refined; trait lexicons are too small to induce a
  // reliable dictionary from, so trait maps stay adversarial-only.
  c.alignment.refinement_iterations = 5;
  // Short desk runs occasionally settle on a wrong rotation; restarts pick
  // the best by validation score.
  if (preset == Preset::desk) c.alignment.restarts = 3;
  return c;
}

std::vector<std::string> PipelineConfig::source_languages() const {
  std::vector<std::string> out;
  for (const auto& [lang, p] : languages) {
    if (lang != target_language) out.push_back(lang);
  }
  return out;
}

void PipelineConfig::validate() const {
  if (target_language.empty()) throw ConfigError("target_language is empty");
  if (!languages.contains(target_language)) {
    throw ConfigError("target language '" + target_language + "' is not among the languages");
  }
  if (languages.size() < 2) throw ConfigError("need at least one source language");
  if (lexicon_size == 0) throw ConfigError("lexicon size must be positive");
  if (visualization_words == 0) throw ConfigError("visualization word count must be positive");
  alignment.validate();
  trait_alignment.adversarial.validate();
  grid.validate();
}

json adversarial_to_json(const AdversarialConfig& c) {
  return json{{"epochs", c.epochs},
              {"iterations_per_epoch", c.iterations_per_epoch},
              {"batch_size", c.batch_size},
              {"disc_steps_per_map_step", c.disc_steps_per_map_step},
              {"disc_lr", c.disc_lr},
              {"map_lr", c.map_lr},
              {"lr_decay", c.lr_decay},
              {"orthogonalize_beta", c.orthogonalize_beta},
              {"label_smoothing", c.label_smoothing},
              {"disc_input_dropout", c.disc_input_dropout},
              {"disc_hidden", c.disc_hidden},
              {"init", c.init == MapInit::identity ? "identity" : "random"},
              {"refinement_iterations", c.refinement_iterations},
              {"dictionary_metric",
               c.dictionary_metric.kind == SimilarityMetric::Kind::cosine ? "cosine" : "csls"},
              {"csls_k", c.dictionary_metric.csls_k},
              {"validation_words", c.validation_words},
              {"restarts", c.restarts}};
}

AdversarialConfig adversarial_from_json(const json& j, AdversarialConfig c) {
  c.epochs = j.value("epochs", c.epochs);
  c.iterations_per_epoch = j.value("iterations_per_epoch", c.iterations_per_epoch);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.disc_steps_per_map_step = j.value("disc_steps_per_map_step", c.disc_steps_per_map_step);
  c.disc_lr = j.value("disc_lr", c.disc_lr);
  c.map_lr = j.value("map_lr", c.map_lr);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  c.orthogonalize_beta = j.value("orthogonalize_beta", c.orthogonalize_beta);
  c.label_smoothing = j.value("label_smoothing", c.label_smoothing);
  c.disc_input_dropout = j.value("disc_input_dropout", c.disc_input_dropout);
  c.disc_hidden = j.value("disc_hidden", c.disc_hidden);
  if (j.contains("init")) {
    const auto init = j["init"].get<std::string>();
    if (init == "identity") {
      c.init = MapInit::identity;
    } else if (init == "random") {
      c.init = MapInit::random_orthogonal;
    } else {
      throw ConfigError("unknown map init '" + init + "'");
    }
  }
  c.refinement_iterations = j.value("refinement_iterations", c.refinement_iterations);
  c.restarts = j.value("restarts", c.restarts);
  const std::size_t k = j.value("csls_k", c.dictionary_metric.csls_k);
  if (j.contains("dictionary_metric")) {
    const auto m = j["dictionary_metric"].get<std::string>();
    if (m == "cosine") {
      c.dictionary_metric = SimilarityMetric::cosine();
    } else if (m == "csls") {
      c.dictionary_metric = SimilarityMetric::csls(k);
    } else {
      throw ConfigError("unknown dictionary metric '" + m + "'");
    }
  }
  c.validation_words = j.value("validation_words", c.validation_words);
  c.validate();
  return c;
}

json config_to_json(const PipelineConfig& c) {
  json langs = json::object();
  for (const auto& [lang, p] : c.languages) {
    langs[lang] = {{"embeddings", p.embeddings.string()},
                   {"corpus", p.corpus.string()},
                   {"format", std::string(format_name(p.format))}};
  }
  json trait = adversarial_to_json(c.trait_alignment.adversarial);
  trait["min_lexicon_size"] = c.trait_alignment.min_lexicon_size;
  return json{{"preset", std::string(preset_name(c.preset))},
              {"seed", c.seed},
              {"target_language", c.target_language},
              {"languages", langs},
              {"output_dir", c.output_dir.string()},
              {"embeddings",
               {{"normalize", c.normalize_embeddings},
                {"center", c.center_embeddings},
                {"limit", c.embedding_limit}}},
              {"alignment", adversarial_to_json(c.alignment)},
              {"trait_alignment", trait},
              {"lexicon",
               {{"size", c.lexicon_size},
                {"min_df", c.lexicon.min_df},
                {"ranking", ranking_name(c.lexicon.ranking)}}},
              {"visualization",
               {{"words", c.visualization_words},
                {"perplexity", c.tsne.perplexity},
                {"iterations", c.tsne.iterations},
                {"learning_rate", c.tsne.learning_rate},
                {"early_exaggeration", c.tsne.early_exaggeration},
                {"exaggeration_iterations", c.tsne.exaggeration_iterations}}},
              {"grid", grid_to_json(c.grid)}};
}

PipelineConfig config_from_json(const json& j, const fs::path& base_dir,
                                std::optional<Preset> preset_override) {
  static const std::set<std::string> known = {
      "preset",    "seed",      "target_language", "languages",     "output_dir", "embeddings",
      "alignment", "trait_alignment", "lexicon",   "visualization", "grid"};
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  try {
    Preset preset = preset_override.value_or(
        j.contains("preset") ? parse_preset(j["preset"].get<std::string>()) : Preset::desk);
    PipelineConfig c = PipelineConfig::defaults(preset);
    c.seed = j.value("seed", c.seed);
    c.target_language = j.value("target_language", c.target_language);
    if (j.contains("languages")) {
      for (const auto& [lang, p] : j["languages"].items()) {
        LanguagePaths lp;
        lp.embeddings = resolve(base_dir, p.at("embeddings").get<std::string>());
        lp.corpus = resolve(base_dir, p.at("corpus").get<std::string>());
        if (p.contains("format")) lp.format = parse_corpus_format(p["format"].get<std::string>());
        c.languages.emplace(lang, std::move(lp));
      }
    }
    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
    else c.output_dir = resolve(base_dir, c.output_dir.string());
    if (j.contains("embeddings")) {
      const json& e = j["embeddings"];
      c.normalize_embeddings = e.value("normalize", c.normalize_embeddings);
      c.center_embeddings = e.value("center", c.center_embeddings);
      c.embedding_limit = e.value("limit", c.embedding_limit);
    }
    if (j.contains("alignment")) c.alignment = adversarial_from_json(j["alignment"], c.alignment);
    if (j.contains("trait_alignment")) {
      const json& t = j["trait_alignment"];
      c.trait_alignment.adversarial = adversarial_from_json(t, c.trait_alignment.adversarial);
      c.trait_alignment.min_lexicon_size = t.value("min_lexicon_size", c.trait_alignment.min_lexicon_size);
    }
    if (j.contains("lexicon")) {
      const json& l = j["lexicon"];
      c.lexicon_size = l.value("size", c.lexicon_size);
      c.lexicon.min_df = l.value("min_df", c.lexicon.min_df);
      if (l.contains("ranking")) c.lexicon.ranking = parse_ranking(l["ranking"].get<std::string>());
    }
    if (j.contains("visualization")) {
      const json& v = j["visualization"];
      c.visualization_words = v.value("words", c.visualization_words);
      c.tsne.perplexity = v.value("perplexity", c.tsne.perplexity);
      c.tsne.iterations = v.value("iterations", c.tsne.iterations);
      c.tsne.learning_rate = v.value("learning_rate", c.tsne.learning_rate);
      c.tsne.early_exaggeration = v.value("early_exaggeration", c.tsne.early_exaggeration);
      c.tsne.exaggeration_iterations = v.value("exaggeration_iterations", c.tsne.exaggeration_iterations);
    }
    if (j.contains("grid")) c.grid = grid_from_json(j["grid"], c.grid);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

PipelineConfig load_config(const fs::path& path, std::optional<Preset> preset_override) {
  if (!fs::exists(path)) throw IoError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return with_context(path.string(), [&] {
    return config_from_json(j, fs::absolute(path).parent_path(), preset_override);
  });
}

fs::path semantic_map_path(const PipelineConfig& c, std::string_view lang) {
  return c.output_dir / "maps" / ("semantic_" + std::string(lang) + ".json");
}

fs::path trait_map_path(const PipelineConfig& c, std::string_view lang, Trait t) {
  return c.output_dir / "maps" / ("trait_" + std::string(lang) + "_" + std::string(trait_name(t)) + ".json");
}

fs::path lexicon_path(const PipelineConfig& c, std::string_view lang, Trait t) {
  return c.output_dir / "lexicons" / (std::string(lang) + "_" + std::string(trait_name(t)) + ".json");
}

fs::path state_path(const PipelineConfig& c, std::string_view step) {
  return c.output_dir / "state" / (std::string(step) + ".json");
}

CommandResult cmd_align(const PipelineConfig& config, const RunOptions& options) {
  config.validate();
  const Progress progress(kAlign, options);
  const EmbeddingTable target = load_mono(config, config.target_language);
  CommandResult result;
  result.summary = json::object();
  for (const auto& lang : config.source_languages()) {
    const EmbeddingTable source = load_mono(config, lang);
    AdversarialConfig adv = config.alignment;
    adv.seed = language_seed(config.seed, lang);
    const fs::path vec = paths_of(config, lang).embeddings;
    const SemanticAlignment aligned = with_context("aligning " + vec.string(), [&] {
      return align_spaces(source.vectors(), target.vectors(), adv);
    });
    const fs::path out = semantic_map_path(config, lang);
    save_map({aligned.map, lang, config.target_language, std::nullopt, aligned.validation}, out);
    json history = json::array();
    for (const auto& e : aligned.history) {
      history.push_back({{"epoch", e.epoch}, {"validation", e.validation},
                         {"disc_loss", e.disc_loss}, {"map_loss", e.map_loss}});
    }
    result.summary[lang] = {{"validation", aligned.validation},
                            {"discriminator_accuracy", aligned.discriminator_accuracy},
                            {"provenance", std::string(provenance_name(aligned.map.provenance()))},
                            {"history", history}};
    progress.line(lang + " -> " + config.target_language + ": mean cosine " +
                  format_double(aligned.validation) + ", discriminator accuracy " +
                  format_double(aligned.discriminator_accuracy));
    result.outputs.push_back(out);
  }
  write_state(config, kAlign, embedding_paths(config), result.outputs, result.summary);
  return result;
}

CommandResult cmd_lexicon(const PipelineConfig& config, const RunOptions& options) {
  config.validate();
  require_fresh(config, kAlign, options);
  const Progress progress(kLexicon, options);
  CommandResult result;
  result.summary = json::object();
  for (const auto& lang : all_languages(config)) {
    const Corpus corpus = load_labeled_corpus(config, lang);
    const EmbeddingTable table = load_mono(config, lang);
    for (Trait t : kTraits) {
      if (corpus.count(t, Label::positive) == 0 || corpus.count(t, Label::negative) == 0) {
        throw ValueError("trait " + std::string(trait_name(t)) + " has an empty class in the '" +
                         lang + "' corpus; cannot rank trait words");
      }
      const LexiconResult lex = extract_trait_words(corpus, t, table, config.lexicon_size, config.lexicon);
      const fs::path out = lexicon_path(config, lang, t);
      save_lexicon(lex.lexicon, out);
      result.outputs.push_back(out);
      result.summary[lang][std::string(trait_name(t))] = {
          {"words", lex.lexicon.ranked_words.size()}, {"exhausted", lex.exhausted}};
    }
    progress.line(lang + ": 5 lexicons written");
  }
  std::vector<fs::path> inputs = corpus_paths(config);
  for (const auto& p : embedding_paths(config)) inputs.push_back(p);
  write_state(config, kLexicon, inputs, result.outputs, result.summary);
  return result;
}

CommandResult cmd_globaltrait(const PipelineConfig& config, const RunOptions& options) {
  config.validate();
  require_fresh(config, kAlign, options);
  require_fresh(config, kLexicon, options);
  const Progress progress(kGlobalTrait, options);
  const auto tables = multi_tables(config);
  auto lexicons_of = [&](const std::string& lang) {
    PerTrait<TraitLexicon> out;
    for (Trait t : kTraits) out[trait_index(t)] = load_checked_lexicon(lexicon_path(config, lang, t));
    return out;
  };
  const auto target_lexicons = lexicons_of(config.target_language);
  CommandResult result;
  result.summary = json::object();
  std::vector<fs::path> inputs;
  for (const auto& lang : all_languages(config)) {
    for (Trait t : kTraits) inputs.push_back(lexicon_path(config, lang, t));
  }
  for (const auto& lang : config.source_languages()) {
    inputs.push_back(semantic_map_path(config, lang));
    TraitMapConfig tc = config.trait_alignment;
    tc.adversarial.seed = language_seed(config.seed, lang);
    const TraitAlignment aligned = with_context("trait maps for '" + lang + "'", [&] {
      return train_global_trait(tables.at(lang), tables.at(config.target_language), lexicons_of(lang),
                                target_lexicons, tc);
    });
    for (Trait t : kTraits) {
      const auto& hist = aligned.validation_history[trait_index(t)];
      const double best = hist.empty() ? 0.0 : *std::max_element(hist.begin(), hist.end());
      const fs::path out = trait_map_path(config, lang, t);
      save_map({aligned.map(t), lang, config.target_language, t, best}, out);
      result.outputs.push_back(out);
      result.summary[lang][std::string(trait_name(t))] = {{"validation", best}, {"history", hist}};
      progress.line(lang + " " + std::string(trait_name(t)) + ": mean cosine " + format_double(best));
    }
  }
  for (const auto& p : embedding_paths(config)) inputs.push_back(p);
  write_state(config, kGlobalTrait, inputs, result.outputs, result.summary);
  return result;
}

CommandResult cmd_train_eval(const PipelineConfig& config, const RunOptions& options) {
  config.validate();
  bool needs_semantic = false, needs_trait = false;
  for (ModelKind m : config.grid.models) {
    needs_semantic |= m != ModelKind::lgr_mono && m != ModelKind::cnn_mono;
    needs_trait |= m == ModelKind::lgr_global_trait || m == ModelKind::cnn_global_trait;
  }
  if (needs_semantic) require_fresh(config, kAlign, options);
  if (needs_trait) require_fresh(config, kGlobalTrait, options);
  const Progress progress("train-eval", options);

  ExperimentInputs inputs;
  inputs.target_language = config.target_language;
  std::vector<fs::path> read = corpus_paths(config);
  for (const auto& p : embedding_paths(config)) read.push_back(p);
  for (const auto& lang : all_languages(config)) {
    inputs.corpora.emplace(lang, load_labeled_corpus(config, lang));
    inputs.mono_tables.push_back(load_mono(config, lang));
  }
  for (const auto& lang : config.source_languages()) {
    if (needs_semantic) {
      inputs.semantic_maps.emplace(lang, load_checked_map(semantic_map_path(config, lang), kAlign).map);
      read.push_back(semantic_map_path(config, lang));
    }
    if (needs_trait) {
      TraitAlignment ta;
      ta.source_language = lang;
      ta.target_language = config.target_language;
      for (Trait t : kTraits) {
        ta.maps[trait_index(t)] = load_checked_map(trait_map_path(config, lang, t), kGlobalTrait).map;
        read.push_back(trait_map_path(config, lang, t));
      }
      inputs.trait_maps.emplace(lang, std::move(ta));
    }
  }
  GridConfig grid = config.grid;
  grid.seed = config.seed;
  const auto reports = run_experiment(inputs, grid);
  json out = reports_to_json(reports);
  const std::string task(task_name(grid.task));
  const fs::path json_path = config.output_dir / "reports" / (task + ".json");
  const fs::path table_path = config.output_dir / "reports" / (task + ".txt");
  write_json(json_path, out);
  write_file(table_path, render_table(reports));
  progress.line(std::to_string(reports.size()) + " report rows written to " + json_path.string());
  CommandResult result{{json_path, table_path}, json{{"rows", reports.size()}, {"task", task}}};
  write_state(config, "train-eval", read, result.outputs, result.summary);
  return result;
}

ProjectionMethod parse_projection_method(std::string_view name) {
  if (name == "pca") return ProjectionMethod::pca;
  if (name == "tsne") return ProjectionMethod::tsne;
  throw ConfigError("unknown projection method '" + std::string(name) + "' (expected pca or tsne)");
}

CommandResult cmd_project(const PipelineConfig& config, SpaceTag space, ProjectionMethod method,
                          std::optional<Trait> words_trait, const RunOptions& options) {
  config.validate();
  if (space.kind == SpaceTag::Kind::mono) {
    throw ConfigError("projection space must be multi or trait:<Trait>");
  }
  require_fresh(config, kAlign, options);
  require_fresh(config, kLexicon, options);
  if (space.kind == SpaceTag::Kind::trait) {
    if (!fs::exists(state_path(config, kGlobalTrait))) {
      throw MissingArtifactError("projecting the " + space.to_string() +
                                 " space needs trait maps; run `traitalign globaltrait` first");
    }
    require_fresh(config, kGlobalTrait, options);
  }
  const Progress progress("project", options);
  const Trait trait = space.kind == SpaceTag::Kind::trait ? space.trait : words_trait.value_or(Trait::Extr);
  const auto tables = multi_tables(config);

  std::vector<ProjectionRow> rows;
  std::vector<std::string> groups;
  std::vector<Vector> vectors;
  std::vector<fs::path> read;
  json counts = json::object();
  for (const auto& lang : all_languages(config)) {
    const EmbeddingTable& table = tables.at(lang);
    const fs::path lex_path = lexicon_path(config, lang, trait);
    read.push_back(lex_path);
    std::optional<OrthogonalMap> trait_map;
    if (space.kind == SpaceTag::Kind::trait && lang != config.target_language) {
      const fs::path mp = trait_map_path(config, lang, trait);
      trait_map = load_checked_map(mp, kGlobalTrait).map;
      read.push_back(mp);
    }
    std::size_t used = 0;
    for (const auto& word : load_checked_lexicon(lex_path).top(config.visualization_words)) {
      const auto row = table.find(word);
      if (!row) continue;
      Vector v = table.row(*row).transpose();
      if (trait_map) v = trait_map->apply(v);
      vectors.push_back(std::move(v));
      rows.push_back({word, lang});
      groups.push_back(lang);
      ++used;
    }
    counts[lang] = used;
  }
  if (rows.size() < 4) throw ValueError("fewer than four lexicon words to project");
  Matrix points(static_cast<Eigen::Index>(vectors.size()), static_cast<Eigen::Index>(vectors.front().size()));
  for (std::size_t i = 0; i < vectors.size(); ++i) points.row(static_cast<Eigen::Index>(i)) = vectors[i].transpose();

  json meta{{"space", space.to_string()},
            {"words_trait", std::string(trait_name(trait))},
            {"words_per_language", counts},
            {"separation_full_dim", centroid_separation(points, groups)}};
  Matrix coords;
  if (method == ProjectionMethod::pca) {
    coords = pca_2d(points);
    meta["method"] = "pca";
  } else {
    TsneConfig tc = config.tsne;
    tc.seed = config.seed;
    const TsneResult r = tsne_2d(points, tc);
    coords = r.coords;
    meta["method"] = "tsne";
    meta["tsne"] = {{"perplexity_requested", tc.perplexity}, {"perplexity_used", r.perplexity_used},
                    {"iterations", tc.iterations},           {"learning_rate", tc.learning_rate},
                    {"early_exaggeration", tc.early_exaggeration},
                    {"exaggeration_iterations", tc.exaggeration_iterations},
                    {"seed", tc.seed},                       {"kl_divergence", r.kl_divergence}};
  }
  meta["separation_2d"] = centroid_separation(coords, groups);
  std::string stem = space.to_string();
  std::replace(stem.begin(), stem.end(), ':', '_');
  stem += std::string("_") + (method == ProjectionMethod::pca ? "pca" : "tsne");
  const fs::path csv = config.output_dir / "projections" / (stem + ".csv");
  const fs::path meta_path = config.output_dir / "projections" / (stem + ".json");
  fs::create_directories(csv.parent_path());
  write_file(csv, projection_csv(rows, coords));
  write_json(meta_path, meta);
  progress.line(std::to_string(rows.size()) + " words projected; separation " +
                format_double(meta["separation_full_dim"].get<double>()));
  CommandResult result{{csv, meta_path}, meta};
  write_state(config, "project_" + stem, read, result.outputs, result.summary);
  return result;
}

CommandResult cmd_synth(const SyntheticSpec& spec, const fs::path& dir, Preset preset) {
  if (spec.languages.size() < 2) throw ConfigError("synthetic fixture needs at least two languages");
  const SyntheticData data = generate_synthetic_corpus(spec);
  write_synthetic_fixture(data, dir);
  json langs = json::object();
  CommandResult result;
  for (const auto& l : spec.languages) {
    langs[l.code] = {{"embeddings", l.code + ".vec"},
                     {"corpus", l.code + ".jsonl"},
                     {"format", std::string(format_name(CorpusFormat::pretokenized))}};
    result.outputs.push_back(dir / (l.code + ".vec"));
    result.outputs.push_back(dir / (l.code + ".jsonl"));
  }
  json cfg{{"preset", std::string(preset_name(preset))},
           {"seed", 1},
           {"target_language", spec.languages.front().code},
           {"languages", langs},
           {"output_dir", "out"},
           // Lexicons as large as the planted trait word lists; the default
           // size would cover the whole fixture vocabulary.
           {"lexicon", {{"size", spec.trait_words_per_trait}}},
           {"visualization", {{"words", spec.trait_words_per_trait}}}};
  write_json(dir / "config.json", cfg);
  result.outputs.push_back(dir / "ground_truth.json");
  result.outputs.push_back(dir / "config.json");
  result.summary = {{"languages", spec.languages.size()}, {"vocab_size", spec.vocab_size}, {"dim", spec.dim}};
  return result;
}

}  // namespace traitalign
