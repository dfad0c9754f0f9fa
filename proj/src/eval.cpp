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

#include "traitalign/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace traitalign {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t cell_seed(std::uint64_t seed, std::string_view language, ModelKind model, Trait trait,
                        std::size_t fold) {
  std::uint64_t h = mix(seed);
  for (char c : language) h = mix(h ^ static_cast<unsigned char>(c));
  h = mix(h ^ static_cast<std::uint64_t>(model));
  h = mix(h ^ trait_index(trait));
  return mix(h ^ fold);
}

double target_of(const UserDocument& u, Trait t, Task task) {
  if (task == Task::regression) return u.score(t);
  return u.label(t) == Label::positive ? 1.0 : 0.0;
}

struct FoldData {
  std::vector<const UserDocument*> train;
  std::vector<const UserDocument*> test;
};

// Fold-train + fold-test metric for one model.
double evaluate_fold(const FoldData& data, ModelKind model, Trait trait, const GridConfig& grid,
                     const FeatureVectorizer& primary, const FeatureVectorizer* static_channel,
                     std::uint64_t seed) {
  std::vector<double> y_train, y_test;
  for (const auto* u : data.train) y_train.push_back(target_of(*u, trait, grid.task));
  for (const auto* u : data.test) y_test.push_back(target_of(*u, trait, grid.task));
  std::vector<double> predicted;

  const bool cnn = model == ModelKind::cnn_mono || model == ModelKind::cnn_global_trait;
  if (!cnn) {
    auto features = [&](const std::vector<const UserDocument*>& docs) {
      Matrix x(static_cast<Eigen::Index>(docs.size()), static_cast<Eigen::Index>(primary.dim()));
      for (std::size_t i = 0; i < docs.size(); ++i) {
        x.row(static_cast<Eigen::Index>(i)) = vectorize_average(*docs[i], primary).vector.transpose();
      }
      return x;
    };
    TrainConfig tc = grid.linear_train;
    tc.loss = grid.task == Task::classification ? LossKind::bce : LossKind::mse;
    tc.seed = seed;
    const LinearTrainResult fit = train_linear(features(data.train), y_train, tc);
    const Matrix x_test = features(data.test);
    for (Eigen::Index i = 0; i < x_test.rows(); ++i) {
      predicted.push_back(fit.model.predict(x_test.row(i).transpose()));
    }
  } else {
    std::vector<const UserDocument*> all = data.train;
    all.insert(all.end(), data.test.begin(), data.test.end());
    const CnnVocabulary vocab(all, primary, static_channel);
    CnnConfig cc = grid.cnn;
    cc.head = grid.task == Task::classification ? CnnHead::softmax2 : CnnHead::linear1;
    Rng init(seed);
    CnnModel net(cc, vocab.dynamic_init(), vocab.static_table(), init);
    std::vector<TokenIds> train_ids;
    for (const auto* u : data.train) train_ids.push_back(vocab.encode(*u, cc.max_tokens));
    TrainConfig tc = grid.cnn_train;
    tc.loss = grid.task == Task::classification ? LossKind::bce : LossKind::mse;
    tc.seed = mix(seed);
    train_cnn(net, train_ids, y_train, tc);
    for (const auto* u : data.test) {
      const TokenIds ids = vocab.encode(*u, cc.max_tokens);
      predicted.push_back(grid.task == Task::classification ? net.positive_probability(ids)
                                                            : net.predict_value(ids));
    }
  }

  if (grid.task == Task::regression) return rmse(predicted, y_test);
  std::vector<Label> pred_labels, true_labels;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    pred_labels.push_back(predicted[i] >= 0.5 ? Label::positive : Label::negative);
    true_labels.push_back(y_test[i] >= 0.5 ? Label::positive : Label::negative);
  }
  return grid.macro_f1 ? macro_f1(pred_labels, true_labels)
                       : f1_score(pred_labels, true_labels).value;
}

}  // namespace

F1Result f1_score(std::span<const Label> predictions, std::span<const Label> labels,
                  Label positive) {
  if (predictions.empty()) throw ValueError("f1_score: empty input");
  if (predictions.size() != labels.size()) throw ValueError("f1_score: length mismatch");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predictions[i] == positive, y = labels[i] == positive;
    tp += p && y;
    fp += p && !y;
    fn += !p && y;
  }
  if (tp + fp == 0 || tp + fn == 0) return {0.0, true};
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (precision + recall == 0.0) return {0.0, false};
  return {2.0 * precision * recall / (precision + recall), false};
}

double macro_f1(std::span<const Label> predictions, std::span<const Label> labels) {
  return 0.5 * (f1_score(predictions, labels, Label::positive).value +
                f1_score(predictions, labels, Label::negative).value);
}

double rmse(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size()) throw ValueError("rmse: length mismatch");
  if (predicted.empty()) throw ValueError("rmse: needs at least one user");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = truth[i] - predicted[i];
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(truth.size()));
}

std::string_view task_name(Task t) { return t == Task::classification ? "classification" : "regression"; }

Task parse_task(std::string_view name) {
  if (name == "classification") return Task::classification;
  if (name == "regression") return Task::regression;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

std::string_view model_name(ModelKind m) {
  switch (m) {
    case ModelKind::lgr_mono: return "Lgr-mono";
    case ModelKind::lgr_multi: return "Lgr-multi";
    case ModelKind::lgr_global_trait: return "Lgr-GlobalTrait";
    case ModelKind::cnn_mono: return "CNN-mono";
    case ModelKind::cnn_global_trait: return "CNN-GlobalTrait";
  }
  return "?";
}

ModelKind parse_model(std::string_view name) {
  for (ModelKind m : kAllModels) {
    if (model_name(m) == name) return m;
  }
  throw ConfigError("unknown model '" + std::string(name) + "'");
}

bool uses_target_augmentation(ModelKind m) {
  return m == ModelKind::lgr_multi || m == ModelKind::lgr_global_trait ||
         m == ModelKind::cnn_global_trait;
}

void GridConfig::validate() const {
  if (models.empty()) throw ConfigError("model grid is empty");
  if (k < 2) throw ConfigError("k must be >= 2");
  linear_train.validate();
  cnn_train.validate();
  cnn.validate();
}

json grid_to_json(const GridConfig& g) {
  json models = json::array();
  for (auto m : g.models) models.push_back(std::string(model_name(m)));
  auto train = [](const TrainConfig& t) {
    return json{{"epochs", t.epochs},       {"batch_size", t.batch_size}, {"lr", t.adam.lr},
                {"beta1", t.adam.beta1},    {"beta2", t.adam.beta2},     {"epsilon", t.adam.epsilon}};
  };
  return json{{"models", models},
              {"task", std::string(task_name(g.task))},
              {"k", g.k},
              {"seed", g.seed},
              {"linear_train", train(g.linear_train)},
              {"cnn_train", train(g.cnn_train)},
              {"cnn",
               {{"widths", g.cnn.widths},
                {"filters", g.cnn.filters},
                {"fc_hidden", g.cnn.fc_hidden},
                {"max_tokens", g.cnn.max_tokens}}},
              {"f1", g.macro_f1 ? "macro" : "positive-class"},
              {"languages", g.languages}};
}

GridConfig grid_from_json(const json& j, GridConfig g) {
  try {
    if (j.contains("models")) {
      if (!j["models"].is_array()) throw ConfigError("grid config: models must be an array");
      g.models.clear();
      for (const auto& m : j["models"]) g.models.push_back(parse_model(m.get<std::string>()));
    }
    if (j.contains("task")) g.task = parse_task(j["task"].get<std::string>());
    g.k = j.value("k", g.k);
    g.seed = j.value("seed", g.seed);
    auto train = [](const json& t, TrainConfig c) {
      c.epochs = t.value("epochs", c.epochs);
      c.batch_size = t.value("batch_size", c.batch_size);
      c.adam.lr = t.value("lr", c.adam.lr);
      c.adam.beta1 = t.value("beta1", c.adam.beta1);
      c.adam.beta2 = t.value("beta2", c.adam.beta2);
      c.adam.epsilon = t.value("epsilon", c.adam.epsilon);
      return c;
    };
    if (j.contains("linear_train")) g.linear_train = train(j["linear_train"], g.linear_train);
    if (j.contains("cnn_train")) g.cnn_train = train(j["cnn_train"], g.cnn_train);
    if (j.contains("cnn")) {
      const json& c = j["cnn"];
      if (c.contains("widths")) g.cnn.widths = c["widths"].get<std::vector<std::size_t>>();
      g.cnn.filters = c.value("filters", g.cnn.filters);
      g.cnn.fc_hidden = c.value("fc_hidden", g.cnn.fc_hidden);
      g.cnn.max_tokens = c.value("max_tokens", g.cnn.max_tokens);
    }
    if (j.contains("f1")) g.macro_f1 = j["f1"].get<std::string>() == "macro";
    if (j.contains("languages")) g.languages = j["languages"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("grid config: ") + e.what());
  }
  g.validate();
  return g;
}

std::vector<ExperimentReport> run_experiment(const ExperimentInputs& inputs, const GridConfig& grid) {
  grid.validate();
  const std::string& target = inputs.target_language;
  const std::string digest = sha256_hex(grid_to_json(grid).dump());
  std::vector<std::string> languages = grid.languages;
  if (languages.empty()) {
    for (const auto& [lang, c] : inputs.corpora) languages.push_back(lang);
  }

  auto mono_table = [&](const std::string& lang) -> const EmbeddingTable& {
    for (const auto& t : inputs.mono_tables) {
      if (t.language() == lang) return t;
    }
    throw MissingArtifactError("no embeddings for language '" + lang +
                               "'; list its .vec file in the config");
  };

  std::vector<ExperimentReport> reports;
  for (const std::string& lang : languages) {
    auto cit = inputs.corpora.find(lang);
    if (cit == inputs.corpora.end()) {
      throw MissingArtifactError("no corpus for language '" + lang + "'");
    }
    const Corpus& corpus = cit->second;
    if (!corpus.labeled()) throw ValueError("corpus '" + lang + "' has not been median-split");
    const bool is_target = lang == target;
    const Corpus* target_corpus = nullptr;
    if (!is_target) {
      auto tit = inputs.corpora.find(target);
      if (tit != inputs.corpora.end()) target_corpus = &tit->second;
    }

    std::vector<EmbeddingTable> pair_tables{mono_table(lang)};
    if (!is_target) pair_tables.push_back(mono_table(target));

    for (ModelKind model : grid.models) {
      const bool augmented = uses_target_augmentation(model);
      if (is_target && model != ModelKind::lgr_mono && model != ModelKind::cnn_mono) continue;
      if (augmented && !target_corpus) {
        throw MissingArtifactError("model " + std::string(model_name(model)) + " needs the '" +
                                   target + "' corpus");
      }

      std::optional<FeatureVectorizer> mono_vz, multi_vz;
      if (!augmented) {
        mono_vz = FeatureVectorizer::mono({mono_table(lang)});
      } else {
        multi_vz = FeatureVectorizer::multi(pair_tables, inputs.semantic_maps, target);
      }

      ExperimentReport report;
      report.language = lang;
      report.model = model;
      report.task = grid.task;
      report.metric = grid.task == Task::regression ? "rmse" : (grid.macro_f1 ? "macro_f1" : "f1");
      report.seed = grid.seed;
      report.config_digest = digest;

      for (Trait trait : kTraits) {
        const FoldPlan plan = stratified_kfold(corpus, trait, grid.k, grid.seed);
        std::optional<FeatureVectorizer> trait_vz;
        if (model == ModelKind::lgr_global_trait || model == ModelKind::cnn_global_trait) {
          trait_vz = FeatureVectorizer::global_trait(pair_tables, inputs.semantic_maps,
                                                     inputs.trait_maps, target, trait);
        }
        const FeatureVectorizer* primary = nullptr;
        const FeatureVectorizer* static_channel = nullptr;
        switch (model) {
          case ModelKind::lgr_mono:
          case ModelKind::cnn_mono: primary = &*mono_vz; break;
          case ModelKind::lgr_multi: primary = &*multi_vz; break;
          case ModelKind::lgr_global_trait: primary = &*trait_vz; break;
          case ModelKind::cnn_global_trait:
            primary = &*multi_vz;
            static_channel = &*trait_vz;
            break;
        }

        auto& folds = report.folds[trait_index(trait)];
        for (std::size_t f = 0; f < grid.k; ++f) {
          FoldData data;
          for (const auto& u : corpus.users) {
            (plan.assignments.at(u.user_id) == f ? data.test : data.train).push_back(&u);
          }
          if (augmented) {
            for (const auto& u : target_corpus->users) data.train.push_back(&u);
          }
          folds.push_back(evaluate_fold(data, model, trait, grid, *primary, static_channel,
                                        cell_seed(grid.seed, lang, model, trait, f)));
        }
        report.values[trait_index(trait)] =
            std::accumulate(folds.begin(), folds.end(), 0.0) / static_cast<double>(folds.size());
      }
      report.average = std::accumulate(report.values.begin(), report.values.end(), 0.0) /
                       static_cast<double>(kNumTraits);
      reports.push_back(std::move(report));
    }
  }
  return reports;
}

json reports_to_json(const std::vector<ExperimentReport>& reports) {
  json out = json::array();
  for (const auto& r : reports) {
    json values = json::object(), folds = json::object();
    for (Trait t : kTraits) {
      values[std::string(trait_name(t))] = r.values[trait_index(t)];
      folds[std::string(trait_name(t))] = r.folds[trait_index(t)];
    }
    out.push_back({{"language", r.language},
                   {"model", std::string(model_name(r.model))},
                   {"task", std::string(task_name(r.task))},
                   {"metric", r.metric},
                   {"values", values},
                   {"average", r.average},
                   {"average_rule", "mean of the five trait values"},
                   {"folds", folds},
                   {"seed", r.seed},
                   {"config_digest", r.config_digest}});
  }
  return out;
}

std::vector<ExperimentReport> reports_from_json(const json& j) {
  std::vector<ExperimentReport> out;
  try {
    for (const auto& e : j) {
      ExperimentReport r;
      r.language = e.at("language").get<std::string>();
      r.model = parse_model(e.at("model").get<std::string>());
      r.task = parse_task(e.at("task").get<std::string>());
      r.metric = e.at("metric").get<std::string>();
      for (Trait t : kTraits) {
        const std::string n(trait_name(t));
        r.values[trait_index(t)] = e.at("values").at(n).get<double>();
        r.folds[trait_index(t)] = e.at("folds").at(n).get<std::vector<double>>();
      }
      r.average = e.at("average").get<double>();
      r.seed = e.at("seed").get<std::uint64_t>();
      r.config_digest = e.at("config_digest").get<std::string>();
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("report: ") + e.what());
  }
  return out;
}

std::string render_table(const std::vector<ExperimentReport>& reports) {
  std::ostringstream out;
  std::vector<std::string> languages;
  for (const auto& r : reports) {
    if (std::find(languages.begin(), languages.end(), r.language) == languages.end()) {
      languages.push_back(r.language);
    }
  }
  for (const auto& lang : languages) {
    std::string metric;
    for (const auto& r : reports) {
      if (r.language == lang) metric = r.metric;
    }
    const bool percent = metric != "rmse";
    out << lang << " (" << metric << ")\n";
    out << std::left << std::setw(18) << "Model";
    for (Trait t : kTraits) out << std::right << std::setw(8) << trait_name(t);
    out << std::right << std::setw(9) << "Average" << "\n";
    for (const auto& r : reports) {
      if (r.language != lang) continue;
      out << std::left << std::setw(18) << model_name(r.model) << std::right << std::fixed
          << std::setprecision(percent ? 2 : 4);
      const double scale = percent ? 100.0 : 1.0;
      for (double v : r.values) out << std::setw(8) << v * scale;
      out << std::setw(9) << r.average * scale << "\n";
      out.unsetf(std::ios::fixed);
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace traitalign
