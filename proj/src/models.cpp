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

#include "traitalign/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace traitalign {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

}  // namespace

std::string_view loss_name(LossKind k) { return k == LossKind::bce ? "bce" : "mse"; }

LossKind parse_loss(std::string_view name) {
  if (name == "bce") return LossKind::bce;
  if (name == "mse") return LossKind::mse;
  throw ConfigError("unknown loss '" + std::string(name) + "' (expected bce or mse)");
}

double loss(LossKind kind, std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) throw ValueError("loss: length mismatch");
  if (predictions.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double y = targets[i];
    if (kind == LossKind::bce) {
      const double p = clamp_prob(predictions[i]);
      s -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    } else {
      const double e = y - predictions[i];
      s += e * e;
    }
  }
  return s / static_cast<double>(predictions.size());
}

void Adam::step(std::span<Matrix* const> params, std::span<const Matrix> grads) {
  if (params.size() != grads.size()) throw ValueError("Adam: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (const Matrix* p : params) {
      m_.push_back(Matrix::Zero(p->rows(), p->cols()));
      v_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (m_.size() != params.size()) throw ValueError("Adam: parameter list changed between steps");
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = grads[i];
    if (g.rows() != params[i]->rows() || g.cols() != params[i]->cols()) {
      throw ValueError("Adam: gradient shape mismatch for block " + std::to_string(i));
    }
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
    params[i]->array() -=
        config_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.epsilon);
  }
}

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0) throw ConfigError("epochs and batch_size must be positive");
  if (!(adam.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

std::string_view feature_mode_name(FeatureMode m) {
  switch (m) {
    case FeatureMode::mono: return "mono";
    case FeatureMode::multi: return "multi";
    case FeatureMode::global_trait: return "global_trait";
  }
  return "?";
}

FeatureVectorizer FeatureVectorizer::mono(std::vector<EmbeddingTable> tables) {
  if (tables.empty()) throw ValueError("vectorizer needs at least one table");
  FeatureVectorizer vz;
  vz.dim_ = tables.front().dim();
  for (const auto& t : tables) {
    if (t.dim() != vz.dim_) throw ValueError("vectorizer tables differ in dimension");
  }
  vz.tables_ = std::move(tables);
  return vz;
}

FeatureVectorizer FeatureVectorizer::multi(const std::vector<EmbeddingTable>& mono_tables,
                                           const std::map<std::string, OrthogonalMap>& semantic_maps,
                                           const std::string& target_language) {
  std::vector<EmbeddingTable> mapped;
  for (const auto& t : mono_tables) {
    if (t.language() == target_language) {
      mapped.push_back(t.with_vectors(t.vectors(), SpaceTag::multi()));
      continue;
    }
    auto it = semantic_maps.find(t.language());
    if (it == semantic_maps.end()) {
      throw MissingArtifactError("no semantic map for language '" + t.language() +
                                 "'; run the align step");
    }
    mapped.push_back(apply_map(it->second, t, SpaceTag::multi()));
  }
  FeatureVectorizer vz = mono(std::move(mapped));
  vz.mode_ = FeatureMode::multi;
  return vz;
}

FeatureVectorizer FeatureVectorizer::global_trait(
    const std::vector<EmbeddingTable>& mono_tables,
    const std::map<std::string, OrthogonalMap>& semantic_maps,
    const std::map<std::string, TraitAlignment>& trait_maps, const std::string& target_language,
    Trait trait) {
  std::vector<EmbeddingTable> mapped;
  for (const auto& t : mono_tables) {
    if (t.language() == target_language) {
      mapped.push_back(t.with_vectors(t.vectors(), SpaceTag::of_trait(trait)));
      continue;
    }
    auto sem = semantic_maps.find(t.language());
    if (sem == semantic_maps.end()) {
      throw MissingArtifactError("no semantic map for language '" + t.language() +
                                 "'; run the align step");
    }
    auto tr = trait_maps.find(t.language());
    if (tr == trait_maps.end() || !tr->second.complete()) {
      throw MissingArtifactError("trait maps for language '" + t.language() +
                                 "' are missing or incomplete; run the globaltrait step");
    }
    const OrthogonalMap chain = tr->second.map(trait).compose(sem->second);
    mapped.push_back(apply_map(chain, t, SpaceTag::of_trait(trait)));
  }
  FeatureVectorizer vz = mono(std::move(mapped));
  vz.mode_ = FeatureMode::global_trait;
  vz.trait_ = trait;
  return vz;
}

bool FeatureVectorizer::has_language(std::string_view language) const {
  return std::any_of(tables_.begin(), tables_.end(),
                     [&](const auto& t) { return t.language() == language; });
}

const EmbeddingTable& FeatureVectorizer::table(std::string_view language) const {
  for (const auto& t : tables_) {
    if (t.language() == language) return t;
  }
  throw MissingArtifactError("vectorizer has no embeddings for language '" +
                             std::string(language) + "'");
}

AverageFeatures vectorize_average(const UserDocument& doc, const FeatureVectorizer& vz) {
  const EmbeddingTable& table = vz.table(doc.language);
  AverageFeatures out;
  out.vector = Vector::Zero(static_cast<Eigen::Index>(vz.dim()));
  for (const auto& tok : doc.tokens) {
    if (auto r = table.find(tok)) {
      out.vector += table.row(*r).transpose();
      ++out.known_tokens;
    }
  }
  if (out.known_tokens == 0) {
    out.all_oov = true;
  } else {
    out.vector /= static_cast<double>(out.known_tokens);
  }
  return out;
}

double LinearModel::predict(const Vector& x) const {
  const double z = weights.dot(x) + bias;
  return loss == LossKind::bce ? sigmoid(z) : z;
}

Label LinearModel::classify(const Vector& x) const {
  return predict(x) >= 0.5 ? Label::positive : Label::negative;
}

double linear_loss_gradient(const LinearModel& model, const Matrix& features,
                            std::span<const double> targets, Vector& grad_w, double& grad_b) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (n != targets.size()) throw ValueError("linear model: feature/target count mismatch");
  if (n == 0) throw ValueError("linear model: empty batch");
  grad_w = Vector::Zero(features.cols());
  grad_b = 0.0;
  std::vector<double> preds(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = features.row(static_cast<Eigen::Index>(i));
    const double pred = model.predict(row.transpose());
    preds[i] = pred;
    // dL/dz: p - y for sigmoid + bce, 2 (yhat - y) for mse.
    const double dz = model.loss == LossKind::bce ? pred - targets[i] : 2.0 * (pred - targets[i]);
    grad_w += dz * row.transpose();
    grad_b += dz;
  }
  grad_w /= static_cast<double>(n);
  grad_b /= static_cast<double>(n);
  return loss(model.loss, preds, targets);
}

LinearTrainResult train_linear(const Matrix& features, std::span<const double> targets,
                               const TrainConfig& config) {
  config.validate();
  const auto n = static_cast<std::size_t>(features.rows());
  if (n == 0) throw ValueError("train_linear: empty training set");
  if (n != targets.size()) throw ValueError("train_linear: feature/target count mismatch");
  if (config.loss == LossKind::bce) {
    const bool has_pos = std::any_of(targets.begin(), targets.end(), [](double y) { return y >= 0.5; });
    const bool has_neg = std::any_of(targets.begin(), targets.end(), [](double y) { return y < 0.5; });
    if (!has_pos || !has_neg) throw ValueError("logistic training set has a single class");
  }
  LinearTrainResult result;
  result.model.weights = Vector::Zero(features.cols());
  result.model.loss = config.loss;
  Matrix w(features.cols(), 1), b(1, 1);
  w.setZero();
  b.setZero();
  Adam adam(config.adam);
  Rng rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      Matrix xb(static_cast<Eigen::Index>(end - start), features.cols());
      std::vector<double> yb(end - start);
      for (std::size_t i = start; i < end; ++i) {
        xb.row(static_cast<Eigen::Index>(i - start)) = features.row(static_cast<Eigen::Index>(order[i]));
        yb[i - start] = targets[order[i]];
      }
      result.model.weights = w.col(0);
      result.model.bias = b(0, 0);
      Vector gw;
      double gb = 0.0;
      const double l = linear_loss_gradient(result.model, xb, yb, gw, gb);
      if (!std::isfinite(l)) {
        std::ostringstream ss;
        ss << "non-finite linear model loss at epoch " << epoch;
        throw TrainingError(ss.str());
      }
      epoch_loss += l * static_cast<double>(end - start);
      Matrix* params[] = {&w, &b};
      const Matrix grads[] = {Matrix(gw), Matrix::Constant(1, 1, gb)};
      adam.step(params, grads);
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(n));
  }
  result.model.weights = w.col(0);
  result.model.bias = b(0, 0);
  return result;
}

const Matrix& Checkpoint::parameter(std::string_view name) const {
  for (const auto& [n, m] : parameters) {
    if (n == name) return m;
  }
  throw SchemaError("checkpoint has no parameter '" + std::string(name) + "'");
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  json params = json::array();
  for (const auto& [name, m] : ckpt.parameters) {
    json p = matrix_to_json(m);
    p["name"] = name;
    params.push_back(std::move(p));
  }
  json j{{"metadata", ckpt.metadata}, {"parameters", std::move(params)}};
  return j.dump();
}

Checkpoint checkpoint_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("checkpoint: invalid JSON: ") + e.what());
  }
  Checkpoint ckpt;
  try {
    ckpt.metadata = j.at("metadata");
    for (const auto& p : j.at("parameters")) {
      ckpt.parameters.emplace_back(p.at("name").get<std::string>(), matrix_from_json(p));
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
  return checkpoint_from_json(read_file(path));
}

Checkpoint linear_checkpoint(const LinearModel& model, const TrainConfig& config) {
  Checkpoint c;
  c.metadata = {{"architecture", "linear"},
                {"loss", std::string(loss_name(model.loss))},
                {"epochs", config.epochs},
                {"batch_size", config.batch_size},
                {"lr", config.adam.lr},
                {"seed", config.seed}};
  c.parameters.emplace_back("weights", Matrix(model.weights));
  c.parameters.emplace_back("bias", Matrix::Constant(1, 1, model.bias));
  return c;
}

LinearModel linear_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.metadata.value("architecture", "") != "linear") {
    throw SchemaError("checkpoint is not a linear model");
  }
  LinearModel m;
  m.loss = parse_loss(ckpt.metadata.at("loss").get<std::string>());
  m.weights = ckpt.parameter("weights").col(0);
  m.bias = ckpt.parameter("bias")(0, 0);
  return m;
}

}  // namespace traitalign
