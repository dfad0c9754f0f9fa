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

#include "traitalign/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace traitalign {

namespace {

constexpr std::size_t kConvBase = 1;

void fill_uniform(Matrix& m, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * rng.uniform() - 1.0) * bound;
}

std::string vocab_key(std::string_view language, std::string_view word) {
  std::string k(language);
  k.push_back('\t');
  k.append(word);
  return k;
}

Matrix gather_grid(const Matrix& table, const TokenIds& ids) {
  Matrix grid = Matrix::Zero(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] >= 0) grid.row(static_cast<Eigen::Index>(t)) = table.row(ids[t]);
  }
  return grid;
}

}  // namespace

void CnnConfig::validate() const {
  if (widths.empty() || filters == 0 || fc_hidden == 0) {
    throw ConfigError("cnn needs at least one width, filter and hidden unit");
  }
  const std::size_t widest = *std::max_element(widths.begin(), widths.end());
  if (std::find(widths.begin(), widths.end(), 0u) != widths.end()) {
    throw ConfigError("cnn window widths must be positive");
  }
  if (max_tokens < widest) {
    throw ConfigError("max_tokens " + std::to_string(max_tokens) + " is below the widest window " +
                      std::to_string(widest));
  }
}

CnnVocabulary::CnnVocabulary(const std::vector<const UserDocument*>& documents,
                             const FeatureVectorizer& dynamic,
                             const FeatureVectorizer* static_channel) {
  std::vector<std::pair<std::size_t, std::size_t>> sources;  // (table index, row)
  std::vector<std::string> langs;
  for (const UserDocument* doc : documents) {
    const EmbeddingTable& table = dynamic.table(doc->language);
    std::size_t table_index = 0;
    while (&dynamic.tables()[table_index] != &table) ++table_index;
    for (const auto& tok : doc->tokens) {
      const auto row = table.find(tok);
      if (!row) continue;
      std::string key = vocab_key(doc->language, tok);
      if (index_.contains(key)) continue;
      index_.emplace(key, static_cast<int>(keys_.size()));
      keys_.push_back(std::move(key));
      sources.emplace_back(table_index, *row);
      langs.push_back(doc->language);
    }
  }
  const auto d = static_cast<Eigen::Index>(dynamic.dim());
  dynamic_.resize(static_cast<Eigen::Index>(keys_.size()), d);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    dynamic_.row(static_cast<Eigen::Index>(i)) =
        dynamic.tables()[sources[i].first].row(sources[i].second);
  }
  if (static_channel) {
    if (static_channel->dim() != dynamic.dim()) {
      throw ValueError("cnn channels must share the embedding dimension");
    }
    Matrix s = Matrix::Zero(static_cast<Eigen::Index>(keys_.size()), d);
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      const EmbeddingTable& table = static_channel->table(langs[i]);
      const std::string_view word = std::string_view(keys_[i]).substr(langs[i].size() + 1);
      if (auto r = table.find(word)) s.row(static_cast<Eigen::Index>(i)) = table.row(*r);
    }
    static_ = std::move(s);
  }
}

std::optional<int> CnnVocabulary::id(std::string_view language, std::string_view word) const {
  auto it = index_.find(vocab_key(language, word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenIds CnnVocabulary::encode(const UserDocument& doc, std::size_t max_tokens) const {
  TokenIds ids(max_tokens, -1);
  const std::size_t n = std::min(max_tokens, doc.tokens.size());
  for (std::size_t t = 0; t < n; ++t) {
    if (auto i = id(doc.language, doc.tokens[t])) ids[t] = *i;
  }
  return ids;
}

CnnModel::CnnModel(CnnConfig config, Matrix dynamic_embeddings,
                   std::optional<Matrix> static_embeddings, Rng& rng)
    : config_(std::move(config)), static_(std::move(static_embeddings)) {
  config_.validate();
  const auto d = dynamic_embeddings.cols();
  if (d == 0) throw ValueError("cnn embedding dimension must be positive");
  if (static_ && (static_->cols() != d || static_->rows() != dynamic_embeddings.rows())) {
    throw ValueError("static channel table must match the dynamic table shape");
  }
  const auto f = static_cast<Eigen::Index>(config_.filters);
  const auto h = static_cast<Eigen::Index>(config_.fc_hidden);
  names_.push_back("embedding.dynamic");
  params_.push_back(std::move(dynamic_embeddings));
  for (std::size_t c = 0; c < channels(); ++c) {
    for (std::size_t w : config_.widths) {
      const std::string prefix = "conv.c" + std::to_string(c) + ".w" + std::to_string(w);
      const double bound = 1.0 / std::sqrt(static_cast<double>(w * static_cast<std::size_t>(d)));
      Matrix k(static_cast<Eigen::Index>(w) * d, f), b(1, f);
      fill_uniform(k, bound, rng);
      fill_uniform(b, bound, rng);
      names_.push_back(prefix + ".weight");
      params_.push_back(std::move(k));
      names_.push_back(prefix + ".bias");
      params_.push_back(std::move(b));
    }
  }
  const auto nf = static_cast<Eigen::Index>(feature_count());
  Matrix fw(h, nf), fb(h, 1), ow(static_cast<Eigen::Index>(output_size()), h),
      ob(static_cast<Eigen::Index>(output_size()), 1);
  fill_uniform(fw, 1.0 / std::sqrt(static_cast<double>(nf)), rng);
  fill_uniform(fb, 1.0 / std::sqrt(static_cast<double>(nf)), rng);
  fill_uniform(ow, 1.0 / std::sqrt(static_cast<double>(h)), rng);
  fill_uniform(ob, 1.0 / std::sqrt(static_cast<double>(h)), rng);
  names_.insert(names_.end(), {"fc.weight", "fc.bias", "out.weight", "out.bias"});
  params_.push_back(std::move(fw));
  params_.push_back(std::move(fb));
  params_.push_back(std::move(ow));
  params_.push_back(std::move(ob));
}

std::size_t CnnModel::feature_count() const {
  return channels() * config_.widths.size() * config_.filters;
}

std::size_t CnnModel::block(std::size_t channel, std::size_t width_index) const {
  return kConvBase + 2 * (channel * config_.widths.size() + width_index);
}

Vector CnnModel::forward(const TokenIds& ids, Activations* cache) const {
  if (ids.size() != config_.max_tokens) {
    throw ValueError("cnn input has " + std::to_string(ids.size()) + " positions, expected " +
                     std::to_string(config_.max_tokens));
  }
  const auto d = params_[0].cols();
  const auto f = static_cast<Eigen::Index>(config_.filters);
  const auto t_len = static_cast<Eigen::Index>(ids.size());
  Activations local;
  Activations& a = cache ? *cache : local;
  a.grids.clear();
  a.grids.push_back(gather_grid(params_[0], ids));
  if (static_) a.grids.push_back(gather_grid(*static_, ids));

  const auto nf = static_cast<Eigen::Index>(feature_count());
  a.pre_pool_max.resize(nf);
  a.argmax.assign(static_cast<std::size_t>(nf), 0);
  a.features.resize(nf);
  Eigen::Index slot = 0;
  for (std::size_t c = 0; c < channels(); ++c) {
    const Matrix& x = a.grids[c];
    for (std::size_t wi = 0; wi < config_.widths.size(); ++wi) {
      const auto w = static_cast<Eigen::Index>(config_.widths[wi]);
      const Matrix& k = params_[block(c, wi)];
      const Matrix& bias = params_[block(c, wi) + 1];
      const Eigen::Index positions = t_len - w + 1;
      // Row p of the unfolded grid is the window x[p .. p+w) flattened, so
      // one product gives every position.
      Matrix unfolded(positions, w * d);
      for (Eigen::Index s = 0; s < w; ++s) {
        unfolded.middleCols(s * d, d) = x.middleRows(s, positions);
      }
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor> z =
          unfolded * k;
      z.rowwise() += bias.row(0);
      for (Eigen::Index j = 0; j < f; ++j) {
        Eigen::Index best = 0;
        const double v = z.col(j).maxCoeff(&best);
        a.pre_pool_max(slot) = v;
        a.argmax[static_cast<std::size_t>(slot)] = best;
        a.features(slot) = std::max(0.0, v);
        ++slot;
      }
    }
  }
  const std::size_t fc = block(channels(), 0);
  a.hidden = (params_[fc] * a.features + params_[fc + 1].col(0)).array().tanh();
  a.output = params_[fc + 2] * a.hidden + params_[fc + 3].col(0);
  return a.output;
}

double CnnModel::positive_probability(const TokenIds& ids) const {
  if (config_.head != CnnHead::softmax2) throw ValueError("positive_probability needs softmax2");
  const Vector z = forward(ids);
  // softmax(z)[1] = sigmoid(z1 - z0)
  const double diff = z(1) - z(0);
  return diff >= 0.0 ? 1.0 / (1.0 + std::exp(-diff)) : std::exp(diff) / (1.0 + std::exp(diff));
}

double CnnModel::predict_value(const TokenIds& ids) const {
  if (config_.head != CnnHead::linear1) throw ValueError("predict_value needs linear1");
  return forward(ids)(0);
}

Label CnnModel::classify(const TokenIds& ids) const {
  return positive_probability(ids) >= 0.5 ? Label::positive : Label::negative;
}

double CnnModel::loss_and_gradients(std::span<const TokenIds* const> batch,
                                    std::span<const double> targets,
                                    std::vector<Matrix>* grads) const {
  if (batch.size() != targets.size()) throw ValueError("cnn: batch/target size mismatch");
  if (batch.empty()) throw ValueError("cnn: empty batch");
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  if (grads) {
    grads->clear();
    for (const auto& p : params_) grads->push_back(Matrix::Zero(p.rows(), p.cols()));
  }
  const auto d = params_[0].cols();
  const std::size_t fc = block(channels(), 0);
  double total = 0.0;
  Activations a;
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const TokenIds& ids = *batch[n];
    forward(ids, &a);
    Vector dout(static_cast<Eigen::Index>(output_size()));
    if (config_.head == CnnHead::softmax2) {
      const double m = a.output.maxCoeff();
      Vector p = (a.output.array() - m).exp();
      p /= p.sum();
      const double y = targets[n];
      const double p1 = std::clamp(p(1), kProbClamp, 1.0 - kProbClamp);
      total -= y * std::log(p1) + (1.0 - y) * std::log(1.0 - p1);
      dout(0) = (p(0) - (1.0 - y)) * inv_n;
      dout(1) = (p(1) - y) * inv_n;
    } else {
      const double e = a.output(0) - targets[n];
      total += e * e;
      dout(0) = 2.0 * e * inv_n;
    }
    if (!grads) continue;
    auto& g = *grads;
    g[fc + 2].noalias() += dout * a.hidden.transpose();
    g[fc + 3].col(0) += dout;
    const Vector dz = (params_[fc + 2].transpose() * dout).array() * (1.0 - a.hidden.array().square());
    g[fc].noalias() += dz * a.features.transpose();
    g[fc + 1].col(0) += dz;
    const Vector dfeat = params_[fc].transpose() * dz;

    Eigen::Index slot = 0;
    for (std::size_t c = 0; c < channels(); ++c) {
      const Matrix& x = a.grids[c];
      for (std::size_t wi = 0; wi < config_.widths.size(); ++wi) {
        const auto w = static_cast<Eigen::Index>(config_.widths[wi]);
        const std::size_t kb = block(c, wi);
        const Matrix& k = params_[kb];
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(config_.filters); ++j, ++slot) {
          if (a.pre_pool_max(slot) <= 0.0) continue;
          const double gv = dfeat(slot);
          const Eigen::Index p = a.argmax[static_cast<std::size_t>(slot)];
          g[kb + 1](0, j) += gv;
          for (Eigen::Index s = 0; s < w; ++s) {
            g[kb].block(s * d, j, d, 1) += gv * x.row(p + s).transpose();
            if (c == 0) {
              const int id = ids[static_cast<std::size_t>(p + s)];
              if (id >= 0) g[0].row(id) += gv * k.block(s * d, j, d, 1).transpose();
            }
          }
        }
      }
    }
  }
  return total * inv_n;
}

CnnTrainResult train_cnn(CnnModel& model, const std::vector<TokenIds>& documents,
                         std::span<const double> targets, const TrainConfig& config) {
  config.validate();
  if (documents.empty()) throw ValueError("train_cnn: empty training set");
  if (documents.size() != targets.size()) throw ValueError("train_cnn: document/target mismatch");
  Adam adam(config.adam);
  Rng rng(config.seed);
  std::vector<std::size_t> order(documents.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Matrix*> params;
  for (auto& p : model.mutable_parameters()) params.push_back(&p);
  std::vector<Matrix> grads;
  CnnTrainResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const TokenIds*> batch;
      std::vector<double> y;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&documents[order[i]]);
        y.push_back(targets[order[i]]);
      }
      const double l = model.loss_and_gradients(batch, y, &grads);
      if (!std::isfinite(l)) {
        throw TrainingError("non-finite cnn loss at epoch " + std::to_string(epoch));
      }
      for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!grads[i].allFinite()) {
          throw TrainingError("non-finite gradient for " + model.parameter_names()[i] +
                              " at epoch " + std::to_string(epoch));
        }
      }
      adam.step(params, grads);
      epoch_loss += l * static_cast<double>(end - start);
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return result;
}

Checkpoint cnn_checkpoint(const CnnModel& model, const TrainConfig& config) {
  const CnnConfig& c = model.config();
  Checkpoint ck;
  ck.metadata = {{"architecture", "cnn"},
                 {"widths", c.widths},
                 {"filters", c.filters},
                 {"fc_hidden", c.fc_hidden},
                 {"head", c.head == CnnHead::softmax2 ? "softmax2" : "linear1"},
                 {"max_tokens", c.max_tokens},
                 {"channels", model.channels()},
                 {"epochs", config.epochs},
                 {"batch_size", config.batch_size},
                 {"lr", config.adam.lr},
                 {"loss", std::string(loss_name(config.loss))},
                 {"seed", config.seed}};
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    ck.parameters.emplace_back(model.parameter_names()[i], model.parameters()[i]);
  }
  if (model.static_embeddings()) ck.parameters.emplace_back("static.embedding", *model.static_embeddings());
  return ck;
}

CnnModel cnn_from_checkpoint(const Checkpoint& ckpt) {
  const json& m = ckpt.metadata;
  if (m.value("architecture", "") != "cnn") throw SchemaError("checkpoint is not a cnn model");
  CnnConfig c;
  try {
    c.widths = m.at("widths").get<std::vector<std::size_t>>();
    c.filters = m.at("filters").get<std::size_t>();
    c.fc_hidden = m.at("fc_hidden").get<std::size_t>();
    c.head = m.at("head").get<std::string>() == "linear1" ? CnnHead::linear1 : CnnHead::softmax2;
    c.max_tokens = m.at("max_tokens").get<std::size_t>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("cnn checkpoint: ") + e.what());
  }
  std::optional<Matrix> stat;
  if (m.value("channels", 1) == 2) stat = ckpt.parameter("static.embedding");
  Rng rng(0);
  CnnModel model(c, ckpt.parameter("embedding.dynamic"), std::move(stat), rng);
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    const Matrix& p = ckpt.parameter(model.parameter_names()[i]);
    Matrix& dst = model.mutable_parameters()[i];
    if (p.rows() != dst.rows() || p.cols() != dst.cols()) {
      throw SchemaError("cnn checkpoint: shape mismatch for " + model.parameter_names()[i]);
    }
    dst = p;
  }
  return model;
}

}  // namespace traitalign
