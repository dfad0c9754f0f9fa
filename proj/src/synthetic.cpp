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

#include "traitalign/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "traitalign/json_util.hpp"

namespace traitalign {

namespace {

constexpr std::size_t kBlock = 3;

// Rotation by `angle` acting on coordinates [first, first + size).
Matrix block_rotation(std::size_t dim, std::size_t first, std::size_t size, double angle,
                      Rng& rng) {
  Matrix q = Matrix::Identity(dim, dim);
  if (angle == 0.0) return q;
  Eigen::Matrix3d r3;
  if (size == 2) {
    const double c = std::cos(angle), s = std::sin(angle);
    q(first, first) = c;
    q(first, first + 1) = -s;
    q(first + 1, first) = s;
    q(first + 1, first + 1) = c;
    return q;
  }
  Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
  axis.normalize();
  r3 = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) q(first + i, first + j) = r3(i, j);
  }
  return q;
}

Matrix target_embeddings(const SyntheticSpec& spec, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(spec.vocab_size);
  const auto d = static_cast<Eigen::Index>(spec.dim);
  const std::size_t k = std::max<std::size_t>(1, spec.clusters);
  Matrix centers(static_cast<Eigen::Index>(k), d);
  for (Eigen::Index i = 0; i < centers.size(); ++i) centers.data()[i] = 1.5 * rng.normal();
  // Unequal cluster weights and per-axis spreads make the point cloud
  // asymmetric, so only one rotation matches it to its image.
  std::vector<double> weights(k);
  for (std::size_t c = 0; c < k; ++c) weights[c] = 1.0 / static_cast<double>(c + 1);
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  Vector spread(d);
  for (Eigen::Index j = 0; j < d; ++j) spread(j) = 0.4 + 0.8 * rng.uniform();

  Matrix e(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    double u = rng.uniform() * wsum;
    std::size_t c = 0;
    while (c + 1 < k && u >= weights[c]) u -= weights[c++];
    for (Eigen::Index j = 0; j < d; ++j) {
      e(i, j) = centers(static_cast<Eigen::Index>(c), j) + spread(j) * rng.normal();
    }
    e.row(i).normalize();
  }
  return e;
}

}  // namespace

std::string synthetic_word(std::string_view language, std::size_t index) {
  return std::string(language) + "_w" + std::to_string(index);
}

const SyntheticLanguageData& SyntheticData::language(std::string_view code) const {
  for (const auto& l : languages) {
    if (l.corpus.language == code) return l;
  }
  throw ValueError("synthetic data has no language '" + std::string(code) + "'");
}

SyntheticData generate_synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.languages.empty()) throw SpecError("synthetic spec needs at least one language");
  if (spec.vocab_size == 0 || spec.dim == 0 || spec.trait_words_per_trait == 0 ||
      spec.doc_length == 0) {
    throw SpecError("synthetic spec sizes must be positive");
  }
  for (const auto& l : spec.languages) {
    if (l.users < 2) throw SpecError("language '" + l.code + "' needs at least 2 users");
  }
  if (spec.trait_signal_strength < 0.0 || spec.trait_signal_strength > 1.0) {
    throw SpecError("trait_signal_strength must lie in [0, 1]");
  }
  const std::size_t m = spec.trait_words_per_trait;
  const std::size_t trait_word_count = kNumTraits * m;
  if (spec.vocab_size < 10 * trait_word_count) {
    throw SpecError("vocab_size " + std::to_string(spec.vocab_size) + " < 10 x trait word count " +
                    std::to_string(trait_word_count));
  }
  const std::size_t sources = spec.languages.size() - 1;
  const bool rotated_traits = spec.trait_rotation_angle != 0.0;
  const std::size_t block = std::min(kBlock, spec.dim / kNumTraits);
  if (rotated_traits && block < 2) {
    throw SpecError("trait rotations need dim >= 10 (two coordinates per trait)");
  }
  if (trait_word_count * (1 + (rotated_traits ? sources : 0)) > spec.vocab_size) {
    throw SpecError("vocabulary too small for the planted trait word sets");
  }

  Rng geo(spec.planted_rotation_seed);
  Rng sample(spec.sample_seed);
  const std::string& target = spec.languages.front().code;
  const auto d = static_cast<Eigen::Index>(spec.dim);

  Matrix e_target = target_embeddings(spec, geo);

  // Reserve planted word indices.
  std::vector<std::size_t> perm(spec.vocab_size);
  std::iota(perm.begin(), perm.end(), 0);
  geo.shuffle(perm);
  std::size_t next = 0;
  PerTrait<std::vector<std::size_t>> target_sets;
  for (Trait t : kTraits) {
    for (std::size_t j = 0; j < m; ++j) target_sets[trait_index(t)].push_back(perm[next++]);
  }

  SyntheticData data;
  data.truth.target_language = target;
  std::map<std::string, PerTrait<std::vector<std::size_t>>> lang_sets;
  lang_sets[target] = target_sets;
  data.truth.semantic_maps[target] = Matrix::Identity(d, d);

  std::map<std::string, Matrix> rotations;
  for (std::size_t li = 1; li < spec.languages.size(); ++li) {
    const std::string& code = spec.languages[li].code;
    PerTrait<Matrix> trait_maps;
    PerTrait<std::vector<std::size_t>> sets;
    for (Trait t : kTraits) {
      const std::size_t ti = trait_index(t);
      Matrix q = block_rotation(spec.dim, ti * block, block, spec.trait_rotation_angle, geo);
      trait_maps[ti] = q.transpose();
      if (!rotated_traits) {
        sets[ti] = target_sets[ti];
        continue;
      }
      for (std::size_t j = 0; j < m; ++j) {
        const std::size_t s = perm[next++];
        sets[ti].push_back(s);
        e_target.row(static_cast<Eigen::Index>(s)) =
            (q * e_target.row(static_cast<Eigen::Index>(target_sets[ti][j])).transpose()).transpose();
      }
    }
    data.truth.trait_maps[code] = trait_maps;
    lang_sets[code] = sets;
    rotations[code] = random_orthogonal(spec.dim, geo);
    data.truth.semantic_maps[code] = rotations[code].transpose();
  }

  for (const auto& lang : spec.languages) {
    const auto& sets = lang_sets[lang.code];
    std::vector<std::string> words(spec.vocab_size);
    for (std::size_t i = 0; i < spec.vocab_size; ++i) words[i] = synthetic_word(lang.code, i);

    Matrix e = e_target;
    if (lang.code != target) {
      e = e_target * rotations[lang.code].transpose();
      if (spec.noise_sigma > 0.0) {
        for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] += spec.noise_sigma * geo.normal();
      }
    }

    PerTrait<std::vector<std::string>> trait_words;
    std::set<std::size_t> planted;
    for (Trait t : kTraits) {
      for (auto idx : sets[trait_index(t)]) {
        trait_words[trait_index(t)].push_back(words[idx]);
        planted.insert(idx);
      }
    }
    data.truth.trait_words[lang.code] = trait_words;
    if (lang.code != target) {
      PerTrait<std::vector<std::pair<std::string, std::string>>> pairs;
      for (Trait t : kTraits) {
        const auto ti = trait_index(t);
        for (std::size_t j = 0; j < m; ++j) {
          pairs[ti].emplace_back(words[sets[ti][j]], synthetic_word(target, target_sets[ti][j]));
        }
      }
      data.truth.trait_pairs[lang.code] = pairs;
    }

    // Zipf background over the non-trait words of this language.
    std::vector<std::size_t> background;
    for (std::size_t i = 0; i < spec.vocab_size; ++i) {
      if (!planted.contains(i)) background.push_back(i);
    }
    sample.shuffle(background);
    std::vector<double> cdf(background.size());
    double acc = 0.0;
    for (std::size_t r = 0; r < background.size(); ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), spec.zipf_exponent);
      cdf[r] = acc;
    }
    auto draw_background = [&]() {
      const double u = sample.uniform() * acc;
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      return background[std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()),
                                              background.size() - 1)];
    };

    // Balanced planted labels per trait; scores separate the two classes so
    // the median split recovers them exactly.
    const std::size_t n_users = lang.users;
    const std::size_t n_pos = (n_users + 1) / 2;
    std::vector<PerTrait<Label>> labels(n_users);
    for (Trait t : kTraits) {
      std::vector<std::size_t> order(n_users);
      std::iota(order.begin(), order.end(), 0);
      sample.shuffle(order);
      for (std::size_t r = 0; r < n_users; ++r) {
        labels[order[r]][trait_index(t)] = r < n_pos ? Label::positive : Label::negative;
      }
    }

    Corpus corpus;
    corpus.language = lang.code;
    corpus.provenance = CorpusFormat::synthetic;
    for (std::size_t u = 0; u < n_users; ++u) {
      UserDocument doc;
      doc.user_id = lang.code + "_u" + std::to_string(u);
      doc.language = lang.code;
      for (Trait t : kTraits) {
        const double r = sample.uniform();
        doc.scores[trait_index(t)] =
            labels[u][trait_index(t)] == Label::positive ? 0.55 + 0.45 * r : 0.45 * r;
      }
      doc.tokens.reserve(spec.doc_length);
      for (std::size_t p = 0; p < spec.doc_length; ++p) {
        std::size_t word;
        if (sample.uniform() < spec.trait_signal_strength) {
          const std::size_t ti = sample.below(kNumTraits);
          if (labels[u][ti] == Label::positive) {
            word = sets[ti][sample.below(m)];
          } else {
            word = draw_background();
          }
        } else {
          word = draw_background();
        }
        doc.tokens.push_back(words[word]);
      }
      data.truth.planted_labels[lang.code][doc.user_id] = labels[u];
      corpus.users.push_back(std::move(doc));
    }
    data.languages.push_back({std::move(corpus), EmbeddingTable(lang.code, SpaceTag::mono(), words, e)});
  }
  return data;
}

void write_synthetic_fixture(const SyntheticData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& l : data.languages) {
    save_vec(l.mono, dir / (l.corpus.language + ".vec"));
    save_corpus(l.corpus, dir / (l.corpus.language + ".jsonl"));
  }
  const auto& t = data.truth;
  json j;
  j["target_language"] = t.target_language;
  for (const auto& [lang, m] : t.semantic_maps) j["semantic_maps"][lang] = matrix_to_json(m);
  for (const auto& [lang, maps] : t.trait_maps) {
    for (Trait tr : kTraits) {
      j["trait_maps"][lang][std::string(trait_name(tr))] = matrix_to_json(maps[trait_index(tr)]);
    }
  }
  for (const auto& [lang, words] : t.trait_words) {
    for (Trait tr : kTraits) {
      j["trait_words"][lang][std::string(trait_name(tr))] = words[trait_index(tr)];
    }
  }
  for (const auto& [lang, pairs] : t.trait_pairs) {
    for (Trait tr : kTraits) {
      j["trait_pairs"][lang][std::string(trait_name(tr))] = pairs[trait_index(tr)];
    }
  }
  for (const auto& [lang, users] : t.planted_labels) {
    for (const auto& [user, labels] : users) {
      json row = json::object();
      for (Trait tr : kTraits) {
        row[std::string(trait_name(tr))] = labels[trait_index(tr)] == Label::positive ? 1 : 0;
      }
      j["planted_labels"][lang][user] = row;
    }
  }
  write_file(dir / "ground_truth.json", j.dump(1));
}

SyntheticTruth load_ground_truth(const std::filesystem::path& path) {
  const json j = json::parse(read_file(path));
  SyntheticTruth t;
  t.target_language = j.at("target_language").get<std::string>();
  for (auto& [lang, m] : j.at("semantic_maps").items()) t.semantic_maps[lang] = matrix_from_json(m);
  if (j.contains("trait_maps")) {
    for (auto& [lang, maps] : j["trait_maps"].items()) {
      for (Trait tr : kTraits) {
        t.trait_maps[lang][trait_index(tr)] = matrix_from_json(maps.at(std::string(trait_name(tr))));
      }
    }
  }
  for (auto& [lang, words] : j.at("trait_words").items()) {
    for (Trait tr : kTraits) {
      t.trait_words[lang][trait_index(tr)] =
          words.at(std::string(trait_name(tr))).get<std::vector<std::string>>();
    }
  }
  if (j.contains("trait_pairs")) {
    for (auto& [lang, pairs] : j["trait_pairs"].items()) {
      for (Trait tr : kTraits) {
        t.trait_pairs[lang][trait_index(tr)] =
            pairs.at(std::string(trait_name(tr)))
                .get<std::vector<std::pair<std::string, std::string>>>();
      }
    }
  }
  if (j.contains("planted_labels")) {
    for (auto& [lang, users] : j["planted_labels"].items()) {
      for (auto& [user, row] : users.items()) {
        PerTrait<Label> labels{};
        for (Trait tr : kTraits) {
          labels[trait_index(tr)] =
              row.at(std::string(trait_name(tr))).get<int>() ? Label::positive : Label::negative;
        }
        t.planted_labels[lang][user] = labels;
      }
    }
  }
  return t;
}

}  // namespace traitalign
