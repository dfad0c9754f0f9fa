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

#include "traitalign/corpus.hpp"

#include <algorithm>
#include <regex>
#include <set>

#include <json.hpp>

namespace traitalign {

using json = nlohmann::json;

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f'; }

bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) || c == '_';
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool is_url(std::string_view token) {
  const std::string lower = ascii_lower(token);
  return lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.");
}

const std::regex& emoticon_pattern() {
  static const std::regex re(
      R"(^(?:[<>]?[:;=8xX][\-o\*'^]?[\)\]\(\[dDpP/\\|oO3\*\}\{@]+|[\)\]\(\[dDpP/\\|\}\{]+[\-o\*'^]?[:;=8]|<3+|\^_*\^|-_+-|o_o|O_O|T_T)$)");
  return re;
}

}  // namespace

Label UserDocument::label(Trait t) const {
  if (!labels) throw ValueError("user '" + user_id + "' has no labels (run median_split first)");
  return (*labels)[trait_index(t)];
}

std::string_view format_name(CorpusFormat f) {
  switch (f) {
    case CorpusFormat::pan2015_like: return "pan2015-like";
    case CorpusFormat::pretokenized: return "pretokenized";
    case CorpusFormat::synthetic: return "synthetic";
  }
  return "?";
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "pan2015-like") return CorpusFormat::pan2015_like;
  if (name == "pretokenized") return CorpusFormat::pretokenized;
  if (name == "synthetic") return CorpusFormat::synthetic;
  throw ConfigError("unknown corpus format '" + std::string(name) + "'");
}

std::size_t Corpus::count(Trait t, Label l) const {
  return static_cast<std::size_t>(std::count_if(
      users.begin(), users.end(), [&](const UserDocument& u) { return u.label(t) == l; }));
}

std::vector<std::string> tokenize_tweet(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j == i) break;
    const std::string_view chunk = text.substr(i, j - i);
    i = j;

    if (chunk.front() == '@') {
      out.emplace_back("@username");
      continue;
    }
    if (is_url(chunk)) {
      out.emplace_back("@url");
      continue;
    }
    if (std::regex_match(chunk.begin(), chunk.end(), emoticon_pattern())) {
      out.push_back(ascii_lower(chunk));
      continue;
    }

    std::size_t p = 0;
    while (p < chunk.size()) {
      const char c = chunk[p];
      const bool tagged = (c == '@' || c == '#') && p + 1 < chunk.size() && is_word_char(chunk[p + 1]);
      if (tagged || is_word_char(c)) {
        std::size_t q = tagged ? p + 1 : p;
        while (q < chunk.size()) {
          if (is_word_char(chunk[q])) {
            ++q;
          } else if (chunk[q] == '\'' && q + 1 < chunk.size() && is_word_char(chunk[q + 1]) && q > p) {
            ++q;
          } else {
            break;
          }
        }
        if (c == '@' && tagged) {
          out.emplace_back("@username");
        } else {
          out.push_back(ascii_lower(chunk.substr(p, q - p)));
        }
        p = q;
      } else {
        std::size_t q = p;
        while (q < chunk.size() && !is_word_char(chunk[q]) &&
               !((chunk[q] == '@' || chunk[q] == '#') && q + 1 < chunk.size() &&
                 is_word_char(chunk[q + 1]))) {
          ++q;
        }
        // Any emitted token starting with '@' is a mention.
        if (c == '@') {
          out.emplace_back("@username");
        } else {
          out.push_back(ascii_lower(chunk.substr(p, q - p)));
        }
        p = q;
      }
    }
  }
  return out;
}

std::string normalize_pretokenized(std::string_view token) {
  if (!token.empty() && token.front() == '@') return "@username";
  if (is_url(token)) return "@url";
  return ascii_lower(token);
}

CorpusLoadResult parse_corpus(std::string_view jsonl, CorpusFormat format) {
  CorpusLoadResult result;
  result.corpus.provenance = format;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (std::all_of(line.begin(), line.end(), is_space)) continue;

    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SchemaError("manifest line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    if (!rec.is_object() || !rec.contains("user_id") || !rec["user_id"].is_string()) {
      throw SchemaError("manifest line " + std::to_string(line_no) + ": missing string 'user_id'");
    }
    UserDocument doc;
    doc.user_id = rec["user_id"].get<std::string>();
    const std::string where = "user '" + doc.user_id + "' (line " + std::to_string(line_no) + ")";
    if (!rec.contains("language") || !rec["language"].is_string()) {
      throw SchemaError(where + ": missing string 'language'");
    }
    doc.language = rec["language"].get<std::string>();
    if (result.corpus.language.empty()) {
      result.corpus.language = doc.language;
    } else if (doc.language != result.corpus.language) {
      throw SchemaError(where + ": language '" + doc.language + "' differs from corpus language '" +
                        result.corpus.language + "'");
    }
    if (!rec.contains("scores") || !rec["scores"].is_object()) {
      throw SchemaError(where + ": missing 'scores' object");
    }
    for (Trait t : kTraits) {
      const std::string name(trait_name(t));
      const auto& s = rec["scores"];
      if (!s.contains(name) || !s[name].is_number()) {
        throw SchemaError(where + ": missing trait score '" + name + "'");
      }
      doc.scores[trait_index(t)] = s[name].get<double>();
    }

    std::size_t n_tweets = 0;
    if (format == CorpusFormat::pretokenized || (format == CorpusFormat::synthetic && rec.contains("tokens"))) {
      if (!rec.contains("tokens") || !rec["tokens"].is_array()) {
        throw SchemaError(where + ": pretokenized record needs 'tokens': [[str]]");
      }
      for (const auto& tweet : rec["tokens"]) {
        if (!tweet.is_array()) throw SchemaError(where + ": 'tokens' entries must be arrays");
        ++n_tweets;
        for (const auto& tok : tweet) {
          if (!tok.is_string()) throw SchemaError(where + ": tokens must be strings");
          const auto& s = tok.get_ref<const std::string&>();
          if (s.empty()) continue;
          if (std::any_of(s.begin(), s.end(), is_space)) {
            throw SchemaError(where + ": pretokenized token contains whitespace");
          }
          doc.tokens.push_back(normalize_pretokenized(s));
        }
      }
    } else {
      if (!rec.contains("tweets") || !rec["tweets"].is_array()) {
        throw SchemaError(where + ": record needs 'tweets': [str]");
      }
      for (const auto& tweet : rec["tweets"]) {
        if (!tweet.is_string()) throw SchemaError(where + ": tweets must be strings");
        ++n_tweets;
        for (auto& tok : tokenize_tweet(tweet.get_ref<const std::string&>())) {
          doc.tokens.push_back(std::move(tok));
        }
      }
    }
    if (n_tweets == 0 || doc.tokens.empty()) {
      result.warnings.push_back(where + ": no tweets, user skipped");
      continue;
    }
    if (!ids.insert(doc.user_id).second) throw SchemaError(where + ": duplicate user_id");
    result.corpus.users.push_back(std::move(doc));
  }
  return result;
}

CorpusLoadResult load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  if (!std::filesystem::exists(path)) throw IoError("corpus manifest not found: " + path.string());
  try {
    return parse_corpus(read_file(path), format);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path,
                 std::size_t tokens_per_tweet) {
  if (tokens_per_tweet == 0) throw ValueError("tokens_per_tweet must be positive");
  std::string out;
  for (const auto& u : corpus.users) {
    json rec;
    rec["user_id"] = u.user_id;
    rec["language"] = u.language;
    json scores = json::object();
    for (Trait t : kTraits) scores[std::string(trait_name(t))] = u.score(t);
    rec["scores"] = scores;
    json tweets = json::array();
    for (std::size_t i = 0; i < u.tokens.size(); i += tokens_per_tweet) {
      const auto last = std::min(u.tokens.size(), i + tokens_per_tweet);
      tweets.push_back(std::vector<std::string>(u.tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                                u.tokens.begin() + static_cast<std::ptrdiff_t>(last)));
    }
    rec["tokens"] = tweets;
    out += rec.dump();
    out += '\n';
  }
  write_file(path, out);
}

Corpus median_split(Corpus corpus) {
  if (corpus.users.size() < 2) throw ValueError("median_split needs at least 2 users");
  PerTrait<double> thresholds{};
  for (Trait t : kTraits) {
    std::vector<double> s;
    s.reserve(corpus.users.size());
    for (const auto& u : corpus.users) s.push_back(u.score(t));
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();
    thresholds[trait_index(t)] = n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
  }
  for (auto& u : corpus.users) {
    PerTrait<Label> labels{};
    for (Trait t : kTraits) {
      labels[trait_index(t)] =
          u.score(t) >= thresholds[trait_index(t)] ? Label::positive : Label::negative;
    }
    u.labels = labels;
  }
  corpus.split_thresholds = thresholds;
  return corpus;
}

std::vector<std::size_t> FoldPlan::fold_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (const auto& [id, f] : assignments) ++sizes[f];
  return sizes;
}

FoldPlan stratified_kfold(const Corpus& corpus, Trait trait, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ValueError("stratified_kfold needs k >= 2");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < corpus.users.size(); ++i) {
    (corpus.users[i].label(trait) == Label::positive ? pos : neg).push_back(i);
  }
  const std::size_t minority = std::min(pos.size(), neg.size());
  if (k > minority) {
    throw ValueError("k=" + std::to_string(k) + " exceeds minority class count " +
                     std::to_string(minority) + " for trait " + std::string(trait_name(trait)));
  }
  Rng rng(seed);
  rng.shuffle(pos);
  rng.shuffle(neg);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.trait = trait;
  // Deal positives then negatives round-robin; the running offset keeps
  // total fold sizes within one of each other.
  std::size_t slot = 0;
  for (auto idx : pos) plan.assignments[corpus.users[idx].user_id] = slot++ % k;
  for (auto idx : neg) plan.assignments[corpus.users[idx].user_id] = slot++ % k;
  return plan;
}

}  // namespace traitalign
