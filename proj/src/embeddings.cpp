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

#include "traitalign/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

namespace traitalign {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f'; }

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_number(std::string_view tok, double& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (first != last && *first == '+') ++first;
  auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

}  // namespace

SpaceTag SpaceTag::parse(std::string_view text) {
  if (text == "mono") return mono();
  if (text == "multi") return multi();
  if (text.starts_with("trait:")) return of_trait(parse_trait(text.substr(6)));
  throw ValueError("unknown space tag '" + std::string(text) + "'");
}

std::string SpaceTag::to_string() const {
  switch (kind) {
    case Kind::mono: return "mono";
    case Kind::multi: return "multi";
    case Kind::trait: return "trait:" + std::string(trait_name(trait));
  }
  return "?";
}

SimilarityMetric SimilarityMetric::csls(std::size_t k) {
  if (k < 1) throw ValueError("csls_k must be >= 1");
  return {Kind::csls, k};
}

EmbeddingTable::EmbeddingTable(std::string language, SpaceTag space, std::size_t dim)
    : language_(std::move(language)), space_(space), dim_(dim), vectors_(0, dim) {
  if (dim == 0) throw ValueError("embedding dimension must be positive");
}

EmbeddingTable::EmbeddingTable(std::string language, SpaceTag space,
                               std::vector<std::string> words, Matrix vectors)
    : language_(std::move(language)),
      space_(space),
      dim_(static_cast<std::size_t>(vectors.cols())),
      words_(std::move(words)),
      vectors_(std::move(vectors)) {
  if (dim_ == 0) throw ValueError("embedding dimension must be positive");
  if (static_cast<std::size_t>(vectors_.rows()) != words_.size()) {
    throw ValueError("word count " + std::to_string(words_.size()) + " != vector rows " +
                     std::to_string(vectors_.rows()));
  }
  if (!vectors_.allFinite()) throw ValueError("embedding table contains non-finite values");
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    const auto& w = words_[i];
    if (w.empty() || std::any_of(w.begin(), w.end(), is_space)) {
      throw ValueError("invalid word '" + w + "' (empty or contains whitespace)");
    }
    if (!index_.emplace(w, i).second) throw ValueError("duplicate word '" + w + "'");
  }
}

std::optional<std::size_t> EmbeddingTable::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EmbeddingTable EmbeddingTable::with_vectors(Matrix vectors, SpaceTag space) const {
  return EmbeddingTable(language_, space, words_, std::move(vectors));
}

EmbeddingTable parse_vec(std::string_view text, std::string language, SpaceTag space,
                         std::optional<std::size_t> limit, std::size_t* duplicates) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    return true;
  };

  std::string_view line;
  if (!next_line(line)) throw FormatError("empty .vec input (missing '<count> <dim>' header)");
  auto header = split_ws(line);
  std::size_t count = 0, dim = 0;
  auto parse_size = [](std::string_view tok, std::size_t& out) {
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
  };
  if (header.size() != 2 || !parse_size(header[0], count) || !parse_size(header[1], dim) ||
      dim == 0) {
    throw FormatError("malformed .vec header '" + std::string(line) +
                      "' (expected '<count> <dim>')");
  }

  const std::size_t wanted = limit ? std::min(count, *limit) : count;
  std::vector<std::string> words;
  std::vector<double> values;
  words.reserve(wanted);
  values.reserve(wanted * dim);
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t dups = 0;
  std::size_t rows_read = 0;

  while (words.size() < wanted && rows_read < count) {
    if (!next_line(line)) {
      throw RowError(line_no + 1, "file ended after " + std::to_string(rows_read) + " of " +
                                      std::to_string(count) + " rows");
    }
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto toks = split_ws(line);
    if (toks.size() != dim + 1) {
      throw RowError(line_no, "expected word plus " + std::to_string(dim) + " values, found " +
                                  std::to_string(toks.size()) + " tokens");
    }
    ++rows_read;
    std::string word(toks[0]);
    if (seen.contains(word)) {
      ++dups;
      continue;
    }
    const std::size_t base = values.size();
    values.resize(base + dim);
    for (std::size_t j = 0; j < dim; ++j) {
      double v;
      if (!parse_number(toks[j + 1], v)) {
        throw RowError(line_no, "cannot parse value '" + std::string(toks[j + 1]) + "'");
      }
      if (!std::isfinite(v)) {
        throw ValueError("line " + std::to_string(line_no) + ": non-finite value for word '" +
                         word + "'");
      }
      values[base + j] = v;
    }
    seen.emplace(word, words.size());
    words.push_back(std::move(word));
  }

  Matrix m(static_cast<Eigen::Index>(words.size()), static_cast<Eigen::Index>(dim));
  std::copy(values.begin(), values.end(), m.data());
  if (duplicates) *duplicates = dups;
  if (words.empty()) return EmbeddingTable(std::move(language), space, dim);
  return EmbeddingTable(std::move(language), space, std::move(words), std::move(m));
}

VecLoadResult load_vec(const std::filesystem::path& path, std::string language, SpaceTag space,
                       std::optional<std::size_t> limit) {
  if (!std::filesystem::exists(path)) throw IoError("embedding file not found: " + path.string());
  const std::string text = read_file(path);
  std::size_t dups = 0;
  try {
    auto table = parse_vec(text, std::move(language), space, limit, &dups);
    return {std::move(table), dups};
  } catch (const RowError& e) {
    throw RowError(e.line, path.string() + ": " + e.what());
  }
}

std::string format_vec(const EmbeddingTable& table) {
  std::string out = std::to_string(table.size()) + " " + std::to_string(table.dim()) + "\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    out += table.word(i);
    for (std::size_t j = 0; j < table.dim(); ++j) {
      out += ' ';
      out += format_double(table.vectors()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    out += '\n';
  }
  return out;
}

void save_vec(const EmbeddingTable& table, const std::filesystem::path& path) {
  write_file(path, format_vec(table));
}

EmbeddingTable normalize(const EmbeddingTable& table) {
  Matrix m = table.vectors();
  std::vector<std::size_t> zeros;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (n == 0.0) {
      zeros.push_back(static_cast<std::size_t>(i));
    } else if (n != 1.0) {
      m.row(i) /= n;
    }
  }
  if (table.empty()) return table;
  EmbeddingTable out = table.with_vectors(std::move(m), table.space());
  out.zero_rows_ = std::move(zeros);
  return out;
}

EmbeddingTable center(const EmbeddingTable& table) {
  if (table.empty()) return table;
  Matrix m = table.vectors();
  const Eigen::RowVectorXd mean = m.colwise().mean();
  m.rowwise() -= mean;
  return table.with_vectors(std::move(m), table.space());
}

Matrix unit_rows(const Matrix& m) {
  Matrix out = m;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

std::vector<Neighbor> nearest_neighbors(const EmbeddingTable& table, const Vector& query,
                                        std::size_t k, SimilarityMetric metric,
                                        const Matrix* source_context) {
  if (table.empty()) throw ValueError("nearest_neighbors on an empty table");
  if (static_cast<std::size_t>(query.size()) != table.dim()) {
    throw ValueError("query dimension " + std::to_string(query.size()) + " != table dimension " +
                     std::to_string(table.dim()));
  }
  if (!query.allFinite()) throw ValueError("query vector is not finite");
  if (k > table.size()) {
    throw ValueError("k=" + std::to_string(k) + " exceeds vocabulary size " +
                     std::to_string(table.size()));
  }

  const Matrix targets = unit_rows(table.vectors());
  const double qn = query.norm();
  Vector q = qn > 0 ? Vector(query / qn) : query;
  Vector scores = targets * q;

  if (metric.kind == SimilarityMetric::Kind::csls) {
    if (metric.csls_k < 1) throw ValueError("csls_k must be >= 1");
    Matrix sources;
    if (source_context && source_context->rows() > 0) {
      sources = unit_rows(*source_context);
    } else {
      sources = q.transpose();
    }
    const std::size_t ks = std::min<std::size_t>(metric.csls_k, static_cast<std::size_t>(sources.rows()));
    const std::size_t kt = std::min<std::size_t>(metric.csls_k, table.size());
    // Mean similarity of each candidate to its ks nearest source points.
    Matrix cross = targets * sources.transpose();
    Vector r_src(cross.rows());
    for (Eigen::Index i = 0; i < cross.rows(); ++i) {
      std::vector<double> row(cross.row(i).data(), cross.row(i).data() + cross.cols());
      std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(ks), row.end(),
                        std::greater<>());
      r_src(i) = std::accumulate(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(ks), 0.0) / ks;
    }
    std::vector<double> qrow(scores.data(), scores.data() + scores.size());
    std::partial_sort(qrow.begin(), qrow.begin() + static_cast<std::ptrdiff_t>(kt), qrow.end(),
                      std::greater<>());
    const double r_query = std::accumulate(qrow.begin(), qrow.begin() + static_cast<std::ptrdiff_t>(kt), 0.0) / kt;
    scores = (2.0 * scores).array() - r_query - r_src.array();
  }

  std::vector<std::size_t> order(table.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores(a) != scores(b)) return scores(a) > scores(b);
                      return a < b;
                    });
  std::vector<Neighbor> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.push_back({order[i], table.word(order[i]), scores(order[i])});
  }
  return out;
}

double mean_cosine(const Matrix& mapped_source, const Matrix& target,
                   std::span<const IndexPair> pairs) {
  if (pairs.empty()) throw ValueError("mean_cosine needs at least one pair");
  if (mapped_source.cols() != target.cols()) throw ValueError("mean_cosine dimension mismatch");
  double sum = 0.0;
  for (auto [s, t] : pairs) {
    if (s >= static_cast<std::size_t>(mapped_source.rows()) ||
        t >= static_cast<std::size_t>(target.rows())) {
      throw ValueError("mean_cosine pair index out of range");
    }
    const auto a = mapped_source.row(static_cast<Eigen::Index>(s));
    const auto b = target.row(static_cast<Eigen::Index>(t));
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) {
      throw ValueError("zero-norm vector in pair (" + std::to_string(s) + ", " +
                       std::to_string(t) + ")");
    }
    sum += a.dot(b) / (na * nb);
  }
  return sum / static_cast<double>(pairs.size());
}

}  // namespace traitalign
