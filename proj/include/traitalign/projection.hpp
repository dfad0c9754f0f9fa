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

// 2-D projections of word vectors (PCA, exact t-SNE) and a language
// separation score.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "traitalign/common.hpp"

namespace traitalign {

// Coordinates on the top two principal components of the centred rows.
// Each component's largest-magnitude loading is made positive.
Matrix pca_2d(const Matrix& points);

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  std::uint64_t seed = 1;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
};

struct TsneResult {
  Matrix coords;                 // n x 2
  double kl_divergence = 0.0;    // at the last iteration
  double perplexity_used = 0.0;  // lowered to (n - 1) / 3 for small inputs
};

// Exact O(n^2) t-SNE with momentum and per-coordinate gains.
TsneResult tsne_2d(const Matrix& points, const TsneConfig& config);

// Mean distance between group centroids divided by the mean distance of
// points to their own group centroid. Needs at least two groups.
double centroid_separation(const Matrix& points, const std::vector<std::string>& groups);

struct ProjectionRow {
  std::string word;
  std::string language;
};

// CSV with header "word,language,x,y".
std::string projection_csv(const std::vector<ProjectionRow>& rows, const Matrix& coords);

}  // namespace traitalign
