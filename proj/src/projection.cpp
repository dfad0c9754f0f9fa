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

#include "traitalign/projection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace traitalign {

namespace {

// Row i of P: Gaussian conditional probabilities with the precision chosen
// so that the entropy equals ln(perplexity).
void conditional_row(const Matrix& sq_dist, Eigen::Index i, double perplexity, Matrix& p) {
  const Eigen::Index n = sq_dist.rows();
  const double target = std::log(perplexity);
  double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 200; ++iter) {
    double sum = 0.0, weighted = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double v = std::exp(-beta * sq_dist(i, j));
      p(i, j) = v;
      sum += v;
      weighted += v * sq_dist(i, j);
    }
    if (sum <= 0.0) sum = 1e-300;
    const double entropy = std::log(sum) + beta * weighted / sum;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) p(i, j) /= sum;
    }
    const double diff = entropy - target;
    if (std::abs(diff) < 1e-5) break;
    if (diff > 0.0) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
    } else {
      hi = beta;
      beta = 0.5 * (beta + lo);
    }
  }
  p(i, i) = 0.0;
}

// RFC 4180 quoting for fields holding commas, quotes or newlines.
std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

Matrix squared_distances(const Matrix& x) {
  const Vector norms = x.rowwise().squaredNorm();
  Matrix d = (-2.0 * x * x.transpose()).colwise() + norms;
  d.rowwise() += norms.transpose();
  return d.cwiseMax(0.0);
}

}  // namespace

Matrix pca_2d(const Matrix& points) {
  if (points.rows() < 2) throw ValueError("pca needs at least two points");
  if (points.cols() < 2) throw ValueError("pca needs at least two dimensions");
  const Matrix centred = points.rowwise() - points.colwise().mean();
  const Eigen::MatrixXd cov =
      (centred.transpose() * centred) / static_cast<double>(points.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::Index d = points.cols();
  Eigen::MatrixXd basis(d, 2);
  // Eigenvalues come in ascending order.
  basis.col(0) = eig.eigenvectors().col(d - 1);
  basis.col(1) = eig.eigenvectors().col(d - 2);
  for (Eigen::Index c = 0; c < 2; ++c) {
    Eigen::Index arg = 0;
    basis.col(c).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, c) < 0.0) basis.col(c) *= -1.0;
  }
  return centred * basis;
}

TsneResult tsne_2d(const Matrix& points, const TsneConfig& config) {
  const Eigen::Index n = points.rows();
  if (n < 4) throw ValueError("t-SNE needs at least four points");
  if (!(config.perplexity > 0.0)) throw ConfigError("perplexity must be positive");
  TsneResult result;
  result.perplexity_used = std::min(config.perplexity, static_cast<double>(n - 1) / 3.0);

  const Matrix dist = squared_distances(points);
  Matrix cond = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) conditional_row(dist, i, result.perplexity_used, cond);
  Matrix p = (cond + cond.transpose()) / (2.0 * static_cast<double>(n));
  p = p.cwiseMax(1e-12);
  p.diagonal().setZero();

  Rng rng(config.seed);
  Matrix y(n, 2);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = 1e-4 * rng.normal();
  Matrix velocity = Matrix::Zero(n, 2);
  Matrix gains = Matrix::Ones(n, 2);
  Matrix num(n, n), grad(n, 2);

  for (std::size_t it = 0; it < config.iterations; ++it) {
    const bool early = it < config.exaggeration_iterations;
    const double exaggeration = early ? config.early_exaggeration : 1.0;
    const double momentum = it < 250 ? 0.5 : 0.8;
    num = (1.0 + squared_distances(y).array()).inverse().matrix();
    num.diagonal().setZero();
    const double z = num.sum();
    // dC/dy_i = 4 sum_j (ex * p_ij - q_ij) (y_i - y_j) / (1 + |y_i - y_j|^2)
    const Matrix w = (exaggeration * p - num / z).cwiseProduct(num);
    grad = 4.0 * (w.rowwise().sum().asDiagonal() * y - w * y);
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
      double& g = gains.data()[i];
      const bool same_sign = (grad.data()[i] > 0.0) == (velocity.data()[i] > 0.0);
      g = same_sign ? g * 0.8 : g + 0.2;
      g = std::max(g, 0.01);
      velocity.data()[i] = momentum * velocity.data()[i] - config.learning_rate * g * grad.data()[i];
    }
    y += velocity;
    y.rowwise() -= y.colwise().mean();
    if (it + 1 == config.iterations) {
      double kl = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          if (i == j) continue;
          const double q = std::max(num(i, j) / z, 1e-12);
          kl += p(i, j) * std::log(p(i, j) / q);
        }
      }
      result.kl_divergence = kl;
    }
  }
  result.coords = std::move(y);
  return result;
}

double centroid_separation(const Matrix& points, const std::vector<std::string>& groups) {
  if (static_cast<std::size_t>(points.rows()) != groups.size()) {
    throw ValueError("centroid_separation: one group label per point");
  }
  std::map<std::string, std::vector<Eigen::Index>> members;
  for (std::size_t i = 0; i < groups.size(); ++i) members[groups[i]].push_back(static_cast<Eigen::Index>(i));
  if (members.size() < 2) throw ValueError("centroid_separation needs at least two groups");
  std::vector<Vector> centroids;
  double spread = 0.0;
  for (const auto& [g, rows] : members) {
    Vector c = Vector::Zero(points.cols());
    for (auto r : rows) c += points.row(r).transpose();
    c /= static_cast<double>(rows.size());
    double s = 0.0;
    for (auto r : rows) s += (points.row(r).transpose() - c).norm();
    spread += s / static_cast<double>(rows.size());
    centroids.push_back(std::move(c));
  }
  spread /= static_cast<double>(centroids.size());
  double inter = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < centroids.size(); ++a) {
    for (std::size_t b = a + 1; b < centroids.size(); ++b, ++pairs) {
      inter += (centroids[a] - centroids[b]).norm();
    }
  }
  inter /= static_cast<double>(pairs);
  if (spread == 0.0) throw ValueError("centroid_separation: every group is a single point");
  return inter / spread;
}

std::string projection_csv(const std::vector<ProjectionRow>& rows, const Matrix& coords) {
  if (static_cast<std::size_t>(coords.rows()) != rows.size() || coords.cols() != 2) {
    throw ValueError("projection_csv: need one 2-D coordinate per row");
  }
  std::ostringstream out;
  out << "word,language,x,y\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out << csv_field(rows[i].word) << ',' << csv_field(rows[i].language) << ',' << format_double(coords(r, 0)) << ','
        << format_double(coords(r, 1)) << '\n';
  }
  return out.str();
}

}  // namespace traitalign
