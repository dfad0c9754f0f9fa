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

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace traitalign {

// Row-major so that one embedding is one contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Big Five trait identifiers, in their canonical report order.
enum class Trait { Extr = 0, Agr = 1, Cons = 2, Emot = 3, Openn = 4 };

inline constexpr std::size_t kNumTraits = 5;
inline constexpr std::array<Trait, kNumTraits> kTraits = {
    Trait::Extr, Trait::Agr, Trait::Cons, Trait::Emot, Trait::Openn};

std::string_view trait_name(Trait trait);
Trait parse_trait(std::string_view name);
inline std::size_t trait_index(Trait trait) { return static_cast<std::size_t>(trait); }

template <typename T>
using PerTrait = std::array<T, kNumTraits>;

// All library failures derive from Error. kind() is a stable machine-readable
// tag used by the CLI when it reports errors as JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

struct FormatError : Error {
  explicit FormatError(const std::string& m) : Error("format_error", m) {}
};
struct RowError : Error {
  RowError(std::size_t line, const std::string& m)
      : Error("row_error", "line " + std::to_string(line) + ": " + m), line(line) {}
  std::size_t line;
};
struct ValueError : Error {
  explicit ValueError(const std::string& m) : Error("value_error", m) {}
};
struct SchemaError : Error {
  explicit SchemaError(const std::string& m) : Error("schema_error", m) {}
};
struct SpecError : Error {
  explicit SpecError(const std::string& m) : Error("spec_error", m) {}
};
struct IoError : Error {
  explicit IoError(const std::string& m) : Error("io_error", m) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error("config_error", m) {}
};
struct TrainingError : Error {
  explicit TrainingError(const std::string& m) : Error("training_error", m) {}
};
struct MissingArtifactError : Error {
  explicit MissingArtifactError(const std::string& m) : Error("missing_artifact", m) {}
};
struct StaleInputError : Error {
  explicit StaleInputError(const std::string& m) : Error("stale_input", m) {}
};

// Seeded generator plus distribution helpers whose output depends only on the
// engine, not on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  double normal();
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Haar-distributed random orthogonal matrix.
Matrix random_orthogonal(std::size_t dim, Rng& rng);

// ||M^T M - I||_F
double orthogonality_error(const Matrix& m);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Hex SHA-256 of a byte string / file.
std::string sha256_hex(std::string_view bytes);
std::string file_digest(const std::filesystem::path& path);

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);

}  // namespace traitalign
