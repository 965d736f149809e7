/*
 * Copyright 2026 the momics authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace momics {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Error taxonomy shared by the C API and the CLI exit codes:
// 1 internal, 2 config, 3 data validation, 4 numeric failure.
enum class ErrorKind : int {
  Internal = 1,
  Config = 2,
  Data = 3,
  Numeric = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void throw_config(const std::string& msg);
[[noreturn]] void throw_data(const std::string& msg);
[[noreturn]] void throw_numeric(const std::string& msg);
[[noreturn]] void throw_internal(const std::string& msg);

// FNV-1a, used for checkpoint entry checksums and RNG stream derivation.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64(std::string_view s);

bool all_finite(const Mat& m);

// The three omics modalities. Histopathology is handled separately: it is
// always present and never masked.
enum class Omics : int { Rna = 0, Dnam = 1, Cnv = 2 };
inline constexpr int kNumOmics = 3;
inline constexpr Omics kAllOmics[kNumOmics] = {Omics::Rna, Omics::Dnam,
                                               Omics::Cnv};

std::string omics_name(Omics o);
Omics omics_from_name(std::string_view name);  // throws Config on unknown

std::string lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

// Locale-independent numeric formatting/parsing for text formats.
std::string format_double(double v);
double parse_double(std::string_view s, const std::string& what);
long parse_long(std::string_view s, const std::string& what);
std::uint64_t parse_u64(std::string_view s, const std::string& what);
bool parse_bool(std::string_view s, const std::string& what);

// Median of the given values (averaged middle pair for even counts);
// throws Data when empty. The input is copied, not reordered.
double median_of(std::vector<double> values);

}  // namespace momics
