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

#include "core/common.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstring>

namespace momics {

void throw_config(const std::string& msg) { throw Error(ErrorKind::Config, msg); }
void throw_data(const std::string& msg) { throw Error(ErrorKind::Data, msg); }
void throw_numeric(const std::string& msg) { throw Error(ErrorKind::Numeric, msg); }
void throw_internal(const std::string& msg) { throw Error(ErrorKind::Internal, msg); }

std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

bool all_finite(const Mat& m) { return m.allFinite(); }

std::string omics_name(Omics o) {
  switch (o) {
    case Omics::Rna: return "rna";
    case Omics::Dnam: return "dnam";
    case Omics::Cnv: return "cnv";
  }
  return "?";
}

Omics omics_from_name(std::string_view name) {
  std::string n = lower(name);
  if (n == "rna") return Omics::Rna;
  if (n == "dnam") return Omics::Dnam;
  if (n == "cnv") return Omics::Cnv;
  throw_config("unknown omics modality '" + std::string(name) +
               "' (expected rna, dnam or cnv)");
}

std::string lower(std::string_view s) {
  std::string r(s);
  std::transform(r.begin(), r.end(), r.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return r;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::string format_double(double v) {
  // Shortest round-trip representation.
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0;
  std::sscanf(buf, "%lf", &back);
  if (back == v) {
    for (int prec = 1; prec < 17; ++prec) {
      char shorter[64];
      std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
      double b2 = 0;
      std::sscanf(shorter, "%lf", &b2);
      if (b2 == v) return shorter;
    }
  }
  return buf;
}

double parse_double(std::string_view s, const std::string& what) {
  std::string t = trim(s);
  if (t.empty()) throw_config(what + ": empty numeric value");
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size())
    throw_config(what + ": cannot parse '" + t + "' as a number");
  return v;
}

long parse_long(std::string_view s, const std::string& what) {
  std::string t = trim(s);
  long v = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size())
    throw_config(what + ": cannot parse '" + t + "' as an integer");
  return v;
}

std::uint64_t parse_u64(std::string_view s, const std::string& what) {
  std::string t = trim(s);
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size())
    throw_config(what + ": cannot parse '" + t + "' as an unsigned integer");
  return v;
}

bool parse_bool(std::string_view s, const std::string& what) {
  std::string t = lower(trim(s));
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw_config(what + ": cannot parse '" + t + "' as a boolean");
}

double median_of(std::vector<double> values) {
  if (values.empty()) throw_data("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace momics
