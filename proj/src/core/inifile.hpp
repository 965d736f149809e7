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

#include <optional>
#include <string>
#include <vector>

namespace momics {

// The structured key/value text format shared by run configs and dataset
// manifests: "[section]" headers, "key = value" lines, '#' comments. Section
// order and key order are preserved; duplicate section names are allowed
// (dataset manifests use one "patient <id>" section per patient).
struct IniSection {
  std::string name;
  std::vector<std::pair<std::string, std::string>> entries;

  const std::string* find(const std::string& key) const;
  std::string get(const std::string& key) const;  // throws Config if absent
  std::string get_or(const std::string& key, const std::string& dflt) const;
  void set(const std::string& key, const std::string& value);  // adds or replaces
};

struct IniFile {
  std::vector<IniSection> sections;

  IniSection* find(const std::string& name);
  const IniSection* find(const std::string& name) const;
  IniSection& get_or_add(const std::string& name);

  std::string serialize() const;
  void save(const std::string& path) const;

  static IniFile parse(const std::string& text, const std::string& origin);
  static IniFile load(const std::string& path);
};

}  // namespace momics
