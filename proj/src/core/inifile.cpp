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

#include "core/inifile.hpp"

#include <fstream>
#include <sstream>

#include "core/common.hpp"

namespace momics {

const std::string* IniSection::find(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return &v;
  return nullptr;
}

std::string IniSection::get(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) throw_config("missing key '" + key + "' in section [" + name + "]");
  return *v;
}

std::string IniSection::get_or(const std::string& key,
                               const std::string& dflt) const {
  const std::string* v = find(key);
  return v ? *v : dflt;
}

void IniSection::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries.emplace_back(key, value);
}

IniSection* IniFile::find(const std::string& name) {
  for (auto& s : sections)
    if (s.name == name) return &s;
  return nullptr;
}

const IniSection* IniFile::find(const std::string& name) const {
  for (const auto& s : sections)
    if (s.name == name) return &s;
  return nullptr;
}

IniSection& IniFile::get_or_add(const std::string& name) {
  if (IniSection* s = find(name)) return *s;
  sections.push_back(IniSection{name, {}});
  return sections.back();
}

std::string IniFile::serialize() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& s : sections) {
    if (!first) out << "\n";
    first = false;
    out << "[" << s.name << "]\n";
    for (const auto& [k, v] : s.entries) out << k << " = " << v << "\n";
  }
  return out.str();
}

void IniFile::save(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw_data("cannot write file '" + path + "'");
  f << serialize();
  if (!f.good()) throw_data("write failed for '" + path + "'");
}

IniFile IniFile::parse(const std::string& text, const std::string& origin) {
  IniFile ini;
  IniSection* current = nullptr;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw_config(origin + ":" + std::to_string(lineno) +
                     ": malformed section header '" + line + "'");
      ini.sections.push_back(IniSection{trim(line.substr(1, line.size() - 2)), {}});
      current = &ini.sections.back();
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw_config(origin + ":" + std::to_string(lineno) +
                   ": expected 'key = value', got '" + line + "'");
    if (!current) {
      ini.sections.push_back(IniSection{"", {}});
      current = &ini.sections.back();
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw_config(origin + ":" + std::to_string(lineno) + ": empty key");
    if (current->find(key))
      throw_config(origin + ":" + std::to_string(lineno) + ": duplicate key '" +
                   key + "' in section [" + current->name + "]");
    current->entries.emplace_back(key, value);
  }
  return ini;
}

IniFile IniFile::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw_data("cannot open file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path);
}

}  // namespace momics
