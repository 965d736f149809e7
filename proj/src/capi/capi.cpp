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

#include "momics.h"

#include <cstring>
#include <exception>
#include <iostream>
#include <new>
#include <string>

#include "core/config.hpp"
#include "core/runner.hpp"

namespace {

thread_local std::string g_last_error;

momics_status set_error(momics_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

momics_status from_kind(momics::ErrorKind kind) {
  switch (kind) {
    case momics::ErrorKind::Config:
      return MOMICS_ERR_CONFIG;
    case momics::ErrorKind::Data:
      return MOMICS_ERR_DATA;
    case momics::ErrorKind::Numeric:
      return MOMICS_ERR_NUMERIC;
    case momics::ErrorKind::Internal:
      return MOMICS_ERR_INTERNAL;
  }
  return MOMICS_ERR_INTERNAL;
}

template <typename Fn>
momics_status guarded(Fn&& fn) {
  try {
    fn();
  } catch (const momics::Error& e) {
    return set_error(from_kind(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(MOMICS_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(MOMICS_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(MOMICS_ERR_INTERNAL, "unknown error");
  }
  g_last_error.clear();
  return MOMICS_OK;
}

momics_status require(bool ok, const char* what) {
  return ok ? MOMICS_OK : set_error(MOMICS_ERR_CONFIG, what);
}

momics::runner::RunOptions to_options(const momics_run_options* opts) {
  momics::runner::RunOptions r;
  if (opts != nullptr) {
    r.force = opts->force != 0;
    r.dry_run = opts->dry_run != 0;
    r.echo = opts->echo != 0 ? &std::cout : nullptr;
  }
  return r;
}

}  // namespace

struct momics_config {
  momics::config::RunConfig cfg;
};

extern "C" {

const char* momics_version(void) { return "1.0.0"; }

const char* momics_last_error(void) { return g_last_error.c_str(); }

momics_status momics_config_create(momics_config** out) {
  if (momics_status s = require(out != nullptr, "out pointer is NULL"); s)
    return s;
  return guarded([&] { *out = new momics_config(); });
}

momics_status momics_config_load(const char* path, momics_config** out) {
  if (momics_status s = require(path != nullptr, "path is NULL"); s) return s;
  if (momics_status s = require(out != nullptr, "out pointer is NULL"); s)
    return s;
  return guarded([&] {
    auto cfg = momics::config::RunConfig::load_file(path);
    *out = new momics_config{std::move(cfg)};
  });
}

momics_status momics_config_set(momics_config* cfg, const char* section,
                                const char* key, const char* value) {
  if (momics_status s =
          require(cfg != nullptr && section != nullptr && key != nullptr &&
                      value != nullptr,
                  "config, section, key, and value must be non-NULL");
      s)
    return s;
  return guarded([&] {
    momics::IniFile ini = cfg->cfg.to_ini();
    ini.get_or_add(section).set(key, value);
    cfg->cfg = momics::config::RunConfig::from_ini(ini, "api");
  });
}

momics_status momics_config_get(const momics_config* cfg, const char* section,
                                const char* key, char* buf, size_t cap) {
  if (momics_status s =
          require(cfg != nullptr && section != nullptr && key != nullptr &&
                      buf != nullptr,
                  "config, section, key, and buffer must be non-NULL");
      s)
    return s;
  return guarded([&] {
    const momics::IniFile ini = cfg->cfg.to_ini();
    const momics::IniSection* sec = ini.find(section);
    if (sec == nullptr) {
      momics::throw_config("unknown section: [" + std::string(section) + "]");
    }
    const std::string* value = sec->find(key);
    if (value == nullptr) {
      momics::throw_config("unknown key: " + std::string(section) + "." +
                           std::string(key));
    }
    if (value->size() + 1 > cap) {
      momics::throw_config("buffer of " + std::to_string(cap) +
                           " bytes is too small for value of " +
                           std::to_string(value->size()) + " characters");
    }
    std::memcpy(buf, value->c_str(), value->size() + 1);
  });
}

void momics_config_free(momics_config* cfg) { delete cfg; }

#define MOMICS_DEFINE_RUN(fn, impl)                                       \
  momics_status fn(const momics_config* cfg,                             \
                   const momics_run_options* opts) {                     \
    if (momics_status s = require(cfg != nullptr, "config is NULL"); s)  \
      return s;                                                          \
    return guarded([&] { momics::runner::impl(cfg->cfg, to_options(opts)); }); \
  }

MOMICS_DEFINE_RUN(momics_run_synth, cmd_synth)
MOMICS_DEFINE_RUN(momics_run_pretrain, cmd_pretrain)
MOMICS_DEFINE_RUN(momics_run_finetune_subtype, cmd_finetune_subtype)
MOMICS_DEFINE_RUN(momics_run_finetune_survival, cmd_finetune_survival)
MOMICS_DEFINE_RUN(momics_run_generate, cmd_generate)
MOMICS_DEFINE_RUN(momics_run_evaluate, cmd_evaluate)

#undef MOMICS_DEFINE_RUN

}  // extern "C"
