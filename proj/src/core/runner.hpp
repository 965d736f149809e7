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

#include <iosfwd>

#include "core/config.hpp"

namespace momics::runner {

struct RunOptions {
  bool force = false;
  bool dry_run = false;
  std::ostream* echo = nullptr;  // mirrors log records (the CLI passes stdout)
};

// One function per subcommand. Each validates its config slice, writes the
// resolved effective config plus a line-oriented log into the output
// directory, and produces the command's artifacts there. Dry runs validate
// and print the execution plan without touching the output directory.

void cmd_synth(config::RunConfig cfg, const RunOptions& opt);
void cmd_pretrain(config::RunConfig cfg, const RunOptions& opt);
void cmd_finetune_subtype(config::RunConfig cfg, const RunOptions& opt);
void cmd_finetune_survival(config::RunConfig cfg, const RunOptions& opt);
void cmd_generate(config::RunConfig cfg, const RunOptions& opt);
void cmd_evaluate(config::RunConfig cfg, const RunOptions& opt);

}  // namespace momics::runner
