// Copyright 2026 The qtwin Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

// Subcommands of the qtwin command-line tool.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace qtwin::cli {

struct OutputFile {
    std::string name;  // relative to the output directory
    std::string contents;
};

enum class Format { json, csv };

/// Command-line values that override config keys.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<long> trials;
    std::optional<int> resolution;
    bool convergence = false;
    Format format = Format::json;
};

/// Deferred computation; preparing it parses the config and loads inputs.
using Job = std::function<std::vector<OutputFile>()>;

using Command = Job (*)(Config &, const Overrides &);

struct CommandInfo {
    const char *name;
    const char *description;
    Command prepare;
};

const std::vector<CommandInfo> &commands();

}  // namespace qtwin::cli
