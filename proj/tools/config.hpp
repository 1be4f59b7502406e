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

// JSON run configuration with strict key checking and a resolved echo.

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace qtwin::cli {

/// Malformed configuration: unknown keys, wrong types, missing values.
class ConfigError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// A view of one JSON object. Every key read is recorded together with the
/// value actually used (defaults included); finish() rejects the rest.
/// Numbers may also be given as the strings "inf" and "-inf".
class Config {
   public:
    Config(nlohmann::json doc, std::filesystem::path base_dir);
    Config(const Config &) = delete;
    Config &operator=(const Config &) = delete;

    bool has(const std::string &key) const;

    double number(const std::string &key, double fallback);
    double number(const std::string &key);
    std::optional<double> optional_number(const std::string &key);
    long integer(const std::string &key, long fallback);
    bool boolean(const std::string &key, bool fallback);
    std::string string(const std::string &key, const std::string &fallback);
    std::string string(const std::string &key);
    std::vector<double> numbers(const std::string &key, const std::vector<double> &fallback);
    std::vector<std::string> strings(const std::string &key);
    /// Mark a key as consumed with a value decided elsewhere (command-line
    /// overrides).
    void set_resolved(const std::string &key, nlohmann::json value);
    /// Input path, resolved against the config file's directory.
    std::filesystem::path path(const std::string &key);

    /// Nested object; an absent key yields an empty object.
    Config &child(const std::string &key);
    /// Array of objects.
    std::vector<Config *> children(const std::string &key);

    /// Throws ConfigError naming the first unread key, searching children.
    void finish() const;
    const nlohmann::json &resolved() const { return *resolved_; }
    const std::filesystem::path &base_dir() const { return base_; }

   private:
    Config(const nlohmann::json *doc, nlohmann::json *resolved, std::string prefix, std::filesystem::path base);
    const nlohmann::json *lookup(const std::string &key);
    [[noreturn]] void type_error(const std::string &key, const char *what) const;

    std::shared_ptr<nlohmann::json> owned_doc_;
    std::shared_ptr<nlohmann::json> owned_resolved_;
    const nlohmann::json *doc_;
    nlohmann::json *resolved_;
    std::string prefix_;
    std::filesystem::path base_;
    std::vector<std::string> used_;
    std::vector<std::unique_ptr<Config>> children_;
};

/// Parse a config file; an empty path gives an empty configuration.
nlohmann::json load_config_file(const std::filesystem::path &path);

}  // namespace qtwin::cli
