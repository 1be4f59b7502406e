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

// Small text-format helpers shared by the file readers and the CLI.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qtwin {

/// Comma-separated rows with surrounding whitespace trimmed. Blank lines and
/// lines starting with '#' are skipped.
std::vector<std::vector<std::string>> read_csv_rows(std::istream &in);

/// CSV with a header row; columns addressed by name.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    static CsvTable parse(std::istream &in);
    static CsvTable load(const std::filesystem::path &path);

    std::optional<std::size_t> find_column(std::string_view name) const;
    /// Like find_column but throws InputError when absent.
    std::size_t require_column(std::string_view name) const;
    std::vector<double> numeric_column(std::string_view name) const;
};

double parse_double(std::string_view text, std::string_view what);

/// Shortest round-trip representation of a double.
std::string format_double(double value);

std::string read_text_file(const std::filesystem::path &path);

/// Write through a temporary sibling file and rename into place, so readers
/// never observe a partially written output.
void write_file_atomic(const std::filesystem::path &path, std::string_view contents);

}  // namespace qtwin
