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

// Characterization summary: fitted quantities per device, in value(uncertainty)
// notation, next to optional design expectations.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qtwin/experiments.hpp"

namespace qtwin {

/// Value with its uncertainty in the last shown digits, e.g. 5.7660(5).
/// Two uncertainty digits when their leading pair is 10..34, one otherwise.
/// A zero or non-finite uncertainty prints the value alone.
std::string format_with_uncertainty(double value, double sigma);

struct SummaryRow {
    std::string key;    // e.g. "f_q"
    std::string label;  // e.g. "f_q [GHz]"
    double unit;        // SI value of one display unit
};

/// f_q, alpha, g, chi, f_r, Q_i, Q_c, T1, T2*, T2 in that order.
const std::vector<SummaryRow> &summary_rows();

struct SummaryColumn {
    std::string name;
    std::map<std::string, Measurement> entries;  // SI units, keyed by row key
    /// Design values; printed without uncertainty.
    bool expected = false;

    /// Take the derived quantities of a fit record that map onto summary
    /// rows. Chevron f01 only fills f_q when no two-tone value is present.
    void add_record(const nlohmann::json &record);
    void set(const std::string &key, Measurement m);
};

/// Fixed-width text table.
std::string render_summary_text(const std::vector<SummaryColumn> &columns);
/// Long-format CSV: row,column,value,uncertainty in SI units.
std::string render_summary_csv(const std::vector<SummaryColumn> &columns);

}  // namespace qtwin
