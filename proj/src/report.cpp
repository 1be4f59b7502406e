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


#include "qtwin/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "qtwin/error.hpp"
#include "qtwin/io.hpp"

namespace qtwin {

namespace {

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", std::max(decimals, 0), v);
    std::string s = buf;
    if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

std::string plain(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

struct RecordMapping {
    const char *kind;
    const char *name;
    const char *key;
};

constexpr RecordMapping kMappings[] = {
    {"two_tone", "f01", "f_q"},      {"two_tone", "alpha", "alpha"}, {"flux_map", "g", "g"},
    {"dispersive_shift", "chi", "chi"}, {"notch", "f_r", "f_r"},     {"notch", "q_i", "q_i"},
    {"notch", "q_c", "q_c"},         {"t1", "t1", "t1"},             {"ramsey", "t2_star", "t2_star"},
    {"echo", "t2", "t2"},
};

double as_number(const nlohmann::json &j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    throw InputError("fit record: expected a number");
}

}  // namespace

std::string format_with_uncertainty(double value, double sigma) {
    if (!std::isfinite(value)) return plain(value);
    if (!(sigma > 0.0) || !std::isfinite(sigma)) return plain(value);
    const int e = static_cast<int>(std::floor(std::log10(sigma)));
    // Leading two digits of sigma, 10..99.
    const double lead = sigma / std::pow(10.0, e - 1);
    int q = lead < 35.0 ? e - 1 : e;
    long digits = std::lround(sigma / std::pow(10.0, q));
    if (q == e && digits >= 10) {
        // 95..99 rounds up to a two-digit "10".
        digits = 10;
    } else if (q == e - 1 && digits >= 35) {
        q = e;
        digits = std::lround(sigma / std::pow(10.0, q));
    }
    const double step = std::pow(10.0, q);
    const double rounded = std::round(value / step) * step;
    if (q < 0) return fixed(rounded, -q) + "(" + std::to_string(digits) + ")";
    return fixed(rounded, 0) + "(" + fixed(static_cast<double>(digits) * step, 0) + ")";
}

const std::vector<SummaryRow> &summary_rows() {
    static const std::vector<SummaryRow> rows = {
        {"f_q", "f_q [GHz]", 1e9},   {"alpha", "alpha [MHz]", 1e6}, {"g", "g [MHz]", 1e6},
        {"chi", "chi [kHz]", 1e3},   {"f_r", "f_r [GHz]", 1e9},     {"q_i", "Q_i / 1e3", 1e3},
        {"q_c", "Q_c / 1e3", 1e3},   {"t1", "T1 [us]", 1e-6},       {"t2_star", "T2* [us]", 1e-6},
        {"t2", "T2 [us]", 1e-6},
    };
    return rows;
}

void SummaryColumn::set(const std::string &key, Measurement m) {
    const auto &rows = summary_rows();
    if (std::none_of(rows.begin(), rows.end(), [&](const SummaryRow &r) { return r.key == key; }))
        throw InputError("unknown summary row '" + key + "'");
    entries[key] = m;
}

void SummaryColumn::add_record(const nlohmann::json &record) {
    try {
        const std::string kind = record.at("kind").get<std::string>();
        for (const auto &d : record.at("derived")) {
            const std::string name = d.at("name").get<std::string>();
            const Measurement m{as_number(d.at("value")), as_number(d.at("uncertainty"))};
            for (const auto &map : kMappings)
                if (kind == map.kind && name == map.name) entries[map.key] = m;
            if (kind == "chevron" && name == "f01" && !entries.count("f_q")) entries["f_q"] = m;
        }
    } catch (const nlohmann::json::exception &e) {
        throw InputError(std::string("malformed fit record: ") + e.what());
    }
}

std::string render_summary_text(const std::vector<SummaryColumn> &columns) {
    const auto &rows = summary_rows();
    std::vector<std::vector<std::string>> cells;
    std::vector<std::string> header = {""};
    for (const auto &c : columns) header.push_back(c.name);
    cells.push_back(header);
    for (const auto &r : rows) {
        std::vector<std::string> line = {r.label};
        for (const auto &c : columns) {
            const auto it = c.entries.find(r.key);
            if (it == c.entries.end()) {
                line.emplace_back("-");
                continue;
            }
            const double v = it->second.value / r.unit;
            line.push_back(c.expected ? plain(v) : format_with_uncertainty(v, it->second.uncertainty / r.unit));
        }
        cells.push_back(line);
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto &line : cells)
        for (std::size_t k = 0; k < line.size(); ++k) width[k] = std::max(width[k], line[k].size());
    std::ostringstream out;
    for (const auto &line : cells) {
        for (std::size_t k = 0; k < line.size(); ++k) {
            if (k == 0) {
                out << line[k] << std::string(width[k] - line[k].size(), ' ');
            } else {
                out << "  " << std::string(width[k] - line[k].size(), ' ') << line[k];
            }
        }
        out << '\n';
    }
    return out.str();
}

std::string render_summary_csv(const std::vector<SummaryColumn> &columns) {
    std::ostringstream out;
    out << "row,column,value,uncertainty\n";
    for (const auto &r : summary_rows()) {
        for (const auto &c : columns) {
            const auto it = c.entries.find(r.key);
            if (it == c.entries.end()) continue;
            out << r.key << ',' << c.name << ',' << format_double(it->second.value) << ','
                << format_double(c.expected ? 0.0 : it->second.uncertainty) << '\n';
        }
    }
    return out.str();
}

}  // namespace qtwin
