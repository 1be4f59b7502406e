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

#include "qtwin/loss_budget.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "qtwin/constants.hpp"
#include "qtwin/error.hpp"
#include "qtwin/io.hpp"

namespace qtwin {

namespace {

constexpr InterfaceKind kKinds[] = {InterfaceKind::MA, InterfaceKind::MS, InterfaceKind::SA};

void require_positive(double v, const char *what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(what) + " must be positive and finite");
}

std::string lower_ext(const std::string &path) {
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return {};
    std::string ext = path.substr(dot + 1);
    for (auto &c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

std::string fmt_sci(double v, int digits = 3) {
    if (std::isinf(v)) return "inf";
    std::ostringstream os;
    os.precision(digits);
    os << std::scientific << v;
    return os.str();
}

}  // namespace

InterfaceEpr combine_hybrid(std::span<const PartitionRegion> regions, const std::optional<InterfaceEpr> &unpartitioned_3d) {
    InterfaceEpr out;
    double total_f = 0.0;
    for (const auto &r : regions) {
        if (!(r.energy_fraction >= 0.0 && r.energy_fraction <= 1.0))
            throw DomainError("region '" + r.name + "' energy fraction outside [0, 1]");
        total_f += r.energy_fraction;
        for (InterfaceKind k : kKinds) {
            const double f = r.xsect.get(k);
            if (!(f >= 0.0) || !std::isfinite(f))
                throw DomainError("region '" + r.name + "' has an invalid " + to_string(k) + " fraction");
            out.set(k, out.get(k) + r.energy_fraction * f);
        }
    }
    if (total_f > 1.0 + 1e-12)
        throw DomainError("overlapping regions: energy fractions sum to " + std::to_string(total_f));
    if (unpartitioned_3d) {
        for (InterfaceKind k : kKinds) {
            const double p = unpartitioned_3d->get(k);
            if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("invalid unpartitioned participation");
            out.set(k, out.get(k) + p);
        }
    }
    return out;
}

std::vector<LossChannel> surface_channels(const InterfaceEpr &p, const std::map<InterfaceKind, double> &tan_delta) {
    std::vector<LossChannel> out;
    for (InterfaceKind k : kKinds) {
        const auto it = tan_delta.find(k);
        if (it == tan_delta.end()) throw InputError("no loss tangent for the " + to_string(k) + " interface");
        out.push_back({to_string(k), p.get(k), it->second});
    }
    return out;
}

std::map<InterfaceKind, double> default_loss_tangents() {
    return {{InterfaceKind::MA, 3.07e-3}, {InterfaceKind::MS, 1.10e-2}, {InterfaceKind::SA, 3.07e-3}};
}

double TlsQuality::q() const {
    if (infinite) throw DomainError("TLS quality factor is infinite (no lossy channel)");
    return 1.0 / inverse_q;
}

TlsQuality q_tls(std::span<const LossChannel> channels) {
    if (channels.empty()) throw DomainError("q_tls: at least one channel is required");
    TlsQuality out;
    for (const auto &c : channels) {
        if (!(c.participation >= 0.0) || !(c.loss_tangent >= 0.0) || !std::isfinite(c.participation) ||
            !std::isfinite(c.loss_tangent))
            throw DomainError("q_tls: channel '" + c.name + "' needs finite non-negative p and tan(delta)");
        out.inverse_q += c.participation * c.loss_tangent;
    }
    out.infinite = !(out.inverse_q > 0.0);
    return out;
}

double t1_tls(double q, double f_q) {
    require_positive(q, "Q_TLS");
    require_positive(f_q, "qubit frequency");
    return q / (kTwoPi * f_q);
}

double loaded_q(double q_i, double q_c) {
    require_positive(q_i, "Q_i");
    require_positive(q_c, "Q_c");
    return 1.0 / (1.0 / q_i + 1.0 / q_c);
}

double resonator_linewidth(double f_r, double q_i, double q_c) {
    require_positive(f_r, "resonator frequency");
    return f_r / loaded_q(q_i, q_c);
}

PurcellLimit purcell_t1(double g, double detuning, double kappa) {
    if (!(g >= 0.0) || !std::isfinite(g)) throw DomainError("purcell_t1: g must be finite and >= 0");
    if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw DomainError("purcell_t1: kappa must be finite and >= 0");
    if (detuning == 0.0 || !std::isfinite(detuning)) throw DomainError("purcell_t1: detuning must be finite and nonzero");
    PurcellLimit out;
    out.dispersive_valid = std::abs(detuning) > 10.0 * g;
    const double ratio = g / detuning;
    out.rate = ratio * ratio * kTwoPi * kappa;
    out.infinite = !(out.rate > 0.0);
    out.t1 = out.infinite ? std::numeric_limits<double>::infinity() : 1.0 / out.rate;
    return out;
}

double combine_rates(std::span<const DecayChannel> channels) {
    double total = 0.0;
    for (const auto &c : channels) {
        if (!(c.rate >= 0.0) || !std::isfinite(c.rate))
            throw DomainError("decay channel '" + c.name + "' has an invalid rate");
        total += c.rate;
    }
    if (!(total > 0.0)) throw DomainError("no decay channel has a nonzero rate");
    return total;
}

double LossBudget::total_rate() const { return combine_rates(channels); }

LossBudget t1_budget(const BudgetInputs &in) {
    require_positive(in.f_q, "qubit frequency");
    LossBudget b;
    b.q_tls = in.q_tls;
    if (in.q_tls) {
        b.t1_tls = t1_tls(*in.q_tls, in.f_q);
        b.channels.push_back({"tls", 1.0 / b.t1_tls});
    } else {
        b.t1_tls = std::numeric_limits<double>::infinity();
    }
    if (in.g > 0.0 || in.f_r > 0.0) {
        b.q_i = in.q_i;
        b.q_c = in.q_c;
        b.q_r = loaded_q(in.q_i, in.q_c);
        b.kappa = resonator_linewidth(in.f_r, in.q_i, in.q_c);
        const PurcellLimit p = purcell_t1(in.g, in.f_q - in.f_r, b.kappa);
        b.t1_purcell = p.t1;
        b.purcell_dispersive_valid = p.dispersive_valid;
        b.channels.push_back({"purcell", p.rate});
    } else {
        b.t1_purcell = std::numeric_limits<double>::infinity();
    }
    b.t1_total = 1.0 / combine_rates(b.channels);
    return b;
}

std::vector<std::pair<std::string, double>> parse_energy_report_csv(std::istream &in) {
    const CsvTable table = CsvTable::parse(in);
    const std::size_t name_col = table.require_column("region");
    const std::size_t f_col = table.require_column("energy_fraction");
    std::vector<std::pair<std::string, double>> out;
    for (const auto &row : table.rows) out.emplace_back(row.at(name_col), parse_double(row.at(f_col), "energy_fraction"));
    return out;
}

std::vector<std::pair<std::string, double>> parse_energy_report_json(const nlohmann::json &doc) {
    if (!doc.is_object() || !doc.contains("regions") || !doc["regions"].is_array())
        throw InputError("energy report must be an object with a 'regions' array");
    std::vector<std::pair<std::string, double>> out;
    for (const auto &r : doc["regions"]) {
        if (!r.is_object() || !r.contains("name") || !r.contains("energy_fraction"))
            throw InputError("energy report entries need 'name' and 'energy_fraction'");
        for (const auto &[key, value] : r.items())
            if (key != "name" && key != "energy_fraction") throw InputError("unknown energy report key '" + key + "'");
        if (!r["energy_fraction"].is_number()) throw InputError("energy_fraction must be a number");
        out.emplace_back(r["name"].get<std::string>(), r["energy_fraction"].get<double>());
    }
    return out;
}

std::vector<std::pair<std::string, double>> load_energy_report(const std::string &path) {
    const std::string text = read_text_file(path);
    if (lower_ext(path) == "json") {
        try {
            return parse_energy_report_json(nlohmann::json::parse(text));
        } catch (const nlohmann::json::exception &e) {
            throw InputError(path + ": " + e.what());
        }
    }
    std::istringstream is(text);
    return parse_energy_report_csv(is);
}

std::map<std::string, InterfaceEpr> parse_participation_table(std::istream &in) {
    const CsvTable table = CsvTable::parse(in);
    if (table.header.empty() || table.header[0] != "interface")
        throw InputError("participation table must start with an 'interface' column");
    std::map<std::string, InterfaceEpr> out;
    for (std::size_t c = 1; c < table.header.size(); ++c) out[table.header[c]];
    bool seen[3] = {false, false, false};
    for (const auto &row : table.rows) {
        const InterfaceKind kind = interface_kind_from_string(row.at(0));
        seen[static_cast<int>(kind)] = true;
        for (std::size_t c = 1; c < table.header.size(); ++c)
            out[table.header[c]].set(kind, parse_double(row.at(c), table.header[c]));
    }
    for (InterfaceKind k : kKinds)
        if (!seen[static_cast<int>(k)]) throw InputError("participation table lacks a " + to_string(k) + " row");
    return out;
}

std::map<std::string, InterfaceEpr> load_participation_table(const std::string &path) {
    std::istringstream is(read_text_file(path));
    return parse_participation_table(is);
}

nlohmann::json to_json(const InterfaceEpr &epr) {
    return {{"ma", epr.ma},
            {"ms", epr.ms},
            {"sa", epr.sa},
            {"ma_error", epr.ma_error},
            {"ms_error", epr.ms_error},
            {"sa_error", epr.sa_error}};
}

InterfaceEpr interface_epr_from_json(const nlohmann::json &j) {
    if (!j.is_object()) throw InputError("interface participation record must be an object");
    InterfaceEpr e;
    for (const auto &[key, value] : j.items()) {
        if (!value.is_number()) throw InputError("participation field '" + key + "' must be a number");
        const double v = value.get<double>();
        if (key == "ma") e.ma = v;
        else if (key == "ms") e.ms = v;
        else if (key == "sa") e.sa = v;
        else if (key == "ma_error") e.ma_error = v;
        else if (key == "ms_error") e.ms_error = v;
        else if (key == "sa_error") e.sa_error = v;
        else throw InputError("unknown participation field '" + key + "'");
    }
    return e;
}

nlohmann::json to_json(const LossBudget &b) {
    auto num = [](double v) -> nlohmann::json {
        if (std::isinf(v)) return "inf";
        return v;
    };
    nlohmann::json j;
    j["q_tls"] = b.q_tls ? nlohmann::json(*b.q_tls) : nlohmann::json("inf");
    j["t1_tls_s"] = num(b.t1_tls);
    j["q_i"] = b.q_i;
    j["q_c"] = b.q_c;
    j["q_r"] = b.q_r;
    j["kappa_hz"] = b.kappa;
    j["t1_purcell_s"] = num(b.t1_purcell);
    j["purcell_dispersive_valid"] = b.purcell_dispersive_valid;
    j["t1_total_s"] = num(b.t1_total);
    nlohmann::json ch = nlohmann::json::array();
    for (const auto &c : b.channels) ch.push_back({{"name", c.name}, {"rate_per_s", c.rate}});
    j["channels"] = ch;
    return j;
}

std::string format_budget_table(const LossBudget &b) {
    std::ostringstream os;
    auto us = [](double s) { return std::isinf(s) ? std::string("inf") : fmt_sci(s * 1e6, 4) + " us"; };
    os << "channel    rate [1/s]     T1\n";
    for (const auto &c : b.channels) {
        os << c.name;
        for (std::size_t k = c.name.size(); k < 11; ++k) os << ' ';
        os << fmt_sci(c.rate) << "      " << us(c.rate > 0 ? 1.0 / c.rate : std::numeric_limits<double>::infinity())
           << '\n';
    }
    os << "total      " << fmt_sci(1.0 / b.t1_total) << "      " << us(b.t1_total) << '\n';
    os << "Q_TLS " << (b.q_tls ? fmt_sci(*b.q_tls) : std::string("inf")) << ", Q_r " << fmt_sci(b.q_r)
       << ", kappa " << fmt_sci(b.kappa) << " Hz";
    if (!b.purcell_dispersive_valid) os << " (outside dispersive regime)";
    os << '\n';
    return os.str();
}

}  // namespace qtwin
