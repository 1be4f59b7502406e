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

// Hybrid surface participation, TLS and Purcell limits, and the T1 budget.

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qtwin/xsect.hpp"

namespace qtwin {

/// A region of the 3D layout whose surface fields are taken from a
/// dedicated cross-section.
struct PartitionRegion {
    std::string name;
    double energy_fraction = 0.0;  // F_r, share of the mode's electric energy
    InterfaceEpr xsect;            // per-interface fractions of that cross-section
};

/// p_i = sum_r F_r f_{r,i} (+ the 3D values of the unpartitioned remainder).
/// Throws DomainError for fractions outside [0, 1] or summing above 1.
InterfaceEpr combine_hybrid(std::span<const PartitionRegion> regions,
                            const std::optional<InterfaceEpr> &unpartitioned_3d = std::nullopt);

struct LossChannel {
    std::string name;
    double participation = 0.0;
    double loss_tangent = 0.0;
};

/// Channels for MA/MS/SA from a participation set and per-interface loss tangents.
std::vector<LossChannel> surface_channels(const InterfaceEpr &p, const std::map<InterfaceKind, double> &tan_delta);

/// Default loss tangents: MA and SA 3.07e-3, MS 1.10e-2.
std::map<InterfaceKind, double> default_loss_tangents();

struct TlsQuality {
    double inverse_q = 0.0;  // sum p_i tan(delta_i)
    bool infinite = true;    // no lossy channel

    /// Throws DomainError when infinite.
    double q() const;
};

/// 1/Q = sum p_i tan(delta_i). Throws DomainError on an empty list or a
/// negative entry.
TlsQuality q_tls(std::span<const LossChannel> channels);

/// T1 = Q / (2 pi f_q).
double t1_tls(double q, double f_q);

double loaded_q(double q_i, double q_c);
/// Resonator linewidth kappa = f_r / Q_r in Hz.
double resonator_linewidth(double f_r, double q_i, double q_c);

struct PurcellLimit {
    double rate = 0.0;             // 1/s
    double t1 = 0.0;               // s, infinity when rate is zero
    bool infinite = false;
    bool dispersive_valid = true;  // |Delta| > 10 g
};

/// Gamma = (g / Delta)^2 * 2 pi kappa with g, Delta, kappa in Hz.
PurcellLimit purcell_t1(double g, double detuning, double kappa);

struct DecayChannel {
    std::string name;
    double rate = 0.0;  // 1/s
};

struct LossBudget {
    std::optional<double> q_tls;  // empty when TLS-free
    double t1_tls = 0.0;          // s, infinity when TLS-free
    double kappa = 0.0;
    double q_r = 0.0;
    double q_i = 0.0;
    double q_c = 0.0;
    double t1_purcell = 0.0;
    bool purcell_dispersive_valid = true;
    std::vector<DecayChannel> channels;
    double t1_total = 0.0;

    double total_rate() const;
};

/// Rate-additive combination. Throws DomainError for negative or
/// non-finite rates or when every rate is zero.
double combine_rates(std::span<const DecayChannel> channels);

struct BudgetInputs {
    double f_q = 0.0;
    std::optional<double> q_tls;  // empty: TLS channel absent
    double g = 0.0;
    double f_r = 0.0;
    double q_i = 0.0;
    double q_c = 0.0;
};

LossBudget t1_budget(const BudgetInputs &in);

/// 3D region energy fractions from CSV ("region,energy_fraction") or JSON
/// ({"regions": [{"name": ..., "energy_fraction": ...}]}), chosen by extension.
std::vector<std::pair<std::string, double>> load_energy_report(const std::string &path);
std::vector<std::pair<std::string, double>> parse_energy_report_csv(std::istream &in);
std::vector<std::pair<std::string, double>> parse_energy_report_json(const nlohmann::json &doc);

/// Participation columns keyed by column name, from CSV with header
/// "interface,<col>,..." and rows MA/MS/SA.
std::map<std::string, InterfaceEpr> load_participation_table(const std::string &path);
std::map<std::string, InterfaceEpr> parse_participation_table(std::istream &in);

nlohmann::json to_json(const InterfaceEpr &epr);
InterfaceEpr interface_epr_from_json(const nlohmann::json &j);
nlohmann::json to_json(const LossBudget &budget);
std::string format_budget_table(const LossBudget &budget);

}  // namespace qtwin
