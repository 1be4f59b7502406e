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

#include "qtwin/epr.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>

#include "qtwin/constants.hpp"
#include "qtwin/error.hpp"
#include "qtwin/io.hpp"

namespace qtwin {

void ModeSystem::validate() const {
    if (modes.empty()) {
        throw DomainError("mode system needs at least one mode");
    }
    if (!(ej > 0.0)) {
        throw DomainError("mode system E_J must be positive");
    }
    double total = 0.0;
    for (const auto &m : modes) {
        if (!(m.f_lin > 0.0)) {
            throw DomainError("mode '" + m.label + "' has a nonpositive linear frequency");
        }
        if (!(m.participation >= 0.0 && m.participation <= 1.0)) {
            throw DomainError("mode '" + m.label + "' participation outside [0, 1]");
        }
        total += m.participation;
    }
    // Single junction: participations of all modes sum to at most one.
    if (total > 1.0 + 1e-6) {
        throw DomainError("junction participations sum above one");
    }
}

ModeSystem ModeSystem::from_csv(std::istream &in) {
    auto rows = read_csv_rows(in);
    if (rows.size() < 3) {
        throw InputError("mode CSV needs an ej_hz record, a header and at least one mode");
    }
    if (rows[0].size() != 2 || rows[0][0] != "ej_hz") {
        throw InputError("mode CSV must start with an 'ej_hz,<value>' record");
    }
    ModeSystem ms;
    ms.ej = parse_double(rows[0][1], "ej_hz");
    const std::vector<std::string> expected{"label", "f_lin_hz", "participation"};
    if (rows[1] != expected) {
        throw InputError("mode CSV header must be 'label,f_lin_hz,participation'");
    }
    for (std::size_t i = 2; i < rows.size(); ++i) {
        if (rows[i].size() != 3) {
            throw InputError("mode CSV row " + std::to_string(i + 1) + " must have three cells");
        }
        ms.modes.push_back(Mode{rows[i][0], parse_double(rows[i][1], "f_lin_hz"),
                                parse_double(rows[i][2], "participation")});
    }
    ms.validate();
    return ms;
}

ModeSystem ModeSystem::load_csv(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open mode file: " + path.string());
    }
    return from_csv(in);
}

KerrMatrix kerr_matrix(const ModeSystem &ms) {
    ms.validate();
    const auto n = static_cast<Eigen::Index>(ms.modes.size());
    Eigen::VectorXd w(n);
    for (Eigen::Index m = 0; m < n; ++m) {
        const auto &mode = ms.modes[static_cast<std::size_t>(m)];
        w(m) = mode.f_lin * mode.participation;
    }
    KerrMatrix km;
    // Outer product keeps chi exactly symmetric.
    km.chi = (w * w.transpose()) / (4.0 * ms.ej);
    km.anharmonicity = -0.5 * km.chi.diagonal();
    km.f_dressed = dressed_frequencies(ms, km);
    return km;
}

Eigen::VectorXd dressed_frequencies(const ModeSystem &ms, const KerrMatrix &km) {
    const auto n = static_cast<Eigen::Index>(ms.modes.size());
    if (km.chi.rows() != n || km.chi.cols() != n) {
        throw InputError("Kerr matrix does not match the mode system");
    }
    Eigen::VectorXd f(n);
    for (Eigen::Index m = 0; m < n; ++m) {
        double cross = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
            if (k != m) {
                cross += km.chi(k, m);
            }
        }
        f(m) = ms.modes[static_cast<std::size_t>(m)].f_lin - 0.5 * km.chi(m, m) - 0.5 * cross;
    }
    return f;
}

ModeSystem linear_mode_system(double c_qubit, double c_resonator, double c_mutual, double l_junction,
                              double l_resonator) {
    if (!(c_qubit > 0.0) || !(c_resonator > 0.0) || !(c_mutual >= 0.0)) {
        throw DomainError("capacitances must be positive (mutual nonnegative)");
    }
    if (!(l_junction > 0.0) || !(l_resonator > 0.0)) {
        throw DomainError("inductances must be positive");
    }
    Eigen::Matrix2d c;
    c << c_qubit, -c_mutual, -c_mutual, c_resonator;
    Eigen::Matrix2d k = Eigen::Matrix2d::Zero();
    k(0, 0) = 1.0 / l_junction;
    k(1, 1) = 1.0 / l_resonator;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix2d> solver(k, c);
    if (solver.info() != Eigen::Success || !(solver.eigenvalues().minCoeff() > 0.0)) {
        throw NumericalError("normal-mode analysis failed (capacitance matrix not positive definite?)");
    }
    ModeSystem ms;
    ms.ej = ej_from_lj(l_junction);
    std::vector<Mode> modes;
    for (int i = 0; i < 2; ++i) {
        const double omega = std::sqrt(solver.eigenvalues()(i));
        const auto v = solver.eigenvectors().col(i);
        const double e_junction = v(0) * v(0) / l_junction;
        const double e_total = e_junction + v(1) * v(1) / l_resonator;
        modes.push_back(Mode{"", omega / kTwoPi, e_junction / e_total});
    }
    if (modes[1].participation > modes[0].participation) {
        std::swap(modes[0], modes[1]);
    }
    modes[0].label = "qubit";
    modes[1].label = "resonator";
    ms.modes = std::move(modes);
    return ms;
}

EprLomReport epr_vs_lom_report(const CapacitanceMatrix &caps, const JosephsonElement &junction, double f_r,
                               std::span<const double> fluxes, const LomOptions &options) {
    EprLomReport report;
    for (double flux : fluxes) {
        LomOptions opt = options;
        opt.flux = flux;
        const double ej = junction.josephson_energy(flux);
        // E_J of a symmetric SQUID at half flux is zero up to rounding.
        const double ej_ceiling = junction.kind == JunctionKind::Single ? ej : junction.ej_max;
        if (!(ej > 1e-9 * ej_ceiling)) {
            throw DomainError("E_J vanishes at flux " + std::to_string(flux) + " Phi_0; neither model applies");
        }
        const LomResult lom = lom_analysis(caps, junction, f_r, opt);
        EprLomRow row;
        row.flux = flux;
        const auto &cs = lom.coupled;
        row.f_q_lom = cs.f_q + cs.g * cs.g / cs.detuning;
        row.f_r_lom = f_r;

        const double l_r = 1.0 / (std::pow(kTwoPi * f_r, 2) * lom.coupler_capacitance);
        const ModeSystem ms = linear_mode_system(lom.qubit_capacitance, lom.coupler_capacitance,
                                                 lom.mutual_capacitance, lj_from_ej(ej), l_r);
        const KerrMatrix km = kerr_matrix(ms);
        row.f_q_epr = km.f_dressed(0);
        row.f_r_epr = km.f_dressed(1);
        row.relative_difference = std::abs(row.f_q_epr - row.f_q_lom) / row.f_q_lom;
        report.max_relative_difference = std::max(report.max_relative_difference, row.relative_difference);
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace qtwin
