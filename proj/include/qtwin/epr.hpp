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

// Energy-participation quantization for a single nonlinear element.

#include <Eigen/Dense>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qtwin/capacitance.hpp"
#include "qtwin/circuit.hpp"

namespace qtwin {

struct Mode {
    std::string label;
    double f_lin = 0.0;          // linear (harmonic) mode frequency [Hz]
    double participation = 0.0;  // junction energy participation in [0, 1]
};

struct ModeSystem {
    std::vector<Mode> modes;
    double ej = 0.0;  // Josephson energy of the nonlinear element [Hz]

    void validate() const;

    /// Bridge format for external eigenmode solvers:
    ///   ej_hz,<value>
    ///   label,f_lin_hz,participation
    ///   <label>,<f>,<p>   (one row per mode)
    static ModeSystem from_csv(std::istream &in);
    static ModeSystem load_csv(const std::filesystem::path &path);
};

struct KerrMatrix {
    /// Cross-Kerr magnitudes chi_nm = f_m f_n p_m p_n / (4 E_J), nonnegative.
    Eigen::MatrixXd chi;
    /// Reported anharmonicities, -chi_mm / 2 (negative for transmons).
    Eigen::VectorXd anharmonicity;
    /// First-order dressed mode frequencies.
    Eigen::VectorXd f_dressed;
};

KerrMatrix kerr_matrix(const ModeSystem &ms);

/// f_m - chi_mm / 2 - 1/2 sum_{n != m} chi_nm.
Eigen::VectorXd dressed_frequencies(const ModeSystem &ms, const KerrMatrix &km);

/// Two coupled LC oscillators (qubit with linearized junction inductance,
/// resonator with L_r) solved for normal modes and junction participations.
/// Modes come out ordered qubit-like first.
ModeSystem linear_mode_system(double c_qubit, double c_resonator, double c_mutual, double l_junction,
                              double l_resonator);

struct EprLomRow {
    double flux = 0.0;
    double f_q_lom = 0.0;
    double f_q_epr = 0.0;
    double f_r_lom = 0.0;
    double f_r_epr = 0.0;
    double relative_difference = 0.0;  // |f_q_epr - f_q_lom| / f_q_lom
};

struct EprLomReport {
    std::vector<EprLomRow> rows;
    double max_relative_difference = 0.0;
};

/// Qubit and resonator frequencies over a flux sweep from the lumped model
/// (exact transmon spectrum plus g^2/Delta pull) and from EPR quantization of
/// the linearized normal modes of the same circuit. Throws DomainError when
/// E_J vanishes at any requested flux.
EprLomReport epr_vs_lom_report(const CapacitanceMatrix &caps, const JosephsonElement &junction, double f_r,
                               std::span<const double> fluxes, const LomOptions &options = {});

}  // namespace qtwin
