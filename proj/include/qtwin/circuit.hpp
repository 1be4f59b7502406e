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

// Lumped-element transmon quantization. Public frequencies are ordinary
// frequencies in Hz and energies are E/h in Hz.

#include <string>
#include <vector>

#include "qtwin/capacitance.hpp"

namespace qtwin {

enum class JunctionKind { Single, SymmetricSquid, AsymmetricSquid };

struct JosephsonElement {
    JunctionKind kind = JunctionKind::Single;
    double inductance = 0.0;    // L_J [H], single junction only
    double ej_max = 0.0;        // E_J,max [Hz], SQUIDs only
    double asymmetry = 0.0;     // d in [0, 1), asymmetric SQUID only
    double capacitance = 2e-15; // C_J [F]

    static JosephsonElement single(double inductance, double capacitance = 2e-15);
    static JosephsonElement squid(double ej_max, double asymmetry = 0.0, double capacitance = 2e-15);

    void validate() const;
    /// Effective Josephson energy at the given flux (in units of Phi_0).
    double josephson_energy(double flux = 0.0) const;
};

struct TransmonParams {
    double ej = 0.0;
    double ec = 0.0;
    double f01 = 0.0;
    double anharmonicity = 0.0;  // negative in the transmon regime

    double ej_over_ec() const { return ej / ec; }
};

struct CoupledSystem {
    double f_q = 0.0;
    double f_r = 0.0;
    double g = 0.0;
    double detuning = 0.0;  // f_q - f_r
    double chi = 0.0;       // signed dispersive shift
    bool dispersive_valid = false;  // |detuning| > 10 g
};

/// E_J = (Phi_0 / 2 pi)^2 / (h L_J).
double ej_from_lj(double inductance);
double lj_from_ej(double ej);
/// E_C = e^2 / (2 C h).
double ec_from_csigma(double capacitance);

/// Eigenvalues of the charge-basis Cooper-pair-box Hamiltonian
///   H = 4 E_C (n - n_g)^2 - (E_J / 2) sum_n (|n><n+1| + h.c.)
/// truncated to n in [-cutoff, cutoff]. Returned ascending, not shifted.
/// No convergence check; see transmon_spectrum for the checked variant.
std::vector<double> transmon_levels(double ej, double ec, int n_levels, int charge_cutoff,
                                    double offset_charge = 0.0);

struct TransmonSpectrum {
    std::vector<double> levels;
    double f01() const { return levels.at(1) - levels.at(0); }
    double anharmonicity() const { return (levels.at(2) - levels.at(1)) - f01(); }
};

/// Checked diagonalization returning at least three levels. Throws NumericalError when doubling the charge
/// cutoff moves f01 by more than 1e-9 relative.
TransmonSpectrum transmon_spectrum(double ej, double ec, int n_levels = 4, int charge_cutoff = 30,
                                   double offset_charge = 0.0);

/// TransmonParams from the exact spectrum.
TransmonParams transmon_params(double ej, double ec, int charge_cutoff = 30);

struct TransmonEstimate {
    double f01 = 0.0;
    double anharmonicity = 0.0;
};
/// Large E_J/E_C limit: f01 = sqrt(8 E_J E_C) - E_C, alpha = -E_C.
TransmonEstimate transmon_asymptotic(double ej, double ec);

/// E_J(Phi) = E_J,max |cos(pi Phi)| sqrt(1 + d^2 tan^2(pi Phi)), Phi in units of Phi_0.
double squid_ej(double ej_max, double asymmetry, double flux);

/// chi = g^2 alpha / (Delta (Delta + alpha)). Rejects |Delta| < 1 MHz and
/// |Delta + alpha| < 1 MHz with DomainError.
double dispersive_shift(double g, double detuning, double anharmonicity);

struct DressedPair {
    double lower = 0.0;
    double upper = 0.0;
    double splitting() const { return upper - lower; }
};
/// One-excitation Jaynes-Cummings eigenfrequencies.
DressedPair jc_eigenfrequencies(double f_q, double f_r, double g);

struct LomOptions {
    std::string qubit_label = "qubit";
    std::string coupler_label = "coupler";
    /// Node treated as the reference and dropped before the analysis if present.
    std::string ground_label = "ground";
    double flux = 0.0;  // SQUID bias, Phi / Phi_0
    /// The coupler node carries the lambda/4 resonator; its lumped equivalent
    /// pi / (4 omega_r Z0) is added to the coupler node capacitance.
    bool include_resonator_capacitance = true;
    double resonator_impedance = 50.0;
    int charge_cutoff = 30;
};

struct LomResult {
    TransmonParams transmon;
    CoupledSystem coupled;
    double qubit_capacitance = 0.0;    // C_qSigma including C_J
    double coupler_capacitance = 0.0;  // C_rSigma including resonator load
    double mutual_capacitance = 0.0;   // C_qr
    double coupling_ratio = 0.0;       // C_qr / sqrt(C_qSigma C_rSigma)
};

/// Lumped oscillator model: qubit parameters from the capacitance matrix and
/// the junction, coupling g = 1/2 sqrt(f_q f_r) C_qr / sqrt(C_qSigma C_rSigma).
LomResult lom_analysis(const CapacitanceMatrix &caps, const JosephsonElement &junction, double f_r,
                       const LomOptions &options = {});

struct LjCalibration {
    double inductance = 0.0;
    double bracket_low = 0.0;
    double bracket_high = 0.0;
    double achieved_f_q = 0.0;
    int iterations = 0;
};

/// Single-junction L_J reproducing a target qubit frequency through
/// lom_analysis. Bracketed bisection refined by secant steps; converges to
/// |f_q - target| < tolerance. Throws NumericalError without a sign change.
LjCalibration calibrate_lj(double f_q_target, const CapacitanceMatrix &caps, double f_r,
                           const LomOptions &options = {}, double junction_capacitance = 2e-15,
                           double bracket_low = 1e-9, double bracket_high = 50e-9,
                           double tolerance = 1e3);

struct CpwLine {
    double impedance = 0.0;
    double eps_eff = 0.0;
};

/// K(k) / K(k') for the conformal map of a coplanar waveguide.
double elliptic_ratio(double k);

/// Conformal-mapping CPW on an infinitely thick substrate:
/// k = w / (w + 2 s), eps_eff = (1 + eps_r) / 2, Z0 = 30 pi / sqrt(eps_eff) K(k') / K(k).
CpwLine cpw_line(double width, double gap, double eps_r);

/// Bare lambda/4 resonance c / (4 l sqrt(eps_eff)). Coupling-claw loading
/// lowers the physical resonance below this estimate.
double quarter_wave_freq(double length, double eps_eff);

}  // namespace qtwin
