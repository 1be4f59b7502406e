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

#include "qtwin/circuit.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "qtwin/constants.hpp"
#include "qtwin/error.hpp"

namespace qtwin {

JosephsonElement JosephsonElement::single(double inductance, double capacitance) {
    JosephsonElement j;
    j.kind = JunctionKind::Single;
    j.inductance = inductance;
    j.capacitance = capacitance;
    j.validate();
    return j;
}

JosephsonElement JosephsonElement::squid(double ej_max, double asymmetry, double capacitance) {
    JosephsonElement j;
    j.kind = asymmetry == 0.0 ? JunctionKind::SymmetricSquid : JunctionKind::AsymmetricSquid;
    j.ej_max = ej_max;
    j.asymmetry = asymmetry;
    j.capacitance = capacitance;
    j.validate();
    return j;
}

void JosephsonElement::validate() const {
    if (!(capacitance >= 0.0)) {
        throw DomainError("junction capacitance must be nonnegative");
    }
    switch (kind) {
        case JunctionKind::Single:
            if (!(inductance > 0.0)) {
                throw DomainError("junction inductance must be positive");
            }
            break;
        case JunctionKind::SymmetricSquid:
        case JunctionKind::AsymmetricSquid:
            if (!(ej_max > 0.0)) {
                throw DomainError("SQUID E_J,max must be positive");
            }
            if (!(asymmetry >= 0.0 && asymmetry < 1.0)) {
                throw DomainError("SQUID asymmetry must lie in [0, 1)");
            }
            break;
    }
}

double JosephsonElement::josephson_energy(double flux) const {
    validate();
    if (kind == JunctionKind::Single) {
        return ej_from_lj(inductance);
    }
    return squid_ej(ej_max, kind == JunctionKind::SymmetricSquid ? 0.0 : asymmetry, flux);
}

double ej_from_lj(double inductance) {
    if (!(inductance > 0.0)) {
        throw DomainError("Josephson inductance must be positive");
    }
    const double phi0_reduced = kFluxQuantum / kTwoPi;
    return phi0_reduced * phi0_reduced / (kPlanck * inductance);
}

double lj_from_ej(double ej) {
    if (!(ej > 0.0)) {
        throw DomainError("Josephson energy must be positive");
    }
    const double phi0_reduced = kFluxQuantum / kTwoPi;
    return phi0_reduced * phi0_reduced / (kPlanck * ej);
}

double ec_from_csigma(double capacitance) {
    if (!(capacitance > 0.0)) {
        throw DomainError("total capacitance must be positive");
    }
    return kElementaryCharge * kElementaryCharge / (2.0 * capacitance * kPlanck);
}

std::vector<double> transmon_levels(double ej, double ec, int n_levels, int charge_cutoff, double offset_charge) {
    if (!(ej >= 0.0) || !(ec > 0.0)) {
        throw DomainError("transmon spectrum needs E_J >= 0 and E_C > 0");
    }
    if (charge_cutoff < 1) {
        throw DomainError("charge cutoff must be positive");
    }
    const int dim = 2 * charge_cutoff + 1;
    if (n_levels < 1 || n_levels > dim) {
        throw DomainError("requested more levels than the truncated charge basis holds");
    }
    // Hamiltonian in units of E_C.
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    for (int k = 0; k < dim; ++k) {
        const double n = static_cast<double>(k - charge_cutoff) - offset_charge;
        h(k, k) = 4.0 * n * n;
        if (k + 1 < dim) {
            h(k, k + 1) = h(k + 1, k) = -0.5 * ej / ec;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("tridiagonal eigensolver failed");
    }
    std::vector<double> levels(static_cast<std::size_t>(n_levels));
    for (int k = 0; k < n_levels; ++k) {
        levels[static_cast<std::size_t>(k)] = ec * solver.eigenvalues()(k);
    }
    return levels;
}

TransmonSpectrum transmon_spectrum(double ej, double ec, int n_levels, int charge_cutoff, double offset_charge) {
    if (charge_cutoff < 10) {
        throw DomainError("charge cutoff must be at least 10");
    }
    if (n_levels > 2 * charge_cutoff - 1) {
        throw DomainError("n_levels must not exceed 2 * charge_cutoff - 1");
    }
    const int needed = std::max(n_levels, 3);
    TransmonSpectrum s{transmon_levels(ej, ec, needed, charge_cutoff, offset_charge)};
    const auto doubled = transmon_levels(ej, ec, 2, 2 * charge_cutoff, offset_charge);
    const double f01 = s.f01();
    const double f01_doubled = doubled[1] - doubled[0];
    const double scale = std::max(std::abs(f01), ec);
    if (std::abs(f01 - f01_doubled) > 1e-9 * scale) {
        throw NumericalError("charge cutoff " + std::to_string(charge_cutoff) +
                             " not converged: doubling it moves f01 by more than 1e-9 relative");
    }
    return s;
}

TransmonParams transmon_params(double ej, double ec, int charge_cutoff) {
    const auto s = transmon_spectrum(ej, ec, 3, charge_cutoff);
    return TransmonParams{ej, ec, s.f01(), s.anharmonicity()};
}

TransmonEstimate transmon_asymptotic(double ej, double ec) {
    if (!(ej > 0.0) || !(ec > 0.0)) {
        throw DomainError("asymptotic transmon estimate needs E_J, E_C > 0");
    }
    return TransmonEstimate{std::sqrt(8.0 * ej * ec) - ec, -ec};
}

double squid_ej(double ej_max, double asymmetry, double flux) {
    if (!(ej_max > 0.0)) {
        throw DomainError("SQUID E_J,max must be positive");
    }
    if (!(asymmetry >= 0.0 && asymmetry < 1.0)) {
        throw DomainError("SQUID asymmetry must lie in [0, 1)");
    }
    // sqrt(cos^2 + d^2 sin^2) is the same function without the tan pole.
    const double c = std::cos(kPi * flux);
    const double s = std::sin(kPi * flux);
    return ej_max * std::sqrt(c * c + asymmetry * asymmetry * s * s);
}

double dispersive_shift(double g, double detuning, double anharmonicity) {
    constexpr double kPoleTolerance = 1e6;
    if (std::abs(detuning) < kPoleTolerance) {
        throw DomainError("dispersive shift undefined at qubit-resonator resonance");
    }
    if (std::abs(detuning + anharmonicity) < kPoleTolerance) {
        throw DomainError("dispersive shift undefined at the straddling pole (Delta = -alpha)");
    }
    return g * g * anharmonicity / (detuning * (detuning + anharmonicity));
}

DressedPair jc_eigenfrequencies(double f_q, double f_r, double g) {
    if (!(g >= 0.0)) {
        throw DomainError("coupling strength must be nonnegative");
    }
    const double mean = 0.5 * (f_q + f_r);
    const double delta = f_q - f_r;
    const double half = 0.5 * std::hypot(delta, 2.0 * g);
    return DressedPair{mean - half, mean + half};
}

LomResult lom_analysis(const CapacitanceMatrix &caps_in, const JosephsonElement &junction, double f_r,
                       const LomOptions &options) {
    if (!(f_r > 0.0)) {
        throw DomainError("resonator frequency must be positive");
    }
    junction.validate();
    const CapacitanceMatrix caps =
        caps_in.index_of(options.ground_label) ? caps_in.without(options.ground_label) : caps_in;

    const double c_q = caps(options.qubit_label, options.qubit_label) + junction.capacitance;
    double c_r = caps(options.coupler_label, options.coupler_label);
    if (options.include_resonator_capacitance) {
        if (!(options.resonator_impedance > 0.0)) {
            throw DomainError("resonator impedance must be positive");
        }
        c_r += kPi / (4.0 * kTwoPi * f_r * options.resonator_impedance);
    }
    const double c_qr = caps.mutual(options.qubit_label, options.coupler_label);
    const double det = c_q * c_r - c_qr * c_qr;
    if (!(det > 0.0)) {
        throw NumericalError("singular qubit-coupler capacitance reduction");
    }

    LomResult out;
    out.qubit_capacitance = c_q;
    out.coupler_capacitance = c_r;
    out.mutual_capacitance = c_qr;
    out.coupling_ratio = c_qr / std::sqrt(c_q * c_r);

    const double ej = junction.josephson_energy(options.flux);
    const double ej_scale = junction.kind == JunctionKind::Single ? ej : junction.ej_max;
    if (!(ej > 1e-9 * ej_scale)) {
        throw DomainError("effective Josephson energy vanishes at this flux bias");
    }
    out.transmon = transmon_params(ej, ec_from_csigma(c_q), options.charge_cutoff);

    auto &cs = out.coupled;
    cs.f_q = out.transmon.f01;
    cs.f_r = f_r;
    cs.g = 0.5 * std::sqrt(cs.f_q * f_r) * out.coupling_ratio;
    cs.detuning = cs.f_q - f_r;
    cs.dispersive_valid = std::abs(cs.detuning) > 10.0 * cs.g;
    try {
        cs.chi = dispersive_shift(cs.g, cs.detuning, out.transmon.anharmonicity);
    } catch (const DomainError &) {
        cs.chi = std::numeric_limits<double>::quiet_NaN();
        cs.dispersive_valid = false;
    }
    return out;
}

LjCalibration calibrate_lj(double f_q_target, const CapacitanceMatrix &caps, double f_r, const LomOptions &options,
                           double junction_capacitance, double bracket_low, double bracket_high, double tolerance) {
    if (!(bracket_low > 0.0) || !(bracket_high > bracket_low)) {
        throw DomainError("L_J bracket must satisfy 0 < low < high");
    }
    if (!(f_r > 0.0)) {
        throw DomainError("resonator frequency must be positive");
    }
    const CapacitanceMatrix reduced =
        caps.index_of(options.ground_label) ? caps.without(options.ground_label) : caps;
    const double c_q = reduced(options.qubit_label, options.qubit_label) + junction_capacitance;
    const double ec = ec_from_csigma(c_q);
    auto residual = [&](double lj) {
        const auto lv = transmon_levels(ej_from_lj(lj), ec, 2, options.charge_cutoff);
        return (lv[1] - lv[0]) - f_q_target;
    };

    double lo = bracket_low;
    double hi = bracket_high;
    double f_lo = residual(lo);
    double f_hi = residual(hi);
    if (f_lo * f_hi > 0.0) {
        throw NumericalError("target qubit frequency not bracketed by L_J in [" + std::to_string(lo * 1e9) + ", " +
                             std::to_string(hi * 1e9) + "] nH");
    }

    LjCalibration out;
    out.bracket_low = bracket_low;
    out.bracket_high = bracket_high;
    double x = 0.5 * (lo + hi);
    double fx = 0.0;
    constexpr int kMaxIterations = 200;
    for (int it = 1; it <= kMaxIterations; ++it) {
        // Secant through the bracket ends once it is narrow, bisection otherwise.
        const bool narrow = (hi - lo) < 1e-3 * hi;
        x = narrow ? lo - f_lo * (hi - lo) / (f_hi - f_lo) : 0.5 * (lo + hi);
        if (!(x > lo && x < hi)) {
            x = 0.5 * (lo + hi);
        }
        fx = residual(x);
        out.iterations = it;
        if (std::abs(fx) < tolerance) {
            break;
        }
        if ((fx < 0.0) == (f_lo < 0.0)) {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
            f_hi = fx;
        }
    }
    if (std::abs(fx) >= tolerance) {
        throw NumericalError("L_J calibration did not reach the frequency tolerance");
    }
    out.inductance = x;
    out.achieved_f_q = lom_analysis(caps, JosephsonElement::single(x, junction_capacitance), f_r, options).coupled.f_q;
    return out;
}

double elliptic_ratio(double k) {
    if (!(k > 0.0 && k < 1.0)) {
        throw DomainError("elliptic modulus must lie in (0, 1)");
    }
    const double kp = std::sqrt(1.0 - k * k);
    return std::comp_ellint_1(k) / std::comp_ellint_1(kp);
}

CpwLine cpw_line(double width, double gap, double eps_r) {
    if (!(width > 0.0) || !(gap > 0.0)) {
        throw DomainError("CPW width and gap must be positive");
    }
    if (!(eps_r >= 1.0)) {
        throw DomainError("relative permittivity must be at least 1");
    }
    const double k = width / (width + 2.0 * gap);
    const double eps_eff = 0.5 * (1.0 + eps_r);
    const double z0 = 30.0 * kPi / std::sqrt(eps_eff) / elliptic_ratio(k);
    return CpwLine{z0, eps_eff};
}

double quarter_wave_freq(double length, double eps_eff) {
    if (!(length > 0.0)) {
        throw DomainError("resonator length must be positive");
    }
    if (!(eps_eff >= 1.0)) {
        throw DomainError("effective permittivity must be at least 1");
    }
    return kSpeedOfLight / (4.0 * length * std::sqrt(eps_eff));
}

}  // namespace qtwin
