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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "qtwin/constants.hpp"
#include "qtwin/error.hpp"

using namespace qtwin;

namespace {

// (hbar / 2e)^2 / (h L) written from hbar and e, not from the flux quantum.
double ej_oracle(double inductance) {
    const double hbar = 6.62607015e-34 / (2.0 * M_PI);
    const double e = 1.602176634e-19;
    return hbar * hbar / (4.0 * e * e) / (6.62607015e-34 * inductance);
}

CapacitanceMatrix two_node(double c_q, double c_r, double c_qr) {
    Eigen::MatrixXd m(2, 2);
    m << c_q, -c_qr, -c_qr, c_r;
    return CapacitanceMatrix({"qubit", "coupler"}, m);
}

}  // namespace

TEST(circuit, ej_from_lj) {
    EXPECT_NEAR(ej_from_lj(7.31e-9), 22.361356e9, 1e3);
    EXPECT_NEAR(ej_from_lj(7.31e-9) / ej_oracle(7.31e-9), 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(ej_from_lj(2 * 9e-9), 0.5 * ej_from_lj(9e-9));
    EXPECT_NEAR(ej_from_lj(7e-9), 23.35e9, 0.01e9);
    EXPECT_NEAR(ej_from_lj(15e-9), 10.90e9, 0.01e9);
    const double ec = 194e6;
    for (double lj = 7e-9; lj <= 15e-9; lj += 0.5e-9) {
        EXPECT_GT(ej_from_lj(lj) / ec, 50.0);
    }
    EXPECT_NEAR(lj_from_ej(ej_from_lj(11e-9)), 11e-9, 1e-21);
    EXPECT_THROW(ej_from_lj(0.0), DomainError);
    EXPECT_THROW(ej_from_lj(-1e-9), DomainError);
}

TEST(circuit, ej_monotone_decreasing) {
    double prev = ej_from_lj(1e-9);
    for (double lj = 1.5e-9; lj < 50e-9; lj += 0.5e-9) {
        const double cur = ej_from_lj(lj);
        EXPECT_LT(cur, prev);
        prev = cur;
    }
}

TEST(circuit, ec_from_csigma) {
    EXPECT_NEAR(ec_from_csigma(100e-15), 193.70e6, 0.01e6);
    EXPECT_NEAR(ec_from_csigma(93e-15), 208.28e6, 0.01e6);
    EXPECT_DOUBLE_EQ(ec_from_csigma(200e-15), 0.5 * ec_from_csigma(100e-15));
    EXPECT_THROW(ec_from_csigma(0.0), DomainError);
    EXPECT_THROW(ec_from_csigma(-1e-15), DomainError);
}

TEST(circuit, transmon_spectrum_matches_bisection_oracle) {
    const double ej = 22.37e9;
    const double ec = 193.7e6;
    const auto s = transmon_spectrum(ej, ec, 4, 30);
    // Oracle works in GHz to keep the bisection well scaled.
    const auto ref = oracle::cpb_levels_bisection(ej / 1e9, ec / 1e9, 30, 4);
    for (int k = 0; k < 4; ++k) {
        EXPECT_NEAR(s.levels[k] / 1e9, ref[k], 1e-9) << "level " << k;
    }
    EXPECT_NEAR(s.f01(), 5.69e9, 0.01 * 5.69e9);
    EXPECT_NEAR(s.f01(), 5.686961e9, 1e3);
    EXPECT_LT(s.anharmonicity(), 0.0);
    EXPECT_NEAR(-s.anharmonicity(), ec, 0.15 * ec);
    for (std::size_t k = 1; k < s.levels.size(); ++k) {
        EXPECT_GE(s.levels[k], s.levels[k - 1]);
    }
}

TEST(circuit, transmon_charging_limit) {
    const double ec = 200e6;
    const auto lv = transmon_levels(0.0, ec, 5, 20);
    EXPECT_NEAR(lv[0], 0.0, 1e-3);
    EXPECT_NEAR(lv[1], 4 * ec, 1e-3);
    EXPECT_NEAR(lv[2], 4 * ec, 1e-3);
    EXPECT_NEAR(lv[3], 16 * ec, 1e-3);
    EXPECT_NEAR(lv[4], 16 * ec, 1e-3);
}

TEST(circuit, transmon_asymptotic_limit) {
    const double ec = 200e6;
    const double ej = 5000 * ec;
    const auto s = transmon_spectrum(ej, ec, 3, 40);
    const auto a = transmon_asymptotic(ej, ec);
    EXPECT_NEAR(s.f01() / a.f01, 1.0, 1e-3);
    EXPECT_DOUBLE_EQ(a.f01, std::sqrt(8 * ej * ec) - ec);
    EXPECT_DOUBLE_EQ(a.anharmonicity, -ec);
}

TEST(circuit, transmon_exact_vs_asymptotic_property) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ratio(50.0, 200.0);
    std::uniform_real_distribution<double> ec_dist(100e6, 400e6);
    for (int trial = 0; trial < 200; ++trial) {
        const double ec = ec_dist(rng);
        const double ej = ratio(rng) * ec;
        const double exact = transmon_spectrum(ej, ec).f01();
        const double approx = transmon_asymptotic(ej, ec).f01;
        ASSERT_LT(std::abs(exact - approx) / exact, 0.01) << "E_J/E_C = " << ej / ec;
    }
}

TEST(circuit, transmon_cutoff_convergence_property) {
    for (double r = 1.0; r <= 200.0; r += 7.0) {
        const double ec = 200e6;
        const auto a = transmon_levels(r * ec, ec, 2, 20);
        const auto b = transmon_levels(r * ec, ec, 2, 40);
        EXPECT_LT(std::abs((a[1] - a[0]) - (b[1] - b[0])) / (b[1] - b[0]), 1e-9) << "ratio " << r;
    }
}

TEST(circuit, transmon_spectrum_rejects_small_cutoff) {
    EXPECT_THROW(transmon_spectrum(20e9, 0.2e9, 3, 5), DomainError);
    // Cutoff 10 is far from converged at E_J/E_C = 5000.
    EXPECT_THROW(transmon_spectrum(1000e9, 0.2e9, 3, 10), NumericalError);
}

TEST(circuit, squid_ej) {
    EXPECT_DOUBLE_EQ(squid_ej(20e9, 0.0, 0.0), 20e9);
    EXPECT_NEAR(squid_ej(20e9, 0.0, 0.5), 0.0, 1e-3);
    EXPECT_NEAR(squid_ej(20e9, 0.3, 0.5), 0.3 * 20e9, 1e-3);
    EXPECT_THROW(squid_ej(20e9, 1.0, 0.1), DomainError);
    EXPECT_THROW(squid_ej(20e9, -0.1, 0.1), DomainError);
}

TEST(circuit, squid_ej_matches_tan_form) {
    for (double d : {0.0, 0.1, 0.5}) {
        for (double phi = -0.45; phi < 0.45; phi += 0.037) {
            const double t = std::tan(M_PI * phi);
            const double ref = 17e9 * std::abs(std::cos(M_PI * phi)) * std::sqrt(1 + d * d * t * t);
            EXPECT_NEAR(squid_ej(17e9, d, phi), ref, 1e-6 * ref);
        }
    }
}

TEST(circuit, squid_periodicity_and_symmetry_property) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> phi(-3.0, 3.0);
    std::uniform_real_distribution<double> d(0.0, 0.95);
    for (int i = 0; i < 500; ++i) {
        const double p = phi(rng);
        const double a = d(rng);
        const double v = squid_ej(15e9, a, p);
        EXPECT_NEAR(squid_ej(15e9, a, -p), v, 1e-6);
        EXPECT_NEAR(squid_ej(15e9, a, p + 1.0), v, 1e-6 * 15e9 * 1e-6);
        EXPECT_LE(v, 15e9 * (1 + 1e-15));
        EXPECT_GE(v, a * 15e9 * (1 - 1e-12));
    }
}

TEST(circuit, dispersive_shift_table_values) {
    const double chi0 = dispersive_shift(115e6, 5.6941e9 - 7.60728e9, -195.3e6);
    EXPECT_NEAR(std::abs(chi0), 646e3, 0.03 * 646e3);
    const double chi1 = dispersive_shift(105e6, 5.1990e9 - 7.448263e9, -199.1e6);
    EXPECT_NEAR(std::abs(chi1), 398e3, 0.03 * 398e3);
    // Below the resonator and outside the straddling regime the shift follows alpha.
    EXPECT_LT(chi0, 0.0);
    EXPECT_EQ(dispersive_shift(0.0, -1.9e9, -195e6), 0.0);
}

TEST(circuit, dispersive_shift_rejects_poles) {
    EXPECT_THROW(dispersive_shift(100e6, 0.5e6, -200e6), DomainError);
    EXPECT_THROW(dispersive_shift(100e6, 200.3e6, -200e6), DomainError);
    EXPECT_NO_THROW(dispersive_shift(100e6, 202e6, -200e6));
}

TEST(circuit, jc_eigenfrequencies) {
    auto p = jc_eigenfrequencies(5e9, 7e9, 0.0);
    EXPECT_DOUBLE_EQ(p.lower, 5e9);
    EXPECT_DOUBLE_EQ(p.upper, 7e9);
    p = jc_eigenfrequencies(7.2e9, 7.2e9, 68e6);
    EXPECT_NEAR(p.splitting(), 136e6, 1e-3);
    const double g = 50e6;
    const double delta = 20 * g;
    p = jc_eigenfrequencies(7e9 + delta, 7e9, g);
    const double pull = p.upper - (7e9 + delta);
    EXPECT_NEAR(pull / (g * g / delta), 1.0, 0.05);
    EXPECT_THROW(jc_eigenfrequencies(5e9, 7e9, -1.0), DomainError);
}

TEST(circuit, jc_minimum_splitting_is_two_g) {
    const double g = 68e6;
    double best = 1e300;
    double best_fq = 0.0;
    for (double fq = 6.9e9; fq <= 7.9e9; fq += 0.5e6) {
        const double s = jc_eigenfrequencies(fq, 7.4e9, g).splitting();
        if (s < best) {
            best = s;
            best_fq = fq;
        }
    }
    EXPECT_NEAR(best, 2 * g, 1e-3);
    EXPECT_NEAR(best_fq, 7.4e9, 1.0);
}

TEST(circuit, capacitance_matrix_validation) {
    Eigen::MatrixXd bad(2, 2);
    bad << 100e-15, 5e-15, 5e-15, 30e-15;
    EXPECT_THROW(CapacitanceMatrix({"qubit", "coupler"}, bad), InputError);
    bad << 100e-15, -5e-15, -6e-15, 30e-15;
    EXPECT_THROW(CapacitanceMatrix({"qubit", "coupler"}, bad), InputError);
    bad << 100e-15, -50e-15, -50e-15, 30e-15;
    EXPECT_THROW(CapacitanceMatrix({"qubit", "coupler"}, bad), InputError);
    bad << 100e-15, -5e-15, -5e-15, 30e-15;
    EXPECT_THROW(CapacitanceMatrix({"qubit", "qubit"}, bad), InputError);
    EXPECT_NO_THROW(CapacitanceMatrix({"qubit", "coupler"}, bad));
}

TEST(circuit, capacitance_csv) {
    std::istringstream in(
        "# QB toy\n"
        "node, ground, qubit, coupler\n"
        "ground, 200e-15, -95e-15, -20e-15\n"
        "qubit, -95e-15, 100e-15, -5e-15\n"
        "coupler, -20e-15, -5e-15, 25e-15\n");
    const auto c = CapacitanceMatrix::from_csv(in);
    EXPECT_EQ(c.size(), 3u);
    EXPECT_DOUBLE_EQ(c.mutual("qubit", "coupler"), 5e-15);
    const auto r = c.without("ground");
    EXPECT_EQ(r.labels(), (std::vector<std::string>{"qubit", "coupler"}));
    std::ostringstream out;
    r.write_csv(out);
    std::istringstream back(out.str());
    EXPECT_EQ(CapacitanceMatrix::from_csv(back).values(), r.values());

    std::istringstream ragged("node,a,b\na,1e-15\nb,0,1e-15\n");
    EXPECT_THROW(CapacitanceMatrix::from_csv(ragged), InputError);
    std::istringstream mislabelled("node,a,b\na,1e-15,0\nc,0,1e-15\n");
    EXPECT_THROW(CapacitanceMatrix::from_csv(mislabelled), InputError);
    EXPECT_THROW(CapacitanceMatrix::load_csv("/nonexistent/caps.csv"), InputError);
}

TEST(circuit, lom_decoupled_nodes_give_zero_g) {
    const auto caps = two_node(100e-15, 30e-15, 0.0);
    const auto r = lom_analysis(caps, JosephsonElement::single(10e-9), 7.5e9);
    EXPECT_EQ(r.coupled.g, 0.0);
    EXPECT_EQ(r.coupled.chi, 0.0);
}

TEST(circuit, lom_composes_spectrum) {
    // 98 fF Maxwell diagonal + 2 fF junction = 100 fF total.
    const auto caps = two_node(98e-15, 25e-15, 6e-15);
    const auto r = lom_analysis(caps, JosephsonElement::single(7.31e-9, 2e-15), 7.607e9);
    EXPECT_DOUBLE_EQ(r.qubit_capacitance, 100e-15);
    EXPECT_NEAR(r.coupled.f_q, 5.69e9, 0.01 * 5.69e9);
    const auto direct = transmon_params(ej_from_lj(7.31e-9), ec_from_csigma(100e-15));
    EXPECT_DOUBLE_EQ(r.transmon.f01, direct.f01);
    const double expected_g = 0.5 * std::sqrt(r.coupled.f_q * 7.607e9) * r.mutual_capacitance /
                              std::sqrt(r.qubit_capacitance * r.coupler_capacitance);
    EXPECT_DOUBLE_EQ(r.coupled.g, expected_g);
    EXPECT_DOUBLE_EQ(r.coupled.chi, dispersive_shift(r.coupled.g, r.coupled.detuning, r.transmon.anharmonicity));
    EXPECT_TRUE(r.coupled.dispersive_valid);
    // Resonator lumped load pi / (4 omega Z0).
    EXPECT_NEAR(r.coupler_capacitance - 25e-15, 1.0 / (8 * 7.607e9 * 50.0), 1e-22);
}

TEST(circuit, lom_homogeneity_property) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> s(0.2, 5.0);
    LomOptions opt;
    opt.include_resonator_capacitance = false;
    const auto caps = two_node(100e-15, 40e-15, 6e-15);
    const auto junction = JosephsonElement::single(9e-9, 0.0);
    const auto base = lom_analysis(caps, junction, 7.5e9, opt);
    for (int i = 0; i < 20; ++i) {
        const double f = s(rng);
        const auto scaled = lom_analysis(caps.scaled(f), junction, 7.5e9, opt);
        EXPECT_NEAR(scaled.transmon.ec, base.transmon.ec / f, 1e-9 * base.transmon.ec);
        EXPECT_NEAR(scaled.coupling_ratio, base.coupling_ratio, 1e-12);
    }
}

TEST(circuit, lom_errors) {
    const auto caps = two_node(100e-15, 30e-15, 5e-15);
    LomOptions opt;
    opt.coupler_label = "readout";
    EXPECT_THROW(lom_analysis(caps, JosephsonElement::single(10e-9), 7.5e9, opt), InputError);
    EXPECT_THROW(lom_analysis(caps, JosephsonElement::single(10e-9), 0.0), DomainError);
    LomOptions half;
    half.flux = 0.5;
    EXPECT_THROW(lom_analysis(caps, JosephsonElement::squid(20e9), 7.5e9, half), DomainError);
}

TEST(circuit, calibrate_lj) {
    const auto caps = two_node(98e-15, 25e-15, 6e-15);
    const auto cal = calibrate_lj(5.6941e9, caps, 7.60728e9);
    EXPECT_GT(cal.inductance, 7e-9);
    EXPECT_LT(cal.inductance, 8e-9);
    EXPECT_LT(std::abs(cal.achieved_f_q - 5.6941e9), 1e3);
    EXPECT_EQ(cal.bracket_low, 1e-9);
    EXPECT_EQ(cal.bracket_high, 50e-9);

    const double f10 = lom_analysis(caps, JosephsonElement::single(10e-9), 7.6e9).coupled.f_q;
    EXPECT_NEAR(calibrate_lj(f10, caps, 7.6e9).inductance, 10e-9, 1e-13);

    EXPECT_THROW(calibrate_lj(20e9, caps, 7.6e9), NumericalError);
}

TEST(circuit, cpw_line) {
    const auto line = cpw_line(15e-6, 9e-6, 11.65);
    EXPECT_NEAR(line.impedance, 50.0, 2.0);
    EXPECT_NEAR(line.impedance, 50.5332, 1e-3);
    EXPECT_NEAR(line.eps_eff, 6.325, 1e-12);
    EXPECT_DOUBLE_EQ(cpw_line(15e-6, 9e-6, 1.0).eps_eff, 1.0);
    double prev = 1e9;
    for (double w = 2e-6; w < 60e-6; w += 2e-6) {
        const double z = cpw_line(w, 9e-6, 11.65).impedance;
        EXPECT_LT(z, prev);
        prev = z;
    }
    EXPECT_THROW(cpw_line(0.0, 9e-6, 11.65), DomainError);
}

TEST(circuit, elliptic_ratio_matches_quadrature) {
    for (double k : {0.05, 0.2, 15.0 / 33.0, 0.7, 0.95}) {
        const double kp = std::sqrt(1 - k * k);
        const double ref = oracle::elliptic_k_quadrature(k) / oracle::elliptic_k_quadrature(kp);
        EXPECT_NEAR(elliptic_ratio(k), ref, 1e-8 * ref) << "k = " << k;
    }
}

TEST(circuit, quarter_wave_freq) {
    const double f = quarter_wave_freq(3.68e-3, 6.33);
    EXPECT_NEAR(f, 8.1e9, 0.05e9);
    EXPECT_GT(f, 7.579e9);
    EXPECT_DOUBLE_EQ(quarter_wave_freq(2 * 3.68e-3, 6.33), 0.5 * f);
    EXPECT_LT(quarter_wave_freq(3.77e-3, 6.33), f);
    EXPECT_THROW(quarter_wave_freq(0.0, 6.33), DomainError);
}
