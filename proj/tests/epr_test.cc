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

#include <gtest/gtest.h>

#include <random>
#include <sstream>
#include <vector>

#include "qtwin/circuit.hpp"
#include "qtwin/error.hpp"

using namespace qtwin;

namespace {

ModeSystem two_mode() {
    return ModeSystem{{{"qubit", 5.77e9, 0.98}, {"readout", 7.58e9, 0.008}}, 22.4e9};
}

CapacitanceMatrix qb1_like_caps() {
    Eigen::MatrixXd m(2, 2);
    m << 93e-15, -6.25e-15, -6.25e-15, 26.25e-15;
    return CapacitanceMatrix({"qubit", "coupler"}, m);
}

}  // namespace

TEST(epr, single_mode_anharmonicity_is_ec) {
    const double ej = 20e9;
    const double ec = 0.2e9;
    const ModeSystem ms{{{"q", std::sqrt(8 * ej * ec), 1.0}}, ej};
    const auto km = kerr_matrix(ms);
    EXPECT_NEAR(km.chi(0, 0) / 2, ec, 1e-15 * ec * 8);
    EXPECT_NEAR(km.anharmonicity(0), -ec, 1e-6);
}

TEST(epr, zero_participation_row_vanishes) {
    ModeSystem ms = two_mode();
    ms.modes.push_back({"spur", 9e9, 0.0});
    const auto km = kerr_matrix(ms);
    for (int n = 0; n < 3; ++n) {
        EXPECT_EQ(km.chi(2, n), 0.0);
        EXPECT_EQ(km.chi(n, 2), 0.0);
    }
    EXPECT_EQ(km.f_dressed(2), 9e9 - 0.0);
}

TEST(epr, two_mode_hand_arithmetic) {
    const auto km = kerr_matrix(two_mode());
    // chi_nm = f_n f_m p_n p_m / (4 E_J), each entry evaluated by hand.
    const double chi_qq = 5.77e9 * 5.77e9 * 0.98 * 0.98 / (4 * 22.4e9);
    const double chi_rr = 7.58e9 * 7.58e9 * 0.008 * 0.008 / (4 * 22.4e9);
    const double chi_qr = 5.77e9 * 7.58e9 * 0.98 * 0.008 / (4 * 22.4e9);
    EXPECT_NEAR(chi_qq, 356.858e6, 1e3);
    EXPECT_NEAR(chi_qr, 3.82695e6, 1e2);
    EXPECT_NEAR(chi_rr, 41.04e3, 10);
    EXPECT_DOUBLE_EQ(km.chi(0, 0), chi_qq);
    EXPECT_DOUBLE_EQ(km.chi(1, 1), chi_rr);
    EXPECT_DOUBLE_EQ(km.chi(0, 1), chi_qr);
    EXPECT_EQ(km.chi(0, 1), km.chi(1, 0));
    EXPECT_DOUBLE_EQ(km.anharmonicity(0), -chi_qq / 2);

    // Readout correction: -alpha_r - chi_qr / 2.
    EXPECT_NEAR(km.f_dressed(1) - 7.58e9, -chi_rr / 2 - chi_qr / 2, 1e-3);
    EXPECT_NEAR(km.f_dressed(0) - 5.77e9, -chi_qq / 2 - chi_qr / 2, 1e-3);
    EXPECT_LT(km.f_dressed(0), 5.77e9);
}

TEST(epr, dressed_frequencies) {
    ModeSystem ms{{{"q", 6e9, 0.0}, {"r", 7e9, 0.0}}, 20e9};
    auto km = kerr_matrix(ms);
    EXPECT_EQ(km.f_dressed(0), 6e9);
    EXPECT_EQ(km.f_dressed(1), 7e9);

    // Lone mode whose alpha is 195 MHz.
    const double ej = 20e9;
    const double f = std::sqrt(4 * ej * 2 * 195e6);
    ms = ModeSystem{{{"q", f, 1.0}}, ej};
    km = kerr_matrix(ms);
    EXPECT_NEAR(km.f_dressed(0), f - 195e6, 1e-3);
}

TEST(epr, symmetry_and_bilinearity_property) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> p(0.0, 0.2);
    std::uniform_real_distribution<double> f(3e9, 9e9);
    std::uniform_real_distribution<double> s(0.1, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        ModeSystem ms;
        ms.ej = 15e9;
        for (int m = 0; m < 3; ++m) {
            ms.modes.push_back({"m" + std::to_string(m), f(rng), p(rng)});
        }
        const auto km = kerr_matrix(ms);
        EXPECT_EQ(km.chi, km.chi.transpose());
        EXPECT_GE(km.chi.minCoeff(), 0.0);

        const double scale = s(rng);
        ModeSystem scaled = ms;
        scaled.modes[1].participation = std::min(1.0, ms.modes[1].participation * scale);
        const double applied = scaled.modes[1].participation / ms.modes[1].participation;
        const auto ks = kerr_matrix(scaled);
        EXPECT_NEAR(ks.chi(1, 0), applied * km.chi(1, 0), 1e-9 * km.chi(1, 0) + 1e-6);
        EXPECT_NEAR(ks.chi(1, 1), applied * applied * km.chi(1, 1), 1e-9 * km.chi(1, 1) + 1e-6);
        EXPECT_DOUBLE_EQ(ks.chi(0, 2), km.chi(0, 2));

        ModeSystem stiffer = ms;
        stiffer.ej *= 2;
        EXPECT_TRUE(kerr_matrix(stiffer).chi.isApprox(0.5 * km.chi, 1e-14));
    }
}

TEST(epr, consistency_with_transmon_spectrum_property) {
    for (double ratio = 50.0; ratio <= 200.0; ratio += 10.0) {
        const double ec = 0.2e9;
        const double ej = ratio * ec;
        const ModeSystem ms{{{"q", std::sqrt(8 * ej * ec), 1.0}}, ej};
        const auto km = kerr_matrix(ms);
        EXPECT_NEAR(-km.anharmonicity(0), ec, 1e-6);
        const double exact = transmon_spectrum(ej, ec).anharmonicity();
        EXPECT_NEAR(km.anharmonicity(0), exact, 0.15 * std::abs(exact));
    }
}

TEST(epr, validation) {
    ModeSystem ms = two_mode();
    ms.modes[0].participation = 1.2;
    EXPECT_THROW(kerr_matrix(ms), DomainError);
    ms = two_mode();
    ms.modes[1].participation = -0.1;
    EXPECT_THROW(kerr_matrix(ms), DomainError);
    ms = two_mode();
    ms.ej = 0.0;
    EXPECT_THROW(kerr_matrix(ms), DomainError);
    EXPECT_THROW(kerr_matrix(ModeSystem{{}, 20e9}), DomainError);
    ms = ModeSystem{{{"a", 5e9, 0.7}, {"b", 6e9, 0.7}}, 20e9};
    EXPECT_THROW(kerr_matrix(ms), DomainError);
}

TEST(epr, mode_csv) {
    std::istringstream in("ej_hz,22.4e9\nlabel,f_lin_hz,participation\nqubit,5.77e9,0.98\nreadout,7.58e9,0.008\n");
    const auto ms = ModeSystem::from_csv(in);
    ASSERT_EQ(ms.modes.size(), 2u);
    EXPECT_EQ(ms.modes[1].label, "readout");
    EXPECT_DOUBLE_EQ(ms.ej, 22.4e9);
    std::istringstream no_ej("label,f_lin_hz,participation\nqubit,5.77e9,0.98\nx,1,0\n");
    EXPECT_THROW(ModeSystem::from_csv(no_ej), InputError);
    std::istringstream bad_p("ej_hz,22.4e9\nlabel,f_lin_hz,participation\nqubit,5.77e9,1.5\n");
    EXPECT_THROW(ModeSystem::from_csv(bad_p), DomainError);
}

TEST(epr, linear_modes_uncoupled) {
    const double c = 100e-15;
    const double lj = 10e-9;
    const auto ms = linear_mode_system(c, 350e-15, 0.0, lj, 1.3e-9);
    EXPECT_NEAR(ms.modes[0].participation, 1.0, 1e-12);
    EXPECT_NEAR(ms.modes[1].participation, 0.0, 1e-12);
    // hbar omega = sqrt(8 E_J E_C) for the linearized junction.
    const double expected = std::sqrt(8 * ej_from_lj(lj) * ec_from_csigma(c));
    EXPECT_NEAR(ms.modes[0].f_lin / expected, 1.0, 1e-12);
}

TEST(epr, epr_vs_lom_zero_coupling) {
    Eigen::MatrixXd m(2, 2);
    m << 93e-15, 0.0, 0.0, 26e-15;
    const CapacitanceMatrix caps({"qubit", "coupler"}, m);
    const auto junction = JosephsonElement::squid(20e9);
    const std::vector<double> fluxes{0.0, 0.2, 0.4};
    const auto report = epr_vs_lom_report(caps, junction, 7.45e9, fluxes);
    ASSERT_EQ(report.rows.size(), 3u);
    for (const auto &row : report.rows) {
        // Without coupling the two routes differ only by the transmon model:
        // exact diagonalization versus first-order sqrt(8 E_J E_C) - E_C.
        const double ej = squid_ej(20e9, 0.0, row.flux);
        const double ec = ec_from_csigma(95e-15);
        const double gap = transmon_spectrum(ej, ec).f01() - transmon_asymptotic(ej, ec).f01;
        EXPECT_NEAR(row.f_q_lom - row.f_q_epr, gap, 1e-6 * row.f_q_lom);
        EXPECT_NEAR(row.f_r_epr, row.f_r_lom, 1e-6 * row.f_r_lom);
    }
}

TEST(epr, epr_vs_lom_agreement_over_flux) {
    const auto junction = JosephsonElement::squid(19.9e9);
    std::vector<double> fluxes;
    for (int i = 0; i <= 45; ++i) {
        fluxes.push_back(0.01 * i);
    }
    const auto report = epr_vs_lom_report(qb1_like_caps(), junction, 7.448263e9, fluxes);
    EXPECT_LT(report.max_relative_difference, 0.02);
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        EXPECT_LT(report.rows[i].f_q_lom, report.rows[i - 1].f_q_lom);
    }
}

TEST(epr, epr_vs_lom_rejects_half_flux) {
    const std::vector<double> fluxes{0.0, 0.5};
    EXPECT_THROW(epr_vs_lom_report(qb1_like_caps(), JosephsonElement::squid(19.9e9), 7.45e9, fluxes),
                 DomainError);
}
