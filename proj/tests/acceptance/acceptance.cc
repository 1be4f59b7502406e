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


// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <fmt/core.h>
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "qtwin/capacitance.hpp"
#include "qtwin/circuit.hpp"
#include "qtwin/constants.hpp"
#include "qtwin/experiments.hpp"
#include "qtwin/loss_budget.hpp"
#include "qtwin/qnd.hpp"
#include "qtwin/xsect.hpp"

namespace fs = std::filesystem;
using namespace qtwin;

namespace {

const fs::path kData = QTWIN_DATA_DIR;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string &what) {
        if (!ok) pass = false;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [FAILED]");
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool within_rel(double value, double target, double rel) { return std::abs(value - target) <= rel * std::abs(target); }

Outcome dispersive_shift_consistency() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const double chi0 = dispersive_shift(115e6, 5.6941e9 - 7.60728e9, -195.3e6);
    const double chi1 = dispersive_shift(105e6, 5.1990e9 - 7.448263e9, -199.1e6);
    const double dt = seconds_since(t0);
    o.require(within_rel(std::abs(chi0), 646e3, 0.03), fmt::format("QB-0 |chi| = {:.1f} kHz (646 +- 3%)", std::abs(chi0) / 1e3));
    o.require(within_rel(std::abs(chi1), 398e3, 0.03), fmt::format("QB-1 |chi| = {:.1f} kHz (398 +- 3%)", std::abs(chi1) / 1e3));
    o.require(dt < 1e-3, fmt::format("{:.1e} s < 1 ms", dt));
    return o;
}

Outcome charging_energy_link() {
    Outcome o;
    const double ec = ec_from_csigma(100e-15);
    const double closed = kElementaryCharge * kElementaryCharge / (2.0 * 100e-15 * kPlanck);
    o.require(std::abs(ec - 193.7e6) < 0.05e6 && within_rel(ec, closed, 1e-12),
              fmt::format("E_C = {:.2f} MHz (193.7)", ec / 1e6));
    o.require(within_rel(ec, 198.6e6, 0.05), fmt::format("{:.2f}% from |alpha| = 198.6 MHz", 100 * std::abs(ec / 198.6e6 - 1)));
    return o;
}

Outcome lj_calibration() {
    Outcome o;
    const auto caps = CapacitanceMatrix::load_csv(kData / "qb0/capacitance.csv");
    const LjCalibration cal = calibrate_lj(5.6941e9, caps, 7.60728e9);
    const LomResult lom = lom_analysis(caps, JosephsonElement::single(cal.inductance), 7.60728e9);
    o.require(std::abs(lom.qubit_capacitance - 100e-15) < 3e-15,
              fmt::format("C_Sigma = {:.1f} fF", lom.qubit_capacitance * 1e15));
    o.require(std::abs(cal.achieved_f_q - 5.6941e9) < 1e3, fmt::format("f_q = {:.6f} GHz", cal.achieved_f_q / 1e9));
    o.require(cal.inductance >= 7e-9 && cal.inductance <= 8e-9,
              fmt::format("L_J = {:.3f} nH in [7, 8], inside [7, 15]", cal.inductance * 1e9));
    return o;
}

Outcome cpw_impedance() {
    Outcome o;
    const CpwLine line = cpw_line(15e-6, 9e-6, 11.65);
    const double k = 15.0 / 33.0;
    const double kp = std::sqrt(1.0 - k * k);
    const double ref = 30.0 * kPi / std::sqrt((1.0 + 11.65) / 2.0) * oracle::elliptic_k_quadrature(kp) /
                       oracle::elliptic_k_quadrature(k);
    o.require(std::abs(line.impedance - 50.0) <= 2.0, fmt::format("Z0 = {:.3f} Ohm (50 +- 2)", line.impedance));
    o.require(within_rel(line.impedance, ref, 1e-9), fmt::format("quadrature oracle {:.3f} Ohm", ref));
    return o;
}

Outcome tls_arithmetic() {
    Outcome o;
    const double hybrid = t1_tls(7.81e5, 5.77e9);
    const double full3d = t1_tls(2.62e6, 5.77e9);
    o.require(within_rel(hybrid, 22e-6, 0.10), fmt::format("Q 7.81e5 -> {:.2f} us (22 +- 10%)", hybrid * 1e6));
    o.require(within_rel(full3d, 73e-6, 0.10), fmt::format("Q 2.62e6 -> {:.2f} us (73 +- 10%)", full3d * 1e6));
    o.require(within_rel(hybrid, 7.81e5 / (2 * kPi * 5.77e9), 1e-12), "T1 = Q / omega_q");
    return o;
}

Outcome t1_budget_check() {
    Outcome o;
    BudgetInputs qb0;
    qb0.f_q = 5.6941e9;
    qb0.q_tls = 7.81e5;
    qb0.g = 115e6;
    qb0.f_r = 7.57905e9;
    qb0.q_i = 15.3e3;
    qb0.q_c = 4.28e3;
    BudgetInputs qb1;
    qb1.f_q = 5.1990e9;
    qb1.q_tls = 7.81e5;
    qb1.g = 105e6;
    qb1.f_r = 7.419143e9;
    qb1.q_i = 7.62e3;
    qb1.q_c = 7.30e3;
    const LossBudget b0 = t1_budget(qb0);
    const LossBudget b1 = t1_budget(qb1);
    o.require(b0.t1_total >= 9e-6 && b0.t1_total <= 13e-6, fmt::format("QB-0 T1 = {:.2f} us in [9, 13]", b0.t1_total * 1e6));
    o.require(b1.t1_total <= 18e-6, fmt::format("QB-1 T1 = {:.2f} us <= 18", b1.t1_total * 1e6));
    return o;
}

Outcome hybrid_direction() {
    Outcome o;
    const auto table = load_participation_table((kData / "surface_participation.csv").string());
    const InterfaceEpr &ref = table.at("3d_only");
    for (const char *col : {"hybrid_mer", "hybrid_mer_coupler"}) {
        const InterfaceEpr &h = table.at(col);
        o.require(h.ma > ref.ma && h.ms > ref.ms && h.sa > ref.sa, fmt::format("{}: MA, MS, SA all above 3D", col));
        std::mt19937_64 rng(2026);
        std::uniform_real_distribution<double> u(0.0, 1e-2);
        bool ordered = true;
        for (int trial = 0; trial < 10000; ++trial) {
            std::map<InterfaceKind, double> tan;
            tan[InterfaceKind::MA] = trial % 4 == 1 ? 0.0 : u(rng);
            tan[InterfaceKind::MS] = trial % 4 == 2 ? 0.0 : u(rng);
            tan[InterfaceKind::SA] = trial % 4 == 3 ? 0.0 : u(rng);
            const auto ch = surface_channels(h, tan);
            const auto cr = surface_channels(ref, tan);
            if (!(q_tls(ch).q() < q_tls(cr).q())) ordered = false;
        }
        o.require(ordered, fmt::format("{}: Q_TLS below 3D for 10000 random loss tangent sets", col));
    }
    return o;
}

Outcome xsect_solver() {
    Outcome o;
    SolverOptions converged;
    converged.resolution = 128;
    {
        const double width = 100e-6, sep = 10e-6;
        const auto geom = CrossSectionGeometry::parallel_plate(width, sep, 11.65);
        const double energy = solve_potential(geom, converged).energy_total();
        const double expected = 0.5 * kVacuumPermittivity * 11.65 * width / sep;
        o.require(within_rel(energy, expected, 0.01), fmt::format("parallel plate {:.2e} rel", energy / expected - 1));
    }
    {
        const double sep = 10e-6;
        const InterfaceLayer film{InterfaceKind::MS, 0.3e-9, 11.4};
        const auto geom = CrossSectionGeometry::parallel_plate(100e-6, sep, 11.65, {film});
        const double ms = interface_participation(solve_potential(geom, converged)).ms;
        const double expected = film.thickness / sep * 11.65 / film.permittivity;
        o.require(within_rel(ms, expected, 0.01), fmt::format("thin film {:.2e} rel", ms / expected - 1));
    }
    const auto t0 = std::chrono::steady_clock::now();
    const FieldSolution sol = solve_potential(CrossSectionGeometry::cpw(30e-6, 14e-6, 11.65), converged);
    const InterfaceEpr cpw = interface_participation(sol);
    const double dt = seconds_since(t0);
    const std::vector<std::tuple<const char *, double, double>> ifaces = {
        {"MA", cpw.ma, 8.93e-5}, {"MS", cpw.ms, 4.80e-5}, {"SA", cpw.sa, 1.59e-4}};
    for (const auto &[name, got, ref] : ifaces) {
        const double factor = std::max(got / ref, ref / got);
        o.require(factor <= 5.0, fmt::format("CPW {} {:.2e} vs {:.2e} (x{:.1f})", name, got, ref, factor));
    }
    o.require(sol.node_count() >= 512u * 512u && dt < 60.0,
              fmt::format("{}x{} nodes in {:.1f} s", sol.x.size(), sol.y.size(), dt));
    return o;
}

Outcome transmon_property() {
    Outcome o;
    const double ec = 200e6;
    double worst = 0.0, worst_cut = 0.0, worst_oracle = 0.0;
    for (double ratio = 50.0; ratio <= 200.0 + 1e-9; ratio += 5.0) {
        const double ej = ratio * ec;
        const auto exact = transmon_levels(ej, ec, 2, 20);
        const auto fine = transmon_levels(ej, ec, 2, 40);
        const double f01 = exact[1] - exact[0];
        const double f01_fine = fine[1] - fine[0];
        const auto ref = oracle::cpb_levels_bisection(ej, ec, 40, 2);
        worst = std::max(worst, std::abs(transmon_asymptotic(ej, ec).f01 / f01 - 1.0));
        worst_cut = std::max(worst_cut, std::abs(f01 / f01_fine - 1.0));
        worst_oracle = std::max(worst_oracle, std::abs(f01_fine / (ref[1] - ref[0]) - 1.0));
    }
    o.require(worst < 0.01, fmt::format("asymptotic f01 within {:.3f}% for E_J/E_C in [50, 200]", 100 * worst));
    o.require(worst_cut < 1e-9, fmt::format("cutoff 20 vs 40: {:.1e} rel", worst_cut));
    o.require(worst_oracle < 1e-9, fmt::format("bisection oracle {:.1e} rel", worst_oracle));
    return o;
}

Outcome qnd_dark_counts() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const QubitNoise noise = QubitNoise::symmetric(0.1);
    StorageCavity cavity;
    QndProtocol p;
    p.xi = 350e3;
    p.rule = DecisionRule::majority;
    p.n_repeats = 5;
    const DetectionStats five = dark_count_rate(p, cavity, noise, 100000, 1);
    const double exact = oracle::binomial_upper_tail(5, 3, 0.1);
    const double sigma = std::sqrt(exact * (1 - exact) / 100000.0);
    o.require(std::abs(exact - 0.00856) < 5e-6, fmt::format("exact {:.5f}", exact));
    o.require(std::abs(five.estimate - exact) <= 3 * sigma,
              fmt::format("N=5 estimate {:.5f} ({:+.2f} sigma)", five.estimate, (five.estimate - exact) / sigma));
    std::vector<double> rates;
    for (int n : {1, 3, 5, 7}) {
        p.n_repeats = n;
        rates.push_back(dark_count_rate(p, cavity, noise, 100000, 1).estimate);
    }
    bool decreasing = true;
    for (std::size_t k = 1; k < rates.size(); ++k) decreasing = decreasing && rates[k] < rates[k - 1];
    o.require(decreasing, fmt::format("N=1,3,5,7: {:.4f} {:.4f} {:.4f} {:.4f}", rates[0], rates[1], rates[2], rates[3]));
    const double dt = seconds_since(t0);
    o.require(dt < 10.0, fmt::format("{:.2f} s < 10 s", dt));
    return o;
}

Outcome ghz_scaling() {
    Outcome o;
    const double xi = 350e3;
    const double base = pi_phase_time(xi, 1);
    bool exact = std::abs(base - 1.0 / (4.0 * xi)) <= 1e-15 * base;
    for (int m : {1, 2, 3}) {
        const double t = pi_phase_time(xi, m);
        exact = exact && std::abs(t * m / base - 1.0) <= 4 * std::numeric_limits<double>::epsilon();
        QndProtocol p;
        p.xi = xi;
        p.m = m;
        p.t_parity = t;
        exact = exact && std::abs(parity_phase(1, p) / kPi - 1.0) <= 4 * std::numeric_limits<double>::epsilon();
    }
    o.require(exact, fmt::format("t_pi(m) m = t_pi(1) = {:.2f} ns for m = 1, 2, 3", base * 1e9));
    return o;
}

// |S21| at resonance normalised by the off-resonant level.
double notch_dip(double q_l, double q_c, double phi) { return std::abs(1.0 - q_l / q_c * std::exp(std::complex<double>(0, phi))); }

Outcome fit_round_trips() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    for (ExperimentKind kind : {ExperimentKind::notch, ExperimentKind::two_tone, ExperimentKind::flux_map,
                                ExperimentKind::chevron, ExperimentKind::t1, ExperimentKind::ramsey,
                                ExperimentKind::echo}) {
        const Scenario s = default_scenario(kind);
        const RoundTripSummary r = round_trip(s, 100, 20260101, 3.0);
        o.require(r.recovered >= 95, fmt::format("{} {}/100", to_string(kind), r.recovered));
    }

    // QB-0 resonator.
    const double q_i = 15.3e3, q_c = 4.28e3;
    const double derived = 1.0 - (1.0 / (1.0 / q_i + 1.0 / q_c)) / q_c;
    o.require(std::abs(derived - 0.219) < 5e-4, fmt::format("closed-form dip {:.4f}", derived));
    Scenario s = default_scenario(ExperimentKind::notch);
    const NotchParams p = NotchParams::from_quality(7.57905e9, q_i, q_c);
    s.set_parameter("f_r", p.f_r);
    s.set_parameter("q_l", p.q_l);
    s.set_parameter("q_c", p.q_c);
    s.set_parameter("phi", 0.0);
    const double kappa = p.f_r / p.q_l;
    s.axis.clear();
    for (int i = 0; i < 801; ++i) s.axis.push_back(p.f_r - 5 * kappa + 10 * kappa * i / 800.0);
    const ExperimentFit fit = fit_resonator(synthesize(s, 20260102), s.settings);
    const std::size_t il = fit.fit.index("q_l"), ic = fit.fit.index("q_c"), ip = fit.fit.index("phi");
    const std::vector<double> &v = fit.fit.values;
    const double dip = notch_dip(v[il], v[ic], v[ip]);
    Eigen::Vector3d grad;
    const std::size_t idx[3] = {il, ic, ip};
    for (int k = 0; k < 3; ++k) {
        std::vector<double> hi = v, lo = v;
        const double h = 1e-6 * std::max(std::abs(v[idx[k]]), 1e-3);
        hi[idx[k]] += h;
        lo[idx[k]] -= h;
        grad[k] = (notch_dip(hi[il], hi[ic], hi[ip]) - notch_dip(lo[il], lo[ic], lo[ip])) / (2 * h);
    }
    Eigen::Matrix3d cov;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) cov(a, b) = fit.fit.covariance(idx[a], idx[b]);
    const double sigma = std::sqrt(grad.dot(cov * grad));
    o.require(std::abs(dip - 0.219) <= 3 * sigma + 5e-4,
              fmt::format("QB-0 notch fit dip {:.4f} +- {:.4f} (0.219)", dip, sigma));
    const double dt = seconds_since(t0);
    o.require(dt < 300.0, fmt::format("{:.0f} s < 300 s", dt));
    return o;
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome cli_determinism() {
    Outcome o;
    const fs::path root = fs::temp_directory_path() / "qtwin_acceptance_cli";
    fs::remove_all(root);
    const fs::path cfg = kData / "configs";
    const std::vector<std::pair<std::string, std::string>> runs = {
        {"quantize", "qb0_quantize.json"}, {"epr", "qb1_epr_compare.json"}, {"xsect", "xsect_cpw.json"},
        {"budget", "budget_qb0_table.json"}, {"qnd", "qnd_majority.json"}, {"synth", "synth_t1.json"},
        {"fit", "fit_notch.json"},         {"report", "report_summary.json"}};
    for (const auto &[cmd, file] : runs) {
        std::map<std::string, std::string> first;
        bool ok = true;
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path out = root / (cmd + std::to_string(rep));
            const std::string line = fmt::format("\"{}\" {} --config \"{}\" --out \"{}\" > /dev/null 2>&1", QTWIN_CLI,
                                                 cmd, (cfg / file).string(), out.string());
            const int status = std::system(line.c_str());
            if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
                ok = false;
                break;
            }
            std::map<std::string, std::string> files;
            for (const auto &e : fs::directory_iterator(out)) files[e.path().filename().string()] = slurp(e.path());
            if (rep == 0)
                first = files;
            else
                ok = files == first && files.size() >= 2;
        }
        o.require(ok, cmd);
    }
    fs::remove_all(root);
    o.detail = "byte-identical repeats: " + o.detail;
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char *, std::function<Outcome()>>> criteria = {
        {"dispersive-shift consistency", dispersive_shift_consistency},
        {"charging energy and anharmonicity", charging_energy_link},
        {"L_J calibration", lj_calibration},
        {"CPW impedance", cpw_impedance},
        {"TLS arithmetic", tls_arithmetic},
        {"T1 budget", t1_budget_check},
        {"hybrid vs 3D participation", hybrid_direction},
        {"cross-section solver", xsect_solver},
        {"transmon solver", transmon_property},
        {"QND dark counts", qnd_dark_counts},
        {"GHZ scaling", ghz_scaling},
        {"fit round trips", fit_round_trips},
        {"CLI determinism", cli_determinism},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception &e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        if (!o.pass) ++failures;
        fmt::print("{} {:2d} {}: {}\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail);
        std::fflush(stdout);
    }
    fmt::print("{} of {} criteria passed\n", criteria.size() - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
