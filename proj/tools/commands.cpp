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


#include "commands.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "qtwin/capacitance.hpp"
#include "qtwin/circuit.hpp"
#include "qtwin/epr.hpp"
#include "qtwin/error.hpp"
#include "qtwin/experiments.hpp"
#include "qtwin/io.hpp"
#include "qtwin/loss_budget.hpp"
#include "qtwin/qnd.hpp"
#include "qtwin/report.hpp"
#include "qtwin/xsect.hpp"

namespace qtwin::cli {

namespace {

using nlohmann::json;

json num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

std::string dump(const json &j) { return j.dump(2) + "\n"; }

std::string scalar_text(const json &v) {
    if (v.is_number_float()) return format_double(v.get<double>());
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

// Nested record flattened to key,value rows with dotted keys.
void flatten(const json &j, const std::string &prefix, std::ostringstream &out) {
    if (j.is_object()) {
        for (const auto &[k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "." + std::to_string(i), out);
    } else {
        out << prefix << ',' << scalar_text(j) << '\n';
    }
}

std::string flat_csv(const json &j) {
    std::ostringstream out;
    out << "key,value\n";
    flatten(j, "", out);
    return out.str();
}

OutputFile record(const std::string &stem, const json &j, Format format) {
    if (format == Format::csv) return {stem + ".csv", flat_csv(j)};
    return {stem + ".json", dump(j)};
}

std::uint64_t resolve_seed(Config &cfg, const Overrides &o) {
    if (o.seed) {
        cfg.set_resolved("seed", *o.seed);
        return *o.seed;
    }
    const long s = cfg.integer("seed", 1);
    if (s < 0) throw ConfigError("config key 'seed' must be nonnegative");
    return static_cast<std::uint64_t>(s);
}

long resolve_trials(Config &cfg, const Overrides &o, long fallback) {
    long t = fallback;
    if (o.trials) {
        t = *o.trials;
        cfg.set_resolved("trials", t);
    } else {
        t = cfg.integer("trials", fallback);
    }
    if (t < 1) throw ConfigError("trials must be positive");
    return t;
}

// ---------------------------------------------------------------- circuit

JosephsonElement parse_junction(Config &c) {
    const std::string kind = c.string("kind", "single");
    const double cj = c.number("capacitance", 2e-15);
    JosephsonElement j;
    if (kind == "single") {
        j = JosephsonElement::single(c.number("inductance"), cj);
    } else if (kind == "squid") {
        j = JosephsonElement::squid(c.number("ej_max"), c.number("asymmetry", 0.0), cj);
    } else {
        throw ConfigError("junction.kind must be 'single' or 'squid'");
    }
    j.validate();
    return j;
}

LomOptions parse_lom(Config &c) {
    LomOptions o;
    o.qubit_label = c.string("qubit_label", o.qubit_label);
    o.coupler_label = c.string("coupler_label", o.coupler_label);
    o.ground_label = c.string("ground_label", o.ground_label);
    o.flux = c.number("flux", o.flux);
    o.include_resonator_capacitance = c.boolean("include_resonator_capacitance", o.include_resonator_capacitance);
    o.resonator_impedance = c.number("resonator_impedance", o.resonator_impedance);
    o.charge_cutoff = static_cast<int>(c.integer("charge_cutoff", o.charge_cutoff));
    return o;
}

json lom_json(const LomResult &r) {
    return {
        {"transmon",
         {{"ej_hz", r.transmon.ej},
          {"ec_hz", r.transmon.ec},
          {"f01_hz", r.transmon.f01},
          {"anharmonicity_hz", r.transmon.anharmonicity},
          {"ej_over_ec", r.transmon.ej_over_ec()}}},
        {"coupled",
         {{"f_q_hz", r.coupled.f_q},
          {"f_r_hz", r.coupled.f_r},
          {"g_hz", r.coupled.g},
          {"detuning_hz", r.coupled.detuning},
          {"chi_hz", r.coupled.chi},
          {"dispersive_valid", r.coupled.dispersive_valid}}},
        {"capacitance",
         {{"qubit_f", r.qubit_capacitance},
          {"coupler_f", r.coupler_capacitance},
          {"mutual_f", r.mutual_capacitance},
          {"coupling_ratio", r.coupling_ratio}}},
    };
}

Job prepare_quantize(Config &cfg, const Overrides &o) {
    const auto caps = CapacitanceMatrix::load_csv(cfg.path("capacitance"));
    const double f_r = cfg.number("f_r");
    const LomOptions lom = parse_lom(cfg);
    std::optional<JosephsonElement> junction;
    struct Calibration {
        double target, cj, low, high, tol;
    };
    std::optional<Calibration> cal;
    if (cfg.has("calibrate_lj")) {
        auto &c = cfg.child("calibrate_lj");
        cal = Calibration{c.number("target_f_q"), c.number("junction_capacitance", 2e-15),
                          c.number("bracket_low", 1e-9), c.number("bracket_high", 50e-9), c.number("tolerance", 1e3)};
    } else {
        junction = parse_junction(cfg.child("junction"));
    }
    struct Cpw {
        double width, gap, eps;
    };
    std::optional<Cpw> cpw;
    if (cfg.has("cpw")) {
        auto &c = cfg.child("cpw");
        cpw = Cpw{c.number("width"), c.number("gap"), c.number("eps_r")};
    }
    return [=, format = o.format]() -> std::vector<OutputFile> {
        json out;
        JosephsonElement j;
        if (cal) {
            const LjCalibration r = calibrate_lj(cal->target, caps, f_r, lom, cal->cj, cal->low, cal->high, cal->tol);
            out["calibration"] = {{"target_f_q_hz", cal->target},
                                  {"inductance_h", r.inductance},
                                  {"achieved_f_q_hz", r.achieved_f_q},
                                  {"iterations", r.iterations}};
            j = JosephsonElement::single(r.inductance, cal->cj);
        } else {
            j = *junction;
        }
        const LomResult r = lom_analysis(caps, j, f_r, lom);
        const json l = lom_json(r);
        for (const auto &[k, v] : l.items()) out[k] = v;
        out["junction"] = {{"kind", j.kind == JunctionKind::Single ? "single" : "squid"},
                           {"ej_hz", j.josephson_energy(lom.flux)},
                           {"inductance_h", lj_from_ej(j.josephson_energy(lom.flux))}};
        if (cpw) {
            const CpwLine line = cpw_line(cpw->width, cpw->gap, cpw->eps);
            out["cpw"] = {{"impedance_ohm", line.impedance}, {"eps_eff", line.eps_eff}};
        }
        return {record("quantize", out, format)};
    };
}

// -------------------------------------------------------------------- epr

json kerr_json(const ModeSystem &ms, const KerrMatrix &km) {
    json modes = json::array();
    for (std::size_t m = 0; m < ms.modes.size(); ++m) {
        const auto i = static_cast<Eigen::Index>(m);
        modes.push_back({{"label", ms.modes[m].label},
                         {"f_lin_hz", ms.modes[m].f_lin},
                         {"participation", ms.modes[m].participation},
                         {"f_dressed_hz", km.f_dressed[i]},
                         {"anharmonicity_hz", km.anharmonicity[i]}});
    }
    json chi = json::array();
    for (Eigen::Index a = 0; a < km.chi.rows(); ++a) {
        json row = json::array();
        for (Eigen::Index b = 0; b < km.chi.cols(); ++b) row.push_back(km.chi(a, b));
        chi.push_back(row);
    }
    return {{"ej_hz", ms.ej}, {"modes", modes}, {"chi_hz", chi}};
}

std::string kerr_csv(const ModeSystem &ms, const KerrMatrix &km) {
    std::ostringstream out;
    out << "mode";
    for (const auto &m : ms.modes) out << ",chi_" << m.label << "_hz";
    out << ",f_dressed_hz,anharmonicity_hz\n";
    for (std::size_t a = 0; a < ms.modes.size(); ++a) {
        const auto i = static_cast<Eigen::Index>(a);
        out << ms.modes[a].label;
        for (Eigen::Index b = 0; b < km.chi.cols(); ++b) out << ',' << format_double(km.chi(i, b));
        out << ',' << format_double(km.f_dressed[i]) << ',' << format_double(km.anharmonicity[i]) << '\n';
    }
    return out.str();
}

Job prepare_epr(Config &cfg, const Overrides &o) {
    const int sources = cfg.has("modes") + cfg.has("circuit") + cfg.has("compare");
    if (sources != 1) throw ConfigError("epr needs exactly one of 'modes', 'circuit' or 'compare'");
    const Format format = o.format;
    if (cfg.has("compare")) {
        auto &c = cfg.child("compare");
        const auto caps = CapacitanceMatrix::load_csv(c.path("capacitance"));
        const double f_r = c.number("f_r");
        const JosephsonElement j = parse_junction(c.child("junction"));
        const LomOptions lom = parse_lom(c);
        const std::vector<double> fluxes = c.numbers("fluxes", {0.0});
        return [=]() -> std::vector<OutputFile> {
            const EprLomReport rep = epr_vs_lom_report(caps, j, f_r, fluxes, lom);
            if (format == Format::csv) {
                std::ostringstream out;
                out << "flux,f_q_lom_hz,f_q_epr_hz,f_r_lom_hz,f_r_epr_hz,relative_difference\n";
                for (const auto &r : rep.rows)
                    out << format_double(r.flux) << ',' << format_double(r.f_q_lom) << ',' << format_double(r.f_q_epr)
                        << ',' << format_double(r.f_r_lom) << ',' << format_double(r.f_r_epr) << ','
                        << format_double(r.relative_difference) << '\n';
                return {{"epr_vs_lom.csv", out.str()}};
            }
            json rows = json::array();
            for (const auto &r : rep.rows)
                rows.push_back({{"flux", r.flux},
                                {"f_q_lom_hz", r.f_q_lom},
                                {"f_q_epr_hz", r.f_q_epr},
                                {"f_r_lom_hz", r.f_r_lom},
                                {"f_r_epr_hz", r.f_r_epr},
                                {"relative_difference", r.relative_difference}});
            return {{"epr_vs_lom.json",
                     dump({{"rows", rows}, {"max_relative_difference", rep.max_relative_difference}})}};
        };
    }
    ModeSystem ms;
    if (cfg.has("modes")) {
        ms = ModeSystem::load_csv(cfg.path("modes"));
    } else {
        auto &c = cfg.child("circuit");
        ms = linear_mode_system(c.number("c_qubit"), c.number("c_resonator"), c.number("c_mutual"),
                                c.number("l_junction"), c.number("l_resonator"));
    }
    ms.validate();
    return [=]() -> std::vector<OutputFile> {
        const KerrMatrix km = kerr_matrix(ms);
        if (format == Format::csv) return {{"epr.csv", kerr_csv(ms, km)}};
        return {{"epr.json", dump(kerr_json(ms, km))}};
    };
}

// ------------------------------------------------------------------ xsect

GeometryKind geometry_kind(const std::string &s) {
    if (s == "cpw") return GeometryKind::cpw;
    if (s == "parallel_plate") return GeometryKind::parallel_plate;
    if (s == "coax") return GeometryKind::coax;
    throw ConfigError("geometry.kind must be cpw, parallel_plate or coax");
}

CrossSectionGeometry parse_geometry(Config &c) {
    const GeometryKind kind = geometry_kind(c.string("kind", "cpw"));
    CrossSectionGeometry g;
    if (kind == GeometryKind::cpw) {
        g = CrossSectionGeometry::cpw(c.number("trace_width", 30e-6), c.number("gap", 14e-6),
                                      c.number("substrate_eps", 11.65));
        g.ground_extent = c.number("ground_extent", g.ground_extent);
        g.vacuum_height = c.number("vacuum_height", g.vacuum_height);
        g.substrate_thickness = c.number("substrate_thickness", g.substrate_thickness);
    } else if (kind == GeometryKind::parallel_plate) {
        g = CrossSectionGeometry::parallel_plate(c.number("trace_width"), c.number("separation"),
                                                 c.number("substrate_eps", 1.0));
    } else {
        g = CrossSectionGeometry::coax(c.number("inner_side"), c.number("outer_side"), c.number("fill_eps", 1.0));
    }
    g.metal_thickness = c.number("metal_thickness", g.metal_thickness);
    g.voltage = c.number("voltage", g.voltage);
    if (c.has("layers")) {
        g.layers.clear();
        for (Config *l : c.children("layers")) {
            InterfaceLayer layer;
            try {
                layer.kind = interface_kind_from_string(l->string("kind"));
            } catch (const std::exception &e) {
                throw ConfigError(std::string("layer kind: ") + e.what());
            }
            layer.thickness = l->number("thickness");
            layer.permittivity = l->number("permittivity");
            g.layers.push_back(layer);
        }
    }
    g.validate();
    return g;
}

json solution_json(const FieldSolution &s, const InterfaceEpr &epr, int resolution) {
    return {{"resolution", resolution},
            {"nodes", s.node_count()},
            {"iterations", s.iterations},
            {"residual", s.residual},
            {"capacitance_f_per_m", s.capacitance()},
            {"energy_substrate_j_per_m", s.energy_substrate},
            {"energy_vacuum_j_per_m", s.energy_vacuum},
            {"epr", to_json(epr)}};
}

Job prepare_xsect(Config &cfg, const Overrides &o) {
    const CrossSectionGeometry geom = parse_geometry(cfg.child("geometry"));
    SolverOptions opt;
    if (o.resolution) {
        opt.resolution = *o.resolution;
        cfg.set_resolved("resolution", opt.resolution);
    } else {
        opt.resolution = static_cast<int>(cfg.integer("resolution", opt.resolution));
    }
    opt.growth = cfg.number("growth", opt.growth);
    opt.tolerance = cfg.number("tolerance", opt.tolerance);
    opt.max_iterations = static_cast<int>(cfg.integer("max_iterations", opt.max_iterations));
    bool convergence = cfg.boolean("convergence", false);
    if (o.convergence) {
        convergence = true;
        cfg.set_resolved("convergence", true);
    }
    const int r = opt.resolution;
    std::vector<int> levels;
    for (double v : cfg.numbers("convergence_resolutions",
                                {double(r), std::round(r * std::sqrt(2.0)), double(2 * r)})) {
        if (v != std::round(v) || v < 1) throw ConfigError("convergence_resolutions must be positive integers");
        levels.push_back(static_cast<int>(v));
    }
    const bool box = cfg.boolean("box_sensitivity", false);
    const bool grid = cfg.boolean("write_grid", false);
    if (opt.resolution < 64) throw ConfigError("resolution must be at least 64");
    const Format format = o.format;
    return [=]() -> std::vector<OutputFile> {
        std::vector<OutputFile> files;
        const FieldSolution sol = solve_potential(geom, opt);
        const InterfaceEpr epr = interface_participation(sol);
        json out = solution_json(sol, epr, opt.resolution);
        std::ostringstream csv;
        csv << "resolution,ma,ms,sa,energy_j_per_m\n";
        csv << opt.resolution << ',' << format_double(epr.ma) << ',' << format_double(epr.ms) << ','
            << format_double(epr.sa) << ',' << format_double(sol.energy_total()) << '\n';
        if (convergence) {
            const ConvergenceStudy st = convergence_study(geom, levels, opt);
            json samples = json::array();
            for (std::size_t k = 0; k < st.resolutions.size(); ++k) {
                samples.push_back({{"resolution", st.resolutions[k]},
                                   {"epr", to_json(st.samples[k])},
                                   {"energy_j_per_m", st.energies[k]}});
                csv << st.resolutions[k] << ',' << format_double(st.samples[k].ma) << ','
                    << format_double(st.samples[k].ms) << ',' << format_double(st.samples[k].sa) << ','
                    << format_double(st.energies[k]) << '\n';
            }
            auto rich = [](const RichardsonEstimate &e) {
                return json{{"value", num(e.value)}, {"error", num(e.error)}, {"order", num(e.order)},
                            {"monotone", e.monotone}};
            };
            out["convergence"] = {{"samples", samples},
                                  {"extrapolated", to_json(st.extrapolated)},
                                  {"energy", rich(st.energy)},
                                  {"ma", rich(st.ma)},
                                  {"ms", rich(st.ms)},
                                  {"sa", rich(st.sa)}};
            csv << "extrapolated," << format_double(st.extrapolated.ma) << ','
                << format_double(st.extrapolated.ms) << ',' << format_double(st.extrapolated.sa) << ','
                << format_double(st.energy.value) << '\n';
        }
        if (box) {
            const BoxSensitivity b = box_sensitivity(geom, opt);
            out["box_sensitivity"] = {{"factor", b.factor},
                                      {"enlarged", to_json(b.enlarged)},
                                      {"max_relative_change", b.max_relative_change}};
        }
        if (format == Format::csv) {
            files.push_back({"xsect.csv", csv.str()});
        } else {
            files.push_back({"xsect.json", dump(out)});
        }
        if (grid) {
            std::ostringstream g;
            g << "x_m,y_m,potential_v\n";
            for (std::size_t j = 0; j < sol.y.size(); ++j)
                for (std::size_t i = 0; i < sol.x.size(); ++i)
                    g << format_double(sol.x[i]) << ',' << format_double(sol.y[j]) << ','
                      << format_double(sol.potential(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))
                      << '\n';
            files.push_back({"xsect_potential.csv", g.str()});
        }
        return files;
    };
}

// ----------------------------------------------------------------- budget

InterfaceEpr parse_participation(Config &c) {
    if (c.has("table")) {
        const auto table = load_participation_table(c.path("table").string());
        const std::string column = c.string("column");
        const auto it = table.find(column);
        if (it == table.end()) throw InputError("participation table has no column '" + column + "'");
        return it->second;
    }
    InterfaceEpr e;
    e.ma = c.number("ma");
    e.ms = c.number("ms");
    e.sa = c.number("sa");
    return e;
}

InterfaceEpr load_xsect_record(const std::filesystem::path &path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error &e) {
        throw InputError(path.string() + ": " + e.what());
    }
    if (!j.contains("epr")) throw InputError(path.string() + ": no 'epr' block");
    return interface_epr_from_json(j.at("epr"));
}

Job prepare_budget(Config &cfg, const Overrides &o) {
    BudgetInputs in;
    in.f_q = cfg.number("f_q");
    in.g = cfg.number("g");
    in.f_r = cfg.number("f_r");
    in.q_i = cfg.number("q_i");
    in.q_c = cfg.number("q_c");
    const int sources = cfg.has("q_tls") + cfg.has("participation") + cfg.has("hybrid");
    if (sources > 1) throw ConfigError("give at most one of 'q_tls', 'participation' or 'hybrid'");
    std::optional<InterfaceEpr> participation;
    std::vector<PartitionRegion> regions;
    if (cfg.has("q_tls")) {
        in.q_tls = cfg.number("q_tls");
    } else if (cfg.has("participation")) {
        participation = parse_participation(cfg.child("participation"));
    } else if (cfg.has("hybrid")) {
        auto &h = cfg.child("hybrid");
        std::vector<std::pair<std::string, double>> energies;
        if (h.has("energy_report")) energies = load_energy_report(h.path("energy_report").string());
        std::optional<InterfaceEpr> rest;
        if (h.has("unpartitioned_3d")) rest = parse_participation(h.child("unpartitioned_3d"));
        for (Config *r : h.children("regions")) {
            PartitionRegion region;
            region.name = r->string("name");
            if (auto f = r->optional_number("energy_fraction")) {
                region.energy_fraction = *f;
            } else {
                bool found = false;
                for (const auto &[name, f2] : energies)
                    if (name == region.name) region.energy_fraction = f2, found = true;
                if (!found) throw InputError("no energy fraction for region '" + region.name + "'");
            }
            if (r->has("xsect")) {
                region.xsect = load_xsect_record(r->path("xsect"));
            } else {
                region.xsect = parse_participation(r->child("epr"));
            }
            regions.push_back(region);
        }
        participation = combine_hybrid(regions, rest);
    }
    std::map<InterfaceKind, double> tan_delta = default_loss_tangents();
    {
        auto &t = cfg.child("loss_tangents");
        for (auto kind : {InterfaceKind::MA, InterfaceKind::MS, InterfaceKind::SA})
            tan_delta[kind] = t.number(to_string(kind), tan_delta[kind]);
    }
    const Format format = o.format;
    return [=]() mutable -> std::vector<OutputFile> {
        json out;
        if (participation) {
            const auto channels = surface_channels(*participation, tan_delta);
            const TlsQuality q = q_tls(channels);
            if (!q.infinite) in.q_tls = q.q();
            out["participation"] = to_json(*participation);
        }
        const LossBudget b = t1_budget(in);
        const json bj = to_json(b);
        for (const auto &[k, v] : bj.items()) out[k] = v;
        if (format == Format::csv) {
            std::ostringstream csv;
            csv << "channel,rate_per_s,t1_s\n";
            for (const auto &c : b.channels)
                csv << c.name << ',' << format_double(c.rate) << ','
                    << (c.rate > 0 ? format_double(1.0 / c.rate) : std::string("inf")) << '\n';
            csv << "total," << format_double(b.total_rate()) << ','
                << (std::isinf(b.t1_total) ? std::string("inf") : format_double(b.t1_total)) << '\n';
            return {{"budget.csv", csv.str()}, {"budget.txt", format_budget_table(b)}};
        }
        return {{"budget.json", dump(out)}, {"budget.txt", format_budget_table(b)}};
    };
}

// -------------------------------------------------------------------- qnd

Job prepare_qnd(Config &cfg, const Overrides &o) {
    QndProtocol p;
    {
        auto &c = cfg.child("protocol");
        p.xi = c.number("xi", p.xi);
        p.t_parity = c.number("t_parity", p.t_parity);
        p.n_repeats = static_cast<int>(c.integer("n_repeats", p.n_repeats));
        p.m = static_cast<int>(c.integer("m", p.m));
        try {
            p.rule = decision_rule_from_string(c.string("rule", to_string(p.rule)));
        } catch (const std::exception &e) {
            throw ConfigError(std::string("protocol.rule: ") + e.what());
        }
        p.repeat_interval = c.number("repeat_interval", p.repeat_interval);
    }
    StorageCavity cav;
    {
        auto &c = cfg.child("cavity");
        cav.f_s = c.number("f_s", cav.f_s);
        cav.q_s = c.number("q_s", cav.q_s);
        cav.thermal_mean = c.number("thermal_mean", cav.thermal_mean);
    }
    QubitNoise noise;
    {
        auto &c = cfg.child("noise");
        noise.t1 = c.number("t1", noise.t1);
        noise.t2 = c.number("t2", noise.t2);
        if (c.has("readout_error")) {
            if (c.has("p_read1_given0") || c.has("p_read0_given1"))
                throw ConfigError("noise: give readout_error or the asymmetric pair, not both");
            noise.p_read1_given0 = noise.p_read0_given1 = c.number("readout_error");
        } else {
            noise.p_read1_given0 = c.number("p_read1_given0", 0.0);
            noise.p_read0_given1 = c.number("p_read0_given1", 0.0);
        }
        noise.reset_error = c.number("reset_error", noise.reset_error);
        noise.readout_duration = c.number("readout_duration", noise.readout_duration);
    }
    const std::vector<double> sweep = cfg.numbers("sweep_repeats", {double(p.n_repeats)});
    const long photons = cfg.integer("signal_photons", 1);
    const std::vector<double> thresholds = cfg.numbers("roc_thresholds", {});
    const long trials = resolve_trials(cfg, o, 100000);
    const std::uint64_t seed = resolve_seed(cfg, o);
    p.validate();
    cav.validate();
    noise.validate();
    for (double n : sweep)
        if (n < 1 || n != std::round(n)) throw ConfigError("sweep_repeats must be positive integers");
    if (photons < 0) throw ConfigError("signal_photons must be nonnegative");
    const Format format = o.format;
    return [=]() -> std::vector<OutputFile> {
        json rows = json::array();
        std::ostringstream csv;
        csv << "n_repeats,trials,dark_detections,dark_rate,dark_std_error,dark_ci_low,dark_ci_high,exact_dark_rate,"
               "efficiency,efficiency_ci_low,efficiency_ci_high\n";
        const bool exact_available = p.rule == DecisionRule::majority && cav.thermal_mean == 0.0 &&
                                     noise.reset_error == 0.0;
        for (double nd : sweep) {
            QndProtocol q = p;
            q.n_repeats = static_cast<int>(nd);
            const DetectionStats dark = dark_count_rate(q, cav, noise, trials, trial_seed(seed, 0));
            json row = {{"n_repeats", q.n_repeats},
                        {"trials", dark.trials},
                        {"dark_detections", dark.detections},
                        {"dark_rate", dark.estimate},
                        {"dark_std_error", dark.std_error},
                        {"dark_ci", {dark.ci.low, dark.ci.high}}};
            double exact = std::nan("");
            if (exact_available) {
                exact = majority_false_positive(q.n_repeats, bit_one_probability(0, q, noise));
                row["exact_dark_rate"] = exact;
            }
            double eff = std::nan(""), lo = std::nan(""), hi = std::nan("");
            if (photons > 0) {
                StorageCavity lit = cav;
                lit.n_init = static_cast<int>(photons);
                const DetectionStats e = efficiency(q, lit, noise, trials, trial_seed(seed, 1));
                eff = e.estimate, lo = e.ci.low, hi = e.ci.high;
                row["efficiency"] = eff;
                row["efficiency_ci"] = {lo, hi};
            }
            rows.push_back(row);
            auto opt = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
            csv << q.n_repeats << ',' << dark.trials << ',' << dark.detections << ',' << format_double(dark.estimate)
                << ',' << format_double(dark.std_error) << ',' << format_double(dark.ci.low) << ','
                << format_double(dark.ci.high) << ',' << opt(exact) << ',' << opt(eff) << ',' << opt(lo) << ','
                << opt(hi) << '\n';
        }
        json out = {{"pi_phase_time_s", pi_phase_time(p.xi, p.m)},
                    {"parity_time_s", p.parity_time()},
                    {"one_photon_phase_rad", parity_phase(1, p)},
                    {"seed", seed},
                    {"rows", rows}};
        std::vector<OutputFile> files;
        if (!thresholds.empty()) {
            StorageCavity lit = cav;
            lit.n_init = static_cast<int>(std::max(photons, 1L));
            const auto roc = roc_curve(p, lit, noise, trials, trial_seed(seed, 2), thresholds);
            std::ostringstream r;
            r << "threshold,false_positive,true_positive\n";
            json rj = json::array();
            for (const auto &pt : roc) {
                r << format_double(pt.threshold) << ',' << format_double(pt.false_positive) << ','
                  << format_double(pt.true_positive) << '\n';
                rj.push_back({{"threshold", pt.threshold},
                              {"false_positive", pt.false_positive},
                              {"true_positive", pt.true_positive}});
            }
            out["roc"] = rj;
            if (format == Format::csv) files.push_back({"qnd_roc.csv", r.str()});
        }
        if (format == Format::csv) {
            files.insert(files.begin(), OutputFile{"qnd.csv", csv.str()});
        } else {
            files.insert(files.begin(), OutputFile{"qnd.json", dump(out)});
        }
        return files;
    };
}

// ---------------------------------------------------------------- exp-fit

ExperimentKind parse_kind(const std::string &s) {
    try {
        return experiment_kind_from_string(s);
    } catch (const InputError &e) {
        throw ConfigError(std::string("kind: ") + e.what());
    }
}

void parse_fit_settings(Config &c, FitSettings &s) {
    s.ec = c.number("ec", s.ec);
    s.asymmetry = c.number("asymmetry", s.asymmetry);
    s.fit_stark_slope = c.boolean("fit_stark_slope", s.fit_stark_slope);
    s.fit_offset = c.boolean("fit_offset", s.fit_offset);
    s.lsq.max_iterations = static_cast<int>(c.integer("max_iterations", s.lsq.max_iterations));
    s.lsq.initial_damping = c.number("initial_damping", s.lsq.initial_damping);
}

std::vector<double> parse_axis(Config &c, const std::vector<double> &fallback) {
    const double start = c.number("start", fallback.front());
    const double stop = c.number("stop", fallback.back());
    const long n = c.integer("points", static_cast<long>(fallback.size()));
    if (n < 2) throw ConfigError("axis points must be at least 2");
    std::vector<double> v(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = start + (stop - start) * double(i) / double(n - 1);
    return v;
}

Job prepare_synth(Config &cfg, const Overrides &o) {
    const ExperimentKind kind = parse_kind(cfg.string("kind"));
    Scenario s = default_scenario(kind);
    parse_fit_settings(cfg.child("settings"), s.settings);
    const auto names = model_parameter_names(kind, s.settings);
    std::vector<double> truth;
    for (const auto &n : names) {
        double v = 0.0;
        for (std::size_t k = 0; k < s.names.size(); ++k)
            if (s.names[k] == n) v = s.truth[k];
        truth.push_back(v);
    }
    s.names = names;
    s.truth = truth;
    {
        auto &p = cfg.child("parameters");
        for (std::size_t k = 0; k < s.names.size(); ++k) s.truth[k] = p.number(s.names[k], s.truth[k]);
    }
    s.snr = cfg.number("snr", s.snr);
    s.relative_noise = cfg.number("relative_noise", s.relative_noise);
    if (cfg.has("axis")) s.axis = parse_axis(cfg.child("axis"), s.axis);
    if (cfg.has("axis2")) {
        if (s.axis2.empty()) throw ConfigError("axis2 is only valid for map experiments");
        s.axis2 = parse_axis(cfg.child("axis2"), s.axis2);
    }
    const std::uint64_t seed = resolve_seed(cfg, o);
    long reps = 0;
    if (o.trials) {
        reps = *o.trials;
        cfg.set_resolved("round_trip_repetitions", reps);
    } else {
        reps = cfg.integer("round_trip_repetitions", 0);
    }
    if (reps < 0) throw ConfigError("round_trip_repetitions must be nonnegative");
    const long threads = cfg.integer("threads", 1);
    if (threads < 1) throw ConfigError("threads must be positive");
    if (!(s.snr > 0.0)) throw ConfigError("snr must be positive");
    const Format format = o.format;
    return [=]() -> std::vector<OutputFile> {
        const ExperimentTrace trace = synthesize(s, seed);
        json params = json::object();
        for (std::size_t k = 0; k < s.names.size(); ++k) params[s.names[k]] = s.truth[k];
        json out = {{"kind", to_string(kind)},
                    {"seed", seed},
                    {"snr", s.snr},
                    {"relative_noise", s.relative_noise},
                    {"parameters", params},
                    {"trace", to_string(kind) + "_trace.csv"}};
        if (reps > 0) {
            const RoundTripSummary r = round_trip(s, static_cast<int>(reps), seed, 3.0, static_cast<unsigned>(threads));
            json within = json::object();
            for (std::size_t k = 0; k < s.names.size(); ++k) within[s.names[k]] = r.per_parameter_within[k];
            out["round_trip"] = {{"repetitions", r.repetitions},
                                 {"recovered", r.recovered},
                                 {"fraction", r.fraction()},
                                 {"fit_failures", r.fit_failures},
                                 {"cost_violations", r.cost_violations},
                                 {"per_parameter_within_3_sigma", within}};
        }
        return {{to_string(kind) + "_trace.csv", trace_to_csv(trace)}, record("synth", out, format)};
    };
}

std::string fit_csv(const ExperimentFit &f) {
    std::ostringstream out;
    out << "quantity,value,uncertainty\n";
    for (std::size_t k = 0; k < f.fit.names.size(); ++k)
        out << "parameter." << f.fit.names[k] << ',' << format_double(f.fit.values[k]) << ','
            << format_double(f.fit.uncertainties[k]) << '\n';
    for (const auto &[name, m] : f.derived)
        out << "derived." << name << ',' << format_double(m.value) << ',' << format_double(m.uncertainty) << '\n';
    return out.str();
}

Job prepare_fit(Config &cfg, const Overrides &o) {
    const std::string kind_name = cfg.string("kind");
    FitSettings settings;
    parse_fit_settings(cfg.child("settings"), settings);
    const Format format = o.format;
    if (kind_name == "dispersive_shift") {
        const ExperimentTrace g = load_trace(cfg.path("ground"), ExperimentKind::notch);
        const ExperimentTrace e = load_trace(cfg.path("excited"), ExperimentKind::notch);
        return [=]() -> std::vector<OutputFile> {
            const DispersiveShiftResult r = dispersive_shift_measurement(g, e, settings);
            if (format == Format::csv) {
                std::ostringstream out;
                out << "quantity,value,uncertainty\nchi," << format_double(r.chi.value) << ','
                    << format_double(r.chi.uncertainty) << "\nresidual_ratio," << format_double(r.residual_ratio)
                    << ",\ndistortion_warning," << (r.distortion_warning ? 1 : 0) << ",\n";
                return {{"fit.csv", out.str()}};
            }
            return {{"fit.json", dump(to_json(r))}};
        };
    }
    const ExperimentKind kind = parse_kind(kind_name);
    const ExperimentTrace trace = load_trace(cfg.path("trace"), kind);
    return [=]() -> std::vector<OutputFile> {
        const ExperimentFit f = fit_trace(trace, settings);
        if (format == Format::csv) return {{"fit.csv", fit_csv(f)}};
        return {{"fit.json", dump(to_json(f))}};
    };
}

Job prepare_report(Config &cfg, const Overrides &o) {
    std::vector<SummaryColumn> columns;
    for (Config *c : cfg.children("columns")) {
        SummaryColumn col;
        col.name = c->string("name");
        if (c->has("expected")) {
            if (c->has("fits")) throw ConfigError("a report column takes either 'fits' or 'expected'");
            col.expected = true;
            auto &e = c->child("expected");
            for (const auto &row : summary_rows())
                if (auto v = e.optional_number(row.key)) col.set(row.key, {*v, 0.0});
        } else {
            for (const auto &p : c->strings("fits")) {
                const auto path = std::filesystem::path(p).is_absolute() ? std::filesystem::path(p)
                                                                         : cfg.base_dir() / p;
                try {
                    col.add_record(json::parse(read_text_file(path)));
                } catch (const json::parse_error &e) {
                    throw InputError(path.string() + ": " + e.what());
                } catch (const InputError &e) {
                    throw InputError(path.string() + ": " + e.what());
                }
            }
        }
        columns.push_back(col);
    }
    const Format format = o.format;
    return [=]() -> std::vector<OutputFile> {
        std::vector<OutputFile> files = {{"report.txt", render_summary_text(columns)}};
        if (format == Format::csv) {
            files.push_back({"report.csv", render_summary_csv(columns)});
        } else {
            json cols = json::array();
            for (const auto &c : columns) {
                json entries = json::object();
                for (const auto &[k, m] : c.entries) entries[k] = {{"value", m.value}, {"uncertainty", m.uncertainty}};
                cols.push_back({{"name", c.name}, {"expected", c.expected}, {"entries", entries}});
            }
            files.push_back({"report.json", dump({{"columns", cols}})});
        }
        return files;
    };
}

}  // namespace

const std::vector<CommandInfo> &commands() {
    static const std::vector<CommandInfo> list = {
        {"quantize", "Transmon and coupling parameters from a capacitance matrix", prepare_quantize},
        {"epr", "Kerr matrix by energy participation", prepare_epr},
        {"xsect", "Cross-section field solution and interface participation", prepare_xsect},
        {"budget", "T1 budget from TLS and Purcell channels", prepare_budget},
        {"qnd", "Monte-Carlo dark counts and efficiency of repeated parity measurements", prepare_qnd},
        {"synth", "Synthetic experiment trace", prepare_synth},
        {"fit", "Fit an experiment trace", prepare_fit},
        {"report", "Characterization summary from fit records", prepare_report},
    };
    return list;
}

}  // namespace qtwin::cli
