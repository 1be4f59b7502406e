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

// Synthetic experiment traces, their models and parameter extraction.

#include <complex>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qtwin/lsq.hpp"

namespace qtwin {

enum class ExperimentKind { notch, two_tone, flux_map, chevron, t1, ramsey, echo };

std::string to_string(ExperimentKind kind);
/// Accepts the names produced by to_string; throws InputError otherwise.
ExperimentKind experiment_kind_from_string(std::string_view name);
bool is_complex_response(ExperimentKind kind);
bool is_map(ExperimentKind kind);
/// CSV column names of the fast and (for maps) slow axis.
std::pair<std::string, std::string> axis_names(ExperimentKind kind);

/// Sampled response on a rectangular grid. Maps are stored row by row: the
/// point (axis[i], axis2[j]) sits at index j * axis.size() + i.
///   notch     axis: probe frequency [Hz]; complex S21
///   two_tone  axis: drive frequency [Hz], axis2: drive power [dB]
///   flux_map  axis: probe frequency [Hz], axis2: bias voltage [V]; |S21|
///   chevron   axis: pulse duration [s], axis2: drive frequency [Hz]
///   t1, ramsey, echo  axis: delay [s]; excited-state probability
/// sigma is the per-point noise (per quadrature for complex data).
struct ExperimentTrace {
    ExperimentKind kind = ExperimentKind::t1;
    std::vector<double> axis;
    std::vector<double> axis2;
    std::vector<std::complex<double>> s21;
    std::vector<double> response;
    std::vector<double> sigma;

    std::size_t size() const { return axis.size() * (axis2.empty() ? 1 : axis2.size()); }
    /// Throws InputError on non-monotone axes, size mismatches, non-finite
    /// values or non-positive sigma.
    void validate() const;
};

/// Long-format CSV: axis column(s), then re,im or response, then sigma.
std::string trace_to_csv(const ExperimentTrace &trace);
/// A missing sigma column means unit weights.
ExperimentTrace parse_trace_csv(std::istream &in, ExperimentKind kind);
ExperimentTrace load_trace(const std::filesystem::path &path, ExperimentKind kind);

struct Measurement {
    double value = 0.0;
    double uncertainty = 0.0;
};

// ---------------------------------------------------------------- models

/// Diameter-corrected notch resonator.
struct NotchParams {
    double f_r = 0.0;
    double q_l = 0.0;
    double q_c = 0.0;  // |Q_c|
    double phi = 0.0;  // impedance-mismatch rotation
    double amplitude = 1.0;
    double theta = 0.0;
    double tau = 0.0;  // cable delay [s]

    /// 1/Q_i = 1/Q_l - cos(phi)/|Q_c|.
    double q_i() const;
    static NotchParams from_quality(double f_r, double q_i, double q_c, double phi = 0.0);
};

/// S21 = a e^{i theta} e^{-2 pi i f tau} [1 - (Q_l/|Q_c|) e^{i phi} / (1 + 2 i Q_l (f/f_r - 1))].
std::complex<double> s21_notch_model(double f, const NotchParams &p);

/// Multiphoton spectroscopy: Lorentzian peaks (FWHM `linewidth`) at
/// f01 + (n-1) alpha / 2 for n = 1..levels with power weights s^n / (1 + s^n),
/// s = 10^((P - p_sat) / 10). Peak positions shift by stark_slope * P.
struct TwoToneParams {
    double f01 = 0.0;
    double alpha = 0.0;
    double amplitude = 1.0;
    double linewidth = 1e6;
    double p_sat = 0.0;
    double baseline = 0.0;
    double stark_slope = 0.0;  // Hz per dB
    int levels = 3;
};

double two_tone_model(double f, double power, const TwoToneParams &p);
/// Position of the n-photon line f0n / n.
double multiphoton_peak(double f01, double alpha, int n);

/// Resonator transmission across a flux sweep. The qubit follows the SQUID
/// and exact transmon spectrum; both Jaynes-Cummings branches appear as
/// Lorentzian dips weighted by their resonator content.
struct FluxMapParams {
    double ej_max = 0.0;
    double asymmetry = 0.0;
    double ec = 0.0;
    double g = 0.0;
    double f_r_bare = 0.0;
    double volts_per_phi0 = 1.0;
    double offset = 0.0;
    double depth = 0.5;
    double kappa = 1e6;  // FWHM of each dip
};

struct FluxBranches {
    double flux = 0.0;
    double f_q = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double lower_weight = 0.0;  // resonator content of each branch
    double upper_weight = 0.0;
};

FluxBranches flux_branches(double voltage, const FluxMapParams &p);
double flux_map_model(double voltage, double f, const FluxMapParams &p);

/// Driven Rabi excitation versus pulse duration and drive frequency.
struct ChevronParams {
    double omega = 0.0;
    double f01 = 0.0;
    double t1 = 0.0;
    double t2 = 0.0;

    double decay_time() const;
};
double chevron_model(double duration, double drive_frequency, const ChevronParams &p);

/// amplitude exp(-t / T1) + offset.
double t1_model(double t, double t1, double amplitude = 1.0, double offset = 0.0);
/// 1/2 [1 + cos(2 pi delta t + phase) exp(-t / T2*)].
double ramsey_model(double t, double t2_star, double detuning, double phase = 0.0);
/// 1/2 [1 + exp(-t / T2)].
double echo_model(double t, double t2);

// ------------------------------------------------------------------ fits

struct FitSettings {
    /// Flux map: charging energy and SQUID asymmetry are held fixed.
    double ec = 0.0;
    double asymmetry = 0.0;
    /// Two-tone: also fit a linear power shift of the peaks.
    bool fit_stark_slope = false;
    /// T1: also fit a constant offset.
    bool fit_offset = false;
    LsqOptions lsq;
};

/// Engine result plus derived physical quantities and flags.
struct ExperimentFit {
    ExperimentKind kind = ExperimentKind::t1;
    FitResult fit;
    std::vector<std::pair<std::string, Measurement>> derived;
    std::vector<std::string> flags;

    std::optional<Measurement> find(std::string_view name) const;
    Measurement get(std::string_view name) const;  // throws InputError
    bool has_flag(std::string_view flag) const;
};

/// Derived: f_r, q_l, q_c, q_i.
ExperimentFit fit_resonator(const ExperimentTrace &trace, const FitSettings &settings = {});
/// Derived: f01, alpha. Throws InputError("insufficient peaks") when the
/// highest-power row shows no multiphoton line.
ExperimentFit fit_two_tone(const ExperimentTrace &trace, const FitSettings &settings = {});
/// Derived: g, ej_max, f_r_bare, volts_per_phi0, offset, min_separation.
/// Flag "degenerate_g" when the coupling is not resolved; g is then refit
/// as zero.
ExperimentFit fit_avoided_crossing(const ExperimentTrace &trace, const FitSettings &settings);
/// Derived: omega, f01, decay_time.
ExperimentFit fit_chevron(const ExperimentTrace &trace, const FitSettings &settings = {});
/// Derived: t1.
ExperimentFit fit_t1(const ExperimentTrace &trace, const FitSettings &settings = {});
/// Derived: t2_star, detuning (|delta|).
ExperimentFit fit_ramsey(const ExperimentTrace &trace, const FitSettings &settings = {});
/// Derived: t2.
ExperimentFit fit_echo(const ExperimentTrace &trace, const FitSettings &settings = {});
/// Dispatch on trace.kind.
ExperimentFit fit_trace(const ExperimentTrace &trace, const FitSettings &settings = {});

struct DispersiveShiftResult {
    Measurement chi;  // (f_g - f_e) / 2, signed
    ExperimentFit ground;
    ExperimentFit excited;
    double residual_ratio = 0.0;  // excited over ground residual norm
    bool distortion_warning = false;
};

/// Warning when the excited-state fit residual exceeds the ground-state one
/// by more than a factor 5.
DispersiveShiftResult dispersive_shift_measurement(const ExperimentTrace &ground, const ExperimentTrace &excited,
                                                   const FitSettings &settings = {});

// ------------------------------------------------------------- synthesis

/// A model, its true parameters (in fit order) and the sampling grid.
struct Scenario {
    ExperimentKind kind = ExperimentKind::t1;
    std::vector<std::string> names;
    std::vector<double> truth;
    std::vector<double> axis;
    std::vector<double> axis2;
    FitSettings settings;
    /// Additive noise is signal_scale / snr; a positive relative_noise
    /// replaces it by relative_noise * |model| per point.
    double snr = 20.0;
    double relative_noise = 0.0;
    /// Scale of the response used with snr.
    double signal_scale() const;
    double parameter(std::string_view name) const;
    void set_parameter(std::string_view name, double value);
};

/// Fit-order parameter names of a model.
std::vector<std::string> model_parameter_names(ExperimentKind kind, const FitSettings &settings = {});

/// Scenarios built from the measured qubit characterization.
///   notch: QB-1 resonator; two_tone, chevron, t1, ramsey, echo: QB-0;
///   flux_map: QB-1 coupling.
Scenario default_scenario(ExperimentKind kind);

/// Noiseless model response on the scenario grid (complex data interleaved
/// as re, im).
std::vector<double> evaluate_scenario(const Scenario &scenario, const std::vector<double> &params);

/// Model plus Gaussian noise, reproducible from the seed.
ExperimentTrace synthesize(const Scenario &scenario, std::uint64_t seed);

/// 1/2 sum ((data - model) / sigma)^2 for the given parameters.
double trace_cost(const Scenario &scenario, const ExperimentTrace &trace, const std::vector<double> &params);

struct RoundTripSummary {
    ExperimentKind kind = ExperimentKind::t1;
    int repetitions = 0;
    int recovered = 0;     // every parameter within n_sigma
    int fit_failures = 0;  // exceptions or non-convergence
    int cost_violations = 0;  // converged cost above the cost at the truth + 1e-9
    std::vector<int> per_parameter_within;
    double seconds = 0.0;

    double fraction() const { return repetitions ? static_cast<double>(recovered) / repetitions : 0.0; }
};

/// Repeated synthesize + fit with per-repetition seeds; repetitions run
/// concurrently and the summary does not depend on the thread count.
RoundTripSummary round_trip(const Scenario &scenario, int repetitions, std::uint64_t seed, double n_sigma = 3.0,
                            unsigned threads = 0);

// ------------------------------------------------------------ reporting

nlohmann::json to_json(const Measurement &m);
nlohmann::json to_json(const ExperimentFit &fit);
/// Record of kind "dispersive_shift" with derived chi and both notch fits.
nlohmann::json to_json(const DispersiveShiftResult &result);
ExperimentFit experiment_fit_from_json(const nlohmann::json &j);

}  // namespace qtwin
