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

#include "qtwin/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "qtwin/circuit.hpp"
#include "qtwin/constants.hpp"
#include "qtwin/error.hpp"
#include "qtwin/io.hpp"
#include "qtwin/qnd.hpp"

namespace qtwin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Charge cutoff for the flux-map qubit; f01 converged to 1e-3 Hz for E_J/E_C >= 80.
constexpr int kFluxMapCutoff = 15;
constexpr double kDistortionRatio = 5.0;

using cd = std::complex<double>;

class NormalSource {
public:
    explicit NormalSource(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(kTwoPi * u2);
        has_spare_ = true;
        return r * std::cos(kTwoPi * u2);
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

double wrap_angle(double a) {
    a = std::remainder(a, kTwoPi);
    return a <= -kPi ? a + kTwoPi : a;
}

double median(std::vector<double> v) {
    if (v.empty()) throw InputError("median of an empty set");
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

std::vector<double> smooth3(const std::vector<double> &v) {
    std::vector<double> out(v);
    for (std::size_t i = 1; i + 1 < v.size(); ++i) out[i] = (v[i - 1] + v[i] + v[i + 1]) / 3.0;
    return out;
}

std::size_t argmax(const std::vector<double> &v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::size_t argmin(const std::vector<double> &v) {
    return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
}

// Full width at half height of a peak in y (height measured from `base`).
double fwhm(const std::vector<double> &x, const std::vector<double> &y, std::size_t peak, double base) {
    const double half = base + 0.5 * (y[peak] - base);
    auto crossing = [&](int dir) -> std::optional<double> {
        long i = static_cast<long>(peak);
        while (true) {
            const long j = i + dir;
            if (j < 0 || j >= static_cast<long>(y.size())) return std::nullopt;
            if (y[static_cast<std::size_t>(j)] <= half) {
                const double y0 = y[static_cast<std::size_t>(i)];
                const double y1 = y[static_cast<std::size_t>(j)];
                const double t = (y0 - half) / (y0 - y1);
                return x[static_cast<std::size_t>(i)] + t * (x[static_cast<std::size_t>(j)] - x[static_cast<std::size_t>(i)]);
            }
            i = j;
        }
    };
    const auto lo = crossing(-1);
    const auto hi = crossing(+1);
    if (lo && hi) return *hi - *lo;
    if (lo) return 2.0 * (x[peak] - *lo);
    if (hi) return 2.0 * (*hi - x[peak]);
    return (x.back() - x.front()) / 4.0;
}

// First time at which a decaying curve falls to `level`, linearly interpolated.
std::optional<double> first_crossing_below(const std::vector<double> &t, const std::vector<double> &y, double level) {
    for (std::size_t i = 1; i < y.size(); ++i) {
        if (y[i] <= level && y[i - 1] > level) {
            const double f = (y[i - 1] - level) / (y[i - 1] - y[i]);
            return t[i - 1] + f * (t[i] - t[i - 1]);
        }
    }
    return std::nullopt;
}

// Frequency maximizing |sum (y - mean) e^{-2 pi i nu t}| over (0, nyquist].
std::pair<double, cd> dominant_frequency(const std::vector<double> &t, const std::vector<double> &y) {
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    const double span = t.back() - t.front();
    const double dt = span / static_cast<double>(t.size() - 1);
    auto projection = [&](double nu) {
        cd s = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) s += (y[i] - mean) * std::polar(1.0, -kTwoPi * nu * t[i]);
        return s;
    };
    const double step = 0.25 / span;
    const double nyquist = 0.5 / dt;
    double best = step;
    double best_mag = -1.0;
    for (double nu = step; nu <= nyquist; nu += step) {
        const double m = std::abs(projection(nu));
        if (m > best_mag) {
            best_mag = m;
            best = nu;
        }
    }
    // Golden-section refinement inside the bracketing grid cell.
    double a = std::max(best - step, 0.1 * step);
    double b = best + step;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = std::abs(projection(c));
    double fd = std::abs(projection(d));
    for (int it = 0; it < 60; ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = std::abs(projection(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = std::abs(projection(d));
        }
    }
    const double nu = 0.5 * (a + b);
    return {nu, projection(nu)};
}

void require_axis_span(const ExperimentTrace &trace, std::size_t min_points) {
    if (trace.axis.size() < min_points) throw InputError("trace has too few points for a fit");
}

// ------------------------------------------------------------ evaluation

struct Grid {
    const std::vector<double> &axis;
    const std::vector<double> &axis2;
};

NotchParams notch_from(std::span<const double> p) { return NotchParams{p[0], p[1], p[2], p[3], p[4], p[5], p[6]}; }

TwoToneParams two_tone_from(std::span<const double> p) {
    TwoToneParams t;
    t.f01 = p[0];
    t.alpha = p[1];
    t.amplitude = p[2];
    t.linewidth = p[3];
    t.p_sat = p[4];
    t.baseline = p[5];
    t.stark_slope = p.size() > 6 ? p[6] : 0.0;
    return t;
}

FluxMapParams flux_from(std::span<const double> p, const FitSettings &s) {
    FluxMapParams f;
    f.g = p[0];
    f.ej_max = p[1];
    f.f_r_bare = p[2];
    f.volts_per_phi0 = p[3];
    f.offset = p[4];
    f.depth = p[5];
    f.kappa = p[6];
    f.ec = s.ec;
    f.asymmetry = s.asymmetry;
    return f;
}

ChevronParams chevron_from(std::span<const double> p) { return ChevronParams{p[0], p[1], p[2], p[2]}; }

double lorentz(double f, double center, double fwhm) {
    const double hw = 0.5 * fwhm;
    const double d = f - center;
    return hw * hw / (d * d + hw * hw);
}

double flux_map_point(double f, const FluxBranches &b, const FluxMapParams &p) {
    return 1.0 - p.depth * (b.lower_weight * lorentz(f, b.lower, p.kappa) + b.upper_weight * lorentz(f, b.upper, p.kappa));
}

// Model values in residual layout: complex responses interleave re, im.
void evaluate(ExperimentKind kind, std::span<const double> p, const Grid &grid, const FitSettings &settings,
              std::span<double> out) {
    const auto &x = grid.axis;
    const std::size_t nx = x.size();
    switch (kind) {
        case ExperimentKind::notch: {
            const NotchParams n = notch_from(p);
            for (std::size_t i = 0; i < nx; ++i) {
                const cd s = s21_notch_model(x[i], n);
                out[2 * i] = s.real();
                out[2 * i + 1] = s.imag();
            }
            return;
        }
        case ExperimentKind::two_tone: {
            const TwoToneParams t = two_tone_from(p);
            for (std::size_t j = 0; j < grid.axis2.size(); ++j)
                for (std::size_t i = 0; i < nx; ++i) out[j * nx + i] = two_tone_model(x[i], grid.axis2[j], t);
            return;
        }
        case ExperimentKind::flux_map: {
            const FluxMapParams f = flux_from(p, settings);
            for (std::size_t j = 0; j < grid.axis2.size(); ++j) {
                const FluxBranches b = flux_branches(grid.axis2[j], f);
                for (std::size_t i = 0; i < nx; ++i) out[j * nx + i] = flux_map_point(x[i], b, f);
            }
            return;
        }
        case ExperimentKind::chevron: {
            const ChevronParams c = chevron_from(p);
            for (std::size_t j = 0; j < grid.axis2.size(); ++j)
                for (std::size_t i = 0; i < nx; ++i) out[j * nx + i] = chevron_model(x[i], grid.axis2[j], c);
            return;
        }
        case ExperimentKind::t1:
            for (std::size_t i = 0; i < nx; ++i) out[i] = t1_model(x[i], p[0], p[1], p.size() > 2 ? p[2] : 0.0);
            return;
        case ExperimentKind::ramsey:
            for (std::size_t i = 0; i < nx; ++i) out[i] = ramsey_model(x[i], p[0], p[1], p[2]);
            return;
        case ExperimentKind::echo:
            for (std::size_t i = 0; i < nx; ++i) out[i] = echo_model(x[i], p[0]);
            return;
    }
}

struct WeightedData {
    std::vector<double> y;
    std::vector<double> w;  // 1 / sigma
};

WeightedData weighted_data(const ExperimentTrace &trace) {
    WeightedData d;
    const std::size_t n = trace.size();
    if (is_complex_response(trace.kind)) {
        d.y.resize(2 * n);
        d.w.resize(2 * n);
        for (std::size_t i = 0; i < n; ++i) {
            d.y[2 * i] = trace.s21[i].real();
            d.y[2 * i + 1] = trace.s21[i].imag();
            d.w[2 * i] = d.w[2 * i + 1] = 1.0 / trace.sigma[i];
        }
    } else {
        d.y = trace.response;
        d.w.resize(n);
        for (std::size_t i = 0; i < n; ++i) d.w[i] = 1.0 / trace.sigma[i];
    }
    return d;
}

using ModelFn = std::function<void(std::span<const double>, std::span<double>)>;

ResidualFunction weighted_residuals(const WeightedData &data, ModelFn model) {
    return [&data, model = std::move(model)](std::span<const double> p, std::span<double> r) {
        model(p, r);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = (data.y[i] - r[i]) * data.w[i];
    };
}

double cost_of(const WeightedData &data, const ModelFn &model, std::span<const double> p) {
    std::vector<double> m(data.y.size());
    model(p, m);
    double c = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double r = (data.y[i] - m[i]) * data.w[i];
        c += r * r;
    }
    return 0.5 * c;
}

ModelFn model_for(const ExperimentTrace &trace, const FitSettings &settings) {
    return [&trace, &settings](std::span<const double> p, std::span<double> out) {
        evaluate(trace.kind, p, Grid{trace.axis, trace.axis2}, settings, out);
    };
}

Measurement param_measurement(const FitResult &fit, std::string_view name) {
    return Measurement{fit.value(name), fit.uncertainty(name)};
}

// First-order propagation through a scalar function of all parameters.
Measurement propagate(const FitResult &fit, const std::function<double(const std::vector<double> &)> &fn) {
    const double value = fn(fit.values);
    const std::size_t n = fit.values.size();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
        if (fit.uncertainties[k] == 0.0) continue;
        const double h = 1e-4 * fit.uncertainties[k];
        auto plus = fit.values;
        auto minus = fit.values;
        plus[k] += h;
        minus[k] -= h;
        grad(static_cast<Eigen::Index>(k)) = (fn(plus) - fn(minus)) / (2.0 * h);
    }
    const double var = grad.dot(fit.covariance * grad);
    return Measurement{value, std::sqrt(std::max(var, 0.0))};
}

ExperimentFit make_fit(ExperimentKind kind, FitResult fit) {
    ExperimentFit out;
    out.kind = kind;
    out.fit = std::move(fit);
    return out;
}

void require_kind(const ExperimentTrace &trace, ExperimentKind kind) {
    if (trace.kind != kind) {
        throw InputError("expected a " + to_string(kind) + " trace, got " + to_string(trace.kind));
    }
    trace.validate();
}

std::vector<double> row(const ExperimentTrace &trace, std::size_t j) {
    const std::size_t nx = trace.axis.size();
    return {trace.response.begin() + static_cast<std::ptrdiff_t>(j * nx),
            trace.response.begin() + static_cast<std::ptrdiff_t>((j + 1) * nx)};
}

// Keep the candidate with the lowest cost.
template <class Candidates>
std::vector<double> best_candidate(const WeightedData &data, const ModelFn &model, const Candidates &candidates) {
    double best = kInf;
    std::vector<double> chosen;
    for (const auto &c : candidates) {
        const double cost = cost_of(data, model, c);
        if (cost < best) {
            best = cost;
            chosen = c;
        }
    }
    if (chosen.empty()) throw NumericalError("no finite initial guess");
    return chosen;
}

}  // namespace

// ------------------------------------------------------------------ kinds

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::notch: return "notch";
        case ExperimentKind::two_tone: return "two_tone";
        case ExperimentKind::flux_map: return "flux_map";
        case ExperimentKind::chevron: return "chevron";
        case ExperimentKind::t1: return "t1";
        case ExperimentKind::ramsey: return "ramsey";
        case ExperimentKind::echo: return "echo";
    }
    return "unknown";
}

ExperimentKind experiment_kind_from_string(std::string_view name) {
    for (auto k : {ExperimentKind::notch, ExperimentKind::two_tone, ExperimentKind::flux_map, ExperimentKind::chevron,
                   ExperimentKind::t1, ExperimentKind::ramsey, ExperimentKind::echo}) {
        if (to_string(k) == name) return k;
    }
    throw InputError("unknown experiment kind '" + std::string(name) + "'");
}

bool is_complex_response(ExperimentKind kind) { return kind == ExperimentKind::notch; }

bool is_map(ExperimentKind kind) {
    return kind == ExperimentKind::two_tone || kind == ExperimentKind::flux_map || kind == ExperimentKind::chevron;
}

std::pair<std::string, std::string> axis_names(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::notch: return {"frequency", ""};
        case ExperimentKind::two_tone: return {"frequency", "power"};
        case ExperimentKind::flux_map: return {"frequency", "voltage"};
        case ExperimentKind::chevron: return {"duration", "drive_frequency"};
        default: return {"delay", ""};
    }
}

// ------------------------------------------------------------------ trace

void ExperimentTrace::validate() const {
    auto monotone = [](const std::vector<double> &a, const char *what) {
        for (double v : a)
            if (!std::isfinite(v)) throw InputError(std::string(what) + " contains non-finite values");
        for (std::size_t i = 1; i < a.size(); ++i)
            if (!(a[i] > a[i - 1])) throw InputError(std::string(what) + " must be strictly increasing");
    };
    if (axis.size() < 2) throw InputError("trace axis needs at least two points");
    monotone(axis, "axis");
    monotone(axis2, "second axis");
    if (is_map(kind) && axis2.size() < 2) throw InputError(to_string(kind) + " trace needs a second axis");
    if (!is_map(kind) && !axis2.empty()) throw InputError(to_string(kind) + " trace takes a single axis");
    const std::size_t n = size();
    if (is_complex_response(kind)) {
        if (s21.size() != n) throw InputError("complex response size does not match the axes");
        for (const auto &z : s21)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw InputError("response must be finite");
    } else {
        if (response.size() != n) throw InputError("response size does not match the axes");
        for (double v : response)
            if (!std::isfinite(v)) throw InputError("response must be finite");
    }
    if (sigma.size() != n) throw InputError("sigma size does not match the axes");
    for (double s : sigma)
        if (!(s > 0.0) || !std::isfinite(s)) throw InputError("sigma must be finite and positive");
}

std::string trace_to_csv(const ExperimentTrace &trace) {
    trace.validate();
    const auto [a1, a2] = axis_names(trace.kind);
    std::ostringstream out;
    out << "# kind: " << to_string(trace.kind) << "\n" << a1;
    if (!a2.empty()) out << "," << a2;
    out << (is_complex_response(trace.kind) ? ",re,im" : ",response") << ",sigma\n";
    const std::size_t nx = trace.axis.size();
    const std::size_t ny = trace.axis2.empty() ? 1 : trace.axis2.size();
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            const std::size_t k = j * nx + i;
            out << format_double(trace.axis[i]);
            if (!a2.empty()) out << "," << format_double(trace.axis2[j]);
            if (is_complex_response(trace.kind)) {
                out << "," << format_double(trace.s21[k].real()) << "," << format_double(trace.s21[k].imag());
            } else {
                out << "," << format_double(trace.response[k]);
            }
            out << "," << format_double(trace.sigma[k]) << "\n";
        }
    }
    return out.str();
}

ExperimentTrace parse_trace_csv(std::istream &in, ExperimentKind kind) {
    const CsvTable table = CsvTable::parse(in);
    const auto [a1, a2] = axis_names(kind);
    ExperimentTrace t;
    t.kind = kind;
    const auto xs = table.numeric_column(a1);
    if (xs.empty()) throw InputError("trace has no data rows");
    std::vector<double> ys;
    if (!a2.empty()) ys = table.numeric_column(a2);
    if (is_complex_response(kind)) {
        const auto re = table.numeric_column("re");
        const auto im = table.numeric_column("im");
        for (std::size_t k = 0; k < re.size(); ++k) t.s21.emplace_back(re[k], im[k]);
    } else {
        t.response = table.numeric_column("response");
    }
    t.sigma = table.find_column("sigma") ? table.numeric_column("sigma") : std::vector<double>(xs.size(), 1.0);
    if (a2.empty()) {
        t.axis = xs;
    } else {
        // Slow axis in blocks, fast axis repeating within each block.
        std::size_t nx = 0;
        while (nx < ys.size() && ys[nx] == ys[0]) ++nx;
        if (xs.size() % nx != 0) throw InputError("map rows do not form a complete grid");
        t.axis.assign(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(nx));
        for (std::size_t k = 0; k < xs.size(); ++k) {
            if (k % nx == 0) t.axis2.push_back(ys[k]);
            if (xs[k] != t.axis[k % nx] || ys[k] != t.axis2[k / nx])
                throw InputError("map rows do not form a complete grid (row " + std::to_string(k + 1) + ")");
        }
    }
    t.validate();
    return t;
}

ExperimentTrace load_trace(const std::filesystem::path &path, ExperimentKind kind) {
    std::istringstream in(read_text_file(path));
    try {
        return parse_trace_csv(in, kind);
    } catch (const InputError &e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

// ----------------------------------------------------------------- models

double NotchParams::q_i() const { return 1.0 / (1.0 / q_l - std::cos(phi) / q_c); }

NotchParams NotchParams::from_quality(double f_r, double q_i, double q_c, double phi) {
    if (!(q_i > 0.0) || !(q_c > 0.0) || !(f_r > 0.0)) throw DomainError("quality factors and f_r must be positive");
    NotchParams p;
    p.f_r = f_r;
    p.q_c = q_c;
    p.phi = phi;
    p.q_l = 1.0 / (1.0 / q_i + std::cos(phi) / q_c);
    return p;
}

std::complex<double> s21_notch_model(double f, const NotchParams &p) {
    const cd env = p.amplitude * std::polar(1.0, p.theta - kTwoPi * f * p.tau);
    if (std::isinf(p.q_c)) return env;
    const cd res = (p.q_l / p.q_c) * std::polar(1.0, p.phi) / cd(1.0, 2.0 * p.q_l * (f / p.f_r - 1.0));
    return env * (1.0 - res);
}

double multiphoton_peak(double f01, double alpha, int n) {
    if (n < 1) throw DomainError("photon number must be >= 1");
    return f01 + 0.5 * (n - 1) * alpha;
}

double two_tone_model(double f, double power, const TwoToneParams &p) {
    const double s = std::pow(10.0, (power - p.p_sat) / 10.0);
    double v = p.baseline;
    for (int n = 1; n <= p.levels; ++n) {
        const double sn = std::pow(s, n);
        const double w = sn / (1.0 + sn);
        v += p.amplitude * w * lorentz(f, multiphoton_peak(p.f01, p.alpha, n) + p.stark_slope * power, p.linewidth);
    }
    return v;
}

namespace {

// Two lowest charge-basis levels by Sturm-sequence bisection on the
// tridiagonal Hamiltonian; matches the dense diagonalization to rounding.
double transmon_f01_sturm(double ej, double ec) {
    if (!(ej >= 0.0) || !(ec > 0.0)) throw DomainError("transmon spectrum needs E_J >= 0 and E_C > 0");
    constexpr int cutoff = kFluxMapCutoff;
    constexpr int dim = 2 * cutoff + 1;
    const double off2 = 0.25 * (ej / ec) * (ej / ec);
    auto count_below = [&](double x) {
        int count = 0;
        double d = 1.0;
        for (int k = 0; k < dim; ++k) {
            const double n = static_cast<double>(k - cutoff);
            d = 4.0 * n * n - x - (k > 0 ? off2 / d : 0.0);
            if (d == 0.0) d = -1e-300;
            if (d < 0.0) ++count;
        }
        return count;
    };
    const double radius = ej / ec;
    auto level = [&](int index) {
        double lo = -radius - 1.0;
        double hi = 4.0 * cutoff * cutoff + radius + 1.0;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo) + std::abs(hi)); ++it) {
            const double mid = 0.5 * (lo + hi);
            (count_below(mid) > index ? hi : lo) = mid;
        }
        return 0.5 * (lo + hi);
    };
    return ec * (level(1) - level(0));
}

}  // namespace

FluxBranches flux_branches(double voltage, const FluxMapParams &p) {
    if (!(p.volts_per_phi0 != 0.0)) throw DomainError("volts per flux quantum must be nonzero");
    FluxBranches b;
    b.flux = (voltage - p.offset) / p.volts_per_phi0;
    b.f_q = transmon_f01_sturm(squid_ej(p.ej_max, p.asymmetry, b.flux), p.ec);
    const DressedPair pair = jc_eigenfrequencies(b.f_q, p.f_r_bare, p.g);
    b.lower = pair.lower;
    b.upper = pair.upper;
    const double delta = b.f_q - p.f_r_bare;
    const double split = std::sqrt(delta * delta + 4.0 * p.g * p.g);
    b.upper_weight = split > 0.0 ? 0.5 * (1.0 - delta / split) : 0.5;
    b.lower_weight = 1.0 - b.upper_weight;
    return b;
}

double flux_map_model(double voltage, double f, const FluxMapParams &p) {
    return flux_map_point(f, flux_branches(voltage, p), p);
}

double ChevronParams::decay_time() const {
    QubitNoise n;
    n.t1 = t1;
    n.t2 = t2;
    return rabi_decay_time(n);
}

double chevron_model(double duration, double drive_frequency, const ChevronParams &p) {
    QubitNoise n;
    n.t1 = p.t1;
    n.t2 = p.t2;
    return direct_detection_prob(p.omega, drive_frequency - p.f01, duration, n);
}

double t1_model(double t, double t1, double amplitude, double offset) {
    return amplitude * std::exp(-t / t1) + offset;
}

double ramsey_model(double t, double t2_star, double detuning, double phase) {
    return 0.5 * (1.0 + std::cos(kTwoPi * detuning * t + phase) * std::exp(-t / t2_star));
}

double echo_model(double t, double t2) { return 0.5 * (1.0 + std::exp(-t / t2)); }

// ----------------------------------------------------------------- fits

std::optional<Measurement> ExperimentFit::find(std::string_view name) const {
    for (const auto &[k, v] : derived)
        if (k == name) return v;
    return std::nullopt;
}

Measurement ExperimentFit::get(std::string_view name) const {
    if (auto m = find(name)) return *m;
    throw InputError("fit has no derived quantity '" + std::string(name) + "'");
}

bool ExperimentFit::has_flag(std::string_view flag) const {
    return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

std::vector<std::string> model_parameter_names(ExperimentKind kind, const FitSettings &settings) {
    switch (kind) {
        case ExperimentKind::notch: return {"f_r", "q_l", "q_c", "phi", "amplitude", "theta", "tau"};
        case ExperimentKind::two_tone: {
            std::vector<std::string> n = {"f01", "alpha", "amplitude", "linewidth", "p_sat", "baseline"};
            if (settings.fit_stark_slope) n.push_back("stark_slope");
            return n;
        }
        case ExperimentKind::flux_map:
            return {"g", "ej_max", "f_r_bare", "volts_per_phi0", "offset", "depth", "kappa"};
        case ExperimentKind::chevron: return {"omega", "f01", "decay_time"};
        case ExperimentKind::t1: {
            std::vector<std::string> n = {"t1", "amplitude"};
            if (settings.fit_offset) n.push_back("offset");
            return n;
        }
        case ExperimentKind::ramsey: return {"t2_star", "detuning", "phase"};
        case ExperimentKind::echo: return {"t2"};
    }
    return {};
}

ExperimentFit fit_resonator(const ExperimentTrace &trace, const FitSettings &settings) {
    require_kind(trace, ExperimentKind::notch);
    require_axis_span(trace, 10);
    const auto &f = trace.axis;
    const std::size_t n = f.size();
    const double f_c = 0.5 * (f.front() + f.back());

    // Cable delay from the phase slope of the off-resonant edges.
    std::vector<double> phase(n);
    phase[0] = std::arg(trace.s21[0]);
    for (std::size_t i = 1; i < n; ++i)
        phase[i] = phase[i - 1] + wrap_angle(std::arg(trace.s21[i]) - std::arg(trace.s21[i - 1]));
    const std::size_t edge = std::max<std::size_t>(3, n / 10);
    double fl = 0, pl = 0, fr = 0, pr = 0;
    for (std::size_t i = 0; i < edge; ++i) {
        fl += f[i];
        pl += phase[i];
        fr += f[n - 1 - i];
        pr += phase[n - 1 - i];
    }
    const double tau0 = -((pr - pl) / (fr - fl)) / kTwoPi;

    std::vector<cd> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = trace.s21[i] * std::polar(1.0, kTwoPi * (f[i] - f_c) * tau0);
    cd env = 0.0;
    for (std::size_t i = 0; i < edge; ++i) env += z[i] + z[n - 1 - i];
    env /= static_cast<double>(2 * edge);
    if (std::abs(env) == 0.0) throw InputError("resonator trace has zero off-resonant transmission");
    std::vector<double> mag(n), dip(n);
    for (std::size_t i = 0; i < n; ++i) {
        const cd u = z[i] / env;
        mag[i] = std::abs(u);
        dip[i] = std::norm(1.0 - u);
    }
    const std::size_t k0 = argmin(smooth3(mag));
    const cd depth = 1.0 - z[k0] / env;
    const double ratio = std::max(std::abs(depth), 1e-3);
    const double phi0 = std::clamp(std::arg(depth), -1.2, 1.2);
    const double width = fwhm(f, smooth3(dip), k0, 0.0);
    const double q_l0 = f[k0] / std::max(width, 2.0 * (f[1] - f[0]));

    std::vector<FitParameter> params = {
        {"f_r", f[k0], f.front(), f.back()},
        {"q_l", q_l0, 0.0, kInf},
        {"q_c", q_l0 / ratio, 0.0, kInf},
        {"phi", phi0, -0.5 * kPi, 0.5 * kPi},
        {"amplitude", std::abs(env), 0.0, kInf},
        {"theta", std::arg(env), -kInf, kInf, false, 1.0},
        {"tau", tau0, -kInf, kInf, false, 1.0 / (f.back() - f.front())},
    };
    // Phase referenced to the trace centre while fitting.
    const WeightedData data = weighted_data(trace);
    const ModelFn model = [&f, f_c](std::span<const double> p, std::span<double> out) {
        NotchParams np = notch_from(p);
        np.tau = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const cd s = s21_notch_model(f[i], np) * std::polar(1.0, -kTwoPi * (f[i] - f_c) * p[6]);
            out[2 * i] = s.real();
            out[2 * i + 1] = s.imag();
        }
    };
    FitResult fit = lsq_fit(weighted_residuals(data, model), params, data.y.size(), settings.lsq);

    // Back to the delay convention referenced at zero frequency.
    const std::size_t it = fit.index("theta");
    const std::size_t itau = fit.index("tau");
    Eigen::MatrixXd t = Eigen::MatrixXd::Identity(fit.covariance.rows(), fit.covariance.cols());
    t(static_cast<Eigen::Index>(it), static_cast<Eigen::Index>(itau)) = kTwoPi * f_c;
    fit.values[it] = wrap_angle(fit.values[it] + kTwoPi * f_c * fit.values[itau]);
    fit.covariance = t * fit.covariance * t.transpose();
    for (std::size_t k = 0; k < fit.values.size(); ++k)
        fit.uncertainties[k] = std::sqrt(std::max(fit.covariance(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)), 0.0));

    ExperimentFit out = make_fit(ExperimentKind::notch, std::move(fit));
    const std::size_t iql = out.fit.index("q_l"), iqc = out.fit.index("q_c"), iphi = out.fit.index("phi");
    out.derived = {
        {"f_r", param_measurement(out.fit, "f_r")},
        {"q_l", param_measurement(out.fit, "q_l")},
        {"q_c", param_measurement(out.fit, "q_c")},
        {"q_i", propagate(out.fit, [&](const std::vector<double> &v) {
             return 1.0 / (1.0 / v[iql] - std::cos(v[iphi]) / v[iqc]);
         })},
    };
    return out;
}

ExperimentFit fit_two_tone(const ExperimentTrace &trace, const FitSettings &settings) {
    require_kind(trace, ExperimentKind::two_tone);
    require_axis_span(trace, 10);
    const auto &f = trace.axis;
    const auto &power = trace.axis2;
    const std::size_t ny = power.size();
    const double base0 = median(trace.response);
    const double sig = median(trace.sigma);

    std::vector<std::vector<double>> rows(ny);
    std::vector<double> heights(ny);
    std::vector<std::size_t> peaks(ny);
    for (std::size_t j = 0; j < ny; ++j) {
        rows[j] = smooth3(row(trace, j));
        peaks[j] = argmax(rows[j]);
        heights[j] = rows[j][peaks[j]] - base0;
    }
    // f01 from the lowest power that shows a clear line.
    std::size_t low = ny;
    for (std::size_t j = 0; j < ny && low == ny; ++j)
        if (heights[j] >= 5.0 * sig) low = j;
    if (low == ny) low = argmax(heights);
    const std::size_t k01 = peaks[low];
    const double f01_0 = f[k01];

    std::vector<double> line(ny);
    for (std::size_t j = 0; j < ny; ++j) line[j] = rows[j][k01] - base0;
    const double amp0 = std::max(*std::max_element(line.begin(), line.end()), sig);
    double p_sat0 = power[ny / 2];
    for (std::size_t j = 0; j < ny; ++j) {
        if (line[j] >= 0.5 * amp0) {
            p_sat0 = j == 0 ? power[0]
                            : power[j - 1] + (0.5 * amp0 - line[j - 1]) / (line[j] - line[j - 1]) * (power[j] - power[j - 1]);
            break;
        }
    }
    const auto &top = rows[ny - 1];
    const double lw0 = std::max(fwhm(f, top, k01, base0), 2.0 * (f[1] - f[0]));

    // Nearest resolved line below f01 in the highest-power row is f02 / 2.
    const double threshold = std::max(5.0 * sig, 0.1 * (top[k01] - base0));
    const double window = lw0;
    std::optional<double> f_two;
    for (std::size_t i = 1; i + 1 < f.size(); ++i) {
        if (f[i] >= f01_0 - 2.0 * lw0) break;
        if (top[i] - base0 < threshold) continue;
        bool is_max = true;
        for (std::size_t k = 0; k < f.size() && is_max; ++k)
            if (std::abs(f[k] - f[i]) <= window && top[k] > top[i]) is_max = false;
        if (is_max) f_two = f[i];
    }
    if (!f_two) throw InputError("insufficient peaks: no multiphoton line resolved below f01");

    std::vector<FitParameter> params = {
        {"f01", f01_0, f.front(), f.back()},
        {"alpha", 2.0 * (*f_two - f01_0), -kInf, 0.0},
        {"amplitude", amp0, 0.0, kInf},
        {"linewidth", lw0, 0.0, kInf},
        {"p_sat", p_sat0, -kInf, kInf, false, std::max(1.0, power.back() - power.front())},
        {"baseline", base0, -kInf, kInf, false, amp0},
    };
    if (settings.fit_stark_slope) params.push_back({"stark_slope", 0.0, -kInf, kInf, false, lw0});
    const WeightedData data = weighted_data(trace);
    FitResult fit = lsq_fit(weighted_residuals(data, model_for(trace, settings)), params, data.y.size(), settings.lsq);
    ExperimentFit out = make_fit(ExperimentKind::two_tone, std::move(fit));
    out.derived = {{"f01", param_measurement(out.fit, "f01")}, {"alpha", param_measurement(out.fit, "alpha")}};
    return out;
}

namespace {

double flux_f01(double ej_max, double asymmetry, double ec, double flux) {
    return transmon_f01_sturm(squid_ej(ej_max, asymmetry, flux), ec);
}

// Flux in [0, 1/2] where the qubit meets the resonator, if any.
std::optional<double> crossing_flux(double ej_max, double asymmetry, double ec, double f_r) {
    double lo = 0.0;
    double hi = 0.5;
    if (flux_f01(ej_max, asymmetry, ec, lo) <= f_r || flux_f01(ej_max, asymmetry, ec, hi) >= f_r) return std::nullopt;
    for (int it = 0; it < 50; ++it) {
        const double mid = 0.5 * (lo + hi);
        (flux_f01(ej_max, asymmetry, ec, mid) > f_r ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double interpolate(const std::vector<double> &x, const std::vector<double> &y, double at) {
    const auto it = std::upper_bound(x.begin(), x.end(), at);
    if (it == x.begin()) return y.front();
    if (it == x.end()) return y.back();
    const std::size_t k = static_cast<std::size_t>(it - x.begin());
    const double t = (at - x[k - 1]) / (x[k] - x[k - 1]);
    return y[k - 1] + t * (y[k] - y[k - 1]);
}

}  // namespace

ExperimentFit fit_avoided_crossing(const ExperimentTrace &trace, const FitSettings &settings) {
    require_kind(trace, ExperimentKind::flux_map);
    require_axis_span(trace, 10);
    if (!(settings.ec > 0.0)) throw DomainError("flux-map fit needs the charging energy E_C > 0");
    if (!(settings.asymmetry >= 0.0 && settings.asymmetry < 1.0)) throw DomainError("SQUID asymmetry must be in [0, 1)");
    const auto &f = trace.axis;
    const auto &v = trace.axis2;
    const std::size_t ny = v.size();

    std::vector<double> dips(ny), floor(ny);
    std::vector<std::vector<double>> rows(ny);
    for (std::size_t j = 0; j < ny; ++j) {
        rows[j] = smooth3(row(trace, j));
        const std::size_t k = argmin(rows[j]);
        dips[j] = f[k];
        floor[j] = rows[j][k];
    }
    const double f_r0 = median(dips);
    std::vector<double> dev(ny);
    for (std::size_t j = 0; j < ny; ++j) dev[j] = std::abs(dips[j] - f_r0);
    const std::size_t jq = argmin(dev);
    const double depth0 = std::clamp(1.0 - floor[jq], 0.02, 0.98);
    std::vector<double> inverted(rows[jq].size());
    for (std::size_t i = 0; i < inverted.size(); ++i) inverted[i] = 1.0 - rows[jq][i];
    const double kappa0 = std::max(fwhm(f, inverted, argmin(rows[jq]), 0.0), 2.0 * (f[1] - f[0]));

    // The pull of the resonator is even in flux about the offset.
    double offset0 = v[ny / 2];
    double best_asym = kInf;
    for (std::size_t c2 = 0; c2 + 1 < 2 * ny; ++c2) {
        const double c = 0.5 * (v[c2 / 2] + v[(c2 + 1) / 2]);
        double s = 0.0;
        std::size_t count = 0;
        for (std::size_t j = 0; j < ny; ++j) {
            const double mirror = 2.0 * c - v[j];
            if (mirror < v.front() || mirror > v.back()) continue;
            const double d = dev[j] - interpolate(v, dev, mirror);
            s += d * d;
            ++count;
        }
        if (3 * count < ny) continue;
        s /= static_cast<double>(count);
        if (s < best_asym) {
            best_asym = s;
            offset0 = c;
        }
    }
    double reach = std::abs(v[argmax(dev)] - offset0);
    if (reach == 0.0) reach = 0.25 * (v.back() - v.front());

    const WeightedData data = weighted_data(trace);
    const ModelFn model = model_for(trace, settings);
    std::vector<std::vector<double>> candidates;
    for (int k = 0; k < 16; ++k) {
        const double f_top = f_r0 + 20e6 * std::pow(200.0, k / 15.0);
        const double ej = std::pow(f_top + settings.ec, 2) / (8.0 * settings.ec);
        const auto phi_c = crossing_flux(ej, settings.asymmetry, settings.ec, f_r0);
        if (!phi_c) continue;
        for (double g : {5e6, 10e6, 20e6, 40e6, 70e6, 100e6, 150e6})
            candidates.push_back({g, ej, f_r0, reach / *phi_c, offset0, depth0, kappa0});
    }
    if (candidates.empty()) throw InputError("flux sweep does not bring the qubit across the resonator");
    const auto guess = best_candidate(data, model, candidates);

    const double v_span = v.back() - v.front();
    auto build = [&](const std::vector<double> &x, bool fix_g) {
        std::vector<FitParameter> p = {
            {"g", x[0], 0.0, kInf},
            {"ej_max", x[1], 0.0, kInf},
            {"f_r_bare", x[2], f.front(), f.back()},
            {"volts_per_phi0", x[3], 0.0, kInf},
            {"offset", x[4], -kInf, kInf, false, v_span},
            {"depth", x[5], 0.0, 1.0},
            {"kappa", x[6], 0.0, kInf},
        };
        if (fix_g) p[0] = FitParameter{"g", 0.0, -kInf, kInf, true};
        return p;
    };
    const ResidualFunction residuals = weighted_residuals(data, model);
    bool degenerate = false;
    FitResult fit;
    try {
        fit = lsq_fit(residuals, build(guess, false), data.y.size(), settings.lsq);
        degenerate = !(fit.value("g") > 3.0 * fit.uncertainty("g"));
    } catch (const NumericalError &) {
        degenerate = true;
    }
    if (degenerate) {
        const std::vector<double> start = fit.values.empty() ? guess : fit.values;
        fit = lsq_fit(residuals, build(start, true), data.y.size(), settings.lsq);
    }

    ExperimentFit out = make_fit(ExperimentKind::flux_map, std::move(fit));
    if (degenerate) out.flags.push_back("degenerate_g");
    const FluxMapParams p = flux_from(out.fit.values, settings);
    // Closest approach of the two branches over the swept range.
    Measurement separation;
    bool crosses = false;
    double prev = 0.0;
    double min_split = kInf;
    for (int k = 0; k <= 400; ++k) {
        const double volt = v.front() + v_span * k / 400.0;
        const FluxBranches b = flux_branches(volt, p);
        const double delta = b.f_q - p.f_r_bare;
        if (k > 0 && (delta == 0.0 || (delta > 0.0) != (prev > 0.0))) crosses = true;
        prev = delta;
        min_split = std::min(min_split, b.upper - b.lower);
    }
    const Measurement g = param_measurement(out.fit, "g");
    separation = crosses ? Measurement{2.0 * g.value, 2.0 * g.uncertainty} : Measurement{min_split, 2.0 * g.uncertainty};
    out.derived = {
        {"g", g},
        {"ej_max", param_measurement(out.fit, "ej_max")},
        {"f_r_bare", param_measurement(out.fit, "f_r_bare")},
        {"volts_per_phi0", param_measurement(out.fit, "volts_per_phi0")},
        {"offset", param_measurement(out.fit, "offset")},
        {"min_separation", separation},
    };
    return out;
}

ExperimentFit fit_chevron(const ExperimentTrace &trace, const FitSettings &settings) {
    require_kind(trace, ExperimentKind::chevron);
    require_axis_span(trace, 10);
    const auto &t = trace.axis;
    const auto &fd = trace.axis2;
    std::vector<double> means(fd.size());
    for (std::size_t j = 0; j < fd.size(); ++j) {
        const auto r = row(trace, j);
        means[j] = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
    }
    const std::size_t j0 = argmax(means);
    const double omega0 = dominant_frequency(t, row(trace, j0)).first;
    const double span = t.back() - t.front();
    const WeightedData data = weighted_data(trace);
    const ModelFn model = model_for(trace, settings);
    std::vector<std::vector<double>> candidates;
    for (int k = 0; k <= 20; ++k)
        for (double m : {0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0})
            candidates.push_back({omega0 * (0.9 + 0.01 * k), fd[j0], m * span});
    const auto guess = best_candidate(data, model, candidates);
    std::vector<FitParameter> params = {
        {"omega", guess[0], 0.0, kInf},
        {"f01", guess[1], fd.front(), fd.back()},
        {"decay_time", guess[2], 0.0, kInf},
    };
    ExperimentFit out = make_fit(ExperimentKind::chevron,
                                 lsq_fit(weighted_residuals(data, model), params, data.y.size(), settings.lsq));
    out.derived = {{"omega", param_measurement(out.fit, "omega")},
                   {"f01", param_measurement(out.fit, "f01")},
                   {"decay_time", param_measurement(out.fit, "decay_time")}};
    return out;
}

ExperimentFit fit_t1(const ExperimentTrace &trace, const FitSettings &settings) {
    require_kind(trace, ExperimentKind::t1);
    require_axis_span(trace, 5);
    const auto &t = trace.axis;
    const auto y = smooth3(trace.response);
    const std::size_t n = y.size();
    double offset0 = 0.0;
    if (settings.fit_offset) {
        const std::size_t tail = std::max<std::size_t>(2, n / 10);
        offset0 = std::accumulate(y.end() - static_cast<std::ptrdiff_t>(tail), y.end(), 0.0) / static_cast<double>(tail);
    }
    const double amp0 = (trace.response[0] + trace.response[1] + trace.response[2]) / 3.0 - offset0;
    if (!(amp0 > 0.0)) throw InputError("T1 trace does not start above its baseline");
    const double t1_0 = first_crossing_below(t, y, offset0 + amp0 / std::exp(1.0)).value_or((t.back() - t.front()) / 3.0);
    std::vector<FitParameter> params = {{"t1", t1_0, 0.0, kInf}, {"amplitude", amp0, 0.0, kInf}};
    if (settings.fit_offset) params.push_back({"offset", offset0, -kInf, kInf, false, amp0});
    const WeightedData data = weighted_data(trace);
    ExperimentFit out = make_fit(
        ExperimentKind::t1, lsq_fit(weighted_residuals(data, model_for(trace, settings)), params, data.y.size(), settings.lsq));
    out.derived = {{"t1", param_measurement(out.fit, "t1")}};
    return out;
}

ExperimentFit fit_ramsey(const ExperimentTrace &trace, const FitSettings &settings) {
    require_kind(trace, ExperimentKind::ramsey);
    require_axis_span(trace, 10);
    const auto &t = trace.axis;
    const double nu = dominant_frequency(t, trace.response).first;
    const double span = t.back() - t.front();
    const WeightedData data = weighted_data(trace);
    const ModelFn model = model_for(trace, settings);
    // Grid in (detuning, T2*); the phase follows from a linear fit of the
    // cosine and sine quadratures.
    const auto &y = trace.response;
    std::vector<std::vector<double>> candidates;
    for (int k = 0; k <= 100; ++k) {
        const double det = nu * (0.5 + 0.01 * k);
        for (double m : {0.0625, 0.125, 0.25, 0.5, 1.0, 2.0}) {
            const double tau = m * span;
            double cc = 0, ss = 0, cs = 0, yc = 0, ys = 0;
            for (std::size_t i = 0; i < t.size(); ++i) {
                const double e = std::exp(-t[i] / tau);
                const double c = e * std::cos(kTwoPi * det * t[i]);
                const double sn = e * std::sin(kTwoPi * det * t[i]);
                const double w = 1.0 / (trace.sigma[i] * trace.sigma[i]);
                const double d = 2.0 * y[i] - 1.0;
                cc += w * c * c;
                ss += w * sn * sn;
                cs += w * c * sn;
                yc += w * d * c;
                ys += w * d * sn;
            }
            const double detm = cc * ss - cs * cs;
            if (!(std::abs(detm) > 0.0)) continue;
            const double a = (yc * ss - ys * cs) / detm;
            const double b = (ys * cc - yc * cs) / detm;
            candidates.push_back({tau, det, std::atan2(-b, a)});
        }
    }
    const auto guess = best_candidate(data, model, candidates);
    std::vector<FitParameter> params = {
        {"t2_star", guess[0], 0.0, kInf},
        {"detuning", guess[1], 0.0, kInf},
        {"phase", guess[2], -kInf, kInf, false, 1.0},
    };
    FitResult fit = lsq_fit(weighted_residuals(data, model), params, data.y.size(), settings.lsq);
    fit.values[fit.index("phase")] = wrap_angle(fit.value("phase"));
    ExperimentFit out = make_fit(ExperimentKind::ramsey, std::move(fit));
    out.derived = {{"t2_star", param_measurement(out.fit, "t2_star")},
                   {"detuning", param_measurement(out.fit, "detuning")}};
    return out;
}

ExperimentFit fit_echo(const ExperimentTrace &trace, const FitSettings &settings) {
    require_kind(trace, ExperimentKind::echo);
    require_axis_span(trace, 5);
    const auto &t = trace.axis;
    const double t2_0 = first_crossing_below(t, smooth3(trace.response), 0.5 * (1.0 + 1.0 / std::exp(1.0)))
                            .value_or((t.back() - t.front()) / 3.0);
    std::vector<FitParameter> params = {{"t2", t2_0, 0.0, kInf}};
    const WeightedData data = weighted_data(trace);
    ExperimentFit out = make_fit(
        ExperimentKind::echo, lsq_fit(weighted_residuals(data, model_for(trace, settings)), params, data.y.size(), settings.lsq));
    out.derived = {{"t2", param_measurement(out.fit, "t2")}};
    return out;
}

ExperimentFit fit_trace(const ExperimentTrace &trace, const FitSettings &settings) {
    switch (trace.kind) {
        case ExperimentKind::notch: return fit_resonator(trace, settings);
        case ExperimentKind::two_tone: return fit_two_tone(trace, settings);
        case ExperimentKind::flux_map: return fit_avoided_crossing(trace, settings);
        case ExperimentKind::chevron: return fit_chevron(trace, settings);
        case ExperimentKind::t1: return fit_t1(trace, settings);
        case ExperimentKind::ramsey: return fit_ramsey(trace, settings);
        case ExperimentKind::echo: return fit_echo(trace, settings);
    }
    throw InputError("unknown experiment kind");
}

DispersiveShiftResult dispersive_shift_measurement(const ExperimentTrace &ground, const ExperimentTrace &excited,
                                                   const FitSettings &settings) {
    DispersiveShiftResult out;
    out.ground = fit_resonator(ground, settings);
    out.excited = fit_resonator(excited, settings);
    const Measurement fg = out.ground.get("f_r");
    const Measurement fe = out.excited.get("f_r");
    out.chi = Measurement{0.5 * (fg.value - fe.value), 0.5 * std::hypot(fg.uncertainty, fe.uncertainty)};
    auto rms = [](const FitResult &f) { return f.residual_norm() / std::sqrt(static_cast<double>(f.n_residuals)); };
    const double rg = rms(out.ground.fit);
    const double re = rms(out.excited.fit);
    out.residual_ratio = rg > 0.0 ? re / rg : (re > 0.0 ? kInf : 1.0);
    out.distortion_warning = out.residual_ratio > kDistortionRatio;
    return out;
}

// -------------------------------------------------------------- synthesis

double Scenario::parameter(std::string_view name) const {
    for (std::size_t k = 0; k < names.size(); ++k)
        if (names[k] == name) return truth[k];
    throw InputError("scenario has no parameter '" + std::string(name) + "'");
}

void Scenario::set_parameter(std::string_view name, double value) {
    for (std::size_t k = 0; k < names.size(); ++k) {
        if (names[k] == name) {
            truth[k] = value;
            return;
        }
    }
    throw InputError("scenario has no parameter '" + std::string(name) + "'");
}

double Scenario::signal_scale() const {
    switch (kind) {
        case ExperimentKind::notch: return parameter("amplitude") * parameter("q_l") / parameter("q_c");
        case ExperimentKind::two_tone: return parameter("amplitude");
        case ExperimentKind::flux_map: return parameter("depth");
        case ExperimentKind::chevron: return 1.0;
        case ExperimentKind::t1: return parameter("amplitude");
        default: return 0.5;
    }
}

namespace {

std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

}  // namespace

Scenario default_scenario(ExperimentKind kind) {
    Scenario s;
    s.kind = kind;
    s.names = model_parameter_names(kind, s.settings);
    switch (kind) {
        case ExperimentKind::notch: {
            const NotchParams p = NotchParams::from_quality(7.419143e9, 7.62e3, 7.30e3);
            s.truth = {p.f_r, p.q_l, p.q_c, 0.0, 0.9, 0.5, 2e-9};
            const double kappa = p.f_r / p.q_l;
            s.axis = linspace(p.f_r - 5.0 * kappa, p.f_r + 5.0 * kappa, 801);
            break;
        }
        case ExperimentKind::two_tone:
            s.truth = {5.7660e9, -198.6e6, 1.0, 3e6, -10.0, 0.0};
            s.axis = linspace(5.50e9, 5.82e9, 641);
            s.axis2 = linspace(-30.0, 10.0, 17);
            break;
        case ExperimentKind::flux_map: {
            s.settings.ec = 170e6;
            s.settings.asymmetry = 0.3;
            const double f_r = 7.419143e9;
            s.truth = {68e6, 50e9, f_r, 1.0, 0.05, 0.5, f_r / 3728.0};
            s.axis = linspace(f_r - 120e6, f_r + 120e6, 481);
            s.axis2 = linspace(-0.45, 0.55, 81);
            break;
        }
        case ExperimentKind::chevron: {
            const ChevronParams c{5e6, 5.7660e9, 1.52e-6, 0.61e-6};
            s.truth = {c.omega, c.f01, c.decay_time()};
            s.axis = linspace(0.0, 2e-6, 201);
            s.axis2 = linspace(c.f01 - 20e6, c.f01 + 20e6, 41);
            break;
        }
        case ExperimentKind::t1:
            s.truth = {1.52e-6, 1.0};
            s.axis = linspace(0.0, 5.0 * 1.52e-6, 1000);
            break;
        case ExperimentKind::ramsey:
            s.truth = {0.229e-6, 5e6, 0.0};
            s.axis = linspace(0.0, 5.0 * 0.229e-6, 1000);
            break;
        case ExperimentKind::echo:
            s.truth = {0.61e-6};
            s.axis = linspace(0.0, 5.0 * 0.61e-6, 1000);
            break;
    }
    return s;
}

std::vector<double> evaluate_scenario(const Scenario &scenario, const std::vector<double> &params) {
    if (params.size() != scenario.names.size()) throw InputError("parameter count does not match the model");
    const std::size_t n = scenario.axis.size() * (scenario.axis2.empty() ? 1 : scenario.axis2.size());
    std::vector<double> out(is_complex_response(scenario.kind) ? 2 * n : n);
    evaluate(scenario.kind, params, Grid{scenario.axis, scenario.axis2}, scenario.settings, out);
    return out;
}

ExperimentTrace synthesize(const Scenario &scenario, std::uint64_t seed) {
    if (!(scenario.snr > 0.0) || !(scenario.relative_noise >= 0.0)) throw DomainError("noise level must be positive");
    const auto m = evaluate_scenario(scenario, scenario.truth);
    ExperimentTrace t;
    t.kind = scenario.kind;
    t.axis = scenario.axis;
    t.axis2 = scenario.axis2;
    const std::size_t n = t.size();
    const double additive = scenario.signal_scale() / scenario.snr;
    NormalSource rng(seed);
    t.sigma.resize(n);
    if (is_complex_response(t.kind)) {
        t.s21.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const cd z(m[2 * i], m[2 * i + 1]);
            const double s = scenario.relative_noise > 0.0 ? scenario.relative_noise * std::abs(z) : additive;
            t.sigma[i] = s;
            const double re = z.real() + s * rng.normal();
            const double im = z.imag() + s * rng.normal();
            t.s21[i] = cd(re, im);
        }
    } else {
        t.response.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double s = scenario.relative_noise > 0.0 ? scenario.relative_noise * std::abs(m[i]) : additive;
            t.sigma[i] = s;
            t.response[i] = m[i] + s * rng.normal();
        }
    }
    t.validate();
    return t;
}

double trace_cost(const Scenario &scenario, const ExperimentTrace &trace, const std::vector<double> &params) {
    if (trace.kind != scenario.kind) throw InputError("trace kind does not match the scenario");
    const WeightedData data = weighted_data(trace);
    return cost_of(data, model_for(trace, scenario.settings), params);
}

RoundTripSummary round_trip(const Scenario &scenario, int repetitions, std::uint64_t seed, double n_sigma,
                            unsigned threads) {
    if (repetitions < 1) throw DomainError("round trip needs at least one repetition");
    const auto start = std::chrono::steady_clock::now();
    const std::size_t np = scenario.names.size();
    struct Outcome {
        bool failed = false;
        bool cost_violation = false;
        std::vector<char> within;
    };
    std::vector<Outcome> outcomes(static_cast<std::size_t>(repetitions));
    std::atomic<int> next{0};
    auto work = [&] {
        for (int r = next++; r < repetitions; r = next++) {
            Outcome &o = outcomes[static_cast<std::size_t>(r)];
            o.within.assign(np, 0);
            const ExperimentTrace trace = synthesize(scenario, trial_seed(seed, static_cast<std::uint64_t>(r)));
            try {
                const ExperimentFit fit = fit_trace(trace, scenario.settings);
                o.failed = !fit.fit.converged;
                for (std::size_t k = 0; k < np; ++k) {
                    const std::size_t idx = fit.fit.index(scenario.names[k]);
                    double diff = fit.fit.values[idx] - scenario.truth[k];
                    if (scenario.names[k] == "theta" || scenario.names[k] == "phase") diff = wrap_angle(diff);
                    o.within[k] = std::abs(diff) <= n_sigma * fit.fit.uncertainties[idx];
                }
                o.cost_violation = fit.fit.cost > trace_cost(scenario, trace, scenario.truth) + 1e-9;
            } catch (const std::exception &) {
                o.failed = true;
            }
        }
    };
    const unsigned hw = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(repetitions));
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto &th : pool) th.join();

    RoundTripSummary s;
    s.kind = scenario.kind;
    s.repetitions = repetitions;
    s.per_parameter_within.assign(np, 0);
    for (const auto &o : outcomes) {
        bool all = !o.failed;
        for (std::size_t k = 0; k < np; ++k) {
            s.per_parameter_within[k] += o.within[k];
            all = all && o.within[k];
        }
        s.recovered += all;
        s.fit_failures += o.failed;
        s.cost_violations += o.cost_violation;
    }
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return s;
}

// -------------------------------------------------------------- JSON

namespace {

nlohmann::json number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

double number_from(const nlohmann::json &j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return kInf;
        if (s == "-inf") return -kInf;
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    throw InputError("expected a number in fit record");
}

}  // namespace

nlohmann::json to_json(const Measurement &m) {
    return nlohmann::json{{"value", number(m.value)}, {"uncertainty", number(m.uncertainty)}};
}

nlohmann::json to_json(const ExperimentFit &fit) {
    nlohmann::json params = nlohmann::json::array();
    const FitResult &f = fit.fit;
    for (std::size_t k = 0; k < f.values.size(); ++k)
        params.push_back({{"name", f.names[k]}, {"value", number(f.values[k])}, {"uncertainty", number(f.uncertainties[k])}});
    nlohmann::json cov = nlohmann::json::array();
    for (Eigen::Index r = 0; r < f.covariance.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < f.covariance.cols(); ++c) row.push_back(number(f.covariance(r, c)));
        cov.push_back(row);
    }
    nlohmann::json derived = nlohmann::json::array();
    for (const auto &[name, m] : fit.derived) {
        nlohmann::json d = to_json(m);
        d["name"] = name;
        derived.push_back(d);
    }
    return nlohmann::json{
        {"kind", to_string(fit.kind)},
        {"parameters", params},
        {"covariance", cov},
        {"derived", derived},
        {"flags", fit.flags},
        {"diagnostics",
         {{"cost", number(f.cost)},
          {"residual_norm", number(f.residual_norm())},
          {"n_residuals", f.n_residuals},
          {"dof", f.dof},
          {"reduced_chi_square", number(f.reduced_chi_square)},
          {"iterations", f.iterations},
          {"final_damping", number(f.final_damping)},
          {"converged", f.converged},
          {"status", f.status}}},
    };
}

nlohmann::json to_json(const DispersiveShiftResult &result) {
    nlohmann::json flags = nlohmann::json::array();
    if (result.distortion_warning) flags.push_back("distortion_warning");
    nlohmann::json derived = nlohmann::json::array();
    derived.push_back(
        {{"name", "chi"}, {"value", number(result.chi.value)}, {"uncertainty", number(result.chi.uncertainty)}});
    return {
        {"kind", "dispersive_shift"},
        {"derived", derived},
        {"flags", flags},
        {"residual_ratio", number(result.residual_ratio)},
        {"ground", to_json(result.ground)},
        {"excited", to_json(result.excited)},
    };
}

ExperimentFit experiment_fit_from_json(const nlohmann::json &j) {
    try {
        ExperimentFit out;
        out.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
        for (const auto &p : j.at("parameters")) {
            out.fit.names.push_back(p.at("name").get<std::string>());
            out.fit.values.push_back(number_from(p.at("value")));
            out.fit.uncertainties.push_back(number_from(p.at("uncertainty")));
        }
        const auto n = static_cast<Eigen::Index>(out.fit.values.size());
        out.fit.covariance = Eigen::MatrixXd::Zero(n, n);
        const auto &cov = j.at("covariance");
        if (static_cast<Eigen::Index>(cov.size()) != n) throw InputError("covariance size does not match parameters");
        for (Eigen::Index r = 0; r < n; ++r) {
            if (static_cast<Eigen::Index>(cov[static_cast<std::size_t>(r)].size()) != n)
                throw InputError("covariance is not square");
            for (Eigen::Index c = 0; c < n; ++c)
                out.fit.covariance(r, c) = number_from(cov[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
        }
        for (const auto &d : j.at("derived"))
            out.derived.emplace_back(d.at("name").get<std::string>(),
                                     Measurement{number_from(d.at("value")), number_from(d.at("uncertainty"))});
        out.flags = j.at("flags").get<std::vector<std::string>>();
        const auto &diag = j.at("diagnostics");
        out.fit.cost = number_from(diag.at("cost"));
        out.fit.n_residuals = diag.at("n_residuals").get<std::size_t>();
        out.fit.dof = diag.at("dof").get<int>();
        out.fit.reduced_chi_square = number_from(diag.at("reduced_chi_square"));
        out.fit.iterations = diag.at("iterations").get<int>();
        out.fit.final_damping = number_from(diag.at("final_damping"));
        out.fit.converged = diag.at("converged").get<bool>();
        out.fit.status = diag.at("status").get<std::string>();
        return out;
    } catch (const nlohmann::json::exception &e) {
        throw InputError(std::string("malformed fit record: ") + e.what());
    }
}

}  // namespace qtwin
