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

// Independent reference computations used only by the test suites. Nothing
// here calls into the library implementation it is used to check.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

namespace qtwin::oracle {

/// Number of eigenvalues of the symmetric tridiagonal matrix (diag, off)
/// strictly below x, by Sturm sequence (LDL^T pivot signs).
inline int sturm_count(const std::vector<double> &diag, const std::vector<double> &off, double x) {
    int count = 0;
    double d = 1.0;
    for (std::size_t i = 0; i < diag.size(); ++i) {
        const double b2 = i == 0 ? 0.0 : off[i - 1] * off[i - 1];
        d = diag[i] - x - (i == 0 ? 0.0 : b2 / d);
        if (d == 0.0) {
            d = -1e-300;
        }
        if (d < 0.0) {
            ++count;
        }
    }
    return count;
}

/// k-th smallest eigenvalue (0-based) by bisection on the Sturm count.
inline double tridiagonal_eigenvalue(const std::vector<double> &diag, const std::vector<double> &off, int k) {
    double lo = 1e300;
    double hi = -1e300;
    for (std::size_t i = 0; i < diag.size(); ++i) {
        double r = 0.0;
        if (i > 0) r += std::abs(off[i - 1]);
        if (i + 1 < diag.size()) r += std::abs(off[i]);
        lo = std::min(lo, diag[i] - r);
        hi = std::max(hi, diag[i] + r);
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (sturm_count(diag, off, mid) > k) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// Cooper-pair-box levels (E_J, E_C in the same unit) by Sturm bisection.
inline std::vector<double> cpb_levels_bisection(double ej, double ec, int cutoff, int n_levels) {
    std::vector<double> diag;
    for (int n = -cutoff; n <= cutoff; ++n) {
        diag.push_back(4.0 * ec * n * n);
    }
    std::vector<double> off(diag.size() - 1, -0.5 * ej);
    std::vector<double> out;
    for (int k = 0; k < n_levels; ++k) {
        out.push_back(tridiagonal_eigenvalue(diag, off, k));
    }
    return out;
}

/// Composite Simpson rule with n (even) intervals.
inline double simpson(const std::function<double(double)> &f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) {
        s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    }
    return s * h / 3.0;
}

/// Complete elliptic integral of the first kind (modulus k) by quadrature of
/// the defining integral.
inline double elliptic_k_quadrature(double k) {
    return simpson([k](double t) { return 1.0 / std::sqrt(1.0 - k * k * std::sin(t) * std::sin(t)); }, 0.0,
                   M_PI / 2, 20000);
}

inline double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
    }
    return r;
}

/// P[X >= k] for X ~ Binomial(n, p).
inline double binomial_upper_tail(int n, int k, double p) {
    double s = 0.0;
    for (int j = k; j <= n; ++j) {
        s += binomial(n, j) * std::pow(p, j) * std::pow(1.0 - p, n - j);
    }
    return s;
}


/// Integral of ln|p - q| for q along the straight segment a -> b.
inline double log_segment_integral(double px, double py, double ax, double ay, double bx, double by) {
    const double len = std::hypot(bx - ax, by - ay);
    const double tx = (bx - ax) / len;
    const double ty = (by - ay) / len;
    const double s1 = (ax - px) * tx + (ay - py) * ty;
    const double s2 = s1 + len;
    const double d = -(ax - px) * ty + (ay - py) * tx;
    auto f = [d](double s) {
        const double rr = s * s + d * d;
        double v = -s;
        if (rr > 0.0) v += 0.5 * s * std::log(rr);
        if (d != 0.0) v += d * std::atan(s / d);
        return v;
    };
    return f(s2) - f(s1);
}

/// Capacitance per unit length of a square conductor (side `inner`) centred
/// in a grounded square shell (side `outer`), by a boundary-element method
/// with piecewise-constant charge on cosine-graded panels and a free
/// additive constant for the logarithmic kernel.
inline double square_coax_capacitance_bem(double inner, double outer, double eps_r, int panels_per_side) {
    struct Panel {
        double ax, ay, bx, by;
        double v;
    };
    std::vector<Panel> panels;
    auto add_square = [&](double side, double v) {
        const double h = 0.5 * side;
        const double cx[5] = {-h, h, h, -h, -h};
        const double cy[5] = {-h, -h, h, h, -h};
        for (int e = 0; e < 4; ++e) {
            for (int k = 0; k < panels_per_side; ++k) {
                const double t0 = 0.5 * (1.0 - std::cos(M_PI * k / panels_per_side));
                const double t1 = 0.5 * (1.0 - std::cos(M_PI * (k + 1) / panels_per_side));
                panels.push_back({cx[e] + (cx[e + 1] - cx[e]) * t0, cy[e] + (cy[e + 1] - cy[e]) * t0,
                                  cx[e] + (cx[e + 1] - cx[e]) * t1, cy[e] + (cy[e + 1] - cy[e]) * t1, v});
            }
        }
    };
    add_square(inner, 1.0);
    add_square(outer, 0.0);
    const int n = static_cast<int>(panels.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 1, n + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    for (int i = 0; i < n; ++i) {
        const double px = 0.5 * (panels[i].ax + panels[i].bx);
        const double py = 0.5 * (panels[i].ay + panels[i].by);
        for (int j = 0; j < n; ++j)
            a(i, j) = -log_segment_integral(px, py, panels[j].ax, panels[j].ay, panels[j].bx, panels[j].by);
        a(i, n) = 1.0;
        rhs[i] = panels[i].v;
        const double len = std::hypot(panels[i].bx - panels[i].ax, panels[i].by - panels[i].ay);
        a(n, i) = len;  // charge neutrality
    }
    // Unknowns are sigma / (2 pi eps) and the additive constant.
    const Eigen::VectorXd sol = a.partialPivLu().solve(rhs);
    double q = 0.0;
    for (int j = 0; j < n / 2; ++j)
        q += sol[j] * std::hypot(panels[j].bx - panels[j].ax, panels[j].by - panels[j].ay);
    const double eps0 = 8.8541878128e-12;
    return 2.0 * M_PI * eps0 * eps_r * q;
}

/// Excited-state population of a two-level system driven from the ground
/// state, H = (delta/2) sz + (omega/2) sx in Hz, by RK4 integration of the
/// Schroedinger equation in the rotating frame.
inline double rabi_excitation_rk4(double omega, double delta, double t, int steps) {
    using C = std::complex<double>;
    const C mi(0.0, -2.0 * M_PI);
    auto deriv = [&](const C &g, const C &e, C &dg, C &de) {
        dg = mi * (-0.5 * delta * g + 0.5 * omega * e);
        de = mi * (0.5 * omega * g + 0.5 * delta * e);
    };
    C g(1.0, 0.0);
    C e(0.0, 0.0);
    const double h = t / steps;
    for (int k = 0; k < steps; ++k) {
        C g1, e1, g2, e2, g3, e3, g4, e4;
        deriv(g, e, g1, e1);
        deriv(g + 0.5 * h * g1, e + 0.5 * h * e1, g2, e2);
        deriv(g + 0.5 * h * g2, e + 0.5 * h * e2, g3, e3);
        deriv(g + h * g3, e + h * e3, g4, e4);
        g += h / 6.0 * (g1 + 2.0 * g2 + 2.0 * g3 + g4);
        e += h / 6.0 * (e1 + 2.0 * e2 + 2.0 * e3 + e4);
    }
    return std::norm(e);
}

}  // namespace qtwin::oracle
