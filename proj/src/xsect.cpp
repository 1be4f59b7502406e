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

#include "qtwin/xsect.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <limits>

#include "qtwin/constants.hpp"
#include "qtwin/error.hpp"

namespace qtwin {

namespace {

constexpr int kMinResolution = 64;

// Appends nodes (a, b] with a near-constant spacing h; the last node is b.
void append_uniform(std::vector<double> &nodes, double a, double b, double h) {
    if (!(b > a)) return;
    const int n = std::max(1, static_cast<int>(std::ceil((b - a) / h - 1e-9)));
    for (int k = 1; k <= n; ++k) nodes.push_back(k == n ? b : a + (b - a) * k / n);
}

// Appends nodes (a, b] with spacings growing geometrically from h0, capped at
// hmax, rescaled to land exactly on b.
void append_graded(std::vector<double> &nodes, double a, double b, double h0, double growth, double hmax) {
    if (!(b > a)) return;
    std::vector<double> steps;
    double total = 0.0;
    double s = h0;
    while (total < b - a) {
        s = std::min(s * growth, hmax);
        steps.push_back(s);
        total += s;
    }
    const double fix = (b - a) / total;
    double pos = a;
    for (std::size_t k = 0; k < steps.size(); ++k) {
        pos += steps[k] * fix;
        nodes.push_back(k + 1 == steps.size() ? b : pos);
    }
}

// Distances from 0 to `extent`: uniform over [0, core], graded beyond.
std::vector<double> half_axis(std::span<const double> breakpoints, double core, double extent, double h,
                              double growth) {
    std::vector<double> nodes{0.0};
    double prev = 0.0;
    for (double bp : breakpoints) {
        if (bp > prev && bp <= core) {
            append_uniform(nodes, prev, bp, h);
            prev = bp;
        }
    }
    const double core_end = std::min(core, extent);
    append_uniform(nodes, prev, core_end, h);
    append_graded(nodes, core_end, extent, h, growth, 4.0 * core);
    return nodes;
}

struct Grid {
    std::vector<double> x;
    std::vector<double> y;
    Eigen::MatrixXd eps;  // per cell
    std::vector<char> fixed;
    std::vector<double> value;
    bool neumann_sides = false;
    int surface_row = 0;  // index of y = 0 for cpw, top row for parallel plate

    std::size_t nx() const { return x.size(); }
    std::size_t ny() const { return y.size(); }
    std::size_t id(std::size_t i, std::size_t j) const { return j * x.size() + i; }
    double cell_eps(long i, long j) const {
        if (i < 0 || j < 0 || i >= eps.rows() || j >= eps.cols()) return 0.0;
        return eps(i, j);
    }
    void fix(std::size_t i, std::size_t j, double v) {
        fixed[id(i, j)] = 1;
        value[id(i, j)] = v;
    }
};

std::vector<double> mirrored(const std::vector<double> &half) {
    std::vector<double> full;
    full.reserve(2 * half.size() - 1);
    for (auto it = half.rbegin(); it != half.rend(); ++it) full.push_back(-*it);
    for (std::size_t k = 1; k < half.size(); ++k) full.push_back(half[k]);
    return full;
}

Grid build_cpw(const CrossSectionGeometry &g, const SolverOptions &o) {
    Grid grid;
    const double h = g.gap / o.resolution;
    const double half_w = 0.5 * g.trace_width;
    const double xmax = half_w + g.gap + g.ground_extent;
    const double bx[] = {half_w, half_w + g.gap};
    grid.x = mirrored(half_axis(bx, half_w + 2.0 * g.gap, xmax, h, o.growth));

    const double by[] = {g.gap};
    const std::vector<double> up = half_axis(by, g.gap, g.vacuum_height, h, o.growth);
    const std::vector<double> down = half_axis(by, g.gap, g.substrate_thickness, h, o.growth);
    for (auto it = down.rbegin(); it != down.rend(); ++it) grid.y.push_back(-*it);
    for (std::size_t k = 1; k < up.size(); ++k) grid.y.push_back(up[k]);
    grid.surface_row = static_cast<int>(down.size() - 1);

    const std::size_t nx = grid.nx();
    const std::size_t ny = grid.ny();
    grid.eps.resize(static_cast<Eigen::Index>(nx - 1), static_cast<Eigen::Index>(ny - 1));
    for (std::size_t j = 0; j + 1 < ny; ++j)
        grid.eps.col(static_cast<Eigen::Index>(j)).setConstant(static_cast<int>(j) < grid.surface_row ? g.substrate_eps
                                                                                                     : 1.0);
    grid.fixed.assign(nx * ny, 0);
    grid.value.assign(nx * ny, 0.0);
    for (std::size_t i = 0; i < nx; ++i) {
        grid.fix(i, 0, 0.0);
        grid.fix(i, ny - 1, 0.0);
    }
    for (std::size_t j = 0; j < ny; ++j) {
        grid.fix(0, j, 0.0);
        grid.fix(nx - 1, j, 0.0);
    }
    const auto j0 = static_cast<std::size_t>(grid.surface_row);
    const double tol = 1e-9 * h;
    for (std::size_t i = 0; i < nx; ++i) {
        const double ax = std::abs(grid.x[i]);
        if (ax <= half_w + tol) grid.fix(i, j0, g.voltage);
        else if (ax >= half_w + g.gap - tol) grid.fix(i, j0, 0.0);
    }
    return grid;
}

Grid build_parallel_plate(const CrossSectionGeometry &g, const SolverOptions &o) {
    Grid grid;
    const double h = g.substrate_thickness / o.resolution;
    grid.x.push_back(0.0);
    append_uniform(grid.x, 0.0, g.trace_width, h);
    grid.y.push_back(-g.substrate_thickness);
    append_uniform(grid.y, -g.substrate_thickness, 0.0, h);
    grid.neumann_sides = true;
    grid.surface_row = static_cast<int>(grid.ny() - 1);
    const std::size_t nx = grid.nx();
    const std::size_t ny = grid.ny();
    grid.eps = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(nx - 1), static_cast<Eigen::Index>(ny - 1),
                                         g.substrate_eps);
    grid.fixed.assign(nx * ny, 0);
    grid.value.assign(nx * ny, 0.0);
    for (std::size_t i = 0; i < nx; ++i) {
        grid.fix(i, 0, 0.0);
        grid.fix(i, ny - 1, g.voltage);
    }
    return grid;
}

Grid build_coax(const CrossSectionGeometry &g, const SolverOptions &o) {
    Grid grid;
    const double h = g.gap / o.resolution;
    const double a = 0.5 * g.trace_width;
    const double b = a + g.gap;
    std::vector<double> axis{-b};
    append_uniform(axis, -b, -a, h);
    append_uniform(axis, -a, a, h);
    append_uniform(axis, a, b, h);
    grid.x = axis;
    grid.y = axis;
    const std::size_t n = axis.size();
    grid.eps = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n - 1), static_cast<Eigen::Index>(n - 1),
                                         g.substrate_eps);
    grid.fixed.assign(n * n, 0);
    grid.value.assign(n * n, 0.0);
    const double tol = 1e-9 * h;
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            if (i == 0 || j == 0 || i == n - 1 || j == n - 1) grid.fix(i, j, 0.0);
            else if (std::abs(axis[i]) <= a + tol && std::abs(axis[j]) <= a + tol) grid.fix(i, j, g.voltage);
        }
    }
    return grid;
}

// Coupling coefficient (per unit eps0) of the edge from node (i, j) to
// (i + 1, j).
double horizontal_coeff(const Grid &g, std::size_t i, std::size_t j) {
    const double dx = g.x[i + 1] - g.x[i];
    const long li = static_cast<long>(i);
    const long lj = static_cast<long>(j);
    const double below = j > 0 ? g.cell_eps(li, lj - 1) * (g.y[j] - g.y[j - 1]) : 0.0;
    const double above = j + 1 < g.ny() ? g.cell_eps(li, lj) * (g.y[j + 1] - g.y[j]) : 0.0;
    return 0.5 * (below + above) / dx;
}

double vertical_coeff(const Grid &g, std::size_t i, std::size_t j) {
    const double dy = g.y[j + 1] - g.y[j];
    const long li = static_cast<long>(i);
    const long lj = static_cast<long>(j);
    const double left = i > 0 ? g.cell_eps(li - 1, lj) * (g.x[i] - g.x[i - 1]) : 0.0;
    const double right = i + 1 < g.nx() ? g.cell_eps(li, lj) * (g.x[i + 1] - g.x[i]) : 0.0;
    return 0.5 * (left + right) / dy;
}

Grid build_grid(const CrossSectionGeometry &geom, const SolverOptions &o) {
    switch (geom.kind) {
        case GeometryKind::cpw:
            return build_cpw(geom, o);
        case GeometryKind::parallel_plate:
            return build_parallel_plate(geom, o);
        case GeometryKind::coax:
            return build_coax(geom, o);
    }
    throw DomainError("unknown geometry kind");
}

// Second-order one-sided derivative at distance 0 from samples at 0, h1, h1 + h2.
double one_sided_derivative(double f0, double f1, double f2, double h1, double h2) {
    return -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * f0 + (h1 + h2) / (h1 * h2) * f1 - h1 / (h2 * (h1 + h2)) * f2;
}

// Line integral of u along nodes [first, last] of the surface row, with
// optional singular edges at either end. Within kEdgeZone cells of an edge
// the discrete field is unreliable, so u = K^2/r + c is fitted on
// [kEdgeZone, kEdgeFit] cells and integrated analytically down to `cutoff`.
constexpr int kEdgeZone = 4;
constexpr int kEdgeFit = 16;

struct Segment {
    std::size_t first;
    std::size_t last;
    bool edge_first;
    bool edge_last;
};

double segment_integral(const std::vector<double> &x, const std::vector<double> &u, const Segment &seg,
                        double cutoff) {
    const std::size_t span = seg.last - seg.first;
    const std::size_t zone = static_cast<std::size_t>(kEdgeZone);
    const std::size_t need = (seg.edge_first ? zone : 0) + (seg.edge_last ? zone : 0);
    if (span < std::max<std::size_t>(need, 1) + 1) throw NumericalError("surface segment too short for edge fitting");
    const std::size_t lo = seg.first + (seg.edge_first ? zone : 0);
    const std::size_t hi = seg.last - (seg.edge_last ? zone : 0);
    double total = 0.0;
    for (std::size_t i = lo; i < hi; ++i) total += 0.5 * (u[i] + u[i + 1]) * (x[i + 1] - x[i]);

    auto edge_term = [&](std::size_t edge, bool forward) {
        // Least squares of u*r = k2 + c*r over the fit window.
        double s1 = 0, sr = 0, srr = 0, sy = 0, sry = 0;
        for (int k = kEdgeZone; k <= kEdgeFit; ++k) {
            const std::size_t i = forward ? edge + static_cast<std::size_t>(k) : edge - static_cast<std::size_t>(k);
            if (forward ? i > seg.last : i < seg.first || static_cast<std::size_t>(k) > edge) break;
            const double r = std::abs(x[i] - x[edge]);
            const double yv = u[i] * r;
            s1 += 1;
            sr += r;
            srr += r * r;
            sy += yv;
            sry += r * yv;
        }
        const std::size_t inner = forward ? edge + zone : edge - zone;
        const double rz = std::abs(x[inner] - x[edge]);
        double k2 = 0.0;
        double c = 0.0;
        const double det = s1 * srr - sr * sr;
        if (s1 >= 3 && det > 0.0) {
            k2 = (srr * sy - sr * sry) / det;
            c = (s1 * sry - sr * sy) / det;
        } else {
            k2 = u[inner] * rz;
        }
        return k2 * std::log(rz / cutoff) + c * (rz - cutoff);
    };
    if (seg.edge_first) total += edge_term(seg.first, true);
    if (seg.edge_last) total += edge_term(seg.last, false);
    return total;
}

}  // namespace

std::string to_string(InterfaceKind kind) {
    switch (kind) {
        case InterfaceKind::MA:
            return "MA";
        case InterfaceKind::MS:
            return "MS";
        case InterfaceKind::SA:
            return "SA";
    }
    return "?";
}

InterfaceKind interface_kind_from_string(const std::string &name) {
    if (name == "MA" || name == "ma") return InterfaceKind::MA;
    if (name == "MS" || name == "ms") return InterfaceKind::MS;
    if (name == "SA" || name == "sa") return InterfaceKind::SA;
    throw InputError("unknown interface kind '" + name + "'");
}

std::vector<InterfaceLayer> default_interface_layers() {
    return {{InterfaceKind::MA, 4.8e-9, 8.0}, {InterfaceKind::MS, 0.3e-9, 11.4}, {InterfaceKind::SA, 2.3e-9, 4.0}};
}

CrossSectionGeometry CrossSectionGeometry::cpw(double trace_width, double gap, double substrate_eps,
                                               std::vector<InterfaceLayer> layers) {
    CrossSectionGeometry g;
    g.kind = GeometryKind::cpw;
    g.trace_width = trace_width;
    g.gap = gap;
    g.ground_extent = 10.0 * gap;
    g.vacuum_height = 10.0 * gap;
    g.substrate_thickness = 380e-6;
    g.substrate_eps = substrate_eps;
    g.layers = std::move(layers);
    return g;
}

CrossSectionGeometry CrossSectionGeometry::parallel_plate(double width, double separation, double substrate_eps,
                                                          std::vector<InterfaceLayer> layers) {
    CrossSectionGeometry g;
    g.kind = GeometryKind::parallel_plate;
    g.trace_width = width;
    g.gap = 0.0;
    g.ground_extent = 0.0;
    g.vacuum_height = 0.0;
    g.substrate_thickness = separation;
    g.substrate_eps = substrate_eps;
    g.layers = std::move(layers);
    return g;
}

CrossSectionGeometry CrossSectionGeometry::coax(double inner_side, double outer_side, double fill_eps) {
    CrossSectionGeometry g;
    g.kind = GeometryKind::coax;
    g.trace_width = inner_side;
    g.gap = 0.5 * (outer_side - inner_side);
    g.ground_extent = 0.0;
    g.vacuum_height = 0.0;
    g.substrate_thickness = 0.0;
    g.substrate_eps = fill_eps;
    return g;
}

void CrossSectionGeometry::validate() const {
    auto positive = [](double v, const char *what) {
        if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string("cross-section: ") + what + " must be > 0");
    };
    positive(trace_width, "trace width");
    if (!(substrate_eps >= 1.0)) throw DomainError("cross-section: substrate permittivity must be >= 1");
    if (!std::isfinite(voltage)) throw DomainError("cross-section: voltage must be finite");
    switch (kind) {
        case GeometryKind::cpw:
            positive(gap, "gap");
            positive(ground_extent, "ground extent");
            positive(substrate_thickness, "substrate thickness");
            positive(vacuum_height, "vacuum height");
            positive(metal_thickness, "metal thickness");
            break;
        case GeometryKind::parallel_plate:
            positive(substrate_thickness, "plate separation");
            break;
        case GeometryKind::coax:
            positive(gap, "shell clearance");
            break;
    }
    bool seen[3] = {false, false, false};
    for (const auto &l : layers) {
        const int k = static_cast<int>(l.kind);
        if (seen[k]) throw DomainError("cross-section: duplicate " + to_string(l.kind) + " layer");
        seen[k] = true;
        positive(l.thickness, "layer thickness");
        if (!(l.permittivity >= 1.0)) throw DomainError("cross-section: layer permittivity must be >= 1");
    }
}

double CrossSectionGeometry::feature_length() const {
    return kind == GeometryKind::parallel_plate ? substrate_thickness : gap;
}

double FieldSolution::capacitance() const {
    const double v = geometry.voltage;
    if (v == 0.0) throw DomainError("capacitance undefined at zero voltage");
    return 2.0 * energy_total() / (v * v);
}

FieldSolution solve_potential(const CrossSectionGeometry &geom, const SolverOptions &options) {
    geom.validate();
    if (options.resolution < kMinResolution)
        throw DomainError("solve_potential: resolution must be at least 64 cells across the feature");
    if (!(options.growth >= 1.0)) throw DomainError("solve_potential: growth ratio must be >= 1");
    if (!(options.tolerance > 0.0) || options.max_iterations < 1)
        throw DomainError("solve_potential: invalid solver controls");

    const Grid grid = build_grid(geom, options);
    const std::size_t nx = grid.nx();
    const std::size_t ny = grid.ny();
    const std::size_t nn = nx * ny;

    std::vector<long> unknown(nn, -1);
    long nu = 0;
    for (std::size_t k = 0; k < nn; ++k)
        if (!grid.fixed[k]) unknown[k] = nu++;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(nu) * 5);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nu);
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(nu);
    auto couple = [&](std::size_t p, std::size_t q, double c) {
        if (c == 0.0) return;
        const long up = unknown[p];
        const long uq = unknown[q];
        if (up >= 0) {
            diag[up] += c;
            if (uq >= 0) trip.emplace_back(up, uq, -c);
            else rhs[up] += c * grid.value[q];
        }
        if (uq >= 0) {
            diag[uq] += c;
            if (up >= 0) trip.emplace_back(uq, up, -c);
            else rhs[uq] += c * grid.value[p];
        }
    };
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i + 1 < nx; ++i) couple(grid.id(i, j), grid.id(i + 1, j), horizontal_coeff(grid, i, j));
    for (std::size_t j = 0; j + 1 < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) couple(grid.id(i, j), grid.id(i, j + 1), vertical_coeff(grid, i, j));
    for (long k = 0; k < nu; ++k) {
        if (!(diag[k] > 0.0)) throw DomainError("solve_potential: node isolated from every conductor");
        trip.emplace_back(k, k, diag[k]);
    }

    Eigen::SparseMatrix<double> a(nu, nu);
    a.setFromTriplets(trip.begin(), trip.end());

    FieldSolution sol;
    sol.geometry = geom;
    sol.x = grid.x;
    sol.y = grid.y;
    sol.cell_eps = grid.eps;

    Eigen::VectorXd v = Eigen::VectorXd::Zero(nu);
    const double bnorm = rhs.norm();
    if (nu > 0 && bnorm > 0.0) {
        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                                 Eigen::IncompleteCholesky<double, Eigen::Lower, Eigen::NaturalOrdering<int>>>
            cg;
        cg.setTolerance(options.tolerance);
        cg.setMaxIterations(options.max_iterations);
        cg.compute(a);
        if (cg.info() != Eigen::Success) throw NumericalError("solve_potential: preconditioner factorization failed");
        v = cg.solve(rhs);
        sol.iterations = static_cast<int>(cg.iterations());
        sol.residual = (rhs - a * v).norm() / bnorm;
        if (cg.info() != Eigen::Success || !(sol.residual < options.tolerance))
            throw NumericalError("solve_potential: no convergence within " + std::to_string(options.max_iterations) +
                                 " iterations (relative residual " + std::to_string(sol.residual) + ")");
    }

    sol.potential.resize(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(ny));
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            const std::size_t k = grid.id(i, j);
            sol.potential(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                grid.fixed[k] ? grid.value[k] : v[unknown[k]];
        }

    // Per-cell quadrature of the edge differences; sums to the discrete energy.
    const auto &p = sol.potential;
    for (std::size_t j = 0; j + 1 < ny; ++j) {
        const double dy = grid.y[j + 1] - grid.y[j];
        const bool substrate = geom.kind != GeometryKind::cpw || static_cast<int>(j) < grid.surface_row;
        double row = 0.0;
        for (std::size_t i = 0; i + 1 < nx; ++i) {
            const double e = grid.eps(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (e == 0.0) continue;
            const double dx = grid.x[i + 1] - grid.x[i];
            const auto ii = static_cast<Eigen::Index>(i);
            const auto jj = static_cast<Eigen::Index>(j);
            const double b = p(ii + 1, jj) - p(ii, jj);
            const double t = p(ii + 1, jj + 1) - p(ii, jj + 1);
            const double l = p(ii, jj + 1) - p(ii, jj);
            const double r = p(ii + 1, jj + 1) - p(ii + 1, jj);
            row += e * (0.5 * (b * b + t * t) * dy / dx + 0.5 * (l * l + r * r) * dx / dy);
        }
        (substrate ? sol.energy_substrate : sol.energy_vacuum) += 0.5 * kVacuumPermittivity * row;
    }
    return sol;
}

double InterfaceEpr::get(InterfaceKind kind) const {
    switch (kind) {
        case InterfaceKind::MA:
            return ma;
        case InterfaceKind::MS:
            return ms;
        case InterfaceKind::SA:
            return sa;
    }
    return 0.0;
}

double InterfaceEpr::error(InterfaceKind kind) const {
    switch (kind) {
        case InterfaceKind::MA:
            return ma_error;
        case InterfaceKind::MS:
            return ms_error;
        case InterfaceKind::SA:
            return sa_error;
    }
    return 0.0;
}

void InterfaceEpr::set(InterfaceKind kind, double value) {
    switch (kind) {
        case InterfaceKind::MA:
            ma = value;
            break;
        case InterfaceKind::MS:
            ms = value;
            break;
        case InterfaceKind::SA:
            sa = value;
            break;
    }
}

InterfaceEpr interface_participation(const FieldSolution &sol) {
    const auto &g = sol.geometry;
    InterfaceEpr out;
    if (g.layers.empty()) return out;
    if (g.kind == GeometryKind::coax) throw InputError("interface layers are not supported on the coax geometry");
    const double total = sol.energy_total();
    if (!(total > 0.0)) throw DomainError("interface_participation: zero field energy");

    const auto &x = sol.x;
    const auto &y = sol.y;
    const auto &p = sol.potential;
    const std::size_t nx = x.size();
    const double eps0 = kVacuumPermittivity;

    if (g.kind == GeometryKind::parallel_plate) {
        for (const auto &layer : g.layers)
            if (layer.kind != InterfaceKind::MS)
                throw InputError("parallel-plate geometry has no " + to_string(layer.kind) + " surface");
        const auto &layer = g.layers.front();
        const auto top = static_cast<Eigen::Index>(y.size() - 1);
        const double h1 = y[top] - y[top - 1];
        const double h2 = y[top - 1] - y[top - 2];
        std::vector<double> u(nx);
        for (std::size_t i = 0; i < nx; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            const double en = one_sided_derivative(p(ii, top), p(ii, top - 1), p(ii, top - 2), h1, h2);
            u[i] = 0.5 * eps0 * g.substrate_eps * g.substrate_eps * en * en / layer.permittivity;
        }
        const Segment all{0, nx - 1, false, false};
        out.ms = layer.thickness * segment_integral(x, u, all, g.metal_thickness) / total;
        return out;
    }

    // CPW: everything lives on the substrate surface row.
    Eigen::Index j0 = 0;
    while (j0 < static_cast<Eigen::Index>(y.size()) && y[j0] < 0.0) ++j0;
    const double hu1 = y[j0 + 1] - y[j0];
    const double hu2 = y[j0 + 2] - y[j0 + 1];
    const double hd1 = y[j0] - y[j0 - 1];
    const double hd2 = y[j0 - 1] - y[j0 - 2];
    std::vector<double> e_air(nx);
    std::vector<double> e_sub(nx);
    std::vector<double> e_tan(nx, 0.0);
    for (std::size_t i = 0; i < nx; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        e_air[i] = one_sided_derivative(p(ii, j0), p(ii, j0 + 1), p(ii, j0 + 2), hu1, hu2);
        e_sub[i] = one_sided_derivative(p(ii, j0), p(ii, j0 - 1), p(ii, j0 - 2), hd1, hd2);
        if (i > 0 && i + 1 < nx) e_tan[i] = (p(ii + 1, j0) - p(ii - 1, j0)) / (x[i + 1] - x[i - 1]);
    }

    const double half_w = 0.5 * g.trace_width;
    const double tol = 1e-9 * g.gap;
    auto node = [&](double pos) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < nx; ++i)
            if (std::abs(x[i] - pos) < std::abs(x[best] - pos)) best = i;
        if (std::abs(x[best] - pos) > tol) throw NumericalError("edge not on a grid line");
        return best;
    };
    const std::size_t gl_out = node(-(half_w + g.gap));
    const std::size_t t_left = node(-half_w);
    const std::size_t t_right = node(half_w);
    const std::size_t gr_in = node(half_w + g.gap);
    const std::vector<Segment> metal = {
        {0, gl_out, false, true}, {t_left, t_right, true, true}, {gr_in, nx - 1, true, false}};
    const std::vector<Segment> gaps = {{gl_out, t_left, true, true}, {t_right, gr_in, true, true}};

    for (const auto &layer : g.layers) {
        std::vector<double> u(nx, 0.0);
        const double el = layer.permittivity;
        const auto &segments = layer.kind == InterfaceKind::SA ? gaps : metal;
        for (std::size_t i = 0; i < nx; ++i) {
            switch (layer.kind) {
                case InterfaceKind::MA:
                    u[i] = 0.5 * eps0 * e_air[i] * e_air[i] / el;
                    break;
                case InterfaceKind::MS:
                    u[i] = 0.5 * eps0 * g.substrate_eps * g.substrate_eps * e_sub[i] * e_sub[i] / el;
                    break;
                case InterfaceKind::SA:
                    u[i] = 0.5 * eps0 * (el * e_tan[i] * e_tan[i] + e_air[i] * e_air[i] / el);
                    break;
            }
        }
        double integral = 0.0;
        for (const auto &seg : segments) integral += segment_integral(x, u, seg, g.metal_thickness);
        out.set(layer.kind, layer.thickness * integral / total);
    }
    return out;
}

RichardsonEstimate richardson(std::span<const double> h, std::span<const double> values, double relative_noise) {
    if (h.size() != values.size()) throw DomainError("richardson: size mismatch");
    if (h.size() < 3) throw DomainError("richardson: at least three resolutions are required");
    for (std::size_t k = 0; k < h.size(); ++k) {
        if (!(h[k] > 0.0) || !std::isfinite(values[k])) throw DomainError("richardson: invalid sample");
        if (k > 0 && !(h[k] < h[k - 1])) throw DomainError("richardson: spacings must strictly decrease");
    }
    const std::size_t n = h.size();
    const double f1 = values[n - 3];
    const double f2 = values[n - 2];
    const double f3 = values[n - 1];
    const double d1 = f1 - f2;
    const double d2 = f2 - f3;

    RichardsonEstimate est;
    double scale = 0.0;
    for (double v : values) scale = std::max(scale, std::abs(v));
    const double noise = relative_noise * std::max(scale, std::numeric_limits<double>::min());
    int sign = 0;
    for (std::size_t k = 1; k < n; ++k) {
        const double d = values[k - 1] - values[k];
        if (std::abs(d) <= noise) continue;
        const int s = d > 0 ? 1 : -1;
        if (sign != 0 && s != sign) est.monotone = false;
        sign = s;
    }
    if (std::abs(d1) <= noise && std::abs(d2) <= noise) {
        est.value = f3;
        est.error = 0.0;
        est.order = std::numeric_limits<double>::infinity();
        return est;
    }
    if (!est.monotone || std::abs(d2) <= noise || (d1 > 0) != (d2 > 0)) {
        est.monotone = false;
        est.value = f3;
        est.error = std::max(std::abs(d1), std::abs(d2));
        est.order = std::numeric_limits<double>::quiet_NaN();
        return est;
    }
    const double r1 = h[n - 3] / h[n - 1];
    const double r2 = h[n - 2] / h[n - 1];
    const double target = d1 / d2;
    auto ratio = [&](double q) { return (std::pow(r1, q) - std::pow(r2, q)) / (std::pow(r2, q) - 1.0); };
    double lo = 0.05;
    double hi = 10.0;
    double q;
    if (target <= ratio(lo)) q = lo;
    else if (target >= ratio(hi)) q = hi;
    else {
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (ratio(mid) < target ? lo : hi) = mid;
        }
        q = 0.5 * (lo + hi);
    }
    est.order = q;
    est.value = f3 - d2 / (std::pow(r2, q) - 1.0);
    est.error = std::abs(est.value - f3);
    return est;
}

ConvergenceStudy convergence_study(const CrossSectionGeometry &geom, std::span<const int> resolutions,
                                   const SolverOptions &options) {
    if (resolutions.size() < 3) throw DomainError("convergence_study: at least three resolutions are required");
    for (std::size_t k = 1; k < resolutions.size(); ++k)
        if (resolutions[k] <= resolutions[k - 1])
            throw DomainError("convergence_study: resolutions must strictly increase");
    ConvergenceStudy study;
    std::vector<double> h;
    std::vector<double> ma;
    std::vector<double> ms;
    std::vector<double> sa;
    for (int res : resolutions) {
        SolverOptions o = options;
        o.resolution = res;
        const FieldSolution sol = solve_potential(geom, o);
        study.resolutions.push_back(res);
        study.energies.push_back(sol.energy_total());
        study.samples.push_back(interface_participation(sol));
        h.push_back(geom.feature_length() / res);
        ma.push_back(study.samples.back().ma);
        ms.push_back(study.samples.back().ms);
        sa.push_back(study.samples.back().sa);
    }
    // Samples agreeing to well within the solver tolerance count as equal.
    const double noise = 10.0 * options.tolerance;
    study.energy = richardson(h, study.energies, noise);
    study.ma = richardson(h, ma, noise);
    study.ms = richardson(h, ms, noise);
    study.sa = richardson(h, sa, noise);
    study.extrapolated.ma = study.ma.value;
    study.extrapolated.ms = study.ms.value;
    study.extrapolated.sa = study.sa.value;
    study.extrapolated.ma_error = study.ma.error;
    study.extrapolated.ms_error = study.ms.error;
    study.extrapolated.sa_error = study.sa.error;
    return study;
}

BoxSensitivity box_sensitivity(const CrossSectionGeometry &geom, const SolverOptions &options, double factor) {
    if (geom.kind != GeometryKind::cpw) throw DomainError("box_sensitivity: only defined for the cpw geometry");
    if (!(factor > 1.0)) throw DomainError("box_sensitivity: factor must exceed 1");
    BoxSensitivity out;
    out.factor = factor;
    out.base = interface_participation(solve_potential(geom, options));
    CrossSectionGeometry big = geom;
    big.ground_extent *= factor;
    big.vacuum_height *= factor;
    out.enlarged = interface_participation(solve_potential(big, options));
    for (InterfaceKind k : {InterfaceKind::MA, InterfaceKind::MS, InterfaceKind::SA}) {
        const double b = out.base.get(k);
        if (b != 0.0) out.max_relative_change = std::max(out.max_relative_change, std::abs(out.enlarged.get(k) / b - 1.0));
    }
    return out;
}

}  // namespace qtwin
