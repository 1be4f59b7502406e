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

// 2D electrostatic cross-section solver and thin-interface participation.

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

namespace qtwin {

enum class InterfaceKind { MA, MS, SA };

std::string to_string(InterfaceKind kind);
InterfaceKind interface_kind_from_string(const std::string &name);

/// A dielectric film too thin to mesh; its energy is recovered from the
/// bulk field by boundary-condition rescaling.
struct InterfaceLayer {
    InterfaceKind kind = InterfaceKind::MA;
    double thickness = 0.0;     // m
    double permittivity = 1.0;  // relative
};

/// MA 4.8 nm / eps 8, MS 0.3 nm / eps 11.4, SA 2.3 nm / eps 4.
std::vector<InterfaceLayer> default_interface_layers();

enum class GeometryKind { cpw, parallel_plate, coax };

struct CrossSectionGeometry {
    GeometryKind kind = GeometryKind::cpw;

    // cpw: trace centred at x = 0 on the substrate surface (y = 0), separated
    // by `gap` from grounds of width `ground_extent` that reach the box sides.
    // parallel_plate: a driven electrode of width `trace_width` on top of a
    // substrate of thickness `substrate_thickness` with a grounded backside.
    // coax: square inner conductor of side `trace_width` inside a grounded
    // square shell of side `trace_width + 2 * gap`, filled with substrate_eps.
    double trace_width = 30e-6;
    double gap = 14e-6;
    double ground_extent = 140e-6;
    double substrate_thickness = 380e-6;
    double substrate_eps = 11.65;
    double vacuum_height = 140e-6;
    std::vector<InterfaceLayer> layers;
    /// Lower cutoff for the edge-singularity integral (film thickness).
    double metal_thickness = 100e-9;
    double voltage = 1.0;

    /// CPW with 10-gap margins, 380 um substrate and the default layers.
    static CrossSectionGeometry cpw(double trace_width, double gap, double substrate_eps,
                                    std::vector<InterfaceLayer> layers = default_interface_layers());
    static CrossSectionGeometry parallel_plate(double width, double separation, double substrate_eps,
                                               std::vector<InterfaceLayer> layers = {});
    static CrossSectionGeometry coax(double inner_side, double outer_side, double fill_eps = 1.0);

    void validate() const;
    /// Length that the resolution counts cells across.
    double feature_length() const;
};

struct SolverOptions {
    int resolution = 64;  // cells across feature_length()
    double growth = 1.1;  // geometric grading ratio away from the fine core
    double tolerance = 1e-8;
    int max_iterations = 1000000;
};

struct FieldSolution {
    CrossSectionGeometry geometry;
    std::vector<double> x;        // node coordinates, m
    std::vector<double> y;
    Eigen::MatrixXd potential;    // x.size() by y.size(), V
    Eigen::MatrixXd cell_eps;     // (nx-1) by (ny-1), relative; 0 outside the domain
    double energy_substrate = 0;  // J/m
    double energy_vacuum = 0;     // J/m
    double residual = 0;          // relative
    int iterations = 0;

    double energy_total() const { return energy_substrate + energy_vacuum; }
    /// Per-unit-length capacitance 2W/V^2, F/m.
    double capacitance() const;
    std::size_t node_count() const { return x.size() * y.size(); }
};

/// Vertex-centred finite volumes on a graded tensor grid; dielectric
/// boundaries and metal lie on grid lines, so the 5-point flux balance
/// weights each face by the permittivity of the cells it crosses. Solved by
/// incomplete-Cholesky preconditioned conjugate gradients.
FieldSolution solve_potential(const CrossSectionGeometry &geom, const SolverOptions &options = {});

struct InterfaceEpr {
    double ma = 0.0;
    double ms = 0.0;
    double sa = 0.0;
    double ma_error = 0.0;
    double ms_error = 0.0;
    double sa_error = 0.0;

    double get(InterfaceKind kind) const;
    double error(InterfaceKind kind) const;
    void set(InterfaceKind kind, double value);
};

/// Surface energy fractions of the layers in `sol.geometry`. Near each metal
/// edge (four cells) the sampled density is replaced by a fitted K^2/r + c
/// form integrated analytically down to metal_thickness.
/// Throws InputError when a layer has no matching surface.
InterfaceEpr interface_participation(const FieldSolution &sol);

struct RichardsonEstimate {
    double value = 0.0;
    double error = 0.0;
    double order = 0.0;  // observed order; infinity when the sequence is exact
    bool monotone = true;
};

/// Extrapolate a sequence sampled at decreasing spacings h (any ratios).
/// Needs at least three samples. Differences below relative_noise times the
/// largest sample are treated as zero.
RichardsonEstimate richardson(std::span<const double> h, std::span<const double> values,
                              double relative_noise = 1e-12);

struct ConvergenceStudy {
    std::vector<int> resolutions;
    std::vector<InterfaceEpr> samples;
    std::vector<double> energies;
    InterfaceEpr extrapolated;  // errors filled from the extrapolation
    RichardsonEstimate energy;
    RichardsonEstimate ma;
    RichardsonEstimate ms;
    RichardsonEstimate sa;
};

ConvergenceStudy convergence_study(const CrossSectionGeometry &geom, std::span<const int> resolutions,
                                   const SolverOptions &options = {});

struct BoxSensitivity {
    InterfaceEpr base;
    InterfaceEpr enlarged;
    double factor = 1.5;
    double max_relative_change = 0.0;
};

/// Re-solve with lateral and vertical margins scaled by `factor`.
BoxSensitivity box_sensitivity(const CrossSectionGeometry &geom, const SolverOptions &options = {},
                               double factor = 1.5);

}  // namespace qtwin
