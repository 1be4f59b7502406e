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

// Damped nonlinear least squares shared by every experiment fit.

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qtwin {

struct FitParameter {
    std::string name;
    double value = 0.0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    bool fixed = false;
    /// Typical magnitude used for finite-difference steps; 0 selects
    /// |value|, floored at 1e-3 of a finite bound range (1 for an unbounded zero).
    double scale = 0.0;
};

/// Fills `residuals` (already sized) for the given full parameter vector.
/// Residuals should be pre-divided by the per-point noise when it is known.
using ResidualFunction = std::function<void(std::span<const double> params, std::span<double> residuals)>;

struct LsqOptions {
    int max_iterations = 500;
    double relative_cost_tolerance = 1e-10;
    double gradient_tolerance = 1e-12;
    double initial_damping = 1e-3;
    double jacobian_step = 1e-6;  // relative central-difference step
    /// Multiply the linearized covariance by the reduced chi-square.
    bool scale_covariance = true;
};

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> values;
    std::vector<double> uncertainties;  // sqrt(diag(covariance)); zero for fixed parameters
    Eigen::MatrixXd covariance;         // over all parameters, zero rows/cols for fixed ones
    double cost = 0.0;                  // 1/2 sum r^2
    std::size_t n_residuals = 0;
    int dof = 0;
    double reduced_chi_square = 0.0;
    int iterations = 0;
    double final_damping = 0.0;
    bool converged = false;
    std::string status;

    std::size_t index(std::string_view name) const;
    double value(std::string_view name) const { return values[index(name)]; }
    double uncertainty(std::string_view name) const { return uncertainties[index(name)]; }
    double residual_norm() const;
};

/// Levenberg-Marquardt with Marquardt diagonal scaling and Nielsen's damping
/// update. Bounds are enforced through smooth parameter transforms (sine
/// for two-sided, shifted square root for one-sided), the Jacobian by
/// central differences. Stops when an accepted step lowers the cost by less
/// than relative_cost_tolerance and the undamped Gauss-Newton step predicts a
/// relative gain below the same tolerance, when the gradient infinity norm
/// drops below gradient_tolerance, or when no damping yields a decrease.
///
/// Throws NumericalError for a rank-deficient Jacobian at the optimum; hitting
/// max_iterations is reported through `converged = false`.
FitResult lsq_fit(const ResidualFunction &residuals, std::vector<FitParameter> params, std::size_t n_residuals,
                  const LsqOptions &options = {});

/// Central-difference Jacobian (n_residuals x params.size()) with absolute
/// per-parameter steps. A zero step leaves its column zero. When bounds are
/// given and a central step would leave them, a second-order one-sided
/// difference is used instead.
Eigen::MatrixXd numerical_jacobian(const ResidualFunction &residuals, std::span<const double> params,
                                   std::size_t n_residuals, std::span<const double> steps,
                                   std::span<const double> lower = {}, std::span<const double> upper = {});

}  // namespace qtwin
