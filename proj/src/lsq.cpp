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

#include "qtwin/lsq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qtwin/error.hpp"

namespace qtwin {

namespace {

enum class BoundKind { none, lower, upper, both };

// Maps between the unconstrained internal coordinate u and the external
// parameter x for one free parameter.
struct Transform {
    BoundKind kind = BoundKind::none;
    double lo = 0.0;
    double hi = 0.0;
    double scale = 1.0;

    double to_external(double u) const {
        switch (kind) {
            case BoundKind::none:
                return u;
            case BoundKind::lower:
                return lo + std::sqrt(u * u + scale * scale) - scale;
            case BoundKind::upper:
                return hi - std::sqrt(u * u + scale * scale) + scale;
            case BoundKind::both:
                return lo + 0.5 * (hi - lo) * (1.0 + std::sin(u));
        }
        return u;
    }

    double to_internal(double x) const {
        switch (kind) {
            case BoundKind::none:
                return x;
            case BoundKind::lower: {
                const double a = x - lo + scale;
                return std::sqrt(std::max(0.0, a * a - scale * scale));
            }
            case BoundKind::upper: {
                const double a = hi - x + scale;
                return std::sqrt(std::max(0.0, a * a - scale * scale));
            }
            case BoundKind::both: {
                const double s = std::clamp(2.0 * (x - lo) / (hi - lo) - 1.0, -1.0, 1.0);
                return std::asin(s);
            }
        }
        return x;
    }

    // Typical magnitude of u, used for finite-difference steps.
    double internal_scale(double u) const {
        if (kind == BoundKind::both) return 1.0;
        return std::max(std::abs(u), scale);
    }
};

double typical_scale(const FitParameter &p) {
    if (p.scale > 0.0) return p.scale;
    if (std::isfinite(p.lower) && std::isfinite(p.upper)) return std::max(std::abs(p.value), 1e-3 * (p.upper - p.lower));
    return p.value != 0.0 ? std::abs(p.value) : 1.0;
}

Transform make_transform(const FitParameter &p) {
    Transform t;
    const bool has_lo = std::isfinite(p.lower);
    const bool has_hi = std::isfinite(p.upper);
    t.lo = p.lower;
    t.hi = p.upper;
    if (has_lo && has_hi) {
        t.kind = BoundKind::both;
    } else if (has_lo) {
        t.kind = BoundKind::lower;
        t.scale = std::max({std::abs(p.value - p.lower), typical_scale(p)});
    } else if (has_hi) {
        t.kind = BoundKind::upper;
        t.scale = std::max({std::abs(p.upper - p.value), typical_scale(p)});
    } else {
        t.scale = typical_scale(p);
    }
    return t;
}

class Problem {
  public:
    Problem(const ResidualFunction &fn, std::vector<FitParameter> params, std::size_t m)
        : fn_(fn), params_(std::move(params)), m_(m), full_(params_.size()) {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            full_[i] = params_[i].value;
            if (!params_[i].fixed) {
                free_.push_back(i);
                transforms_.push_back(make_transform(params_[i]));
            }
        }
    }

    std::size_t n_free() const { return free_.size(); }
    std::size_t m() const { return m_; }

    Eigen::VectorXd initial_internal() const {
        Eigen::VectorXd u(n_free());
        for (std::size_t k = 0; k < n_free(); ++k) u[k] = transforms_[k].to_internal(full_[free_[k]]);
        return u;
    }

    std::vector<double> external(const Eigen::VectorXd &u) const {
        std::vector<double> x = full_;
        for (std::size_t k = 0; k < n_free(); ++k) x[free_[k]] = transforms_[k].to_external(u[k]);
        return x;
    }

    Eigen::VectorXd residuals_at(const std::vector<double> &x) const {
        Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_));
        fn_(x, std::span<double>(r.data(), m_));
        return r;
    }

    Eigen::VectorXd residuals_internal(const Eigen::VectorXd &u) const { return residuals_at(external(u)); }

    Eigen::MatrixXd jacobian_internal(const Eigen::VectorXd &u, double rel_step) const {
        Eigen::MatrixXd jac(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(n_free()));
        for (std::size_t k = 0; k < n_free(); ++k) {
            const double h = rel_step * transforms_[k].internal_scale(u[k]);
            Eigen::VectorXd up = u;
            Eigen::VectorXd dn = u;
            up[k] += h;
            dn[k] -= h;
            jac.col(static_cast<Eigen::Index>(k)) = (residuals_internal(up) - residuals_internal(dn)) / (2.0 * h);
        }
        return jac;
    }

    const std::vector<std::size_t> &free_indices() const { return free_; }
    const std::vector<FitParameter> &params() const { return params_; }

  private:
    const ResidualFunction &fn_;
    std::vector<FitParameter> params_;
    std::size_t m_;
    std::vector<double> full_;
    std::vector<std::size_t> free_;
    std::vector<Transform> transforms_;
};

void validate_inputs(const std::vector<FitParameter> &params, std::size_t m) {
    if (params.empty()) throw DomainError("lsq_fit: no parameters");
    if (m == 0) throw DomainError("lsq_fit: no residuals");
    for (const auto &p : params) {
        if (!std::isfinite(p.value)) throw DomainError("lsq_fit: initial value of '" + p.name + "' is not finite");
        if (p.fixed) continue;
        if (std::isnan(p.lower) || std::isnan(p.upper) || !(p.lower < p.upper))
            throw DomainError("lsq_fit: invalid bounds for '" + p.name + "'");
        if (p.value < p.lower || p.value > p.upper)
            throw DomainError("lsq_fit: initial value of '" + p.name + "' outside its bounds");
    }
}

}  // namespace

std::size_t FitResult::index(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return i;
    throw InputError("fit result has no parameter '" + std::string(name) + "'");
}

double FitResult::residual_norm() const { return std::sqrt(2.0 * cost); }

Eigen::MatrixXd numerical_jacobian(const ResidualFunction &residuals, std::span<const double> params,
                                   std::size_t n_residuals, std::span<const double> steps,
                                   std::span<const double> lower, std::span<const double> upper) {
    if (steps.size() != params.size()) throw DomainError("numerical_jacobian: step count mismatch");
    if ((!lower.empty() && lower.size() != params.size()) || (!upper.empty() && upper.size() != params.size()))
        throw DomainError("numerical_jacobian: bound count mismatch");
    const auto m = static_cast<Eigen::Index>(n_residuals);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(params.size()));
    std::vector<double> x(params.begin(), params.end());
    Eigen::VectorXd r0;
    Eigen::VectorXd rp(m);
    Eigen::VectorXd rm(m);
    auto eval = [&](std::size_t k, double value, Eigen::VectorXd &out) {
        x[k] = value;
        residuals(x, std::span<double>(out.data(), n_residuals));
        x[k] = params[k];
    };
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double h = steps[k];
        if (h == 0.0) continue;
        if (!(h > 0.0)) throw DomainError("numerical_jacobian: steps must be nonnegative");
        const double lo = lower.empty() ? -std::numeric_limits<double>::infinity() : lower[k];
        const double hi = upper.empty() ? std::numeric_limits<double>::infinity() : upper[k];
        const bool below = params[k] - h < lo;
        const bool above = params[k] + h > hi;
        const auto col = static_cast<Eigen::Index>(k);
        if (below == above) {
            eval(k, params[k] + h, rp);
            eval(k, params[k] - h, rm);
            jac.col(col) = (rp - rm) / (2.0 * h);
            continue;
        }
        if (r0.size() == 0) {
            r0.resize(m);
            residuals(x, std::span<double>(r0.data(), n_residuals));
        }
        const double s = below ? h : -h;
        eval(k, params[k] + s, rp);
        eval(k, params[k] + 2.0 * s, rm);
        jac.col(col) = (4.0 * rp - 3.0 * r0 - rm) / (2.0 * s);
    }
    return jac;
}

FitResult lsq_fit(const ResidualFunction &residuals, std::vector<FitParameter> params, std::size_t n_residuals,
                  const LsqOptions &options) {
    validate_inputs(params, n_residuals);
    Problem problem(residuals, std::move(params), n_residuals);
    const std::size_t n = problem.n_free();

    FitResult result;
    for (const auto &p : problem.params()) result.names.push_back(p.name);
    result.n_residuals = n_residuals;

    Eigen::VectorXd u = problem.initial_internal();
    Eigen::VectorXd r = problem.residuals_internal(u);
    if (!r.allFinite()) throw NumericalError("lsq_fit: residuals not finite at the initial point");
    double cost = 0.5 * r.squaredNorm();

    double lambda = options.initial_damping;
    double nu = 2.0;
    bool converged = n == 0;
    std::string status = n == 0 ? "no free parameters" : "maximum iterations reached";
    int iter = 0;
    bool small_drop = false;

    while (!converged && iter < options.max_iterations) {
        ++iter;
        const Eigen::MatrixXd jac = problem.jacobian_internal(u, options.jacobian_step);
        const Eigen::VectorXd grad = jac.transpose() * r;
        if (grad.lpNorm<Eigen::Infinity>() < options.gradient_tolerance || cost == 0.0) {
            converged = true;
            status = "gradient below tolerance";
            break;
        }
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        Eigen::VectorXd diag = jtj.diagonal();
        const double dmax = diag.maxCoeff();
        if (!(dmax > 0.0)) throw NumericalError("lsq_fit: Jacobian vanishes identically");
        for (Eigen::Index k = 0; k < diag.size(); ++k) diag[k] = std::max(diag[k], 1e-12 * dmax);
        if (small_drop) {
            // A small accepted decrease only counts as convergence when the
            // undamped Gauss-Newton step predicts no further gain either.
            Eigen::MatrixXd gn = jtj;
            gn.diagonal() += 1e-12 * diag;
            const double decrement = 0.5 * grad.dot(gn.ldlt().solve(grad));
            if (decrement <= options.relative_cost_tolerance * cost) {
                converged = true;
                status = "relative cost change below tolerance";
                break;
            }
            small_drop = false;
        }

        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd a = jtj;
            a.diagonal() += lambda * diag;
            const Eigen::VectorXd step = a.ldlt().solve(-grad);
            if (!step.allFinite()) {
                lambda *= nu;
                nu *= 2.0;
            } else {
                const Eigen::VectorXd u_new = u + step;
                const Eigen::VectorXd r_new = problem.residuals_internal(u_new);
                const double cost_new = r_new.allFinite() ? 0.5 * r_new.squaredNorm()
                                                          : std::numeric_limits<double>::infinity();
                const double predicted = 0.5 * step.dot(lambda * diag.cwiseProduct(step) - grad);
                const double rho = predicted > 0.0 ? (cost - cost_new) / predicted : -1.0;
                if (rho > 0.0 && cost_new < cost) {
                    const double drop = cost - cost_new;
                    u = u_new;
                    r = r_new;
                    cost = cost_new;
                    lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
                    nu = 2.0;
                    accepted = true;
                    small_drop = drop <= options.relative_cost_tolerance * (cost + drop);
                } else {
                    lambda *= nu;
                    nu *= 2.0;
                }
            }
            if (!accepted && lambda > 1e16) {
                // No damping produces a decrease: the point is stationary to
                // within finite-difference accuracy.
                converged = true;
                status = "no further decrease";
                break;
            }
        }
    }

    result.iterations = iter;
    result.final_damping = lambda;
    result.converged = converged;
    result.status = status;
    result.values = problem.external(u);
    result.cost = cost;
    result.dof = static_cast<int>(n_residuals) - static_cast<int>(n);
    result.reduced_chi_square = result.dof > 0 ? 2.0 * cost / result.dof : 0.0;

    const std::size_t np = result.values.size();
    result.covariance = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(np));
    result.uncertainties.assign(np, 0.0);
    if (n > 0) {
        // Linearized covariance in external coordinates.
        const auto &free = problem.free_indices();
        std::vector<double> steps(np, 0.0);
        std::vector<double> lower(np);
        std::vector<double> upper(np);
        for (std::size_t i = 0; i < np; ++i) {
            lower[i] = problem.params()[i].lower;
            upper[i] = problem.params()[i].upper;
        }
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t i = free[k];
            const auto &p = problem.params()[i];
            double h = options.jacobian_step * std::max(std::abs(result.values[i]), typical_scale(p));
            if (std::isfinite(p.lower) && std::isfinite(p.upper)) h = std::min(h, 1e-3 * (p.upper - p.lower));
            steps[i] = h;
        }
        const Eigen::MatrixXd full_jac = numerical_jacobian(residuals, result.values, n_residuals, steps, lower, upper);
        Eigen::MatrixXd jac(full_jac.rows(), static_cast<Eigen::Index>(n));
        for (std::size_t k = 0; k < n; ++k)
            jac.col(static_cast<Eigen::Index>(k)) = full_jac.col(static_cast<Eigen::Index>(free[k]));

        // Column equilibration keeps the rank test independent of parameter units.
        Eigen::VectorXd colscale(static_cast<Eigen::Index>(n));
        for (Eigen::Index k = 0; k < colscale.size(); ++k) {
            const double c = jac.col(k).norm();
            if (!(c > 0.0) || !std::isfinite(c))
                throw NumericalError("lsq_fit: singular Jacobian (parameter '" + result.names[free[k]] +
                                     "' has no effect on the residuals)");
            colscale[k] = 1.0 / c;
        }
        const Eigen::MatrixXd js = jac * colscale.asDiagonal();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(js.transpose() * js);
        const Eigen::VectorXd ev = eig.eigenvalues();
        if (!(ev.minCoeff() > 1e-14 * ev.maxCoeff()))
            throw NumericalError("lsq_fit: singular Jacobian at the optimum");
        Eigen::MatrixXd cov_scaled =
            eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
        Eigen::MatrixXd cov = colscale.asDiagonal() * cov_scaled * colscale.asDiagonal();
        if (options.scale_covariance && result.dof > 0) cov *= result.reduced_chi_square;
        cov = 0.5 * (cov + cov.transpose()).eval();
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                result.covariance(static_cast<Eigen::Index>(free[a]), static_cast<Eigen::Index>(free[b])) =
                    cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        for (std::size_t k = 0; k < n; ++k)
            result.uncertainties[free[k]] = std::sqrt(std::max(0.0, cov(static_cast<Eigen::Index>(k),
                                                                        static_cast<Eigen::Index>(k))));
    }
    return result;
}

}  // namespace qtwin
