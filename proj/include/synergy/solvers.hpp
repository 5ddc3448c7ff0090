#pragma once

// Convex subproblem solvers: sparse group LASSO by monotone accelerated
// proximal gradient, plain LASSO as its singleton-group special case, and
// ridge regression by conjugate gradient on the normal equations. All of
// them only touch the design matrix through apply/adjoint callbacks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "synergy/core_model.hpp"

namespace synergy {

/// A linear map given by its action and the action of its transpose.
struct LinearOperator
{
    Index rows = 0;
    Index cols = 0;
    std::function<Vector(const Vector&)> apply;   // R^cols -> R^rows
    std::function<Vector(const Vector&)> adjoint; // R^rows -> R^cols
};

inline LinearOperator dense_operator(const Matrix& A)
{
    return LinearOperator{A.rows(), A.cols(),
                          [A](const Vector& x) -> Vector { return A * x; },
                          [A](const Vector& r) -> Vector { return A.transpose() * r; }};
}

struct SparseGroupPenalty
{
    double lambda1 = 0.0; // group (l2) weight
    double lambda2 = 0.0; // elementwise (l1) weight

    void validate() const
    {
        if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0) || !std::isfinite(lambda1) || !std::isfinite(lambda2)) {
            throw ConfigError("penalty weights must be finite and nonnegative");
        }
    }
};

enum class StepRule
{
    PowerEstimate, // 1/L from a power-method estimate, doubled on a failed descent test
    Backtracking,  // start from L = 1 and double until the descent test holds
};

struct SolverControl
{
    Index max_iters = 5000;
    double rel_tol = 1e-6;
    StepRule step_rule = StepRule::PowerEstimate;
    bool record_trace = false;
    double lipschitz_hint = 0.0; // > 0: use instead of the power-method estimate

    void validate() const
    {
        if (max_iters < 1) {
            throw ConfigError("max_iters must be >= 1");
        }
        if (!(rel_tol > 0.0)) {
            throw ConfigError("rel_tol must be > 0");
        }
    }
};

/// Contiguous partition of a coefficient vector into groups with optional
/// per-group multipliers on the group penalty.
struct GroupPartition
{
    std::vector<Index> sizes;
    std::vector<double> weights;

    static GroupPartition from_sizes(std::vector<Index> sizes, bool sqrt_size_weighting = false)
    {
        GroupPartition g;
        g.weights.reserve(sizes.size());
        for (Index s : sizes) {
            if (s < 1) {
                throw ConfigError("group sizes must be >= 1");
            }
            g.weights.push_back(sqrt_size_weighting ? std::sqrt(static_cast<double>(s)) : 1.0);
        }
        g.sizes = std::move(sizes);
        return g;
    }

    static GroupPartition singletons(Index p) { return from_sizes(std::vector<Index>(static_cast<std::size_t>(p), 1)); }

    Index total() const { return std::accumulate(sizes.begin(), sizes.end(), Index{0}); }
    std::size_t count() const { return sizes.size(); }
};

// ---------------------------------------------------------------------------
// proximal operators
// ---------------------------------------------------------------------------

/// prox of tau * ||.||_1: sign(x) * max(|x| - tau, 0) entrywise.
inline Vector prox_soft_threshold(const Vector& x, double tau)
{
    Vector y(x.size());
    for (Index i = 0; i < x.size(); ++i) {
        const double a = std::abs(x[i]) - tau;
        y[i] = a > 0.0 ? std::copysign(a, x[i]) : 0.0;
    }
    return y;
}

/// prox of tau * ||.||_2: block shrinkage toward zero.
inline Vector prox_group(const Vector& x, double tau)
{
    const double norm = x.norm();
    if (norm <= tau) {
        return Vector::Zero(x.size());
    }
    return x * (1.0 - tau / norm);
}

/// Exact prox of eta * (l1 ||.||_2 + l2 ||.||_1): soft threshold, then shrink the block.
inline Vector prox_sparse_group(const Vector& x, double eta, double lambda1, double lambda2)
{
    return prox_group(prox_soft_threshold(x, eta * lambda2), eta * lambda1);
}

namespace detail {

inline double sgl_penalty(const Vector& c, const GroupPartition& groups, const SparseGroupPenalty& penalty)
{
    double total = 0.0;
    Index offset = 0;
    for (std::size_t g = 0; g < groups.count(); ++g) {
        const auto seg = c.segment(offset, groups.sizes[g]);
        total += penalty.lambda1 * groups.weights[g] * seg.norm() + penalty.lambda2 * seg.lpNorm<1>();
        offset += groups.sizes[g];
    }
    return total;
}

inline void sgl_prox_inplace(Vector& x, double eta, const GroupPartition& groups, const SparseGroupPenalty& penalty)
{
    Index offset = 0;
    for (std::size_t g = 0; g < groups.count(); ++g) {
        const Index len = groups.sizes[g];
        x.segment(offset, len) =
            prox_sparse_group(x.segment(offset, len), eta, penalty.lambda1 * groups.weights[g], penalty.lambda2);
        offset += len;
    }
}

inline bool all_finite(const Vector& v)
{
    return v.allFinite();
}

/// Largest eigenvalue of A^T A by the power method from a fixed start.
inline double estimate_lipschitz(const LinearOperator& A, int iterations = 20)
{
    std::mt19937_64 rng(0x5f3759dfULL);
    std::uniform_real_distribution<double> unit(0.5, 1.5);
    Vector v(A.cols);
    for (Index i = 0; i < v.size(); ++i) {
        v[i] = unit(rng);
    }
    v.normalize();
    double estimate = 0.0;
    for (int it = 0; it < iterations; ++it) {
        const Vector Av = A.apply(v);
        estimate = Av.squaredNorm();
        Vector w = A.adjoint(Av);
        const double norm = w.norm();
        if (!std::isfinite(norm)) {
            throw SolverError("step-size estimation failed: non-finite power iterate at iteration " +
                              std::to_string(it));
        }
        if (norm == 0.0) {
            return estimate;
        }
        estimate = std::max(estimate, norm);
        v = w / norm;
    }
    return estimate;
}

inline void check_operator(const LinearOperator& A, const Vector& target)
{
    if (!A.apply || !A.adjoint) {
        throw ConfigError("linear operator is missing apply or adjoint");
    }
    if (target.size() != A.rows) {
        throw DimensionError("target length " + std::to_string(target.size()) + " does not match operator rows " +
                             std::to_string(A.rows));
    }
    if (!all_finite(target)) {
        throw InputError("target contains non-finite values");
    }
}

} // namespace detail

/// Power-method estimate of ||A||_2^2, the Lipschitz constant of the fit gradient.
inline double operator_norm_squared(const LinearOperator& A, int iterations = 20)
{
    return detail::estimate_lipschitz(A, iterations);
}

// ---------------------------------------------------------------------------
// sparse group LASSO
// ---------------------------------------------------------------------------

struct SglResult
{
    Vector coeffs;
    double objective = 0.0;
    Index iterations = 0;
    bool converged = false;
    double lipschitz = 0.0;
    std::vector<double> trace; // objective after every iteration when requested
};

/// Objective 1/2 ||target - A c||^2 + sum_g (l1 w_g ||c_g||_2 + l2 ||c_g||_1).
inline double sgl_objective(const LinearOperator& A, const GroupPartition& groups, const Vector& target,
                            const SparseGroupPenalty& penalty, const Vector& c)
{
    return 0.5 * (target - A.apply(c)).squaredNorm() + detail::sgl_penalty(c, groups, penalty);
}

/**
 * Minimize 1/2 ||target - A c||^2 + sum_g (lambda1 ||c_g||_2 + lambda2 ||c_g||_1).
 *
 * Accelerated proximal gradient with the monotone safeguard of Beck and
 * Teboulle: a candidate that would raise the objective is rejected and the
 * momentum restarts, so the recorded objective never increases. The step is
 * 1/L with L from 20 power iterations on A^T A; L doubles whenever the
 * quadratic upper-bound test fails.
 *
 * @param   initial     optional warm start (zero vector otherwise).
 */
inline SglResult sparse_group_lasso_solve(const LinearOperator& A, const GroupPartition& groups, const Vector& target,
                                          const SparseGroupPenalty& penalty, const SolverControl& control,
                                          const std::optional<Vector>& initial = std::nullopt)
{
    detail::check_operator(A, target);
    penalty.validate();
    control.validate();
    if (groups.total() != A.cols) {
        throw DimensionError("groups cover " + std::to_string(groups.total()) + " coefficients, operator has " +
                             std::to_string(A.cols));
    }

    SglResult result;
    Vector x = Vector::Zero(A.cols);
    if (initial) {
        detail::require_size(*initial, A.cols, "warm start");
        if (initial->allFinite()) {
            x = *initial;
        }
    }

    double L = 1.0;
    if (control.step_rule == StepRule::PowerEstimate) {
        L = control.lipschitz_hint > 0.0 ? control.lipschitz_hint : detail::estimate_lipschitz(A);
        if (!std::isfinite(L)) {
            throw SolverError("step-size estimation failed: Lipschitz estimate is not finite");
        }
        if (L <= 0.0) {
            // A == 0: the fit term is constant and zero minimizes the penalty.
            result.coeffs = Vector::Zero(A.cols);
            result.objective = 0.5 * target.squaredNorm();
            result.converged = true;
            if (control.record_trace) {
                result.trace.push_back(result.objective);
            }
            return result;
        }
    }

    const auto smooth = [&](const Vector& Ac) { return 0.5 * (Ac - target).squaredNorm(); };

    Vector Ax = A.apply(x);
    double Fx = smooth(Ax) + detail::sgl_penalty(x, groups, penalty);
    if (!std::isfinite(Fx)) {
        throw SolverError("initial objective is not finite");
    }
    Vector x_prev = x;
    Vector Ax_prev = Ax;
    Vector y = x;
    Vector Ay = Ax;
    double t = 1.0;

    for (Index it = 0; it < control.max_iters; ++it) {
        const Vector grad = A.adjoint(Ay - target);
        const double fy = smooth(Ay);

        Vector z;
        Vector Az;
        double fz = 0.0;
        for (int attempt = 0;; ++attempt) {
            z = y - grad / L;
            detail::sgl_prox_inplace(z, 1.0 / L, groups, penalty);
            Az = A.apply(z);
            fz = smooth(Az);
            const Vector step = z - y;
            const double bound = fy + grad.dot(step) + 0.5 * L * step.squaredNorm();
            if (fz <= bound + 1e-12 * std::max(1.0, std::abs(bound))) {
                break;
            }
            L *= 2.0;
            if (attempt > 200 || !std::isfinite(L)) {
                throw SolverError("backtracking failed to find a descent step (L = " + std::to_string(L) + ")");
            }
        }
        const double Fz = fz + detail::sgl_penalty(z, groups, penalty);
        if (!std::isfinite(Fz)) {
            throw SolverError("objective became non-finite at iteration " + std::to_string(it));
        }

        const double F_old = Fx;
        const bool accepted = Fz <= Fx;
        x_prev = x;
        Ax_prev = Ax;
        if (accepted) {
            x = z;
            Ax = Az;
            Fx = Fz;
        }
        result.iterations = it + 1;
        if (control.record_trace) {
            result.trace.push_back(Fx);
        }

        if (accepted) {
            const double change = F_old - Fx;
            if (change <= control.rel_tol * std::max(std::abs(Fx), 1e-300)) {
                result.converged = true;
                break;
            }
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            const double beta = (t - 1.0) / t_next;
            y = x + beta * (x - x_prev);
            Ay = Ax + beta * (Ax - Ax_prev);
            t = t_next;
        } else {
            // restart momentum from the incumbent
            t = 1.0;
            y = x;
            Ay = Ax;
        }
    }

    result.coeffs = std::move(x);
    result.objective = Fx;
    result.lipschitz = L;
    return result;
}

/**
 * KKT certificate for the sparse group LASSO. Returns the largest violation
 * of the subgradient optimality conditions over all groups; zero at an exact
 * minimizer.
 */
inline double check_sgl_optimality(const Vector& coeffs, const LinearOperator& A, const GroupPartition& groups,
                                   const Vector& target, const SparseGroupPenalty& penalty)
{
    detail::check_operator(A, target);
    detail::require_size(coeffs, A.cols, "coefficients");
    const Vector g = A.adjoint(A.apply(coeffs) - target);
    double worst = 0.0;
    Index offset = 0;
    for (std::size_t k = 0; k < groups.count(); ++k) {
        const Index len = groups.sizes[k];
        const double l1 = penalty.lambda1 * groups.weights[k];
        const double l2 = penalty.lambda2;
        const Vector cg = coeffs.segment(offset, len);
        const Vector gg = g.segment(offset, len);
        const double norm = cg.norm();
        double violation = 0.0;
        if (norm == 0.0) {
            violation = std::max(0.0, prox_soft_threshold(gg, l2).norm() - l1);
        } else {
            Vector kkt = gg + l1 * cg / norm;
            for (Index i = 0; i < len; ++i) {
                if (cg[i] != 0.0) {
                    kkt[i] += l2 * (cg[i] > 0.0 ? 1.0 : -1.0);
                } else {
                    // best subgradient choice in [-l2, l2]
                    kkt[i] = kkt[i] - std::clamp(kkt[i], -l2, l2);
                }
            }
            violation = kkt.lpNorm<Eigen::Infinity>();
        }
        worst = std::max(worst, violation);
        offset += len;
    }
    return worst;
}

/// LASSO: 1/2 ||target - A c||^2 + lambda ||c||_1, via the group solver with singleton groups.
inline SglResult lasso_solve(const LinearOperator& A, const Vector& target, double lambda, const SolverControl& control,
                             const std::optional<Vector>& initial = std::nullopt)
{
    if (!(lambda >= 0.0)) {
        throw ConfigError("lambda_test must be >= 0");
    }
    return sparse_group_lasso_solve(A, GroupPartition::singletons(A.cols), target, SparseGroupPenalty{0.0, lambda},
                                    control, initial);
}

// ---------------------------------------------------------------------------
// ridge regression
// ---------------------------------------------------------------------------

struct RidgeResult
{
    Vector solution;
    Index iterations = 0;
    double residual_norm = 0.0; // ||(B^T B + alpha I) s - B^T target||
    double rhs_norm = 0.0;      // ||B^T target||
    bool converged = false;
    bool conditioning_warning = false;
};

/**
 * Minimize 1/2 ||target - B s||^2 + alpha/2 ||s||^2 by conjugate gradient on
 * (B^T B + alpha I) s = B^T target. With alpha = 0 and a zero start the
 * iterates stay in range(B^T), so a singular system yields the minimum-norm
 * solution; a power probe of the smallest eigenvalue then sets
 * conditioning_warning.
 */
inline RidgeResult ridge_solve(const LinearOperator& B, const Vector& target, double alpha, const SolverControl& control,
                               const std::optional<Vector>& initial = std::nullopt)
{
    detail::check_operator(B, target);
    control.validate();
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw ConfigError("ridge alpha must be finite and >= 0");
    }
    const auto normal = [&](const Vector& s) -> Vector { return B.adjoint(B.apply(s)) + alpha * s; };

    RidgeResult out;
    const Vector rhs = B.adjoint(target);
    out.rhs_norm = rhs.norm();

    Vector s = Vector::Zero(B.cols);
    if (initial && alpha > 0.0) {
        detail::require_size(*initial, B.cols, "ridge warm start");
        s = *initial;
    }
    Vector r = rhs - normal(s);
    const double stop = control.rel_tol * out.rhs_norm;
    double rr = r.squaredNorm();
    Vector p = r;
    Index it = 0;
    const Index cap = std::max<Index>(control.max_iters, 1);
    while (std::sqrt(rr) > stop && it < cap) {
        const Vector Ap = normal(p);
        const double curvature = p.dot(Ap);
        if (!(curvature > 0.0)) {
            break;
        }
        const double step = rr / curvature;
        s += step * p;
        r -= step * Ap;
        const double rr_next = r.squaredNorm();
        p = r + (rr_next / rr) * p;
        rr = rr_next;
        ++it;
    }
    // the recursive residual drifts; report the true one
    r = rhs - normal(s);
    out.residual_norm = r.norm();
    out.iterations = it;
    out.converged = out.residual_norm <= stop || out.rhs_norm == 0.0;
    if (!s.allFinite()) {
        throw SolverError("ridge solve produced non-finite values");
    }

    if (alpha == 0.0 && B.cols > 0) {
        const double top = detail::estimate_lipschitz(B, 30);
        // largest eigenvalue of (top I - B^T B) gives top - lambda_min
        std::mt19937_64 rng(0x9e3779b9ULL);
        std::normal_distribution<double> normal_draw;
        Vector v(B.cols);
        for (Index i = 0; i < v.size(); ++i) {
            v[i] = normal_draw(rng);
        }
        v.normalize();
        double shifted = 0.0;
        for (int k = 0; k < 100; ++k) {
            Vector w = top * v - B.adjoint(B.apply(v));
            shifted = v.dot(w);
            const double norm = w.norm();
            if (norm == 0.0) {
                break;
            }
            v = w / norm;
        }
        const double lambda_min = top - shifted;
        out.conditioning_warning = top == 0.0 || lambda_min <= 1e-10 * top || !out.converged;
    }

    out.solution = std::move(s);
    return out;
}

} // namespace synergy
