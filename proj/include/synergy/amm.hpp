#pragma once

// Alternating minimization over (coefficients, templates):
//   C-step  per-task sparse group LASSO with the templates fixed,
//   S-step  per-synergy ridge regression on the leave-one-out residual,
// followed by unit-norm normalization and pruning of synergies whose
// coefficients vanish on every task.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "synergy/core_model.hpp"
#include "synergy/parallel.hpp"
#include "synergy/solvers.hpp"

namespace synergy {

struct AmmConfig
{
    Index m_int = 10;
    Index T_s = 39;
    SparseGroupPenalty penalty{};
    double alpha = 0.0; // ridge weight; the template regularizer is lambda = alpha / (2G)
    Index max_outer_iters = 200;
    double outer_rel_tol = 1e-5;
    double prune_eps = 1e-8;    // relative to the largest coefficient-group norm
    Index prune_patience = 3;   // consecutive inactive iterations before removal
    Index normalize_every = 1;  // 0: only once after the loop
    std::uint64_t seed = 0;
    SolverControl sub_control{};
    bool warm_start = true;
    bool sqrt_group_weighting = false;
    unsigned threads = 1;

    void validate() const
    {
        if (m_int < 1) {
            throw ConfigError("m_int must be >= 1");
        }
        if (T_s < 1) {
            throw ConfigError("T_s must be >= 1");
        }
        penalty.validate();
        if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
            throw ConfigError("alpha must be finite and >= 0");
        }
        if (max_outer_iters < 1) {
            throw ConfigError("max_outer_iters must be >= 1");
        }
        if (!(outer_rel_tol > 0.0)) {
            throw ConfigError("outer_rel_tol must be > 0");
        }
        if (!(prune_eps > 0.0)) {
            throw ConfigError("prune_eps must be > 0");
        }
        if (prune_patience < 1) {
            throw ConfigError("prune_patience must be >= 1");
        }
        if (normalize_every < 0) {
            throw ConfigError("normalize_every must be >= 0");
        }
        sub_control.validate();
    }

    /// Template regularization weight of the joint objective for G tasks.
    double lambda(std::size_t G) const { return alpha / (2.0 * static_cast<double>(G)); }
};

/// One outer iteration as reported to a progress sink.
struct IterationRecord
{
    Index iteration = 0;
    double before = 0.0;        // objective entering the iteration
    double after_c_step = 0.0;
    double after_s_step = 0.0;  // last value before normalization
    double objective = 0.0;     // after normalization and pruning
    std::size_t active_count = 0;
};

using ProgressSink = std::function<void(const IterationRecord&)>;

struct AmmState
{
    SynergyBank bank;
    CoefficientSet coeffs;
    std::vector<double> objective_trace;
    Index iteration = 0;
    std::vector<IterationRecord> history;
    std::vector<Index> inactive_streak;
    bool converged = false;
};

namespace detail {

inline void check_inputs(const AmmConfig& config, const VelocityDataset& data, const ShiftPlan& plan)
{
    config.validate();
    data.validate();
    if (data.size() == 0) {
        throw ConfigError("dataset has no tasks");
    }
    if (config.T_s > data.T) {
        throw ConfigError("template length T_s = " + std::to_string(config.T_s) + " exceeds trajectory length T = " +
                          std::to_string(data.T));
    }
    if (plan.window() != data.T || plan.template_length() != config.T_s) {
        throw ConfigError("shift plan (T = " + std::to_string(plan.window()) + ", T_s = " +
                          std::to_string(plan.template_length()) + ") disagrees with data/config");
    }
}

inline std::vector<std::size_t> active_indices(const SynergyBank& bank)
{
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < bank.size(); ++j) {
        if (bank.active[j]) {
            out.push_back(j);
        }
    }
    return out;
}

/// [D(s^j1) | D(s^j2) | ...] over the listed synergies, matrix-free.
inline LinearOperator block_dictionary(const SynergyBank& bank, const std::vector<std::size_t>& synergies,
                                       const ShiftPlan& plan)
{
    Index cols = 0;
    for (std::size_t j : synergies) {
        cols += plan.count(static_cast<Index>(j));
    }
    const Index rows = bank.n * plan.window();
    LinearOperator op;
    op.rows = rows;
    op.cols = cols;
    op.apply = [&bank, synergies, &plan, rows](const Vector& c) -> Vector {
        Vector out = Vector::Zero(rows);
        Index offset = 0;
        for (std::size_t j : synergies) {
            const auto& shifts = plan.shifts(static_cast<Index>(j));
            const auto K = static_cast<Index>(shifts.size());
            accumulate_dictionary(out, bank.templates[j], c.segment(offset, K), shifts, bank.n, bank.T_s);
            offset += K;
        }
        return out;
    };
    op.adjoint = [&bank, synergies, &plan, cols](const Vector& r) -> Vector {
        Vector out(cols);
        Index offset = 0;
        for (std::size_t j : synergies) {
            for (Index shift : plan.shifts(static_cast<Index>(j))) {
                out[offset++] = dot_shifted(bank.templates[j], r, shift, bank.n, bank.T_s);
            }
        }
        return out;
    };
    return op;
}

inline double sgl_group_weight(const AmmConfig& config, Index K)
{
    return config.sqrt_group_weighting ? std::sqrt(static_cast<double>(K)) : 1.0;
}

} // namespace detail

/// Joint objective: fit + sparse group penalty summed over tasks, plus
/// G * lambda * sum_j ||s^j||^2 = (alpha / 2) sum_j ||s^j||^2 over active synergies.
inline double objective(const AmmState& state, const VelocityDataset& data, const ShiftPlan& plan,
                        const AmmConfig& config)
{
    const auto& bank = state.bank;
    if (state.coeffs.tasks() != data.size()) {
        throw DimensionError("coefficient set covers " + std::to_string(state.coeffs.tasks()) + " tasks, dataset has " +
                             std::to_string(data.size()));
    }
    double total = 0.0;
    for (std::size_t g = 0; g < data.size(); ++g) {
        const Vector fit = data.tasks[g] - reconstruct_task(bank, state.coeffs.values[g], plan);
        total += 0.5 * fit.squaredNorm();
        for (std::size_t j = 0; j < bank.size(); ++j) {
            if (!bank.active[j]) {
                continue;
            }
            const Vector& c = state.coeffs.values[g][j];
            total += config.penalty.lambda1 * detail::sgl_group_weight(config, c.size()) * c.norm() +
                     config.penalty.lambda2 * c.lpNorm<1>();
        }
    }
    double reg = 0.0;
    for (std::size_t j = 0; j < bank.size(); ++j) {
        if (bank.active[j]) {
            reg += bank.templates[j].squaredNorm();
        }
    }
    return total + static_cast<double>(data.size()) * config.lambda(data.size()) * reg;
}

/// Random unit-norm templates (i.i.d. standard normal, then normalized) and zero coefficients.
inline AmmState initialize(const AmmConfig& config, const VelocityDataset& data, const ShiftPlan& plan)
{
    detail::check_inputs(config, data, plan);
    const auto m = static_cast<std::size_t>(config.m_int);
    plan.check_synergies(m);
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal;
    AmmState state;
    state.bank.n = data.n;
    state.bank.T_s = config.T_s;
    for (std::size_t j = 0; j < m; ++j) {
        Vector s(data.n * config.T_s);
        for (Index k = 0; k < s.size(); ++k) {
            s[k] = normal(rng);
        }
        state.bank.templates.push_back(s / s.norm());
    }
    state.bank.active.assign(m, true);
    state.coeffs = CoefficientSet::zeros(data.size(), m, plan);
    state.inactive_streak.assign(m, 0);
    return state;
}

/**
 * Coefficient update: for every task independently, the sparse group LASSO
 * over the concatenated coefficients of the active synergies (one group per
 * synergy). Tasks run on up to config.threads workers; output slots are
 * keyed by task index.
 */
inline CoefficientSet c_step(const AmmState& state, const VelocityDataset& data, const ShiftPlan& plan,
                             const AmmConfig& config)
{
    const auto& bank = state.bank;
    for (const auto& s : bank.templates) {
        if (!s.allFinite()) {
            throw StepError("c_step: templates contain non-finite values");
        }
    }
    const auto active = detail::active_indices(bank);
    CoefficientSet out = CoefficientSet::zeros(data.size(), bank.size(), plan);
    if (active.empty()) {
        return out;
    }
    const LinearOperator op = detail::block_dictionary(bank, active, plan);
    std::vector<Index> sizes;
    for (std::size_t j : active) {
        sizes.push_back(plan.count(static_cast<Index>(j)));
    }
    const GroupPartition groups = GroupPartition::from_sizes(sizes, config.sqrt_group_weighting);
    SolverControl control = config.sub_control;
    control.record_trace = false;
    control.lipschitz_hint = operator_norm_squared(op);

    parallel_for(data.size(), config.threads, [&](std::size_t g) {
        std::optional<Vector> warm;
        if (config.warm_start && state.coeffs.tasks() == data.size()) {
            Vector w(op.cols);
            Index offset = 0;
            for (std::size_t j : active) {
                const Vector& prev = state.coeffs.values[g][j];
                w.segment(offset, prev.size()) = prev;
                offset += prev.size();
            }
            warm = std::move(w);
        }
        SglResult result;
        try {
            result = sparse_group_lasso_solve(op, groups, data.tasks[g], config.penalty, control, warm);
        } catch (const Error& e) {
            throw StepError("c_step failed on task " + std::to_string(g + 1) + ": " + e.what());
        }
        Index offset = 0;
        for (std::size_t j : active) {
            const Index K = plan.count(static_cast<Index>(j));
            out.values[g][j] = result.coeffs.segment(offset, K);
            offset += K;
        }
    });
    return out;
}

/**
 * Template update, one synergy at a time in ascending index order. Synergy j
 * is refit by ridge regression of the stacked residuals
 * r_{-j}^g = v^g - sum_{l != j} D(s^l) c_l^g (computed with the templates
 * already updated in this sweep) on the stacked operator B_j = [B_j(c_j^g)]_g.
 * Synergies whose coefficients are zero on every task are left unchanged.
 * The result is not normalized.
 */
inline SynergyBank s_step(const AmmState& state, const VelocityDataset& data, const ShiftPlan& plan,
                          const AmmConfig& config)
{
    SynergyBank bank = state.bank;
    const Index n = bank.n;
    const Index nT = n * plan.window();
    const std::size_t G = data.size();
    for (const auto& row : state.coeffs.values) {
        for (const auto& c : row) {
            if (!c.allFinite()) {
                throw StepError("s_step: coefficients contain non-finite values");
            }
        }
    }

    // running reconstruction of every task with the current templates
    std::vector<Vector> recon(G);
    for (std::size_t g = 0; g < G; ++g) {
        recon[g] = reconstruct_task(bank, state.coeffs.values[g], plan);
    }

    SolverControl control = config.sub_control;
    for (std::size_t j = 0; j < bank.size(); ++j) {
        if (!bank.active[j]) {
            continue;
        }
        const auto js = static_cast<Index>(j);
        std::vector<std::size_t> tasks;
        for (std::size_t g = 0; g < G; ++g) {
            if (state.coeffs.values[g][j].cwiseAbs().maxCoeff() > 0.0) {
                tasks.push_back(g);
            }
        }
        if (tasks.empty()) {
            continue;
        }
        const Vector& old = bank.templates[j];
        Vector target(static_cast<Index>(tasks.size()) * nT);
        for (std::size_t q = 0; q < tasks.size(); ++q) {
            const std::size_t g = tasks[q];
            target.segment(static_cast<Index>(q) * nT, nT) =
                data.tasks[g] - recon[g] + dictionary_apply(old, state.coeffs.values[g][j], plan, js);
        }
        LinearOperator B;
        B.rows = target.size();
        B.cols = n * bank.T_s;
        B.apply = [&, js](const Vector& x) -> Vector {
            Vector out(static_cast<Index>(tasks.size()) * nT);
            for (std::size_t q = 0; q < tasks.size(); ++q) {
                out.segment(static_cast<Index>(q) * nT, nT) =
                    coefficient_operator_apply(state.coeffs.values[tasks[q]][j], x, plan, js);
            }
            return out;
        };
        B.adjoint = [&, js](const Vector& r) -> Vector {
            Vector out = Vector::Zero(n * bank.T_s);
            for (std::size_t q = 0; q < tasks.size(); ++q) {
                out += coefficient_operator_adjoint_apply(state.coeffs.values[tasks[q]][j],
                                                          r.segment(static_cast<Index>(q) * nT, nT), n, plan, js);
            }
            return out;
        };
        RidgeResult ridge;
        try {
            ridge = ridge_solve(B, target, config.alpha, control, old);
        } catch (const Error& e) {
            throw StepError("s_step failed on synergy " + std::to_string(j + 1) + ": " + e.what());
        }
        const Vector delta = ridge.solution - old;
        for (std::size_t g : tasks) {
            recon[g] += dictionary_apply(delta, state.coeffs.values[g][j], plan, js);
        }
        bank.templates[j] = ridge.solution;
    }
    return bank;
}

/// s^j <- s^j / ||s^j||, c_j^g <- c_j^g * ||s^j||; zero templates are flagged inactive.
inline AmmState normalize_rescale(AmmState state)
{
    auto& bank = state.bank;
    for (std::size_t j = 0; j < bank.size(); ++j) {
        if (!bank.active[j]) {
            continue;
        }
        const double norm = bank.templates[j].norm();
        if (norm > 0.0) {
            bank.templates[j] /= norm;
            for (auto& row : state.coeffs.values) {
                row[j] *= norm;
            }
        } else {
            bank.active[j] = false;
        }
    }
    return state;
}

/**
 * Marks synergy j inactive when max_g ||c_j^g||_2 < prune_eps times the
 * largest group norm in the coefficient set (every synergy is inactive when
 * all coefficients vanish). A synergy is removed (active flag cleared, its
 * coefficients zeroed) once it has been inactive for `patience` consecutive
 * calls.
 */
inline AmmState prune_inactive(AmmState state, double prune_eps, Index patience = 1)
{
    auto& bank = state.bank;
    state.inactive_streak.resize(bank.size(), 0);
    double largest = 0.0;
    for (std::size_t j = 0; j < bank.size(); ++j) {
        if (bank.active[j]) {
            largest = std::max(largest, state.coeffs.group_peak(j));
        }
    }
    const double threshold = prune_eps * largest;
    for (std::size_t j = 0; j < bank.size(); ++j) {
        if (!bank.active[j]) {
            continue;
        }
        const double peak = state.coeffs.group_peak(j);
        const bool inactive = largest == 0.0 || peak < threshold;
        state.inactive_streak[j] = inactive ? state.inactive_streak[j] + 1 : 0;
        if (state.inactive_streak[j] >= patience) {
            bank.active[j] = false;
            for (auto& row : state.coeffs.values) {
                row[j].setZero();
            }
        }
    }
    return state;
}

/**
 * Runs c_step -> s_step -> normalize_rescale -> prune_inactive until the
 * relative change of the recorded objective drops below outer_rel_tol or
 * max_outer_iters is reached. On exit, synergies still below the pruning
 * threshold are removed.
 */
inline AmmState run(const AmmConfig& config, const VelocityDataset& data, const ShiftPlan& plan,
                    const ProgressSink& sink = {})
{
    AmmState state = initialize(config, data, plan);
    double current = objective(state, data, plan, config);
    std::optional<double> previous;

    for (Index it = 1; it <= config.max_outer_iters; ++it) {
        IterationRecord rec;
        rec.iteration = it;
        rec.before = current;

        state.coeffs = c_step(state, data, plan, config);
        rec.after_c_step = objective(state, data, plan, config);
        state.bank = s_step(state, data, plan, config);
        rec.after_s_step = objective(state, data, plan, config);
        if (config.normalize_every > 0 && it % config.normalize_every == 0) {
            state = normalize_rescale(std::move(state));
        }
        state = prune_inactive(std::move(state), config.prune_eps, config.prune_patience);
        current = objective(state, data, plan, config);
        rec.objective = current;
        rec.active_count = state.bank.active_count();
        state.iteration = it;
        state.objective_trace.push_back(current);
        state.history.push_back(rec);
        if (sink) {
            sink(rec);
        }
        if (!std::isfinite(current) || !std::isfinite(rec.after_c_step) || !std::isfinite(rec.after_s_step)) {
            std::string trace;
            for (double v : state.objective_trace) {
                trace += (trace.empty() ? "" : ", ") + std::to_string(v);
            }
            throw DivergenceError("objective became non-finite at outer iteration " + std::to_string(it) +
                                  " (trace: " + trace + ")");
        }

        bool all_zero = true;
        for (const auto& row : state.coeffs.values) {
            for (const auto& c : row) {
                all_zero = all_zero && c.cwiseAbs().maxCoeff() == 0.0;
            }
        }
        if (all_zero || state.bank.active_count() == 0) {
            state.converged = true;
            break;
        }
        if (previous && std::abs(*previous - current) < config.outer_rel_tol * std::max(std::abs(current), 1e-300)) {
            state.converged = true;
            break;
        }
        previous = current;
    }

    if (config.normalize_every == 0) {
        state = normalize_rescale(std::move(state));
    }
    state = prune_inactive(std::move(state), config.prune_eps, 1);
    const double final_value = objective(state, data, plan, config);
    if (!state.objective_trace.empty()) {
        state.objective_trace.back() = final_value;
        state.history.back().objective = final_value;
        state.history.back().active_count = state.bank.active_count();
    }
    return state;
}

} // namespace synergy
