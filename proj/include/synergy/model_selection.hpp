#pragma once

// Grid search over (lambda1, lambda2, alpha) scored by the testing-phase
// reconstruction error on a held-out subset of the training tasks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "synergy/amm.hpp"
#include "synergy/recon_test.hpp"

namespace synergy {

/// `count` values spaced logarithmically between lo and hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, Index count)
{
    if (!(lo > 0.0) || !(hi >= lo) || count < 1) {
        throw ConfigError("log_grid needs 0 < lo <= hi and count >= 1");
    }
    std::vector<double> out;
    for (Index k = 0; k < count; ++k) {
        const double f = count == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(count - 1);
        out.push_back(lo * std::pow(hi / lo, f));
    }
    return out;
}

struct GridSpec
{
    std::vector<double> lambda1 = log_grid(1e-3, 1.0, 4);
    std::vector<double> lambda2 = {0.0, 1e-3, 1e-2};
    std::vector<double> alpha = {1e-3, 1e-2};
    double validation_fraction = 0.2;
    std::uint64_t split_seed = 0;
    // Among points whose validation error is within this absolute margin of
    // the best, pick the one with the fewest active synergies. 0 selects the
    // minimum validation error.
    double parsimony_tolerance = 0.0;
    bool refit = false; // retrain the selected point on every task

    void validate() const
    {
        if (lambda1.empty() || lambda2.empty() || alpha.empty()) {
            throw ConfigError("grid axes must be non-empty");
        }
        for (const auto* axis : {&lambda1, &lambda2, &alpha}) {
            for (double v : *axis) {
                if (!(v >= 0.0) || !std::isfinite(v)) {
                    throw ConfigError("grid values must be finite and >= 0");
                }
            }
        }
        if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
            throw ConfigError("validation_fraction must lie in (0, 1)");
        }
        if (!(parsimony_tolerance >= 0.0)) {
            throw ConfigError("parsimony_tolerance must be >= 0");
        }
    }

    std::size_t size() const { return lambda1.size() * lambda2.size() * alpha.size(); }
};

struct GridPoint
{
    SparseGroupPenalty penalty;
    double alpha = 0.0;
    std::size_t m_final = 0;
    double objective = 0.0;
    Index iterations = 0;
    bool converged = false;
    double validation_error = 0.0;
    AmmState state; // trained on the training split
};

struct GridResult
{
    std::vector<GridPoint> points;
    std::size_t selected = 0;
    std::vector<std::size_t> train_tasks; // 0-based
    std::vector<std::size_t> validation_tasks;
    std::optional<AmmState> refit; // selected penalties, trained on every task

    /// The refit model when requested, else the selected point's model.
    const AmmState& model() const { return refit ? *refit : points.at(selected).state; }
};

inline VelocityDataset subset(const VelocityDataset& data, const std::vector<std::size_t>& tasks)
{
    VelocityDataset out;
    out.n = data.n;
    out.T = data.T;
    out.sample_rate = data.sample_rate;
    for (std::size_t g : tasks) {
        out.tasks.push_back(data.tasks.at(g));
    }
    return out;
}

/// Deterministic shuffled split; both parts non-empty.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_tasks(std::size_t G, double fraction,
                                                                                 std::uint64_t seed)
{
    if (G < 2) {
        throw ConfigError("a validation split needs at least two tasks");
    }
    std::vector<std::size_t> order(G);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = G - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i);
        std::swap(order[i], order[pick(rng)]);
    }
    const auto held = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(G))), 1, G - 1);
    std::vector<std::size_t> validation(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(held), order.end());
    std::sort(validation.begin(), validation.end());
    std::sort(train.begin(), train.end());
    return {train, validation};
}

inline std::size_t select_point(const std::vector<GridPoint>& points, double tolerance)
{
    std::size_t best = 0;
    for (std::size_t p = 1; p < points.size(); ++p) {
        if (points[p].validation_error < points[best].validation_error) {
            best = p;
        }
    }
    const double limit = points[best].validation_error + tolerance;
    std::size_t chosen = best;
    for (std::size_t p = 0; p < points.size(); ++p) {
        const auto& a = points[p];
        const auto& c = points[chosen];
        if (a.validation_error <= limit &&
            (a.m_final < c.m_final || (a.m_final == c.m_final && a.validation_error < c.validation_error))) {
            chosen = p;
        }
    }
    return chosen;
}

/**
 * Trains one model per grid point (lambda1-major, then lambda2, then alpha)
 * on the training split, scores it with evaluate_suite on the validation
 * split and selects a point, optionally refitting it on all tasks.
 */
inline GridResult grid_search(const AmmConfig& base, const GridSpec& grid, const TestSettings& scoring,
                              const VelocityDataset& data, const ShiftPlan& plan,
                              const std::function<void(const GridPoint&, std::size_t)>& on_point = {})
{
    grid.validate();
    data.validate();
    GridResult result;
    std::tie(result.train_tasks, result.validation_tasks) =
        split_tasks(data.size(), grid.validation_fraction, grid.split_seed);
    const VelocityDataset train = subset(data, result.train_tasks);
    const VelocityDataset validation = subset(data, result.validation_tasks);

    for (double l1 : grid.lambda1) {
        for (double l2 : grid.lambda2) {
            for (double a : grid.alpha) {
                AmmConfig config = base;
                config.penalty = {l1, l2};
                config.alpha = a;
                GridPoint point;
                point.penalty = config.penalty;
                point.alpha = a;
                point.state = run(config, train, plan);
                point.m_final = point.state.bank.active_count();
                point.objective = point.state.objective_trace.empty() ? 0.0 : point.state.objective_trace.back();
                point.iterations = point.state.iteration;
                point.converged = point.state.converged;
                point.validation_error = *evaluate_suite(point.state.bank, validation, scoring).mean;
                result.points.push_back(std::move(point));
                if (on_point) {
                    on_point(result.points.back(), result.points.size() - 1);
                }
            }
        }
    }
    result.selected = select_point(result.points, grid.parsimony_tolerance);
    if (grid.refit) {
        AmmConfig config = base;
        config.penalty = result.points[result.selected].penalty;
        config.alpha = result.points[result.selected].alpha;
        result.refit = run(config, data, plan);
    }
    return result;
}

} // namespace synergy
