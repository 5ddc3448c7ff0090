#pragma once

// Domain types for the time-shifted synergy model and the matrix-free
// operators that realize the shift dictionary.
//
// Stacking conventions used everywhere in the library:
//   velocity vectors are time-major:  v[t * n + i]      (t < T, i < n)
//   templates are joint-major:        s[i * T_s + tau]  (i < n, tau < T_s)
// A template placed at shift t_k contributes s[i * T_s + tau] to
// v[(t_k + tau) * n + i].

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "synergy/errors.hpp"

namespace synergy {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

namespace detail {

inline std::string dims(Index a, Index b)
{
    return std::to_string(a) + " vs " + std::to_string(b);
}

inline void require_size(const Vector& v, Index expected, const char* what)
{
    if (v.size() != expected) {
        throw DimensionError(std::string(what) + ": length mismatch (" + dims(v.size(), expected) + ")");
    }
}

// Joint count implied by a template of length n * T_s.
inline Index joints_of(const Vector& tmpl, Index T_s)
{
    if (T_s < 1 || tmpl.size() == 0 || tmpl.size() % T_s != 0) {
        throw DimensionError("template length " + std::to_string(tmpl.size()) +
                             " is not a positive multiple of T_s = " + std::to_string(T_s));
    }
    return tmpl.size() / T_s;
}

} // namespace detail

/// Allowed time shifts per synergy. A plan holds either one grid shared by
/// every synergy or one grid per synergy.
class ShiftPlan
{
public:
    ShiftPlan() = default;

    ShiftPlan(Index T, Index T_s, std::vector<std::vector<Index>> grids)
        : T_(T), T_s_(T_s), grids_(std::move(grids))
    {
        if (T_s_ < 1 || T_ < T_s_) {
            throw ConfigError("shift plan requires 1 <= T_s <= T (T_s = " + std::to_string(T_s_) +
                              ", T = " + std::to_string(T_) + ")");
        }
        if (grids_.empty()) {
            throw ConfigError("shift plan needs at least one shift grid");
        }
        for (const auto& grid : grids_) {
            if (grid.empty()) {
                throw ConfigError("shift grid is empty");
            }
            for (std::size_t k = 0; k < grid.size(); ++k) {
                if (grid[k] < 0 || grid[k] > T_ - T_s_) {
                    throw RangeError("shift " + std::to_string(grid[k]) + " outside [0, " +
                                     std::to_string(T_ - T_s_) + "]");
                }
                if (k > 0 && grid[k] <= grid[k - 1]) {
                    throw ConfigError("shifts must be strictly increasing");
                }
            }
        }
    }

    /// Every shift 0, stride, 2*stride, ... <= T - T_s, shared by all synergies.
    static ShiftPlan uniform(Index T, Index T_s, Index stride = 1)
    {
        if (stride < 1) {
            throw ConfigError("shift stride must be >= 1");
        }
        if (T_s < 1 || T < T_s) {
            throw ConfigError("shift plan requires 1 <= T_s <= T (T_s = " + std::to_string(T_s) +
                              ", T = " + std::to_string(T) + ")");
        }
        std::vector<Index> grid;
        for (Index t = 0; t <= T - T_s; t += stride) {
            grid.push_back(t);
        }
        return ShiftPlan(T, T_s, {std::move(grid)});
    }

    Index window() const { return T_; }
    Index template_length() const { return T_s_; }
    bool shared() const { return grids_.size() == 1; }
    std::size_t grid_count() const { return grids_.size(); }

    const std::vector<Index>& shifts(Index synergy) const
    {
        if (shared()) {
            return grids_.front();
        }
        if (synergy < 0 || static_cast<std::size_t>(synergy) >= grids_.size()) {
            throw RangeError("no shift grid for synergy " + std::to_string(synergy));
        }
        return grids_[static_cast<std::size_t>(synergy)];
    }

    Index count(Index synergy) const { return static_cast<Index>(shifts(synergy).size()); }

    /// Plans for m synergies must either share a grid or carry exactly m grids.
    void check_synergies(std::size_t m) const
    {
        if (!shared() && grids_.size() != m) {
            throw DimensionError("shift plan has " + std::to_string(grids_.size()) +
                                 " grids for " + std::to_string(m) + " synergies");
        }
    }

private:
    Index T_ = 0;
    Index T_s_ = 0;
    std::vector<std::vector<Index>> grids_;
};

/// The dictionary being learned: m templates of n joints by T_s samples.
struct SynergyBank
{
    Index n = 0;
    Index T_s = 0;
    std::vector<Vector> templates;
    std::vector<bool> active;

    std::size_t size() const { return templates.size(); }

    std::size_t active_count() const
    {
        std::size_t count = 0;
        for (bool a : active) {
            count += a ? 1 : 0;
        }
        return count;
    }

    void validate() const
    {
        if (n < 1 || T_s < 1) {
            throw DimensionError("synergy bank needs n >= 1 and T_s >= 1");
        }
        if (active.size() != templates.size()) {
            throw DimensionError("active flags do not match template count");
        }
        for (const auto& s : templates) {
            detail::require_size(s, n * T_s, "synergy template");
        }
    }
};

/// Observed trajectories: G tasks of n joints over T samples, time-major.
struct VelocityDataset
{
    Index n = 0;
    Index T = 0;
    double sample_rate = 1.0;
    std::vector<Vector> tasks;

    std::size_t size() const { return tasks.size(); }

    void validate() const
    {
        if (n < 1 || T < 1) {
            throw DimensionError("dataset needs n >= 1 and T >= 1");
        }
        for (const auto& v : tasks) {
            detail::require_size(v, n * T, "task velocity vector");
        }
    }
};

/// Activation amplitudes indexed [task][synergy], each of length K_j.
struct CoefficientSet
{
    std::vector<std::vector<Vector>> values;

    static CoefficientSet zeros(std::size_t tasks, std::size_t synergies, const ShiftPlan& plan)
    {
        plan.check_synergies(synergies);
        CoefficientSet out;
        out.values.assign(tasks, std::vector<Vector>(synergies));
        for (auto& row : out.values) {
            for (std::size_t j = 0; j < synergies; ++j) {
                row[j] = Vector::Zero(plan.count(static_cast<Index>(j)));
            }
        }
        return out;
    }

    std::size_t tasks() const { return values.size(); }
    std::size_t synergies() const { return values.empty() ? 0 : values.front().size(); }

    /// max over tasks of ||c_j^g||_2.
    double group_peak(std::size_t j) const
    {
        double peak = 0.0;
        for (const auto& row : values) {
            peak = std::max(peak, row[j].norm());
        }
        return peak;
    }

    void validate(const ShiftPlan& plan) const
    {
        for (const auto& row : values) {
            if (row.size() != synergies()) {
                throw DimensionError("coefficient rows disagree on synergy count");
            }
            for (std::size_t j = 0; j < row.size(); ++j) {
                detail::require_size(row[j], plan.count(static_cast<Index>(j)), "coefficient vector");
            }
        }
    }
};

namespace detail {

// out += scale * D_shift * tmpl, with n joints and T_s samples per joint.
inline void add_shifted(Vector& out, const Vector& tmpl, Index shift, Index n, Index T_s, double scale)
{
    for (Index i = 0; i < n; ++i) {
        const double* src = tmpl.data() + i * T_s;
        double* dst = out.data() + shift * n + i;
        for (Index tau = 0; tau < T_s; ++tau) {
            dst[tau * n] += scale * src[tau];
        }
    }
}

// <D_shift * tmpl, r>
inline double dot_shifted(const Vector& tmpl, const Vector& r, Index shift, Index n, Index T_s)
{
    double acc = 0.0;
    for (Index i = 0; i < n; ++i) {
        const double* src = tmpl.data() + i * T_s;
        const double* res = r.data() + shift * n + i;
        for (Index tau = 0; tau < T_s; ++tau) {
            acc += src[tau] * res[tau * n];
        }
    }
    return acc;
}

// out += scale * D_shift^T * r  (out is joint-major, length n * T_s)
inline void add_unshifted(Vector& out, const Vector& r, Index shift, Index n, Index T_s, double scale)
{
    for (Index i = 0; i < n; ++i) {
        double* dst = out.data() + i * T_s;
        const double* res = r.data() + shift * n + i;
        for (Index tau = 0; tau < T_s; ++tau) {
            dst[tau] += scale * res[tau * n];
        }
    }
}

// Shared kernel of dictionary_apply and coefficient_operator_apply:
// sum_k c_k D_k x, accumulated into out in shift order.
inline void accumulate_dictionary(Vector& out, const Vector& x, const Eigen::Ref<const Vector>& coeffs,
                                  const std::vector<Index>& shifts, Index n, Index T_s)
{
    for (std::size_t k = 0; k < shifts.size(); ++k) {
        const double c = coeffs[static_cast<Index>(k)];
        if (c != 0.0) {
            add_shifted(out, x, shifts[k], n, T_s, c);
        }
    }
}

} // namespace detail

/// D_shift * tmpl without forming D_shift: the template is placed at time
/// offset `shift` in a zero window of T samples per joint.
inline Vector apply_shift(const Vector& tmpl, Index shift, Index n, Index T, Index T_s)
{
    if (n < 1 || T_s < 1 || T < T_s) {
        throw DimensionError("apply_shift requires n >= 1 and 1 <= T_s <= T");
    }
    detail::require_size(tmpl, n * T_s, "apply_shift template");
    if (shift < 0 || shift > T - T_s) {
        throw RangeError("shift " + std::to_string(shift) + " outside [0, " + std::to_string(T - T_s) + "]");
    }
    Vector out = Vector::Zero(n * T);
    detail::add_shifted(out, tmpl, shift, n, T_s, 1.0);
    return out;
}

/// D(s) * c: the shifted copies of one template weighted by its coefficients.
inline Vector dictionary_apply(const Vector& tmpl, const Vector& coeffs, const ShiftPlan& plan, Index synergy = 0)
{
    const Index T_s = plan.template_length();
    const Index n = detail::joints_of(tmpl, T_s);
    const auto& shifts = plan.shifts(synergy);
    detail::require_size(coeffs, static_cast<Index>(shifts.size()), "dictionary_apply coefficients");
    Vector out = Vector::Zero(n * plan.window());
    detail::accumulate_dictionary(out, tmpl, coeffs, shifts, n, T_s);
    return out;
}

/// D(s)^T * r; entry k is <D_k s, r>.
inline Vector dictionary_adjoint_apply(const Vector& tmpl, const Vector& residual, const ShiftPlan& plan,
                                       Index synergy = 0)
{
    const Index T_s = plan.template_length();
    const Index n = detail::joints_of(tmpl, T_s);
    detail::require_size(residual, n * plan.window(), "dictionary_adjoint_apply residual");
    const auto& shifts = plan.shifts(synergy);
    Vector out(static_cast<Index>(shifts.size()));
    for (std::size_t k = 0; k < shifts.size(); ++k) {
        out[static_cast<Index>(k)] = detail::dot_shifted(tmpl, residual, shifts[k], n, T_s);
    }
    return out;
}

/// B(c) * x = (sum_k c_k D_k) x. Same arithmetic as dictionary_apply(x, c).
inline Vector coefficient_operator_apply(const Vector& coeffs, const Vector& x, const ShiftPlan& plan,
                                         Index synergy = 0)
{
    return dictionary_apply(x, coeffs, plan, synergy);
}

/// B(c)^T * r = sum_k c_k D_k^T r, a joint-major vector of length n * T_s.
inline Vector coefficient_operator_adjoint_apply(const Vector& coeffs, const Vector& residual, Index n,
                                                 const ShiftPlan& plan, Index synergy = 0)
{
    const Index T_s = plan.template_length();
    detail::require_size(residual, n * plan.window(), "coefficient_operator_adjoint_apply residual");
    const auto& shifts = plan.shifts(synergy);
    detail::require_size(coeffs, static_cast<Index>(shifts.size()), "coefficient_operator_adjoint_apply coefficients");
    Vector out = Vector::Zero(n * T_s);
    for (std::size_t k = 0; k < shifts.size(); ++k) {
        const double c = coeffs[static_cast<Index>(k)];
        if (c != 0.0) {
            detail::add_unshifted(out, residual, shifts[k], n, T_s, c);
        }
    }
    return out;
}

/// sum_j D(s^j) c_j over the active synergies of the bank.
inline Vector reconstruct_task(const SynergyBank& bank, const std::vector<Vector>& coeffs_for_task,
                               const ShiftPlan& plan)
{
    bank.validate();
    if (bank.T_s != plan.template_length()) {
        throw DimensionError("bank T_s disagrees with shift plan");
    }
    if (coeffs_for_task.size() != bank.size()) {
        throw DimensionError("coefficient groups (" + std::to_string(coeffs_for_task.size()) +
                             ") do not match synergy count (" + std::to_string(bank.size()) + ")");
    }
    plan.check_synergies(bank.size());
    Vector out = Vector::Zero(bank.n * plan.window());
    for (std::size_t j = 0; j < bank.size(); ++j) {
        if (!bank.active[j]) {
            continue;
        }
        const auto& shifts = plan.shifts(static_cast<Index>(j));
        detail::require_size(coeffs_for_task[j], static_cast<Index>(shifts.size()), "reconstruct_task coefficients");
        detail::accumulate_dictionary(out, bank.templates[j], coeffs_for_task[j], shifts, bank.n, bank.T_s);
    }
    return out;
}

} // namespace synergy
