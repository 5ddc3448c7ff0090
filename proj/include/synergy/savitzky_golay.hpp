#pragma once

#include <string>

#include <Eigen/Dense>

#include "synergy/core_model.hpp"

namespace synergy {

/// Least-squares polynomial smoothing over a sliding window. Near the ends
/// the window is shifted inward rather than shrunk, so every output sample
/// comes from a full-window fit and polynomials of degree <= polyorder pass
/// through unchanged everywhere.
class SavitzkyGolay
{
public:
    SavitzkyGolay(Index window, Index polyorder) : window_(window), order_(polyorder)
    {
        if (window < 1 || window % 2 == 0) {
            throw ConfigError("Savitzky-Golay window must be a positive odd count (got " + std::to_string(window) + ")");
        }
        if (polyorder < 0 || polyorder >= window) {
            throw ConfigError("Savitzky-Golay polyorder must satisfy 0 <= polyorder < window (got " +
                              std::to_string(polyorder) + ")");
        }
        const Index half = window / 2;
        const double scale = half > 0 ? static_cast<double>(half) : 1.0;
        Matrix V(window, polyorder + 1);
        for (Index r = 0; r < window; ++r) {
            const double x = static_cast<double>(r - half) / scale;
            double p = 1.0;
            for (Index c = 0; c <= polyorder; ++c) {
                V(r, c) = p;
                p *= x;
            }
        }
        const Eigen::HouseholderQR<Matrix> qr(V);
        const Matrix Q = qr.householderQ() * Matrix::Identity(window, polyorder + 1);
        hat_ = Q * Q.transpose();
    }

    Index window() const { return window_; }
    Index polyorder() const { return order_; }

    Vector apply(const Vector& signal) const
    {
        const Index T = signal.size();
        if (window_ > T) {
            throw ConfigError("Savitzky-Golay window " + std::to_string(window_) + " exceeds signal length " +
                              std::to_string(T));
        }
        const Index half = window_ / 2;
        Vector out(T);
        for (Index t = 0; t < T; ++t) {
            const Index start = std::clamp<Index>(t - half, 0, T - window_);
            out[t] = hat_.row(t - start).dot(signal.segment(start, window_));
        }
        return out;
    }

    /// Smooths each joint of a time-major (v[t * n + i]) series independently.
    Vector apply_time_major(const Vector& series, Index n) const
    {
        if (n < 1 || series.size() % n != 0) {
            throw DimensionError("series length is not a multiple of the joint count");
        }
        const Index T = series.size() / n;
        Vector out(series.size());
        for (Index i = 0; i < n; ++i) {
            Vector joint(T);
            for (Index t = 0; t < T; ++t) {
                joint[t] = series[t * n + i];
            }
            const Vector smoothed = apply(joint);
            for (Index t = 0; t < T; ++t) {
                out[t * n + i] = smoothed[t];
            }
        }
        return out;
    }

    /// Smooths each joint of a joint-major (s[i * T_s + tau]) template independently.
    Vector apply_joint_major(const Vector& tmpl, Index n) const
    {
        if (n < 1 || tmpl.size() % n != 0) {
            throw DimensionError("template length is not a multiple of the joint count");
        }
        const Index T_s = tmpl.size() / n;
        Vector out(tmpl.size());
        for (Index i = 0; i < n; ++i) {
            out.segment(i * T_s, T_s) = apply(tmpl.segment(i * T_s, T_s));
        }
        return out;
    }

private:
    Index window_;
    Index order_;
    Matrix hat_; // row r: weights that evaluate the window fit at position r
};

inline Vector savitzky_golay(const Vector& signal, Index window, Index polyorder)
{
    return SavitzkyGolay(window, polyorder).apply(signal);
}

} // namespace synergy
