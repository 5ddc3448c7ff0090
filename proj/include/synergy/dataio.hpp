#pragma once

// Dataset ingestion and preprocessing: finite-difference velocities,
// rectangle-rule integration back to angles, the long-format CSV layout, and
// the planted-truth synthetic generator.
//
// CSV layout (UTF-8, LF line endings, 1-based ids):
//   kind,n,T,G,sample_rate
//   velocities,4,30,20,1
//   task_id,joint_id,t,value
//   1,1,1,0.0123
//   ...
// `kind` is `velocities` or `angles`. Every (task_id, joint_id, t) triple
// must appear exactly once.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include "synergy/core_model.hpp"
#include "synergy/savitzky_golay.hpp"

namespace synergy {

/// Joint angles of one trajectory, rows = joints, columns = samples.
struct AngleTrajectory
{
    Matrix angles; // n x T, degrees
    double sample_rate = 1.0;

    Index joints() const { return angles.rows(); }
    Index samples() const { return angles.cols(); }
};

/// Velocities from angles: central differences inside, one-sided at the ends,
/// scaled by the sample rate. Output is time-major, length n * T.
inline Vector differentiate(const AngleTrajectory& traj)
{
    const Index n = traj.joints();
    const Index T = traj.samples();
    if (T < 2) {
        throw InputError("differentiate needs at least 2 samples (got " + std::to_string(T) + ")");
    }
    if (n < 1 || !traj.angles.allFinite()) {
        throw InputError("angle trajectory must have at least one joint and finite entries");
    }
    const double fs = traj.sample_rate;
    Vector v(n * T);
    for (Index i = 0; i < n; ++i) {
        const auto x = traj.angles.row(i);
        v[i] = (x[1] - x[0]) * fs;
        v[(T - 1) * n + i] = (x[T - 1] - x[T - 2]) * fs;
        for (Index t = 1; t + 1 < T; ++t) {
            v[t * n + i] = 0.5 * (x[t + 1] - x[t - 1]) * fs;
        }
    }
    return v;
}

/// Angles from time-major velocities: theta(0) = initial,
/// theta(t) = theta(t-1) + v(t) / sample_rate.
inline AngleTrajectory integrate(const Vector& velocities, const Vector& initial_angles, double sample_rate = 1.0)
{
    const Index n = initial_angles.size();
    if (n < 1 || velocities.size() % n != 0 || velocities.size() == 0) {
        throw DimensionError("velocity length " + std::to_string(velocities.size()) +
                             " is not a positive multiple of the joint count " + std::to_string(n));
    }
    if (!(sample_rate > 0.0)) {
        throw InputError("sample_rate must be positive");
    }
    const Index T = velocities.size() / n;
    const double dt = 1.0 / sample_rate;
    AngleTrajectory out;
    out.sample_rate = sample_rate;
    out.angles.resize(n, T);
    out.angles.col(0) = initial_angles;
    for (Index t = 1; t < T; ++t) {
        for (Index i = 0; i < n; ++i) {
            out.angles(i, t) = out.angles(i, t - 1) + dt * velocities[t * n + i];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

enum class CsvKind
{
    Any,
    Velocities,
    Angles,
};

using LoadedCsv = std::variant<VelocityDataset, std::vector<AngleTrajectory>>;

namespace detail {

inline std::string format_double(double value)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

inline std::vector<std::string_view> split_fields(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

inline std::string where(const std::string& path, std::size_t line, std::size_t column)
{
    return path + ": row " + std::to_string(line) + ", column " + std::to_string(column);
}

template <typename T>
T parse_number(std::string_view field, const std::string& path, std::size_t line, std::size_t column)
{
    T value{};
    const char* first = field.data();
    const char* last = field.data() + field.size();
    if (!field.empty() && field.front() == '+') {
        ++first;
    }
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr != last || field.empty()) {
        throw ParseError(where(path, line, column) + ": not a number: '" + std::string(field) + "'");
    }
    return value;
}

inline void write_header(std::ostream& os, std::string_view kind, Index n, Index T, std::size_t G, double sample_rate)
{
    os << "kind,n,T,G,sample_rate\n"
       << kind << ',' << n << ',' << T << ',' << G << ',' << format_double(sample_rate) << '\n'
       << "task_id,joint_id,t,value\n";
}

inline std::ofstream open_for_write(const std::filesystem::path& path)
{
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    return os;
}

} // namespace detail

inline void save_csv(const std::filesystem::path& path, const VelocityDataset& data)
{
    data.validate();
    auto os = detail::open_for_write(path);
    detail::write_header(os, "velocities", data.n, data.T, data.size(), data.sample_rate);
    for (std::size_t g = 0; g < data.size(); ++g) {
        for (Index i = 0; i < data.n; ++i) {
            for (Index t = 0; t < data.T; ++t) {
                os << g + 1 << ',' << i + 1 << ',' << t + 1 << ','
                   << detail::format_double(data.tasks[g][t * data.n + i]) << '\n';
            }
        }
    }
    if (!os) {
        throw IoError("write failed for '" + path.string() + "'");
    }
}

inline void save_csv(const std::filesystem::path& path, const std::vector<AngleTrajectory>& trajectories)
{
    if (trajectories.empty()) {
        throw InputError("no angle trajectories to write");
    }
    const Index n = trajectories.front().joints();
    const Index T = trajectories.front().samples();
    for (const auto& tr : trajectories) {
        if (tr.joints() != n || tr.samples() != T) {
            throw DimensionError("angle trajectories disagree on shape");
        }
    }
    auto os = detail::open_for_write(path);
    detail::write_header(os, "angles", n, T, trajectories.size(), trajectories.front().sample_rate);
    for (std::size_t g = 0; g < trajectories.size(); ++g) {
        for (Index i = 0; i < n; ++i) {
            for (Index t = 0; t < T; ++t) {
                os << g + 1 << ',' << i + 1 << ',' << t + 1 << ','
                   << detail::format_double(trajectories[g].angles(i, t)) << '\n';
            }
        }
    }
    if (!os) {
        throw IoError("write failed for '" + path.string() + "'");
    }
}

/// Parses the long-format CSV. Errors name the offending row and column.
inline LoadedCsv load_csv(const std::filesystem::path& path, CsvKind expected = CsvKind::Any)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    const std::string name = path.string();
    std::string line;
    std::size_t row = 0;
    const auto next_line = [&]() -> bool {
        if (!std::getline(is, line)) {
            return false;
        }
        ++row;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        return true;
    };

    if (!next_line() || line != "kind,n,T,G,sample_rate") {
        throw ParseError(detail::where(name, 1, 1) + ": expected header 'kind,n,T,G,sample_rate'");
    }
    if (!next_line()) {
        throw ParseError(detail::where(name, 2, 1) + ": missing header values");
    }
    const auto meta = detail::split_fields(line);
    if (meta.size() != 5) {
        throw ParseError(detail::where(name, row, meta.size()) + ": header values need 5 fields, found " +
                         std::to_string(meta.size()));
    }
    const std::string kind(meta[0]);
    if (kind != "velocities" && kind != "angles") {
        throw ParseError(detail::where(name, row, 1) + ": unknown kind '" + kind + "'");
    }
    if ((expected == CsvKind::Velocities && kind != "velocities") || (expected == CsvKind::Angles && kind != "angles")) {
        throw ParseError(detail::where(name, row, 1) + ": unexpected kind '" + kind + "'");
    }
    const auto n = detail::parse_number<long long>(meta[1], name, row, 2);
    const auto T = detail::parse_number<long long>(meta[2], name, row, 3);
    const auto G = detail::parse_number<long long>(meta[3], name, row, 4);
    const auto fs = detail::parse_number<double>(meta[4], name, row, 5);
    if (n < 1 || T < 1 || G < 0 || !(fs > 0.0) || !std::isfinite(fs)) {
        throw ParseError(detail::where(name, row, 1) + ": header requires n >= 1, T >= 1, G >= 0, sample_rate > 0");
    }
    if (!next_line() || line != "task_id,joint_id,t,value") {
        throw ParseError(detail::where(name, row, 1) + ": expected column header 'task_id,joint_id,t,value'");
    }

    std::vector<Vector> series(static_cast<std::size_t>(G), Vector::Zero(static_cast<Index>(n * T)));
    std::vector<std::vector<bool>> seen(static_cast<std::size_t>(G), std::vector<bool>(static_cast<std::size_t>(n * T)));
    std::size_t filled = 0;
    while (next_line()) {
        if (line.empty()) {
            continue;
        }
        const auto fields = detail::split_fields(line);
        if (fields.size() != 4) {
            throw ParseError(detail::where(name, row, std::min<std::size_t>(fields.size(), 5)) +
                             ": ragged row with " + std::to_string(fields.size()) + " fields (expected 4)");
        }
        const auto task = detail::parse_number<long long>(fields[0], name, row, 1);
        const auto joint = detail::parse_number<long long>(fields[1], name, row, 2);
        const auto t = detail::parse_number<long long>(fields[2], name, row, 3);
        const auto value = detail::parse_number<double>(fields[3], name, row, 4);
        if (task < 1 || task > G) {
            throw ParseError(detail::where(name, row, 1) + ": task_id out of range");
        }
        if (joint < 1 || joint > n) {
            throw ParseError(detail::where(name, row, 2) + ": joint_id out of range");
        }
        if (t < 1 || t > T) {
            throw ParseError(detail::where(name, row, 3) + ": t out of range");
        }
        const auto g = static_cast<std::size_t>(task - 1);
        const auto idx = static_cast<std::size_t>((t - 1) * n + (joint - 1));
        if (seen[g][idx]) {
            throw ParseError(detail::where(name, row, 1) + ": duplicate entry");
        }
        seen[g][idx] = true;
        series[g][static_cast<Index>(idx)] = value;
        ++filled;
    }
    if (filled != static_cast<std::size_t>(G * n * T)) {
        throw ParseError(detail::where(name, row, 1) + ": expected " + std::to_string(G * n * T) + " values, found " +
                         std::to_string(filled));
    }

    if (kind == "velocities") {
        VelocityDataset data;
        data.n = static_cast<Index>(n);
        data.T = static_cast<Index>(T);
        data.sample_rate = fs;
        data.tasks = std::move(series);
        return data;
    }
    std::vector<AngleTrajectory> out;
    for (const auto& s : series) {
        AngleTrajectory tr;
        tr.sample_rate = fs;
        tr.angles.resize(static_cast<Index>(n), static_cast<Index>(T));
        for (Index t = 0; t < T; ++t) {
            for (Index i = 0; i < n; ++i) {
                tr.angles(i, t) = s[t * n + i];
            }
        }
        out.push_back(std::move(tr));
    }
    return out;
}

inline VelocityDataset load_velocity_csv(const std::filesystem::path& path)
{
    return std::get<VelocityDataset>(load_csv(path, CsvKind::Velocities));
}

// ---------------------------------------------------------------------------
// synthetic ground truth
// ---------------------------------------------------------------------------

struct SyntheticSpec
{
    Index m_true = 3;
    Index active_shifts_per_task = 2;
    std::optional<double> snr_db = 20.0; // nullopt: noiseless
    double amplitude_low = 0.5;
    double amplitude_high = 2.0;
    std::uint64_t seed = 1;
    Index smooth_window = 11;
    Index smooth_polyorder = 3;
    bool taper = true; // templates start and end at rest

    void validate() const
    {
        if (m_true < 1) {
            throw ConfigError("m_true must be >= 1");
        }
        if (active_shifts_per_task < 0) {
            throw ConfigError("active_shifts_per_task must be >= 0");
        }
        if (snr_db && !std::isfinite(*snr_db)) {
            throw ConfigError("snr_db must be finite (omit it for noiseless data)");
        }
        if (!(amplitude_low > 0.0) || !(amplitude_high >= amplitude_low)) {
            throw ConfigError("amplitude range must satisfy 0 < low <= high");
        }
    }
};

struct Activation
{
    Index synergy = 0;
    Index shift_index = 0;
    Index shift = 0;
    double amplitude = 0.0;
};

struct SyntheticData
{
    VelocityDataset data;
    SynergyBank truth;
    CoefficientSet truth_coeffs;
    std::vector<std::vector<Activation>> activations; // per task
    double noise_sigma = 0.0;
};

/// Smooth unit-norm templates: Gaussian draws, per-joint Savitzky-Golay,
/// optionally multiplied by sin^2(pi (tau + 1) / (T_s + 1)), normalized.
inline std::vector<Vector> smooth_random_templates(Index count, Index n, Index T_s, Index window, Index polyorder,
                                                   std::mt19937_64& rng, bool taper = false)
{
    std::normal_distribution<double> normal;
    // largest odd window that fits the template
    Index w = std::min(window, T_s % 2 == 1 ? T_s : T_s - 1);
    std::optional<SavitzkyGolay> filter;
    if (w >= 3) {
        filter.emplace(w, std::min(polyorder, w - 1));
    }
    std::vector<Vector> out;
    for (Index j = 0; j < count; ++j) {
        Vector s(n * T_s);
        for (Index k = 0; k < s.size(); ++k) {
            s[k] = normal(rng);
        }
        if (filter) {
            s = filter->apply_joint_major(s, n);
        }
        if (taper) {
            for (Index i = 0; i < n; ++i) {
                for (Index tau = 0; tau < T_s; ++tau) {
                    const double w = std::sin(std::numbers::pi * static_cast<double>(tau + 1) /
                                              static_cast<double>(T_s + 1));
                    s[i * T_s + tau] *= w * w;
                }
            }
        }
        const double norm = s.norm();
        out.push_back(norm > 0.0 ? Vector(s / norm) : s);
    }
    return out;
}

namespace detail {

inline void sample_tasks(SyntheticData& out, const SyntheticSpec& spec, Index T, std::size_t G, const ShiftPlan& plan,
                         double sample_rate, std::mt19937_64& rng)
{
    const auto m = static_cast<Index>(out.truth.size());
    std::vector<std::pair<Index, Index>> pairs;
    for (Index j = 0; j < m; ++j) {
        for (Index k = 0; k < plan.count(j); ++k) {
            pairs.emplace_back(j, k);
        }
    }
    if (spec.active_shifts_per_task > static_cast<Index>(pairs.size())) {
        throw ConfigError("active_shifts_per_task exceeds the " + std::to_string(pairs.size()) +
                          " available (synergy, shift) pairs");
    }
    out.truth_coeffs = CoefficientSet::zeros(G, out.truth.size(), plan);
    std::uniform_real_distribution<double> amplitude(spec.amplitude_low, spec.amplitude_high);
    out.data.n = out.truth.n;
    out.data.T = T;
    out.data.sample_rate = sample_rate;
    out.data.tasks.clear();
    out.activations.assign(G, {});
    double signal_energy = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
        auto order = pairs;
        for (Index a = 0; a < spec.active_shifts_per_task; ++a) {
            std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(a), order.size() - 1);
            std::swap(order[static_cast<std::size_t>(a)], order[pick(rng)]);
            const auto [j, k] = order[static_cast<std::size_t>(a)];
            const double amp = amplitude(rng);
            out.truth_coeffs.values[g][static_cast<std::size_t>(j)][k] = amp;
            out.activations[g].push_back({j, k, plan.shifts(j)[static_cast<std::size_t>(k)], amp});
        }
        Vector v = reconstruct_task(out.truth, out.truth_coeffs.values[g], plan);
        signal_energy += v.squaredNorm();
        out.data.tasks.push_back(std::move(v));
    }

    out.noise_sigma = 0.0;
    if (spec.snr_db && G > 0) {
        const double samples = static_cast<double>(G) * static_cast<double>(out.truth.n * T);
        const double power = signal_energy / samples;
        const double ratio = std::pow(10.0, *spec.snr_db / 10.0);
        out.noise_sigma = power > 0.0 ? std::sqrt(power / ratio) : std::sqrt(1.0 / ratio);
        std::normal_distribution<double> noise(0.0, out.noise_sigma);
        for (auto& v : out.data.tasks) {
            for (Index k = 0; k < v.size(); ++k) {
                v[k] += noise(rng);
            }
        }
    }
}

inline void check_synthetic_dims(const SyntheticSpec& spec, Index n, Index T, Index T_s, const ShiftPlan& plan)
{
    spec.validate();
    if (n < 1 || T_s < 1 || T_s > T) {
        throw ConfigError("synthetic data needs n >= 1 and 1 <= T_s <= T");
    }
    if (plan.window() != T || plan.template_length() != T_s) {
        throw ConfigError("shift plan dimensions disagree with T and T_s");
    }
    plan.check_synergies(static_cast<std::size_t>(spec.m_true));
}

} // namespace detail

/**
 * Planted-truth dataset: m_true smooth templates, each task activating
 * `active_shifts_per_task` distinct (synergy, shift) pairs drawn uniformly
 * without replacement, amplitudes uniform in [low, high], plus i.i.d.
 * Gaussian noise whose variance is the mean signal power over the whole
 * dataset divided by 10^(snr_db / 10). A dataset without signal gets noise of
 * variance 10^(-snr_db / 10).
 */
inline SyntheticData generate_synthetic(const SyntheticSpec& spec, Index n, Index T, Index T_s, std::size_t G,
                                        const ShiftPlan& plan, double sample_rate = 1.0)
{
    detail::check_synthetic_dims(spec, n, T, T_s, plan);
    std::mt19937_64 rng(spec.seed);
    SyntheticData out;
    out.truth.n = n;
    out.truth.T_s = T_s;
    out.truth.templates =
        smooth_random_templates(spec.m_true, n, T_s, spec.smooth_window, spec.smooth_polyorder, rng, spec.taper);
    out.truth.active.assign(static_cast<std::size_t>(spec.m_true), true);
    detail::sample_tasks(out, spec, T, G, plan, sample_rate, rng);
    return out;
}

/// Fresh tasks (window T, possibly different from training) from an existing truth.
/// Draws come from a stream seeded with `seed`; spec.m_true and templates settings are ignored.
inline SyntheticData generate_from_truth(const SynergyBank& truth, const SyntheticSpec& spec, Index T, std::size_t G,
                                         const ShiftPlan& plan, std::uint64_t seed, double sample_rate = 1.0)
{
    SyntheticSpec checked = spec;
    checked.m_true = static_cast<Index>(truth.size());
    truth.validate();
    detail::check_synthetic_dims(checked, truth.n, T, truth.T_s, plan);
    std::mt19937_64 rng(seed);
    SyntheticData out;
    out.truth = truth;
    detail::sample_tasks(out, spec, T, G, plan, sample_rate, rng);
    return out;
}

} // namespace synergy
