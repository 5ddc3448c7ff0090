#pragma once

// Run configuration: one JSON document per run.
//
//   {
//     "schema_version": 1,
//     "seed": 1,
//     "threads": 4,                          optional
//     "synthetic": {...},                    synth
//     "amm": {...},                          train
//     "grid": {...},                         train, optional (grid mode)
//     "test": {...},                         test
//     "postures": {...},                     postures, optional
//     "paths": {...}
//   }
//
// Unknown keys are rejected. Relative paths resolve against the directory
// holding the configuration file.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "synergy/amm.hpp"
#include "synergy/dataio.hpp"
#include "synergy/json_io.hpp"
#include "synergy/model_selection.hpp"
#include "synergy/recon_test.hpp"

namespace synergy {

struct SyntheticSection
{
    SyntheticSpec spec;
    Index n = 4;
    Index T = 30;
    Index T_s = 10;
    std::size_t G = 20;
    double sample_rate = 1.0;
    std::size_t test_G = 0; // held-out tasks from the same truth
    std::optional<Index> test_T;
};

struct PostureSection
{
    std::vector<double> fractions = {0.0, 0.25, 0.5, 0.75, 1.0};
    std::optional<std::vector<double>> initial_angles; // zeros when absent
};

struct RunPaths
{
    std::map<std::string, std::filesystem::path> entries;

    bool has(const std::string& key) const { return entries.count(key) > 0; }

    const std::filesystem::path& at(const std::string& key) const
    {
        const auto it = entries.find(key);
        if (it == entries.end()) {
            throw ConfigError("paths." + key + " is required for this command");
        }
        return it->second;
    }
};

struct RunConfig
{
    std::filesystem::path source; // the configuration file
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<SyntheticSection> synthetic;
    std::optional<AmmConfig> amm;
    std::optional<GridSpec> grid;
    std::optional<TestSettings> test;
    PostureSection postures;
    RunPaths paths;

    std::uint64_t require_seed() const
    {
        if (!seed) {
            throw ConfigError(source.string() + ": missing required field \"seed\"");
        }
        return *seed;
    }
};

namespace detail {

class Section
{
public:
    Section(const Json& doc, std::string name) : doc_(doc), name_(std::move(name))
    {
        if (!doc_.is_object()) {
            throw ConfigError(name_ + " must be a JSON object");
        }
    }

    template <typename T>
    std::optional<T> optional(const char* key)
    {
        seen_.insert(key);
        if (!doc_.contains(key) || doc_.at(key).is_null()) {
            return std::nullopt;
        }
        try {
            return doc_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("field \"" + qualified(key) + "\" has the wrong type");
        }
    }

    template <typename T>
    void read(const char* key, T& target)
    {
        if (auto v = optional<T>(key)) {
            target = *v;
        }
    }

    template <typename T>
    T required(const char* key)
    {
        auto v = optional<T>(key);
        if (!v) {
            throw ConfigError("missing required field \"" + qualified(key) + "\"");
        }
        return *v;
    }

    std::optional<Section> child(const char* key)
    {
        seen_.insert(key);
        if (!doc_.contains(key) || doc_.at(key).is_null()) {
            return std::nullopt;
        }
        return Section(doc_.at(key), qualified(key));
    }

    bool present(const char* key) const { return doc_.contains(key) && !doc_.at(key).is_null(); }

    const Json& raw() const { return doc_; }

    /// Rejects keys that were never asked for.
    void finish() const
    {
        for (const auto& item : doc_.items()) {
            if (!seen_.count(item.key())) {
                throw ConfigError("unknown field \"" + qualified(item.key().c_str()) + "\"");
            }
        }
    }

    std::string qualified(const char* key) const { return name_.empty() ? key : name_ + "." + key; }

private:
    const Json& doc_;
    std::string name_;
    std::set<std::string> seen_;
};

inline void read_control(Section& s, SolverControl& control)
{
    s.read("max_iters", control.max_iters);
    s.read("rel_tol", control.rel_tol);
}

inline SyntheticSection parse_synthetic(Section s, std::uint64_t seed)
{
    SyntheticSection out;
    out.spec.seed = seed;
    s.read("n", out.n);
    s.read("T", out.T);
    s.read("T_s", out.T_s);
    s.read("G", out.G);
    s.read("sample_rate", out.sample_rate);
    s.read("m_true", out.spec.m_true);
    s.read("active_shifts_per_task", out.spec.active_shifts_per_task);
    // absent: default SNR; explicit null: noiseless
    const auto snr = s.optional<double>("snr_db");
    if (snr || s.raw().contains("snr_db")) {
        out.spec.snr_db = snr;
    }
    s.read("amplitude_low", out.spec.amplitude_low);
    s.read("amplitude_high", out.spec.amplitude_high);
    s.read("smooth_window", out.spec.smooth_window);
    s.read("smooth_polyorder", out.spec.smooth_polyorder);
    s.read("taper", out.spec.taper);
    s.read("test_G", out.test_G);
    out.test_T = s.optional<Index>("test_T");
    s.finish();
    out.spec.validate();
    if (out.n < 1 || out.T_s < 1 || out.T_s > out.T || out.G < 1) {
        throw ConfigError("synthetic: need n >= 1, G >= 1 and 1 <= T_s <= T");
    }
    if (out.test_T && *out.test_T < out.T_s) {
        throw ConfigError("synthetic.test_T must be >= T_s");
    }
    if (!(out.sample_rate > 0.0)) {
        throw ConfigError("synthetic.sample_rate must be > 0");
    }
    return out;
}

inline AmmConfig parse_amm(Section s, std::uint64_t seed)
{
    AmmConfig c;
    c.seed = seed;
    s.read("m_int", c.m_int);
    s.read("T_s", c.T_s);
    s.read("lambda1", c.penalty.lambda1);
    s.read("lambda2", c.penalty.lambda2);
    s.read("alpha", c.alpha);
    s.read("max_outer_iters", c.max_outer_iters);
    s.read("outer_rel_tol", c.outer_rel_tol);
    s.read("prune_eps", c.prune_eps);
    s.read("prune_patience", c.prune_patience);
    s.read("normalize_every", c.normalize_every);
    s.read("warm_start", c.warm_start);
    s.read("sqrt_group_weighting", c.sqrt_group_weighting);
    if (auto sub = s.child("subproblem")) {
        read_control(*sub, c.sub_control);
        sub->finish();
    }
    s.finish();
    c.validate();
    return c;
}

inline GridSpec parse_grid(Section s, std::uint64_t seed)
{
    GridSpec g;
    g.split_seed = seed;
    s.read("lambda1", g.lambda1);
    s.read("lambda2", g.lambda2);
    s.read("alpha", g.alpha);
    s.read("validation_fraction", g.validation_fraction);
    s.read("parsimony_tolerance", g.parsimony_tolerance);
    s.read("refit", g.refit);
    s.finish();
    g.validate();
    return g;
}

inline TestSettings parse_test(Section s)
{
    TestSettings t;
    s.read("lambda_test", t.lambda_test);
    s.read("lambda_relative", t.lambda_relative);
    s.read("tau", t.tau);
    s.read("smooth", t.smooth);
    s.read("sg_window", t.sg_window);
    s.read("sg_polyorder", t.sg_polyorder);
    if (auto sub = s.child("solver")) {
        read_control(*sub, t.control);
        sub->finish();
    }
    s.finish();
    t.validate();
    return t;
}

} // namespace detail

inline const std::vector<std::string>& known_path_keys()
{
    static const std::vector<std::string> keys = {
        "dataset",     "truth",        "test_dataset", "test_truth",      "bank",          "coefficients",
        "trace",       "grid_dir",     "grid_summary", "report",          "report_csv",    "reconstructions",
        "postures",    "angle_trajectories"};
    return keys;
}

/// Parses a configuration document; `source` anchors relative paths and error messages.
inline RunConfig parse_run_config(const Json& doc, const std::filesystem::path& source)
{
    RunConfig cfg;
    cfg.source = source;
    try {
        detail::Section root(doc, "");
        const auto version = root.optional<int>("schema_version");
        if (!version) {
            throw ConfigError("missing required field \"schema_version\"");
        }
        if (*version != kSchemaVersion) {
            throw ConfigError("unsupported schema_version " + std::to_string(*version));
        }
        cfg.seed = root.optional<std::uint64_t>("seed");
        if (auto threads = root.optional<long long>("threads")) {
            if (*threads < 1) {
                throw ConfigError("threads must be >= 1");
            }
            cfg.threads = static_cast<unsigned>(*threads);
        }
        const std::uint64_t seed = cfg.seed.value_or(0);
        if (auto s = root.child("synthetic")) {
            cfg.synthetic = detail::parse_synthetic(*s, seed);
        }
        if (auto s = root.child("amm")) {
            cfg.amm = detail::parse_amm(*s, seed);
        }
        if (auto s = root.child("grid")) {
            cfg.grid = detail::parse_grid(*s, seed);
        }
        if (auto s = root.child("test")) {
            cfg.test = detail::parse_test(*s);
        }
        if (auto s = root.child("postures")) {
            s->read("fractions", cfg.postures.fractions);
            cfg.postures.initial_angles = s->optional<std::vector<double>>("initial_angles");
            s->finish();
            for (double f : cfg.postures.fractions) {
                if (!(f >= 0.0 && f <= 1.0)) {
                    throw ConfigError("postures.fractions must lie in [0, 1]");
                }
            }
        }
        const auto base = source.has_parent_path() ? source.parent_path() : std::filesystem::path(".");
        if (auto s = root.child("paths")) {
            for (const auto& key : known_path_keys()) {
                if (auto p = s->optional<std::string>(key.c_str())) {
                    const std::filesystem::path path(*p);
                    cfg.paths.entries[key] = (path.is_absolute() ? path : base / path).lexically_normal();
                }
            }
            s->finish();
        }
        root.finish();
    } catch (const ConfigError& e) {
        throw ConfigError(source.string() + ": " + e.what());
    }
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path)
{
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open configuration " + path.string());
    }
    Json doc;
    try {
        doc = Json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
    return parse_run_config(doc, path);
}

} // namespace synergy
