#pragma once

// JSON and CSV result files: trained banks, synthetic ground truth,
// coefficient tables, objective traces, test reports, grid summaries.
//
// Every JSON document carries "schema_version" and "kind". Doubles are
// written in shortest round-trip form (up to 17 significant digits).

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synergy/amm.hpp"
#include "synergy/dataio.hpp"
#include "synergy/model_selection.hpp"
#include "synergy/recon_test.hpp"

namespace synergy {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

namespace detail {

inline Json vector_json(const Vector& v)
{
    Json out = Json::array();
    for (Index k = 0; k < v.size(); ++k) {
        out.push_back(v[k]);
    }
    return out;
}

inline Json optional_json(const std::optional<double>& v)
{
    return v ? Json(*v) : Json(nullptr);
}

inline void write_json(const std::filesystem::path& path, const Json& doc)
{
    auto os = open_for_write(path);
    os << doc.dump(2) << '\n';
    if (!os) {
        throw IoError("failed writing " + path.string());
    }
}

inline Json read_json(const std::filesystem::path& path)
{
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open " + path.string());
    }
    try {
        return Json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

template <typename T>
T field(const Json& doc, const char* key, const std::string& where)
{
    if (!doc.contains(key)) {
        throw ParseError(where + ": missing field \"" + key + "\"");
    }
    try {
        return doc.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(where + ": field \"" + key + "\": " + e.what());
    }
}

inline void check_schema(const Json& doc, const char* kind, const std::string& where)
{
    const int version = field<int>(doc, "schema_version", where);
    if (version != kSchemaVersion) {
        throw ParseError(where + ": unsupported schema_version " + std::to_string(version));
    }
    const auto actual = field<std::string>(doc, "kind", where);
    if (actual != kind) {
        throw ParseError(where + ": expected kind \"" + std::string(kind) + "\", found \"" + actual + "\"");
    }
}

inline Json bank_fields(const SynergyBank& bank)
{
    Json templates = Json::array();
    for (const auto& s : bank.templates) {
        templates.push_back(vector_json(s));
    }
    Json active = Json::array();
    for (bool a : bank.active) {
        active.push_back(a);
    }
    return Json{{"n", bank.n}, {"T_s", bank.T_s}, {"layout", "joint-major"}, {"templates", templates},
                {"active", active}};
}

inline SynergyBank parse_bank(const Json& doc, const std::string& where)
{
    SynergyBank bank;
    bank.n = field<Index>(doc, "n", where);
    bank.T_s = field<Index>(doc, "T_s", where);
    const auto templates = field<std::vector<std::vector<double>>>(doc, "templates", where);
    for (const auto& t : templates) {
        bank.templates.push_back(Eigen::Map<const Vector>(t.data(), static_cast<Index>(t.size())));
    }
    if (doc.contains("active")) {
        bank.active = field<std::vector<bool>>(doc, "active", where);
    } else {
        bank.active.assign(bank.templates.size(), true);
    }
    try {
        bank.validate();
    } catch (const Error& e) {
        throw ParseError(where + ": " + e.what());
    }
    return bank;
}

} // namespace detail

// ---------------------------------------------------------------------------
// trained bank
// ---------------------------------------------------------------------------

struct BankFile
{
    SynergyBank bank;
    Index T = 0; // training window
    double sample_rate = 1.0;
};

inline void save_bank_json(const std::filesystem::path& path, const BankFile& file)
{
    file.bank.validate();
    Json doc{{"schema_version", kSchemaVersion}, {"kind", "synergy_bank"}};
    doc.update(detail::bank_fields(file.bank));
    doc["T"] = file.T;
    doc["sample_rate"] = file.sample_rate;
    doc["m_final"] = file.bank.active_count();
    detail::write_json(path, doc);
}

/// Accepts a trained bank or a synthetic ground-truth file.
inline BankFile load_bank_json(const std::filesystem::path& path)
{
    const Json doc = detail::read_json(path);
    const std::string where = path.string();
    const auto kind = detail::field<std::string>(doc, "kind", where);
    detail::check_schema(doc, kind == "synthetic_truth" ? "synthetic_truth" : "synergy_bank", where);
    BankFile out;
    out.bank = detail::parse_bank(doc, where);
    out.T = detail::field<Index>(doc, "T", where);
    out.sample_rate = detail::field<double>(doc, "sample_rate", where);
    return out;
}

// ---------------------------------------------------------------------------
// synthetic ground truth
// ---------------------------------------------------------------------------

inline void save_truth_json(const std::filesystem::path& path, const SyntheticData& synth, const SyntheticSpec& spec)
{
    Json doc{{"schema_version", kSchemaVersion}, {"kind", "synthetic_truth"}};
    doc.update(detail::bank_fields(synth.truth));
    doc["T"] = synth.data.T;
    doc["G"] = synth.data.size();
    doc["sample_rate"] = synth.data.sample_rate;
    doc["seed"] = spec.seed;
    doc["snr_db"] = detail::optional_json(spec.snr_db);
    doc["noise_sigma"] = synth.noise_sigma;
    Json tasks = Json::array();
    for (std::size_t g = 0; g < synth.activations.size(); ++g) {
        Json acts = Json::array();
        for (const auto& a : synth.activations[g]) {
            acts.push_back({{"synergy", a.synergy + 1}, {"shift", a.shift}, {"amplitude", a.amplitude}});
        }
        tasks.push_back({{"task_id", g + 1}, {"activations", acts}});
    }
    doc["tasks"] = tasks;
    detail::write_json(path, doc);
}

struct TruthFile
{
    BankFile bank;
    std::vector<std::vector<Activation>> activations; // shift_index left at 0
    double noise_sigma = 0.0;
};

inline TruthFile load_truth_json(const std::filesystem::path& path)
{
    const Json doc = detail::read_json(path);
    const std::string where = path.string();
    detail::check_schema(doc, "synthetic_truth", where);
    TruthFile out;
    out.bank = load_bank_json(path);
    out.noise_sigma = detail::field<double>(doc, "noise_sigma", where);
    for (const auto& task : detail::field<Json>(doc, "tasks", where)) {
        std::vector<Activation> acts;
        for (const auto& a : detail::field<Json>(task, "activations", where)) {
            Activation act;
            act.synergy = detail::field<Index>(a, "synergy", where) - 1;
            act.shift = detail::field<Index>(a, "shift", where);
            act.amplitude = detail::field<double>(a, "amplitude", where);
            acts.push_back(act);
        }
        out.activations.push_back(std::move(acts));
    }
    return out;
}

// ---------------------------------------------------------------------------
// training outputs
// ---------------------------------------------------------------------------

/// task,synergy,shift,value with 1-based task/synergy, shift in samples; zeros omitted.
/// `task_ids` maps coefficient rows to 0-based dataset tasks (identity when empty).
inline void save_coefficients_csv(const std::filesystem::path& path, const CoefficientSet& coeffs,
                                  const ShiftPlan& plan, const std::vector<std::size_t>& task_ids = {})
{
    if (!task_ids.empty() && task_ids.size() != coeffs.tasks()) {
        throw DimensionError("task id map does not cover every coefficient row");
    }
    auto os = detail::open_for_write(path);
    os << "task,synergy,shift,value\n";
    for (std::size_t g = 0; g < coeffs.tasks(); ++g) {
        for (std::size_t j = 0; j < coeffs.synergies(); ++j) {
            const Vector& c = coeffs.values[g][j];
            const auto& shifts = plan.shifts(static_cast<Index>(j));
            for (Index k = 0; k < c.size(); ++k) {
                if (c[k] != 0.0) {
                    os << (task_ids.empty() ? g : task_ids[g]) + 1 << ',' << j + 1 << ',' << shifts[static_cast<std::size_t>(k)] << ','
                       << detail::format_double(c[k]) << '\n';
                }
            }
        }
    }
    if (!os) {
        throw IoError("failed writing " + path.string());
    }
}

inline void save_trace_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& history)
{
    auto os = detail::open_for_write(path);
    os << "iter,objective,active_count\n";
    for (const auto& rec : history) {
        os << rec.iteration << ',' << detail::format_double(rec.objective) << ',' << rec.active_count << '\n';
    }
    if (!os) {
        throw IoError("failed writing " + path.string());
    }
}

inline Json grid_point_json(const GridPoint& p, std::size_t index)
{
    return Json{{"index", index},
                {"lambda1", p.penalty.lambda1},
                {"lambda2", p.penalty.lambda2},
                {"alpha", p.alpha},
                {"m_final", p.m_final},
                {"objective", p.objective},
                {"iterations", p.iterations},
                {"converged", p.converged},
                {"validation_error", p.validation_error}};
}

inline void save_grid_summary_json(const std::filesystem::path& path, const GridResult& result,
                                   const std::vector<std::string>& bank_files)
{
    Json points = Json::array();
    for (std::size_t p = 0; p < result.points.size(); ++p) {
        Json entry = grid_point_json(result.points[p], p);
        if (p < bank_files.size()) {
            entry["bank"] = bank_files[p];
        }
        points.push_back(entry);
    }
    Json train = Json::array();
    for (auto g : result.train_tasks) {
        train.push_back(g + 1);
    }
    Json validation = Json::array();
    for (auto g : result.validation_tasks) {
        validation.push_back(g + 1);
    }
    Json doc{{"schema_version", kSchemaVersion},
             {"kind", "grid_summary"},
             {"train_tasks", train},
             {"validation_tasks", validation},
             {"points", points},
             {"selected", result.selected},
             {"refit", result.refit.has_value()}};
    detail::write_json(path, doc);
}

// ---------------------------------------------------------------------------
// test report
// ---------------------------------------------------------------------------

inline Json report_json(const SuiteReport& report)
{
    Json tasks = Json::array();
    for (const auto& rec : report.tasks) {
        tasks.push_back({{"task_id", rec.task_id},
                         {"error", rec.error},
                         {"nnz_coeffs", rec.nnz_coeffs},
                         {"lambda_test", rec.lambda_test}});
    }
    return Json{{"schema_version", kSchemaVersion},
                {"kind", "test_report"},
                {"tasks", tasks},
                {"summary",
                 {{"task_count", report.tasks.size()},
                  {"mean", detail::optional_json(report.mean)},
                  {"std", detail::optional_json(report.std)},
                  {"columns_total", report.columns_total},
                  {"columns_kept", report.columns_kept},
                  {"m_active", report.m_active}}}};
}

inline void save_report_json(const std::filesystem::path& path, const SuiteReport& report)
{
    detail::write_json(path, report_json(report));
}

/// Per-task rows followed by `mean` and `std` rows (empty value when undefined).
inline void save_report_csv(const std::filesystem::path& path, const SuiteReport& report)
{
    auto os = detail::open_for_write(path);
    os << "task_id,error,nnz_coeffs,lambda_test\n";
    for (const auto& rec : report.tasks) {
        os << rec.task_id << ',' << detail::format_double(rec.error) << ',' << rec.nnz_coeffs << ','
           << detail::format_double(rec.lambda_test) << '\n';
    }
    const auto opt = [](const std::optional<double>& v) { return v ? detail::format_double(*v) : std::string(); };
    os << "mean," << opt(report.mean) << ",,\n";
    os << "std," << opt(report.std) << ",,\n";
    if (!os) {
        throw IoError("failed writing " + path.string());
    }
}

} // namespace synergy
