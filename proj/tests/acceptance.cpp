// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "solver_oracles.hpp"
#include "synergy/cli.hpp"

using namespace synergy;
namespace fs = std::filesystem;

namespace {

struct Outcome
{
    bool pass = false;
    std::string detail;
};

std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

fs::path source_dir()
{
    return fs::path(SYNERGY_SOURCE_DIR);
}

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("synergy_acceptance_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

/// A shipped configuration with every output redirected into `dir`.
fs::path relocated_config(const fs::path& config, const fs::path& dir, std::optional<std::uint64_t> seed = {})
{
    std::ifstream is(config);
    Json doc = Json::parse(is);
    for (auto& item : doc["paths"].items()) {
        item.value() = (dir / fs::path(item.value().get<std::string>()).filename()).string();
    }
    if (seed) {
        doc["seed"] = *seed;
    }
    const auto out = dir / config.filename();
    std::ofstream(out) << doc.dump(2);
    return out;
}

int run_cli(const std::string& command, const fs::path& config, std::string& log)
{
    std::ostringstream out, err;
    CliOptions opts;
    opts.config = config;
    opts.threads = 1;
    const int code = run_command(command, opts, out, err);
    log += out.str() + err.str();
    return code;
}

/// Pearson correlation computed directly from the definition.
double pearson(const Vector& a, const Vector& b)
{
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (Index i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (Index i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

SynergyBank random_bank(std::mt19937_64& rng, Index n, Index T_s, Index m)
{
    SynergyBank bank;
    bank.n = n;
    bank.T_s = T_s;
    for (Index j = 0; j < m; ++j) {
        bank.templates.push_back(oracle::random_vector(rng, n * T_s));
    }
    bank.active.assign(static_cast<std::size_t>(m), true);
    return bank;
}

// ---------------------------------------------------------------------------

Outcome operator_correctness()
{
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<Index> pick_n(1, 3), pick_T(1, 20), pick_m(1, 3), pick_stride(1, 3);
    double worst_fwd = 0.0, worst_adj = 0.0;
    const int instances = 200;
    for (int trial = 0; trial < instances; ++trial) {
        const Index n = pick_n(rng);
        const Index T = pick_T(rng);
        const Index T_s = std::uniform_int_distribution<Index>(1, std::min<Index>(8, T))(rng);
        const Index m = pick_m(rng);
        const ShiftPlan plan = ShiftPlan::uniform(T, T_s, trial % 2 == 0 ? 1 : pick_stride(rng));
        const auto& shifts = plan.shifts(0);
        const SynergyBank bank = random_bank(rng, n, T_s, m);
        std::vector<Vector> coeffs;
        for (Index j = 0; j < m; ++j) {
            coeffs.push_back(oracle::random_vector(rng, static_cast<Index>(shifts.size())));
        }
        const Vector fast = reconstruct_task(bank, coeffs, plan);
        const Vector slow = oracle::brute_force_mixture(bank.templates, coeffs, n, T, T_s, shifts);
        worst_fwd = std::max(worst_fwd, (fast - slow).cwiseAbs().maxCoeff());

        const Vector r = oracle::random_vector(rng, n * T);
        for (Index j = 0; j < m; ++j) {
            const Vector& s = bank.templates[static_cast<std::size_t>(j)];
            const Vector& c = coeffs[static_cast<std::size_t>(j)];
            // <D(s) c, r> = <c, D(s)^T r> and <B(c) s, r> = <s, B(c)^T r>
            worst_adj = std::max(worst_adj, std::abs(dictionary_apply(s, c, plan).dot(r) -
                                                     c.dot(dictionary_adjoint_apply(s, r, plan))));
            worst_adj = std::max(worst_adj, std::abs(coefficient_operator_apply(c, s, plan).dot(r) -
                                                     s.dot(coefficient_operator_adjoint_apply(c, r, n, plan))));
        }
    }
    return {worst_fwd <= 1e-10 && worst_adj <= 1e-10,
            std::to_string(instances) + " instances, forward max err " + fmt(worst_fwd) + ", adjoint max err " +
                fmt(worst_adj)};
}

Outcome toy_example()
{
    const Index T = 6, T_s = 3;
    const ShiftPlan plan = ShiftPlan::uniform(T, T_s);
    const double s1 = 0.7, s2 = -1.3, s3 = 2.9;
    Vector s(3);
    s << s1, s2, s3;

    Matrix toeplitz(6, 4);
    toeplitz << s1, 0, 0, 0,
                s2, s1, 0, 0,
                s3, s2, s1, 0,
                0, s3, s2, s1,
                0, 0, s3, s2,
                0, 0, 0, s3;
    Matrix D4 = Matrix::Zero(6, 3);
    D4.bottomRows(3) = Matrix::Identity(3, 3);

    bool ok = plan.count(0) == 4;
    for (Index k = 0; k < 4; ++k) {
        ok = ok && dictionary_apply(s, Vector::Unit(4, k), plan) == Vector(toeplitz.col(k));
    }
    for (Index i = 0; i < 3; ++i) {
        ok = ok && apply_shift(Vector::Unit(3, i), 3, 1, T, T_s) == Vector(D4.col(i));
    }
    Vector shifted(6);
    shifted << 0, 0, 0, s1, s2, s3;
    ok = ok && apply_shift(s, 3, 1, T, T_s) == shifted;

    Vector c(4);
    c << 0.5, -2.0, 1.25, 3.0;
    ok = ok && (dictionary_apply(s, c, plan) - toeplitz * c).cwiseAbs().maxCoeff() <= 1e-15;
    return {ok, "6x4 Toeplitz columns and D_j4 = [0; I] reproduced exactly"};
}

Outcome solver_oracles()
{
    std::mt19937_64 rng(303);
    SolverControl tight;
    tight.max_iters = 200000;
    tight.rel_tol = 1e-15;
    SolverControl ridge_control;
    ridge_control.rel_tol = 1e-13;
    ridge_control.max_iters = 1000;

    double sgl_gap = 0.0, kkt = 0.0, lasso_gap = 0.0, ridge_err = 0.0;
    const int instances = 24;
    for (int trial = 0; trial < instances; ++trial) {
        const Index groups = std::uniform_int_distribution<Index>(1, 4)(rng);
        std::vector<Index> sizes;
        for (Index g = 0; g < groups; ++g) {
            sizes.push_back(std::uniform_int_distribution<Index>(1, 6)(rng));
        }
        const Index p = std::accumulate(sizes.begin(), sizes.end(), Index{0});
        const Index rows = p + std::uniform_int_distribution<Index>(2, 30 - p)(rng);
        const Matrix A = oracle::random_matrix(rng, rows, p);
        const Vector b = oracle::random_vector(rng, rows);
        const double l1 = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
        const double l2 = std::uniform_real_distribution<double>(0.0, 0.5)(rng);
        const auto partition = GroupPartition::from_sizes(sizes);

        const auto sgl = sparse_group_lasso_solve(dense_operator(A), partition, b, {l1, l2}, tight);
        const double ref = oracle::sgl_value(A, b, sizes, l1, l2, oracle::sgl_admm(A, b, sizes, l1, l2));
        sgl_gap = std::max(sgl_gap, std::abs(sgl.objective - ref));
        kkt = std::max(kkt, check_sgl_optimality(sgl.coeffs, dense_operator(A), partition, b, {l1, l2}));

        const double lambda = std::uniform_real_distribution<double>(0.05, 1.5)(rng);
        const auto lasso = lasso_solve(dense_operator(A), b, lambda, tight);
        const Vector cd = oracle::lasso_coordinate_descent(A, b, lambda);
        const double cd_value = 0.5 * (b - A * cd).squaredNorm() + lambda * cd.lpNorm<1>();
        lasso_gap = std::max(lasso_gap, std::abs(lasso.objective - cd_value));
        kkt = std::max(kkt, check_sgl_optimality(lasso.coeffs, dense_operator(A), GroupPartition::singletons(p), b,
                                                 {0.0, lambda}));

        const double alpha = std::uniform_real_distribution<double>(0.01, 2.0)(rng);
        const Vector dense = (A.transpose() * A + alpha * Matrix::Identity(p, p)).ldlt().solve(A.transpose() * b);
        ridge_err = std::max(
            ridge_err, (ridge_solve(dense_operator(A), b, alpha, ridge_control).solution - dense).cwiseAbs().maxCoeff());
    }
    return {sgl_gap <= 1e-6 && lasso_gap <= 1e-6 && kkt <= 1e-5 && ridge_err <= 1e-8,
            std::to_string(instances) + " instances, SGL gap " + fmt(sgl_gap) + ", LASSO gap " + fmt(lasso_gap) +
                ", KKT " + fmt(kkt) + ", ridge err " + fmt(ridge_err)};
}

Outcome amm_descent()
{
    SyntheticSpec spec;
    spec.seed = 4;
    const ShiftPlan plan = ShiftPlan::uniform(30, 10);
    const SyntheticData synth = generate_synthetic(spec, 4, 30, 10, 20, plan);

    AmmConfig config;
    config.m_int = 6;
    config.T_s = 10;
    config.penalty = {0.3, 0.01};
    config.alpha = 0.01;
    config.seed = 4;
    const double eps_sub = config.sub_control.rel_tol;

    const auto fit_term = [&](const AmmState& st) {
        double fit = 0.0;
        for (std::size_t g = 0; g < synth.data.size(); ++g) {
            fit += 0.5 * (synth.data.tasks[g] - reconstruct_task(st.bank, st.coeffs.values[g], plan)).squaredNorm();
        }
        return fit;
    };

    AmmState state = initialize(config, synth.data, plan);
    double worst_rise = -INFINITY; // largest increase relative to the allowed slack
    double worst_fit_change = 0.0;
    const int iterations = 25;
    for (int it = 1; it <= iterations; ++it) {
        const double before = objective(state, synth.data, plan, config);
        state.coeffs = c_step(state, synth.data, plan, config);
        const double after_c = objective(state, synth.data, plan, config);
        state.bank = s_step(state, synth.data, plan, config);
        const double after_s = objective(state, synth.data, plan, config);
        worst_rise = std::max(worst_rise, (after_c - before) / (10.0 * eps_sub * std::abs(before)));
        worst_rise = std::max(worst_rise, (after_s - after_c) / (10.0 * eps_sub * std::abs(after_c)));

        const double fit_before = fit_term(state);
        state = normalize_rescale(std::move(state));
        worst_fit_change = std::max(worst_fit_change, std::abs(fit_term(state) - fit_before));
        state = prune_inactive(std::move(state), config.prune_eps, config.prune_patience);
    }
    return {worst_rise <= 1.0 && worst_fit_change <= 1e-10,
            std::to_string(iterations) + " outer iterations, worst step rise / (10 eps_sub |F|) = " +
                fmt(worst_rise) + ", max fit change under normalization " + fmt(worst_fit_change)};
}

Outcome synthetic_recovery()
{
    bool ok = true;
    std::string detail;
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto dir = scratch("recovery_" + std::to_string(seed));
        const auto cfg = relocated_config(source_dir() / "configs/grid.json", dir, seed);
        std::string log;
        const bool ran = run_cli("synth", cfg, log) == 0 && run_cli("train", cfg, log) == 0 &&
                         run_cli("test", cfg, log) == 0;
        if (!ran) {
            return {false, "seed " + std::to_string(seed) + ": pipeline failed: " + log};
        }
        const std::size_t m_final = load_bank_json(dir / "bank.json").bank.active_count();
        std::ifstream is(dir / "report.json");
        const Json report = Json::parse(is);
        const double mean = report["summary"]["mean"].get<double>();
        const std::size_t held_out = report["tasks"].size();
        ok = ok && m_final <= 4 && mean <= 0.1 && held_out == 10;
        detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + ": m_final " +
                  std::to_string(m_final) + ", held-out mean error " + fmt(mean) + " over " +
                  std::to_string(held_out) + " tasks";
        fs::remove_all(dir);
    }
    return {ok, detail};
}

Outcome full_scale_pipeline()
{
    const auto dir = scratch("full_scale");
    const auto cfg = relocated_config(source_dir() / "configs/full_scale.json", dir);
    std::string log;
    const auto start = std::chrono::steady_clock::now();
    const bool ran = run_cli("synth", cfg, log) == 0 && run_cli("train", cfg, log) == 0 &&
                     run_cli("test", cfg, log) == 0;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!ran) {
        return {false, "pipeline failed: " + log};
    }
    const VelocityDataset train = load_velocity_csv(dir / "train.csv");
    const VelocityDataset test = load_velocity_csv(dir / "test.csv");
    std::ifstream is(dir / "report.json");
    const Json report = Json::parse(is);
    const bool shapes = train.n == 10 && train.T == 82 && train.size() == 100 && test.T == 86 && test.size() == 36 &&
                        report["tasks"].size() == 36;

    std::ifstream readme_stream(source_dir() / "README.md");
    std::stringstream readme;
    readme << readme_stream.rdbuf();
    const std::string text = readme.str();
    const bool documented = text.find("0.2783") != std::string::npos && text.find("0.02153") != std::string::npos &&
                            text.find("m_final = 7") != std::string::npos;
    fs::remove_all(dir);
    return {ran && shapes && documented && secs < 1800.0,
            "n=10 T=82 G=100 train, 36 gestures T=86 test, end-to-end " + fmt(secs) + " s, held-out mean error " +
                fmt(report["summary"]["mean"].get<double>()) +
                (documented ? ", README states published numbers need the original data"
                            : ", README statement missing")};
}

Outcome ablation()
{
    const auto cfg = load_run_config(source_dir() / "configs/grid.json");
    const SyntheticSection& syn = *cfg.synthetic;
    const ShiftPlan plan = ShiftPlan::uniform(syn.T, syn.T_s);
    const SyntheticData synth = generate_synthetic(syn.spec, syn.n, syn.T, syn.T_s, syn.G, plan);
    const SyntheticData held = generate_from_truth(synth.truth, syn.spec, syn.T, syn.test_G, plan,
                                                   detail::test_seed(*cfg.seed));

    struct Arm
    {
        bool converged = false;
        Index iterations = 0;
        std::size_t m_final = 0;
        Index nnz = 0;
    };
    const auto arm = [&](double lambda2) {
        AmmConfig config = *cfg.amm;
        config.penalty = {0.45, lambda2};
        config.alpha = 0.01;
        const AmmState trained = run(config, synth.data, plan);
        AmmState probe;
        probe.bank = trained.bank;
        probe.coeffs = CoefficientSet::zeros(held.data.size(), trained.bank.size(), plan);
        const CoefficientSet coeffs = c_step(probe, held.data, plan, config);
        Arm out{trained.converged, trained.iteration, trained.bank.active_count(), 0};
        for (const auto& row : coeffs.values) {
            for (const auto& c : row) {
                if (c.norm() > 0.0) {
                    out.nnz += (c.array() != 0.0).count();
                }
            }
        }
        return out;
    };
    const Arm group = arm(0.0);
    const Arm sparse = arm(0.1);
    const double reduction = group.nnz > 0 ? 1.0 - static_cast<double>(sparse.nnz) / static_cast<double>(group.nnz)
                                           : 0.0;
    return {group.converged && sparse.converged && reduction >= 0.2,
            "lambda2 = 0: converged " + std::to_string(group.converged) + " in " + std::to_string(group.iterations) +
                " its, m " + std::to_string(group.m_final) + ", nnz " + std::to_string(group.nnz) +
                "; lambda2 = 0.1: converged " + std::to_string(sparse.converged) + " in " +
                std::to_string(sparse.iterations) + " its, m " + std::to_string(sparse.m_final) + ", nnz " +
                std::to_string(sparse.nnz) + "; reduction " + fmt(100.0 * reduction) + "%"};
}

Outcome testing_phase()
{
    std::mt19937_64 rng(808);
    bool null_ok = true;
    Index null_cases = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const Index n = 1 + trial % 3;
        const Index T_s = 4 + trial % 5;
        const Index T = T_s + 6 + trial % 7;
        const SynergyBank bank = random_bank(rng, n, T_s, 1 + trial % 3);
        const SynergyBankMatrix bm = build_bank(bank, T);
        const Vector v = oracle::random_vector(rng, n * T);
        const double threshold = lasso_null_threshold(bm, v);
        for (double factor : {1.0 + 1e-9, 1.01, 2.0}) {
            const auto r = reconstruct_gesture(bm, v, factor * threshold);
            null_ok = null_ok && r.coeffs.cwiseAbs().maxCoeff() == 0.0 && r.error == 1.0;
            ++null_cases;
        }
        VelocityDataset suite{n, T, 1.0, {v, oracle::random_vector(rng, n * T)}};
        TestSettings settings;
        settings.lambda_test = 1.5; // relative: above each gesture's own threshold
        settings.smooth = T >= settings.sg_window;
        for (const auto& rec : evaluate_suite(bank, suite, settings).tasks) {
            null_ok = null_ok && rec.nnz_coeffs == 0 && rec.error == 1.0;
            ++null_cases;
        }
    }

    double worst_corr = 0.0;
    Index pairs = 0;
    for (int trial = 0; trial < 30; ++trial) {
        const Index n = 1 + trial % 3;
        const Index T_s = 3 + trial % 6;
        const Index T = T_s + 2 + trial % 12;
        SynergyBank bank = random_bank(rng, n, T_s, 2 + trial % 4);
        // near-duplicates and smooth templates give strongly correlated columns
        bank.templates.push_back(bank.templates[0] + 0.05 * oracle::random_vector(rng, n * T_s));
        bank.templates.push_back(Vector::Ones(n * T_s));
        bank.active.assign(bank.templates.size(), true);
        const SynergyBankMatrix kept = prune_correlated(build_bank(bank, T), 0.8);
        for (Index a = 0; a < kept.size(); ++a) {
            for (Index b = a + 1; b < kept.size(); ++b) {
                worst_corr = std::max(worst_corr, std::abs(pearson(kept.columns.col(a), kept.columns.col(b))));
                ++pairs;
            }
        }
    }
    // exact ties (e.g. overlapping constant templates give |corr| = 4/5) round either way in the last bits
    return {null_ok && worst_corr <= 0.8 + 1e-12,
            std::to_string(null_cases) + " gestures above the null threshold all-zero with error 1; max |corr| " +
                fmt(worst_corr) + " over " + std::to_string(pairs) + " kept pairs"};
}

} // namespace

int main()
{
    struct Criterion
    {
        int id;
        const char* name;
        double limit_secs;
        std::function<Outcome()> body;
    };
    const std::vector<Criterion> criteria = {
        {1, "operator correctness", 10.0, operator_correctness},
        {2, "toy example fidelity", 1.0, toy_example},
        {3, "solver oracles", 30.0, solver_oracles},
        {4, "AMM descent", 120.0, amm_descent},
        {5, "synthetic recovery", 300.0, synthetic_recovery},
        {6, "full-scale pipeline", 1800.0, full_scale_pipeline},
        {7, "group vs sparse group ablation", 300.0, ablation},
        {8, "testing-phase behavior", 10.0, testing_phase},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = c.body();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool pass = outcome.pass && secs < c.limit_secs;
        failures += pass ? 0 : 1;
        std::printf("criterion %d (%s): %s  [%.2f s, limit %.0f s] %s\n", c.id, c.name, pass ? "PASS" : "FAIL", secs,
                    c.limit_secs, outcome.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
