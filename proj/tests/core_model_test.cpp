#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "synergy/core_model.hpp"

using namespace synergy;

namespace {

Vector vec(std::initializer_list<double> values)
{
    Vector v(static_cast<Index>(values.size()));
    Index i = 0;
    for (double x : values) {
        v[i++] = x;
    }
    return v;
}

SynergyBank make_bank(Index n, Index T_s, std::vector<Vector> templates)
{
    SynergyBank bank;
    bank.n = n;
    bank.T_s = T_s;
    bank.active.assign(templates.size(), true);
    bank.templates = std::move(templates);
    return bank;
}

} // namespace

TEST(ShiftPlan, UniformGridCoversFullRange)
{
    const auto plan = ShiftPlan::uniform(82, 39);
    EXPECT_EQ(plan.count(0), 44);
    EXPECT_EQ(plan.shifts(0).front(), 0);
    EXPECT_EQ(plan.shifts(0).back(), 43);
    EXPECT_EQ(ShiftPlan::uniform(10, 3, 3).shifts(0), (std::vector<Index>{0, 3, 6}));
}

TEST(ShiftPlan, RejectsInvalidGrids)
{
    EXPECT_THROW(ShiftPlan(6, 3, {{0, 4}}), RangeError);
    EXPECT_THROW(ShiftPlan(6, 3, {{1, 1}}), ConfigError);
    EXPECT_THROW(ShiftPlan(6, 3, {{}}), ConfigError);
    EXPECT_THROW(ShiftPlan::uniform(3, 4), ConfigError);
}

TEST(ShiftPlan, PerSynergyGrids)
{
    const ShiftPlan plan(8, 3, {{0, 2}, {1, 3, 5}});
    EXPECT_EQ(plan.count(0), 2);
    EXPECT_EQ(plan.count(1), 3);
    EXPECT_THROW(plan.shifts(2), RangeError);
    EXPECT_THROW(plan.check_synergies(3), DimensionError);
}

TEST(ApplyShift, PlacesTemplateAfterLeadingZeros)
{
    const Vector s = vec({1.5, -2.0, 3.25});
    const Vector out = apply_shift(s, 3, 1, 6, 3);
    EXPECT_EQ(out, vec({0, 0, 0, 1.5, -2.0, 3.25}));
    EXPECT_EQ(apply_shift(s, 0, 1, 6, 3), vec({1.5, -2.0, 3.25, 0, 0, 0}));
}

TEST(ApplyShift, MatchesPointwiseDefinitionForTwoJoints)
{
    std::mt19937_64 rng(3);
    const Index n = 2, T = 8, T_s = 3, shift = 2;
    const Vector s = oracle::random_vector(rng, n * T_s);
    const Vector out = apply_shift(s, shift, n, T, T_s);
    for (Index t = 1; t <= T; ++t) {
        for (Index i = 0; i < n; ++i) {
            EXPECT_EQ(out[(t - 1) * n + i], oracle::template_value(s, n, T_s, i, t - shift));
        }
    }
}

TEST(ApplyShift, Errors)
{
    const Vector s = Vector::Ones(3);
    EXPECT_THROW(apply_shift(s, 4, 1, 6, 3), RangeError);
    EXPECT_THROW(apply_shift(s, -1, 1, 6, 3), RangeError);
    EXPECT_THROW(apply_shift(Vector::Ones(4), 0, 1, 6, 3), DimensionError);
}

TEST(DictionaryApply, UnitCoefficientSelectsFourthColumn)
{
    const auto plan = ShiftPlan::uniform(6, 3);
    const Vector s = vec({0.3, 0.7, -1.1});
    Vector e4 = Vector::Zero(4);
    e4[3] = 1.0;
    EXPECT_EQ(dictionary_apply(s, e4, plan), vec({0, 0, 0, 0.3, 0.7, -1.1}));
    EXPECT_EQ(dictionary_apply(s, Vector::Zero(4), plan), Vector::Zero(6));
}

TEST(DictionaryApply, MatchesDenseToeplitz)
{
    std::mt19937_64 rng(11);
    const auto plan = ShiftPlan::uniform(6, 3);
    for (int trial = 0; trial < 20; ++trial) {
        const Vector s = oracle::random_vector(rng, 3);
        const Vector c = oracle::random_vector(rng, 4);
        const Matrix D = oracle::dense_dictionary(s, 1, 6, 3, plan.shifts(0));
        EXPECT_LE((dictionary_apply(s, c, plan) - D * c).cwiseAbs().maxCoeff(), 1e-14);
    }
    EXPECT_THROW(dictionary_apply(vec({1, 2, 3}), Vector::Zero(3), plan), DimensionError);
}

TEST(DictionaryAdjoint, MatchesDenseTranspose)
{
    std::mt19937_64 rng(12);
    const Index n = 3, T = 11, T_s = 4;
    const ShiftPlan plan(T, T_s, {{0, 2, 3, 7}});
    for (int trial = 0; trial < 20; ++trial) {
        const Vector s = oracle::random_vector(rng, n * T_s);
        const Vector r = oracle::random_vector(rng, n * T);
        const Matrix D = oracle::dense_dictionary(s, n, T, T_s, plan.shifts(0));
        EXPECT_LE((dictionary_adjoint_apply(s, r, plan) - D.transpose() * r).cwiseAbs().maxCoeff(), 1e-12);
    }
    EXPECT_EQ(dictionary_adjoint_apply(Vector::Ones(n * T_s), Vector::Zero(n * T), plan), Vector::Zero(4));
    EXPECT_THROW(dictionary_adjoint_apply(Vector::Ones(n * T_s), Vector::Zero(n * T + 1), plan), DimensionError);
}

TEST(DictionaryAdjoint, OrthonormalColumnsWhenTemplateIsOneSample)
{
    const auto plan = ShiftPlan::uniform(5, 1);
    const Vector s = vec({1.0});
    const Vector r = apply_shift(s, 0, 1, 5, 1);
    const Vector out = dictionary_adjoint_apply(s, r, plan);
    EXPECT_DOUBLE_EQ(out[0], 1.0);
    EXPECT_DOUBLE_EQ(out.tail(4).cwiseAbs().sum(), 0.0);
}

TEST(CoefficientOperator, SymmetricWithDictionaryApply)
{
    std::mt19937_64 rng(13);
    const Index n = 2, T = 9, T_s = 4;
    const auto plan = ShiftPlan::uniform(T, T_s);
    for (int trial = 0; trial < 50; ++trial) {
        const Vector c = oracle::random_vector(rng, plan.count(0));
        const Vector x = oracle::random_vector(rng, n * T_s);
        EXPECT_EQ(coefficient_operator_apply(c, x, plan), dictionary_apply(x, c, plan));
    }
    EXPECT_EQ(coefficient_operator_apply(Vector::Ones(plan.count(0)), Vector::Zero(n * T_s), plan),
              Vector::Zero(n * T));
    Vector e1 = Vector::Zero(plan.count(0));
    e1[0] = 1.0;
    const Vector x = oracle::random_vector(rng, n * T_s);
    EXPECT_EQ(coefficient_operator_apply(e1, x, plan), apply_shift(x, 0, n, T, T_s));
}

TEST(CoefficientOperator, AdjointMatchesDenseSumOfShiftMatrices)
{
    std::mt19937_64 rng(14);
    const Index n = 3, T = 10, T_s = 4;
    const auto plan = ShiftPlan::uniform(T, T_s);
    const Vector c = oracle::random_vector(rng, plan.count(0));
    Matrix B = Matrix::Zero(n * T, n * T_s);
    for (Index k = 0; k < plan.count(0); ++k) {
        B += c[k] * oracle::dense_shift_matrix(n, T, T_s, plan.shifts(0)[static_cast<std::size_t>(k)]);
    }
    const Vector r = oracle::random_vector(rng, n * T);
    const Vector x = oracle::random_vector(rng, n * T_s);
    EXPECT_LE((coefficient_operator_apply(c, x, plan) - B * x).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((coefficient_operator_adjoint_apply(c, r, n, plan) - B.transpose() * r).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ReconstructTask, ZeroAndSingleShift)
{
    std::mt19937_64 rng(15);
    const Index n = 2, T = 7, T_s = 3;
    const auto plan = ShiftPlan::uniform(T, T_s);
    const auto bank = make_bank(n, T_s, {oracle::random_vector(rng, n * T_s), oracle::random_vector(rng, n * T_s)});
    std::vector<Vector> coeffs(2, Vector::Zero(plan.count(0)));
    EXPECT_EQ(reconstruct_task(bank, coeffs, plan), Vector::Zero(n * T));
    coeffs[1][2] = 1.0;
    EXPECT_EQ(reconstruct_task(bank, coeffs, plan), apply_shift(bank.templates[1], 2, n, T, T_s));
}

TEST(ReconstructTask, MatchesPointwiseDoubleSum)
{
    std::mt19937_64 rng(16);
    const Index n = 3, T = 15, T_s = 5;
    const auto plan = ShiftPlan::uniform(T, T_s);
    std::vector<Vector> templates;
    std::vector<Vector> coeffs;
    std::bernoulli_distribution keep(0.3);
    for (int j = 0; j < 3; ++j) {
        templates.push_back(oracle::random_vector(rng, n * T_s));
        Vector c = oracle::random_vector(rng, plan.count(0));
        for (Index k = 0; k < c.size(); ++k) {
            if (!keep(rng)) {
                c[k] = 0.0;
            }
        }
        coeffs.push_back(c);
    }
    const auto bank = make_bank(n, T_s, templates);
    const Vector expected = oracle::brute_force_mixture(templates, coeffs, n, T, T_s, plan.shifts(0));
    EXPECT_LE((reconstruct_task(bank, coeffs, plan) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ReconstructTask, SkipsInactiveSynergies)
{
    std::mt19937_64 rng(17);
    const auto plan = ShiftPlan::uniform(6, 2);
    auto bank = make_bank(1, 2, {oracle::random_vector(rng, 2), oracle::random_vector(rng, 2)});
    bank.active[0] = false;
    std::vector<Vector> coeffs{Vector::Ones(5), Vector::Zero(5)};
    EXPECT_EQ(reconstruct_task(bank, coeffs, plan), Vector::Zero(6));
    EXPECT_THROW(reconstruct_task(bank, {Vector::Ones(5)}, plan), DimensionError);
}

// Properties over random instances: convolution equivalence, adjoint identity, linearity.
TEST(CoreModelProperties, RandomInstances)
{
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<Index> pick_n(1, 3), pick_Ts(1, 8), pick_m(1, 3);
    for (int draw = 0; draw < 150; ++draw) {
        const Index n = pick_n(rng);
        const Index T_s = pick_Ts(rng);
        const Index T = std::uniform_int_distribution<Index>(T_s, 20)(rng);
        const Index m = pick_m(rng);
        const auto plan = ShiftPlan::uniform(T, T_s);
        std::vector<Vector> templates, coeffs, coeffs2;
        for (Index j = 0; j < m; ++j) {
            templates.push_back(oracle::random_vector(rng, n * T_s));
            coeffs.push_back(oracle::random_vector(rng, plan.count(0)));
            coeffs2.push_back(oracle::random_vector(rng, plan.count(0)));
        }
        const auto bank = make_bank(n, T_s, templates);
        const Vector v = reconstruct_task(bank, coeffs, plan);
        const Vector expected = oracle::brute_force_mixture(templates, coeffs, n, T, T_s, plan.shifts(0));
        ASSERT_LE((v - expected).cwiseAbs().maxCoeff(), 1e-10);

        const Vector r = oracle::random_vector(rng, n * T);
        const double lhs = dictionary_apply(templates[0], coeffs[0], plan).dot(r);
        const double rhs = coeffs[0].dot(dictionary_adjoint_apply(templates[0], r, plan));
        ASSERT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(lhs)));

        std::vector<Vector> combo(static_cast<std::size_t>(m));
        for (Index j = 0; j < m; ++j) {
            combo[static_cast<std::size_t>(j)] = 2.0 * coeffs[static_cast<std::size_t>(j)] - 0.5 * coeffs2[static_cast<std::size_t>(j)];
        }
        const Vector lin = 2.0 * v - 0.5 * reconstruct_task(bank, coeffs2, plan);
        ASSERT_LE((reconstruct_task(bank, combo, plan) - lin).cwiseAbs().maxCoeff(), 1e-10);

        auto scaled = bank;
        scaled.templates[0] *= -3.0;
        std::vector<Vector> only_first(static_cast<std::size_t>(m), Vector::Zero(plan.count(0)));
        only_first[0] = coeffs[0];
        ASSERT_LE((reconstruct_task(scaled, only_first, plan) + 3.0 * reconstruct_task(bank, only_first, plan))
                      .cwiseAbs()
                      .maxCoeff(),
                  1e-10);
    }
}
