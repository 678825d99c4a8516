#include "qaction/amplitudes.hpp"
#include "qaction/fit.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace qaction;

namespace
{

const ActionSpec1D quartic{1.0, {0.0, 1.0, 0.01, 0.0}};

double mehler(double a, double b, double T)
{
    const double s = std::sinh(T);
    return std::sqrt(1.0 / (2.0 * std::numbers::pi * s)) * std::exp(-((a * a + b * b) * std::cosh(T) - 2.0 * a * b) / (2.0 * s));
}

AmplitudeTable< 1 > mehler_table(double T)
{
    AmplitudeTable< 1 > t;
    for (const auto& [a, b] : unique_pairs< 1 >(default_boundary_set< 1 >()))
        t.records.push_back({a, b, T, mehler(a[0], b[0], T)});
    return t;
}

const OracleSolution< Potential1D >& quartic_oracle()
{
    static const auto oracle = solve_oracle(quartic, default_grid< 1 >());
    return oracle;
}

} // namespace

TEST(Fit, HarmonicKernelIsReproducedExactly)
{
    const double             T = 2.0;
    FitProblem< Potential1D > p;
    p.table         = mehler_table(T);
    p.initial_guess = {0.9, {0.1, 0.6, 0.0, 0.0}};
    const auto f    = fit_quantum_action(p);
    EXPECT_NEAR(f.action.mass, 1.0, 1e-4);
    EXPECT_NEAR(f.action.potential.v2, 0.5, 1e-4);
    EXPECT_NEAR(f.action.potential.v4, 0.0, 1e-5);
    EXPECT_NEAR(f.action.potential.v6, 0.0, 1e-6);
    EXPECT_NEAR(f.action.potential.v0, 0.5 * std::log(2.0 * std::numbers::pi * std::sinh(T)) / T, 1e-4);
    EXPECT_LT(f.residual, 1e-5);
    EXPECT_LT(f.condition_number, 1e8);
    EXPECT_EQ(f.n_records, p.table.records.size());
}

TEST(Fit, FixedParametersStayAtGuess)
{
    FitProblem< Potential1D > p;
    p.table         = mehler_table(1.0);
    p.initial_guess = {1.0, {0.0, 0.4, 0.0, 0.0}};
    p.free          = {false, true, true, false, false};
    const auto f    = fit_quantum_action(p);
    EXPECT_EQ(f.action.mass, 1.0);
    EXPECT_EQ(f.action.potential.v4, 0.0);
    EXPECT_EQ(f.stderr_[0], 0.0);
    EXPECT_NEAR(f.action.potential.v2, 0.5, 1e-4);
}

TEST(Fit, QuarticAtModerateTemperatureCloses)
{
    const double             T = 4.5;
    FitProblem< Potential1D > p;
    p.table         = sample_amplitudes(quartic_oracle(), default_boundary_set< 1 >(), {T});
    p.initial_guess = quartic;
    const auto f    = fit_quantum_action(p);
    const auto g    = model_amplitudes(f, p.table);
    double     worst = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k)
        worst = std::max(worst, std::abs(std::log(g[k] / p.table.records[k].G)));
    EXPECT_LT(worst, 1e-3);
    EXPECT_LT(f.gradient_norm, 1e-6);
    EXPECT_LT(f.condition_number, 1e8);
    // the quantum potential is softer than the classical one at this T
    EXPECT_LT(f.action.mass, 1.0);
    EXPECT_GT(f.action.potential.v0, 0.0);
}

TEST(Fit, HighTemperatureApproachesClassicalAction)
{
    FitProblem< Potential1D > p;
    p.table         = sample_amplitudes(quartic_oracle(), default_boundary_set< 1 >(), {0.25});
    p.initial_guess = quartic;
    const auto f    = fit_quantum_action(p);
    EXPECT_NEAR(f.action.mass, 1.0, 0.02);
    EXPECT_NEAR(f.action.potential.v2, 1.0, 0.02);
    EXPECT_NEAR(f.action.potential.v4, 0.01, 0.02 * 0.01);
}

TEST(Fit, HighTemperatureApproachesClassicalAction2D)
{
    const ActionSpec2D        pe{1.0, {0.0, 0.5, 0.05, 0.0}};
    FitProblem< Potential2D > p;
    p.table         = sample_amplitudes(solve_oracle(pe, default_grid< 2 >()), default_boundary_set< 2 >(), {0.25});
    p.initial_guess = pe;
    const auto f    = fit_quantum_action(p);
    EXPECT_NEAR(f.action.mass, 1.0, 0.02);
    EXPECT_NEAR(f.action.potential.v2, 0.5, 0.02 * 0.5);
    EXPECT_NEAR(f.action.potential.v22, 0.05, 0.02 * 0.05);
    EXPECT_NEAR(f.action.potential.v4, 0.0, 1e-3);
}

TEST(Fit, JsonRoundTrip)
{
    FitProblem< Potential1D > p;
    p.table         = mehler_table(1.0);
    p.initial_guess = {1.0, {0.0, 0.5, 0.0, 0.0}};
    const auto f    = fit_quantum_action(p);
    const auto j    = nlohmann::json::parse(to_json(f).dump());
    EXPECT_EQ(j.at("dimension"), 1);
    EXPECT_EQ(action_from_json< Potential1D >(j).parameters(), f.action.parameters());
}

TEST(Sweep, FailuresAreRecordedAndTheSweepContinues)
{
    const auto s = sweep_temperatures(quartic_oracle(), default_boundary_set< 1 >(), {3.0, 2000.0}, quartic);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_TRUE(s[0].fit.has_value());
    EXPECT_FALSE(s[1].fit.has_value());
    EXPECT_EQ(s[1].error_code, "nonpositive_amplitude");
    EXPECT_THROW(sweep_temperatures(quartic_oracle(), default_boundary_set< 1 >(), {3.0, 2.0}, quartic), InvalidArgument);
}

TEST(Extrapolation, RecoversSyntheticCoefficients)
{
    std::vector< std::pair< double, double > > pts;
    for (const double T : {3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0})
        pts.push_back({T, 2.0 + 3.0 / T - 1.0 / (T * T)});
    const auto e = extrapolate_v0(pts, 4.0, 8.0);
    EXPECT_EQ(e.n_points, 5u);
    EXPECT_NEAR(e.A, 2.0, 1e-10);
    EXPECT_NEAR(e.B, 3.0, 1e-9);
    EXPECT_NEAR(e.C, -1.0, 1e-8);
    EXPECT_LT(e.residual, 1e-12);
    EXPECT_THROW(extrapolate_v0(pts, 4.0, 6.0), InvalidArgument);
}
