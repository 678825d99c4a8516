#include "qaction/amplitudes.hpp"
#include "qaction/propagation.hpp"
#include "qaction/spectrum.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace qaction;

namespace
{

const ActionSpec1D harmonic_1d{1.0, {0.0, 0.5, 0.0, 0.0}};
const ActionSpec1D quartic_1d{1.0, {0.0, 1.0, 0.01, 0.0}};

/// Euclidean kernel of the unit-frequency oscillator (m = omega = 1).
double mehler(double a, double b, double T)
{
    const double s = std::sinh(T);
    return std::sqrt(1.0 / (2.0 * std::numbers::pi * s)) * std::exp(-((a * a + b * b) * std::cosh(T) - 2.0 * a * b) / (2.0 * s));
}

double code_of(const std::function< void() >& f, std::string& code)
{
    try
    {
        f();
    }
    catch (const Error& e)
    {
        code = e.code();
        return 1.0;
    }
    return 0.0;
}

} // namespace

TEST(Spectrum, HarmonicLevelsAreHalfIntegers)
{
    Grid1D                               grid{8.0, 801};
    std::vector< std::vector< double > > per_level(5);
    for (int l = 0; l < 3; ++l, grid = grid.refined())
    {
        const auto sd = ground_state(harmonic_1d, grid, 5);
        for (std::size_t n = 0; n < 5; ++n)
            per_level[n].push_back(sd.energy(n));
    }
    for (std::size_t n = 0; n < 5; ++n)
        EXPECT_NEAR(richardson(per_level[n]), n + 0.5, 1e-8) << "level " << n;
}

TEST(Spectrum, EigenfunctionsAreOrthonormal)
{
    const auto sd = ground_state(quartic_1d, Grid1D{8.0, 801}, 16);
    EXPECT_LT(sd.orthonormality_residual(), 1e-10);
}

TEST(Spectrum, QuarticGroundEnergy)
{
    // anharmonic shift is positive and small at this coupling
    const double e = converged_ground_energy(quartic_1d, default_grid< 1 >(), 3);
    EXPECT_GT(e, std::sqrt(2.0) / 2.0);
    EXPECT_LT(e, std::sqrt(2.0) / 2.0 + 0.01);
}

TEST(Spectrum, TwoDimensionalHarmonic)
{
    const ActionSpec2D spec{1.0, {0.0, 0.5, 0.0, 0.0}};
    EXPECT_NEAR(converged_ground_energy(spec, Grid2D{7.0, 141}, 2), 1.0, 1e-5);
}

TEST(Spectrum, DecoupledTwoDimensionalIsTwiceOneDimensional)
{
    const ActionSpec1D one{1.0, {0.0, 0.5, 0.01, 0.0}};
    const ActionSpec2D two{1.0, {0.0, 0.5, 0.0, 0.01}};
    const double       e1 = ground_state(one, Grid1D{7.0, 141}, 1).energy(0);
    const double       e2 = ground_state(two, Grid2D{7.0, 141}, 1).energy(0);
    EXPECT_NEAR(e2, 2.0 * e1, 1e-10);
}

TEST(Spectrum, SmallBoxReportsLeakage)
{
    std::string code;
    EXPECT_EQ(code_of([] { ground_state(harmonic_1d, Grid1D{2.0, 101}, 1); }, code), 1.0);
    EXPECT_EQ(code, "boundary_leakage");
    EXPECT_THROW(ground_state(harmonic_1d, Grid1D{8.0, 40}, 1), InvalidArgument);
}

TEST(Oracle, HarmonicMatchesMehlerKernel)
{
    const auto oracle = solve_oracle(harmonic_1d, default_grid< 1 >());
    EXPECT_NEAR(oracle.ground_energy, 0.5, 1e-9);
    for (const double T : {0.5, 1.0, 4.0})
        for (const auto& [a, b] : {std::pair{0.0, 0.0}, std::pair{0.3, -0.6}, std::pair{1.5, 1.2}})
        {
            const double exact = mehler(a, b, T);
            EXPECT_NEAR(oracle.amplitude({a}, {b}, TimeExtent{T}) / exact, 1.0, 1e-7) << "T=" << T << " a=" << a << " b=" << b;
        }
}

TEST(Oracle, SpectralAgreesWithPropagation1D)
{
    const auto sd = ground_state(quartic_1d, default_grid< 1 >(), 64);
    for (const double T : {0.5, 2.0})
        EXPECT_LT(cross_check_amplitudes(quartic_1d, sd, default_boundary_set< 1 >(), TimeExtent{T}), 1e-5) << "T=" << T;
}

TEST(Oracle, SpectralAgreesWithPropagation2D)
{
    const ActionSpec2D spec{1.0, {0.0, 0.5, 0.05, 0.0}};
    const auto         sd = ground_state(spec, Grid2D{7.0, 141}, 0);
    EXPECT_LT(cross_check_amplitudes(spec, sd, default_boundary_set< 2 >(), TimeExtent{2.0}), 1e-5);
}

TEST(Oracle, ShortTimeTwoDimensionalHarmonicIsMehlerProduct)
{
    const ActionSpec2D spec{1.0, {0.0, 0.5, 0.0, 0.0}};
    const double       T     = 0.4;
    const auto         table = sample_amplitudes(solve_oracle(spec, Grid2D{7.0, 141}), default_boundary_set< 2 >(), {T});
    for (const auto& r : table.records)
    {
        const double exact = mehler(r.x_in[0], r.x_fi[0], T) * mehler(r.x_in[1], r.x_fi[1], T);
        EXPECT_NEAR(r.G / exact, 1.0, 1e-5);
    }
}

TEST(Oracle, SemigroupIdentity)
{
    const auto   sd = ground_state(quartic_1d, default_grid< 1 >(), 64);
    const double a = 0.6, c = -0.9, t1 = 0.7, t2 = 1.3;
    const auto   fa = transition_amplitude(sd, {a}, TimeExtent{t1});
    const auto   fc = transition_amplitude(sd, {c}, TimeExtent{t2});
    const double direct = spectral_amplitude(sd, {a}, {c}, TimeExtent{t1 + t2});
    EXPECT_NEAR(grid_inner(fa, fc) / direct, 1.0, 1e-4);
}

TEST(Oracle, AmplitudeSymmetries)
{
    const auto oracle = solve_oracle(quartic_1d, default_grid< 1 >());
    const TimeExtent T{1.5};
    const double     g = oracle.amplitude({0.3}, {-1.2}, T);
    EXPECT_NEAR(oracle.amplitude({-1.2}, {0.3}, T), g, 1e-14 * g);
    EXPECT_NEAR(oracle.amplitude({-0.3}, {1.2}, T), g, 1e-10 * g); // Richardson amplifies round-off
}

TEST(Oracle, SamplingCoversUniquePairs)
{
    const auto oracle = solve_oracle(quartic_1d, default_grid< 1 >());
    const auto table  = sample_amplitudes(oracle, default_boundary_set< 1 >(), {1.0, 2.0});
    // 11 points, reflection symmetry: pairs (a, b) up to swap and sign
    EXPECT_EQ(table.times(), (std::vector< double >{1.0, 2.0}));
    EXPECT_EQ(table.records.size() % 2, 0u);
    for (const auto& r : table.records)
        EXPECT_GT(r.G, 0.0);
}

TEST(Oracle, UnderflowIsReportedAsNonpositiveAmplitude)
{
    const auto  oracle = solve_oracle(quartic_1d, default_grid< 1 >());
    std::string code;
    EXPECT_EQ(code_of([&] { sample_amplitudes(oracle, default_boundary_set< 1 >(), {2000.0}); }, code), 1.0);
    EXPECT_EQ(code, "nonpositive_amplitude");
}

TEST(Oracle, BoundaryBeyondRadiusIsRejected)
{
    const auto oracle = solve_oracle(quartic_1d, default_grid< 1 >());
    EXPECT_THROW(sample_amplitudes(oracle, std::vector< Point< 1 > >{{0.0}, {5.0}}, {1.0}), InvalidArgument);
}
