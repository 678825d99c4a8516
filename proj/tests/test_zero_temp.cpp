#include "qaction/zero_temp.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace qaction;

namespace
{

const ActionSpec1D harmonic{1.0, {0.0, 0.5, 0.0, 0.0}};
const ActionSpec1D harmonic_quantum{1.0, {0.5, 0.5, 0.0, 0.0}};
const ActionSpec1D quartic{1.0, {0.0, 1.0, 0.01, 0.0}};

double gaussian_ground_state(double x)
{
    return std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x * x);
}

} // namespace

TEST(TransformLaw, HarmonicResidualVanishes)
{
    for (const double x : {-2.5, -0.3, 0.01, 0.2, 1.0, 3.0})
        EXPECT_NEAR(transform_law_residual(harmonic, harmonic_quantum, 0.5, x), 0.0, 1e-13) << "x=" << x;
    EXPECT_NEAR(transform_law_residual(harmonic, harmonic_quantum, 0.5, 0.0, QuotientMode::factored), 0.0, 1e-15);
    EXPECT_LT(max_transform_law_residual(harmonic, harmonic_quantum, 0.5, 0.1, 3.0), 1e-12);
}

TEST(TransformLaw, FactoredAndDirectFormsAgree)
{
    const ActionSpec1D q{0.999, {0.71, 1.0115, 0.00997, 3e-7}};
    for (const double x : {0.06, 0.3, 1.0, 2.5})
    {
        const double a = transform_law_residual(quartic, q, 0.71, x, QuotientMode::direct);
        const double b = transform_law_residual(quartic, q, 0.71, x, QuotientMode::factored);
        EXPECT_NEAR(a, b, 1e-11 * (1.0 + std::abs(a))) << "x=" << x;
    }
}

TEST(TransformLaw, WrongCurvatureIsDetected)
{
    const ActionSpec1D wrong{1.0, {0.5, 0.6, 0.0, 0.0}};
    EXPECT_GT(max_transform_law_residual(harmonic, wrong, 0.5, 0.1, 3.0), 0.05);
}

TEST(TransformLaw, SingularPointsAreRejected)
{
    EXPECT_THROW(transform_law_residual(harmonic, harmonic_quantum, 0.5, 0.0), SingularityError);
    EXPECT_THROW(transform_law_residual(harmonic, harmonic_quantum, 0.5, 0.01, QuotientMode::direct), SingularityError);
    const ActionSpec1D flat{1.0, {0.5, 0.0, 0.0, 0.0}};
    EXPECT_THROW(transform_law_residual(harmonic, flat, 0.5, 0.01, QuotientMode::factored), DomainError);
}

TEST(QuarticParams, ReferenceDigits)
{
    const auto q = derive_quartic_params(1.0, 1.0, 0.01, 0.7108116274, 0.99901);
    EXPECT_NEAR(q.v2, 1.01151, 5e-6);
    EXPECT_NEAR(q.v4, 0.009967, 5e-7);
    EXPECT_NEAR(q.v6, 2.89e-7, 5e-10);
}

TEST(QuarticParams, HarmonicLimit)
{
    // omega = sqrt(2 v2 / m) = 1, E = 1/2: the quantum action is the classical one
    const auto q = derive_quartic_params(1.0, 0.5, 0.0, 0.5, 1.0);
    EXPECT_NEAR(q.v2, 0.5, 1e-15);
    EXPECT_NEAR(q.v4, 0.0, 1e-15);
    EXPECT_NEAR(q.v6, 0.0, 1e-15);
}

TEST(QuarticParams, MatchedParametersLeaveSixthOrderResidual)
{
    const double E = 0.7108116274, mt = 0.99901;
    const auto   q = derive_quartic_params(1.0, 1.0, 0.01, E, mt);
    const ActionSpec1D quantum{mt, {E, q.v2, q.v4, q.v6}};
    const double       r1 = transform_law_residual(quartic, quantum, E, 0.1, QuotientMode::factored);
    const double       r2 = transform_law_residual(quartic, quantum, E, 0.2, QuotientMode::factored);
    EXPECT_NEAR(r2 / r1, 64.0, 2.0);
    EXPECT_LT(max_transform_law_residual(quartic, quantum, E, 0.1, 1.0), 1e-6);
}

TEST(QuarticParams, RejectsNonPositiveInputs)
{
    EXPECT_THROW(derive_quartic_params(1.0, 1.0, 0.01, 0.71, 0.0), InvalidArgument);
    EXPECT_THROW(derive_quartic_params(1.0, 1.0, 0.01, -0.1, 1.0), InvalidArgument);
}

TEST(Wavefunction1D, HarmonicIsGaussian)
{
    const auto psi = reconstruct_wavefunction_1d(harmonic_quantum, Grid1D{8.0, 1601});
    EXPECT_DOUBLE_EQ(psi.E_gr, 0.5);
    double norm = 0.0;
    for (int i = 0; i < psi.grid.points; ++i)
    {
        const double x = psi.grid.coordinate(i);
        EXPECT_NEAR(psi.values[static_cast< std::size_t >(i)], gaussian_ground_state(x), 1e-8) << "x=" << x;
        norm += psi.values[static_cast< std::size_t >(i)] * psi.values[static_cast< std::size_t >(i)];
    }
    EXPECT_NEAR(norm * psi.grid.spacing(), 1.0, 1e-12);
    std::stringstream out;
    EXPECT_LT(write_profile_csv_1d(out, psi, gaussian_ground_state, -3.0, 3.0, {}), 1e-8);
}

TEST(Wavefunction1D, EvenAndDecreasing)
{
    const auto psi = reconstruct_wavefunction_1d(ActionSpec1D{0.999, {0.7986, 1.013, 0.0099, 1e-7}}, Grid1D{6.0, 601});
    const int  c   = (psi.grid.points - 1) / 2;
    for (int i = 1; i <= c; ++i)
    {
        EXPECT_EQ(psi.values[static_cast< std::size_t >(c + i)], psi.values[static_cast< std::size_t >(c - i)]);
        EXPECT_LT(psi.values[static_cast< std::size_t >(c + i)], psi.values[static_cast< std::size_t >(c + i - 1)]);
    }
}

TEST(Wavefunction1D, SatisfiesSchrodingerEquation)
{
    const auto psi = reconstruct_wavefunction_1d(harmonic_quantum, Grid1D{8.0, 1601});
    // finite-difference H has O(h^2) error against the continuum Gaussian
    EXPECT_LT(schrodinger_residual(harmonic, psi, 0.5), 1e-4);
}

TEST(Wavefunction1D, PotentialBelowOriginValueIsADomainError)
{
    const ActionSpec1D bad{1.0, {0.5, -0.5, 0.1, 0.0}};
    EXPECT_THROW(reconstruct_wavefunction_1d(bad, Grid1D{4.0, 401}), DomainError);
}

TEST(Wavefunction2D, HarmonicIsGaussian)
{
    const ActionSpec2D quantum{1.0, {1.0, 0.5, 0.0, 0.0}};
    const double       psi0 = 1.0 / std::sqrt(std::numbers::pi);
    const auto         w    = reconstruct_wavefunction_2d(quantum, {{0.0, 0.0}, {1.0, 0.5}, {-1.5, 1.0}}, psi0);
    ASSERT_TRUE(w.complete());
    EXPECT_DOUBLE_EQ(w.points[0].value, psi0);
    for (const auto& p : w.points)
        EXPECT_NEAR(p.value, psi0 * std::exp(-0.5 * (p.target[0] * p.target[0] + p.target[1] * p.target[1])), 1e-8);
}

TEST(Wavefunction2D, AxisMatchesOneDimensionalQuadrature)
{
    const ActionSpec2D quantum{0.99, {1.29, 0.515, 0.0497, 0.0}};
    const ActionSpec1D axis{0.99, {1.29, 0.515, 0.0, 0.0}};
    const auto         psi1 = reconstruct_wavefunction_1d(axis, Grid1D{4.0, 401});
    const auto         w    = reconstruct_wavefunction_2d(quantum, {{1.0, 0.0}});
    ASSERT_TRUE(w.complete());
    const auto   node     = static_cast< std::size_t >(psi1.grid.axis_index(1.0));
    const double exponent = -std::log(psi1.values[node] * psi1.normalization);
    EXPECT_NEAR(w.points[0].line_integral, exponent, 1e-6);
}

TEST(Wavefunction2D, CutTargets)
{
    const auto t = cut_targets({0.0, 0.5}, 1.0, 0.25);
    ASSERT_EQ(t.size(), 18u);
    EXPECT_EQ(t.front(), (Point< 2 >{-1.0, 0.0}));
    EXPECT_EQ(t.back(), (Point< 2 >{1.0, 0.5}));
}

TEST(EnergyIdentity, PassesWithinTolerance)
{
    EXPECT_TRUE(check_energy_identity(0.710819, 0.710811, 1e-4).pass);
    const auto r = check_energy_identity(0.7, 0.710811, 1e-4);
    EXPECT_FALSE(r.pass);
    EXPECT_NEAR(r.difference, 0.010811, 1e-12);
}
