#include "qaction/amplitudes.hpp"
#include "qaction/config.hpp"
#include "qaction/potential.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace qaction;

namespace
{

template < class F >
double central_difference(F&& f, double x, double h = 1e-5)
{
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

} // namespace

TEST(Potential1D, GradientAndHessianMatchFiniteDifferences)
{
    const Potential1D p{0.3, 1.0, 0.01, 2e-4};
    for (const double x : {-2.0, -0.4, 0.0, 0.7, 3.0})
    {
        const double g = central_difference([&](double s) { return p.value({s}); }, x);
        const double h = central_difference([&](double s) { return p.gradient({s})[0]; }, x);
        EXPECT_NEAR(p.gradient({x})[0], g, 1e-7 * (1.0 + std::abs(g)));
        EXPECT_NEAR(p.hessian({x})[0][0], h, 1e-7 * (1.0 + std::abs(h)));
    }
    EXPECT_DOUBLE_EQ(p.value({0.0}), 0.3);
}

TEST(Potential2D, GradientAndHessianMatchFiniteDifferences)
{
    const Potential2D p{0.1, 0.5, 0.05, 0.002};
    for (const Point< 2 > x : {Point< 2 >{0.3, -1.2}, Point< 2 >{2.0, 0.5}, Point< 2 >{0.0, 0.0}})
    {
        for (int d = 0; d < 2; ++d)
        {
            auto shifted = [&](double s, auto&& fn) {
                Point< 2 > y = x;
                y[static_cast< std::size_t >(d)] = s;
                return fn(y);
            };
            const double xd = x[static_cast< std::size_t >(d)];
            const double g  = central_difference([&](double s) { return shifted(s, [&](auto y) { return p.value(y); }); }, xd);
            EXPECT_NEAR(p.gradient(x)[static_cast< std::size_t >(d)], g, 1e-7 * (1.0 + std::abs(g)));
            for (int e = 0; e < 2; ++e)
            {
                const double h = central_difference(
                    [&](double s) { return shifted(s, [&](auto y) { return p.gradient(y)[static_cast< std::size_t >(e)]; }); }, xd);
                EXPECT_NEAR(p.hessian(x)[static_cast< std::size_t >(e)][static_cast< std::size_t >(d)], h, 1e-6 * (1.0 + std::abs(h)));
            }
        }
    }
}

TEST(Potential, BasisTimesCoefficientsIsValue)
{
    const Potential2D p{0.1, 0.5, 0.05, 0.002};
    const Point< 2 >  x{0.7, -1.1};
    const auto        b = p.basis(x);
    const auto        c = p.coefficients();
    double            s = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j)
        s += b[j] * c[j];
    EXPECT_NEAR(s, p.value(x), 1e-14);
}

TEST(Potential, ConfinementChecks)
{
    EXPECT_TRUE((Potential1D{0, 1, 0.01, 0}).increasing_within(10.0));
    EXPECT_FALSE((Potential1D{0, 1, -0.1, 0}).increasing_within(10.0)); // turns over at |x| = sqrt(5)
    EXPECT_TRUE((Potential1D{0, 1, -0.1, 0}).increasing_within(2.0));
    EXPECT_TRUE((Potential2D{0, 0.5, 0.05, 0}).increasing_within(10.0));
    EXPECT_FALSE((Potential2D{0, -0.5, 0.05, 0}).is_confining());
}

TEST(ActionSpec, ParametersRoundTrip)
{
    const ActionSpec2D s{0.99, {1.3, 0.51, 0.049, -0.001}};
    const auto         t = ActionSpec2D::from_parameters(s.parameters());
    EXPECT_EQ(t.parameters(), s.parameters());
    EXPECT_EQ(ActionSpec2D::parameter_name(0), "m");
    EXPECT_EQ(ActionSpec2D::parameter_name(3), "v22");
}

TEST(TimeExtent, RejectsNonPositive)
{
    EXPECT_THROW(TimeExtent{0.0}, InvalidArgument);
    EXPECT_THROW(TimeExtent{-1.0}, InvalidArgument);
    EXPECT_DOUBLE_EQ(TimeExtent{4.0}.tau(), 0.25);
}

TEST(Config, ParsesBothDimensions)
{
    const auto a = parse_action_config("# quartic\ndimension = 1\nmass = 1\nv2 = 1\nv4 = 0.01\n");
    ASSERT_TRUE(std::holds_alternative< ActionSpec1D >(a));
    EXPECT_DOUBLE_EQ(std::get< ActionSpec1D >(a).potential.v4, 0.01);
    EXPECT_DOUBLE_EQ(std::get< ActionSpec1D >(a).potential.v6, 0.0);

    const auto b = parse_action_config("dimension=2\nmass=1\nv2=0.5\nv22=0.05 # coupling\n");
    ASSERT_TRUE(std::holds_alternative< ActionSpec2D >(b));
    EXPECT_DOUBLE_EQ(std::get< ActionSpec2D >(b).potential.v22, 0.05);
}

TEST(Config, RejectsMalformedInput)
{
    auto code_of = [](const std::string& text) {
        try
        {
            parse_action_config(text);
        }
        catch (const Error& e)
        {
            EXPECT_TRUE(e.is_usage_error());
            return e.code();
        }
        return std::string("none");
    };
    EXPECT_EQ(code_of("dimension = 1\nv2 = 1\n"), "config_missing_key");
    EXPECT_EQ(code_of("dimension = 1\nmass = 1\nv22 = 1\n"), "config_unknown_key");
    EXPECT_EQ(code_of("dimension = 1\nmass = 1\nmass = 2\n"), "config_duplicate_key");
    EXPECT_EQ(code_of("dimension = 1\nmass = one\n"), "config_invalid_value");
    EXPECT_EQ(code_of("dimension = 3\nmass = 1\n"), "config_invalid_value");
    EXPECT_EQ(code_of("dimension 1\n"), "config_syntax");
}

TEST(Config, MissingFileIsConfigNotFound)
{
    try
    {
        read_action_config("/nonexistent/action.cfg");
        FAIL() << "expected ConfigError";
    }
    catch (const ConfigError& e)
    {
        EXPECT_EQ(e.code(), "config_not_found");
    }
}

TEST(Config, FormatRoundTrips)
{
    const ActionSpec1D s{0.999, {0.79863, 1.013, 0.0099, 1e-7}};
    const auto         back = parse_action_config(format_action_config(s));
    EXPECT_EQ(std::get< ActionSpec1D >(back).parameters(), s.parameters());
}

TEST(Config, Fnv1aReferenceVectors)
{
    EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(hex64(0xaf63dc4c8601ec8cULL), "af63dc4c8601ec8c");
}

TEST(Io, RealsRoundTripThroughText)
{
    for (const double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300})
        EXPECT_EQ(parse_csv_real(format_real(v)), v);
}

TEST(Io, AmplitudeCsvRoundTrip)
{
    AmplitudeTable< 2 > t;
    t.records.push_back({{0.0, 0.6}, {-1.2, 0.6}, 4.0, 1.234567890123e-3});
    t.records.push_back({{0.6, 0.6}, {1.2, -0.6}, 0.25, 0.5});
    std::stringstream io;
    write_amplitude_csv(io, t, {{"note", "test"}});
    const auto back = read_amplitude_csv< 2 >(io);
    ASSERT_EQ(back.records.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i)
    {
        EXPECT_EQ(back.records[i].x_in, t.records[i].x_in);
        EXPECT_EQ(back.records[i].x_fi, t.records[i].x_fi);
        EXPECT_EQ(back.records[i].T, t.records[i].T);
        EXPECT_EQ(back.records[i].G, t.records[i].G);
    }
    EXPECT_EQ(back.times(), (std::vector< double >{0.25, 4.0}));
}
