#ifndef QACTION_POTENTIAL_HPP
#define QACTION_POTENTIAL_HPP

#include "qaction/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <string>
#include <string_view>
#include <variant>

namespace qaction
{

template < int D >
using Point = std::array< double, D >;

template < int D >
using Matrix = std::array< std::array< double, D >, D >;

/// V(x) = v0 + v2 x^2 + v4 x^4 + v6 x^6.
struct Potential1D
{
    static constexpr int dimension = 1;
    static constexpr std::size_t n_coefficients = 4;
    static constexpr std::array< std::string_view, n_coefficients > names{"v0", "v2", "v4", "v6"};

    double v0 = 0.0;
    double v2 = 0.0;
    double v4 = 0.0;
    double v6 = 0.0;

    constexpr double value(const Point< 1 >& p) const noexcept
    {
        const double x2 = p[0] * p[0];
        return v0 + x2 * (v2 + x2 * (v4 + x2 * v6));
    }

    constexpr Point< 1 > gradient(const Point< 1 >& p) const noexcept
    {
        const double x  = p[0];
        const double x2 = x * x;
        return {x * (2.0 * v2 + x2 * (4.0 * v4 + 6.0 * v6 * x2))};
    }

    constexpr Matrix< 1 > hessian(const Point< 1 >& p) const noexcept
    {
        const double x2 = p[0] * p[0];
        return {{{2.0 * v2 + x2 * (12.0 * v4 + 30.0 * v6 * x2)}}};
    }

    /// dV/dc for every coefficient c (the potential is linear in them).
    constexpr std::array< double, n_coefficients > basis(const Point< 1 >& p) const noexcept
    {
        const double x2 = p[0] * p[0];
        return {1.0, x2, x2 * x2, x2 * x2 * x2};
    }

    constexpr std::array< double, n_coefficients > coefficients() const noexcept { return {v0, v2, v4, v6}; }

    static constexpr Potential1D from_coefficients(const std::array< double, n_coefficients >& c) noexcept
    {
        return {c[0], c[1], c[2], c[3]};
    }

    /// Leading nonzero coefficient among {v6, v4, v2} is positive.
    constexpr bool is_confining() const noexcept
    {
        if (v6 != 0.0)
            return v6 > 0.0;
        if (v4 != 0.0)
            return v4 > 0.0;
        return v2 > 0.0;
    }

    /// V strictly increasing in |x| on (0, radius]; the polynomial has a
    /// unique minimum at the origin on that interval.
    bool increasing_within(double radius) const noexcept
    {
        if (v2 <= 0.0)
            return false;
        // V'(x)/x = 2 v2 + 4 v4 s + 6 v6 s^2 with s = x^2 in (0, radius^2].
        const double s_max = radius * radius;
        auto         q     = [&](double s) { return 2.0 * v2 + 4.0 * v4 * s + 6.0 * v6 * s * s; };
        if (q(s_max) <= 0.0)
            return false;
        if (v6 > 0.0)
        {
            const double s_star = -v4 / (3.0 * v6);
            if (s_star > 0.0 && s_star < s_max && q(s_star) <= 0.0)
                return false;
        }
        return true;
    }
};

/// Pullen-Edmonds family: V(x,y) = v0 + v2 (x^2+y^2) + v22 x^2 y^2 + v4 (x^4+y^4).
struct Potential2D
{
    static constexpr int dimension = 2;
    static constexpr std::size_t n_coefficients = 4;
    static constexpr std::array< std::string_view, n_coefficients > names{"v0", "v2", "v22", "v4"};

    double v0  = 0.0;
    double v2  = 0.0;
    double v22 = 0.0;
    double v4  = 0.0;

    constexpr double value(const Point< 2 >& p) const noexcept
    {
        const double x2 = p[0] * p[0];
        const double y2 = p[1] * p[1];
        return v0 + v2 * (x2 + y2) + v22 * x2 * y2 + v4 * (x2 * x2 + y2 * y2);
    }

    constexpr Point< 2 > gradient(const Point< 2 >& p) const noexcept
    {
        const double x = p[0], y = p[1];
        const double x2 = x * x, y2 = y * y;
        return {x * (2.0 * v2 + 2.0 * v22 * y2 + 4.0 * v4 * x2), y * (2.0 * v2 + 2.0 * v22 * x2 + 4.0 * v4 * y2)};
    }

    constexpr Matrix< 2 > hessian(const Point< 2 >& p) const noexcept
    {
        const double x = p[0], y = p[1];
        const double x2 = x * x, y2 = y * y;
        const double xy = 4.0 * v22 * x * y;
        return {{{2.0 * v2 + 2.0 * v22 * y2 + 12.0 * v4 * x2, xy}, {xy, 2.0 * v2 + 2.0 * v22 * x2 + 12.0 * v4 * y2}}};
    }

    constexpr std::array< double, n_coefficients > basis(const Point< 2 >& p) const noexcept
    {
        const double x2 = p[0] * p[0];
        const double y2 = p[1] * p[1];
        return {1.0, x2 + y2, x2 * y2, x2 * x2 + y2 * y2};
    }

    constexpr std::array< double, n_coefficients > coefficients() const noexcept { return {v0, v2, v22, v4}; }

    static constexpr Potential2D from_coefficients(const std::array< double, n_coefficients >& c) noexcept
    {
        return {c[0], c[1], c[2], c[3]};
    }

    constexpr bool is_confining() const noexcept { return v2 > 0.0; }

    /// Radial derivative positive on every ray out to `radius`. Along a ray
    /// at angle phi, V - v0 = a r^2 + b r^4 with b = v22 c^2 s^2 + v4 (c^4 + s^4),
    /// which ranges over [min, max] of that quartic form; it suffices to
    /// check the smallest b.
    bool increasing_within(double radius) const noexcept
    {
        if (v2 <= 0.0)
            return false;
        // b(phi) = v4 + (v22 - 2 v4) c^2 s^2, with c^2 s^2 in [0, 1/4].
        const double b_min = std::min(v4, v4 + 0.25 * (v22 - 2.0 * v4));
        return 2.0 * v2 + 4.0 * b_min * radius * radius > 0.0;
    }
};

template < class P >
concept PolynomialPotential = requires(const P& p, const Point< P::dimension >& x) {
    { p.value(x) } -> std::convertible_to< double >;
    { p.gradient(x) } -> std::convertible_to< Point< P::dimension > >;
    { p.basis(x) };
    { p.coefficients() };
};

/// Mass plus potential. Used for both the classical and the quantum action.
template < PolynomialPotential P >
struct ActionSpec
{
    using potential_type          = P;
    static constexpr int dimension = P::dimension;
    /// mass followed by the potential coefficients
    static constexpr std::size_t n_parameters = 1 + P::n_coefficients;

    double mass = 1.0;
    P      potential{};

    double value(const Point< dimension >& x) const noexcept { return potential.value(x); }

    std::array< double, n_parameters > parameters() const noexcept
    {
        std::array< double, n_parameters > out{};
        out[0]       = mass;
        const auto c = potential.coefficients();
        for (std::size_t i = 0; i < P::n_coefficients; ++i)
            out[i + 1] = c[i];
        return out;
    }

    static ActionSpec from_parameters(const std::array< double, n_parameters >& p) noexcept
    {
        std::array< double, P::n_coefficients > c{};
        for (std::size_t i = 0; i < P::n_coefficients; ++i)
            c[i] = p[i + 1];
        return {p[0], P::from_coefficients(c)};
    }

    static constexpr std::string_view parameter_name(std::size_t i) noexcept
    {
        return i == 0 ? std::string_view{"m"} : P::names[i - 1];
    }

    /// Throws ConfigError when the invariants (m > 0, confining) fail.
    void validate() const
    {
        if (!(mass > 0.0) || !std::isfinite(mass))
            throw ConfigError("invalid_mass", "mass must be positive");
        if (!potential.is_confining())
            throw ConfigError("not_confining", "potential is not confining");
    }
};

using ActionSpec1D  = ActionSpec< Potential1D >;
using ActionSpec2D  = ActionSpec< Potential2D >;
using AnyActionSpec = std::variant< ActionSpec1D, ActionSpec2D >;

/// Absolute value of imaginary time. beta = T and tau = 1/T (hbar = k_B = 1).
class TimeExtent
{
public:
    explicit TimeExtent(double T) : T_(T)
    {
        if (!(T > 0.0) || !std::isfinite(T))
            throw InvalidArgument("time extent must be positive, got " + std::to_string(T));
    }

    double T() const noexcept { return T_; }
    double beta() const noexcept { return T_; }
    double tau() const noexcept { return 1.0 / T_; }

private:
    double T_;
};

inline double temperature_of(const TimeExtent& t) noexcept
{
    return t.tau();
}

inline double temperature_of(double T)
{
    return TimeExtent{T}.tau();
}

template < PolynomialPotential P >
double eval_potential(const P& p, const Point< P::dimension >& x) noexcept
{
    return p.value(x);
}

template < PolynomialPotential P >
Point< P::dimension > grad_potential(const P& p, const Point< P::dimension >& x) noexcept
{
    return p.gradient(x);
}

} // namespace qaction

#endif // QACTION_POTENTIAL_HPP
