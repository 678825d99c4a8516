#ifndef QACTION_ZERO_TEMP_HPP
#define QACTION_ZERO_TEMP_HPP

#include "qaction/errors.hpp"
#include "qaction/grid.hpp"
#include "qaction/io.hpp"
#include "qaction/parallel.hpp"
#include "qaction/potential.hpp"
#include "qaction/trajectory.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace qaction
{

enum class QuotientMode
{
    automatic, // factored form inside the exclusion radius, direct outside
    direct,    // W'/sqrt(W) as written; throws inside the exclusion radius
    factored   // sqrt(a) (2 + 4 b x^2 + 6 c x^4) / sqrt(1 + b x^2 + c x^4)
};

namespace detail
{

/// V(x) - V(0) summed from the non-constant terms (no cancellation near 0).
template < PolynomialPotential P >
double excess_over_origin(const P& p, const Point< P::dimension >& x)
{
    const auto b = p.basis(x);
    const auto c = p.coefficients();
    double     s = 0.0;
    for (std::size_t j = 1; j < P::n_coefficients; ++j)
        s += c[j] * b[j];
    return s;
}

/// sgn(x) d/dx W / sqrt(W) for W = 2 m~ (V~ - v~0). Writing
/// W = a x^2 (1 + b x^2 + c x^4) removes the 0/0 at the origin.
inline double quotient_term(const ActionSpec1D& q, double x, QuotientMode mode, double exclusion)
{
    const auto&  p  = q.potential;
    const double x2 = x * x;
    if (mode == QuotientMode::direct || (mode == QuotientMode::automatic && std::abs(x) >= exclusion))
    {
        if (std::abs(x) < exclusion)
            throw SingularityError("quotient term is 0/0 at |x| = " + format_real(std::abs(x)) + " < " + format_real(exclusion));
        const double W  = 2.0 * q.mass * excess_over_origin(p, {x});
        const double Wp = 2.0 * q.mass * p.gradient({x})[0];
        if (!(W > 0.0))
            throw DomainError("quantum potential is not above its value at the origin at x = " + format_real(x));
        return (x > 0.0 ? 1.0 : -1.0) * Wp / std::sqrt(W);
    }
    if (!(p.v2 > 0.0))
        throw DomainError("factored quotient needs v2 > 0");
    const double a    = 2.0 * q.mass * p.v2;
    const double b    = p.v4 / p.v2;
    const double c    = p.v6 / p.v2;
    const double base = 1.0 + b * x2 + c * x2 * x2;
    if (!(base > 0.0))
        throw DomainError("quantum potential is not above its value at the origin at x = " + format_real(x));
    return std::sqrt(a) * (2.0 + 4.0 * b * x2 + 6.0 * c * x2 * x2) / std::sqrt(base);
}

} // namespace detail

/// LHS - RHS of the zero-temperature transformation law,
///   2m (V - E) = 2m~ (V~ - v~0) - (1/2) sgn(x) [2m~ (V~ - v~0)]' / sqrt(2m~ (V~ - v~0)).
inline double transform_law_residual(const ActionSpec1D& classical, const ActionSpec1D& quantum, double E_gr, double x,
                                     QuotientMode mode = QuotientMode::automatic, double exclusion = 0.05)
{
    if (x == 0.0 && mode != QuotientMode::factored)
        throw SingularityError("transformation law is singular at x = 0");
    const double lhs = 2.0 * classical.mass * (classical.potential.value({x}) - E_gr);
    const double W   = 2.0 * quantum.mass * detail::excess_over_origin(quantum.potential, {x});
    return lhs - (W - 0.5 * detail::quotient_term(quantum, x, mode, exclusion));
}

/// max |residual| over n equally spaced points of [x_lo, x_hi].
inline double max_transform_law_residual(const ActionSpec1D& classical, const ActionSpec1D& quantum, double E_gr,
                                         double x_lo, double x_hi, int n = 291)
{
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
    {
        const double x = x_lo + (x_hi - x_lo) * i / (n - 1);
        worst          = std::max(worst, std::abs(transform_law_residual(classical, quantum, E_gr, x)));
    }
    return worst;
}

struct QuarticParams
{
    double v2 = 0.0, v4 = 0.0, v6 = 0.0;
};

/// Order-by-order matching of the transformation law in powers of x for a
/// quartic classical potential (hbar = 1).
inline QuarticParams derive_quartic_params(double m, double v2, double v4, double E_gr, double m_tilde)
{
    if (!(m_tilde > 0.0))
        throw InvalidArgument("m~ must be positive");
    if (!(E_gr > 0.0))
        throw InvalidArgument("E_gr must be positive");
    QuarticParams q;
    q.v2            = 2.0 / m_tilde * (m * E_gr) * (m * E_gr);
    const double sq = std::sqrt(2.0 * m_tilde * q.v2);
    q.v4            = 2.0 / 3.0 * sq * (q.v2 - v2 * m / m_tilde);
    q.v6            = 0.25 * q.v4 * q.v4 / q.v2 + 2.0 / 5.0 * sq * (q.v4 - v4 * m / m_tilde);
    return q;
}

struct WavefunctionProfile1D
{
    Grid1D                grid;
    std::vector< double > values; // one per grid node, normalized
    double                normalization = 1.0; // N with psi = exp(-I) / N
    double                E_gr          = 0.0; // v~0
};

/// Ground state from the quantum action:
///   psi(x) = exp(-int_0^|x| sqrt(2m~ (V~ - v~0)) dx') / N,
/// with adaptive Gauss-Kronrod quadrature between neighbouring nodes.
inline WavefunctionProfile1D reconstruct_wavefunction_1d(const ActionSpec1D& quantum, const Grid1D& grid)
{
    grid.validate();
    const auto& p         = quantum.potential;
    auto        integrand = [&](double x) {
        const double r = 2.0 * quantum.mass * detail::excess_over_origin(p, {x});
        if (r < 0.0)
            throw DomainError("negative radicand at x = " + format_real(x) + ": v~0 is not the potential minimum");
        return std::sqrt(r);
    };
    const int             c = (grid.points - 1) / 2;
    std::vector< double > expo(static_cast< std::size_t >(grid.points), 0.0);
    for (int i = c + 1; i < grid.points; ++i)
    {
        double err = 0.0;
        const double piece = boost::math::quadrature::gauss_kronrod< double, 15 >::integrate(
            integrand, grid.coordinate(i - 1), grid.coordinate(i), 15, 1e-12, &err);
        if (err > 1e-10)
            throw NonConvergence("wavefunction quadrature error " + format_real(err) + " on [" +
                                 format_real(grid.coordinate(i - 1)) + ", " + format_real(grid.coordinate(i)) + "]");
        expo[static_cast< std::size_t >(i)]         = expo[static_cast< std::size_t >(i - 1)] + piece;
        expo[static_cast< std::size_t >(2 * c - i)] = expo[static_cast< std::size_t >(i)];
    }
    WavefunctionProfile1D out{grid, {}, 1.0, p.v0};
    out.values.resize(expo.size());
    double norm2 = 0.0;
    for (std::size_t i = 0; i < expo.size(); ++i)
    {
        out.values[i] = std::exp(-expo[i]);
        norm2 += out.values[i] * out.values[i];
    }
    out.normalization = std::sqrt(norm2 * grid.spacing());
    for (auto& v : out.values)
        v /= out.normalization;
    return out;
}

/// ||(H - E) psi|| / ||psi|| for the finite-difference H of `classical`.
inline double schrodinger_residual(const ActionSpec1D& classical, const WavefunctionProfile1D& psi, double E)
{
    const auto&  g  = psi.grid;
    const double h  = g.spacing();
    double       num = 0.0, den = 0.0;
    for (int i = 1; i + 1 < g.points; ++i)
    {
        const auto   k   = static_cast< std::size_t >(i);
        const double lap = (psi.values[k + 1] - 2.0 * psi.values[k] + psi.values[k - 1]) / (h * h);
        const double r   = -lap / (2.0 * classical.mass) + (classical.potential.value({g.coordinate(i)}) - E) * psi.values[k];
        num += r * r;
        den += psi.values[k] * psi.values[k];
    }
    return std::sqrt(num / den);
}

struct WavefunctionPoint2D
{
    Point< 2 > target{};
    double     value  = 0.0;  // psi_origin * exp(-line integral)
    double     line_integral = 0.0;
    double     certificate_change = 0.0;
    bool       ok = false;
    std::string error;
};

struct WavefunctionProfile2D
{
    std::vector< WavefunctionPoint2D > points;
    double                             psi_origin = 1.0;
    double                             E_gr       = 0.0;

    bool complete() const
    {
        return std::all_of(points.begin(), points.end(), [](const auto& p) { return p.ok; });
    }
};

/// psi(x) = psi(0) exp(-m~ int_0^x v . dx) along large-T extremals. psi(0) is
/// supplied (normally the oracle's value at the origin); failing targets are
/// flagged and the rest are still returned.
inline WavefunctionProfile2D reconstruct_wavefunction_2d(const ActionSpec2D& quantum, const std::vector< Point< 2 > >& targets,
                                                         double psi_origin = 1.0, const LineIntegralOptions& opt = {})
{
    WavefunctionProfile2D out;
    out.psi_origin = psi_origin;
    out.E_gr       = quantum.potential.v0;
    out.points     = parallel_map< WavefunctionPoint2D >(targets.size(), [&](std::size_t i) {
        WavefunctionPoint2D pt;
        pt.target = targets[i];
        try
        {
            const auto li         = wavefunction_line_integral(quantum, targets[i], opt);
            pt.line_integral      = li.value;
            pt.certificate_change = li.change;
            pt.value              = psi_origin * std::exp(-li.value);
            pt.ok                 = true;
        }
        catch (const NumericalError& e)
        {
            pt.error = e.code() + ": " + e.what();
        }
        return pt;
    });
    return out;
}

/// Cuts parallel to the x axis at the given heights, x in [-x_max, x_max].
inline std::vector< Point< 2 > > cut_targets(const std::vector< double >& heights, double x_max, double step)
{
    std::vector< Point< 2 > > out;
    const int                 n = static_cast< int >(std::lround(x_max / step));
    for (const double y : heights)
        for (int i = -n; i <= n; ++i)
            out.push_back({i * step, y});
    return out;
}

struct EnergyIdentityReport
{
    double value      = 0.0;
    double reference  = 0.0;
    double difference = 0.0;
    double tolerance  = 0.0;
    bool   pass       = false;
};

/// |v~0 (or the extrapolated A) - E_gr| against a tolerance.
inline EnergyIdentityReport check_energy_identity(double value, double E_gr_oracle, double tolerance)
{
    EnergyIdentityReport r{value, E_gr_oracle, std::abs(value - E_gr_oracle), tolerance, false};
    r.pass = r.difference <= tolerance;
    return r;
}

/// Rows `x,psi_quantum_action,psi_oracle,abs_diff`; psi_oracle(x) is supplied.
template < class Oracle >
double write_profile_csv_1d(std::ostream& out, const WavefunctionProfile1D& psi, Oracle&& oracle, double x_lo, double x_hi,
                            const Provenance& extra = {})
{
    write_provenance(out, extra);
    out << "x,psi_quantum_action,psi_oracle,abs_diff\n";
    double worst = 0.0;
    for (int i = 0; i < psi.grid.points; ++i)
    {
        const double x = psi.grid.coordinate(i);
        if (x < x_lo - 1e-12 || x > x_hi + 1e-12)
            continue;
        const double q = psi.values[static_cast< std::size_t >(i)];
        const double o = oracle(x);
        worst          = std::max(worst, std::abs(q - o));
        out << format_real(x) << ',' << format_real(q) << ',' << format_real(o) << ',' << format_real(std::abs(q - o))
            << '\n';
    }
    return worst;
}

template < class Oracle >
double write_profile_csv_2d(std::ostream& out, const WavefunctionProfile2D& psi, Oracle&& oracle,
                            const Provenance& extra = {})
{
    write_provenance(out, extra);
    for (const auto& p : psi.points)
        if (!p.ok)
            out << "# failed target (" << format_real(p.target[0]) << ',' << format_real(p.target[1]) << "): " << p.error
                << '\n';
    out << "x,y,psi_quantum_action,psi_oracle,abs_diff\n";
    double worst = 0.0;
    for (const auto& p : psi.points)
    {
        if (!p.ok)
            continue;
        const double o = oracle(p.target);
        worst          = std::max(worst, std::abs(p.value - o));
        out << format_real(p.target[0]) << ',' << format_real(p.target[1]) << ',' << format_real(p.value) << ','
            << format_real(o) << ',' << format_real(std::abs(p.value - o)) << '\n';
    }
    return worst;
}

} // namespace qaction

#endif // QACTION_ZERO_TEMP_HPP
