#ifndef QACTION_TRAJECTORY_HPP
#define QACTION_TRAJECTORY_HPP

#include "qaction/errors.hpp"
#include "qaction/io.hpp"
#include "qaction/potential.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace qaction
{

template < PolynomialPotential P >
struct BvpProblem
{
    static constexpr int D = P::dimension;

    ActionSpec< P > spec{};
    Point< D >      x_in{};
    Point< D >      x_fi{};
    double          T         = 1.0;
    int             n_steps   = 1024;
    /// Bound on the max discrete Euler-Lagrange residual |m x'' - grad V|.
    double tolerance      = 1e-8;
    int    max_iterations = 100;
    /// Optional starting path (n_steps + 1 points); straight line otherwise.
    std::optional< std::vector< Point< D > > > initial_path;

    /// Only m > 0 is required here: fitted quantum potentials may turn over
    /// far outside the region the paths explore, and a lost minimum shows up
    /// as an indefinite Hessian instead.
    void validate() const
    {
        if (!(spec.mass > 0.0) || !std::isfinite(spec.mass))
            throw InvalidArgument("mass must be positive");
        TimeExtent{T};
        if (n_steps < 64)
            throw InvalidArgument("n_steps must be at least 64");
        if (!(tolerance > 0.0))
            throw InvalidArgument("tolerance must be positive");
        if (initial_path && initial_path->size() != static_cast< std::size_t >(n_steps + 1))
            throw InvalidArgument("initial path has the wrong length");
    }
};

template < int D >
struct TrajectorySolution
{
    std::vector< Point< D > > path;
    double                    dt = 0.0;
    /// Discrete action: midpoint kinetic term, trapezoidal potential.
    double action = 0.0;
    /// epsilon = V - (m/2) v^2 at the middle node (conserved up to O(dt^2)).
    double energy_const = 0.0;
    /// max |epsilon_i - epsilon| over interior nodes
    double energy_drift = 0.0;
    double residual     = 0.0;
    bool   hessian_positive = false;
    int    iterations       = 0;
    bool   restarted        = false;

    double time_extent() const noexcept { return dt * static_cast< double >(path.size() - 1); }
};

namespace detail
{

template < int D >
using Vec = Eigen::Matrix< double, D, 1 >;
template < int D >
using Mat = Eigen::Matrix< double, D, D >;

template < int D >
Vec< D > to_vec(const Point< D >& p)
{
    Vec< D > v;
    for (int d = 0; d < D; ++d)
        v(d) = p[static_cast< std::size_t >(d)];
    return v;
}

template < int D >
double dist2(const Point< D >& a, const Point< D >& b)
{
    double s = 0.0;
    for (int d = 0; d < D; ++d)
        s += (a[static_cast< std::size_t >(d)] - b[static_cast< std::size_t >(d)]) *
             (a[static_cast< std::size_t >(d)] - b[static_cast< std::size_t >(d)]);
    return s;
}

template < PolynomialPotential P >
double discrete_action(const ActionSpec< P >& spec, const std::vector< Point< P::dimension > >& path, double dt)
{
    double kin = 0.0, pot = 0.0;
    for (std::size_t i = 0; i + 1 < path.size(); ++i)
        kin += dist2< P::dimension >(path[i + 1], path[i]);
    for (std::size_t i = 0; i < path.size(); ++i)
    {
        const double w = (i == 0 || i + 1 == path.size()) ? 0.5 : 1.0;
        pot += w * spec.potential.value(path[i]);
    }
    return 0.5 * spec.mass * kin / dt + dt * pot;
}

/// Gradient of the discrete action with respect to the interior nodes.
template < PolynomialPotential P >
std::vector< Vec< P::dimension > > action_gradient(const ActionSpec< P >& spec,
                                                   const std::vector< Point< P::dimension > >& path, double dt)
{
    constexpr int                 D = P::dimension;
    const std::size_t             n = path.size() - 1;
    std::vector< Vec< D > >       g(n - 1);
    for (std::size_t i = 1; i < n; ++i)
    {
        const auto gv = spec.potential.gradient(path[i]);
        for (int d = 0; d < D; ++d)
        {
            const auto k = static_cast< std::size_t >(d);
            g[i - 1](d)  = spec.mass * (2.0 * path[i][k] - path[i - 1][k] - path[i + 1][k]) / dt + dt * gv[k];
        }
    }
    return g;
}

/// Block-tridiagonal Hessian: diagonal blocks 2m/dt + dt Hess V, off-diagonal
/// blocks -m/dt I. Factorized by block Cholesky; positive definiteness of
/// every pivot block is equivalent to positive definiteness of the Hessian.
template < int D >
class BlockTridiagonal
{
public:
    BlockTridiagonal(std::vector< Mat< D > > diag, double off) : pivots_(std::move(diag)), off_(off)
    {
        factors_.reserve(pivots_.size());
        for (std::size_t i = 0; i < pivots_.size(); ++i)
        {
            if (i > 0)
                pivots_[i] -= off_ * off_ * factors_.back().solve(Mat< D >::Identity());
            Eigen::LLT< Mat< D > > llt(pivots_[i]);
            if (llt.info() != Eigen::Success)
            {
                positive_ = false;
                return;
            }
            factors_.push_back(llt);
        }
    }

    bool positive() const noexcept { return positive_; }

    std::vector< Vec< D > > solve(const std::vector< Vec< D > >& rhs) const
    {
        const std::size_t      n = rhs.size();
        std::vector< Vec< D > > y(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            y[i] = rhs[i];
            if (i > 0)
                y[i] -= off_ * factors_[i - 1].solve(y[i - 1]);
        }
        std::vector< Vec< D > > x(n);
        for (std::size_t k = n; k-- > 0;)
        {
            Vec< D > r = y[k];
            if (k + 1 < n)
                r -= off_ * x[k + 1];
            x[k] = factors_[k].solve(r);
        }
        return x;
    }

private:
    std::vector< Mat< D > >              pivots_;
    std::vector< Eigen::LLT< Mat< D > > > factors_;
    double                               off_;
    bool                                 positive_ = true;
};

template < PolynomialPotential P >
BlockTridiagonal< P::dimension > action_hessian(const ActionSpec< P >& spec,
                                                const std::vector< Point< P::dimension > >& path, double dt, double shift)
{
    constexpr int           D = P::dimension;
    const std::size_t       n = path.size() - 1;
    std::vector< Mat< D > > diag(n - 1);
    for (std::size_t i = 1; i < n; ++i)
    {
        const auto h = spec.potential.hessian(path[i]);
        for (int a = 0; a < D; ++a)
            for (int b = 0; b < D; ++b)
                diag[i - 1](a, b) = dt * h[static_cast< std::size_t >(a)][static_cast< std::size_t >(b)];
        diag[i - 1] += (2.0 * spec.mass / dt + shift) * Mat< D >::Identity();
    }
    return {std::move(diag), -spec.mass / dt};
}

template < int D >
double max_norm(const std::vector< Vec< D > >& v)
{
    double m = 0.0;
    for (const auto& x : v)
        m = std::max(m, x.cwiseAbs().maxCoeff());
    return m;
}

template < PolynomialPotential P >
TrajectorySolution< P::dimension > newton_relax(const BvpProblem< P >& p, std::vector< Point< P::dimension > > path)
{
    constexpr int D  = P::dimension;
    const double  dt = p.T / p.n_steps;
    const auto&   s  = p.spec;

    // the gradient carries roundoff of order eps * m |x| / dt; at small dt
    // that floor can sit above the requested tolerance
    double scale = 1.0;
    for (int d = 0; d < D; ++d)
        scale = std::max({scale, std::abs(p.x_in[static_cast< std::size_t >(d)]), std::abs(p.x_fi[static_cast< std::size_t >(d)])});
    const double tolerance =
        std::max(p.tolerance, 64.0 * std::numeric_limits< double >::epsilon() * s.mass * scale / (dt * dt));

    double action = discrete_action(s, path, dt);
    auto   grad   = action_gradient(s, path, dt);
    int    it     = 0;
    for (; it < p.max_iterations && max_norm< D >(grad) / dt > tolerance; ++it)
    {
        // Levenberg shift only while the Hessian is indefinite away from the optimum
        double shift = 0.0;
        auto   hess  = action_hessian(s, path, dt, shift);
        while (!hess.positive())
        {
            shift = shift == 0.0 ? 1e-3 * s.mass / dt : 4.0 * shift;
            if (shift > 1e12)
                throw NonConvergence("BVP Hessian cannot be regularized");
            hess = action_hessian(s, path, dt, shift);
        }
        const auto step = hess.solve(grad);

        double alpha = 1.0;
        for (;;)
        {
            auto trial = path;
            for (std::size_t i = 1; i + 1 < trial.size(); ++i)
                for (int d = 0; d < D; ++d)
                    trial[i][static_cast< std::size_t >(d)] -= alpha * step[i - 1](d);
            const double a = discrete_action(s, trial, dt);
            // accept decrease, or any step once the change is at roundoff level
            if (std::isfinite(a) && (a <= action || std::abs(a - action) <= 1e-14 * (1.0 + std::abs(action))))
            {
                path   = std::move(trial);
                action = a;
                break;
            }
            alpha *= 0.5;
            if (alpha < 1e-10)
                throw NonConvergence("BVP line search failed");
        }
        grad = action_gradient(s, path, dt);
    }

    const double residual = max_norm< D >(grad) / dt;
    if (!(residual <= tolerance))
        throw NonConvergence("BVP did not converge: residual " + format_real(residual) + " after " + std::to_string(it) +
                             " iterations");

    TrajectorySolution< D > sol;
    sol.path             = std::move(path);
    sol.dt               = dt;
    sol.action           = action;
    sol.residual         = residual;
    sol.iterations       = it;
    sol.hessian_positive = action_hessian(s, sol.path, dt, 0.0).positive();

    // Euclidean energy V - (m/2) v^2 with centered velocity
    const std::size_t     n = sol.path.size() - 1;
    std::vector< double > eps(n - 1);
    for (std::size_t i = 1; i < n; ++i)
    {
        const double v2 = dist2< D >(sol.path[i + 1], sol.path[i - 1]) / (4.0 * dt * dt);
        eps[i - 1]      = s.potential.value(sol.path[i]) - 0.5 * s.mass * v2;
    }
    sol.energy_const = eps[(n - 1) / 2];
    for (const double e : eps)
        sol.energy_drift = std::max(sol.energy_drift, std::abs(e - sol.energy_const));
    return sol;
}

template < int D >
std::vector< Point< D > > straight_path(const Point< D >& a, const Point< D >& b, int n)
{
    std::vector< Point< D > > path(static_cast< std::size_t >(n + 1));
    for (int i = 0; i <= n; ++i)
    {
        const double f = static_cast< double >(i) / n;
        for (int d = 0; d < D; ++d)
            path[static_cast< std::size_t >(i)][static_cast< std::size_t >(d)] =
                (1.0 - f) * a[static_cast< std::size_t >(d)] + f * b[static_cast< std::size_t >(d)];
    }
    return path;
}

/// Piecewise linear x_in -> origin -> x_fi with the kink at T/2.
template < int D >
std::vector< Point< D > > path_through_origin(const Point< D >& a, const Point< D >& b, int n)
{
    std::vector< Point< D > > path(static_cast< std::size_t >(n + 1));
    for (int i = 0; i <= n; ++i)
    {
        const double f = 2.0 * i / n;
        for (int d = 0; d < D; ++d)
            path[static_cast< std::size_t >(i)][static_cast< std::size_t >(d)] =
                f <= 1.0 ? (1.0 - f) * a[static_cast< std::size_t >(d)] : (f - 1.0) * b[static_cast< std::size_t >(d)];
    }
    return path;
}

} // namespace detail

/// Discrete minimizer of the Euclidean action by damped Newton relaxation.
/// Starts from the straight line (or the supplied path); when the result is
/// not a minimum it retries once from a path through the origin. Throws
/// ConjugatePoint if the second variation is still not positive definite.
template < PolynomialPotential P >
TrajectorySolution< P::dimension > solve_bvp(const BvpProblem< P >& p)
{
    p.validate();
    auto sol = detail::newton_relax(
        p, p.initial_path ? *p.initial_path : detail::straight_path< P::dimension >(p.x_in, p.x_fi, p.n_steps));
    if (sol.hessian_positive)
        return sol;
    auto retry     = detail::newton_relax(p, detail::path_through_origin< P::dimension >(p.x_in, p.x_fi, p.n_steps));
    retry.restarted = true;
    if (!retry.hessian_positive)
        throw ConjugatePoint("second variation of the action is not positive definite (conjugate point)");
    return retry;
}

/// Recomputes the action of a solution (or any path) for `spec`.
template < PolynomialPotential P >
double action_of(const ActionSpec< P >& spec, const TrajectorySolution< P::dimension >& sol)
{
    return detail::discrete_action(spec, sol.path, sol.dt);
}

/// d(action)/d(parameters) at the extremal path, ordered as
/// ActionSpec::parameters(). Exact for the discrete problem: the path is
/// stationary, so only the explicit parameter dependence contributes.
template < PolynomialPotential P >
std::array< double, ActionSpec< P >::n_parameters > action_parameter_gradient(const ActionSpec< P >& spec,
                                                                            const TrajectorySolution< P::dimension >& sol)
{
    std::array< double, ActionSpec< P >::n_parameters > g{};
    const auto&                                        path = sol.path;
    for (std::size_t i = 0; i + 1 < path.size(); ++i)
        g[0] += detail::dist2< P::dimension >(path[i + 1], path[i]);
    g[0] *= 0.5 / sol.dt;
    for (std::size_t i = 0; i < path.size(); ++i)
    {
        const double w = (i == 0 || i + 1 == path.size()) ? 0.5 : 1.0;
        const auto   b = spec.potential.basis(path[i]);
        for (std::size_t j = 0; j < P::n_coefficients; ++j)
            g[j + 1] += w * sol.dt * b[j];
    }
    return g;
}

/// m * integral of v . dx along the path, split at the node closest to the
/// origin: first = x_in -> closest approach, second = closest approach -> x_fi.
struct SplitIntegrals
{
    double      first  = 0.0;
    double      second = 0.0;
    std::size_t split_index       = 0;
    double      approach_distance = 0.0;
};

template < int D >
SplitIntegrals split_line_integrals(double mass, const TrajectorySolution< D >& sol)
{
    SplitIntegrals out;
    const Point< D > origin{};
    double           best = std::numeric_limits< double >::infinity();
    for (std::size_t i = 0; i < sol.path.size(); ++i)
    {
        const double r2 = detail::dist2< D >(sol.path[i], origin);
        // on ties take the node nearest the middle of the path
        const auto mid = static_cast< double >(sol.path.size() - 1) / 2.0;
        if (r2 < best || (r2 == best && std::abs(static_cast< double >(i) - mid) <
                                            std::abs(static_cast< double >(out.split_index) - mid)))
        {
            best            = r2;
            out.split_index = i;
        }
    }
    out.approach_distance = std::sqrt(best);
    for (std::size_t i = 0; i + 1 < sol.path.size(); ++i)
    {
        const double seg = mass * detail::dist2< D >(sol.path[i + 1], sol.path[i]) / sol.dt;
        (i < out.split_index ? out.first : out.second) += seg;
    }
    return out;
}

struct LineIntegral
{
    double value  = 0.0; // m * integral_0^x_fi v . dx
    double change = 0.0; // |value(1.5 T) - value(T)|
    double T      = 0.0;
    double approach_distance = 0.0;
};

struct LineIntegralOptions
{
    /// the half-path integral is biased by about x^2 (T + 1) exp(-T) (harmonic case)
    double T_large = 25.0;
    /// time step of the discretized path
    double dt = 5e-3;
    /// combine dt and dt/2 as (4 fine - coarse) / 3
    bool richardson = true;
    double stability_tolerance = 1e-4;
    double tolerance = 1e-8;
};

/// m~ * integral from the origin to x_fi of v . dx along the large-T extremal
/// from -x_fi to x_fi (which passes the origin at T/2 by parity). Certified by
/// repeating at 1.5 T; throws InstabilityError if the two differ by more than
/// the stability tolerance.
template < PolynomialPotential P >
LineIntegral wavefunction_line_integral(const ActionSpec< P >& spec, const Point< P::dimension >& x_fi,
                                        const LineIntegralOptions& opt = {})
{
    constexpr int D = P::dimension;
    Point< D >    x_in{};
    bool          at_origin = true;
    for (int d = 0; d < D; ++d)
    {
        x_in[static_cast< std::size_t >(d)] = -x_fi[static_cast< std::size_t >(d)];
        at_origin                           = at_origin && x_fi[static_cast< std::size_t >(d)] == 0.0;
    }
    LineIntegral out;
    out.T = opt.T_large;
    if (at_origin)
        return out;

    auto once = [&](double T, int n_steps) {
        BvpProblem< P > p;
        p.spec      = spec;
        p.x_in      = x_in;
        p.x_fi      = x_fi;
        p.T         = T;
        p.n_steps   = n_steps;
        p.tolerance = opt.tolerance;
        return split_line_integrals(spec.mass, solve_bvp(p));
    };
    auto run = [&](double T) {
        const int  n      = 2 * std::max(32, static_cast< int >(std::lround(T / opt.dt / 2.0)));
        auto       coarse = once(T, n);
        if (!opt.richardson)
            return coarse;
        const auto fine = once(T, 2 * n);
        coarse.second   = (4.0 * fine.second - coarse.second) / 3.0;
        coarse.first    = (4.0 * fine.first - coarse.first) / 3.0;
        return coarse;
    };
    const auto a = run(opt.T_large);
    const auto b = run(1.5 * opt.T_large);
    out.value             = a.second;
    out.change            = std::abs(b.second - a.second);
    out.approach_distance = a.approach_distance;
    if (out.change > opt.stability_tolerance)
        throw InstabilityError(out.change, "line integral changes by " + format_real(out.change) +
                                               " when T_large is increased by 50%");
    return out;
}

template < int D >
void write_trajectory_csv(std::ostream& out, const TrajectorySolution< D >& sol, const Provenance& extra = {})
{
    write_provenance(out, extra);
    out << (D == 1 ? "t,x,v\n" : "t,x,y,v,vy\n");
    const std::size_t n = sol.path.size() - 1;
    for (std::size_t i = 0; i <= n; ++i)
    {
        // centered velocity inside, one-sided at the ends
        const std::size_t lo = i == 0 ? 0 : i - 1;
        const std::size_t hi = i == n ? n : i + 1;
        out << format_real(static_cast< double >(i) * sol.dt);
        for (int d = 0; d < D; ++d)
            out << ',' << format_real(sol.path[i][static_cast< std::size_t >(d)]);
        for (int d = 0; d < D; ++d)
            out << ','
                << format_real((sol.path[hi][static_cast< std::size_t >(d)] - sol.path[lo][static_cast< std::size_t >(d)]) /
                               (static_cast< double >(hi - lo) * sol.dt));
        out << '\n';
    }
}

} // namespace qaction

#endif // QACTION_TRAJECTORY_HPP
