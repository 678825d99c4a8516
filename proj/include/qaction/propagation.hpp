#ifndef QACTION_PROPAGATION_HPP
#define QACTION_PROPAGATION_HPP

#include "qaction/errors.hpp"
#include "qaction/grid.hpp"
#include "qaction/potential.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <mutex>
#include <vector>

namespace qaction
{

struct PropagationOptions
{
    double dt = 0.01;
    /// Combine dt and dt/2 runs to cancel the O(dt^2) splitting error.
    bool richardson = true;
};

namespace detail
{

inline std::mutex& fftw_planner_mutex()
{
    static std::mutex m;
    return m;
}

/// DST-I plan over the interior nodes (n per axis). The transform is its own
/// inverse up to a factor 2(n+1) per axis.
template < int D >
class SinePlan
{
public:
    explicit SinePlan(int n) : n_(n)
    {
        std::size_t total = 1;
        for (int d = 0; d < D; ++d)
            total *= static_cast< std::size_t >(n);
        buffer_ = static_cast< double* >(fftw_malloc(sizeof(double) * total));
        const std::lock_guard lock{fftw_planner_mutex()};
        if constexpr (D == 1)
            plan_ = fftw_plan_r2r_1d(n, buffer_, buffer_, FFTW_RODFT00, FFTW_ESTIMATE);
        else
            plan_ = fftw_plan_r2r_2d(n, n, buffer_, buffer_, FFTW_RODFT00, FFTW_RODFT00, FFTW_ESTIMATE);
        if (plan_ == nullptr)
            throw NumericalError("fftw_plan", "could not create sine transform plan");
    }
    ~SinePlan()
    {
        const std::lock_guard lock{fftw_planner_mutex()};
        fftw_destroy_plan(plan_);
        fftw_free(buffer_);
    }
    SinePlan(const SinePlan&)            = delete;
    SinePlan& operator=(const SinePlan&) = delete;

    double* data() noexcept { return buffer_; }
    void    execute() noexcept { fftw_execute(plan_); }
    int     n() const noexcept { return n_; }

private:
    int       n_;
    double*   buffer_ = nullptr;
    fftw_plan plan_   = nullptr;
};

template < PolynomialPotential P >
GridField< P::dimension > split_propagate_once(const ActionSpec< P >& spec, const Grid< P::dimension >& grid,
                                               const std::array< int, P::dimension >& source, double T, int steps)
{
    constexpr int D  = P::dimension;
    const int     n  = grid.interior();
    const double  h  = grid.spacing();
    const double  dt = T / steps;

    std::size_t total = 1;
    for (int d = 0; d < D; ++d)
        total *= static_cast< std::size_t >(n);

    // exact FD kinetic eigenvalues per axis
    std::vector< double > lam(static_cast< std::size_t >(n));
    for (int k = 0; k < n; ++k)
        lam[static_cast< std::size_t >(k)] = (1.0 - std::cos(M_PI * (k + 1) / (n + 1))) / (spec.mass * h * h);

    // interior offset q <-> node index
    auto node = [n](std::size_t q) {
        std::array< int, D > idx{};
        for (int d = D - 1; d >= 0; --d)
        {
            idx[static_cast< std::size_t >(d)] = static_cast< int >(q % static_cast< std::size_t >(n)) + 1;
            q /= static_cast< std::size_t >(n);
        }
        return idx;
    };

    const double          norm = std::pow(2.0 * (n + 1), D);
    std::vector< double > half_v(total), kin(total);
    for (std::size_t q = 0; q < total; ++q)
    {
        const auto idx = node(q);
        double     k   = 0.0;
        for (int d = 0; d < D; ++d)
            k += lam[static_cast< std::size_t >(idx[static_cast< std::size_t >(d)] - 1)];
        half_v[q] = std::exp(-0.5 * dt * spec.potential.value(grid.point_of(idx)));
        kin[q]    = std::exp(-dt * k) / norm;
    }

    SinePlan< D > plan{n};
    double*       psi = plan.data();
    std::fill(psi, psi + total, 0.0);
    std::size_t src = 0;
    for (int d = 0; d < D; ++d)
        src = src * static_cast< std::size_t >(n) + static_cast< std::size_t >(source[static_cast< std::size_t >(d)] - 1);
    psi[src] = 1.0 / grid.cell_volume();

    for (int s = 0; s < steps; ++s)
    {
        for (std::size_t q = 0; q < total; ++q)
            psi[q] *= half_v[q];
        plan.execute();
        for (std::size_t q = 0; q < total; ++q)
            psi[q] *= kin[q];
        plan.execute();
        for (std::size_t q = 0; q < total; ++q)
            psi[q] *= half_v[q];
    }

    GridField< D > out{grid, std::vector< double >(grid.node_count(), 0.0)};
    for (std::size_t q = 0; q < total; ++q)
    {
        if (!std::isfinite(psi[q]))
            throw BlowUp("split propagation produced a non-finite value");
        out.values[grid.flat_index(node(q))] = psi[q];
    }
    return out;
}

} // namespace detail

/// G(., T; x_in) on every node from Strang splitting of exp(-H T): half
/// potential steps around an exact kinetic step in the sine basis of the
/// finite-difference Laplacian. Independent of the eigensolver.
template < PolynomialPotential P >
GridField< P::dimension > propagate_amplitude(const ActionSpec< P >& spec, const Grid< P::dimension >& grid,
                                              const Point< P::dimension >& x_in, const TimeExtent& T,
                                              const PropagationOptions& opt = {})
{
    grid.validate();
    if (!(opt.dt > 0.0))
        throw InvalidArgument("propagation step must be positive");
    const auto source = grid.node_of(x_in);
    const int  steps  = std::max(1, static_cast< int >(std::ceil(T.T() / opt.dt - 1e-9)));

    auto coarse = detail::split_propagate_once(spec, grid, source, T.T(), steps);
    if (!opt.richardson)
        return coarse;
    const auto fine = detail::split_propagate_once(spec, grid, source, T.T(), 2 * steps);
    for (std::size_t q = 0; q < coarse.values.size(); ++q)
        coarse.values[q] = (4.0 * fine.values[q] - coarse.values[q]) / 3.0;
    return coarse;
}

} // namespace qaction

#endif // QACTION_PROPAGATION_HPP
