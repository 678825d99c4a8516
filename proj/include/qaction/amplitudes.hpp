#ifndef QACTION_AMPLITUDES_HPP
#define QACTION_AMPLITUDES_HPP

#include "qaction/errors.hpp"
#include "qaction/grid.hpp"
#include "qaction/io.hpp"
#include "qaction/parallel.hpp"
#include "qaction/potential.hpp"
#include "qaction/propagation.hpp"
#include "qaction/spectrum.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

namespace qaction
{

/// Grid used by the oracle unless configured otherwise.
template < int D >
Grid< D > default_grid()
{
    if constexpr (D == 1)
        return {8.0, 1601};
    else
        return {7.0, 281};
}

/// Number of grid halvings combined by Richardson extrapolation.
template < int D >
constexpr int default_richardson_levels()
{
    return D == 1 ? 3 : 2;
}

/// States kept in the spectral sum (0 = all states of the 2-D projected basis).
template < int D >
constexpr std::size_t default_state_count()
{
    return D == 1 ? 64 : 0;
}

/// 1-D: 11 points on [-1.5, 1.5]. 2-D: 5x5 lattice on [-1.2, 1.2]^2.
template < int D >
std::vector< Point< D > > default_boundary_set()
{
    std::vector< Point< D > > out;
    if constexpr (D == 1)
    {
        for (int i = 0; i <= 10; ++i)
            out.push_back({-1.5 + 0.3 * i});
    }
    else
    {
        for (int i = 0; i <= 4; ++i)
            for (int j = 0; j <= 4; ++j)
                out.push_back({-1.2 + 0.6 * i, -1.2 + 0.6 * j});
    }
    return out;
}

template < int D >
struct AmplitudeRecord
{
    Point< D > x_in{};
    Point< D > x_fi{};
    double     T = 0.0;
    double     G = 0.0;
};

template < int D >
struct AmplitudeTable
{
    std::vector< AmplitudeRecord< D > > records;
    Provenance                          provenance;

    std::vector< double > times() const
    {
        std::vector< double > t;
        for (const auto& r : records)
            if (std::find(t.begin(), t.end(), r.T) == t.end())
                t.push_back(r.T);
        std::sort(t.begin(), t.end());
        return t;
    }

    AmplitudeTable at_time(double T) const
    {
        AmplitudeTable out{{}, provenance};
        for (const auto& r : records)
            if (r.T == T)
                out.records.push_back(r);
        return out;
    }
};

/// sum_n psi_n(a) psi_n(b) exp(-E_n T); a and b must be grid nodes.
template < int D >
double spectral_amplitude(const SpectralData< D >& sd, const std::type_identity_t< Point< D > >& a,
                          const std::type_identity_t< Point< D > >& b, const TimeExtent& T)
{
    const auto            pa = sd.node_values(sd.grid().node_of(a));
    const auto            pb = sd.node_values(sd.grid().node_of(b));
    const Eigen::ArrayXd  w  = (-sd.energies().array() * T.T()).exp();
    return (pa.array() * pb.array() * w).sum();
}

/// G(., T; x_in) on every node by spectral summation.
template < int D >
GridField< D > transition_amplitude(const SpectralData< D >& sd, const std::type_identity_t< Point< D > >& x_in,
                                    const TimeExtent& T)
{
    const auto            p = sd.node_values(sd.grid().node_of(x_in));
    const Eigen::VectorXd c = (p.array() * (-sd.energies().array() * T.T()).exp()).matrix();
    return sd.combine(c);
}

template < PolynomialPotential P >
GridField< P::dimension > transition_amplitude(const ActionSpec< P >& spec, const Grid< P::dimension >& grid,
                                               const Point< P::dimension >& x_in, const TimeExtent& T,
                                               const SpectrumOptions& opt = {})
{
    const auto sd = ground_state(spec, grid, default_state_count< P::dimension >(), opt);
    return transition_amplitude(sd, x_in, T);
}

namespace detail
{

template < int D >
std::array< long long, 2 * D > pair_key(const Point< D >& a, const Point< D >& b)
{
    std::array< long long, 2 * D > k{};
    for (int d = 0; d < D; ++d)
    {
        k[static_cast< std::size_t >(d)]     = std::llround(a[static_cast< std::size_t >(d)] * 1e9);
        k[static_cast< std::size_t >(D + d)] = std::llround(b[static_cast< std::size_t >(d)] * 1e9);
    }
    return k;
}

/// Smallest key over the symmetry images of the ordered pair. 1-D uses the
/// swap only; 2-D also the eight reflections/rotations of the square.
template < int D >
std::array< long long, 2 * D > canonical_pair(const Point< D >& a, const Point< D >& b)
{
    auto best = pair_key< D >(a, b);
    auto consider = [&](const Point< D >& p, const Point< D >& q) {
        best = std::min({best, pair_key< D >(p, q), pair_key< D >(q, p)});
    };
    if constexpr (D == 1)
        consider(a, b);
    else
    {
        for (int sx = -1; sx <= 1; sx += 2)
            for (int sy = -1; sy <= 1; sy += 2)
                for (int swap = 0; swap < 2; ++swap)
                {
                    auto tf = [&](const Point< 2 >& p) -> Point< 2 > {
                        Point< 2 > r{sx * p[0], sy * p[1]};
                        if (swap)
                            std::swap(r[0], r[1]);
                        return r;
                    };
                    consider(tf(a), tf(b));
                }
    }
    return best;
}

} // namespace detail

/// Symmetry-unique unordered pairs of the boundary set, in first-seen order.
template < int D >
std::vector< std::pair< Point< D >, Point< D > > > unique_pairs(const std::vector< Point< D > >& points)
{
    std::vector< std::pair< Point< D >, Point< D > > > out;
    std::vector< std::array< long long, 2 * D > >      seen;
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i; j < points.size(); ++j)
        {
            const auto key = detail::canonical_pair< D >(points[i], points[j]);
            if (std::find(seen.begin(), seen.end(), key) != seen.end())
                continue;
            seen.push_back(key);
            out.emplace_back(points[i], points[j]);
        }
    return out;
}

/// Below this T the spectral sum of the projected 2-D basis is replaced by
/// split propagation (the truncated basis misses high-lying states).
template < int D >
constexpr double default_propagation_below()
{
    return D == 1 ? 0.0 : 0.5;
}

/// Grid halvings for the propagated amplitudes. Short times need one more than
/// the spectral levels: the lattice kernel error grows like h^2 (a - b)^2 / T^2.
template < int D >
constexpr int default_propagation_levels()
{
    return 3;
}

struct SampleOptions
{
    /// Grid halvings combined by Richardson (0 = default for the dimension).
    int                          levels = 0;
    std::optional< std::size_t > states;
    SpectrumOptions              spectrum{};
    /// Boundary points must lie within radius_factor * r0 of the origin.
    double radius_factor = 4.0;
    /// Times below this use split propagation (default per dimension).
    std::optional< double > propagation_below;
    /// Grid halvings for propagated amplitudes (0 = default for the dimension).
    int                     propagation_levels = 0;
    PropagationOptions      propagation{};
};

/// Amplitudes and ground-state data on successively refined grids.
template < PolynomialPotential P >
struct OracleSolution
{
    static constexpr int D = P::dimension;
    ActionSpec< P >                  spec{};
    std::vector< SpectralData< D > > levels;
    double                           ground_energy = 0.0; // Richardson-extrapolated
    double                           radius        = 0.0; // on the finest grid

    const SpectralData< D >& finest() const { return levels.back(); }

    /// Richardson-extrapolated spectral G(a, T; b).
    double amplitude(const Point< D >& a, const Point< D >& b, const TimeExtent& T) const
    {
        std::vector< double > g;
        for (const auto& sd : levels)
            g.push_back(spectral_amplitude(sd, a, b, T));
        return richardson(std::move(g));
    }

    /// Ground state on every level; value_at() combines them by Richardson.
    struct GroundStates
    {
        std::vector< GridField< D > > fields;

        /// `x` must be a node of the coarsest grid.
        double value_at(const Point< D >& x) const
        {
            std::vector< double > v;
            for (const auto& f : fields)
                v.push_back(f.at(f.grid.node_of(x)));
            return richardson(std::move(v));
        }
    };

    GroundStates ground_states() const
    {
        GroundStates g;
        for (const auto& sd : levels)
            g.fields.push_back(sd.eigenfunction(0));
        return g;
    }
};

template < PolynomialPotential P >
OracleSolution< P > solve_oracle(const ActionSpec< P >& spec, const Grid< P::dimension >& grid, const SampleOptions& opt = {})
{
    constexpr int D      = P::dimension;
    const int     levels = opt.levels > 0 ? opt.levels : default_richardson_levels< D >();
    const auto    states = opt.states.value_or(default_state_count< D >());

    OracleSolution< P > out;
    out.spec = spec;
    std::vector< Grid< D > > grids{grid};
    for (int l = 1; l < levels; ++l)
        grids.push_back(grids.back().refined());
    out.levels = parallel_map< SpectralData< D > >(grids.size(), [&](std::size_t l) {
        return ground_state(spec, grids[l], states, opt.spectrum);
    });
    std::vector< double > e;
    for (const auto& sd : out.levels)
        e.push_back(sd.energy(0));
    out.ground_energy = richardson(std::move(e));
    out.radius        = bohr_radius(out.finest());
    return out;
}

namespace detail
{

/// Maps the pair by a symmetry of the square so that the first point lies in
/// 0 <= y <= x; G is invariant under the map. Identity in 1-D.
template < int D >
std::pair< Point< D >, Point< D > > reduce_source(Point< D > a, Point< D > b)
{
    if constexpr (D == 2)
    {
        for (int d = 0; d < 2; ++d)
            if (a[static_cast< std::size_t >(d)] < 0.0)
            {
                a[static_cast< std::size_t >(d)] = -a[static_cast< std::size_t >(d)];
                b[static_cast< std::size_t >(d)] = -b[static_cast< std::size_t >(d)];
            }
        if (a[1] > a[0])
        {
            std::swap(a[0], a[1]);
            std::swap(b[0], b[1]);
        }
    }
    return {a, b};
}

} // namespace detail

template < PolynomialPotential P >
AmplitudeTable< P::dimension > sample_amplitudes(const OracleSolution< P >& oracle,
                                                 const std::vector< Point< P::dimension > >& boundary,
                                                 const std::vector< double >& T_list, const SampleOptions& opt = {})
{
    constexpr int D = P::dimension;
    if (boundary.empty())
        throw InvalidArgument("empty boundary set");
    if (T_list.empty())
        throw InvalidArgument("empty time list");
    for (const auto& p : boundary)
    {
        double r2 = 0.0;
        for (const double c : p)
            r2 += c * c;
        if (std::sqrt(r2) > opt.radius_factor * oracle.radius)
            throw InvalidArgument("boundary point at radius " + std::to_string(std::sqrt(r2)) + " exceeds " +
                                  std::to_string(opt.radius_factor) + " * r0 = " +
                                  std::to_string(opt.radius_factor * oracle.radius));
    }
    const double prop_below = opt.propagation_below.value_or(default_propagation_below< D >());
    std::vector< Grid< D > > prop_grids{oracle.levels.front().grid()};
    for (int l = 1; l < (opt.propagation_levels > 0 ? opt.propagation_levels : default_propagation_levels< D >()); ++l)
        prop_grids.push_back(prop_grids.back().refined());

    const auto                          pairs = unique_pairs< D >(boundary);
    std::vector< AmplitudeRecord< D > > records;
    for (const double T : T_list)
    {
        const TimeExtent t{T};
        for (const auto& [a, b] : pairs)
            records.push_back({a, b, t.T(), 0.0});
    }

    // propagated fields for every (time, reduced source, level) that needs one
    struct Job
    {
        double     T;
        Point< D > source;
        std::size_t level;
    };
    std::vector< Job > jobs;
    auto find_job = [&](double T, const Point< D >& src, std::size_t level) {
        for (std::size_t j = 0; j < jobs.size(); ++j)
            if (jobs[j].T == T && jobs[j].source == src && jobs[j].level == level)
                return j;
        return jobs.size();
    };
    for (const auto& r : records)
        if (r.T < prop_below)
        {
            const auto src = detail::reduce_source< D >(r.x_in, r.x_fi).first;
            for (std::size_t l = 0; l < prop_grids.size(); ++l)
                if (find_job(r.T, src, l) == jobs.size())
                    jobs.push_back({r.T, src, l});
        }
    const auto fields = parallel_map< GridField< D > >(jobs.size(), [&](std::size_t j) {
        return propagate_amplitude(oracle.spec, prop_grids[jobs[j].level], jobs[j].source, TimeExtent{jobs[j].T},
                                   opt.propagation);
    });

    parallel_for(records.size(), [&](std::size_t i) {
        auto& r = records[i];
        if (r.T < prop_below)
        {
            const auto [src, dst] = detail::reduce_source< D >(r.x_in, r.x_fi);
            std::vector< double > g;
            for (std::size_t l = 0; l < prop_grids.size(); ++l)
            {
                const auto& f = fields[find_job(r.T, src, l)];
                g.push_back(f.at(f.grid.node_of(dst)));
            }
            r.G = richardson(std::move(g));
        }
        else
            r.G = oracle.amplitude(r.x_in, r.x_fi, TimeExtent{r.T});
        if (!(r.G > 0.0) || !std::isfinite(r.G))
            throw NumericalError("nonpositive_amplitude", "amplitude " + format_real(r.G) + " at T = " + format_real(r.T) +
                                                              " is not positive (discretization fault)");
    });

    AmplitudeTable< D > table{std::move(records), {}};
    const auto&         g = oracle.levels.front().grid();
    table.provenance      = {{"method", "spectral sum of the finite-difference Hamiltonian, Richardson over grid halvings"},
                             {"propagation_below_T", format_real(prop_below)},
                             {"propagation_dt", format_real(opt.propagation.dt)},
                             {"propagation_levels", std::to_string(prop_grids.size())},
                             {"grid_half_extent", format_real(g.half_extent)},
                             {"grid_points", std::to_string(g.points)},
                             {"richardson_levels", std::to_string(oracle.levels.size())},
                             {"states", std::to_string(oracle.finest().size())},
                             {"E_gr", format_real(oracle.ground_energy)},
                             {"r0", format_real(oracle.radius)}};
    return table;
}

/// Solves the oracle and samples in one call.
template < PolynomialPotential P >
AmplitudeTable< P::dimension > sample_amplitudes(const ActionSpec< P >& spec, const Grid< P::dimension >& grid,
                                                 const std::vector< Point< P::dimension > >& boundary,
                                                 const std::vector< double >& T_list, const SampleOptions& opt = {})
{
    return sample_amplitudes(solve_oracle(spec, grid, opt), boundary, T_list, opt);
}

/// Largest relative difference between the spectral sum and split
/// propagation on one grid, over the symmetry-unique boundary pairs.
template < PolynomialPotential P >
double cross_check_amplitudes(const ActionSpec< P >& spec, const SpectralData< P::dimension >& sd,
                              const std::vector< Point< P::dimension > >& boundary, const TimeExtent& T,
                              const PropagationOptions& prop = {})
{
    constexpr int D     = P::dimension;
    const auto    pairs = unique_pairs< D >(boundary);
    std::vector< Point< D > > sources;
    for (const auto& pr : pairs)
        if (std::find(sources.begin(), sources.end(), pr.first) == sources.end())
            sources.push_back(pr.first);

    const auto fields = parallel_map< GridField< D > >(sources.size(), [&](std::size_t i) {
        return propagate_amplitude(spec, sd.grid(), sources[i], T, prop);
    });
    double worst = 0.0;
    for (const auto& [a, b] : pairs)
    {
        const auto   s  = static_cast< std::size_t >(std::find(sources.begin(), sources.end(), a) - sources.begin());
        const double gp = fields[s].at(sd.grid().node_of(b));
        const double gs = spectral_amplitude(sd, a, b, T);
        worst           = std::max(worst, std::abs(gp / gs - 1.0));
    }
    return worst;
}

/// h^D-weighted sum over the grid of f * g.
template < int D >
double grid_inner(const GridField< D >& f, const GridField< D >& g)
{
    double acc = 0.0;
    for (std::size_t q = 0; q < f.values.size(); ++q)
        acc += f.values[q] * g.values[q];
    return acc * f.grid.cell_volume();
}

template < int D >
void write_amplitude_csv(std::ostream& out, const AmplitudeTable< D >& table, const Provenance& extra = {})
{
    write_provenance(out, extra);
    write_provenance(out, table.provenance);
    out << (D == 1 ? "dim,x_in,x_fi,T,G\n" : "dim,x_in,y_in,x_fi,y_fi,T,G\n");
    for (const auto& r : table.records)
    {
        out << D;
        for (const double c : r.x_in)
            out << ',' << format_real(c);
        for (const double c : r.x_fi)
            out << ',' << format_real(c);
        out << ',' << format_real(r.T) << ',' << format_real(r.G) << '\n';
    }
}

template < int D >
AmplitudeTable< D > read_amplitude_csv(std::istream& in)
{
    const auto doc      = read_csv(in);
    const auto expected = D == 1 ? std::vector< std::string >{"dim", "x_in", "x_fi", "T", "G"}
                                 : std::vector< std::string >{"dim", "x_in", "y_in", "x_fi", "y_fi", "T", "G"};
    if (doc.header != expected)
        throw ConfigError("csv_schema", "amplitude table header does not match dimension " + std::to_string(D));
    AmplitudeTable< D > t;
    t.provenance = doc.provenance;
    for (const auto& row : doc.rows)
    {
        AmplitudeRecord< D > r;
        for (int d = 0; d < D; ++d)
        {
            r.x_in[static_cast< std::size_t >(d)] = parse_csv_real(row[static_cast< std::size_t >(1 + d)]);
            r.x_fi[static_cast< std::size_t >(d)] = parse_csv_real(row[static_cast< std::size_t >(1 + D + d)]);
        }
        r.T = parse_csv_real(row[static_cast< std::size_t >(1 + 2 * D)]);
        r.G = parse_csv_real(row[static_cast< std::size_t >(2 + 2 * D)]);
        t.records.push_back(r);
    }
    return t;
}

template < int D >
void write_spectrum_csv(std::ostream& out, const SpectralData< D >& sd, const Provenance& extra = {})
{
    write_provenance(out, extra);
    out << "n,E_n\n";
    for (std::size_t n = 0; n < sd.size(); ++n)
        out << n << ',' << format_real(sd.energy(n)) << '\n';
}

template < int D >
void write_ground_state_csv(std::ostream& out, const SpectralData< D >& sd, const Provenance& extra = {})
{
    write_provenance(out, extra);
    const auto  psi = sd.eigenfunction(0);
    const auto& g   = sd.grid();
    if constexpr (D == 1)
    {
        out << "x,psi0\n";
        for (int i = 0; i < g.points; ++i)
            out << format_real(g.coordinate(i)) << ',' << format_real(psi.at({i})) << '\n';
    }
    else
    {
        out << "x,y,psi0\n";
        for (int i = 0; i < g.points; ++i)
            for (int j = 0; j < g.points; ++j)
                out << format_real(g.coordinate(i)) << ',' << format_real(g.coordinate(j)) << ','
                    << format_real(psi.at({i, j})) << '\n';
    }
}

} // namespace qaction

#endif // QACTION_AMPLITUDES_HPP
