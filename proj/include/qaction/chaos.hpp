#ifndef QACTION_CHAOS_HPP
#define QACTION_CHAOS_HPP

#include "qaction/errors.hpp"
#include "qaction/io.hpp"
#include "qaction/parallel.hpp"
#include "qaction/potential.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

namespace qaction
{

/// Real-time phase-space state of the 2-D flow.
struct PhaseState
{
    double x  = 0.0;
    double y  = 0.0;
    double px = 0.0;
    double py = 0.0;
    double t  = 0.0;
};

inline double hamiltonian(const ActionSpec2D& spec, const PhaseState& s) noexcept
{
    return (s.px * s.px + s.py * s.py) / (2.0 * spec.mass) + spec.potential.value({s.x, s.y});
}

/// Energy of the config measured above the potential minimum at the origin.
inline double shell_energy(const ActionSpec2D& spec, double E) noexcept
{
    return E + spec.potential.value({0.0, 0.0});
}

namespace detail
{
struct Rate
{
    double x, y, px, py;
};

inline Rate flow_rate(const ActionSpec2D& spec, const PhaseState& s) noexcept
{
    const auto g = spec.potential.gradient({s.x, s.y});
    return {s.px / spec.mass, s.py / spec.mass, -g[0], -g[1]};
}

inline PhaseState advance(const PhaseState& s, const Rate& r, double h) noexcept
{
    return {s.x + h * r.x, s.y + h * r.y, s.px + h * r.px, s.py + h * r.py, s.t};
}

// Henon's trick: integrate with y as the independent variable. Rates are
// d(x, t, px, py)/dy, stored in a Rate-like layout with y slot holding dt/dy.
inline Rate section_rate(const ActionSpec2D& spec, const PhaseState& s) noexcept
{
    const auto   g   = spec.potential.gradient({s.x, s.y});
    const double inv = spec.mass / s.py; // dt/dy
    return {s.px / s.py, inv, -g[0] * inv, -g[1] * inv};
}

inline PhaseState section_step(const ActionSpec2D& spec, const PhaseState& s, double dy) noexcept
{
    auto shift = [](const PhaseState& a, const Rate& r, double h) {
        return PhaseState{a.x + h * r.x, a.y + h, a.px + h * r.px, a.py + h * r.py, a.t + h * r.y};
    };
    const Rate k1 = section_rate(spec, s);
    const Rate k2 = section_rate(spec, shift(s, k1, 0.5 * dy));
    const Rate k3 = section_rate(spec, shift(s, k2, 0.5 * dy));
    const Rate k4 = section_rate(spec, shift(s, k3, dy));
    PhaseState out;
    out.x  = s.x + dy / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    out.y  = 0.0;
    out.px = s.px + dy / 6.0 * (k1.px + 2.0 * k2.px + 2.0 * k3.px + k4.px);
    out.py = s.py + dy / 6.0 * (k1.py + 2.0 * k2.py + 2.0 * k3.py + k4.py);
    out.t  = s.t + dy / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y);
    return out;
}

inline bool finite(const PhaseState& s) noexcept
{
    return std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.px) && std::isfinite(s.py);
}

// uniform double in [0, 1) from the top 53 bits, same on every platform
inline double unit_real(std::mt19937_64& rng) { return static_cast< double >(rng() >> 11) * 0x1.0p-53; }
} // namespace detail

/// One classical RK4 step of x' = p/m, p' = -grad V.
inline PhaseState flow_step(const ActionSpec2D& spec, const PhaseState& s, double dt)
{
    if (!(dt > 0.0))
        throw InvalidArgument("flow_step: dt must be positive");
    const auto k1 = detail::flow_rate(spec, s);
    const auto k2 = detail::flow_rate(spec, detail::advance(s, k1, 0.5 * dt));
    const auto k3 = detail::flow_rate(spec, detail::advance(s, k2, 0.5 * dt));
    const auto k4 = detail::flow_rate(spec, detail::advance(s, k3, dt));
    PhaseState out;
    out.x  = s.x + dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    out.y  = s.y + dt / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y);
    out.px = s.px + dt / 6.0 * (k1.px + 2.0 * k2.px + 2.0 * k3.px + k4.px);
    out.py = s.py + dt / 6.0 * (k1.py + 2.0 * k2.py + 2.0 * k3.py + k4.py);
    out.t  = s.t + dt;
    if (!detail::finite(out))
        throw BlowUp("flow_step: non-finite state at t = " + format_real(out.t));
    return out;
}

/// Section coordinates of a seed.
struct SectionPoint
{
    double x  = 0.0;
    double px = 0.0;
};

/// Places (x, px) on the section y = 0 with py >= 0 on the shell. `E` is
/// measured above V(0,0).
inline PhaseState seed_on_shell(const ActionSpec2D& spec, double E, const SectionPoint& seed)
{
    const double H  = shell_energy(spec, E);
    const double r2 = 2.0 * spec.mass * (H - spec.potential.value({seed.x, 0.0})) - seed.px * seed.px;
    if (r2 < 0.0)
    {
        const double deficit = -r2 / (2.0 * spec.mass);
        throw OffShellSeed(deficit, "seed (" + format_real(seed.x) + ", " + format_real(seed.px) +
                                        ") lies outside the energy shell by " + format_real(deficit));
    }
    return {seed.x, 0.0, seed.px, std::sqrt(r2), 0.0};
}

inline std::vector< PhaseState > seed_on_shell(const ActionSpec2D& spec, double E, const std::vector< SectionPoint >& seeds)
{
    std::vector< PhaseState > out;
    out.reserve(seeds.size());
    for (const auto& s : seeds)
        out.push_back(seed_on_shell(spec, E, s));
    return out;
}

/// Largest |x| on the section axis px = 0 (bisection on V(x,0) = H).
inline double section_x_extent(const ActionSpec2D& spec, double E)
{
    const double H  = shell_energy(spec, E);
    double       lo = 0.0, hi = 1.0;
    while (spec.potential.value({hi, 0.0}) < H)
    {
        hi *= 2.0;
        if (hi > 1e8)
            throw DomainError("section is not bounded along x");
    }
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i)
    {
        const double mid = 0.5 * (lo + hi);
        (spec.potential.value({mid, 0.0}) < H ? lo : hi) = mid;
    }
    return lo;
}

inline double section_px_extent(const ActionSpec2D& spec, double E)
{
    return std::sqrt(2.0 * spec.mass * E);
}

/// Seeds in units of the section extents: (u, w) in [-1, 1]^2 maps to
/// (u * x_extent, w * px_extent). The same fractions give comparable seeds for
/// different actions at one energy.
struct SeedFractions
{
    std::vector< SectionPoint > points;
};

/// `axis` seeds evenly inside the px = 0 axis plus `random` fill seeds drawn
/// inside the allowed oval of `reference`.
inline SeedFractions default_seed_fractions(const ActionSpec2D& reference, double E, int axis = 12, int random = 12,
                                            std::uint64_t rng_seed = 20240101)
{
    SeedFractions out;
    for (int k = 0; k < axis; ++k)
        out.points.push_back({-1.0 + 2.0 * (k + 1) / (axis + 1), 0.0});
    const double      xe = section_x_extent(reference, E);
    const double      pe = section_px_extent(reference, E);
    const double      H  = shell_energy(reference, E);
    std::mt19937_64   rng{rng_seed};
    int               accepted = 0;
    while (accepted < random)
    {
        const double u = 2.0 * detail::unit_real(rng) - 1.0;
        const double w = 2.0 * detail::unit_real(rng) - 1.0;
        const double x = u * xe, px = w * pe;
        // keep clear of the shell edge so the fractions stay on shell for nearby actions
        if (px * px / (2.0 * reference.mass) + reference.potential.value({x, 0.0}) - reference.potential.value({0.0, 0.0}) <
            0.9 * (H - reference.potential.value({0.0, 0.0})))
        {
            out.points.push_back({u, w});
            ++accepted;
        }
    }
    return out;
}

inline std::vector< SectionPoint > scale_seeds(const ActionSpec2D& spec, double E, const SeedFractions& f)
{
    const double xe = section_x_extent(spec, E);
    const double pe = section_px_extent(spec, E);
    std::vector< SectionPoint > out;
    out.reserve(f.points.size());
    for (const auto& p : f.points)
        out.push_back({p.x * xe, p.px * pe});
    return out;
}

struct SectionConfig
{
    ActionSpec2D spec;
    /// energy above V(0,0)
    double energy = 10.0;
    std::vector< SectionPoint > seeds;
    /// 0 selects 1e-3 * sqrt(10 / E)
    double dt            = 0.0;
    int    max_crossings = 400;
    double max_time      = 5000.0;
    /// bound on max |H - E| / E along each trajectory
    double drift_bound = 1e-8;
    /// crossings with py below this (relative to sqrt(2 m E)) are skipped
    double tangency_threshold = 1e-8;
    /// x offset of the twin trajectory used for the sensitivity test, and how
    /// long the twin is followed; twin_time 0 disables it
    double twin_offset = 1e-8;
    double twin_time   = 300.0;

    double step() const { return dt > 0.0 ? dt : 1e-3 * std::sqrt(10.0 / energy); }

    void validate() const
    {
        spec.validate();
        if (!(energy > 0.0))
            throw InvalidArgument("section energy must exceed V(0,0)");
        if (!(step() > 0.0) || max_crossings < 1 || !(max_time > 0.0) || !(drift_bound > 0.0))
            throw InvalidArgument("section config: dt, max_crossings, max_time and drift_bound must be positive");
        if (seeds.empty())
            throw InvalidArgument("section config: no seeds");
    }
};

struct SeedTrack
{
    SectionPoint seed;
    std::vector< SectionPoint > crossings;
    double max_drift  = 0.0; // relative
    double final_time = 0.0;
    int    tangencies = 0;
    /// phase-space distance to the twin after twin_time, relative to sqrt(2 m E)
    double twin_separation = 0.0;
};

struct PoincareSection
{
    ActionSpec2D spec;
    double       energy = 0.0;
    double       dt     = 0.0;
    std::string  plane  = "y=0,py>0";
    std::vector< SeedTrack > tracks;

    double max_drift() const
    {
        double d = 0.0;
        for (const auto& t : tracks)
            d = std::max(d, t.max_drift);
        return d;
    }
    std::size_t crossing_count() const
    {
        std::size_t n = 0;
        for (const auto& t : tracks)
            n += t.crossings.size();
        return n;
    }
    int tangencies() const
    {
        int n = 0;
        for (const auto& t : tracks)
            n += t.tangencies;
        return n;
    }
};

/// Integrates one seed, recording upward crossings of y = 0.
inline SeedTrack integrate_seed(const SectionConfig& cfg, const SectionPoint& seed)
{
    const auto&  spec = cfg.spec;
    const double H    = shell_energy(spec, cfg.energy);
    const double dt   = cfg.step();
    const double tiny = cfg.tangency_threshold * section_px_extent(spec, cfg.energy);
    SeedTrack    track;
    track.seed = seed;
    PhaseState s = seed_on_shell(spec, cfg.energy, seed);
    while (static_cast< int >(track.crossings.size()) < cfg.max_crossings && s.t < cfg.max_time)
    {
        const PhaseState next = flow_step(spec, s, dt);
        track.max_drift = std::max(track.max_drift, std::abs(hamiltonian(spec, next) - H) / cfg.energy);
        if (track.max_drift > cfg.drift_bound)
            throw EnergyDrift(track.max_drift, "relative energy drift " + format_real(track.max_drift) + " exceeds " +
                                                   format_real(cfg.drift_bound) + " at t = " + format_real(next.t));
        if (s.y < 0.0 && next.y >= 0.0)
        {
            if (next.py <= tiny)
                ++track.tangencies;
            else
            {
                const PhaseState hit = detail::section_step(spec, next, -next.y);
                if (hit.py > 0.0)
                    track.crossings.push_back({hit.x, hit.px});
                else
                    ++track.tangencies;
            }
        }
        s = next;
    }
    track.final_time = s.t;
    if (cfg.twin_time > 0.0)
    {
        PhaseState a = seed_on_shell(spec, cfg.energy, seed);
        PhaseState b = seed_on_shell(spec, cfg.energy, SectionPoint{seed.x + cfg.twin_offset, seed.px});
        const auto n = static_cast< long >(std::ceil(cfg.twin_time / dt));
        for (long i = 0; i < n; ++i)
        {
            a = flow_step(spec, a, dt);
            b = flow_step(spec, b, dt);
        }
        track.twin_separation = std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) +
                                          (a.px - b.px) * (a.px - b.px) + (a.py - b.py) * (a.py - b.py)) /
                                section_px_extent(spec, cfg.energy);
    }
    return track;
}

/// Poincare section of every seed; seeds run in parallel, results kept in seed order.
inline PoincareSection compute_section(const SectionConfig& cfg)
{
    cfg.validate();
    for (const auto& seed : cfg.seeds)
        (void)seed_on_shell(cfg.spec, cfg.energy, seed);
    PoincareSection out;
    out.spec   = cfg.spec;
    out.energy = cfg.energy;
    out.dt     = cfg.step();
    out.tracks = parallel_map< SeedTrack >(cfg.seeds.size(), [&](std::size_t i) { return integrate_seed(cfg, cfg.seeds[i]); });
    return out;
}

/// Energy of the x mode, px^2/2m + V(x,0) - V(0,0), at every crossing. It is
/// conserved when v22 = 0.
inline double mode_energy(const ActionSpec2D& spec, const SectionPoint& p) noexcept
{
    return p.px * p.px / (2.0 * spec.mass) + spec.potential.value({p.x, 0.0}) - spec.potential.value({0.0, 0.0});
}

/// Largest spread (max - min) of the x-mode energy over one seed's crossings, relative to E.
inline double mode_energy_spread(const PoincareSection& s)
{
    double worst = 0.0;
    for (const auto& t : s.tracks)
    {
        if (t.crossings.empty())
            continue;
        double lo = std::numeric_limits< double >::infinity(), hi = -lo;
        for (const auto& p : t.crossings)
        {
            const double e = mode_energy(s.spec, p);
            lo = std::min(lo, e);
            hi = std::max(hi, e);
        }
        worst = std::max(worst, (hi - lo) / s.energy);
    }
    return worst;
}

struct ChaosOptions
{
    /// a seed counts as chaotic when its twin separates beyond this, relative to sqrt(2 m E)
    double separation_threshold = 1e-3;
};

/// Fraction of seeds whose perturbed twin separated (see SectionConfig::twin_offset).
inline double chaos_indicator(const PoincareSection& s, const ChaosOptions& opt = {})
{
    if (s.tracks.empty())
        return 0.0;
    int chaotic = 0;
    for (const auto& t : s.tracks)
        chaotic += t.twin_separation > opt.separation_threshold ? 1 : 0;
    return static_cast< double >(chaotic) / static_cast< double >(s.tracks.size());
}

/// Occupancy counts on a bins x bins grid over [x_lo, x_hi] x [px_lo, px_hi].
struct OccupancyGrid
{
    double x_lo = 0.0, x_hi = 0.0, px_lo = 0.0, px_hi = 0.0;
    int    bins = 0;
    std::vector< int > counts; // row-major, row = px bin

    int at(int px_bin, int x_bin) const
    {
        return counts[static_cast< std::size_t >(px_bin) * static_cast< std::size_t >(bins) + static_cast< std::size_t >(x_bin)];
    }
};

inline OccupancyGrid occupancy(const PoincareSection& s, double x_lo, double x_hi, double px_lo, double px_hi, int bins)
{
    OccupancyGrid g{x_lo, x_hi, px_lo, px_hi, bins, std::vector< int >(static_cast< std::size_t >(bins) * static_cast< std::size_t >(bins), 0)};
    for (const auto& t : s.tracks)
        for (const auto& p : t.crossings)
        {
            const int i = std::clamp(static_cast< int >((p.x - x_lo) / (x_hi - x_lo) * bins), 0, bins - 1);
            const int j = std::clamp(static_cast< int >((p.px - px_lo) / (px_hi - px_lo) * bins), 0, bins - 1);
            ++g.counts[static_cast< std::size_t >(j) * static_cast< std::size_t >(bins) + static_cast< std::size_t >(i)];
        }
    return g;
}

namespace detail
{
inline std::vector< SectionPoint > cloud(const PoincareSection& s)
{
    std::vector< SectionPoint > out;
    out.reserve(s.crossing_count());
    for (const auto& t : s.tracks)
        out.insert(out.end(), t.crossings.begin(), t.crossings.end());
    return out;
}

// mean over a of the distance to the nearest point of b
inline double mean_nearest(const std::vector< SectionPoint >& a, const std::vector< SectionPoint >& b)
{
    if (a.empty())
        return 0.0;
    const std::vector< double > nearest = parallel_map< double >(a.size(), [&](std::size_t i) {
        double best = std::numeric_limits< double >::infinity();
        for (const auto& q : b)
        {
            const double dx = a[i].x - q.x, dp = a[i].px - q.px;
            best = std::min(best, dx * dx + dp * dp);
        }
        return std::sqrt(best);
    });
    double sum = 0.0;
    for (double d : nearest)
        sum += d;
    return sum / static_cast< double >(a.size());
}
} // namespace detail

struct SectionComparison
{
    double energy   = 0.0;
    double distance = 0.0; // symmetric mean nearest-neighbour distance
    /// distance divided by sqrt(2 m E), the section momentum scale
    double scaled_distance = 0.0;
    std::vector< std::size_t > counts_a, counts_b;
    double chaos_a = 0.0, chaos_b = 0.0;
    double mode_spread_a = 0.0, mode_spread_b = 0.0;
    bool   integrable_a = false, integrable_b = false;
    OccupancyGrid grid_a, grid_b;
};

struct CompareOptions
{
    int    bins                 = 64;
    double integrable_tolerance = 1e-8;
    ChaosOptions chaos;
};

inline SectionComparison compare_sections(const PoincareSection& a, const PoincareSection& b, const CompareOptions& opt = {})
{
    if (a.energy != b.energy || a.plane != b.plane)
        throw InvalidArgument("compare_sections: sections differ in energy or plane");
    const auto ca = detail::cloud(a), cb = detail::cloud(b);
    if (ca.empty() || cb.empty())
        throw InvalidArgument("compare_sections: a section has no crossings");
    SectionComparison r;
    r.energy          = a.energy;
    r.distance        = 0.5 * (detail::mean_nearest(ca, cb) + detail::mean_nearest(cb, ca));
    r.scaled_distance = r.distance / section_px_extent(a.spec, a.energy);
    for (const auto& t : a.tracks)
        r.counts_a.push_back(t.crossings.size());
    for (const auto& t : b.tracks)
        r.counts_b.push_back(t.crossings.size());
    r.chaos_a       = chaos_indicator(a, opt.chaos);
    r.chaos_b       = chaos_indicator(b, opt.chaos);
    r.mode_spread_a = mode_energy_spread(a);
    r.mode_spread_b = mode_energy_spread(b);
    r.integrable_a  = a.spec.potential.v22 == 0.0 && r.mode_spread_a < opt.integrable_tolerance;
    r.integrable_b  = b.spec.potential.v22 == 0.0 && r.mode_spread_b < opt.integrable_tolerance;
    double x_lo = std::numeric_limits< double >::infinity(), x_hi = -x_lo, p_lo = x_lo, p_hi = -x_lo;
    for (const auto* c : {&ca, &cb})
        for (const auto& p : *c)
        {
            x_lo = std::min(x_lo, p.x);
            x_hi = std::max(x_hi, p.x);
            p_lo = std::min(p_lo, p.px);
            p_hi = std::max(p_hi, p.px);
        }
    if (x_hi == x_lo)
        x_hi = x_lo + 1.0;
    if (p_hi == p_lo)
        p_hi = p_lo + 1.0;
    r.grid_a = occupancy(a, x_lo, x_hi, p_lo, p_hi, opt.bins);
    r.grid_b = occupancy(b, x_lo, x_hi, p_lo, p_hi, opt.bins);
    return r;
}

inline void write_section_csv(std::ostream& out, const PoincareSection& s, const Provenance& extra = {})
{
    write_provenance(out, extra);
    out << "# energy: " << format_real(s.energy) << "\n# plane: " << s.plane << "\n# dt: " << format_real(s.dt)
        << "\n# max_relative_drift: " << format_real(s.max_drift()) << "\n# tangencies: " << s.tangencies() << '\n';
    out << "seed_id,crossing_index,x,px\n";
    for (std::size_t k = 0; k < s.tracks.size(); ++k)
        for (std::size_t i = 0; i < s.tracks[k].crossings.size(); ++i)
            out << k << ',' << i << ',' << format_real(s.tracks[k].crossings[i].x) << ','
                << format_real(s.tracks[k].crossings[i].px) << '\n';
}

inline void write_occupancy_csv(std::ostream& out, const OccupancyGrid& g, const Provenance& extra = {})
{
    write_provenance(out, extra);
    out << "# x_range: " << format_real(g.x_lo) << ' ' << format_real(g.x_hi) << "\n# px_range: " << format_real(g.px_lo)
        << ' ' << format_real(g.px_hi) << "\n# rows: px bins ascending, columns: x bins ascending\n";
    for (int j = 0; j < g.bins; ++j)
    {
        for (int i = 0; i < g.bins; ++i)
            out << (i ? "," : "") << g.at(j, i);
        out << '\n';
    }
}

inline nlohmann::ordered_json to_json(const SectionComparison& r)
{
    nlohmann::ordered_json j;
    j["energy"]          = r.energy;
    j["distance"]        = r.distance;
    j["scaled_distance"] = r.scaled_distance;
    j["chaos_indicator"] = {r.chaos_a, r.chaos_b};
    j["mode_energy_spread"] = {r.mode_spread_a, r.mode_spread_b};
    j["integrable"]      = r.integrable_a && r.integrable_b;
    j["integrable_per_section"] = {r.integrable_a, r.integrable_b};
    j["crossings_per_seed"] = {r.counts_a, r.counts_b};
    return j;
}

} // namespace qaction

#endif // QACTION_CHAOS_HPP
