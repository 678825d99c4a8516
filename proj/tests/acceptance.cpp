// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include "qaction/amplitudes.hpp"
#include "qaction/chaos.hpp"
#include "qaction/fit.hpp"
#include "qaction/zero_temp.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace qaction;

namespace
{

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail)
{
    std::cout << (pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << detail << std::endl;
    failures += pass ? 0 : 1;
}

/// Runs one criterion; a thrown error counts as a failure.
void criterion(int id, const std::string& name, const std::function< std::pair< bool, std::string >() >& body)
{
    try
    {
        const auto [pass, detail] = body();
        report(id, name, pass, detail);
    }
    catch (const std::exception& e)
    {
        report(id, name, false, std::string("error: ") + e.what());
    }
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string check(const std::string& label, double value, double target, double tol, bool& pass)
{
    const bool ok = std::abs(value - target) < tol;
    pass          = pass && ok;
    return label + "=" + fmt(value) + " (target " + fmt(target) + " +- " + fmt(tol) + (ok ? ")" : ", out)");
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration< double >(std::chrono::steady_clock::now() - t0).count();
}

const ActionSpec1D quartic{1.0, {0.0, 1.0, 0.01, 0.0}};
const ActionSpec2D pullen_edmonds{1.0, {0.0, 0.5, 0.05, 0.0}};

} // namespace

int main()
{
    std::cout << "acceptance: quartic 1-D (m=1, v2=1, v4=0.01), coupled 2-D (m=1, v2=0.5, v22=0.05)" << std::endl;

    // shared state, filled by earlier criteria
    std::optional< OracleSolution< Potential1D > > oracle1;
    std::optional< OracleSolution< Potential2D > > oracle2;
    std::optional< FitResult< Potential1D > >      fit1;
    std::optional< FitResult< Potential2D > >      fit2;

    criterion(1, "1-D ground-state energy", [&] {
        const auto t0 = std::chrono::steady_clock::now();
        oracle1       = solve_oracle(quartic, default_grid< 1 >());
        const double s = seconds_since(t0);
        bool         pass = s < 60.0;
        auto         d    = check("E_gr", oracle1.value().ground_energy, 0.710811, 1e-4, pass);
        return std::pair{pass, d + ", runtime " + fmt(s) + " s (limit 60)"};
    });

    criterion(2, "2-D ground-state energy and radius", [&] {
        const auto t0 = std::chrono::steady_clock::now();
        oracle2       = solve_oracle(pullen_edmonds, default_grid< 2 >());
        const double s = seconds_since(t0);
        bool         pass = s < 600.0;
        auto         d    = check("E_gr", oracle2.value().ground_energy, 1.01207, 1e-3, pass);
        d += ", " + check("r0", oracle2.value().radius, 0.8766, 1e-2, pass);
        return std::pair{pass, d + ", runtime " + fmt(s) + " s (limit 600)"};
    });

    criterion(3, "1-D fit at T=4.5", [&] {
        FitProblem< Potential1D > p;
        p.table         = sample_amplitudes(oracle1.value(), default_boundary_set< 1 >(), {4.5});
        p.initial_guess = quartic;
        fit1            = fit_quantum_action(p);
        const auto& q   = fit1.value().action;
        bool        pass = true;
        std::string d    = check("m", q.mass, 0.9990, 5e-3, pass);
        d += ", " + check("v0", q.potential.v0, 0.79863, 1e-3, pass);
        d += ", " + check("v2", q.potential.v2, 1.013, 1e-2, pass);
        d += ", " + check("v4", q.potential.v4, 0.0099, 2e-3, pass);
        d += ", " + check("v6", q.potential.v6, 0.0, 1e-3, pass);
        return std::pair{pass, d};
    });

    criterion(4, "v0(T) extrapolation", [&] {
        const std::vector< double > T_list{4.0, 4.5, 5.0, 6.0, 7.0, 8.0};
        const auto s1 = sweep_temperatures(oracle1.value(), default_boundary_set< 1 >(), T_list, quartic);
        const auto s2 = sweep_temperatures(oracle2.value(), default_boundary_set< 2 >(), T_list, pullen_edmonds);
        const auto e1 = extrapolate_v0(s1, default_extrapolation_T_min, default_extrapolation_T_max);
        const auto e2 = extrapolate_v0(s2, default_extrapolation_T_min, default_extrapolation_T_max);
        bool       pass = e1.n_points == T_list.size() && e2.n_points == T_list.size();
        std::string d   = "1-D " + check("A", e1.A, oracle1.value().ground_energy, 1e-3, pass);
        d += ", 2-D " + check("A", e2.A, oracle2.value().ground_energy, 2e-3, pass);
        d += ", window [" + fmt(e1.T_min) + ", " + fmt(e1.T_max) + "]";
        return std::pair{pass, d};
    });

    criterion(5, "closed-form quartic parameters", [&] {
        const auto q = derive_quartic_params(1.0, 1.0, 0.01, 0.7108116274, 0.99901);
        // rounded to the digits of the expected values
        auto       round_to = [](double v, double unit) { return std::round(v / unit) * unit; };
        const bool pass     = std::abs(round_to(q.v2, 1e-5) - 1.01151) < 1e-12 && std::abs(round_to(q.v4, 1e-6) - 0.009967) < 1e-13 &&
                          std::abs(round_to(q.v6, 1e-9) - 2.89e-7) < 1e-16;
        return std::pair{pass, "v2=" + fmt(q.v2) + " v4=" + fmt(q.v4) + " v6=" + fmt(q.v6) +
                                   " (expected 1.01151, 0.009967, 2.89e-07; E_gr=0.7108116274, m~=0.99901)"};
    });

    criterion(6, "2-D fit at T=4", [&] {
        FitProblem< Potential2D > p;
        p.table         = sample_amplitudes(oracle2.value(), default_boundary_set< 2 >(), {4.0});
        p.initial_guess = pullen_edmonds;
        fit2            = fit_quantum_action(p);
        const auto& q   = fit2.value().action;
        bool        pass = true;
        std::string d    = check("m", q.mass, 0.99814, 5e-3, pass);
        d += ", " + check("v0", q.potential.v0, 1.29373, 2e-3, pass);
        d += ", " + check("v2", q.potential.v2, 0.5154, 5e-3, pass);
        d += ", " + check("v22", q.potential.v22, 0.0497, 2e-3, pass);
        d += ", " + check("v4", q.potential.v4, 0.0, 3e-3, pass);
        const double dv2 = q.potential.v2 - pullen_edmonds.potential.v2;
        pass             = pass && dv2 > 0.0;
        return std::pair{pass, d + ", dv2=" + fmt(dv2) + " (must be > 0)"};
    });

    criterion(7, "wavefunction reconstruction", [&] {
        std::ostringstream sink;
        // tabulated 1-D parameters (T=4.5) against the oracle ground state on [-3, 3]
        const ActionSpec1D tab_1d{0.9990, {0.79863, 1.013, 0.0099, 0.0}};
        const auto         ref1 = oracle1.value().ground_states();
        const double       d1   = write_profile_csv_1d(sink, reconstruct_wavefunction_1d(tab_1d, oracle1.value().levels.front().grid()),
                                                       [&](double x) { return ref1.value_at({x}); }, -3.0, 3.0, {});
        // tabulated 2-D parameters (T=4) along cuts y = 0, 0.5, 1
        const ActionSpec2D tab_2d{0.99814, {1.29373, 0.5154, 0.0497, -0.0008}};
        const auto         ref2 = oracle2.value().ground_states();
        const auto         psi2 = reconstruct_wavefunction_2d(tab_2d, cut_targets({0.0, 0.5, 1.0}, 2.5, 0.1), ref2.value_at({0.0, 0.0}));
        const double       d2   = write_profile_csv_2d(sink, psi2, [&](const Point< 2 >& x) { return ref2.value_at(x); }, {});
        // harmonic cases against the exact Gaussians
        const ActionSpec1D h1{1.0, {0.5, 0.5, 0.0, 0.0}};
        const auto         g1 = reconstruct_wavefunction_1d(h1, default_grid< 1 >());
        const double       dh1 = write_profile_csv_1d(
            sink, g1, [](double x) { return std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x * x); }, -3.0, 3.0, {});
        const ActionSpec2D h2{1.0, {1.0, 0.5, 0.0, 0.0}};
        const double       c2  = 1.0 / std::sqrt(std::numbers::pi);
        const auto         g2  = reconstruct_wavefunction_2d(h2, cut_targets({0.0, 0.5, 1.0}, 2.5, 0.1), c2);
        const double       dh2 = write_profile_csv_2d(
            sink, g2, [&](const Point< 2 >& x) { return c2 * std::exp(-0.5 * (x[0] * x[0] + x[1] * x[1])); }, {});
        const bool pass = d1 < 5e-3 && psi2.complete() && d2 < 5e-2 && g2.complete() && dh1 < 1e-8 && dh2 < 1e-8;
        return std::pair{pass, "1-D max|dpsi|=" + fmt(d1) + " (< 5e-3), 2-D cuts " + fmt(d2) + " (< 5e-2, " +
                                   (psi2.complete() ? "all targets certified" : "uncertified targets") +
                                   "), harmonic 1-D " + fmt(dh1) + " 2-D " + fmt(dh2) + " (< 1e-8)"};
    });

    criterion(8, "transformation-law residual", [&] {
        const double r = max_transform_law_residual(quartic, fit1.value().action, oracle1.value().ground_energy, 0.1, 3.0);
        const ActionSpec1D h{1.0, {0.0, 0.5, 0.0, 0.0}};
        const ActionSpec1D hq{1.0, {0.5, 0.5, 0.0, 0.0}};
        const double       rh = max_transform_law_residual(h, hq, 0.5, 0.1, 3.0);
        const bool         pass = r < 1e-4 && rh < 1e-12;
        return std::pair{pass, "fitted 1-D max|residual| on [0.1, 3]=" + fmt(r) + " (< 1e-4), harmonic " + fmt(rh) + " (< 1e-12)"};
    });

    criterion(9, "Poincare section properties", [&] {
        const std::vector< double > energies{10.0, 20.0, 50.0};
        const ActionSpec2D          decoupled{1.0, {0.0, 0.5, 0.0, 0.01}};
        double                      drift = 0.0;
        auto                        run   = [&](const ActionSpec2D& spec, double E, const SeedFractions& fr, double offset) {
            SectionConfig c;
            c.spec  = spec;
            c.energy = E;
            c.seeds  = scale_seeds(spec, E, fr);
            for (auto& s : c.seeds)
                s.x += offset;
            auto out = compute_section(c);
            drift    = std::max(drift, out.max_drift());
            return out;
        };
        std::vector< double > chaos, distance, baseline;
        double                spread = 0.0;
        for (const double E : energies)
        {
            const auto fr = default_seed_fractions(pullen_edmonds, E);
            const auto cl = run(pullen_edmonds, E, fr, 0.0);
            const auto qu = run(fit2.value().action, E, fr, 0.0);
            chaos.push_back(chaos_indicator(cl));
            distance.push_back(compare_sections(cl, qu).distance);
            baseline.push_back(compare_sections(cl, run(pullen_edmonds, E, fr, 1e-6)).distance);
            spread = std::max(spread, mode_energy_spread(run(decoupled, E, default_seed_fractions(decoupled, E), 0.0)));
        }
        const bool a = drift < 1e-8;
        const bool b = spread < 1e-8;
        const bool c = chaos[0] < chaos[1] && chaos[1] < chaos[2];
        const bool d = distance[2] > baseline[2] && distance[0] < distance[1] && distance[1] < distance[2];
        std::string detail = "(a) max drift " + fmt(drift) + (a ? " ok" : " FAIL") + "; (b) integrable mode spread " + fmt(spread) +
                             (b ? " ok" : " FAIL") + "; (c) chaos indicator";
        for (const double v : chaos)
            detail += " " + fmt(v);
        detail += c ? " ok" : " FAIL";
        detail += "; (d) classical-quantum distance";
        for (std::size_t i = 0; i < energies.size(); ++i)
            detail += " " + fmt(distance[i]) + "/" + fmt(baseline[i]);
        detail += d ? " ok" : " FAIL";
        return std::pair{a && b && c && d, detail};
    });

    criterion(10, "oracle cross-validation", [&] {
        double worst1 = 0.0, worst2 = 0.0;
        for (const double T : {0.5, 1.0, 4.5})
            worst1 = std::max(worst1, cross_check_amplitudes(quartic, oracle1.value().finest(), default_boundary_set< 1 >(), TimeExtent{T}));
        for (const double T : {0.5, 1.0, 4.0})
            worst2 = std::max(worst2, cross_check_amplitudes(pullen_edmonds, oracle2.value().levels.front(), default_boundary_set< 2 >(),
                                                             TimeExtent{T}));
        // G(a, c; t1 + t2) = sum_b G(a, b; t1) G(b, c; t2) h^D
        auto semigroup = [](const auto& sd, const auto& a, const auto& c) {
            const auto fa = transition_amplitude(sd, a, TimeExtent{0.7});
            const auto fc = transition_amplitude(sd, c, TimeExtent{1.3});
            return std::abs(grid_inner(fa, fc) / spectral_amplitude(sd, a, c, TimeExtent{2.0}) - 1.0);
        };
        const double s1   = semigroup(oracle1.value().finest(), Point< 1 >{0.6}, Point< 1 >{-0.9});
        const double s2   = semigroup(oracle2.value().levels.front(), Point< 2 >{0.6, 0.0}, Point< 2 >{-0.6, 1.2});
        const bool   pass = worst1 < 1e-5 && worst2 < 1e-5 && s1 < 1e-4 && s2 < 1e-4;
        return std::pair{pass, "spectral vs propagation 1-D " + fmt(worst1) + ", 2-D " + fmt(worst2) + " (< 1e-5); semigroup 1-D " +
                                   fmt(s1) + ", 2-D " + fmt(s2) + " (< 1e-4)"};
    });

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
