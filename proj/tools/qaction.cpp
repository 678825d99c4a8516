// qaction: command-line driver for the quantum action pipeline.
//
//   qaction --config action.cfg [--out DIR] [--seed N] [--threads N] <command> [options]
//
// Exit codes: 0 success, 1 numerical failure, 2 usage or configuration error.
// Errors are reported on stderr as one JSON object {"error": code, "message": ...}.

#include "qaction/chaos.hpp"
#include "qaction/config.hpp"
#include "qaction/fit.hpp"
#include "qaction/zero_temp.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace fs = std::filesystem;
using namespace qaction;
using json = nlohmann::ordered_json;

namespace
{

constexpr int exit_numerical = 1;
constexpr int exit_usage     = 2;

std::string label(double v)
{
    std::ostringstream out;
    out << v;
    return out.str();
}

std::string vector_text(const std::vector< double >& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? " " : "") + format_real(v[i]);
    return s;
}

template < class S >
using potential_of = typename std::decay_t< S >::potential_type;

struct Context
{
    std::string   config_path;
    std::string   out_dir = ".";
    std::uint64_t seed    = 20240101;
    std::size_t   threads = 1;

    std::string   config_hash;
    AnyActionSpec spec;

    void load()
    {
        if (config_path.empty())
            throw ConfigError("config_missing", "--config is required");
        const auto text = read_text_file(config_path);
        config_hash     = hex64(fnv1a(text));
        spec            = parse_action_config(text);
    }

    Provenance provenance(const std::string& command, Provenance extra = {}) const
    {
        Provenance p{{"tool", "qaction " + std::string(version)}, {"command", command}, {"config_hash", config_hash}};
        p.insert(p.end(), extra.begin(), extra.end());
        return p;
    }

    std::ofstream open(const std::string& name) const
    {
        fs::create_directories(out_dir);
        std::ofstream f{fs::path(out_dir) / name};
        if (!f)
            throw ConfigError("output_not_writable", "cannot write '" + (fs::path(out_dir) / name).string() + "'");
        return f;
    }

    void write_json(const std::string& name, const std::string& command, json body) const
    {
        json j;
        j["tool"]        = "qaction " + std::string(version);
        j["command"]     = command;
        j["config_hash"] = config_hash;
        for (auto& [k, v] : body.items())
            j[k] = v;
        open(name) << j.dump(2) << '\n';
    }
};

/// Action from a `key = value` file or a fit JSON written by `qaction fit`.
AnyActionSpec read_action_source(const std::string& path)
{
    const auto text  = read_text_file(path);
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos || text[first] != '{')
        return parse_action_config(text);
    nlohmann::json j;
    try
    {
        j = nlohmann::json::parse(text);
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ConfigError("config_syntax", path + ": " + e.what());
    }
    const int dim = j.value("dimension", 0);
    if (dim == 1)
        return action_from_json< Potential1D >(j);
    if (dim == 2)
        return action_from_json< Potential2D >(j);
    throw ConfigError("config_invalid_value", path + ": 'dimension' must be 1 or 2");
}

template < int D >
double default_fit_time()
{
    return D == 1 ? 4.5 : 4.0;
}

struct OracleArgs
{
    std::vector< double > T;
    int                   points      = 0;
    double                half_extent = 0.0;
    int                   levels      = 0;
    bool                  cross_check = false;
};

template < int D >
Grid< D > grid_from(const OracleArgs& a)
{
    auto g = default_grid< D >();
    if (a.points > 0)
        g.points = a.points;
    if (a.half_extent > 0.0)
        g.half_extent = a.half_extent;
    g.validate();
    return g;
}

template < class P >
OracleSolution< P > oracle_for(const ActionSpec< P >& spec, const OracleArgs& a)
{
    SampleOptions so;
    so.levels = a.levels;
    return solve_oracle(spec, grid_from< P::dimension >(a), so);
}

int cmd_oracle(const Context& ctx, const OracleArgs& a)
{
    return std::visit(
        [&](const auto& spec) {
            using P         = potential_of< decltype(spec) >;
            constexpr int D = P::dimension;
            const auto    oracle = oracle_for(spec, a);
            const auto    T_list = a.T.empty() ? std::vector< double >{default_fit_time< D >()} : a.T;
            const auto    boundary = default_boundary_set< D >();
            SampleOptions so;
            so.levels        = a.levels;
            const auto table = sample_amplitudes(oracle, boundary, T_list, so);

            const auto prov = ctx.provenance("oracle", {{"E_gr", format_real(oracle.ground_energy)},
                                                        {"r0", format_real(oracle.radius)}});
            {
                auto f = ctx.open("spectrum.csv");
                write_spectrum_csv(f, oracle.finest(), prov);
            }
            {
                auto f = ctx.open("ground_state.csv");
                write_ground_state_csv(f, oracle.finest(), prov);
            }
            {
                auto f = ctx.open("amplitudes.csv");
                write_amplitude_csv(f, table, prov);
            }
            std::cout << "E_gr=" << format_real(oracle.ground_energy) << '\n';
            std::cout << "r0=" << format_real(oracle.radius) << '\n';
            if (a.cross_check)
                for (const double T : T_list)
                    std::cout << "cross_check_T" << label(T) << '='
                              << format_real(cross_check_amplitudes(spec, oracle.finest(), boundary, TimeExtent{T}))
                              << '\n';
            return 0;
        },
        ctx.spec);
}

struct FitArgs
{
    OracleArgs               oracle;
    double                   T = 0.0;
    std::string              amplitudes;
    std::string              initial;
    std::vector< std::string > fixed;
    int                      n_steps = 2048;
};

template < class P >
FitProblem< P > fit_problem(const ActionSpec< P >& classical, const FitArgs& a, double T)
{
    constexpr int   D = P::dimension;
    FitProblem< P > fp;
    fp.n_steps       = a.n_steps;
    fp.initial_guess = classical;
    if (!a.initial.empty())
    {
        const auto init = read_action_source(a.initial);
        if (!std::holds_alternative< ActionSpec< P > >(init))
            throw ConfigError("config_invalid_value", "--initial has a different dimension than --config");
        fp.initial_guess = std::get< ActionSpec< P > >(init);
    }
    for (const auto& name : a.fixed)
    {
        bool found = false;
        for (std::size_t k = 0; k < ActionSpec< P >::n_parameters; ++k)
            if (ActionSpec< P >::parameter_name(k) == name)
            {
                fp.free[k] = false;
                found      = true;
            }
        if (!found)
            throw ConfigError("config_invalid_value", "unknown parameter '" + name + "' in --fix");
    }
    if (!a.amplitudes.empty())
    {
        std::ifstream in{a.amplitudes};
        if (!in)
            throw ConfigError("config_not_found", "cannot open '" + a.amplitudes + "'");
        auto table = read_amplitude_csv< D >(in);
        std::erase_if(table.records, [&](const auto& r) { return r.T != T; });
        if (table.records.empty())
            throw ConfigError("config_invalid_value", "amplitude file has no records at T = " + format_real(T));
        fp.table = std::move(table);
    }
    else
    {
        const auto oracle = oracle_for(classical, a.oracle);
        fp.table          = sample_amplitudes(oracle, default_boundary_set< D >(), {T});
    }
    return fp;
}

int cmd_fit(const Context& ctx, const FitArgs& a)
{
    return std::visit(
        [&](const auto& spec) {
            using P         = potential_of< decltype(spec) >;
            constexpr int D = P::dimension;
            const double  T = a.T > 0.0 ? a.T : default_fit_time< D >();
            const auto    fp  = fit_problem(spec, a, T);
            const auto    fit = fit_quantum_action(fp);
            const auto    name = "fit_T" + label(T);
            {
                auto f = ctx.open(name + ".csv");
                write_provenance(f, ctx.provenance("fit"));
                f << "T,tau,param_name,value,stderr\n";
                write_fit_rows(f, fit);
            }
            ctx.write_json(name + ".json", "fit", to_json(fit));
            const auto theta = fit.action.parameters();
            for (std::size_t k = 0; k < theta.size(); ++k)
                std::cout << ActionSpec< P >::parameter_name(k) << '=' << format_real(theta[k]) << " +- "
                          << format_real(fit.stderr_[k]) << '\n';
            std::cout << "residual=" << format_real(fit.residual) << '\n';
            return 0;
        },
        ctx.spec);
}

struct SweepArgs
{
    OracleArgs            oracle;
    std::vector< double > T;
    int                   n_steps = 2048;
    double                T_min   = default_extrapolation_T_min;
    double                T_max   = default_extrapolation_T_max;
};

template < class P >
json sweep_json(const std::vector< SweepEntry< P > >& sweep, double E_gr)
{
    json j;
    j["E_gr_oracle"] = E_gr;
    json entries     = json::array();
    for (const auto& e : sweep)
    {
        if (e.fit)
            entries.push_back(to_json(*e.fit));
        else
            entries.push_back(json{{"T", e.T}, {"error", e.error_code}, {"message", e.error}});
    }
    j["fits"] = entries;
    return j;
}

template < class P >
std::vector< SweepEntry< P > > run_sweep(const Context& ctx, const ActionSpec< P >& spec, const SweepArgs& a,
                                         double& E_gr)
{
    const auto   oracle = oracle_for(spec, a.oracle);
    SweepOptions opt;
    opt.n_steps      = a.n_steps;
    const auto Ts    = a.T.empty() ? default_sweep_times() : a.T;
    auto       sweep = sweep_temperatures(oracle, default_boundary_set< P::dimension >(), Ts, spec, opt);
    E_gr             = oracle.ground_energy;
    {
        auto f = ctx.open("sweep.csv");
        write_sweep_csv(f, sweep, ctx.provenance("sweep", {{"E_gr", format_real(E_gr)}}));
    }
    ctx.write_json("sweep.json", "sweep", sweep_json(sweep, E_gr));
    return sweep;
}

template < class P >
int report_sweep(const std::vector< SweepEntry< P > >& sweep)
{
    int failures = 0;
    for (const auto& e : sweep)
    {
        if (e.fit)
            std::cout << "T=" << label(e.T) << " v0=" << format_real(e.fit->action.potential.v0) << '\n';
        else
        {
            std::cout << "T=" << label(e.T) << " failed: " << e.error_code << '\n';
            ++failures;
        }
    }
    return failures;
}

int cmd_sweep(const Context& ctx, const SweepArgs& a)
{
    return std::visit(
        [&](const auto& spec) {
            double     E_gr  = 0.0;
            const auto sweep = run_sweep(ctx, spec, a, E_gr);
            return report_sweep(sweep) > 0 ? exit_numerical : 0;
        },
        ctx.spec);
}

struct ExtrapolateArgs
{
    SweepArgs   sweep;
    std::string sweep_file;
    double      tolerance = 0.0;
};

int cmd_extrapolate(const Context& ctx, const ExtrapolateArgs& a)
{
    std::vector< std::pair< double, double > > pts;
    double                                     E_gr     = 0.0;
    int                                        failures = 0;
    int                                        dim      = 0;
    if (!a.sweep_file.empty())
    {
        nlohmann::json j;
        try
        {
            j = nlohmann::json::parse(read_text_file(a.sweep_file));
        }
        catch (const nlohmann::json::exception& e)
        {
            throw ConfigError("config_syntax", a.sweep_file + ": " + e.what());
        }
        E_gr = j.value("E_gr_oracle", 0.0);
        for (const auto& f : j.at("fits"))
            if (f.contains("parameters"))
            {
                pts.emplace_back(f.at("T").get< double >(), f.at("parameters").at("v0").get< double >());
                dim = f.value("dimension", 0);
            }
    }
    else
    {
        std::visit(
            [&](const auto& spec) {
                using P          = potential_of< decltype(spec) >;
                dim              = P::dimension;
                const auto sweep = run_sweep(ctx, spec, a.sweep, E_gr);
                failures         = report_sweep(sweep);
                for (const auto& e : sweep)
                    if (e.fit)
                        pts.emplace_back(e.T, e.fit->action.potential.v0);
            },
            ctx.spec);
    }
    const auto ex = extrapolate_v0(pts, a.sweep.T_min, a.sweep.T_max);
    json       body = to_json(ex);
    if (E_gr > 0.0)
    {
        const double tol = a.tolerance > 0.0 ? a.tolerance : (dim == 2 ? 2e-3 : 1e-3);
        const auto   r   = check_energy_identity(ex.A, E_gr, tol);
        body["E_gr_oracle"] = E_gr;
        body["difference"]  = r.difference;
        body["tolerance"]   = r.tolerance;
        body["pass"]        = r.pass;
    }
    ctx.write_json("extrapolation.json", "extrapolate", body);
    std::cout << "A=" << format_real(ex.A) << "\nB=" << format_real(ex.B) << "\nC=" << format_real(ex.C) << '\n';
    if (E_gr > 0.0)
        std::cout << "E_gr=" << format_real(E_gr) << '\n';
    return failures > 0 ? exit_numerical : 0;
}

struct AnalyticArgs
{
    OracleArgs  oracle;
    std::string quantum;
    double      E_gr  = 0.0;
    double      x_max = 3.0;
};

int analytic_1d(const Context& ctx, const ActionSpec1D& classical, const ActionSpec1D& quantum, const AnalyticArgs& a)
{
    const auto   oracle = oracle_for(classical, a.oracle);
    const double E_gr   = a.E_gr > 0.0 ? a.E_gr : oracle.ground_energy;
    const auto   psi    = reconstruct_wavefunction_1d(quantum, oracle.levels.front().grid());
    const auto   ref    = oracle.ground_states();
    double       worst  = 0.0;
    {
        auto f = ctx.open("wavefunction_1d.csv");
        worst  = write_profile_csv_1d(f, psi, [&](double x) { return ref.value_at({x}); }, -a.x_max, a.x_max,
                                      ctx.provenance("analytic", {{"E_gr", format_real(E_gr)}}));
    }
    json body;
    body["dimension"] = 1;
    body["E_gr"]      = E_gr;
    body["wavefunction"] = {{"x_range", {-a.x_max, a.x_max}}, {"max_abs_diff", worst}};
    body["transform_law"] = {{"x_range", {0.1, a.x_max}},
                             {"max_abs_residual", max_transform_law_residual(classical, quantum, E_gr, 0.1, a.x_max)}};
    const auto& c = classical.potential;
    if (c.v6 == 0.0 && c.v0 == 0.0)
    {
        const auto q = derive_quartic_params(classical.mass, c.v2, c.v4, E_gr, quantum.mass);
        body["derived_quartic"] = {{"m_tilde", quantum.mass}, {"v2", q.v2}, {"v4", q.v4}, {"v6", q.v6}};
    }
    const auto id         = check_energy_identity(quantum.potential.v0, E_gr, 1e-3);
    body["energy_identity"] = {{"v0", id.value}, {"difference", id.difference}};
    ctx.write_json("analytic.json", "analytic", body);
    std::cout << "max_abs_diff=" << format_real(worst) << '\n';
    std::cout << "transform_law_residual=" << format_real(body["transform_law"]["max_abs_residual"].get< double >()) << '\n';
    if (body.contains("derived_quartic"))
        std::cout << "derived v2=" << format_real(body["derived_quartic"]["v2"].get< double >())
                  << " v4=" << format_real(body["derived_quartic"]["v4"].get< double >())
                  << " v6=" << format_real(body["derived_quartic"]["v6"].get< double >()) << '\n';
    return 0;
}

int analytic_2d(const Context& ctx, const ActionSpec2D& classical, const ActionSpec2D& quantum, const AnalyticArgs& a)
{
    const auto   oracle  = oracle_for(classical, a.oracle);
    const auto   ref     = oracle.ground_states();
    const double psi0    = ref.value_at({0.0, 0.0});
    const double x_max   = std::min(a.x_max, 2.5);
    const auto   targets = cut_targets({0.0, 0.5, 1.0}, x_max, 0.1);
    const auto   psi     = reconstruct_wavefunction_2d(quantum, targets, psi0);
    double       worst   = 0.0;
    {
        auto f = ctx.open("wavefunction_2d.csv");
        worst  = write_profile_csv_2d(f, psi, [&](const Point< 2 >& p) { return ref.value_at(p); },
                                      ctx.provenance("analytic", {{"E_gr", format_real(oracle.ground_energy)}}));
    }
    std::size_t failed = 0;
    for (const auto& p : psi.points)
        failed += p.ok ? 0 : 1;
    json body;
    body["dimension"]    = 2;
    body["E_gr"]         = oracle.ground_energy;
    body["psi_origin"]   = psi0;
    body["wavefunction"] = {{"cuts_y", {0.0, 0.5, 1.0}}, {"x_max", x_max}, {"max_abs_diff", worst},
                            {"failed_targets", failed}};
    const auto id           = check_energy_identity(quantum.potential.v0, oracle.ground_energy, 2e-3);
    body["energy_identity"] = {{"v0", id.value}, {"difference", id.difference}};
    ctx.write_json("analytic.json", "analytic", body);
    std::cout << "max_abs_diff=" << format_real(worst) << '\n';
    if (failed > 0)
        std::cout << "failed_targets=" << failed << '\n';
    return failed > 0 ? exit_numerical : 0;
}

int cmd_analytic(const Context& ctx, const AnalyticArgs& a)
{
    const auto quantum = a.quantum.empty() ? ctx.spec : read_action_source(a.quantum);
    if (quantum.index() != ctx.spec.index())
        throw ConfigError("config_invalid_value", "--quantum has a different dimension than --config");
    if (const auto* c = std::get_if< ActionSpec1D >(&ctx.spec))
        return analytic_1d(ctx, *c, std::get< ActionSpec1D >(quantum), a);
    return analytic_2d(ctx, std::get< ActionSpec2D >(ctx.spec), std::get< ActionSpec2D >(quantum), a);
}

struct SectionArgs
{
    std::vector< double > energies;
    std::string           quantum;
    double                tau        = 0.0;
    int                   crossings  = 400;
    double                dt         = 0.0;
    int                   axis_seeds = 12, random_seeds = 12;
    bool                  baseline   = true;
    double                baseline_offset = 1e-6;
    int                   n_steps   = 2048;
};

const ActionSpec2D& classical_2d(const Context& ctx)
{
    const auto* c = std::get_if< ActionSpec2D >(&ctx.spec);
    if (!c)
        throw ConfigError("config_invalid_value", "Poincare sections need a 2-D action");
    return *c;
}

/// Quantum action for the sections: from --quantum, fitted at T = 1/tau, or none.
std::optional< std::pair< ActionSpec2D, std::string > > quantum_for_sections(const Context& ctx, const SectionArgs& a)
{
    if (!a.quantum.empty())
    {
        const auto q = read_action_source(a.quantum);
        if (!std::holds_alternative< ActionSpec2D >(q))
            throw ConfigError("config_invalid_value", "--quantum must be a 2-D action");
        return std::pair{std::get< ActionSpec2D >(q), std::string("quantum")};
    }
    if (a.tau > 0.0)
    {
        const auto& classical = classical_2d(ctx);
        const double T        = 1.0 / a.tau;
        const auto   oracle   = solve_oracle(classical, default_grid< 2 >());
        FitProblem< Potential2D > fp;
        fp.table         = sample_amplitudes(oracle, default_boundary_set< 2 >(), {T});
        fp.initial_guess = classical;
        fp.n_steps       = a.n_steps;
        const auto fit   = fit_quantum_action(fp);
        ctx.write_json("fit_T" + label(T) + ".json", "fit", to_json(fit));
        return std::pair{fit.action, "tau" + label(a.tau)};
    }
    return std::nullopt;
}

SectionConfig section_config(const ActionSpec2D& spec, double E, const SeedFractions& fr, const SectionArgs& a)
{
    SectionConfig c;
    c.spec          = spec;
    c.energy        = E;
    c.seeds         = scale_seeds(spec, E, fr);
    c.max_crossings = a.crossings;
    c.dt            = a.dt;
    return c;
}

void write_section(const Context& ctx, const PoincareSection& s, const std::string& name, const std::string& command,
                   const std::string& source)
{
    auto f = ctx.open(name);
    write_section_csv(f, s, ctx.provenance(command, {{"source", source}, {"action", vector_text({s.spec.mass, s.spec.potential.v0, s.spec.potential.v2, s.spec.potential.v22, s.spec.potential.v4})}}));
}

std::vector< double > section_energies(const SectionArgs& a)
{
    return a.energies.empty() ? std::vector< double >{10.0, 20.0, 50.0} : a.energies;
}

int cmd_poincare(const Context& ctx, const SectionArgs& a)
{
    const auto& classical = classical_2d(ctx);
    const auto  quantum   = quantum_for_sections(ctx, a);
    const auto& spec      = quantum ? quantum->first : classical;
    const auto  source    = quantum ? quantum->second : std::string("classical");
    for (const double E : section_energies(a))
    {
        const auto fr = default_seed_fractions(classical, E, a.axis_seeds, a.random_seeds, ctx.seed);
        const auto s  = compute_section(section_config(spec, E, fr, a));
        write_section(ctx, s, "section_E" + label(E) + "_" + source + ".csv", "poincare", source);
        std::cout << "E=" << label(E) << " crossings=" << s.crossing_count()
                  << " max_relative_drift=" << format_real(s.max_drift()) << " chaos_indicator=" << format_real(chaos_indicator(s))
                  << '\n';
    }
    return 0;
}

int cmd_compare(const Context& ctx, const SectionArgs& a)
{
    const auto& classical = classical_2d(ctx);
    const auto  quantum   = quantum_for_sections(ctx, a);
    const auto& other     = quantum ? quantum->first : classical;
    const auto  source    = quantum ? quantum->second : std::string("classical");
    for (const double E : section_energies(a))
    {
        const auto fr = default_seed_fractions(classical, E, a.axis_seeds, a.random_seeds, ctx.seed);
        const auto sa = compute_section(section_config(classical, E, fr, a));
        const auto sb = compute_section(section_config(other, E, fr, a));
        const auto r  = compare_sections(sa, sb);
        const auto tag = "E" + label(E);
        write_section(ctx, sa, "section_" + tag + "_classical.csv", "compare", "classical");
        write_section(ctx, sb, "section_" + tag + "_" + source + ".csv", "compare", source);
        {
            auto f = ctx.open("occupancy_" + tag + "_classical.csv");
            write_occupancy_csv(f, r.grid_a, ctx.provenance("compare"));
        }
        {
            auto f = ctx.open("occupancy_" + tag + "_" + source + ".csv");
            write_occupancy_csv(f, r.grid_b, ctx.provenance("compare"));
        }
        json body = to_json(r);
        body["sections"] = {"classical", source};
        body["plane"]    = sa.plane;
        body["max_relative_drift"] = {sa.max_drift(), sb.max_drift()};
        if (a.baseline)
        {
            auto cfg = section_config(classical, E, fr, a);
            for (auto& s : cfg.seeds)
                s.x += a.baseline_offset;
            const auto base = compare_sections(sa, compute_section(cfg));
            body["baseline_distance"] = base.distance;
            body["baseline_offset"]   = a.baseline_offset;
            body["exceeds_baseline"]  = r.distance > base.distance;
        }
        ctx.write_json("compare_" + tag + ".json", "compare", body);
        std::cout << "E=" << label(E) << " distance=" << format_real(r.distance);
        if (a.baseline)
            std::cout << " baseline=" << format_real(body["baseline_distance"].get< double >());
        std::cout << " integrable=" << (body["integrable"].get< bool >() ? "true" : "false") << '\n';
    }
    return 0;
}

void error_json(const std::string& code, const std::string& message)
{
    std::cerr << json{{"error", code}, {"message", message}}.dump() << '\n';
}

void add_oracle_options(CLI::App* cmd, OracleArgs& a)
{
    cmd->add_option("--points", a.points, "Grid points per axis of the coarsest level (odd)");
    cmd->add_option("--half-extent", a.half_extent, "Grid half width L, domain [-L, L]");
    cmd->add_option("--levels", a.levels, "Grid refinements combined by Richardson extrapolation");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Quantum action toolkit: oracle amplitudes, fits, zero-temperature checks and Poincare sections"};
    app.set_version_flag("--version", std::string(version));
    app.require_subcommand(1);

    Context ctx;
    app.add_option("--config", ctx.config_path, "Action file (key = value)");
    app.add_option("--out", ctx.out_dir, "Output directory")->capture_default_str();
    app.add_option("--seed", ctx.seed, "Seed of the section seeding generator")->capture_default_str();
    app.add_option("--threads", ctx.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

    OracleArgs oracle_args;
    auto*      oracle = app.add_subcommand("oracle", "Spectrum, ground state and transition amplitudes");
    oracle->add_option("--T", oracle_args.T, "Imaginary times of the amplitude table");
    oracle->add_flag("--cross-check", oracle_args.cross_check, "Compare spectral and propagation amplitudes");
    add_oracle_options(oracle, oracle_args);

    FitArgs fit_args;
    auto*   fit = app.add_subcommand("fit", "Fit the quantum action at one T");
    fit->add_option("--T", fit_args.T, "Imaginary time (default 4.5 in 1-D, 4 in 2-D)");
    fit->add_option("--amplitudes", fit_args.amplitudes, "Amplitude CSV from `oracle` instead of computing it");
    fit->add_option("--initial", fit_args.initial, "Initial guess (action file or fit JSON)");
    fit->add_option("--fix", fit_args.fixed, "Parameters held at the initial guess (m, v0, v2, ...)");
    fit->add_option("--n-steps", fit_args.n_steps, "Time steps of each trajectory")->capture_default_str();
    add_oracle_options(fit, fit_args.oracle);

    SweepArgs sweep_args;
    auto*     sweep = app.add_subcommand("sweep", "Fit over a list of temperatures");
    sweep->add_option("--T", sweep_args.T, "Ascending imaginary times (default 0.25 ... 8)");
    sweep->add_option("--n-steps", sweep_args.n_steps, "Time steps of each trajectory")->capture_default_str();
    add_oracle_options(sweep, sweep_args.oracle);

    ExtrapolateArgs ex_args;
    auto*           ex = app.add_subcommand("extrapolate", "Extrapolate v0(T) = A + B/T + C/T^2");
    ex->add_option("--sweep", ex_args.sweep_file, "sweep.json from an earlier run (otherwise the sweep is run)");
    ex->add_option("--T", ex_args.sweep.T, "Sweep times when the sweep is run here");
    ex->add_option("--T-min", ex_args.sweep.T_min, "Lower end of the fit window")->capture_default_str();
    ex->add_option("--T-max", ex_args.sweep.T_max, "Upper end of the fit window")->capture_default_str();
    ex->add_option("--tolerance", ex_args.tolerance, "Tolerance of |A - E_gr| (default 1e-3 in 1-D, 2e-3 in 2-D)");
    add_oracle_options(ex, ex_args.sweep.oracle);

    AnalyticArgs an_args;
    auto*        an = app.add_subcommand("analytic", "Zero-temperature wavefunction and transformation-law checks");
    an->add_option("--quantum", an_args.quantum, "Quantum action (action file or fit JSON)");
    an->add_option("--E-gr", an_args.E_gr, "Ground-state energy (default: oracle)");
    an->add_option("--x-max", an_args.x_max, "Half width of the compared profile")->capture_default_str();
    add_oracle_options(an, an_args.oracle);

    SectionArgs sec_args;
    auto add_section_options = [&](CLI::App* cmd) {
        cmd->add_option("--energy", sec_args.energies, "Energies above the potential minimum (default 10 20 50)");
        cmd->add_option("--quantum", sec_args.quantum, "Quantum action (action file or fit JSON)");
        cmd->add_option("--tau", sec_args.tau, "Fit the quantum action at temperature tau = 1/T");
        cmd->add_option("--crossings", sec_args.crossings, "Section crossings per seed")->capture_default_str();
        cmd->add_option("--dt", sec_args.dt, "RK4 step (default 1e-3 sqrt(10/E))");
        cmd->add_option("--axis-seeds", sec_args.axis_seeds, "Seeds on the px = 0 axis")->capture_default_str();
        cmd->add_option("--random-seeds", sec_args.random_seeds, "Random on-shell seeds")->capture_default_str();
    };
    auto* poincare = app.add_subcommand("poincare", "Poincare sections y = 0, py > 0");
    add_section_options(poincare);
    auto* compare = app.add_subcommand("compare", "Classical versus quantum Poincare sections");
    add_section_options(compare);
    compare->add_flag("!--no-baseline", sec_args.baseline, "Skip the perturbed-seed classical baseline");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::Success& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e);
        error_json("usage", e.what());
        return exit_usage;
    }

    try
    {
        thread_count() = ctx.threads;
        ctx.load();
        if (oracle->parsed())
            return cmd_oracle(ctx, oracle_args);
        if (fit->parsed())
            return cmd_fit(ctx, fit_args);
        if (sweep->parsed())
            return cmd_sweep(ctx, sweep_args);
        if (ex->parsed())
            return cmd_extrapolate(ctx, ex_args);
        if (an->parsed())
            return cmd_analytic(ctx, an_args);
        if (poincare->parsed())
            return cmd_poincare(ctx, sec_args);
        return cmd_compare(ctx, sec_args);
    }
    catch (const Error& e)
    {
        error_json(e.code(), e.what());
        return e.is_usage_error() ? exit_usage : exit_numerical;
    }
    catch (const std::filesystem::filesystem_error& e)
    {
        error_json("io_error", e.what());
        return exit_usage;
    }
}
