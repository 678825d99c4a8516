#ifndef QACTION_FIT_HPP
#define QACTION_FIT_HPP

#include "qaction/amplitudes.hpp"
#include "qaction/errors.hpp"
#include "qaction/io.hpp"
#include "qaction/parallel.hpp"
#include "qaction/potential.hpp"
#include "qaction/trajectory.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace qaction
{

template < PolynomialPotential P >
struct FitProblem
{
    static constexpr int         D  = P::dimension;
    static constexpr std::size_t NP = ActionSpec< P >::n_parameters;

    /// Records at a single T.
    AmplitudeTable< D > table;
    ActionSpec< P >     initial_guess{};
    /// Which of (m, coefficients...) are fitted; the rest stay at the guess.
    std::array< bool, NP > free = [] {
        std::array< bool, NP > f{};
        f.fill(true);
        return f;
    }();
    /// Per-record weights (empty = unit weights).
    std::vector< double > weights;

    int    n_steps        = 2048;
    double bvp_tolerance  = 1e-8;
    int    max_iterations = 60;
    /// Fitted potential must rise monotonically out to this multiple of the
    /// largest boundary radius.
    double confinement_factor = 1.5;
};

template < PolynomialPotential P >
struct FitResult
{
    static constexpr std::size_t NP = ActionSpec< P >::n_parameters;

    double          T = 0.0;
    ActionSpec< P > action{};
    /// ln Z~ (fixed to 0: it is degenerate with v~0; see the README)
    double                   log_z       = 0.0;
    bool                     log_z_fixed = true;
    std::array< double, NP > stderr_{};
    Eigen::MatrixXd          covariance;
    /// sqrt(sum w r^2 / sum w) of the log-amplitude misfit
    double residual         = 0.0;
    double objective        = 0.0;
    double gradient_norm    = 0.0;
    double condition_number = 0.0;
    int    iterations       = 0;
    std::size_t n_records   = 0;

    double tau() const { return 1.0 / T; }
};

namespace detail
{

template < PolynomialPotential P >
struct Linearization
{
    Eigen::VectorXd residual; // ln G + Sigma
    Eigen::MatrixXd jacobian; // d(model)/d(theta) = -dSigma/dtheta, all parameters
    std::vector< std::vector< Point< P::dimension > > > paths;
};

template < PolynomialPotential P >
Linearization< P > linearize(const FitProblem< P >& p, const ActionSpec< P >& spec,
                             const std::vector< std::vector< Point< P::dimension > > >* warm)
{
    constexpr std::size_t NP = ActionSpec< P >::n_parameters;
    const auto&           rec = p.table.records;
    Linearization< P >    lin;
    lin.residual.resize(static_cast< Eigen::Index >(rec.size()));
    lin.jacobian.resize(static_cast< Eigen::Index >(rec.size()), static_cast< Eigen::Index >(NP));
    lin.paths.resize(rec.size());
    parallel_for(rec.size(), [&](std::size_t k) {
        BvpProblem< P > bp;
        bp.spec      = spec;
        bp.x_in      = rec[k].x_in;
        bp.x_fi      = rec[k].x_fi;
        bp.T         = rec[k].T;
        bp.n_steps   = p.n_steps;
        bp.tolerance = p.bvp_tolerance;
        if (warm != nullptr && !(*warm)[k].empty())
            bp.initial_path = (*warm)[k];
        TrajectorySolution< P::dimension > sol;
        try
        {
            sol = solve_bvp(bp);
        }
        catch (const NumericalError& e)
        {
            throw NumericalError(e.code(), std::string(e.what()) + " (record " + std::to_string(k) + ")");
        }
        const auto g = action_parameter_gradient(spec, sol);
        lin.residual(static_cast< Eigen::Index >(k)) = std::log(rec[k].G) + sol.action;
        for (std::size_t j = 0; j < NP; ++j)
            lin.jacobian(static_cast< Eigen::Index >(k), static_cast< Eigen::Index >(j)) = -g[j];
        lin.paths[k] = std::move(sol.path);
    });
    return lin;
}

template < PolynomialPotential P >
double boundary_radius(const AmplitudeTable< P::dimension >& t)
{
    double r = 0.0;
    for (const auto& rec : t.records)
        for (const auto* pt : {&rec.x_in, &rec.x_fi})
        {
            double s = 0.0;
            for (const double c : *pt)
                s += c * c;
            r = std::max(r, std::sqrt(s));
        }
    return r;
}

} // namespace detail

/// Weighted least squares in log-amplitude space,
///   min sum_k w_k (ln G_k + Sigma~_k(theta))^2,
/// with Z~ = 1, by Levenberg-Marquardt. Sigma~ comes from solve_bvp and its
/// parameter derivatives are exact (the path is stationary). Uncertainties
/// are the linearized covariance scaled by the residual variance.
template < PolynomialPotential P >
FitResult< P > fit_quantum_action(const FitProblem< P >& p)
{
    constexpr std::size_t NP = ActionSpec< P >::n_parameters;
    const auto&           rec = p.table.records;
    if (rec.empty())
        throw InvalidArgument("empty amplitude table");
    const double T = rec.front().T;
    for (const auto& r : rec)
    {
        if (r.T != T)
            throw InvalidArgument("fit table mixes several times");
        if (!(r.G > 0.0))
            throw InvalidArgument("fit table contains a nonpositive amplitude");
    }
    std::vector< std::size_t > idx;
    for (std::size_t j = 0; j < NP; ++j)
        if (p.free[j])
            idx.push_back(j);
    const auto nf = static_cast< Eigen::Index >(idx.size());
    if (rec.size() < 2 * idx.size())
        throw InvalidArgument("need at least twice as many records as free parameters");
    Eigen::VectorXd w = Eigen::VectorXd::Ones(static_cast< Eigen::Index >(rec.size()));
    if (!p.weights.empty())
    {
        if (p.weights.size() != rec.size())
            throw InvalidArgument("weights size does not match the table");
        for (std::size_t k = 0; k < rec.size(); ++k)
        {
            if (!(p.weights[k] > 0.0))
                throw InvalidArgument("weights must be positive");
            w(static_cast< Eigen::Index >(k)) = p.weights[k];
        }
    }
    const double radius = p.confinement_factor * detail::boundary_radius< P >(p.table);

    auto reduced = [&](const Eigen::MatrixXd& J) {
        Eigen::MatrixXd Jf(J.rows(), nf);
        for (Eigen::Index j = 0; j < nf; ++j)
            Jf.col(j) = J.col(static_cast< Eigen::Index >(idx[static_cast< std::size_t >(j)]));
        return Jf;
    };
    auto objective_of = [&](const Eigen::VectorXd& r) { return (w.array() * r.array().square()).sum(); };

    ActionSpec< P > spec = p.initial_guess;
    auto            lin  = detail::linearize(p, spec, nullptr);
    double          obj  = objective_of(lin.residual);
    double          lambda = 1e-6;
    int             it     = 0;
    bool            converged = false;
    for (; it < p.max_iterations; ++it)
    {
        const Eigen::MatrixXd Jf   = reduced(lin.jacobian);
        const Eigen::VectorXd grad = 2.0 * Jf.transpose() * (w.asDiagonal() * lin.residual);
        if (grad.norm() < 1e-8 * (1.0 + obj))
        {
            converged = true;
            break;
        }
        // residual r = lnG - model, model linear in delta: r - Jf delta
        const Eigen::MatrixXd A     = Jf.transpose() * w.asDiagonal() * Jf;
        const Eigen::VectorXd b     = Jf.transpose() * (w.asDiagonal() * lin.residual);
        const Eigen::VectorXd scale = A.diagonal().cwiseSqrt().cwiseMax(1e-300);
        const Eigen::MatrixXd As    = scale.cwiseInverse().asDiagonal() * A * scale.cwiseInverse().asDiagonal();
        const Eigen::VectorXd bs    = scale.cwiseInverse().asDiagonal() * b;

        bool accepted = false;
        for (int tries = 0; tries < 30 && !accepted; ++tries)
        {
            const Eigen::MatrixXd M     = As + lambda * Eigen::MatrixXd::Identity(nf, nf);
            const Eigen::VectorXd delta = scale.cwiseInverse().asDiagonal() * M.ldlt().solve(bs);
            auto                  theta = spec.parameters();
            for (Eigen::Index j = 0; j < nf; ++j)
                theta[idx[static_cast< std::size_t >(j)]] += delta(j);
            const auto trial = ActionSpec< P >::from_parameters(theta);
            if (!(trial.mass > 0.0) || !trial.potential.increasing_within(radius))
            {
                lambda *= 10.0;
                continue;
            }
            std::optional< detail::Linearization< P > > tl;
            try
            {
                tl = detail::linearize(p, trial, &lin.paths);
            }
            catch (const NumericalError&)
            {
                lambda *= 10.0;
                continue;
            }
            const double tobj = objective_of(tl->residual);
            if (tobj <= obj)
            {
                const double change = delta.cwiseAbs().maxCoeff();
                spec                = trial;
                lin                 = std::move(*tl);
                const double prev   = obj;
                obj                 = tobj;
                lambda              = std::max(lambda / 10.0, 1e-12);
                accepted            = true;
                if (change < 1e-13 || prev - tobj <= 1e-16 * (1.0 + prev))
                    converged = true;
            }
            else
                lambda *= 10.0;
        }
        if (!accepted)
        {
            // no decrease possible: at the optimum to roundoff, or stuck
            const Eigen::VectorXd g2 = 2.0 * reduced(lin.jacobian).transpose() * (w.asDiagonal() * lin.residual);
            converged = g2.norm() < 1e-6 * (1.0 + obj);
            break;
        }
        if (converged)
            break;
    }
    if (!spec.potential.increasing_within(radius))
        throw DomainError("fitted potential is not confining over the boundary region");
    if (!converged)
        throw NonConvergence("quantum action fit did not converge in " + std::to_string(p.max_iterations) + " iterations");

    FitResult< P > out;
    out.T         = T;
    out.action    = spec;
    out.n_records = rec.size();
    out.iterations = it;
    out.objective  = obj;
    const Eigen::MatrixXd Jf = reduced(lin.jacobian);
    out.gradient_norm        = (2.0 * Jf.transpose() * (w.asDiagonal() * lin.residual)).norm();
    out.residual             = std::sqrt(obj / w.sum());

    Eigen::JacobiSVD< Eigen::MatrixXd > svd(Jf);
    const auto&                         sv = svd.singularValues();
    out.condition_number                   = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1)
                                                                     : std::numeric_limits< double >::infinity();

    const double          dof   = static_cast< double >(rec.size()) - static_cast< double >(nf);
    const double          sigma2 = obj / dof;
    const Eigen::MatrixXd A     = Jf.transpose() * w.asDiagonal() * Jf;
    const Eigen::MatrixXd cov_f = sigma2 * A.ldlt().solve(Eigen::MatrixXd::Identity(nf, nf));
    out.covariance              = Eigen::MatrixXd::Zero(static_cast< Eigen::Index >(NP), static_cast< Eigen::Index >(NP));
    for (Eigen::Index a = 0; a < nf; ++a)
        for (Eigen::Index b = 0; b < nf; ++b)
            out.covariance(static_cast< Eigen::Index >(idx[static_cast< std::size_t >(a)]),
                           static_cast< Eigen::Index >(idx[static_cast< std::size_t >(b)])) = 0.5 * (cov_f(a, b) + cov_f(b, a));
    for (std::size_t j = 0; j < NP; ++j)
        out.stderr_[j] = std::sqrt(std::max(0.0, out.covariance(static_cast< Eigen::Index >(j), static_cast< Eigen::Index >(j))));
    return out;
}

/// Model amplitudes Z~ exp(-Sigma~) of a fitted action for the table's records.
template < PolynomialPotential P >
std::vector< double > model_amplitudes(const FitResult< P >& fit, const AmplitudeTable< P::dimension >& table,
                                       int n_steps = 2048, double tolerance = 1e-8)
{
    return parallel_map< double >(table.records.size(), [&](std::size_t k) {
        BvpProblem< P > bp;
        bp.spec      = fit.action;
        bp.x_in      = table.records[k].x_in;
        bp.x_fi      = table.records[k].x_fi;
        bp.T         = table.records[k].T;
        bp.n_steps   = n_steps;
        bp.tolerance = tolerance;
        return std::exp(fit.log_z - solve_bvp(bp).action);
    });
}

template < PolynomialPotential P >
struct SweepEntry
{
    double                          T = 0.0;
    std::optional< FitResult< P > > fit;
    std::string                     error_code;
    std::string                     error;
};

/// Temperatures of the default sweep, T = 0.25 ... 8.
inline std::vector< double > default_sweep_times()
{
    return {0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 6.0, 7.0, 8.0};
}

/// Default window of the v~0(T) extrapolation.
inline constexpr double default_extrapolation_T_min = 4.0;
inline constexpr double default_extrapolation_T_max = 8.0;

struct SweepOptions
{
    int    n_steps       = 2048;
    double bvp_tolerance = 1e-8;
    int    max_iterations = 60;
};

/// One fit per T (ascending), each started from the previous successful
/// optimum; the first from the classical action. Failures are recorded per T
/// and the sweep goes on.
template < PolynomialPotential P >
std::vector< SweepEntry< P > > sweep_temperatures(const OracleSolution< P >& oracle,
                                                  const std::vector< Point< P::dimension > >& boundary,
                                                  const std::vector< double >& T_list, const ActionSpec< P >& classical,
                                                  const SweepOptions& opt = {}, const SampleOptions& sample = {})
{
    for (std::size_t i = 0; i < T_list.size(); ++i)
    {
        TimeExtent{T_list[i]};
        if (i > 0 && !(T_list[i] > T_list[i - 1]))
            throw InvalidArgument("sweep times must be strictly ascending");
    }
    std::vector< SweepEntry< P > > out;
    ActionSpec< P >                seed = classical;
    for (const double T : T_list)
    {
        SweepEntry< P > e;
        e.T = T;
        try
        {
            FitProblem< P > fp;
            fp.table          = sample_amplitudes(oracle, boundary, {T}, sample);
            fp.initial_guess  = seed;
            fp.n_steps        = opt.n_steps;
            fp.bvp_tolerance  = opt.bvp_tolerance;
            fp.max_iterations = opt.max_iterations;
            e.fit             = fit_quantum_action(fp);
            seed              = e.fit->action;
        }
        catch (const Error& err)
        {
            e.error_code = err.code();
            e.error      = err.what();
        }
        out.push_back(std::move(e));
    }
    return out;
}

struct V0Extrapolation
{
    double      A = 0.0, B = 0.0, C = 0.0;
    double      T_min = 0.0, T_max = 0.0;
    double      residual = 0.0; // RMS misfit of v~0(T)
    std::size_t n_points = 0;
};

/// Linear least squares of v0(T) on {1, 1/T, 1/T^2} over T in [T_min, T_max].
inline V0Extrapolation extrapolate_v0(const std::vector< std::pair< double, double > >& v0_of_T, double T_min, double T_max)
{
    std::vector< std::pair< double, double > > pts;
    for (const auto& pr : v0_of_T)
        if (pr.first >= T_min && pr.first <= T_max)
            pts.push_back(pr);
    if (pts.size() < 4)
        throw InvalidArgument("extrapolation window needs at least 4 temperatures, has " + std::to_string(pts.size()));
    Eigen::MatrixXd X(static_cast< Eigen::Index >(pts.size()), 3);
    Eigen::VectorXd y(static_cast< Eigen::Index >(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i)
    {
        const double inv = 1.0 / pts[i].first;
        X.row(static_cast< Eigen::Index >(i)) << 1.0, inv, inv * inv;
        y(static_cast< Eigen::Index >(i)) = pts[i].second;
    }
    const Eigen::VectorXd c = X.colPivHouseholderQr().solve(y);
    V0Extrapolation       e;
    e.A        = c(0);
    e.B        = c(1);
    e.C        = c(2);
    e.T_min    = T_min;
    e.T_max    = T_max;
    e.n_points = pts.size();
    e.residual = std::sqrt((X * c - y).squaredNorm() / static_cast< double >(pts.size()));
    return e;
}

template < PolynomialPotential P >
V0Extrapolation extrapolate_v0(const std::vector< SweepEntry< P > >& sweep, double T_min, double T_max)
{
    std::vector< std::pair< double, double > > pts;
    for (const auto& e : sweep)
        if (e.fit)
            pts.emplace_back(e.T, e.fit->action.potential.v0);
    return extrapolate_v0(pts, T_min, T_max);
}

template < PolynomialPotential P >
void write_fit_rows(std::ostream& out, const FitResult< P >& f)
{
    const auto theta = f.action.parameters();
    for (std::size_t j = 0; j < theta.size(); ++j)
        out << format_real(f.T) << ',' << format_real(f.tau()) << ',' << ActionSpec< P >::parameter_name(j) << ','
            << format_real(theta[j]) << ',' << format_real(f.stderr_[j]) << '\n';
    out << format_real(f.T) << ',' << format_real(f.tau()) << ",lnZ," << format_real(f.log_z) << ",0\n";
}

template < PolynomialPotential P >
void write_sweep_csv(std::ostream& out, const std::vector< SweepEntry< P > >& sweep, const Provenance& extra = {})
{
    write_provenance(out, extra);
    for (const auto& e : sweep)
        if (!e.fit)
            out << "# failed T " << format_real(e.T) << ": " << e.error_code << '\n';
    out << "T,tau,param_name,value,stderr\n";
    for (const auto& e : sweep)
        if (e.fit)
            write_fit_rows(out, *e.fit);
}

template < PolynomialPotential P >
nlohmann::ordered_json to_json(const FitResult< P >& f)
{
    nlohmann::ordered_json j;
    j["dimension"] = P::dimension;
    j["T"]         = f.T;
    j["tau"]       = f.tau();
    const auto theta = f.action.parameters();
    for (std::size_t k = 0; k < theta.size(); ++k)
        j["parameters"][std::string(ActionSpec< P >::parameter_name(k))] = theta[k];
    for (std::size_t k = 0; k < theta.size(); ++k)
        j["stderr"][std::string(ActionSpec< P >::parameter_name(k))] = f.stderr_[k];
    j["lnZ"]       = f.log_z;
    j["lnZ_fixed"] = f.log_z_fixed;
    std::vector< std::vector< double > > cov;
    for (Eigen::Index a = 0; a < f.covariance.rows(); ++a)
    {
        cov.emplace_back();
        for (Eigen::Index b = 0; b < f.covariance.cols(); ++b)
            cov.back().push_back(f.covariance(a, b));
    }
    j["covariance"]       = cov;
    j["residual_rms"]     = f.residual;
    j["objective"]        = f.objective;
    j["gradient_norm"]    = f.gradient_norm;
    j["condition_number"] = f.condition_number;
    j["iterations"]       = f.iterations;
    j["records"]          = f.n_records;
    j["uncertainty_method"] = "linearized covariance scaled by residual variance";
    return j;
}

/// Action from the `parameters` object written by to_json(FitResult).
template < PolynomialPotential P >
ActionSpec< P > action_from_json(const nlohmann::json& j)
{
    if (!j.contains("parameters") || !j["parameters"].is_object())
        throw ConfigError("config_invalid_value", "fit JSON has no 'parameters' object");
    std::array< double, ActionSpec< P >::n_parameters > theta{};
    for (std::size_t k = 0; k < theta.size(); ++k)
    {
        const std::string name{ActionSpec< P >::parameter_name(k)};
        if (!j["parameters"].contains(name) || !j["parameters"][name].is_number())
            throw ConfigError("config_missing_key", "fit JSON lacks parameter '" + name + "'");
        theta[k] = j["parameters"][name].template get< double >();
    }
    auto spec = ActionSpec< P >::from_parameters(theta);
    spec.validate();
    return spec;
}

inline nlohmann::ordered_json to_json(const V0Extrapolation& e)
{
    nlohmann::ordered_json j;
    j["A"]        = e.A;
    j["B"]        = e.B;
    j["C"]        = e.C;
    j["T_min"]    = e.T_min;
    j["T_max"]    = e.T_max;
    j["residual"] = e.residual;
    j["points"]   = e.n_points;
    return j;
}

} // namespace qaction

#endif // QACTION_FIT_HPP
