#ifndef QACTION_SPECTRUM_HPP
#define QACTION_SPECTRUM_HPP

#include "qaction/errors.hpp"
#include "qaction/grid.hpp"
#include "qaction/potential.hpp"

#include <Eigen/Dense>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

namespace qaction
{

struct SpectrumOptions
{
    /// Basis functions per axis for the 2-D tensor-product solve.
    int basis_per_axis = 48;
    /// Max |psi0| allowed on the outermost interior nodes.
    double leakage_threshold = 1e-8;
};

namespace detail
{

/// Lowest k eigenpairs of the symmetric tridiagonal matrix (diag, off).
/// Eigenvectors are orthonormal columns of `vectors`.
inline void tridiagonal_lowest(std::vector< double > diag, std::vector< double > off, int k, Eigen::VectorXd& values,
                               Eigen::MatrixXd& vectors)
{
    const auto n = static_cast< lapack_int >(diag.size());
    if (k < 1 || k > n)
        throw InvalidArgument("requested " + std::to_string(k) + " eigenpairs of a " + std::to_string(n) + "-point problem");
    off.resize(static_cast< std::size_t >(n)); // dstevr wants length n workspace for e
    values.resize(n);
    vectors.resize(n, k);
    std::vector< lapack_int > support(2 * static_cast< std::size_t >(k));
    lapack_int                found = 0;
    const lapack_int          info  = LAPACKE_dstevr(LAPACK_COL_MAJOR, 'V', 'I', n, diag.data(), off.data(), 0.0, 0.0, 1, k,
                                                     0.0, &found, values.data(), vectors.data(), n, support.data());
    if (info != 0 || found != k)
        throw NonConvergence("tridiagonal eigensolver failed (info=" + std::to_string(info) + ")");
    values.conservativeResize(k);
}

/// Fixes the sign so that the column has positive sum.
inline void positive_orientation(Eigen::Ref< Eigen::VectorXd > v)
{
    if (v.sum() < 0.0)
        v = -v;
}

/// Separable 1-D operator -(1/2m) d^2/dx^2 + w(x) on the interior nodes.
template < class W >
void axis_operator(const Grid1D& grid, double mass, W&& w, std::vector< double >& diag, std::vector< double >& off)
{
    const int    n  = grid.interior();
    const double h  = grid.spacing();
    const double kd = 1.0 / (mass * h * h);
    diag.resize(static_cast< std::size_t >(n));
    off.assign(static_cast< std::size_t >(n - 1), -0.5 * kd);
    for (int i = 0; i < n; ++i)
        diag[static_cast< std::size_t >(i)] = kd + w(grid.coordinate(i + 1));
}

} // namespace detail

template < int D >
class SpectralData;

/// Eigenpairs of the 1-D finite-difference Hamiltonian. Eigenfunctions are
/// stored on the interior nodes and normalized so that sum psi^2 h = 1.
template <>
class SpectralData< 1 >
{
public:
    SpectralData() = default;
    SpectralData(Grid1D grid, Eigen::VectorXd energies, Eigen::MatrixXd states)
        : grid_(grid), energies_(std::move(energies)), states_(std::move(states))
    {
    }

    const Grid1D&          grid() const noexcept { return grid_; }
    std::size_t            size() const noexcept { return static_cast< std::size_t >(energies_.size()); }
    const Eigen::VectorXd& energies() const noexcept { return energies_; }
    double                 energy(std::size_t n) const { return energies_(static_cast< Eigen::Index >(n)); }

    /// psi_n at every grid node, boundary included.
    GridField< 1 > eigenfunction(std::size_t n) const
    {
        GridField< 1 > f{grid_, std::vector< double >(grid_.node_count(), 0.0)};
        for (int i = 0; i < grid_.interior(); ++i)
            f.values[static_cast< std::size_t >(i + 1)] = states_(i, static_cast< Eigen::Index >(n));
        return f;
    }

    /// (psi_0(node), psi_1(node), ...)
    Eigen::VectorXd node_values(const std::array< int, 1 >& node) const { return states_.row(node[0] - 1).transpose(); }

    /// sum_n c_n psi_n over the grid
    GridField< 1 > combine(const Eigen::VectorXd& c) const
    {
        GridField< 1 > f{grid_, std::vector< double >(grid_.node_count(), 0.0)};
        const Eigen::VectorXd v = states_ * c;
        for (int i = 0; i < grid_.interior(); ++i)
            f.values[static_cast< std::size_t >(i + 1)] = v(i);
        return f;
    }

    double orthonormality_residual() const
    {
        const Eigen::MatrixXd gram = grid_.spacing() * states_.transpose() * states_;
        return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
    }

private:
    Grid1D          grid_{};
    Eigen::VectorXd energies_;
    Eigen::MatrixXd states_;
};

/// Eigenpairs of the 2-D finite-difference Hamiltonian, solved in the
/// tensor-product basis of the lowest M eigenvectors of the separable part
/// v0 + v2 x^2 + v4 x^4 (per axis). The x^2 y^2 coupling conserves the
/// parity of each axis, so the projected matrix splits into four blocks.
template <>
class SpectralData< 2 >
{
public:
    struct Sector
    {
        std::vector< int > ix, iy;    // basis index pairs in this block
        Eigen::MatrixXd    vectors;   // block eigenvectors (columns)
        Eigen::VectorXd    values;
    };
    struct StateRef
    {
        int sector;
        int column;
    };

    SpectralData() = default;
    SpectralData(Grid2D grid, Eigen::MatrixXd axis_basis, std::vector< Sector > sectors, std::vector< StateRef > states)
        : grid_(grid), basis_(std::move(axis_basis)), sectors_(std::move(sectors)), states_(std::move(states))
    {
        energies_.resize(static_cast< Eigen::Index >(states_.size()));
        for (std::size_t n = 0; n < states_.size(); ++n)
            energies_(static_cast< Eigen::Index >(n)) = sectors_[states_[n].sector].values(states_[n].column);
    }

    const Grid2D&          grid() const noexcept { return grid_; }
    std::size_t            size() const noexcept { return states_.size(); }
    const Eigen::VectorXd& energies() const noexcept { return energies_; }
    double                 energy(std::size_t n) const { return energies_(static_cast< Eigen::Index >(n)); }
    int                    basis_per_axis() const noexcept { return static_cast< int >(basis_.cols()); }

    GridField< 2 > eigenfunction(std::size_t n) const
    {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast< Eigen::Index >(size()));
        c(static_cast< Eigen::Index >(n)) = 1.0;
        return combine(c);
    }

    Eigen::VectorXd node_values(const std::array< int, 2 >& node) const
    {
        const auto ux = basis_.row(node[0] - 1);
        const auto uy = basis_.row(node[1] - 1);
        const double inv_h = 1.0 / grid_.spacing();

        std::vector< Eigen::VectorXd > per_sector(sectors_.size());
        for (std::size_t s = 0; s < sectors_.size(); ++s)
        {
            const auto&     sec = sectors_[s];
            Eigen::VectorXd prod(static_cast< Eigen::Index >(sec.ix.size()));
            for (std::size_t k = 0; k < sec.ix.size(); ++k)
                prod(static_cast< Eigen::Index >(k)) = ux(sec.ix[k]) * uy(sec.iy[k]);
            per_sector[s] = sec.vectors.transpose() * prod * inv_h;
        }
        Eigen::VectorXd out(static_cast< Eigen::Index >(size()));
        for (std::size_t n = 0; n < states_.size(); ++n)
            out(static_cast< Eigen::Index >(n)) = per_sector[states_[n].sector](states_[n].column);
        return out;
    }

    GridField< 2 > combine(const Eigen::VectorXd& c) const
    {
        const int       m = basis_per_axis();
        Eigen::MatrixXd coeff = Eigen::MatrixXd::Zero(m, m);
        std::vector< Eigen::VectorXd > weights(sectors_.size());
        for (std::size_t s = 0; s < sectors_.size(); ++s)
            weights[s] = Eigen::VectorXd::Zero(sectors_[s].values.size());
        for (std::size_t n = 0; n < states_.size(); ++n)
            weights[states_[n].sector](states_[n].column) += c(static_cast< Eigen::Index >(n));
        for (std::size_t s = 0; s < sectors_.size(); ++s)
        {
            const Eigen::VectorXd v = sectors_[s].vectors * weights[s];
            for (std::size_t k = 0; k < sectors_[s].ix.size(); ++k)
                coeff(sectors_[s].ix[k], sectors_[s].iy[k]) += v(static_cast< Eigen::Index >(k));
        }
        const Eigen::MatrixXd interior = basis_ * coeff * basis_.transpose() / grid_.spacing();
        GridField< 2 >        f{grid_, std::vector< double >(grid_.node_count(), 0.0)};
        for (int i = 0; i < grid_.interior(); ++i)
            for (int j = 0; j < grid_.interior(); ++j)
                f.values[grid_.flat_index({i + 1, j + 1})] = interior(i, j);
        return f;
    }

    double orthonormality_residual() const
    {
        double worst = 0.0;
        for (const auto& sec : sectors_)
        {
            const Eigen::MatrixXd gram = sec.vectors.transpose() * sec.vectors;
            worst = std::max(worst, (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff());
        }
        const Eigen::MatrixXd gram = basis_.transpose() * basis_;
        return std::max(worst, (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff());
    }

    /// Keeps the lowest k states (all when k == 0 or k >= size()).
    SpectralData truncated(std::size_t k) const
    {
        if (k == 0 || k >= size())
            return *this;
        return {grid_, basis_, sectors_, std::vector< StateRef >(states_.begin(), states_.begin() + static_cast< std::ptrdiff_t >(k))};
    }

private:
    Grid2D                  grid_{};
    Eigen::MatrixXd         basis_;
    std::vector< Sector >   sectors_;
    std::vector< StateRef > states_;
    Eigen::VectorXd         energies_;
};

namespace detail
{

template < int D >
double boundary_magnitude(const GridField< D >& psi)
{
    const auto& g     = psi.grid;
    double      worst = 0.0;
    if constexpr (D == 1)
    {
        worst = std::max(std::abs(psi.values[1]), std::abs(psi.values[static_cast< std::size_t >(g.points - 2)]));
    }
    else
    {
        const int lo = 1, hi = g.points - 2;
        for (int i = lo; i <= hi; ++i)
        {
            worst = std::max({worst, std::abs(psi.at({lo, i})), std::abs(psi.at({hi, i})), std::abs(psi.at({i, lo})),
                              std::abs(psi.at({i, hi}))});
        }
    }
    return worst;
}

template < int D >
void check_ground_state(const SpectralData< D >& sd, const SpectrumOptions& opt)
{
    const auto   psi0    = sd.eigenfunction(0);
    const double leakage = boundary_magnitude(psi0);
    if (leakage > opt.leakage_threshold)
        throw BoundaryLeakage(leakage, "ground state reaches the grid boundary (|psi0| = " + std::to_string(leakage) +
                                           "); enlarge the half extent");
    const double peak = *std::max_element(psi0.values.begin(), psi0.values.end());
    const double low  = *std::min_element(psi0.values.begin(), psi0.values.end());
    if (low < -1e-10 * peak)
        throw NonConvergence("ground state changes sign");
}

} // namespace detail

/// Lowest k eigenpairs of H = -(1/2m) d^2/dx^2 + V on the grid
/// (second-order central differences, Dirichlet boundary).
inline SpectralData< 1 > ground_state(const ActionSpec1D& spec, const Grid1D& grid, std::size_t k,
                                      const SpectrumOptions& opt = {})
{
    grid.validate();
    std::vector< double > diag, off;
    detail::axis_operator(grid, spec.mass, [&](double x) { return spec.potential.value({x}); }, diag, off);
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
    detail::tridiagonal_lowest(std::move(diag), std::move(off), static_cast< int >(std::min< std::size_t >(k, grid.interior())), values,
                               vectors);
    detail::positive_orientation(vectors.col(0));
    vectors /= std::sqrt(grid.spacing());
    SpectralData< 1 > sd{grid, std::move(values), std::move(vectors)};
    detail::check_ground_state(sd, opt);
    return sd;
}

/// 2-D counterpart; k == 0 keeps every state of the projected problem.
inline SpectralData< 2 > ground_state(const ActionSpec2D& spec, const Grid2D& grid, std::size_t k,
                                      const SpectrumOptions& opt = {})
{
    grid.validate();
    const int m = opt.basis_per_axis;
    if (m < 2 || m > grid.interior())
        throw InvalidArgument("basis_per_axis out of range");

    const auto& pot = spec.potential;
    std::vector< double > diag, off;
    detail::axis_operator(
        Grid1D{grid.half_extent, grid.points}, spec.mass,
        [&](double x) { return pot.v2 * x * x + pot.v4 * x * x * x * x; }, diag, off);
    Eigen::VectorXd axis_energy;
    Eigen::MatrixXd basis;
    detail::tridiagonal_lowest(std::move(diag), std::move(off), m, axis_energy, basis);
    for (int i = 0; i < m; ++i)
    {
        // even states positive at the center, odd states rising through it
        const int  c    = grid.interior() / 2;
        const bool even = i % 2 == 0;
        const double probe = even ? basis(c, i) : basis(c + 1, i) - basis(c - 1, i);
        if (probe < 0.0)
            basis.col(i) = -basis.col(i);
    }

    Eigen::VectorXd x2(grid.interior());
    for (int i = 0; i < grid.interior(); ++i)
        x2(i) = grid.coordinate(i + 1) * grid.coordinate(i + 1);
    const Eigen::MatrixXd coupling = basis.transpose() * x2.asDiagonal() * basis;

    std::vector< SpectralData< 2 >::Sector > sectors(4);
    for (int px = 0; px < 2; ++px)
        for (int py = 0; py < 2; ++py)
        {
            auto& sec = sectors[static_cast< std::size_t >(2 * px + py)];
            for (int i = px; i < m; i += 2)
                for (int j = py; j < m; j += 2)
                {
                    sec.ix.push_back(i);
                    sec.iy.push_back(j);
                }
            const auto      dim = static_cast< Eigen::Index >(sec.ix.size());
            Eigen::MatrixXd h(dim, dim);
            for (Eigen::Index a = 0; a < dim; ++a)
                for (Eigen::Index b = 0; b <= a; ++b)
                {
                    double v = pot.v22 * coupling(sec.ix[a], sec.ix[b]) * coupling(sec.iy[a], sec.iy[b]);
                    if (a == b)
                        v += axis_energy(sec.ix[a]) + axis_energy(sec.iy[a]) + pot.v0;
                    h(a, b) = v;
                    h(b, a) = v;
                }
            Eigen::SelfAdjointEigenSolver< Eigen::MatrixXd > solver(h);
            if (solver.info() != Eigen::Success)
                throw NonConvergence("2-D block eigensolver failed");
            sec.values  = solver.eigenvalues();
            sec.vectors = solver.eigenvectors();
        }

    std::vector< SpectralData< 2 >::StateRef > states;
    for (int s = 0; s < 4; ++s)
        for (int c = 0; c < sectors[static_cast< std::size_t >(s)].values.size(); ++c)
            states.push_back({s, c});
    std::stable_sort(states.begin(), states.end(), [&](const auto& a, const auto& b) {
        return sectors[static_cast< std::size_t >(a.sector)].values(a.column) <
               sectors[static_cast< std::size_t >(b.sector)].values(b.column);
    });
    {
        // psi0 at the center = sum_k c_k u_ix(c) u_iy(c), must be positive
        auto&     g   = sectors[static_cast< std::size_t >(states.front().sector)];
        const int c   = grid.interior() / 2;
        double    val = 0.0;
        for (std::size_t q = 0; q < g.ix.size(); ++q)
            val += g.vectors(static_cast< Eigen::Index >(q), states.front().column) * basis(c, g.ix[q]) * basis(c, g.iy[q]);
        if (val < 0.0)
            g.vectors.col(states.front().column) *= -1.0;
    }

    SpectralData< 2 > sd{grid, std::move(basis), std::move(sectors), std::move(states)};
    sd = sd.truncated(k);
    detail::check_ground_state(sd, opt);
    return sd;
}

/// <r> = sum |psi0|^2 r h^D (<|x|> in 1-D).
template < int D >
double bohr_radius(const SpectralData< D >& sd)
{
    const auto  psi = sd.eigenfunction(0);
    const auto& g   = sd.grid();
    double      acc = 0.0;
    for (std::size_t k = 0; k < psi.values.size(); ++k)
    {
        std::array< int, D > idx{};
        std::size_t          rem = k;
        for (int d = D - 1; d >= 0; --d)
        {
            idx[static_cast< std::size_t >(d)] = static_cast< int >(rem % static_cast< std::size_t >(g.points));
            rem /= static_cast< std::size_t >(g.points);
        }
        double r2 = 0.0;
        for (int d = 0; d < D; ++d)
            r2 += g.coordinate(idx[static_cast< std::size_t >(d)]) * g.coordinate(idx[static_cast< std::size_t >(d)]);
        acc += psi.values[k] * psi.values[k] * std::sqrt(r2);
    }
    return acc * g.cell_volume();
}

/// Richardson extrapolation of a quantity with an even O(h^2) error
/// expansion, given values on grids h, h/2, h/4, ... (coarsest first).
inline double richardson(std::vector< double > values)
{
    double factor = 4.0;
    while (values.size() > 1)
    {
        for (std::size_t i = 0; i + 1 < values.size(); ++i)
            values[i] = (factor * values[i + 1] - values[i]) / (factor - 1.0);
        values.pop_back();
        factor *= 4.0;
    }
    return values.front();
}

/// Ground-state energy extrapolated over `levels` successive grid halvings.
template < PolynomialPotential P >
double converged_ground_energy(const ActionSpec< P >& spec, Grid< P::dimension > grid, int levels,
                               const SpectrumOptions& opt = {})
{
    std::vector< double > e;
    for (int l = 0; l < levels; ++l, grid = grid.refined())
        e.push_back(ground_state(spec, grid, 1, opt).energy(0));
    return richardson(std::move(e));
}

} // namespace qaction

#endif // QACTION_SPECTRUM_HPP
