#ifndef QACTION_GRID_HPP
#define QACTION_GRID_HPP

#include "qaction/errors.hpp"
#include "qaction/potential.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace qaction
{

/// Uniform grid on [-L, L]^D with N points per axis (boundary nodes
/// included). N odd so the origin is a node.
template < int D >
struct Grid
{
    static constexpr int dimension = D;

    double half_extent = 8.0;
    int    points      = 1601;

    double spacing() const noexcept { return 2.0 * half_extent / (points - 1); }
    double coordinate(int i) const noexcept { return -half_extent + i * spacing(); }
    int    interior() const noexcept { return points - 2; }
    std::size_t node_count() const noexcept
    {
        std::size_t n = 1;
        for (int d = 0; d < D; ++d)
            n *= static_cast< std::size_t >(points);
        return n;
    }
    /// h^D, the quadrature weight of one node
    double cell_volume() const noexcept { return std::pow(spacing(), D); }

    /// Same extent, spacing halved; every node of *this is a node of the result.
    Grid refined() const noexcept { return {half_extent, 2 * points - 1}; }

    void validate() const
    {
        if (points < 64)
            throw InvalidArgument("grid needs at least 64 points per axis, got " + std::to_string(points));
        if (points % 2 == 0)
            throw InvalidArgument("grid point count must be odd so the origin is a node");
        if (!(half_extent > 0.0))
            throw InvalidArgument("grid half extent must be positive");
    }

    /// Axis index of coordinate x; throws unless x lies on a node.
    int axis_index(double x) const
    {
        const double s = (x + half_extent) / spacing();
        const double r = std::round(s);
        if (std::abs(s - r) > 1e-6 || r < 1 || r > points - 2)
            throw InvalidArgument("coordinate " + std::to_string(x) + " is not an interior grid node");
        return static_cast< int >(r);
    }

    /// Row-major flat index (x slowest).
    std::size_t flat_index(const std::array< int, D >& idx) const noexcept
    {
        std::size_t k = 0;
        for (int d = 0; d < D; ++d)
            k = k * static_cast< std::size_t >(points) + static_cast< std::size_t >(idx[d]);
        return k;
    }

    std::array< int, D > node_of(const Point< D >& p) const
    {
        std::array< int, D > idx{};
        for (int d = 0; d < D; ++d)
            idx[d] = axis_index(p[d]);
        return idx;
    }

    Point< D > point_of(const std::array< int, D >& idx) const noexcept
    {
        Point< D > p{};
        for (int d = 0; d < D; ++d)
            p[d] = coordinate(idx[d]);
        return p;
    }
};

using Grid1D = Grid< 1 >;
using Grid2D = Grid< 2 >;

/// Field sampled on all nodes of a grid (zero on the Dirichlet boundary).
template < int D >
struct GridField
{
    Grid< D >             grid;
    std::vector< double > values;

    double at(const std::array< int, D >& idx) const { return values[grid.flat_index(idx)]; }
};

} // namespace qaction

#endif // QACTION_GRID_HPP
