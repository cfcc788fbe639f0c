#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "voxavoid/voxel_grid.hpp"

namespace voxavoid {

/// Immutable binary occupancy copied out of a VoxelGrid; the EDT input.
struct OccupancySnapshot
{
    GridDims dims;
    double voxel_size = 1.0;
    Eigen::Vector3d origin = Eigen::Vector3d::Zero();
    std::vector<std::uint8_t> occupied;  // linear order, i fastest

    static OccupancySnapshot of(const VoxelGrid& grid);
    static OccupancySnapshot from_voxels(GridDims dims, std::span<const VoxelIndex> voxels,
                                         double voxel_size = 1.0);

    bool is_occupied(const VoxelIndex& v) const;
    friend bool operator==(const OccupancySnapshot&, const OccupancySnapshot&) = default;
};

/// Band counts for the three sweep phases. A count that does not divide the
/// extent leaves the remainder to the last band; counts above the extent are
/// reduced to the extent.
struct BandConfig
{
    int m1 = 1;
    int m2 = 1;
    int m3 = 2;

    static BandConfig for_workers(int workers);
    friend bool operator==(const BandConfig&, const BandConfig&) = default;
};

struct EdtOptions
{
    BandConfig bands;
    int workers = 0;  // 0: OpenMP default
};

/// Nearest occupied voxel for every voxel of a grid.
class DistanceField
{
public:
    static constexpr std::uint32_t kNoSite = 0xFFFFFFFFu;
    static constexpr int kMaxXY = 2047;
    static constexpr int kMaxZ = 1023;

    DistanceField() = default;
    DistanceField(GridDims dims, double voxel_size, const Eigen::Vector3d& origin);

    static std::uint32_t pack(int x, int y, int z)
    {
        return static_cast<std::uint32_t>(x) | (static_cast<std::uint32_t>(y) << 11) |
               (static_cast<std::uint32_t>(z) << 22);
    }
    static VoxelIndex unpack(std::uint32_t s)
    {
        return {static_cast<int>(s & 0x7FFu), static_cast<int>((s >> 11) & 0x7FFu),
                static_cast<int>(s >> 22)};
    }

    const GridDims& dims() const { return m_dims; }
    double voxel_size() const { return m_voxel_size; }
    const Eigen::Vector3d& origin() const { return m_origin; }

    std::optional<VoxelIndex> site(const VoxelIndex& v) const;
    /// Squared distance in voxel units to the nearest site, or -1 without one.
    std::int64_t squared_distance(const VoxelIndex& v) const;
    bool has_sites() const;

    std::span<const std::uint32_t> packed_sites() const { return m_sites; }
    std::span<std::uint32_t> packed_sites() { return m_sites; }

    std::size_t linear(const VoxelIndex& v) const
    {
        return static_cast<std::size_t>(v.i) +
               static_cast<std::size_t>(m_dims.nx) *
                   (static_cast<std::size_t>(v.j) + static_cast<std::size_t>(m_dims.ny) * v.k);
    }

private:
    GridDims m_dims;
    double m_voxel_size = 1.0;
    Eigen::Vector3d m_origin = Eigen::Vector3d::Zero();
    std::vector<std::uint32_t> m_sites;
};

/// Exact EDT, parallel banding, OpenMP kernels. The result does not depend on
/// the band configuration nor on the worker count.
DistanceField pba_edt(const OccupancySnapshot& occupancy, const EdtOptions& options = {});

/// Row phase alone: nearest site restricted to each voxel's own x-row.
DistanceField pba_row_phase(const OccupancySnapshot& occupancy, const EdtOptions& options = {});

/// Exhaustive search over all occupied voxels; ties go to the
/// lexicographically smallest site. Serial; meant for grids up to ~48^3.
DistanceField brute_force_edt(const OccupancySnapshot& occupancy);

/// Serial separable exact EDT (integer lower-envelope scan, one axis at a
/// time). Returns squared voxel distances, -1 where no site exists.
std::vector<std::int64_t> reference_edt_squared(const OccupancySnapshot& occupancy);

/// Squared distances of a field in linear order, -1 where no site exists.
std::vector<std::int64_t> squared_distances(const DistanceField& field);

/// A candidate on one sweep line: `perp2` is the squared distance from the
/// line, `coord` the position along it.
struct LineSite
{
    std::int64_t perp2 = 0;
    int coord = 0;
    std::uint32_t site = DistanceField::kNoSite;

    friend bool operator==(const LineSite&, const LineSite&) = default;
};

/// Sites whose 1D Voronoi interval on the line is non-empty, in sweep order.
/// Input must be strictly increasing in `coord`.
std::vector<LineSite> proximate_sites_1d(std::span<const LineSite> sorted_sites);

struct NearestSite
{
    VoxelIndex site;
    Eigen::Vector3d site_center;  // world, meters
    double distance_m = 0.0;      // voxel center to site center
};

/// Throws std::out_of_range for an index outside the field.
std::optional<NearestSite> query_nearest_site(const DistanceField& field, const VoxelIndex& v);

/// Text dump of squared voxel distances, one block per z slice, rows along y.
void write_distance_dump(std::ostream& out, const DistanceField& field);

}  // namespace voxavoid
