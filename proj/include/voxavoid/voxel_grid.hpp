#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Geometry>

namespace voxavoid {

struct VoxelIndex
{
    int i = 0;
    int j = 0;
    int k = 0;

    friend bool operator==(const VoxelIndex&, const VoxelIndex&) = default;
    friend auto operator<=>(const VoxelIndex& a, const VoxelIndex& b)
    {
        // lexicographic on (i, j, k)
        if (auto c = a.i <=> b.i; c != 0) return c;
        if (auto c = a.j <=> b.j; c != 0) return c;
        return a.k <=> b.k;
    }
};

struct GridDims
{
    int nx = 0;
    int ny = 0;
    int nz = 0;

    std::size_t count() const
    {
        return static_cast<std::size_t>(nx) * ny * nz;
    }
    bool contains(const VoxelIndex& v) const
    {
        return v.i >= 0 && v.j >= 0 && v.k >= 0 && v.i < nx && v.j < ny && v.k < nz;
    }
    friend bool operator==(const GridDims&, const GridDims&) = default;
};

/// Log-odds occupancy model. Defaults are the usual occupancy-mapping values;
/// a cell counts as occupied once its probability strictly exceeds the
/// threshold.
struct OccupancyModel
{
    float l_min = -2.0f;
    float l_max = 3.5f;
    float hit_logodds = 0.85f;
    double occupancy_threshold = 0.5;

    double threshold_logodds() const;
};

/// Dense voxel map with a metric frame. Voxel (0,0,0) has its lower corner at
/// `origin`; voxel (i,j,k) spans [origin + i*size, origin + (i+1)*size).
class VoxelGrid
{
public:
    VoxelGrid(GridDims dims, double voxel_size, const Eigen::Vector3d& origin,
              OccupancyModel model = {});

    const GridDims& dims() const { return m_dims; }
    double voxel_size() const { return m_voxel_size; }
    const Eigen::Vector3d& origin() const { return m_origin; }
    const OccupancyModel& model() const { return m_model; }

    /// Floor discretization; boundary points belong to the upper voxel.
    /// Points outside the grid yield nullopt, never a clamped index.
    std::optional<VoxelIndex> world_to_voxel(const Eigen::Vector3d& p) const;
    Eigen::Vector3d voxel_center(const VoxelIndex& v) const;

    std::size_t linear(const VoxelIndex& v) const
    {
        return static_cast<std::size_t>(v.i) +
               static_cast<std::size_t>(m_dims.nx) *
                   (static_cast<std::size_t>(v.j) + static_cast<std::size_t>(m_dims.ny) * v.k);
    }
    VoxelIndex unlinear(std::size_t idx) const;

    float logodds(const VoxelIndex& v) const { return m_cells[linear(v)]; }
    bool occupied(const VoxelIndex& v) const { return m_cells[linear(v)] > m_threshold; }

    /// Adds `delta` to the cell, clamped to [l_min, l_max].
    void add_logodds(const VoxelIndex& v, float delta);
    void set_logodds(const VoxelIndex& v, float value);
    void mark_occupied(const VoxelIndex& v) { m_cells[linear(v)] = m_model.l_max; }

    void clear();

    /// Occupied voxels in lexicographic (i, j, k) order.
    std::vector<VoxelIndex> occupied_voxels() const;

    /// One byte per voxel in linear order, 1 where occupied.
    std::vector<std::uint8_t> occupancy_mask() const;

    std::span<const float> cells() const { return m_cells; }

    bool same_geometry(const VoxelGrid& other) const;

private:
    GridDims m_dims;
    double m_voxel_size;
    Eigen::Vector3d m_origin;
    OccupancyModel m_model;
    float m_threshold;
    std::vector<float> m_cells;
};

}  // namespace voxavoid
