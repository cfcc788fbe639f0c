#include "voxavoid/voxel_grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace voxavoid {

namespace {

// floor() that snaps values within rounding noise of an integer onto it, so a
// point on a voxel boundary is owned by the upper voxel.
long snapped_floor(double x)
{
    const double r = std::round(x);
    if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<long>(r);
    return static_cast<long>(std::floor(x));
}

}  // namespace

double OccupancyModel::threshold_logodds() const
{
    return std::log(occupancy_threshold / (1.0 - occupancy_threshold));
}

VoxelGrid::VoxelGrid(GridDims dims, double voxel_size, const Eigen::Vector3d& origin,
                     OccupancyModel model)
    : m_dims(dims), m_voxel_size(voxel_size), m_origin(origin), m_model(model)
{
    if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0) {
        throw std::invalid_argument("voxel grid dimensions must be positive");
    }
    if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
        throw std::invalid_argument("voxel size must be positive");
    }
    if (!origin.allFinite()) throw std::invalid_argument("grid origin must be finite");
    if (!(model.occupancy_threshold > 0.0 && model.occupancy_threshold < 1.0)) {
        throw std::invalid_argument("occupancy threshold must lie in (0, 1)");
    }
    if (!(model.l_min <= 0.0f && model.l_max > 0.0f)) {
        throw std::invalid_argument("log-odds clamp must bracket zero");
    }
    m_threshold = static_cast<float>(model.threshold_logodds());
    m_cells.assign(dims.count(), 0.0f);
}

std::optional<VoxelIndex> VoxelGrid::world_to_voxel(const Eigen::Vector3d& p) const
{
    const Eigen::Vector3d rel = (p - m_origin) / m_voxel_size;
    const long i = snapped_floor(rel.x());
    const long j = snapped_floor(rel.y());
    const long k = snapped_floor(rel.z());
    if (i < 0 || j < 0 || k < 0 || i >= m_dims.nx || j >= m_dims.ny || k >= m_dims.nz) {
        return std::nullopt;
    }
    return VoxelIndex{static_cast<int>(i), static_cast<int>(j), static_cast<int>(k)};
}

Eigen::Vector3d VoxelGrid::voxel_center(const VoxelIndex& v) const
{
    return m_origin + m_voxel_size * Eigen::Vector3d(v.i + 0.5, v.j + 0.5, v.k + 0.5);
}

VoxelIndex VoxelGrid::unlinear(std::size_t idx) const
{
    const auto nx = static_cast<std::size_t>(m_dims.nx);
    const auto ny = static_cast<std::size_t>(m_dims.ny);
    return VoxelIndex{static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny),
                      static_cast<int>(idx / (nx * ny))};
}

void VoxelGrid::add_logodds(const VoxelIndex& v, float delta)
{
    float& c = m_cells[linear(v)];
    c = std::clamp(c + delta, m_model.l_min, m_model.l_max);
}

void VoxelGrid::set_logodds(const VoxelIndex& v, float value)
{
    m_cells[linear(v)] = std::clamp(value, m_model.l_min, m_model.l_max);
}

void VoxelGrid::clear()
{
    std::fill(m_cells.begin(), m_cells.end(), 0.0f);
}

std::vector<VoxelIndex> VoxelGrid::occupied_voxels() const
{
    std::vector<VoxelIndex> out;
    for (std::size_t idx = 0; idx < m_cells.size(); ++idx) {
        if (m_cells[idx] > m_threshold) out.push_back(unlinear(idx));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::uint8_t> VoxelGrid::occupancy_mask() const
{
    std::vector<std::uint8_t> mask(m_cells.size());
    std::transform(m_cells.begin(), m_cells.end(), mask.begin(),
                   [t = m_threshold](float c) { return static_cast<std::uint8_t>(c > t); });
    return mask;
}

bool VoxelGrid::same_geometry(const VoxelGrid& other) const
{
    return m_dims == other.m_dims && m_voxel_size == other.m_voxel_size &&
           m_origin == other.m_origin;
}

}  // namespace voxavoid
