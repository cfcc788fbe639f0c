#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include <Eigen/Geometry>

#include "voxavoid/voxel_grid.hpp"

namespace voxavoid {

using Points = std::vector<Eigen::Vector3d>;

struct PointCloud
{
    Points points;  // sensor frame, meters
    Eigen::Isometry3d sensor_pose = Eigen::Isometry3d::Identity();  // sensor -> world
};

struct FilterConfig
{
    bool enabled = true;
    int k_neighbors = 8;
    double std_multiplier = 1.0;
};

struct InsertionStats
{
    std::size_t inserted = 0;
    std::size_t filtered_out = 0;
    std::size_t robot_skipped = 0;
    std::size_t out_of_bounds = 0;
};

/// Keeps a point iff its mean distance to its k nearest neighbors is at most
/// mean + std_multiplier * stddev of that statistic over the whole cloud.
/// Clouds with at most k points are returned unchanged.
/// Exact neighbors through a bucket grid.
Points statistical_outlier_filter(const Points& points, int k_neighbors, double std_multiplier);
/// Same rule, serial all-pairs search.
Points statistical_outlier_filter_reference(const Points& points, int k_neighbors, double std_multiplier);

/// Bayesian hit update of `map` from a sensor cloud. Voxels occupied in
/// `robot_mask` are never touched.
InsertionStats insert_point_cloud(VoxelGrid& map, const PointCloud& cloud,
                                  const VoxelGrid& robot_mask, const FilterConfig& filter);

/// Voxelized rigid body: voxel (a,b,c) of the set has its center at
/// origin + (a+0.5, b+0.5, c+0.5) * voxel_size, in the body frame.
struct LocalVoxelSet
{
    Eigen::Vector3d origin = Eigen::Vector3d::Zero();
    double voxel_size = 0.0;
    std::vector<VoxelIndex> voxels;
};

/// Transforms every voxel center into the world, rediscretizes it into `map`
/// and sets it to the occupied clamp. Returns how many centers fell outside.
std::size_t insert_voxel_set(VoxelGrid& map, const LocalVoxelSet& set,
                             const Eigen::Isometry3d& body_to_world);

/// Plain-text cloud: one "x y z" per line, '#' starts a comment line.
Points read_xyz(std::istream& in);
Points load_xyz(const std::filesystem::path& path);
void write_xyz(std::ostream& out, const Points& points);

}  // namespace voxavoid
