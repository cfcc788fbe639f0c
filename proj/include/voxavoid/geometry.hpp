#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include <Eigen/Geometry>

#include "voxavoid/point_cloud.hpp"

namespace voxavoid {

struct Box
{
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d half_extents = Eigen::Vector3d::Zero();
};

struct Cylinder
{
    Eigen::Vector3d base = Eigen::Vector3d::Zero();
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();  // unit
    double radius = 0.0;
    double length = 0.0;
};

struct Sphere
{
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    double radius = 0.0;
};

struct Capsule
{
    Eigen::Vector3d p0 = Eigen::Vector3d::Zero();
    Eigen::Vector3d p1 = Eigen::Vector3d::Zero();
    double radius = 0.0;
};

using Primitive = std::variant<Box, Cylinder, Sphere, Capsule>;

/// Throws std::invalid_argument on non-positive sizes or a non-unit axis.
void validate(const Primitive& p);

bool contains(const Primitive& p, const Eigen::Vector3d& x, double tol = 1e-12);

/// max over the primitive of dot(x, u)
double support(const Primitive& p, const Eigen::Vector3d& u);

double surface_area(const Primitive& p);

/// Union of primitives in a link frame.
struct LinkGeometry
{
    std::vector<Primitive> primitives;

    bool empty() const { return primitives.empty(); }
    bool contains(const Eigen::Vector3d& x, double tol = 1e-12) const;
    double support(const Eigen::Vector3d& u) const;
    Eigen::AlignedBox3d aabb() const;
};

/// Area-weighted sample of the primitives' surfaces, deterministic in `seed`.
Points sample_surface(const LinkGeometry& g, int count, std::uint64_t seed);

struct OrientedBoundingBox
{
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // columns: axes of d1, d2, d3
    Eigen::Vector3d edges = Eigen::Vector3d::Zero();         // d1 <= d2 <= d3, full lengths

    Eigen::Vector3d half_edges() const { return 0.5 * edges; }
    bool contains(const Eigen::Vector3d& x, double tol = 1e-12) const;
    double volume() const { return edges.prod(); }
};

inline constexpr int kObbSamples = 2048;
inline constexpr std::uint64_t kObbSeed = 0x0bb5eedULL;

/// PCA frame of a fixed surface sampling, compared against the primitives'
/// own frames; the smallest box wins. Extents come from exact support
/// functions, so the geometry is always contained.
OrientedBoundingBox compute_obb(const LinkGeometry& g);

struct BoundingSphere
{
    int link = -1;
    Eigen::Vector3d center = Eigen::Vector3d::Zero();  // link frame
    double radius = 0.0;                               // x_M
    double buffer = 0.02;                              // b
};

/// ceil(d3 / sqrt(d1^2 + d2^2) + 1)
int sphere_count(const OrientedBoundingBox& obb);
/// sqrt(d1^2 + d2^2)
double nominal_sphere_diameter(const OrientedBoundingBox& obb);

/// Spheres on the d3 axis, one per equal segment of the box, each centered
/// on its segment. The radius is the half diagonal of a segment, the least
/// radius for which the union contains the box.
std::vector<BoundingSphere> generate_bounding_spheres(const OrientedBoundingBox& obb,
                                                      double buffer, int link = -1);

/// Voxels whose centers lie inside the geometry; local origin at the minimum
/// corner of the geometry's axis-aligned bounds.
LocalVoxelSet voxelize_link(const LinkGeometry& g, double voxel_size);

}  // namespace voxavoid
