#include "voxavoid/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace voxavoid {

namespace {

template <class... F>
struct Overload : F...
{
    using F::operator()...;
};
template <class... F>
Overload(F...) -> Overload<F...>;

double segment_distance(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1, const Eigen::Vector3d& x)
{
    const Eigen::Vector3d d = p1 - p0;
    const double len2 = d.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((x - p0).dot(d) / len2, 0.0, 1.0) : 0.0;
    return (x - (p0 + t * d)).norm();
}

// Orthonormal frame whose third column is `a`.
Eigen::Matrix3d frame_around(const Eigen::Vector3d& a)
{
    int least = 0;
    for (int k = 1; k < 3; ++k) {
        if (std::abs(a[k]) < std::abs(a[least])) least = k;
    }
    Eigen::Vector3d helper = Eigen::Vector3d::Unit(least);
    const Eigen::Vector3d e1 = (helper - helper.dot(a) * a).normalized();
    Eigen::Matrix3d r;
    r.col(0) = e1;
    r.col(1) = a.cross(e1);
    r.col(2) = a;
    return r;
}

Eigen::Vector3d random_unit(std::mt19937_64& rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    for (;;) {
        const Eigen::Vector3d v(n(rng), n(rng), n(rng));
        const double len = v.norm();
        if (len > 1e-12) return v / len;
    }
}

Eigen::Vector3d sample_on(const Primitive& prim, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return std::visit(
        Overload{
            [&](const Box& b) -> Eigen::Vector3d {
                const Eigen::Vector3d& h = b.half_extents;
                const std::array<double, 3> face_area{h.y() * h.z(), h.x() * h.z(), h.x() * h.y()};
                const double total = face_area[0] + face_area[1] + face_area[2];
                double pick = u(rng) * total;
                int axis = 0;
                while (axis < 2 && pick >= face_area[axis]) pick -= face_area[axis++];
                Eigen::Vector3d local(h.x() * (2 * u(rng) - 1), h.y() * (2 * u(rng) - 1),
                                      h.z() * (2 * u(rng) - 1));
                local[axis] = u(rng) < 0.5 ? -h[axis] : h[axis];
                return b.center + b.rotation * local;
            },
            [&](const Cylinder& c) -> Eigen::Vector3d {
                const Eigen::Matrix3d f = frame_around(c.axis);
                const double side = c.length, cap = c.radius;  // areas over 2*pi*r
                const double phi = 2 * std::numbers::pi * u(rng);
                const Eigen::Vector3d radial = f.col(0) * std::cos(phi) + f.col(1) * std::sin(phi);
                if (u(rng) * (side + cap) < side) return c.base + c.axis * (c.length * u(rng)) + c.radius * radial;
                const double rr = c.radius * std::sqrt(u(rng));
                const double t = u(rng) < 0.5 ? 0.0 : c.length;
                return c.base + c.axis * t + rr * radial;
            },
            [&](const Sphere& s) -> Eigen::Vector3d { return s.center + s.radius * random_unit(rng); },
            [&](const Capsule& c) -> Eigen::Vector3d {
                const Eigen::Vector3d d = c.p1 - c.p0;
                const double len = d.norm();
                const double side = len, caps = 2 * c.radius;  // areas over 2*pi*r
                if (len > 0 && u(rng) * (side + caps) < side) {
                    const Eigen::Vector3d a = d / len;
                    const Eigen::Matrix3d f = frame_around(a);
                    const double phi = 2 * std::numbers::pi * u(rng);
                    return c.p0 + d * u(rng) +
                           c.radius * (f.col(0) * std::cos(phi) + f.col(1) * std::sin(phi));
                }
                const Eigen::Vector3d n = random_unit(rng);
                const bool far_end = len > 0 && n.dot(d) > 0;
                return (far_end ? c.p1 : c.p0) + c.radius * n;
            },
        },
        prim);
}

OrientedBoundingBox fit_in_frame(const LinkGeometry& g, const Eigen::Matrix3d& frame)
{
    struct Axis
    {
        Eigen::Vector3d dir;
        double edge;
        double mid;
    };
    std::array<Axis, 3> axes;
    for (int k = 0; k < 3; ++k) {
        const Eigen::Vector3d u = frame.col(k);
        const double hi = g.support(u);
        const double lo = -g.support(-u);
        axes[k] = {u, hi - lo, 0.5 * (hi + lo)};
    }
    std::stable_sort(axes.begin(), axes.end(), [](const Axis& a, const Axis& b) { return a.edge < b.edge; });

    OrientedBoundingBox obb;
    Eigen::Vector3d mid;
    for (int k = 0; k < 3; ++k) {
        obb.rotation.col(k) = axes[k].dir;
        obb.edges[k] = axes[k].edge;
        mid[k] = axes[k].mid;
    }
    obb.center = obb.rotation * mid;
    if (obb.rotation.determinant() < 0) obb.rotation.col(2) = -obb.rotation.col(2);
    return obb;
}

}  // namespace

void validate(const Primitive& p)
{
    auto require = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(what);
    };
    std::visit(Overload{
                   [&](const Box& b) {
                       require((b.half_extents.array() > 0).all(), "box half extents must be positive");
                       require((b.rotation.transpose() * b.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-9,
                               "box rotation must be orthonormal");
                   },
                   [&](const Cylinder& c) {
                       require(c.radius > 0 && c.length > 0, "cylinder radius and length must be positive");
                       require(std::abs(c.axis.norm() - 1.0) < 1e-9, "cylinder axis must be unit length");
                   },
                   [&](const Sphere& s) { require(s.radius > 0, "sphere radius must be positive"); },
                   [&](const Capsule& c) { require(c.radius > 0, "capsule radius must be positive"); },
               },
               p);
}

bool contains(const Primitive& p, const Eigen::Vector3d& x, double tol)
{
    return std::visit(
        Overload{
            [&](const Box& b) {
                const Eigen::Vector3d local = b.rotation.transpose() * (x - b.center);
                return (local.cwiseAbs().array() <= b.half_extents.array() + tol).all();
            },
            [&](const Cylinder& c) {
                const Eigen::Vector3d r = x - c.base;
                const double t = r.dot(c.axis);
                if (t < -tol || t > c.length + tol) return false;
                return (r - t * c.axis).norm() <= c.radius + tol;
            },
            [&](const Sphere& s) { return (x - s.center).norm() <= s.radius + tol; },
            [&](const Capsule& c) { return segment_distance(c.p0, c.p1, x) <= c.radius + tol; },
        },
        p);
}

double support(const Primitive& p, const Eigen::Vector3d& u)
{
    return std::visit(
        Overload{
            [&](const Box& b) {
                const Eigen::Vector3d local = b.rotation.transpose() * u;
                return b.center.dot(u) + b.half_extents.dot(local.cwiseAbs());
            },
            [&](const Cylinder& c) {
                const double along = c.axis.dot(u);
                return c.base.dot(u) + std::max(0.0, c.length * along) + c.radius * (u - along * c.axis).norm();
            },
            [&](const Sphere& s) { return s.center.dot(u) + s.radius * u.norm(); },
            [&](const Capsule& c) { return std::max(c.p0.dot(u), c.p1.dot(u)) + c.radius * u.norm(); },
        },
        p);
}

double surface_area(const Primitive& p)
{
    constexpr double pi = std::numbers::pi;
    return std::visit(Overload{
                          [](const Box& b) {
                              const Eigen::Vector3d& h = b.half_extents;
                              return 8.0 * (h.x() * h.y() + h.y() * h.z() + h.x() * h.z());
                          },
                          [](const Cylinder& c) { return 2 * pi * c.radius * (c.length + c.radius); },
                          [](const Sphere& s) { return 4 * pi * s.radius * s.radius; },
                          [](const Capsule& c) {
                              return 2 * pi * c.radius * ((c.p1 - c.p0).norm() + 2 * c.radius);
                          },
                      },
                      p);
}

bool LinkGeometry::contains(const Eigen::Vector3d& x, double tol) const
{
    return std::any_of(primitives.begin(), primitives.end(),
                       [&](const Primitive& p) { return voxavoid::contains(p, x, tol); });
}

double LinkGeometry::support(const Eigen::Vector3d& u) const
{
    if (primitives.empty()) throw std::invalid_argument("empty link geometry");
    double best = voxavoid::support(primitives.front(), u);
    for (std::size_t k = 1; k < primitives.size(); ++k) best = std::max(best, voxavoid::support(primitives[k], u));
    return best;
}

Eigen::AlignedBox3d LinkGeometry::aabb() const
{
    Eigen::Vector3d lo, hi;
    for (int k = 0; k < 3; ++k) {
        const Eigen::Vector3d e = Eigen::Vector3d::Unit(k);
        hi[k] = support(e);
        lo[k] = -support(-e);
    }
    return Eigen::AlignedBox3d(lo, hi);
}

Points sample_surface(const LinkGeometry& g, int count, std::uint64_t seed)
{
    if (g.empty()) throw std::invalid_argument("empty link geometry");
    std::vector<double> areas;
    for (const auto& p : g.primitives) areas.push_back(surface_area(p));
    std::mt19937_64 rng(seed);
    std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
    Points out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int s = 0; s < count; ++s) out.push_back(sample_on(g.primitives[pick(rng)], rng));
    return out;
}

bool OrientedBoundingBox::contains(const Eigen::Vector3d& x, double tol) const
{
    const Eigen::Vector3d local = rotation.transpose() * (x - center);
    return (local.cwiseAbs().array() <= half_edges().array() + tol).all();
}

OrientedBoundingBox compute_obb(const LinkGeometry& g)
{
    if (g.empty()) throw std::invalid_argument("empty link geometry");
    for (const auto& p : g.primitives) validate(p);

    const Points samples = sample_surface(g, kObbSamples, kObbSeed);
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& p : samples) mean += p;
    mean /= static_cast<double>(samples.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : samples) cov += (p - mean) * (p - mean).transpose();
    cov /= static_cast<double>(samples.size());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);

    std::vector<Eigen::Matrix3d> frames{eig.eigenvectors(), Eigen::Matrix3d::Identity()};
    for (const auto& p : g.primitives) {
        if (const auto* b = std::get_if<Box>(&p)) frames.push_back(b->rotation);
        if (const auto* c = std::get_if<Cylinder>(&p)) frames.push_back(frame_around(c->axis));
        if (const auto* c = std::get_if<Capsule>(&p)) {
            const Eigen::Vector3d d = c->p1 - c->p0;
            if (d.norm() > 0) frames.push_back(frame_around(d.normalized()));
        }
    }

    OrientedBoundingBox best = fit_in_frame(g, frames.front());
    for (std::size_t f = 1; f < frames.size(); ++f) {
        const OrientedBoundingBox cand = fit_in_frame(g, frames[f]);
        if (cand.volume() < best.volume() * (1.0 - 1e-9)) best = cand;
    }
    return best;
}

double nominal_sphere_diameter(const OrientedBoundingBox& obb)
{
    return std::hypot(obb.edges[0], obb.edges[1]);
}

int sphere_count(const OrientedBoundingBox& obb)
{
    return static_cast<int>(std::ceil(obb.edges[2] / nominal_sphere_diameter(obb) + 1.0));
}

std::vector<BoundingSphere> generate_bounding_spheres(const OrientedBoundingBox& obb, double buffer, int link)
{
    if (!(buffer > 0)) throw std::invalid_argument("sphere buffer must be positive");
    const int n = sphere_count(obb);
    const double step = obb.edges[2] / n;
    const double radius = 0.5 * std::sqrt(obb.edges[0] * obb.edges[0] + obb.edges[1] * obb.edges[1] + step * step);
    const Eigen::Vector3d axis = obb.rotation.col(2);
    std::vector<BoundingSphere> out;
    for (int s = 0; s < n; ++s) {
        const double offset = -0.5 * obb.edges[2] + (s + 0.5) * step;
        out.push_back({link, obb.center + offset * axis, radius, buffer});
    }
    return out;
}

LocalVoxelSet voxelize_link(const LinkGeometry& g, double voxel_size)
{
    if (!(voxel_size > 0)) throw std::invalid_argument("voxel size must be positive");
    const Eigen::AlignedBox3d box = g.aabb();
    LocalVoxelSet out;
    out.origin = box.min();
    out.voxel_size = voxel_size;
    std::array<int, 3> n{};
    for (int k = 0; k < 3; ++k) {
        n[k] = std::max(1, static_cast<int>(std::ceil(box.sizes()[k] / voxel_size - 1e-9)));
    }
    for (int i = 0; i < n[0]; ++i) {
        for (int j = 0; j < n[1]; ++j) {
            for (int k = 0; k < n[2]; ++k) {
                const Eigen::Vector3d c = out.origin + voxel_size * Eigen::Vector3d(i + 0.5, j + 0.5, k + 0.5);
                if (g.contains(c)) out.voxels.push_back({i, j, k});
            }
        }
    }
    return out;
}

}  // namespace voxavoid
