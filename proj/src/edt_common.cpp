#include "voxavoid/edt.hpp"

#include "edt_detail.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace voxavoid {

OccupancySnapshot OccupancySnapshot::of(const VoxelGrid& grid)
{
    return {grid.dims(), grid.voxel_size(), grid.origin(), grid.occupancy_mask()};
}

OccupancySnapshot OccupancySnapshot::from_voxels(GridDims dims, std::span<const VoxelIndex> voxels,
                                                 double voxel_size)
{
    OccupancySnapshot s{dims, voxel_size, Eigen::Vector3d::Zero(),
                        std::vector<std::uint8_t>(dims.count(), 0)};
    for (const auto& v : voxels) {
        if (!dims.contains(v)) throw std::out_of_range("voxel outside snapshot dimensions");
        s.occupied[static_cast<std::size_t>(v.i) +
                   static_cast<std::size_t>(dims.nx) * (v.j + static_cast<std::size_t>(dims.ny) * v.k)] = 1;
    }
    return s;
}

bool OccupancySnapshot::is_occupied(const VoxelIndex& v) const
{
    return occupied[static_cast<std::size_t>(v.i) +
                    static_cast<std::size_t>(dims.nx) * (v.j + static_cast<std::size_t>(dims.ny) * v.k)] != 0;
}

DistanceField::DistanceField(GridDims dims, double voxel_size, const Eigen::Vector3d& origin)
    : m_dims(dims), m_voxel_size(voxel_size), m_origin(origin)
{
    if (dims.nx > kMaxXY || dims.ny > kMaxXY || dims.nz > kMaxZ) {
        throw std::invalid_argument("grid too large for packed site indices");
    }
    m_sites.assign(dims.count(), kNoSite);
}

std::optional<VoxelIndex> DistanceField::site(const VoxelIndex& v) const
{
    const std::uint32_t s = m_sites[linear(v)];
    if (s == kNoSite) return std::nullopt;
    return unpack(s);
}

std::int64_t DistanceField::squared_distance(const VoxelIndex& v) const
{
    const std::uint32_t s = m_sites[linear(v)];
    if (s == kNoSite) return -1;
    const VoxelIndex o = unpack(s);
    const std::int64_t dx = v.i - o.i, dy = v.j - o.j, dz = v.k - o.k;
    return dx * dx + dy * dy + dz * dz;
}

bool DistanceField::has_sites() const
{
    return !m_sites.empty() && m_sites.front() != kNoSite;
}

std::vector<std::int64_t> squared_distances(const DistanceField& field)
{
    const GridDims& d = field.dims();
    std::vector<std::int64_t> out(d.count());
    std::size_t idx = 0;
    for (int k = 0; k < d.nz; ++k) {
        for (int j = 0; j < d.ny; ++j) {
            for (int i = 0; i < d.nx; ++i) out[idx++] = field.squared_distance({i, j, k});
        }
    }
    return out;
}

DistanceField brute_force_edt(const OccupancySnapshot& occupancy)
{
    const GridDims& d = occupancy.dims;
    DistanceField out(d, occupancy.voxel_size, occupancy.origin);

    // sites in lexicographic (i, j, k) order, as floats: squared distances of
    // grids this size are exact in single precision
    std::vector<float> sx, sy, sz;
    std::vector<std::uint32_t> packed;
    for (int i = 0; i < d.nx; ++i) {
        for (int j = 0; j < d.ny; ++j) {
            for (int k = 0; k < d.nz; ++k) {
                if (!occupancy.is_occupied({i, j, k})) continue;
                sx.push_back(static_cast<float>(i));
                sy.push_back(static_cast<float>(j));
                sz.push_back(static_cast<float>(k));
                packed.push_back(DistanceField::pack(i, j, k));
            }
        }
    }
    if (packed.empty()) return out;

    const std::size_t n = packed.size();
    auto sites = out.packed_sites();
    std::size_t idx = 0;
    for (int k = 0; k < d.nz; ++k) {
        for (int j = 0; j < d.ny; ++j) {
            for (int i = 0; i < d.nx; ++i, ++idx) {
                const float fi = static_cast<float>(i), fj = static_cast<float>(j),
                            fk = static_cast<float>(k);
                float best = std::numeric_limits<float>::max();
#pragma omp simd reduction(min : best)
                for (std::size_t s = 0; s < n; ++s) {
                    const float dx = sx[s] - fi, dy = sy[s] - fj, dz = sz[s] - fk;
                    best = std::min(best, dx * dx + dy * dy + dz * dz);
                }
                for (std::size_t s = 0; s < n; ++s) {
                    const float dx = sx[s] - fi, dy = sy[s] - fj, dz = sz[s] - fk;
                    if (dx * dx + dy * dy + dz * dz == best) {
                        sites[idx] = packed[s];
                        break;
                    }
                }
            }
        }
    }
    return out;
}

namespace {

constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max();

// One 1D pass of the separable transform: f holds squared distances (kInf for
// none) at stride `stride`; replaces them with min over u of f(u) + (x-u)^2.
// Integer separator of the two parabolas, floor semantics.
void envelope_pass(std::int64_t* f, int n, std::size_t stride, std::vector<int>& s,
                   std::vector<std::int64_t>& t, std::vector<std::int64_t>& g)
{
    for (int x = 0; x < n; ++x) g[x] = f[x * stride];

    auto floordiv = [](std::int64_t a, std::int64_t b) {
        std::int64_t q = a / b;
        if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
        return q;
    };
    // first position where parabola v is at least as good as parabola u (u < v)
    auto sep = [&](std::int64_t u, std::int64_t v) {
        return floordiv(v * v - u * u + g[v] - g[u], 2 * (v - u)) + 1;
    };

    int q = -1;
    for (int u = 0; u < n; ++u) {
        if (g[u] == kInf) continue;
        while (q >= 0) {
            const std::int64_t start = std::max<std::int64_t>(t[q], 0);
            // does u beat s[q] everywhere from s[q]'s start on?
            const std::int64_t du = start - u, dq = start - s[q];
            if (g[s[q]] + dq * dq > g[u] + du * du) {
                --q;
            } else {
                break;
            }
        }
        if (q < 0) {
            q = 0;
            s[0] = u;
            t[0] = 0;
        } else {
            const std::int64_t w = sep(s[q], u);
            if (w < n) {
                ++q;
                s[q] = u;
                t[q] = w;
            }
        }
    }
    if (q < 0) return;  // no finite values: leave kInf in place
    for (int x = n - 1; x >= 0; --x) {
        const std::int64_t d = x - s[q];
        f[x * stride] = g[s[q]] + d * d;
        if (x == t[q] && q > 0) --q;
    }
}

}  // namespace

std::vector<std::int64_t> reference_edt_squared(const OccupancySnapshot& occupancy)
{
    const GridDims& d = occupancy.dims;
    const std::size_t nx = d.nx, ny = d.ny, nz = d.nz;
    std::vector<std::int64_t> f(d.count());
    for (std::size_t idx = 0; idx < f.size(); ++idx) f[idx] = occupancy.occupied[idx] ? 0 : kInf;

    const int longest = std::max({d.nx, d.ny, d.nz});
    std::vector<int> s(longest);
    std::vector<std::int64_t> t(longest), g(longest);

    for (std::size_t k = 0; k < nz; ++k) {
        for (std::size_t j = 0; j < ny; ++j) envelope_pass(&f[(k * ny + j) * nx], d.nx, 1, s, t, g);
    }
    for (std::size_t k = 0; k < nz; ++k) {
        for (std::size_t i = 0; i < nx; ++i) envelope_pass(&f[k * ny * nx + i], d.ny, nx, s, t, g);
    }
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) envelope_pass(&f[j * nx + i], d.nz, nx * ny, s, t, g);
    }
    for (auto& v : f) {
        if (v == kInf) v = -1;
    }
    return f;
}

std::vector<LineSite> proximate_sites_1d(std::span<const LineSite> sorted_sites)
{
    std::vector<LineSite> stack;
    stack.reserve(sorted_sites.size());
    for (std::size_t idx = 0; idx < sorted_sites.size(); ++idx) {
        const LineSite& c = sorted_sites[idx];
        if (idx > 0 && c.coord <= sorted_sites[idx - 1].coord) {
            throw std::invalid_argument("line sites must be strictly increasing in coord");
        }
        while (stack.size() >= 2) {
            const LineSite& a = stack[stack.size() - 2];
            const LineSite& b = stack.back();
            if (!detail::dominated(a.perp2, a.coord, b.perp2, b.coord, c.perp2, c.coord)) break;
            stack.pop_back();
        }
        stack.push_back(c);
    }
    return stack;
}

std::optional<NearestSite> query_nearest_site(const DistanceField& field, const VoxelIndex& v)
{
    if (!field.dims().contains(v)) throw std::out_of_range("query voxel outside the distance field");
    const auto s = field.site(v);
    if (!s) return std::nullopt;
    const double h = field.voxel_size();
    const Eigen::Vector3d center =
        field.origin() + h * Eigen::Vector3d(s->i + 0.5, s->j + 0.5, s->k + 0.5);
    const Eigen::Vector3d delta(v.i - s->i, v.j - s->j, v.k - s->k);
    return NearestSite{*s, center, h * delta.norm()};
}

void write_distance_dump(std::ostream& out, const DistanceField& field)
{
    const GridDims& d = field.dims();
    out << "# squared voxel distances " << d.nx << ' ' << d.ny << ' ' << d.nz << '\n';
    for (int k = 0; k < d.nz; ++k) {
        out << "# z " << k << '\n';
        for (int j = 0; j < d.ny; ++j) {
            for (int i = 0; i < d.nx; ++i) {
                if (i) out << ' ';
                out << field.squared_distance({i, j, k});
            }
            out << '\n';
        }
    }
}

}  // namespace voxavoid
