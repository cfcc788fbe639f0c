#include "voxavoid/point_cloud.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace voxavoid {

namespace {

Points keep_within_limit(const Points& points, const std::vector<double>& mean_knn, double std_multiplier)
{
    const auto n = static_cast<double>(points.size());
    const double mean = std::accumulate(mean_knn.begin(), mean_knn.end(), 0.0) / n;
    double var = 0.0;
    for (double v : mean_knn) var += (v - mean) * (v - mean);
    const double limit = mean + std_multiplier * std::sqrt(var / n);

    Points out;
    out.reserve(points.size());
    for (std::size_t p = 0; p < points.size(); ++p) {
        if (mean_knn[p] <= limit) out.push_back(points[p]);
    }
    return out;
}

// Mean of the k smallest squared distances' roots, summed in ascending order
// so both implementations agree to the last bit.
double mean_of_smallest(std::vector<double>& d2, std::size_t m, int k)
{
    std::nth_element(d2.begin(), d2.begin() + (k - 1), d2.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(d2.begin(), d2.begin() + k);
    double sum = 0.0;
    for (int t = 0; t < k; ++t) sum += std::sqrt(d2[t]);
    return sum / k;
}

}  // namespace

Points statistical_outlier_filter_reference(const Points& points, int k_neighbors, double std_multiplier)
{
    if (k_neighbors <= 0) throw std::invalid_argument("k_neighbors must be positive");
    const auto n = static_cast<std::ptrdiff_t>(points.size());
    if (n <= k_neighbors) return points;

    std::vector<double> mean_knn(points.size());
    std::vector<double> d2(points.size());
    for (std::ptrdiff_t p = 0; p < n; ++p) {
        std::size_t m = 0;
        for (std::ptrdiff_t q = 0; q < n; ++q) {
            if (q != p) d2[m++] = (points[q] - points[p]).squaredNorm();
        }
        mean_knn[p] = mean_of_smallest(d2, m, k_neighbors);
    }
    return keep_within_limit(points, mean_knn, std_multiplier);
}

Points statistical_outlier_filter(const Points& points, int k_neighbors, double std_multiplier)
{
    if (k_neighbors <= 0) throw std::invalid_argument("k_neighbors must be positive");
    const auto n = static_cast<std::ptrdiff_t>(points.size());
    if (n <= k_neighbors) return points;

    // Uniform bucket grid sized for a few points per occupied cell. Rings of
    // cells are searched outward until the k-th candidate is provably final.
    Eigen::AlignedBox3d box;
    for (const auto& p : points) box.extend(p);
    const Eigen::Vector3d extent = box.sizes().cwiseMax(1e-9);
    const double area = 2.0 * (extent.x() * extent.y() + extent.y() * extent.z() + extent.x() * extent.z());
    const double h = std::max(std::sqrt(area / static_cast<double>(n)) * 2.0, extent.maxCoeff() / 1024.0);
    const auto cell_of = [&](const Eigen::Vector3d& p) {
        const Eigen::Vector3d c = ((p - box.min()) / h).array().floor();
        return Eigen::Vector3i(static_cast<int>(c.x()), static_cast<int>(c.y()), static_cast<int>(c.z()));
    };
    const Eigen::Vector3i cells = cell_of(box.max()) + Eigen::Vector3i::Ones();
    const auto key = [&](int x, int y, int z) {
        return static_cast<std::size_t>(x) + static_cast<std::size_t>(cells.x()) *
                                                 (static_cast<std::size_t>(y) + static_cast<std::size_t>(cells.y()) * z);
    };

    // counting sort of point indices by cell
    std::unordered_map<std::size_t, std::pair<std::size_t, std::size_t>> ranges;
    std::vector<std::size_t> cell_key(points.size());
    for (std::ptrdiff_t p = 0; p < n; ++p) {
        const Eigen::Vector3i c = cell_of(points[p]);
        cell_key[p] = key(c.x(), c.y(), c.z());
        ++ranges[cell_key[p]].second;
    }
    std::size_t offset = 0;
    for (auto& [k, r] : ranges) {
        r.first = offset;
        offset += r.second;
        r.second = r.first;
    }
    std::vector<std::size_t> order(points.size());
    for (std::ptrdiff_t p = 0; p < n; ++p) order[ranges[cell_key[p]].second++] = static_cast<std::size_t>(p);

    std::vector<double> mean_knn(points.size());
    const int max_ring = cells.maxCoeff();
#pragma omp parallel
    {
        std::vector<double> d2;
#pragma omp for schedule(static)
        for (std::ptrdiff_t p = 0; p < n; ++p) {
            const Eigen::Vector3i c = cell_of(points[p]);
            d2.clear();
            for (int r = 0; r <= max_ring; ++r) {
                // shell of cells at Chebyshev distance exactly r
                for (int z = c.z() - r; z <= c.z() + r; ++z) {
                    if (z < 0 || z >= cells.z()) continue;
                    for (int y = c.y() - r; y <= c.y() + r; ++y) {
                        if (y < 0 || y >= cells.y()) continue;
                        const bool face = std::abs(z - c.z()) == r || std::abs(y - c.y()) == r;
                        for (int x = c.x() - r; x <= c.x() + r; x += (face || r == 0) ? 1 : 2 * r) {
                            if (x < 0 || x >= cells.x()) continue;
                            const auto it = ranges.find(key(x, y, z));
                            if (it == ranges.end()) continue;
                            const auto [lo, hi] = it->second;
                            for (std::size_t t = lo; t < hi; ++t) {
                                const std::size_t q = order[t];
                                if (q != static_cast<std::size_t>(p)) d2.push_back((points[q] - points[p]).squaredNorm());
                            }
                        }
                    }
                }
                // everything closer than r * h has been seen once r rings are done
                if (static_cast<int>(d2.size()) >= k_neighbors) {
                    std::nth_element(d2.begin(), d2.begin() + (k_neighbors - 1), d2.end());
                    const double reach = r * h;
                    if (d2[k_neighbors - 1] <= reach * reach) break;
                }
            }
            mean_knn[p] = mean_of_smallest(d2, d2.size(), k_neighbors);
        }
    }
    return keep_within_limit(points, mean_knn, std_multiplier);
}

InsertionStats insert_point_cloud(VoxelGrid& map, const PointCloud& cloud,
                                  const VoxelGrid& robot_mask, const FilterConfig& filter)
{
    if (!map.same_geometry(robot_mask)) {
        throw std::invalid_argument("robot mask geometry differs from the environment map");
    }
    for (const auto& p : cloud.points) {
        if (!p.allFinite()) throw std::invalid_argument("point cloud contains non-finite coordinates");
    }

    InsertionStats stats;
    const Points* pts = &cloud.points;
    Points filtered;
    if (filter.enabled) {
        filtered = statistical_outlier_filter(cloud.points, filter.k_neighbors, filter.std_multiplier);
        stats.filtered_out = cloud.points.size() - filtered.size();
        pts = &filtered;
    }

    const float hit = map.model().hit_logodds;
    for (const auto& p : *pts) {
        const auto v = map.world_to_voxel(cloud.sensor_pose * p);
        if (!v) {
            ++stats.out_of_bounds;
            continue;
        }
        if (robot_mask.occupied(*v)) {
            ++stats.robot_skipped;
            continue;
        }
        map.add_logodds(*v, hit);
        ++stats.inserted;
    }
    return stats;
}

std::size_t insert_voxel_set(VoxelGrid& map, const LocalVoxelSet& set,
                             const Eigen::Isometry3d& body_to_world)
{
    std::size_t dropped = 0;
    for (const auto& v : set.voxels) {
        const Eigen::Vector3d local =
            set.origin + set.voxel_size * Eigen::Vector3d(v.i + 0.5, v.j + 0.5, v.k + 0.5);
        const auto idx = map.world_to_voxel(body_to_world * local);
        if (!idx) {
            ++dropped;
            continue;
        }
        map.mark_occupied(*idx);
    }
    return dropped;
}

Points read_xyz(std::istream& in)
{
    Points out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        double x, y, z;
        if (!(ls >> x >> y >> z)) {
            throw std::runtime_error("malformed point on line " + std::to_string(lineno));
        }
        std::string rest;
        if (ls >> rest) throw std::runtime_error("extra tokens on line " + std::to_string(lineno));
        if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
            throw std::runtime_error("non-finite point on line " + std::to_string(lineno));
        }
        out.emplace_back(x, y, z);
    }
    return out;
}

Points load_xyz(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open point cloud file " + path.string());
    return read_xyz(in);
}

void write_xyz(std::ostream& out, const Points& points)
{
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& p : points) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
}

}  // namespace voxavoid
