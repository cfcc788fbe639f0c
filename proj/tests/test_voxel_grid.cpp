#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "voxavoid/point_cloud.hpp"
#include "voxavoid/voxel_grid.hpp"

using namespace voxavoid;

TEST_CASE("grid construction")
{
    VoxelGrid g({4, 4, 4}, 0.1, Eigen::Vector3d::Zero());
    CHECK(g.dims().count() == 64);
    CHECK(g.occupied_voxels().empty());
    for (float c : g.cells()) CHECK(c == 0.0f);

    VoxelGrid big({192, 192, 128}, 0.02, Eigen::Vector3d(-1.92, -1.92, 0));
    CHECK(big.dims().count() == 4718592);

    CHECK_THROWS_AS(VoxelGrid({0, 4, 4}, 0.1, Eigen::Vector3d::Zero()), std::invalid_argument);
    CHECK_THROWS_AS(VoxelGrid({4, -1, 4}, 0.1, Eigen::Vector3d::Zero()), std::invalid_argument);
    CHECK_THROWS_AS(VoxelGrid({4, 4, 4}, 0.0, Eigen::Vector3d::Zero()), std::invalid_argument);
    CHECK_THROWS_AS(VoxelGrid({4, 4, 4}, -0.1, Eigen::Vector3d::Zero()), std::invalid_argument);
}

TEST_CASE("world to voxel uses floor with the boundary owned by the upper voxel")
{
    VoxelGrid g({10, 10, 10}, 0.1, Eigen::Vector3d::Zero());
    CHECK(g.world_to_voxel({0.25, 0.0, 0.95}) == VoxelIndex{2, 0, 9});
    CHECK_FALSE(g.world_to_voxel({-0.01, 0.0, 0.0}));
    CHECK(g.world_to_voxel({0.2, 0.0, 0.0}) == VoxelIndex{2, 0, 0});
    CHECK(g.world_to_voxel({0.3, 0.7, 0.6}) == VoxelIndex{3, 7, 6});
    CHECK_FALSE(g.world_to_voxel({1.0, 0.5, 0.5}));
    CHECK(g.world_to_voxel({0.9999, 0.5, 0.5}) == VoxelIndex{9, 5, 5});
}

TEST_CASE("voxel center round trip on every voxel")
{
    VoxelGrid g({7, 5, 6}, 0.037, Eigen::Vector3d(-0.3, 1.1, 0.02));
    for (int k = 0; k < 6; ++k)
        for (int j = 0; j < 5; ++j)
            for (int i = 0; i < 7; ++i) {
                const VoxelIndex v{i, j, k};
                CHECK(g.world_to_voxel(g.voxel_center(v)) == v);
                CHECK(g.unlinear(g.linear(v)) == v);
            }
}

TEST_CASE("log-odds clamp and clear")
{
    VoxelGrid g({3, 3, 3}, 0.1, Eigen::Vector3d::Zero());
    const VoxelIndex v{1, 1, 1};
    for (int n = 0; n < 20; ++n) g.add_logodds(v, g.model().hit_logodds);
    CHECK(g.logodds(v) == g.model().l_max);
    g.add_logodds(v, -100.0f);
    CHECK(g.logodds(v) == g.model().l_min);
    g.mark_occupied(v);
    CHECK(g.occupied_voxels() == std::vector<VoxelIndex>{v});
    g.clear();
    CHECK(g.occupied_voxels().empty());
    g.clear();
    CHECK(g.occupied_voxels().empty());
}

TEST_CASE("occupied voxels are listed lexicographically")
{
    VoxelGrid g({3, 3, 3}, 1.0, Eigen::Vector3d::Zero());
    g.mark_occupied({2, 0, 0});
    g.mark_occupied({0, 2, 1});
    g.mark_occupied({0, 0, 2});
    const std::vector<VoxelIndex> expected{{0, 0, 2}, {0, 2, 1}, {2, 0, 0}};
    CHECK(g.occupied_voxels() == expected);

    VoxelGrid full({2, 3, 2}, 1.0, Eigen::Vector3d::Zero());
    for (std::size_t idx = 0; idx < full.dims().count(); ++idx) full.mark_occupied(full.unlinear(idx));
    CHECK(full.occupied_voxels().size() == 12);
}

TEST_CASE("outlier filter removes an isolated point")
{
    Points pts(10, Eigen::Vector3d::Zero());
    pts.emplace_back(10.0, 0.0, 0.0);

    // hand oracle: cluster points have mean 5-NN distance 0, the far one 10
    const double mean = 10.0 / 11.0;
    const double stddev = std::sqrt((10 * mean * mean + (10 - mean) * (10 - mean)) / 11.0);
    REQUIRE(10.0 > mean + stddev);
    REQUIRE(0.0 <= mean + stddev);

    const auto out = statistical_outlier_filter(pts, 5, 1.0);
    CHECK(out.size() == 10);
    for (const auto& p : out) CHECK(p.norm() == 0.0);
}

TEST_CASE("outlier filter edge cases")
{
    const Points cluster(20, Eigen::Vector3d(1, 2, 3));
    CHECK(statistical_outlier_filter(cluster, 8, 1.0).size() == 20);
    CHECK(statistical_outlier_filter({}, 8, 1.0).empty());
    const Points few(5, Eigen::Vector3d::Zero());
    CHECK(statistical_outlier_filter(few, 8, 1.0).size() == 5);
}

TEST_CASE("bucketed outlier filter agrees with the all-pairs reference")
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> jitter(0.0, 0.003);
    for (int trial = 0; trial < 12; ++trial) {
        Points pts;
        const int n = 50 + 150 * trial;
        for (int p = 0; p < n; ++p) {
            // points on a box surface, a thin rod, and sparse clutter
            const int kind = p % 10;
            if (kind < 7) {
                Eigen::Vector3d v(u(rng), u(rng), u(rng));
                v[static_cast<int>(rng() % 3)] = (rng() & 1) ? 0.3 : -0.3;
                pts.push_back(0.3 * v + Eigen::Vector3d(jitter(rng), jitter(rng), jitter(rng)));
            } else if (kind < 9) {
                pts.emplace_back(0.8 + 0.5 * u(rng), 0.0, 0.0);
            } else {
                pts.emplace_back(2.0 * u(rng), 2.0 * u(rng), 2.0 * u(rng));
            }
        }
        for (int k : {1, 4, 8}) {
            const auto fast = statistical_outlier_filter(pts, k, 1.0);
            const auto slow = statistical_outlier_filter_reference(pts, k, 1.0);
            REQUIRE(fast.size() == slow.size());
            for (std::size_t i = 0; i < fast.size(); ++i) CHECK(fast[i] == slow[i]);
        }
    }
}

TEST_CASE("point insertion needs the right number of hits")
{
    for (double threshold : {0.5, 0.7, 0.9}) {
        OccupancyModel model;
        model.occupancy_threshold = threshold;
        VoxelGrid map({4, 4, 4}, 0.1, Eigen::Vector3d::Zero(), model);
        VoxelGrid mask({4, 4, 4}, 0.1, Eigen::Vector3d::Zero(), model);
        PointCloud cloud{{Eigen::Vector3d(0.15, 0.15, 0.15)}, Eigen::Isometry3d::Identity()};
        const FilterConfig no_filter{false, 8, 1.0};

        // oracle: smallest n with n * hit > logit(threshold)
        const double logit = std::log(threshold / (1 - threshold));
        int expected = 1;
        while (expected * static_cast<double>(model.hit_logodds) <= logit) ++expected;

        int hits = 0;
        while (!map.occupied({1, 1, 1})) {
            insert_point_cloud(map, cloud, mask, no_filter);
            ++hits;
            REQUIRE(hits < 100);
        }
        CHECK(hits == expected);
        if (threshold == 0.5) CHECK(hits == 1);
    }
}

TEST_CASE("robot mask excludes points and counts them")
{
    VoxelGrid map({4, 4, 4}, 0.1, Eigen::Vector3d::Zero());
    VoxelGrid mask({4, 4, 4}, 0.1, Eigen::Vector3d::Zero());
    mask.mark_occupied({2, 2, 2});
    PointCloud cloud{{Eigen::Vector3d(0.25, 0.25, 0.25), Eigen::Vector3d(5, 5, 5)},
                     Eigen::Isometry3d::Identity()};
    const auto stats = insert_point_cloud(map, cloud, mask, {false, 8, 1.0});
    CHECK(stats.robot_skipped == 1);
    CHECK(stats.out_of_bounds == 1);
    CHECK(stats.inserted == 0);
    CHECK(map.logodds({2, 2, 2}) == 0.0f);
    for (float c : map.cells()) CHECK(c == 0.0f);

    VoxelGrid other({4, 4, 5}, 0.1, Eigen::Vector3d::Zero());
    CHECK_THROWS_AS(insert_point_cloud(map, cloud, other, {}), std::invalid_argument);
}

TEST_CASE("sensor pose is applied before discretization")
{
    VoxelGrid map({4, 4, 4}, 0.1, Eigen::Vector3d::Zero());
    VoxelGrid mask({4, 4, 4}, 0.1, Eigen::Vector3d::Zero());
    Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
    pose.translation() = Eigen::Vector3d(0.2, 0.0, 0.1);
    PointCloud cloud{{Eigen::Vector3d(0.05, 0.05, 0.05)}, pose};
    insert_point_cloud(map, cloud, mask, {false, 8, 1.0});
    CHECK(map.occupied_voxels() == std::vector<VoxelIndex>{{2, 0, 1}});

    VoxelGrid untouched({4, 4, 4}, 0.1, Eigen::Vector3d::Zero());
    insert_point_cloud(untouched, PointCloud{}, mask, {});
    for (float c : untouched.cells()) CHECK(c == 0.0f);
}

TEST_CASE("insertion is monotone and never touches masked voxels")
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.05, 0.45);
    VoxelGrid map({4, 4, 4}, 0.1, Eigen::Vector3d::Zero());
    VoxelGrid mask({4, 4, 4}, 0.1, Eigen::Vector3d::Zero());
    for (int n = 0; n < 10; ++n) mask.mark_occupied(mask.unlinear(rng() % 64));
    map.set_logodds({0, 0, 0}, -1.5f);
    for (int round = 0; round < 10; ++round) {
        const std::vector<float> before(map.cells().begin(), map.cells().end());
        PointCloud cloud;
        for (int p = 0; p < 30; ++p) cloud.points.emplace_back(u(rng), u(rng), u(rng));
        insert_point_cloud(map, cloud, mask, {true, 4, 1.0});
        for (std::size_t idx = 0; idx < before.size(); ++idx) {
            CHECK(map.cells()[idx] >= before[idx]);
            if (mask.occupied(mask.unlinear(idx))) CHECK(map.cells()[idx] == before[idx]);
        }
    }
}

TEST_CASE("clear then insert equals insert into a fresh grid")
{
    VoxelGrid a({5, 5, 5}, 0.1, Eigen::Vector3d::Zero());
    VoxelGrid b({5, 5, 5}, 0.1, Eigen::Vector3d::Zero());
    VoxelGrid mask({5, 5, 5}, 0.1, Eigen::Vector3d::Zero());
    PointCloud cloud{{Eigen::Vector3d(0.11, 0.21, 0.31), Eigen::Vector3d(0.41, 0.01, 0.2)},
                     Eigen::Isometry3d::Identity()};
    a.mark_occupied({4, 4, 4});
    a.clear();
    insert_point_cloud(a, cloud, mask, {false, 8, 1.0});
    insert_point_cloud(b, cloud, mask, {false, 8, 1.0});
    CHECK(std::equal(a.cells().begin(), a.cells().end(), b.cells().begin()));
    CHECK(a.occupied_voxels() == b.occupied_voxels());
}

TEST_CASE("voxel set insertion")
{
    const LocalVoxelSet single{Eigen::Vector3d::Zero(), 0.1, {{0, 0, 0}}};
    VoxelGrid g({4, 4, 4}, 0.1, Eigen::Vector3d::Zero());
    CHECK(insert_voxel_set(g, single, Eigen::Isometry3d::Identity()) == 0);
    CHECK(g.occupied_voxels() == std::vector<VoxelIndex>{{0, 0, 0}});
    CHECK(g.logodds({0, 0, 0}) == g.model().l_max);

    g.clear();
    Eigen::Isometry3d shift = Eigen::Isometry3d::Identity();
    shift.translation() = Eigen::Vector3d(0.1, 0, 0);
    insert_voxel_set(g, single, shift);
    CHECK(g.occupied_voxels() == std::vector<VoxelIndex>{{1, 0, 0}});

    g.clear();
    shift.translation() = Eigen::Vector3d(-0.1, 0, 0);
    CHECK(insert_voxel_set(g, single, shift) == 1);
    CHECK(g.occupied_voxels().empty());
}

TEST_CASE("rotated bar rediscretizes along the other axis")
{
    const LocalVoxelSet bar{Eigen::Vector3d::Zero(), 0.1, {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}};
    VoxelGrid g({20, 20, 20}, 0.1, Eigen::Vector3d(-1, -1, -1));
    const Eigen::Isometry3d rot(Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitZ()));
    insert_voxel_set(g, bar, rot);

    // oracle: enumerate the rotated centers by hand, (x, y) -> (-y, x)
    std::set<VoxelIndex> expected;
    for (int a = 0; a < 3; ++a) {
        const Eigen::Vector3d c(0.05 + 0.1 * a, 0.05, 0.05);
        const Eigen::Vector3d r(-c.y(), c.x(), c.z());
        expected.insert(*g.world_to_voxel(r));
    }
    const auto occ = g.occupied_voxels();
    CHECK(occ.size() >= 2);
    CHECK(occ.size() <= 4);
    CHECK(std::set<VoxelIndex>(occ.begin(), occ.end()) == expected);
    for (const auto& v : occ) CHECK(v.i == occ.front().i);
}

TEST_CASE("xyz reader")
{
    std::istringstream in("# header\n0 0 0\n\n  1.5 -2 3e-1\n# trailing\n");
    const auto pts = read_xyz(in);
    REQUIRE(pts.size() == 2);
    CHECK(pts[1].isApprox(Eigen::Vector3d(1.5, -2, 0.3)));

    std::istringstream bad("1 2\n");
    CHECK_THROWS(read_xyz(bad));
    std::istringstream extra("1 2 3 4\n");
    CHECK_THROWS(read_xyz(extra));

    std::ostringstream out;
    write_xyz(out, pts);
    std::istringstream back(out.str());
    const auto again = read_xyz(back);
    CHECK(again == pts);
}
