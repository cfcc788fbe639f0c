#pragma once

#include <cstdint>
#include <random>

#include "voxavoid/edt.hpp"

namespace voxavoid::testing {

inline OccupancySnapshot random_snapshot(GridDims dims, double density, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution occ(density);
    OccupancySnapshot s{dims, 1.0, Eigen::Vector3d::Zero(),
                        std::vector<std::uint8_t>(dims.count(), 0)};
    for (auto& c : s.occupied) c = occ(rng) ? 1 : 0;
    return s;
}

}  // namespace voxavoid::testing
