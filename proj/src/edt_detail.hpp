#pragma once

#include <cstdint>

namespace voxavoid::detail {

// True when the middle site b has an empty (or single point) Voronoi interval
// on the line between neighbors a and c. Coordinates satisfy ca < cb < cc.
inline bool dominated(std::int64_t ga, std::int64_t ca, std::int64_t gb, std::int64_t cb,
                      std::int64_t gc, std::int64_t cc)
{
    const std::int64_t num_ab = gb - ga + cb * cb - ca * ca;
    const std::int64_t num_bc = gc - gb + cc * cc - cb * cb;
    return num_ab * (cc - cb) >= num_bc * (cb - ca);
}

}  // namespace voxavoid::detail
