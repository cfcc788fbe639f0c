// Parallel banding exact EDT.
//
// Phase 1 sweeps every x-row, band by band, then propagates the nearest site
// across band boundaries. Phases 2/3 build, per column of each z-slice, the
// stack of proximate sites along y (band-local stacks merged afterwards) and
// answer the nearest-site query for every voxel of the column. Phase 4 runs
// the same column machinery along z over the 2D result, which yields the 3D
// transform.
//
// Every comparison is done on integer squared distances and every tie goes
// to the lower coordinate, so the output is a pure function of the input.

#include "voxavoid/edt.hpp"

#include "edt_detail.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include <omp.h>

namespace voxavoid {

namespace {

constexpr std::uint32_t kNone = DistanceField::kNoSite;

struct Band
{
    int begin;
    int end;
};

int effective_bands(int m, int extent)
{
    return std::clamp(m, 1, extent);
}

Band band_range(int b, int m, int extent)
{
    const int size = extent / m;
    return {b * size, b == m - 1 ? extent : (b + 1) * size};
}

int resolve_workers(int workers)
{
    return workers > 0 ? workers : omp_get_max_threads();
}

void row_sweep(const std::uint8_t* occ, std::uint32_t* out, const GridDims& d, int m1,
               int workers)
{
    const int nx = d.nx;
    const long rows = static_cast<long>(d.ny) * d.nz;
    const int m = effective_bands(m1, nx);
    const long tasks = rows * m;

    std::vector<std::int16_t> first(static_cast<std::size_t>(tasks));
    std::vector<std::int16_t> last(static_cast<std::size_t>(tasks));

#pragma omp parallel for num_threads(workers) schedule(static)
    for (long t = 0; t < tasks; ++t) {
        const long row = t / m;
        const Band band = band_range(static_cast<int>(t % m), m, nx);
        const std::uint8_t* r = occ + row * nx;
        std::int16_t f = -1, l = -1;
        for (int x = band.begin; x < band.end; ++x) {
            if (r[x]) {
                if (f < 0) f = static_cast<std::int16_t>(x);
                l = static_cast<std::int16_t>(x);
            }
        }
        first[t] = f;
        last[t] = l;
    }

#pragma omp parallel num_threads(workers)
    {
        std::vector<int> left_of(static_cast<std::size_t>(nx));
#pragma omp for schedule(static)
        for (long t = 0; t < tasks; ++t) {
            const long row = t / m;
            const int b = static_cast<int>(t % m);
            const Band band = band_range(b, m, nx);
            const int j = static_cast<int>(row % d.ny);
            const int k = static_cast<int>(row / d.ny);
            const std::uint8_t* r = occ + row * nx;
            std::uint32_t* o = out + row * nx;

            // across-band propagation: nearest sites just outside this band
            int left = -1;
            for (int bb = b - 1; bb >= 0 && left < 0; --bb) left = last[row * m + bb];
            int right = -1;
            for (int bb = b + 1; bb < m && right < 0; ++bb) right = first[row * m + bb];

            int cur = left;
            for (int x = band.begin; x < band.end; ++x) {
                if (r[x]) cur = x;
                left_of[x] = cur;
            }
            cur = right;
            for (int x = band.end - 1; x >= band.begin; --x) {
                if (r[x]) cur = x;
                const int l = left_of[x];
                int pick;
                if (l < 0) {
                    pick = cur;
                } else if (cur < 0) {
                    pick = l;
                } else {
                    pick = (x - l) <= (cur - x) ? l : cur;
                }
                o[x] = pick < 0 ? kNone : DistanceField::pack(pick, j, k);
            }
        }
    }
}

// Proximate-site stacks and nearest-site queries along one axis.
//
// The field is seen as `groups` independent 2D arrays; in each, `lines`
// consecutive sweep positions of `lanes` contiguous voxels. `perp(g, lane, s)`
// is the squared distance of site s from the line (g, lane). A site's position
// along the sweep is the line it was read from.
struct LineLayout
{
    int groups;
    int lanes;
    int lines;
    std::size_t group_stride;
    std::size_t line_stride;
};

// Stack entries carry the site together with its perpendicular distance and
// sweep coordinate so the inner loops never decode packed indices.
struct StackEntry
{
    std::int32_t perp;
    std::int32_t coord;
    std::uint32_t site;
};

inline bool dominated(const StackEntry& a, const StackEntry& b, std::int64_t gc, std::int64_t cc)
{
    return detail::dominated(a.perp, a.coord, b.perp, b.coord, gc, cc);
}

template <class Perp>
void line_pass(std::uint32_t* field, StackEntry* stacks, const LineLayout& lay, int m2, int m3,
               int workers, Perp perp)
{
    const int bands2 = effective_bands(m2, lay.lines);
    const int bands3 = effective_bands(m3, lay.lines);
    const std::size_t lane_slots = static_cast<std::size_t>(lay.groups) * lay.lanes;
    std::vector<int> counts(lane_slots * bands2);
    std::vector<int> totals(lane_slots);

    auto stack_of = [&](int g, int lane) {
        return stacks + (static_cast<std::size_t>(g) * lay.lanes + lane) * lay.lines;
    };

    // ComputeProximateSite, band-local
    const long build_tasks = static_cast<long>(lay.groups) * bands2;
#pragma omp parallel num_threads(workers)
    {
        std::vector<int> cnt(static_cast<std::size_t>(lay.lanes));
#pragma omp for schedule(static)
        for (long t = 0; t < build_tasks; ++t) {
            const int g = static_cast<int>(t / bands2);
            const int b = static_cast<int>(t % bands2);
            const Band band = band_range(b, bands2, lay.lines);
            std::fill(cnt.begin(), cnt.end(), 0);
            const std::uint32_t* gbase = field + g * lay.group_stride;
            StackEntry* gstacks = stack_of(g, 0) + band.begin;
            for (int l = band.begin; l < band.end; ++l) {
                const std::uint32_t* row = gbase + l * lay.line_stride;
                for (int lane = 0; lane < lay.lanes; ++lane) {
                    const std::uint32_t s = row[lane];
                    if (s == kNone) continue;
                    StackEntry* st = gstacks + static_cast<std::size_t>(lane) * lay.lines;
                    int n = cnt[lane];
                    const std::int32_t gc = perp(g, lane, s);
                    while (n >= 2 && dominated(st[n - 2], st[n - 1], gc, l)) --n;
                    st[n++] = {gc, l, s};
                    cnt[lane] = n;
                }
            }
            for (int lane = 0; lane < lay.lanes; ++lane) {
                counts[(static_cast<std::size_t>(g) * lay.lanes + lane) * bands2 + b] = cnt[lane];
            }
        }
    }

    // merge band stacks in place; the write position never passes the read
    // position, so no scratch is needed
#pragma omp parallel for num_threads(workers) schedule(static)
    for (long slot = 0; slot < static_cast<long>(lane_slots); ++slot) {
        StackEntry* st = stacks + static_cast<std::size_t>(slot) * lay.lines;
        const int* c = &counts[static_cast<std::size_t>(slot) * bands2];
        int n = c[0];
        for (int b = 1; b < bands2; ++b) {
            const int off = band_range(b, bands2, lay.lines).begin;
            for (int t = 0; t < c[b]; ++t) {
                const StackEntry e = st[off + t];
                while (n >= 2 && dominated(st[n - 2], st[n - 1], e.perp, e.coord)) --n;
                st[n++] = e;
            }
        }
        totals[slot] = n;
    }

    // QueryNearestSite: walk each stack forward while the next site is
    // strictly closer
    const long query_tasks = static_cast<long>(lay.groups) * bands3;
#pragma omp parallel num_threads(workers)
    {
        std::vector<int> pos(static_cast<std::size_t>(lay.lanes));
#pragma omp for schedule(static)
        for (long t = 0; t < query_tasks; ++t) {
            const int g = static_cast<int>(t / bands3);
            const Band band = band_range(static_cast<int>(t % bands3), bands3, lay.lines);
            std::fill(pos.begin(), pos.end(), 0);
            std::uint32_t* gbase = field + g * lay.group_stride;
            const int* tot = &totals[static_cast<std::size_t>(g) * lay.lanes];
            const StackEntry* gstacks = stack_of(g, 0);
            for (int l = band.begin; l < band.end; ++l) {
                std::uint32_t* row = gbase + l * lay.line_stride;
                for (int lane = 0; lane < lay.lanes; ++lane) {
                    const int n = tot[lane];
                    if (n == 0) {
                        row[lane] = kNone;
                        continue;
                    }
                    const StackEntry* st = gstacks + static_cast<std::size_t>(lane) * lay.lines;
                    int p = pos[lane];
                    std::int64_t dl = l - st[p].coord;
                    std::int64_t best = st[p].perp + dl * dl;
                    while (p + 1 < n) {
                        const std::int64_t dn = l - st[p + 1].coord;
                        const std::int64_t next = st[p + 1].perp + dn * dn;
                        if (next >= best) break;
                        best = next;
                        ++p;
                    }
                    pos[lane] = p;
                    row[lane] = st[p].site;
                }
            }
        }
    }
}

inline std::int32_t sq(std::int32_t v)
{
    return v * v;
}

}  // namespace

BandConfig BandConfig::for_workers(int workers)
{
    return {1, 1, std::max(2, workers)};
}

namespace {

void check_input(const OccupancySnapshot& occupancy, const EdtOptions& options)
{
    const GridDims& d = occupancy.dims;
    if (d.nx <= 0 || d.ny <= 0 || d.nz <= 0) throw std::invalid_argument("empty grid");
    if (occupancy.occupied.size() != d.count()) {
        throw std::invalid_argument("occupancy size does not match dimensions");
    }
    const BandConfig& bc = options.bands;
    if (bc.m1 <= 0 || bc.m2 <= 0 || bc.m3 <= 0) throw std::invalid_argument("band counts must be positive");
}

}  // namespace

DistanceField pba_row_phase(const OccupancySnapshot& occupancy, const EdtOptions& options)
{
    check_input(occupancy, options);
    DistanceField out(occupancy.dims, occupancy.voxel_size, occupancy.origin);
    row_sweep(occupancy.occupied.data(), out.packed_sites().data(), occupancy.dims,
              options.bands.m1, resolve_workers(options.workers));
    return out;
}

DistanceField pba_edt(const OccupancySnapshot& occupancy, const EdtOptions& options)
{
    check_input(occupancy, options);
    const GridDims& d = occupancy.dims;
    const BandConfig& bc = options.bands;

    DistanceField out(d, occupancy.voxel_size, occupancy.origin);
    const int workers = resolve_workers(options.workers);
    std::uint32_t* field = out.packed_sites().data();

    row_sweep(occupancy.occupied.data(), field, d, bc.m1, workers);

    std::unique_ptr<StackEntry[]> stacks(new StackEntry[d.count()]);
    const auto nx = static_cast<std::size_t>(d.nx);
    const auto ny = static_cast<std::size_t>(d.ny);

    // columns along y inside every z slice
    line_pass(
        field, stacks.get(), LineLayout{d.nz, d.nx, d.ny, nx * ny, nx}, bc.m2, bc.m3, workers,
        [](int, int lane, std::uint32_t s) { return sq(lane - static_cast<int>(s & 0x7FFu)); });

    // columns along z for every (x, y)
    line_pass(
        field, stacks.get(), LineLayout{d.ny, d.nx, d.nz, nx, nx * ny}, bc.m2, bc.m3, workers,
        [](int g, int lane, std::uint32_t s) {
            return sq(lane - static_cast<int>(s & 0x7FFu)) +
                   sq(g - static_cast<int>((s >> 11) & 0x7FFu));
        });

    return out;
}

}  // namespace voxavoid
