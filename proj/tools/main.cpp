#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>

#include <omp.h>

#include <CLI11.hpp>

#include "checks.hpp"
#include "voxavoid/edt.hpp"
#include "voxavoid/point_cloud.hpp"
#include "voxavoid/sim.hpp"
#include "voxavoid/ui_server.hpp"

using namespace voxavoid;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int)
{
    g_stop = true;
}

template <class T>
std::string show(T v)
{
    if constexpr (std::is_floating_point_v<T>) {
        if (std::isinf(v)) return "n/a";
        std::ostringstream s;
        s << std::setprecision(4) << v;
        return s.str();
    } else {
        return std::to_string(v);
    }
}

void print_summary(const std::string& name, const RunResult& r, double dt)
{
    const auto& m = r.metrics;
    std::cout << "scenario            " << name << "\n"
              << "ticks               " << r.ticks << " (" << show(r.ticks * dt) << " s simulated)\n"
              << "min env margin      " << show(m.min_env_margin) << " m\n"
              << "min self margin     " << show(m.min_self_margin) << " m\n"
              << "max |delta qdot|    " << show(m.max_qdot_jump) << " rad/s\n"
              << "max env activation  " << show(m.max_env_activation) << "\n"
              << "final ee error      " << show(m.final_ee_position_error) << " m, "
              << show(m.final_ee_rotation_error) << " rad\n"
              << "edt runs            " << m.env_edt_runs << " env, " << m.self_edt_runs << " self\n"
              << "degenerate rows     " << m.degenerate_events << "\n"
              << "wall time           " << show(m.wall_seconds) << " s\n";
    if (r.fault) std::cout << "FAULT               " << r.fault_message << "\n";
}

struct RunArgs
{
    std::string scenario;
    std::string csv;
    long ticks = -1;
    bool no_regularization = false;
    int serve = -1;
    std::string address = "127.0.0.1";
};

int cmd_run(const RunArgs& a)
{
    Scenario s = Scenario::load(a.scenario);
    if (a.no_regularization) s.controller.regularization.enabled = false;

    if (a.serve >= 0) {
        Simulation sim(s);
        std::vector<int> ids;
        for (const auto& o : sim.obstacles().specs()) ids.push_back(o.id);
        UiServer server(ids, static_cast<unsigned short>(a.serve), a.address);
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        std::cout << "serving ws://" << a.address << ":" << server.port() << "/ws (Ctrl-C to stop)" << std::endl;
        const long ticks = run_interactive(sim, server, g_stop);
        server.stop();
        std::cout << "stopped after " << ticks << " ticks" << std::endl;
        return sim.state().fault ? 1 : 0;
    }

    std::ofstream csv;
    RunOptions opt;
    opt.max_ticks = a.ticks;
    if (!a.csv.empty()) {
        csv.open(a.csv);
        if (!csv) throw std::runtime_error("cannot write " + a.csv);
        opt.csv = &csv;
    }
    const RunResult r = run_scenario(s, opt);
    print_summary(s.name, r, s.dt);
    return r.fault ? 1 : 0;
}

struct BenchArgs
{
    std::vector<std::string> dims{"192,192,128"};
    double voxel = 0.02;
    double density = 0.01;
    std::string bands;
    int workers = 0;
    int repeat = 10;
    std::uint64_t seed = 1;
};

std::vector<int> parse_ints(const std::string& text, std::size_t n, const char* what)
{
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        const int v = std::stoi(item, &used);
        if (used != item.size() || v <= 0) throw std::invalid_argument(std::string("bad ") + what + " '" + text + "'");
        out.push_back(v);
    }
    if (out.size() != n) throw std::invalid_argument(std::string(what) + " needs " + std::to_string(n) + " values");
    return out;
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

int cmd_bench(const BenchArgs& a)
{
    const int workers = a.workers > 0 ? a.workers : omp_get_max_threads();
    BandConfig bands = BandConfig::for_workers(workers);
    if (!a.bands.empty()) {
        const auto b = parse_ints(a.bands, 3, "--bands");
        bands = {b[0], b[1], b[2]};
    }
    if (a.repeat < 1) throw std::invalid_argument("--repeat must be at least 1");
    if (a.density < 0.0 || a.density > 1.0) throw std::invalid_argument("--density must be in [0, 1]");

    std::cout << "EDT pipeline, voxel size " << a.voxel * 100 << " cm, density " << a.density * 100
              << " %, bands " << bands.m1 << "," << bands.m2 << "," << bands.m3 << ", " << workers
              << " workers, median of " << a.repeat << "\n\n";
    std::cout << std::left << std::setw(18) << "Map dimension" << std::right << std::setw(12) << "Occupied"
              << std::setw(13) << "Clear (ms)" << std::setw(14) << "Insert (ms)" << std::setw(15) << "PBA EDT (ms)"
              << std::setw(10) << "Hz" << "\n";
    std::cout << std::string(82, '-') << "\n";

    using clock = std::chrono::steady_clock;
    const auto ms_since = [](clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    };
    for (const auto& text : a.dims) {
        const auto d = parse_ints(text, 3, "--dims");
        const GridDims dims{d[0], d[1], d[2]};
        VoxelGrid map(dims, a.voxel, Eigen::Vector3d::Zero());
        const VoxelGrid no_mask(dims, a.voxel, Eigen::Vector3d::Zero());

        // One point at a random spot inside each sampled voxel.
        std::mt19937_64 rng(a.seed);
        std::bernoulli_distribution pick(a.density);
        std::uniform_real_distribution<double> jitter(0.05, 0.95);
        PointCloud cloud;
        for (int k = 0; k < dims.nz; ++k)
            for (int j = 0; j < dims.ny; ++j)
                for (int i = 0; i < dims.nx; ++i)
                    if (pick(rng)) {
                        cloud.points.emplace_back((i + jitter(rng)) * a.voxel, (j + jitter(rng)) * a.voxel,
                                                  (k + jitter(rng)) * a.voxel);
                    }
        const FilterConfig no_filter{false, 8, 1.0};

        std::vector<double> clear_ms, insert_ms, edt_ms;
        std::size_t occupied = 0;
        for (int r = 0; r <= a.repeat; ++r) {  // r == 0 warms up
            auto t0 = clock::now();
            map.clear();
            const double c = ms_since(t0);
            t0 = clock::now();
            insert_point_cloud(map, cloud, no_mask, no_filter);
            const double ins = ms_since(t0);
            t0 = clock::now();
            const auto field = pba_edt(OccupancySnapshot::of(map), {bands, workers});
            const double e = ms_since(t0);
            if (r == 0) {
                occupied = map.occupied_voxels().size();
                continue;
            }
            clear_ms.push_back(c);
            insert_ms.push_back(ins);
            edt_ms.push_back(e);
        }
        const double edt = median(edt_ms);
        std::cout << std::left << std::setw(18) << (std::to_string(dims.nx) + "x" + std::to_string(dims.ny) + "x" +
                                                    std::to_string(dims.nz))
                  << std::right << std::setw(12) << occupied << std::fixed << std::setprecision(4) << std::setw(13)
                  << median(clear_ms) << std::setw(14) << median(insert_ms) << std::setw(15) << edt
                  << std::setprecision(1) << std::setw(10) << 1000.0 / edt << std::defaultfloat << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Voxel-map distance fields and task-priority collision avoidance"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run a scenario and print its metrics");
    run_cmd->add_option("scenario", run.scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--csv", run.csv, "Write the per-tick log");
    run_cmd->add_option("--ticks", run.ticks, "Stop after N ticks")->check(CLI::NonNegativeNumber);
    run_cmd->add_flag("--no-regularization", run.no_regularization, "Plain weighted least squares per level");
    auto* serve = run_cmd->add_option("--serve", run.serve, "Run live and serve /ws on this port")
                      ->check(CLI::Range(0, 65535));
    run_cmd->add_option("--address", run.address, "Listen address for --serve")->needs(serve);
    run_cmd->get_option("--csv")->excludes(serve);
    run_cmd->get_option("--ticks")->excludes(serve);

    BenchArgs bench;
    auto* bench_cmd = app.add_subcommand("bench", "Benchmarks");
    bench_cmd->require_subcommand(1);
    auto* edt_cmd = bench_cmd->add_subcommand("edt", "Clear, insert and EDT timings per map size");
    edt_cmd->add_option("--dims", bench.dims, "NX,NY,NZ (repeatable)")->take_all();
    edt_cmd->add_option("--voxel", bench.voxel, "Voxel size in m")->check(CLI::PositiveNumber);
    edt_cmd->add_option("--density", bench.density, "Fraction of voxels hit by the cloud");
    edt_cmd->add_option("--bands", bench.bands, "m1,m2,m3 (default from the worker count)");
    edt_cmd->add_option("--workers", bench.workers, "OpenMP workers (default all)");
    edt_cmd->add_option("--repeat", bench.repeat, "Timed repetitions");
    edt_cmd->add_option("--seed", bench.seed, "Cloud seed");

    std::string only;
    std::string data_dir = VOXAVOID_DATA_DIR;
    auto* verify_cmd = app.add_subcommand("verify", "Run the oracle checks");
    verify_cmd->add_option("--only", only, "Run checks whose name contains this");
    verify_cmd->add_option("--data", data_dir, "Directory with robots/ and scenarios/")->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);
    try {
        if (run_cmd->parsed()) return cmd_run(run);
        if (edt_cmd->parsed()) return cmd_bench(bench);
        if (verify_cmd->parsed()) return checks::run_checks(std::cout, data_dir, only) == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
