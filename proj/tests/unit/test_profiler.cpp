#include "doctest.h"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "gemmbench/errors.hpp"
#include "gemmbench/profiler.hpp"
#include "gemmbench/report_io.hpp"

using namespace gemmbench;

namespace {

// Clock that only moves when the fake run advances it.
struct FakeClock {
    std::uint64_t now = 1000;
    Clock fn() {
        return [this] { return now; };
    }
};

DeviceProfile calibrated() { return load_device_profile(GEMMBENCH_PROFILES_DIR "/calibrated.json"); }
DeviceProfile zero_copy() { return load_device_profile(GEMMBENCH_PROFILES_DIR "/zero_copy.json"); }

TrainingReport modeled(int preset, const DeviceProfile& dev, std::size_t batch = 32) {
    const auto spec = preset_model(preset);
    return profile_training_step(Model::init(spec, Seed{1}), random_batch(spec, batch, Seed{2}), dev,
                                 KernelVariant::tiled_vectorized(16));
}

// Independent tally of one step: forward (B,in,out), dW (in,B,out), dX (B,out,in).
struct StepTally {
    double flops = 0, bytes = 0;
    std::size_t gemms = 0;
};

StepTally tally(const std::vector<std::size_t>& dims, double b) {
    StepTally t;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const double i = static_cast<double>(dims[l]), o = static_cast<double>(dims[l + 1]);
        const double shapes[3][3] = {{b, i, o}, {i, b, o}, {b, o, i}};
        for (const auto& s : shapes) {
            t.flops += 2 * s[0] * s[1] * s[2];
            t.bytes += 4 * (s[0] * s[1] + s[1] * s[2] + s[0] * s[2]);
            ++t.gemms;
        }
    }
    return t;
}

}  // namespace

TEST_CASE("measure: fixed duration run") {
    FakeClock clk;
    std::size_t calls = 0;
    const std::uint64_t tau = 2500;
    const auto m = measure([&] { ++calls; clk.now += tau; }, 10, 500, clk.fn());
    CHECK(calls == 510);
    CHECK(m.invocations == 510);
    CHECK(m.events.size() == 500);
    CHECK(m.avg_s == doctest::Approx(tau * 1e-9));
    CHECK(m.min_s == m.max_s);
    for (const auto& ev : m.events) CHECK(ev.ordered());
}

TEST_CASE("measure: average of varying durations") {
    FakeClock clk;
    std::size_t i = 0;
    const std::uint64_t ms[] = {1'000'000, 2'000'000, 3'000'000};
    const auto m = measure([&] { clk.now += ms[i++ % 3]; }, 0, 3, clk.fn());
    CHECK(m.avg_s == doctest::Approx(2e-3));
    CHECK(m.min_s == doctest::Approx(1e-3));
    CHECK(m.max_s == doctest::Approx(3e-3));
}

TEST_CASE("measure: warm-ups are excluded") {
    FakeClock clk;
    std::size_t i = 0;
    // Warm-ups are slow, hot runs fast.
    const auto m = measure([&] { clk.now += (i++ < 4) ? 1'000'000 : 1000; }, 4, 6, clk.fn());
    CHECK(m.avg_s == doctest::Approx(1e-6));
}

TEST_CASE("measure: failures name the iteration") {
    std::size_t i = 0;
    try {
        (void)measure([&] { if (i++ == 12) throw std::runtime_error("boom"); }, 10, 5);
        FAIL("expected RunError");
    } catch (const RunError& e) {
        CHECK(e.iteration() == 12);
        CHECK(std::string(e.what()).find("hot iteration 2") != std::string::npos);
        CHECK(std::string(e.what()).find("boom") != std::string::npos);
    }
    CHECK_THROWS_AS(measure([] {}, 1, 0), ArgumentError);
}

TEST_CASE("measure: real clock is monotone") {
    const auto m = measure([] {}, 1, 20);
    for (const auto& ev : m.events) CHECK(ev.ordered());
    CHECK(m.min_s <= m.avg_s);
    CHECK(m.avg_s <= m.max_s);
}

TEST_CASE("gflops") {
    CHECK(gflops(32, 1e-6) == doctest::Approx(65.536));
    CHECK(gflops(1, 2.0) == doctest::Approx(1e-9));
    const double t512 = 2.0 * 512 * 512 * 512 / 70e9;
    CHECK(gflops(512, t512) == doctest::Approx(70.0));
    CHECK_THROWS_AS(gflops(32, 0.0), ArgumentError);
    CHECK_THROWS_AS(gflops(32, -1.0), ArgumentError);
    CHECK_THROWS_AS(gflops(0, 1.0), ArgumentError);
}

TEST_CASE("sweep") {
    CHECK(default_sweep_sizes().size() == 16);
    CHECK(default_sweep_sizes().front() == 32);
    CHECK(default_sweep_sizes().back() == 512);

    SweepOptions opt;
    opt.warmups = 1;
    opt.hot_runs = 2;
    std::size_t progressed = 0;
    opt.progress = [&](const SweepRecord&) { ++progressed; };
    const auto recs = sweep("tiled_vectorized16", {32, 48, 100}, SweepBackend::Host, opt);
    REQUIRE(recs.size() == 3);
    CHECK(progressed == 3);
    for (const auto& r : recs) {
        CHECK(r.avg_time_s > 0.0);
        CHECK(r.gflops == gflops(r.n, r.avg_time_s));
        CHECK(r.backend == "host");
    }
    CHECK(sweep("reference", {32}, SweepBackend::Host, opt).size() == 1);
    CHECK(sweep("tiled8", {32}, SweepBackend::Simulated, opt)[0].backend == "sim");
    CHECK_THROWS_AS(sweep("reference", {32}, SweepBackend::Simulated, opt), ArgumentError);
    CHECK_THROWS_AS(sweep("bogus", {32}, SweepBackend::Host, opt), ArgumentError);
    CHECK_THROWS_AS(sweep("naive", {8}, SweepBackend::Host, opt), ArgumentError);
    CHECK_THROWS_AS(sweep("naive", {}, SweepBackend::Host, opt), ArgumentError);
}

TEST_CASE("training profile: totals and reconciliation") {
    const auto dev = calibrated();
    const auto r = modeled(4, dev);
    const auto t = tally({784, 256, 128, 16}, 32);
    REQUIRE(r.ops.size() == t.gemms);
    double flops = 0, bytes = 0, compute = 0, copy = 0;
    for (const auto& op : r.ops) {
        flops += op.flops;
        bytes += op.bytes;
        compute += op.compute_time;
        copy += op.copy_time;
    }
    CHECK(flops == t.flops);
    CHECK(bytes == t.bytes);
    CHECK(r.total_compute == compute);
    CHECK(r.total_copy == copy);
    CHECK(r.total_time() == r.total_compute + r.total_copy);
    CHECK(r.total_compute == doctest::Approx(t.flops / 70e9));
    CHECK(r.total_copy == doctest::Approx(9 * 5e-5 + t.bytes / 5.7e8));
    CHECK(r.compute_fraction == doctest::Approx(r.total_compute / r.total_time()));
}

TEST_CASE("training profile: copy dominates on the calibrated device") {
    const auto dev = calibrated();
    const auto r4 = modeled(4, dev);
    CHECK(r4.compute_fraction >= 0.06);
    CHECK(r4.compute_fraction <= 0.12);
    CHECK(r4.total_copy / r4.total_time() >= 0.85);

    const auto r1 = modeled(1, dev), r2 = modeled(2, dev), r3 = modeled(3, dev);
    const double depth_ratio = r2.total_time() / r1.total_time();
    CHECK(depth_ratio >= 2.4);
    CHECK(depth_ratio <= 3.6);
    CHECK(r4.total_time() > r3.total_time());
    CHECK(r3.total_time() > r1.total_time());
}

TEST_CASE("training profile: fraction limits") {
    CHECK(modeled(4, zero_copy()).compute_fraction == 1.0);

    const auto spec = preset_model(4);
    ProfileOptions opt;
    opt.device_gflops = std::numeric_limits<double>::infinity();
    const auto r = profile_training_step(Model::init(spec, Seed{1}), random_batch(spec, 32, Seed{2}),
                                         calibrated(), KernelVariant::naive(), opt);
    CHECK(r.compute_fraction == 0.0);
}

TEST_CASE("training profile: copy time grows with depth") {
    const auto dev = calibrated();
    double last = 0.0;
    for (std::size_t depth = 1; depth <= 5; ++depth) {
        const ModelSpec spec{std::vector<std::size_t>(depth + 1, 64)};
        const auto r = profile_training_step(Model::init(spec, Seed{1}), random_batch(spec, 32, Seed{2}),
                                             dev, KernelVariant::tiled(16));
        CHECK(r.total_copy > last);
        last = r.total_copy;
    }
}

TEST_CASE("training profile: measured compute") {
    const auto spec = preset_model(1);
    ProfileOptions opt;
    opt.compute = ComputeModel::Measured;
    const auto r = profile_training_step(Model::init(spec, Seed{1}), random_batch(spec, 32, Seed{2}),
                                         calibrated(), KernelVariant::tiled(16), opt);
    CHECK(r.compute_model == "measured");
    CHECK(r.total_compute > 0.0);
    CHECK(r.total_host > 0.0);
    CHECK(r.ratio_device_over_host > 0.0);
}

TEST_CASE("serialization round trips") {
    const std::vector<SweepRecord> recs{{32, "naive", "host", 1.25e-5, gflops(32, 1.25e-5)},
                                        {64, "tiled16", "sim", 0.1, gflops(64, 0.1)}};
    const auto csv = sweep_to_csv(recs);
    CHECK(csv.rfind("n,variant,backend,avg_time_s,gflops\n", 0) == 0);
    CHECK(csv.find('\r') == std::string::npos);
    CHECK(parse_sweep_csv(csv) == recs);
    CHECK_THROWS_AS(parse_sweep_csv("n,x\n"), FormatError);
    CHECK_THROWS_AS(parse_sweep_csv(std::string(kSweepCsvHeader) + "\n32,naive,host,abc,1\n"), FormatError);
    CHECK_THROWS_AS(parse_sweep_csv(std::string(kSweepCsvHeader) + "\n32,naive\n"), FormatError);

    const auto rows = collect_counters({32}, all_variants());
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].counters.global_loads == 65536);
    const auto ccsv = counters_to_csv(rows);
    CHECK(ccsv == counters_to_csv(collect_counters({32}, all_variants())));
    const auto back = parse_counters_csv(ccsv);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].variant == rows[i].variant);
        CHECK(back[i].counters.global_loads == rows[i].counters.global_loads);
        CHECK(back[i].counters.local_stores == rows[i].counters.local_stores);
    }

    const auto report = modeled(4, calibrated());
    CHECK(parse_report_json(report_to_json(report)) == report);
    CHECK(report_to_json(report) == report_to_json(modeled(4, calibrated())));
    CHECK(report_ops_to_csv(report).rfind(std::string(kOpsCsvHeader) + "\n", 0) == 0);
    CHECK_THROWS_AS(parse_report_json("{}"), FormatError);

    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1e300) == "1e+300");
}

TEST_CASE("gflops is monotone in each argument") {
    for (std::size_t n = 16; n <= 512; n += 16) {
        CHECK(gflops(n, 1e-3) > gflops(n, 2e-3));
        CHECK(gflops(n + 1, 1e-3) > gflops(n, 1e-3));
    }
}

TEST_CASE("training profile: free copies leave the pure compute ratio") {
    for (int p = 1; p <= 4; ++p) {
        const auto r = modeled(p, zero_copy());
        CHECK(r.ratio_device_over_host == doctest::Approx(30.0 / 70.0).epsilon(1e-12));
    }
}
