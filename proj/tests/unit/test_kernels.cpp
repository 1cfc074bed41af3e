#include "doctest.h"

#include "gemmbench/errors.hpp"
#include "gemmbench/kernels.hpp"
#include "unit/oracles.hpp"

using namespace gemmbench;

namespace {

struct Operands {
    Matrix a;
    Matrix b;
};

Operands operands(std::size_t m, std::size_t k, std::size_t n, std::uint64_t seed) {
    return {random_matrix(m, k, Seed{seed}), random_matrix(k, n, Seed{seed + 1})};
}

oracle::Counts expected_counts(const KernelVariant& v, std::uint64_t m, std::uint64_t k,
                               std::uint64_t n) {
    switch (v.kind) {
        case KernelKind::Naive: return oracle::count_naive(m, k, n);
        case KernelKind::Vectorized4: return oracle::count_vectorized(m, k, n);
        case KernelKind::Tiled: return oracle::count_tiled(m, k, n, v.tile);
        case KernelKind::TiledVectorized: return oracle::count_tiled_vectorized(m, k, n, v.tile);
    }
    return {};
}

}  // namespace

TEST_CASE("variant names round-trip") {
    for (const auto& v : all_variants()) CHECK(KernelVariant::parse(v.name()) == v);
    CHECK_THROWS_AS(KernelVariant::parse("tiled12"), ArgumentError);
}

TEST_CASE("counter values at 32x32x32") {
    const auto [a, b] = operands(32, 32, 32, 1);

    const auto naive = gemm_naive(a, b);
    CHECK(naive.counters.global_loads == 65536);
    CHECK(naive.counters.global_stores == 1024);
    CHECK(naive.work_items == 1024);
    CHECK(naive.config == LaunchConfig{{32, 32}, {16, 16}});

    const auto vec = gemm_vectorized(a, b);
    CHECK(vec.work_items == 256);
    CHECK(vec.counters.global_loads == 10240);
    CHECK(vec.config.global == Dim2{32, 8});

    const auto tiled = gemm_tiled(a, b, 16);
    CHECK(tiled.counters.global_loads == 4096);
    CHECK(naive.counters.global_loads == 16 * tiled.counters.global_loads);
    CHECK(tiled.config.local == Dim2{16, 16});

    const auto tv = gemm_tiled_vectorized(a, b, 16);
    CHECK(tv.counters.global_loads < 4096);
    CHECK(tv.counters.global_loads == 1024);
}

TEST_CASE("counter laws match the enumeration oracle") {
    const std::size_t shapes[][3] = {{32, 32, 32}, {16, 48, 64}, {64, 16, 32}, {48, 96, 16}};
    for (const auto& s : shapes) {
        const auto [a, b] = operands(s[0], s[1], s[2], 7);
        for (const auto& v : all_variants()) {
            CAPTURE(v.name());
            const auto res = simulate_gemm(v, a, b);
            const auto want = expected_counts(v, s[0], s[1], s[2]);
            CHECK(res.counters.global_loads == want.global_loads);
            CHECK(res.counters.global_stores == want.global_stores);
            CHECK(res.work_items == want.work_items);
            CHECK(res.counters.global_store_lanes == s[0] * s[2]);
        }
    }
}

TEST_CASE("tiled barrier and local-memory accounting") {
    const auto [a, b] = operands(32, 16, 32, 3);
    const auto res = gemm_tiled(a, b, 16);
    CHECK(res.counters.barriers / res.work_items == 2);
    CHECK(res.counters.barriers % res.work_items == 0);
    // One A and one B element written to local memory per item per phase.
    CHECK(res.counters.local_stores == 2 * res.work_items);
    CHECK(res.counters.local_loads == 2 * 16 * res.work_items);

    const auto [a2, b2] = operands(32, 64, 32, 3);
    CHECK(gemm_tiled(a2, b2, 16).counters.barriers == 2 * (64 / 16) * 1024);
}

TEST_CASE("monotone global loads for dims >= 32") {
    const std::size_t shapes[][3] = {{32, 32, 32}, {64, 32, 48}, {32, 128, 32}, {96, 64, 64}};
    for (const auto& s : shapes) {
        const auto [a, b] = operands(s[0], s[1], s[2], 5);
        for (std::size_t t : {8, 16}) {
            const auto naive = gemm_naive(a, b).counters.global_loads;
            const auto tiled = gemm_tiled(a, b, t).counters.global_loads;
            const auto tv = gemm_tiled_vectorized(a, b, t).counters.global_loads;
            CHECK(tv <= tiled);
            CHECK(tiled <= naive);
            CHECK(tv < tiled);  // K >= tile
        }
    }
}

TEST_CASE("simulated variants against the reference") {
    SUBCASE("naive 64^3") {
        const auto [a, b] = operands(64, 64, 64, 10);
        CHECK(max_relative_error(gemm_naive(a, b).c, matmul_reference(a, b)) < 1e-5);
    }
    SUBCASE("vectorized 128^3") {
        const auto [a, b] = operands(128, 128, 128, 11);
        const auto c = gemm_vectorized(a, b).c;
        CHECK(max_relative_error(c, matmul_reference(a, b)) < 1e-5);
        CHECK(oracle::rel_error(c, oracle::matmul(a, b)) < 1e-5);
    }
    SUBCASE("tile 8 vs tile 16 at 64^3") {
        const auto [a, b] = operands(64, 64, 64, 12);
        const auto t8 = gemm_tiled(a, b, 8);
        const auto t16 = gemm_tiled(a, b, 16);
        CHECK(max_relative_error(t8.c, t16.c) < 1e-5);
        CHECK_FALSE(t8.counters == t16.counters);
    }
    SUBCASE("tiled-vectorized 256^3") {
        const auto [a, b] = operands(256, 256, 256, 13);
        const auto c = gemm_tiled_vectorized(a, b, 16).c;
        CHECK(oracle::rel_error(c, oracle::matmul(a, b)) < 1e-4);
    }
    SUBCASE("identity operands") {
        const auto b = random_matrix(16, 16, Seed{20});
        CHECK(max_relative_error(gemm_naive(Matrix::identity(16), b).c, b) == 0.0);
        const auto a = random_matrix(48, 32, Seed{21});
        CHECK(max_relative_error(gemm_tiled_vectorized(a, Matrix::identity(32)).c, a) < 1e-5);
    }
}

TEST_CASE("unaligned shapes are padded transparently") {
    const auto [a, b] = operands(17, 30, 5, 30);
    const auto ref = oracle::matmul(a, b);
    for (const auto& v : all_variants()) {
        CAPTURE(v.name());
        const auto sim = simulate_gemm(v, a, b);
        CHECK(sim.c.rows() == 17);
        CHECK(sim.c.cols() == 5);
        CHECK(oracle::rel_error(sim.c, ref) < 1e-5);
        CHECK(oracle::rel_error(host_gemm(v, a, b).c, ref) < 1e-5);
    }
}

TEST_CASE("kernel error paths") {
    CHECK_THROWS_AS(gemm_naive(Matrix(16, 16), Matrix(32, 16)), ShapeError);
    CHECK_THROWS_AS(gemm_tiled(Matrix(16, 16), Matrix(16, 16), 12), ArgumentError);

    DeviceProfile small;
    small.local_mem_bytes = 1024;
    try {
        gemm_tiled(Matrix(32, 32), Matrix(32, 32), 16, small);
        FAIL("expected ResourceError");
    } catch (const ResourceError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2048") != std::string::npos);
        CHECK(msg.find("1024") != std::string::npos);
    }
    CHECK_NOTHROW(gemm_tiled(Matrix(32, 32), Matrix(32, 32), 8, small));

    DeviceProfile narrow;
    narrow.max_workgroup_size = 64;
    CHECK_THROWS_AS(gemm_tiled(Matrix(32, 32), Matrix(32, 32), 16, narrow), ConfigError);

    Matrix c(20, 20);
    CHECK_THROWS_AS(host_gemm_into(KernelVariant::tiled(16), Matrix(20, 20), Matrix(20, 20), c),
                    ShapeError);
    CHECK_THROWS_AS(check_variant(KernelVariant::vectorized4(), {16, 6, 16}), ShapeError);
}

TEST_CASE("host variants") {
    const auto [a, b] = operands(64, 64, 64, 40);
    const auto ref = matmul_reference(a, b);
    for (const auto& v : all_variants()) {
        CAPTURE(v.name());
        const auto r1 = host_gemm(v, a, b);
        const auto r2 = host_gemm(v, a, b);
        CHECK(max_relative_error(r1.c, ref) < 1e-4);
        CHECK(r1.c == r2.c);
        CHECK(r1.seconds >= 0.0);
        CHECK(max_relative_error(r1.c, simulate_gemm(v, a, b).c) <= 1e-4);
    }
}

TEST_CASE("host tiled-vectorized beats host naive at 512") {
    const auto [a, b] = operands(512, 512, 512, 50);
    double naive = 1e30, tv = 1e30;
    for (int rep = 0; rep < 2; ++rep) {
        naive = std::min(naive, host_gemm(KernelVariant::naive(), a, b).seconds);
        tv = std::min(tv, host_gemm(KernelVariant::tiled_vectorized(16), a, b).seconds);
    }
    MESSAGE("512^3 naive " << naive << " s, tiled_vectorized16 " << tv << " s");
    CHECK(tv < naive);
}
