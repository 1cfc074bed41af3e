#include "gemmbench/kernels.hpp"

#include <array>
#include <chrono>
#include <cstring>

namespace gemmbench {

namespace {

constexpr BufferId kBufA = 0;
constexpr BufferId kBufB = 1;
constexpr BufferId kBufC = 2;

using Vec4 = std::array<float, kVectorWidth>;

void require_compatible(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("cannot multiply " + a.shape_string() + " by " + b.shape_string());
    }
}

// One work item per output element; A row and B column read scalar by scalar.
KernelTask naive_body(WorkItem& wi, GemmDims d) {
    const std::size_t i = wi.global_id().x;
    const std::size_t j = wi.global_id().y;
    float acc = 0.0f;
    for (std::size_t k = 0; k < d.k; ++k) {
        const float a = wi.load(kBufA, i * d.k + k);
        const float b = wi.load(kBufB, k * d.n + j);
        acc += a * b;
    }
    wi.store(kBufC, i * d.n + j, acc);
    co_return;
}

// One work item per 1x4 output strip. A is read four k at a time; each k
// reads a 4-wide slice of a B row.
KernelTask vectorized_body(WorkItem& wi, GemmDims d) {
    const std::size_t i = wi.global_id().x;
    const std::size_t j0 = wi.global_id().y * kVectorWidth;
    Vec4 acc{};
    for (std::size_t k0 = 0; k0 < d.k; k0 += kVectorWidth) {
        const Vec4 a = wi.load_vec<kVectorWidth>(kBufA, i * d.k + k0);
        for (std::size_t t = 0; t < kVectorWidth; ++t) {
            const Vec4 b = wi.load_vec<kVectorWidth>(kBufB, (k0 + t) * d.n + j0);
            for (std::size_t l = 0; l < kVectorWidth; ++l) acc[l] += a[t] * b[l];
        }
    }
    wi.store_vec<kVectorWidth>(kBufC, i * d.n + j0, acc);
    co_return;
}

// Local memory holds the current A block at [0, T*T) and B block at
// [T*T, 2*T*T). Each phase: every item fetches one element of each block,
// barrier, accumulate over the block, barrier.
KernelTask tiled_body(WorkItem& wi, GemmDims d, std::size_t tile) {
    const std::size_t i = wi.global_id().x;
    const std::size_t j = wi.global_id().y;
    const std::size_t lx = wi.local_id().x;
    const std::size_t ly = wi.local_id().y;
    const std::size_t b_base = tile * tile;
    float acc = 0.0f;
    for (std::size_t p = 0; p < d.k; p += tile) {
        wi.local_store(lx * tile + ly, wi.load(kBufA, i * d.k + p + ly));
        wi.local_store(b_base + lx * tile + ly, wi.load(kBufB, (p + lx) * d.n + j));
        co_await wi.barrier();
        for (std::size_t k = 0; k < tile; ++k) {
            acc += wi.local_load(lx * tile + k) * wi.local_load(b_base + k * tile + ly);
        }
        co_await wi.barrier();
    }
    wi.store(kBufC, i * d.n + j, acc);
}

// Tiled structure with 1x4 strips: group (T, T/4) covers a TxT output block,
// block fills and the accumulate loop both use width-4 transactions.
KernelTask tiled_vectorized_body(WorkItem& wi, GemmDims d, std::size_t tile) {
    const std::size_t i = wi.global_id().x;
    const std::size_t j0 = wi.global_id().y * kVectorWidth;
    const std::size_t lx = wi.local_id().x;
    const std::size_t col = wi.local_id().y * kVectorWidth;
    const std::size_t b_base = tile * tile;
    Vec4 acc{};
    for (std::size_t p = 0; p < d.k; p += tile) {
        wi.local_store_vec<kVectorWidth>(lx * tile + col,
                                         wi.load_vec<kVectorWidth>(kBufA, i * d.k + p + col));
        wi.local_store_vec<kVectorWidth>(
            b_base + lx * tile + col, wi.load_vec<kVectorWidth>(kBufB, (p + lx) * d.n + j0));
        co_await wi.barrier();
        for (std::size_t k0 = 0; k0 < tile; k0 += kVectorWidth) {
            const Vec4 a = wi.local_load_vec<kVectorWidth>(lx * tile + k0);
            for (std::size_t t = 0; t < kVectorWidth; ++t) {
                const Vec4 b = wi.local_load_vec<kVectorWidth>(b_base + (k0 + t) * tile + col);
                for (std::size_t l = 0; l < kVectorWidth; ++l) acc[l] += a[t] * b[l];
            }
        }
        co_await wi.barrier();
    }
    wi.store_vec<kVectorWidth>(kBufC, i * d.n + j0, acc);
}

// Host implementations. Each element accumulates its products with k
// ascending, the same order as the simulated kernels.

void host_naive(const Matrix& a, const Matrix& b, Matrix& c) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    const float* pa = a.data().data();
    const float* pb = b.data().data();
    float* pc = c.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            float acc = 0.0f;
            for (std::size_t kk = 0; kk < k; ++kk) acc += pa[i * k + kk] * pb[kk * n + j];
            pc[i * n + j] = acc;
        }
    }
}

void host_vectorized(const Matrix& a, const Matrix& b, Matrix& c) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    const float* pa = a.data().data();
    const float* pb = b.data().data();
    float* pc = c.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j0 = 0; j0 < n; j0 += kVectorWidth) {
            Vec4 acc{};
            for (std::size_t kk = 0; kk < k; ++kk) {
                const float av = pa[i * k + kk];
                const float* brow = pb + kk * n + j0;
                for (std::size_t l = 0; l < kVectorWidth; ++l) acc[l] += av * brow[l];
            }
            for (std::size_t l = 0; l < kVectorWidth; ++l) pc[i * n + j0 + l] = acc[l];
        }
    }
}

template <std::size_t T>
void host_tiled(const Matrix& a, const Matrix& b, Matrix& c) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    const float* pa = a.data().data();
    const float* pb = b.data().data();
    float* pc = c.data().data();
    alignas(64) float as[T][T];
    alignas(64) float bs[T][T];
    alignas(64) float acc[T][T];
    for (std::size_t bi = 0; bi < m; bi += T) {
        for (std::size_t bj = 0; bj < n; bj += T) {
            for (auto& row : acc)
                for (auto& v : row) v = 0.0f;
            for (std::size_t p = 0; p < k; p += T) {
                for (std::size_t x = 0; x < T; ++x) {
                    for (std::size_t y = 0; y < T; ++y) {
                        as[x][y] = pa[(bi + x) * k + p + y];
                        bs[x][y] = pb[(p + x) * n + bj + y];
                    }
                }
                for (std::size_t x = 0; x < T; ++x) {
                    for (std::size_t y = 0; y < T; ++y) {
                        float s = acc[x][y];
                        for (std::size_t kk = 0; kk < T; ++kk) s += as[x][kk] * bs[kk][y];
                        acc[x][y] = s;
                    }
                }
            }
            for (std::size_t x = 0; x < T; ++x)
                for (std::size_t y = 0; y < T; ++y) pc[(bi + x) * n + bj + y] = acc[x][y];
        }
    }
}

// Native 4-lane float vector (GCC/Clang extension), the host counterpart of
// a device float4.
typedef float Float4 __attribute__((vector_size(16)));

inline Float4 load4(const float* p) {
    Float4 v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

inline void store4(float* p, Float4 v) { std::memcpy(p, &v, sizeof v); }

template <std::size_t T>
void host_tiled_vectorized(const Matrix& a, const Matrix& b, Matrix& c) {
    constexpr std::size_t kStrips = T / kVectorWidth;
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    const float* pa = a.data().data();
    const float* pb = b.data().data();
    float* pc = c.data().data();
    alignas(64) float as[T][T];
    alignas(64) Float4 bs[T][kStrips];
    alignas(64) Float4 acc[T][kStrips];
    for (std::size_t bi = 0; bi < m; bi += T) {
        for (std::size_t bj = 0; bj < n; bj += T) {
            for (auto& row : acc)
                for (auto& v : row) v = Float4{};
            for (std::size_t p = 0; p < k; p += T) {
                for (std::size_t x = 0; x < T; ++x) {
                    const float* arow = pa + (bi + x) * k + p;
                    const float* brow = pb + (p + x) * n + bj;
                    for (std::size_t s = 0; s < kStrips; ++s) {
                        store4(&as[x][s * kVectorWidth], load4(arow + s * kVectorWidth));
                        bs[x][s] = load4(brow + s * kVectorWidth);
                    }
                }
                for (std::size_t x = 0; x < T; ++x) {
                    Float4 strip[kStrips];
                    for (std::size_t s = 0; s < kStrips; ++s) strip[s] = acc[x][s];
                    for (std::size_t kk = 0; kk < T; ++kk) {
                        const float av = as[x][kk];
                        for (std::size_t s = 0; s < kStrips; ++s) strip[s] += av * bs[kk][s];
                    }
                    for (std::size_t s = 0; s < kStrips; ++s) acc[x][s] = strip[s];
                }
            }
            for (std::size_t x = 0; x < T; ++x)
                for (std::size_t s = 0; s < kStrips; ++s)
                    store4(pc + (bi + x) * n + bj + s * kVectorWidth, acc[x][s]);
        }
    }
}

}  // namespace

std::string KernelVariant::name() const {
    switch (kind) {
        case KernelKind::Naive: return "naive";
        case KernelKind::Vectorized4: return "vectorized4";
        case KernelKind::Tiled: return "tiled" + std::to_string(tile);
        case KernelKind::TiledVectorized: return "tiled_vectorized" + std::to_string(tile);
    }
    return "unknown";
}

KernelVariant KernelVariant::parse(std::string_view text) {
    for (const auto& v : all_variants()) {
        if (v.name() == text) return v;
    }
    throw ArgumentError("unknown kernel variant '" + std::string(text) +
                        "' (expected naive, vectorized4, tiled8, tiled16, tiled_vectorized8 or "
                        "tiled_vectorized16)");
}

std::vector<KernelVariant> all_variants() {
    return {KernelVariant::naive(),        KernelVariant::vectorized4(),
            KernelVariant::tiled(8),       KernelVariant::tiled(16),
            KernelVariant::tiled_vectorized(8), KernelVariant::tiled_vectorized(16)};
}

void check_variant(const KernelVariant& v, const GemmDims& d) {
    if (d.m == 0 || d.k == 0 || d.n == 0) throw ShapeError("GEMM dimensions must be positive");
    if (v.is_tiled() && v.tile != 8 && v.tile != 16) {
        throw ArgumentError("tile must be 8 or 16, got " + std::to_string(v.tile));
    }
    const auto dims = "M=" + std::to_string(d.m) + " K=" + std::to_string(d.k) +
                      " N=" + std::to_string(d.n);
    if (v.kind == KernelKind::Naive || v.kind == KernelKind::Vectorized4) {
        if (d.m % 16 != 0 || d.n % 16 != 0) {
            throw ShapeError(v.name() + " needs M and N to be multiples of 16 (" + dims + ")");
        }
    }
    if (v.is_vectorized() && (d.n % kVectorWidth != 0 || d.k % kVectorWidth != 0)) {
        throw ShapeError(v.name() + " needs N and K to be multiples of 4 (" + dims + ")");
    }
    if (v.is_tiled() && (d.m % v.tile != 0 || d.n % v.tile != 0 || d.k % v.tile != 0)) {
        throw ShapeError(v.name() + " needs M, N and K to be multiples of " +
                         std::to_string(v.tile) + " (" + dims + ")");
    }
}

LaunchConfig gemm_launch_config(const KernelVariant& v, const GemmDims& d) {
    switch (v.kind) {
        case KernelKind::Naive: return {{d.m, d.n}, {16, 16}};
        case KernelKind::Vectorized4: return {{d.m, d.n / kVectorWidth}, {16, 4}};
        case KernelKind::Tiled: return {{d.m, d.n}, {v.tile, v.tile}};
        case KernelKind::TiledVectorized:
            return {{d.m, d.n / kVectorWidth}, {v.tile, v.tile / kVectorWidth}};
    }
    throw ArgumentError("unknown kernel kind");
}

KernelProgram make_gemm_program(const KernelVariant& v, const GemmDims& d) {
    check_variant(v, d);
    const std::size_t tile = v.tile;
    switch (v.kind) {
        case KernelKind::Naive:
            return {v.name(), 0, [d](WorkItem& wi) { return naive_body(wi, d); }};
        case KernelKind::Vectorized4:
            return {v.name(), 0, [d](WorkItem& wi) { return vectorized_body(wi, d); }};
        case KernelKind::Tiled:
            return {v.name(), 2 * tile * tile * sizeof(float),
                    [d, tile](WorkItem& wi) { return tiled_body(wi, d, tile); }};
        case KernelKind::TiledVectorized:
            return {v.name(), 2 * tile * tile * sizeof(float),
                    [d, tile](WorkItem& wi) { return tiled_vectorized_body(wi, d, tile); }};
    }
    throw ArgumentError("unknown kernel kind");
}

SimGemmResult simulate_gemm(const KernelVariant& v, const Matrix& a, const Matrix& b,
                            const DeviceProfile& dev) {
    require_compatible(a, b);
    auto pa = pad_to_multiple(a, kPadQuantum);
    auto pb = pad_to_multiple(b, kPadQuantum);
    const GemmDims d{pa.matrix.rows(), pa.matrix.cols(), pb.matrix.cols()};

    const auto prog = make_gemm_program(v, d);
    const auto cfg = gemm_launch_config(v, d);
    const auto as_vector = [](const Matrix& m) {
        return std::vector<float>(m.data().begin(), m.data().end());
    };
    std::vector<Buffer> mem;
    mem.push_back({"A", as_vector(pa.matrix)});
    mem.push_back({"B", as_vector(pb.matrix)});
    mem.push_back({"C", std::vector<float>(d.m * d.n, 0.0f)});

    auto launch = simulate_launch(prog, cfg, dev, std::move(mem));
    Matrix c(d.m, d.n, std::move(launch.buffers[kBufC].data));
    return {crop(c, a.rows(), b.cols()), launch.counters, cfg, launch.work_items};
}

SimGemmResult gemm_naive(const Matrix& a, const Matrix& b, const DeviceProfile& dev) {
    return simulate_gemm(KernelVariant::naive(), a, b, dev);
}

SimGemmResult gemm_vectorized(const Matrix& a, const Matrix& b, const DeviceProfile& dev) {
    return simulate_gemm(KernelVariant::vectorized4(), a, b, dev);
}

SimGemmResult gemm_tiled(const Matrix& a, const Matrix& b, std::size_t tile,
                         const DeviceProfile& dev) {
    return simulate_gemm(KernelVariant::tiled(tile), a, b, dev);
}

SimGemmResult gemm_tiled_vectorized(const Matrix& a, const Matrix& b, std::size_t tile,
                                    const DeviceProfile& dev) {
    return simulate_gemm(KernelVariant::tiled_vectorized(tile), a, b, dev);
}

void host_gemm_into(const KernelVariant& v, const Matrix& a, const Matrix& b, Matrix& c) {
    require_compatible(a, b);
    if (c.rows() != a.rows() || c.cols() != b.cols()) {
        throw ShapeError("output " + c.shape_string() + " does not fit " + a.shape_string() +
                         " * " + b.shape_string());
    }
    check_variant(v, {a.rows(), a.cols(), b.cols()});
    switch (v.kind) {
        case KernelKind::Naive: host_naive(a, b, c); return;
        case KernelKind::Vectorized4: host_vectorized(a, b, c); return;
        case KernelKind::Tiled:
            if (v.tile == 8) host_tiled<8>(a, b, c);
            else host_tiled<16>(a, b, c);
            return;
        case KernelKind::TiledVectorized:
            if (v.tile == 8) host_tiled_vectorized<8>(a, b, c);
            else host_tiled_vectorized<16>(a, b, c);
            return;
    }
}

HostGemmResult host_gemm(const KernelVariant& v, const Matrix& a, const Matrix& b) {
    require_compatible(a, b);
    auto pa = pad_to_multiple(a, kPadQuantum);
    auto pb = pad_to_multiple(b, kPadQuantum);
    Matrix c(pa.matrix.rows(), pb.matrix.cols());

    const auto start = std::chrono::steady_clock::now();
    host_gemm_into(v, pa.matrix, pb.matrix, c);
    const auto stop = std::chrono::steady_clock::now();

    return {crop(c, a.rows(), b.cols()), std::chrono::duration<double>(stop - start).count()};
}

}  // namespace gemmbench
