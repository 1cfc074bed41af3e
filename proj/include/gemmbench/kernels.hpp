#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "gemmbench/device_sim.hpp"
#include "gemmbench/tensor.hpp"

namespace gemmbench {

enum class KernelKind { Naive, Vectorized4, Tiled, TiledVectorized };

/// One of the GEMM strategies. `tile` is only meaningful for the tiled kinds.
struct KernelVariant {
    KernelKind kind = KernelKind::Naive;
    std::size_t tile = 16;

    static constexpr KernelVariant naive() { return {KernelKind::Naive, 0}; }
    static constexpr KernelVariant vectorized4() { return {KernelKind::Vectorized4, 0}; }
    static constexpr KernelVariant tiled(std::size_t t = 16) { return {KernelKind::Tiled, t}; }
    static constexpr KernelVariant tiled_vectorized(std::size_t t = 16) {
        return {KernelKind::TiledVectorized, t};
    }

    bool is_tiled() const noexcept {
        return kind == KernelKind::Tiled || kind == KernelKind::TiledVectorized;
    }
    bool is_vectorized() const noexcept {
        return kind == KernelKind::Vectorized4 || kind == KernelKind::TiledVectorized;
    }

    /// "naive", "vectorized4", "tiled16", "tiled_vectorized8", ...
    std::string name() const;

    /// Inverse of name(); throws ArgumentError.
    static KernelVariant parse(std::string_view text);

    friend bool operator==(const KernelVariant&, const KernelVariant&) = default;
};

/// naive, vectorized4, tiled8, tiled16, tiled_vectorized8, tiled_vectorized16.
std::vector<KernelVariant> all_variants();

constexpr std::size_t kVectorWidth = 4;
/// Public entry points pad every operand dimension to this multiple.
constexpr std::size_t kPadQuantum = 16;

struct GemmDims {
    std::size_t m = 0;
    std::size_t k = 0;
    std::size_t n = 0;

    friend bool operator==(const GemmDims&, const GemmDims&) = default;
};

/// Throws ArgumentError for a bad tile and ShapeError when the (already
/// padded) dims break the variant's alignment rules.
void check_variant(const KernelVariant& v, const GemmDims& d);

/// Launch geometry of a variant: naive (M,N)/(16,16); vectorized (M,N/4)/(16,4);
/// tiled (M,N)/(T,T); tiled-vectorized (M,N/4)/(T,T/4).
LaunchConfig gemm_launch_config(const KernelVariant& v, const GemmDims& d);

/// Simulator program reading buffers 0 (A, MxK) and 1 (B, KxN) and writing
/// buffer 2 (C, MxN). Dims must already satisfy check_variant.
KernelProgram make_gemm_program(const KernelVariant& v, const GemmDims& d);

struct SimGemmResult {
    Matrix c;
    MemCounters counters;
    LaunchConfig config;
    std::size_t work_items = 0;
};

/// Runs a variant on the simulator. Operands are zero-padded to multiples
/// of 16 and the result cropped back to MxN.
SimGemmResult simulate_gemm(const KernelVariant& v, const Matrix& a, const Matrix& b,
                            const DeviceProfile& dev = {});

SimGemmResult gemm_naive(const Matrix& a, const Matrix& b, const DeviceProfile& dev = {});
SimGemmResult gemm_vectorized(const Matrix& a, const Matrix& b, const DeviceProfile& dev = {});
SimGemmResult gemm_tiled(const Matrix& a, const Matrix& b, std::size_t tile = 16,
                         const DeviceProfile& dev = {});
SimGemmResult gemm_tiled_vectorized(const Matrix& a, const Matrix& b, std::size_t tile = 16,
                                    const DeviceProfile& dev = {});

/// Native implementation of a variant on aligned operands, writing into a
/// preallocated `c`. No padding and no allocation, so it can be timed in a
/// tight loop.
void host_gemm_into(const KernelVariant& v, const Matrix& a, const Matrix& b, Matrix& c);

struct HostGemmResult {
    Matrix c;
    double seconds = 0.0;  // kernel time only, excluding padding and cropping
};

HostGemmResult host_gemm(const KernelVariant& v, const Matrix& a, const Matrix& b);

}  // namespace gemmbench
