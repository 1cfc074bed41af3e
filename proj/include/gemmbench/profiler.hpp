#pragma once

// Measurement methodology: timestamped invocations, warm-up + hot-run
// averaging, GFLOPS sweeps over square sizes, and the split of a training
// step into compute and host<->device copy time.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "gemmbench/device_sim.hpp"
#include "gemmbench/kernels.hpp"
#include "gemmbench/training.hpp"

namespace gemmbench {

/// Nanosecond timestamps from a monotonic clock.
struct TimingEvent {
    std::uint64_t queued = 0;
    std::uint64_t submitted = 0;
    std::uint64_t start = 0;
    std::uint64_t end = 0;

    bool ordered() const noexcept { return queued <= submitted && submitted <= start && start <= end; }
    double queue_seconds() const noexcept { return static_cast<double>(start - queued) * 1e-9; }
    double execute_seconds() const noexcept { return static_cast<double>(end - start) * 1e-9; }
};

using Clock = std::function<std::uint64_t()>;

/// std::chrono::steady_clock in nanoseconds.
std::uint64_t monotonic_now_ns();

/// 2 n^3 / avg_time, in GFLOPS. Throws ArgumentError for n == 0 or a
/// non-positive time.
double gflops(std::size_t n, double avg_time_s);

struct Measurement {
    double avg_s = 0.0;  // arithmetic mean of hot-run execute times
    double min_s = 0.0;
    double max_s = 0.0;
    std::size_t invocations = 0;      // warm-ups included
    std::vector<TimingEvent> events;  // hot runs only
};

constexpr std::size_t kDefaultWarmups = 10;
constexpr std::size_t kDefaultHotRuns = 500;

/// Calls `run` warmups + hot_runs times, one at a time. Operands must already
/// be bound inside `run`, so no transfer cost is timed. A failing call is
/// rethrown as RunError naming the iteration.
Measurement measure(const std::function<void()>& run, std::size_t warmups = kDefaultWarmups,
                    std::size_t hot_runs = kDefaultHotRuns, const Clock& clock = monotonic_now_ns);

enum class SweepBackend { Host, Simulated };

std::string to_string(SweepBackend b);
SweepBackend parse_sweep_backend(std::string_view text);

/// Name of the plain CPU loop (matmul_reference) in sweeps.
inline constexpr const char* kReferenceVariant = "reference";

struct SweepRecord {
    std::size_t n = 0;
    std::string variant;  // KernelVariant::name() or "reference"
    std::string backend;  // "host" or "sim"
    double avg_time_s = 0.0;
    double gflops = 0.0;  // always gemmbench::gflops(n, avg_time_s)

    friend bool operator==(const SweepRecord&, const SweepRecord&) = default;
};

/// 32, 64, ..., 512.
std::vector<std::size_t> default_sweep_sizes();

struct SweepOptions {
    std::size_t warmups = kDefaultWarmups;
    std::size_t hot_runs = kDefaultHotRuns;
    Seed seed{1};
    DeviceProfile device{};
    /// Called after each size with the finished record.
    std::function<void(const SweepRecord&)> progress;
};

/// One record per size. Operands are random n x n matrices seeded from
/// options.seed and n; sizes that are not multiples of 16 are padded before
/// timing while GFLOPS still uses n. The simulated backend times the
/// simulator itself and exists to compare counter-heavy variants, not to
/// predict device speed.
std::vector<SweepRecord> sweep(const std::string& variant, const std::vector<std::size_t>& sizes,
                               SweepBackend backend, const SweepOptions& options = {});

enum class ComputeModel {
    Modeled,   // time = flops / throughput
    Measured,  // time = measured host kernel time
};

std::string to_string(ComputeModel m);
ComputeModel parse_compute_model(std::string_view text);

struct ProfileOptions {
    ComputeModel compute = ComputeModel::Modeled;
    double device_gflops = 70.0;  // modeled device throughput
    double host_gflops = 30.0;    // modeled host throughput
    /// Host kernel standing in for the CPU-only run when measuring.
    KernelVariant host_variant = KernelVariant::tiled_vectorized(16);
    std::size_t warmups = 2;
    std::size_t hot_runs = 5;
};

struct OpProfile {
    std::string op;
    GemmDims dims;
    double flops = 0.0;  // 2 m k n
    double bytes = 0.0;  // 4 (m k + k n + m n): both operands in, result out
    double compute_time = 0.0;
    double copy_time = 0.0;
    double host_time = 0.0;

    friend bool operator==(const OpProfile&, const OpProfile&) = default;
};

struct TrainingReport {
    ModelSpec model;
    std::size_t batch_size = 0;
    std::string variant;
    std::string compute_model;
    std::vector<OpProfile> ops;
    double total_compute = 0.0;
    double total_copy = 0.0;
    double total_host = 0.0;
    double compute_fraction = 0.0;  // total_compute / (total_compute + total_copy)
    double ratio_device_over_host = 0.0;  // (total_compute + total_copy) / total_host

    double total_time() const noexcept { return total_compute + total_copy; }

    friend bool operator==(const TrainingReport&, const TrainingReport&) = default;
};

/// Profiles one forward+backward step. Every GEMM is charged a copy of its
/// operands in and result out (no residency between ops) plus its compute
/// time under `options.compute`.
TrainingReport profile_training_step(const Model& model, const Batch& batch,
                                     const DeviceProfile& device, const KernelVariant& variant,
                                     const ProfileOptions& options = {});

/// Recomputes totals, fraction and ratio from `ops`.
void finalize_report(TrainingReport& report);

}  // namespace gemmbench
