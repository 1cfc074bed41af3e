#pragma once

// Deterministic model of the data-parallel execution model: a 2-D grid of
// work items split into work groups. Items of a group run in lock-step
// phases separated by barriers and share a local memory block; all items see
// the global buffers. The simulator counts memory transactions, not cycles.

#include <array>
#include <coroutine>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gemmbench/errors.hpp"

namespace gemmbench {

struct Dim2 {
    std::size_t x = 1;
    std::size_t y = 1;

    std::size_t count() const noexcept { return x * y; }
    friend bool operator==(const Dim2&, const Dim2&) = default;
};

std::string to_string(const Dim2& d);

struct LaunchConfig {
    Dim2 global;
    Dim2 local;

    friend bool operator==(const LaunchConfig&, const LaunchConfig&) = default;
};

/// Device calibration. copy_latency may be zero and copy_bandwidth may be
/// +inf, which together describe a device with free transfers.
struct DeviceProfile {
    std::size_t max_workgroup_size = 256;
    std::size_t local_mem_bytes = 32 * 1024;
    double copy_bandwidth = 10.0e9;  // bytes per second
    double copy_latency = 0.0;       // seconds per transfer
    std::size_t vector_width = 4;

    friend bool operator==(const DeviceProfile&, const DeviceProfile&) = default;
};

void validate_profile(const DeviceProfile& dev);

/// Throws ConfigError naming the violated constraint.
void validate_config(const LaunchConfig& cfg, const DeviceProfile& dev);

/// copy_latency + bytes / copy_bandwidth.
double transfer_time(double bytes, const DeviceProfile& dev);

/// JSON with exactly the DeviceProfile field names; unknown or missing keys
/// are a FormatError.
DeviceProfile parse_device_profile(std::string_view json_text);
DeviceProfile load_device_profile(const std::filesystem::path& path);
std::string device_profile_to_json(const DeviceProfile& dev);

struct MemCounters {
    std::uint64_t global_loads = 0;
    std::uint64_t global_stores = 0;
    std::uint64_t local_loads = 0;
    std::uint64_t local_stores = 0;
    std::uint64_t barriers = 0;  // barrier arrivals summed over work items
    // Element counts behind the transactions above (a width-w access adds w).
    std::uint64_t global_load_lanes = 0;
    std::uint64_t global_store_lanes = 0;

    friend bool operator==(const MemCounters&, const MemCounters&) = default;
};

struct Buffer {
    std::string name;
    std::vector<float> data;

    friend bool operator==(const Buffer&, const Buffer&) = default;
};

using BufferId = std::size_t;

/// Coroutine return type of a kernel body. A body runs once per work item
/// and suspends at every `co_await item.barrier()`.
class KernelTask {
public:
    struct promise_type {
        std::exception_ptr error;

        KernelTask get_return_object() {
            return KernelTask(std::coroutine_handle<promise_type>::from_promise(*this));
        }
        std::suspend_always initial_suspend() noexcept { return {}; }
        std::suspend_always final_suspend() noexcept { return {}; }
        void return_void() noexcept {}
        void unhandled_exception() noexcept { error = std::current_exception(); }
    };

    KernelTask() = default;
    KernelTask(KernelTask&& other) noexcept : handle_(std::exchange(other.handle_, {})) {}
    KernelTask& operator=(KernelTask&& other) noexcept {
        if (this != &other) {
            reset();
            handle_ = std::exchange(other.handle_, {});
        }
        return *this;
    }
    KernelTask(const KernelTask&) = delete;
    KernelTask& operator=(const KernelTask&) = delete;
    ~KernelTask() { reset(); }

    bool done() const noexcept { return !handle_ || handle_.done(); }

    /// Runs to the next barrier or to completion; rethrows kernel exceptions.
    void resume() {
        handle_.resume();
        if (auto err = handle_.promise().error) std::rethrow_exception(err);
    }

private:
    explicit KernelTask(std::coroutine_handle<promise_type> h) : handle_(h) {}
    void reset() noexcept {
        if (handle_) handle_.destroy();
        handle_ = {};
    }

    std::coroutine_handle<promise_type> handle_;
};

class WorkItem;

/// Shared state of one launch, owned by simulate_launch.
struct LaunchState {
    std::vector<Buffer>* buffers = nullptr;
    std::vector<float>* local = nullptr;
    MemCounters* counters = nullptr;
    std::size_t vector_width = 1;
};

/// Handle a kernel body uses to reach memory. Ids follow the OpenCL
/// convention: global = group * local_size + local.
class WorkItem {
public:
    WorkItem(Dim2 global_id, Dim2 local_id, Dim2 group_id, LaunchState state)
        : global_id_(global_id), local_id_(local_id), group_id_(group_id), state_(state) {}

    Dim2 global_id() const noexcept { return global_id_; }
    Dim2 local_id() const noexcept { return local_id_; }
    Dim2 group_id() const noexcept { return group_id_; }
    std::size_t barriers_reached() const noexcept { return barriers_; }

    float load(BufferId buf, std::size_t index) {
        const float v = global_span(buf, index, 1)[0];
        ++state_.counters->global_loads;
        ++state_.counters->global_load_lanes;
        return v;
    }

    void store(BufferId buf, std::size_t index, float value) {
        global_span(buf, index, 1)[0] = value;
        ++state_.counters->global_stores;
        ++state_.counters->global_store_lanes;
    }

    /// W contiguous elements starting at `index`, one transaction.
    template <std::size_t W>
    std::array<float, W> load_vec(BufferId buf, std::size_t index) {
        check_width(W);
        std::array<float, W> out{};
        auto src = global_span(buf, index, W);
        for (std::size_t i = 0; i < W; ++i) out[i] = src[i];
        ++state_.counters->global_loads;
        state_.counters->global_load_lanes += W;
        return out;
    }

    template <std::size_t W>
    void store_vec(BufferId buf, std::size_t index, const std::array<float, W>& value) {
        check_width(W);
        auto dst = global_span(buf, index, W);
        for (std::size_t i = 0; i < W; ++i) dst[i] = value[i];
        ++state_.counters->global_stores;
        state_.counters->global_store_lanes += W;
    }

    float local_load(std::size_t index) {
        const float v = local_span(index, 1)[0];
        ++state_.counters->local_loads;
        return v;
    }

    void local_store(std::size_t index, float value) {
        local_span(index, 1)[0] = value;
        ++state_.counters->local_stores;
    }

    template <std::size_t W>
    std::array<float, W> local_load_vec(std::size_t index) {
        check_width(W);
        std::array<float, W> out{};
        auto src = local_span(index, W);
        for (std::size_t i = 0; i < W; ++i) out[i] = src[i];
        ++state_.counters->local_loads;
        return out;
    }

    template <std::size_t W>
    void local_store_vec(std::size_t index, const std::array<float, W>& value) {
        check_width(W);
        auto dst = local_span(index, W);
        for (std::size_t i = 0; i < W; ++i) dst[i] = value[i];
        ++state_.counters->local_stores;
    }

    struct BarrierAwaiter {
        WorkItem* item;
        bool await_ready() const noexcept { return false; }
        void await_suspend(std::coroutine_handle<>) noexcept {
            ++item->barriers_;
            ++item->state_.counters->barriers;
        }
        void await_resume() const noexcept {}
    };

    /// Group-wide barrier: `co_await item.barrier();`
    BarrierAwaiter barrier() noexcept { return BarrierAwaiter{this}; }

private:
    std::span<float> global_span(BufferId buf, std::size_t index, std::size_t width);
    std::span<float> local_span(std::size_t index, std::size_t width);
    void check_width(std::size_t width) const;
    [[noreturn]] void fault(const std::string& what) const;

    Dim2 global_id_;
    Dim2 local_id_;
    Dim2 group_id_;
    LaunchState state_;
    std::size_t barriers_ = 0;
};

struct KernelProgram {
    std::string name;
    std::size_t local_mem_bytes = 0;  // declared per-group local memory
    std::function<KernelTask(WorkItem&)> body;
};

struct LaunchResult {
    std::vector<Buffer> buffers;
    MemCounters counters;
    std::size_t work_items = 0;
    std::size_t groups = 0;
};

/// Runs `prog` over the launch grid. Groups execute in row-major order over
/// the group grid (x outer, y inner); within a group every item is advanced
/// to its next barrier, in the same order, before any item passes it.
/// Throws ConfigError, ResourceError, BarrierError or FaultError.
LaunchResult simulate_launch(const KernelProgram& prog, const LaunchConfig& cfg,
                             const DeviceProfile& dev, std::vector<Buffer> global_mem);

}  // namespace gemmbench
