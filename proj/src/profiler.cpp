#include "gemmbench/profiler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "gemmbench/errors.hpp"

namespace gemmbench {

std::uint64_t monotonic_now_ns() {
    const auto t = std::chrono::steady_clock::now().time_since_epoch();
    return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(t).count());
}

double gflops(std::size_t n, double avg_time_s) {
    if (n == 0) throw ArgumentError("gflops: n must be positive");
    if (!(avg_time_s > 0.0))
        throw ArgumentError("gflops: average time must be positive, got " + std::to_string(avg_time_s));
    const double nd = static_cast<double>(n);
    return 2.0 * nd * nd * nd / avg_time_s * 1e-9;
}

Measurement measure(const std::function<void()>& run, std::size_t warmups, std::size_t hot_runs,
                    const Clock& clock) {
    if (hot_runs == 0) throw ArgumentError("measure: hot_runs must be at least 1");
    if (!run) throw ArgumentError("measure: empty run callable");

    Measurement m;
    m.events.reserve(hot_runs);
    const std::size_t total = warmups + hot_runs;
    for (std::size_t i = 0; i < total; ++i) {
        TimingEvent ev;
        ev.queued = clock();
        ev.submitted = clock();
        ev.start = clock();
        try {
            run();
        } catch (const std::exception& e) {
            const bool warm = i < warmups;
            const std::size_t idx = warm ? i : i - warmups;
            throw RunError(std::string("run failed at ") + (warm ? "warm-up" : "hot") + " iteration " +
                               std::to_string(idx) + ": " + e.what(),
                           i);
        }
        ev.end = clock();
        ++m.invocations;
        if (i >= warmups) m.events.push_back(ev);
    }

    double sum = 0.0;
    m.min_s = std::numeric_limits<double>::infinity();
    m.max_s = 0.0;
    for (const auto& ev : m.events) {
        const double t = ev.execute_seconds();
        sum += t;
        m.min_s = std::min(m.min_s, t);
        m.max_s = std::max(m.max_s, t);
    }
    m.avg_s = sum / static_cast<double>(m.events.size());
    return m;
}

std::string to_string(SweepBackend b) { return b == SweepBackend::Host ? "host" : "sim"; }

SweepBackend parse_sweep_backend(std::string_view text) {
    if (text == "host") return SweepBackend::Host;
    if (text == "sim") return SweepBackend::Simulated;
    throw ArgumentError("unknown backend '" + std::string(text) + "' (expected host or sim)");
}

std::vector<std::size_t> default_sweep_sizes() {
    std::vector<std::size_t> sizes;
    for (std::size_t n = 32; n <= 512; n += 32) sizes.push_back(n);
    return sizes;
}

namespace {

Measurement measure_one(const std::string& variant, std::size_t n, SweepBackend backend,
                        const SweepOptions& opt) {
    const Seed sa{opt.seed.value * 1000003u + 2 * n};
    const Seed sb{opt.seed.value * 1000003u + 2 * n + 1};
    const Matrix a = random_matrix(n, n, sa);
    const Matrix b = random_matrix(n, n, sb);

    if (variant == kReferenceVariant) {
        if (backend != SweepBackend::Host)
            throw ArgumentError("the reference variant only runs on the host backend");
        return measure([&] { (void)matmul_reference(a, b); }, opt.warmups, opt.hot_runs);
    }

    const KernelVariant v = KernelVariant::parse(variant);
    if (backend == SweepBackend::Simulated) {
        return measure([&] { (void)simulate_gemm(v, a, b, opt.device); }, opt.warmups, opt.hot_runs);
    }
    const Matrix pa = pad_to_multiple(a, kPadQuantum).matrix;
    const Matrix pb = pad_to_multiple(b, kPadQuantum).matrix;
    check_variant(v, {pa.rows(), pa.cols(), pb.cols()});
    Matrix c(pa.rows(), pb.cols());
    return measure([&] { host_gemm_into(v, pa, pb, c); }, opt.warmups, opt.hot_runs);
}

}  // namespace

std::vector<SweepRecord> sweep(const std::string& variant, const std::vector<std::size_t>& sizes,
                               SweepBackend backend, const SweepOptions& options) {
    if (sizes.empty()) throw ArgumentError("sweep: no sizes given");
    for (auto n : sizes)
        if (n < 16) throw ArgumentError("sweep: size " + std::to_string(n) + " is below 16");
    if (variant != kReferenceVariant) (void)KernelVariant::parse(variant);

    std::vector<SweepRecord> out;
    out.reserve(sizes.size());
    for (auto n : sizes) {
        const Measurement m = measure_one(variant, n, backend, options);
        SweepRecord r{n, variant, to_string(backend), m.avg_s, gflops(n, m.avg_s)};
        if (options.progress) options.progress(r);
        out.push_back(std::move(r));
    }
    return out;
}

std::string to_string(ComputeModel m) { return m == ComputeModel::Modeled ? "modeled" : "measured"; }

ComputeModel parse_compute_model(std::string_view text) {
    if (text == "modeled") return ComputeModel::Modeled;
    if (text == "measured") return ComputeModel::Measured;
    throw ArgumentError("unknown compute model '" + std::string(text) +
                        "' (expected modeled or measured)");
}

void finalize_report(TrainingReport& r) {
    r.total_compute = r.total_copy = r.total_host = 0.0;
    for (const auto& op : r.ops) {
        r.total_compute += op.compute_time;
        r.total_copy += op.copy_time;
        r.total_host += op.host_time;
    }
    const double total = r.total_compute + r.total_copy;
    r.compute_fraction = total > 0.0 ? r.total_compute / total : 0.0;
    r.ratio_device_over_host = r.total_host > 0.0 ? total / r.total_host : 0.0;
}

namespace {

double modeled_time(double flops, double gflops_rate) {
    if (!(gflops_rate > 0.0)) throw ArgumentError("throughput must be positive");
    return flops / (gflops_rate * 1e9);
}

double measured_time(const KernelVariant& v, const GemmDims& d, const ProfileOptions& opt) {
    const Matrix a = pad_to_multiple(random_matrix(d.m, d.k, Seed{d.m * 31 + d.k}), kPadQuantum).matrix;
    const Matrix b = pad_to_multiple(random_matrix(d.k, d.n, Seed{d.k * 37 + d.n}), kPadQuantum).matrix;
    Matrix c(a.rows(), b.cols());
    return measure([&] { host_gemm_into(v, a, b, c); }, opt.warmups, opt.hot_runs).avg_s;
}

}  // namespace

TrainingReport profile_training_step(const Model& model, const Batch& batch,
                                     const DeviceProfile& device, const KernelVariant& variant,
                                     const ProfileOptions& options) {
    validate_profile(device);
    validate_batch(model.spec(), batch);
    if (options.compute == ComputeModel::Modeled &&
        (!(options.device_gflops > 0.0) || !(options.host_gflops > 0.0)))
        throw ArgumentError("modeled throughput must be positive");

    // Run the step once to get the exact sequence of products and their shapes.
    GemmEngine engine({variant, ExecutionTarget::Host, device});
    const auto acts = forward(model, batch.inputs, engine);
    (void)backward(model, acts, batch.labels, engine);

    TrainingReport r;
    r.model = model.spec();
    r.batch_size = batch.inputs.rows();
    r.variant = variant.name();
    r.compute_model = to_string(options.compute);
    for (const auto& call : engine.calls()) {
        OpProfile op;
        op.op = call.op;
        op.dims = call.dims;
        const double m = static_cast<double>(call.dims.m);
        const double k = static_cast<double>(call.dims.k);
        const double n = static_cast<double>(call.dims.n);
        op.flops = 2.0 * m * k * n;
        op.bytes = 4.0 * (m * k + k * n + m * n);
        op.copy_time = transfer_time(op.bytes, device);
        if (options.compute == ComputeModel::Modeled) {
            op.compute_time = modeled_time(op.flops, options.device_gflops);
            op.host_time = modeled_time(op.flops, options.host_gflops);
        } else {
            op.compute_time = measured_time(variant, call.dims, options);
            op.host_time = measured_time(options.host_variant, call.dims, options);
        }
        r.ops.push_back(std::move(op));
    }
    finalize_report(r);
    return r;
}

}  // namespace gemmbench
