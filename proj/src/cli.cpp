#include "gemmbench/cli.hpp"

#include <CLI11.hpp>
#include <array>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>

#include "gemmbench/errors.hpp"
#include "gemmbench/profiler.hpp"
#include "gemmbench/report_io.hpp"
#include "gemmbench/training.hpp"

namespace gemmbench {

namespace {

constexpr std::uint32_t kImagesMagic = 2051;
constexpr std::uint32_t kLabelsMagic = 2049;
constexpr std::size_t kImageSide = 28;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("cannot read " + path.string());
    return bytes;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off, const std::filesystem::path& path) {
    if (b.size() < off + 4)
        throw LengthError(path.string() + ": header truncated at byte " + std::to_string(b.size()));
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
           std::uint32_t{b[off + 3]};
}

void check_magic(std::uint32_t found, std::uint32_t expected, const std::filesystem::path& path) {
    if (found != expected)
        throw FormatError(path.string() + ": bad IDX magic " + std::to_string(found) + " (expected " +
                          std::to_string(expected) + ")");
}

void check_length(const std::vector<unsigned char>& b, std::size_t need, const std::filesystem::path& path) {
    if (b.size() < need)
        throw LengthError(path.string() + ": expected " + std::to_string(need) + " bytes, file has " +
                          std::to_string(b.size()));
}

}  // namespace

IdxDataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    const auto img = read_file(images_path);
    check_magic(be32(img, 0, images_path), kImagesMagic, images_path);
    const std::size_t n = be32(img, 4, images_path);
    const std::size_t rows = be32(img, 8, images_path);
    const std::size_t cols = be32(img, 12, images_path);
    if (rows != kImageSide || cols != kImageSide)
        throw FormatError(images_path.string() + ": expected 28x28 images, found " + std::to_string(rows) + "x" +
                          std::to_string(cols));
    constexpr std::size_t pixels = kImageSide * kImageSide;
    check_length(img, 16 + n * pixels, images_path);

    const auto lab = read_file(labels_path);
    check_magic(be32(lab, 0, labels_path), kLabelsMagic, labels_path);
    const std::size_t nl = be32(lab, 4, labels_path);
    check_length(lab, 8 + nl, labels_path);

    if (n != nl)
        throw ConsistencyError("image count " + std::to_string(n) + " does not match label count " +
                               std::to_string(nl));
    if (n == 0) throw FormatError(images_path.string() + ": no images");

    IdxDataset ds;
    ds.images = Matrix(n, pixels);
    auto dst = ds.images.data();
    for (std::size_t i = 0; i < n * pixels; ++i) dst[i] = static_cast<float>(img[16 + i]) / 255.0f;
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned v = lab[8 + i];
        if (v > 9) throw FormatError(labels_path.string() + ": label " + std::to_string(v) + " at index " +
                                     std::to_string(i) + " is outside 0..9");
        ds.labels[i] = v;
    }
    return ds;
}

namespace {

struct Common {
    std::uint64_t seed = 1;
    std::string device_path;
    std::string output;
};

DeviceProfile device_of(const Common& c) {
    return c.device_path.empty() ? DeviceProfile{} : load_device_profile(c.device_path);
}

void emit(const Common& c, const std::string& data, std::ostream& out) {
    if (c.output.empty() || c.output == "-") {
        out << data;
        return;
    }
    std::ofstream f(c.output, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + c.output);
    f << data;
    f.close();
    if (!f) throw IoError("failed writing " + c.output);
}

std::optional<std::uint64_t> env_seed() {
    const char* v = std::getenv("GEMMBENCH_SEED");
    if (v == nullptr) return std::nullopt;
    const std::string_view s(v);
    std::uint64_t seed = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), seed);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ArgumentError("GEMMBENCH_SEED must be a non-negative integer, got '" + std::string(s) + "'");
    return seed;
}

std::vector<KernelVariant> parse_variants(const std::vector<std::string>& names) {
    std::vector<KernelVariant> out;
    for (const auto& n : names) out.push_back(KernelVariant::parse(n));
    return out;
}

std::vector<std::string> variant_names(const std::vector<KernelVariant>& vs) {
    std::vector<std::string> out;
    for (const auto& v : vs) out.push_back(v.name());
    return out;
}

void add_common(CLI::App* cmd, Common& c, bool with_device) {
    cmd->add_option("--seed", c.seed, "Random seed (GEMMBENCH_SEED overrides)")->capture_default_str();
    if (with_device)
        cmd->add_option("--device", c.device_path, "DeviceProfile JSON (default: built-in profile)")
            ->check(CLI::ExistingFile);
    cmd->add_option("-o,--output", c.output, "Output file (default: standard output)");
}

struct SweepArgs {
    Common common;
    std::vector<std::string> variants = variant_names(all_variants());
    std::vector<std::size_t> sizes = default_sweep_sizes();
    std::string backend = "host";
    std::size_t warmups = kDefaultWarmups;
    std::size_t hot_runs = kDefaultHotRuns;
};

int cmd_gemm_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
    for (const auto& v : a.variants)
        if (v != kReferenceVariant) (void)KernelVariant::parse(v);
    SweepOptions opt;
    opt.warmups = a.warmups;
    opt.hot_runs = a.hot_runs;
    opt.seed = Seed{a.common.seed};
    opt.device = device_of(a.common);
    opt.progress = [&err](const SweepRecord& r) {
        err << "gemm-sweep: " << r.variant << " n=" << r.n << " avg=" << format_double(r.avg_time_s)
            << " s gflops=" << format_double(r.gflops) << '\n';
    };
    const auto backend = parse_sweep_backend(a.backend);
    std::vector<SweepRecord> all;
    for (const auto& v : a.variants) {
        auto recs = sweep(v, a.sizes, backend, opt);
        all.insert(all.end(), recs.begin(), recs.end());
    }
    emit(a.common, sweep_to_csv(all), out);
    return kExitOk;
}

struct ProfileArgs {
    Common common;
    std::string model = "all";
    std::vector<std::size_t> dims;
    std::size_t batch = 32;
    std::string variant = KernelVariant::tiled_vectorized(16).name();
    std::string compute = "modeled";
    double device_gflops = 70.0;
    double host_gflops = 30.0;
    std::size_t warmups = 2;
    std::size_t hot_runs = 5;
    std::string mnist_images;
    std::string mnist_labels;
    std::string ops_csv;
};

std::vector<ModelSpec> selected_models(const ProfileArgs& a) {
    if (!a.dims.empty()) {
        ModelSpec s{a.dims};
        validate_spec(s);
        return {s};
    }
    if (a.model == "all") {
        const auto p = preset_models();
        return {p.begin(), p.end()};
    }
    int idx = 0;
    const auto res = std::from_chars(a.model.data(), a.model.data() + a.model.size(), idx);
    if (res.ec != std::errc() || res.ptr != a.model.data() + a.model.size())
        throw ArgumentError("--model must be 1, 2, 3, 4 or all, got '" + a.model + "'");
    return {preset_model(idx)};
}

int cmd_train_profile(const ProfileArgs& a, std::ostream& out, std::ostream& err) {
    const auto models = selected_models(a);
    const auto device = device_of(a.common);
    const auto variant = KernelVariant::parse(a.variant);
    ProfileOptions opt;
    opt.compute = parse_compute_model(a.compute);
    opt.device_gflops = a.device_gflops;
    opt.host_gflops = a.host_gflops;
    opt.warmups = a.warmups;
    opt.hot_runs = a.hot_runs;

    std::optional<IdxDataset> mnist;
    if (a.mnist_images.empty() != a.mnist_labels.empty())
        throw ArgumentError("--mnist-images and --mnist-labels must be given together");
    if (!a.mnist_images.empty()) {
        mnist = load_idx(a.mnist_images, a.mnist_labels);
        if (mnist->labels.size() < a.batch)
            throw ArgumentError("MNIST set has " + std::to_string(mnist->labels.size()) +
                                " samples, fewer than the batch size " + std::to_string(a.batch));
    }

    std::vector<TrainingReport> reports;
    std::string ops_csv;
    for (const auto& spec : models) {
        const Model model = Model::init(spec, Seed{a.common.seed});
        Batch batch{Matrix(1, 1), {}};
        if (mnist) {
            if (spec.layer_dims.front() != kImageSide * kImageSide || spec.layer_dims.back() < 10)
                throw ArgumentError("MNIST input needs a model shaped 784-...-(>=10), got " + spec.to_string());
            std::vector<float> rows(mnist->images.data().begin(),
                                    mnist->images.data().begin() + static_cast<std::ptrdiff_t>(a.batch * 784));
            batch.inputs = Matrix(a.batch, 784, std::move(rows));
            batch.labels.assign(mnist->labels.begin(), mnist->labels.begin() + static_cast<std::ptrdiff_t>(a.batch));
        } else {
            batch = random_batch(spec, a.batch, Seed{a.common.seed + 1000});
        }
        auto r = profile_training_step(model, batch, device, variant, opt);
        err << "train-profile: " << spec.to_string() << " total=" << format_double(r.total_time())
            << " s compute_fraction=" << format_double(r.compute_fraction)
            << " ratio_device_over_host=" << format_double(r.ratio_device_over_host) << '\n';
        const auto csv = report_ops_to_csv(r);
        ops_csv += ops_csv.empty() ? csv : csv.substr(csv.find('\n') + 1);
        reports.push_back(std::move(r));
    }
    emit(a.common, reports_to_json(reports), out);
    if (!a.ops_csv.empty()) {
        Common c = a.common;
        c.output = a.ops_csv;
        emit(c, ops_csv, out);
    }
    return kExitOk;
}

struct GradArgs {
    Common common;
    std::size_t batch = 4;
    std::size_t cap = 16;
    double epsilon = 1e-3;
    double tolerance = 1e-3;
    std::string variant = KernelVariant::tiled_vectorized(16).name();
    std::string target = "host";
    bool corrupt = false;
};

int cmd_grad_check(const GradArgs& a, std::ostream& out) {
    Backend backend;
    backend.variant = KernelVariant::parse(a.variant);
    backend.target = parse_sweep_backend(a.target) == SweepBackend::Host ? ExecutionTarget::Host
                                                                         : ExecutionTarget::Simulated;
    backend.device = device_of(a.common);
    if (a.cap == 0) throw ArgumentError("--cap must be positive");

    std::ostringstream report;
    bool ok = true;
    double worst = -1.0;
    std::string worst_desc;
    for (int p = 1; p <= 4; ++p) {
        const auto spec = cap_width(preset_model(p), a.cap);
        GemmEngine engine(backend);
        const auto r = gradient_check(Model::init(spec, Seed{a.common.seed}),
                                      random_batch(spec, a.batch, Seed{a.common.seed + 100}), engine,
                                      a.epsilon, a.corrupt);
        const bool pass = r.max_rel_error < a.tolerance;
        ok = ok && pass;
        report << "Model" << p << ' ' << spec.to_string() << " max_rel_error=" << format_double(r.max_rel_error)
               << " checked=" << r.checked << " skipped_at_kink=" << r.skipped_at_kink << ' '
               << (pass ? "ok" : "FAIL") << '\n';
        if (r.max_rel_error > worst) {
            worst = r.max_rel_error;
            worst_desc = "Model" + std::to_string(p) + " " + r.worst_parameter;
        }
    }
    if (ok)
        report << "grad-check: all 4 models below " << format_double(a.tolerance) << '\n';
    else
        report << "grad-check: FAILED, worst offender " << worst_desc << " max_rel_error=" << format_double(worst)
               << '\n';
    emit(a.common, report.str(), out);
    return ok ? kExitOk : kExitCheckFailed;
}

struct CountersArgs {
    Common common;
    std::vector<std::string> variants = variant_names(all_variants());
    std::vector<std::size_t> sizes{32, 64, 128};
};

int cmd_counters(const CountersArgs& a, std::ostream& out) {
    for (auto n : a.sizes)
        if (n == 0) throw ArgumentError("sizes must be positive");
    emit(a.common, counters_to_csv(collect_counters(a.sizes, parse_variants(a.variants), device_of(a.common))),
         out);
    return kExitOk;
}

int exit_code_for(const Error& e) {
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
        dynamic_cast<const LengthError*>(&e) || dynamic_cast<const ConsistencyError*>(&e))
        return kExitIo;
    if (dynamic_cast<const ArgumentError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
        dynamic_cast<const ShapeError*>(&e))
        return kExitBadArgs;
    return kExitCheckFailed;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"GEMM kernel and on-device training profiler", "gemmbench"};
    app.require_subcommand(1);

    SweepArgs sweep_args;
    auto* sweep_cmd = app.add_subcommand("gemm-sweep", "Time square GEMMs per variant and size, emit CSV");
    add_common(sweep_cmd, sweep_args.common, true);
    sweep_cmd->add_option("--variants", sweep_args.variants, "Kernel variants, or 'reference'")
        ->delimiter(',')
        ->capture_default_str();
    sweep_cmd->add_option("--sizes", sweep_args.sizes, "Square sizes (default 32..512 step 32)")->delimiter(',');
    sweep_cmd->add_option("--backend", sweep_args.backend, "host or sim")
        ->check(CLI::IsMember({"host", "sim"}))
        ->capture_default_str();
    sweep_cmd->add_option("--warmups", sweep_args.warmups)->capture_default_str();
    sweep_cmd->add_option("--hot-runs", sweep_args.hot_runs)->check(CLI::PositiveNumber)->capture_default_str();

    ProfileArgs prof;
    auto* prof_cmd = app.add_subcommand("train-profile", "Split one training step into compute and copy time");
    add_common(prof_cmd, prof.common, true);
    prof_cmd->add_option("--model", prof.model, "Preset 1..4 or 'all'")->capture_default_str();
    prof_cmd->add_option("--dims", prof.dims, "Explicit layer widths, e.g. 784,256,128,16")->delimiter(',');
    prof_cmd->add_option("--batch", prof.batch)->check(CLI::PositiveNumber)->capture_default_str();
    prof_cmd->add_option("--variant", prof.variant)->capture_default_str();
    prof_cmd->add_option("--compute", prof.compute, "modeled or measured")
        ->check(CLI::IsMember({"modeled", "measured"}))
        ->capture_default_str();
    prof_cmd->add_option("--device-gflops", prof.device_gflops, "Modeled device throughput")->capture_default_str();
    prof_cmd->add_option("--host-gflops", prof.host_gflops, "Modeled host throughput")->capture_default_str();
    prof_cmd->add_option("--warmups", prof.warmups, "Warm-ups per GEMM when measuring")->capture_default_str();
    prof_cmd->add_option("--hot-runs", prof.hot_runs, "Hot runs per GEMM when measuring")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    prof_cmd->add_option("--mnist-images", prof.mnist_images, "IDX image file")->check(CLI::ExistingFile);
    prof_cmd->add_option("--mnist-labels", prof.mnist_labels, "IDX label file")->check(CLI::ExistingFile);
    prof_cmd->add_option("--ops-csv", prof.ops_csv, "Also write one CSV row per GEMM");

    GradArgs grad;
    grad.common.seed = 42;
    auto* grad_cmd = app.add_subcommand("grad-check", "Finite-difference check of backward on all presets");
    add_common(grad_cmd, grad.common, true);
    grad_cmd->add_option("--batch", grad.batch)->check(CLI::PositiveNumber)->capture_default_str();
    grad_cmd->add_option("--cap", grad.cap, "Width cap applied to every preset")->capture_default_str();
    grad_cmd->add_option("--epsilon", grad.epsilon)->check(CLI::PositiveNumber)->capture_default_str();
    grad_cmd->add_option("--tolerance", grad.tolerance)->check(CLI::PositiveNumber)->capture_default_str();
    grad_cmd->add_option("--variant", grad.variant)->capture_default_str();
    grad_cmd->add_option("--target", grad.target, "host or sim")
        ->check(CLI::IsMember({"host", "sim"}))
        ->capture_default_str();
    grad_cmd->add_flag("--corrupt-backward", grad.corrupt)->group("");

    CountersArgs counters;
    auto* counters_cmd = app.add_subcommand("counters", "Simulated memory transactions per variant and size");
    add_common(counters_cmd, counters.common, true);
    counters_cmd->add_option("--variants", counters.variants)->delimiter(',')->capture_default_str();
    counters_cmd->add_option("--sizes", counters.sizes)->delimiter(',')->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, eo;
        const int code = app.exit(e, o, eo);
        out << o.str();
        err << eo.str();
        return code == 0 ? kExitOk : kExitBadArgs;
    }

    try {
        if (const auto s = env_seed()) {
            sweep_args.common.seed = prof.common.seed = grad.common.seed = counters.common.seed = *s;
        }
        if (sweep_cmd->parsed()) return cmd_gemm_sweep(sweep_args, out, err);
        if (prof_cmd->parsed()) return cmd_train_profile(prof, out, err);
        if (grad_cmd->parsed()) return cmd_grad_check(grad, out);
        return cmd_counters(counters, out);
    } catch (const Error& e) {
        err << "gemmbench: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "gemmbench: " << e.what() << '\n';
        return kExitCheckFailed;
    }
}

}  // namespace gemmbench
