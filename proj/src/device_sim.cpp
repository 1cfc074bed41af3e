#include "gemmbench/device_sim.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace gemmbench {

namespace {

bool is_vector_width(std::size_t w) { return w == 1 || w == 2 || w == 4 || w == 8 || w == 16; }

}  // namespace

std::string to_string(const Dim2& d) {
    return "(" + std::to_string(d.x) + "," + std::to_string(d.y) + ")";
}

void validate_profile(const DeviceProfile& dev) {
    if (dev.max_workgroup_size == 0) throw ConfigError("max_workgroup_size must be positive");
    if (dev.local_mem_bytes == 0) throw ConfigError("local_mem_bytes must be positive");
    if (!(dev.copy_bandwidth > 0.0)) throw ConfigError("copy_bandwidth must be positive");
    if (!(dev.copy_latency >= 0.0) || std::isinf(dev.copy_latency)) {
        throw ConfigError("copy_latency must be finite and non-negative");
    }
    if (!is_vector_width(dev.vector_width)) {
        throw ConfigError("vector_width must be one of 1, 2, 4, 8, 16; got " +
                          std::to_string(dev.vector_width));
    }
}

void validate_config(const LaunchConfig& cfg, const DeviceProfile& dev) {
    const auto& g = cfg.global;
    const auto& l = cfg.local;
    if (g.x == 0 || g.y == 0 || l.x == 0 || l.y == 0) {
        throw ConfigError("launch sizes must be positive: global " + to_string(g) + ", local " +
                          to_string(l));
    }
    if (g.x % l.x != 0 || g.y % l.y != 0) {
        throw ConfigError("non-dividing local size: local " + to_string(l) +
                          " does not divide global " + to_string(g));
    }
    if (l.count() > dev.max_workgroup_size) {
        throw ConfigError("workgroup too large: " + std::to_string(l.count()) +
                          " work items exceed max_workgroup_size " +
                          std::to_string(dev.max_workgroup_size));
    }
}

double transfer_time(double bytes, const DeviceProfile& dev) {
    if (bytes < 0.0) throw ArgumentError("transfer size must be non-negative");
    return dev.copy_latency + bytes / dev.copy_bandwidth;
}

DeviceProfile parse_device_profile(std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("device profile is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw FormatError("device profile must be a JSON object");

    static const std::set<std::string> known = {"max_workgroup_size", "local_mem_bytes",
                                                "copy_bandwidth", "copy_latency",
                                                "vector_width"};
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw FormatError("unknown device profile key: " + key);
    }
    for (const auto& key : known) {
        if (!j.contains(key)) throw FormatError("missing device profile key: " + key);
    }

    const auto count = [&](const char* key) -> std::size_t {
        const auto& v = j.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
            throw FormatError(std::string(key) + " must be a non-negative integer");
        }
        return v.get<std::size_t>();
    };
    const auto real = [&](const char* key) -> double {
        const auto& v = j.at(key);
        if (!v.is_number()) throw FormatError(std::string(key) + " must be a number");
        return v.get<double>();
    };

    DeviceProfile dev;
    dev.max_workgroup_size = count("max_workgroup_size");
    dev.local_mem_bytes = count("local_mem_bytes");
    dev.copy_bandwidth = real("copy_bandwidth");
    dev.copy_latency = real("copy_latency");
    dev.vector_width = count("vector_width");
    validate_profile(dev);
    return dev;
}

DeviceProfile load_device_profile(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open device profile " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_device_profile(ss.str());
}

std::string device_profile_to_json(const DeviceProfile& dev) {
    nlohmann::ordered_json j;
    j["max_workgroup_size"] = dev.max_workgroup_size;
    j["local_mem_bytes"] = dev.local_mem_bytes;
    j["copy_bandwidth"] = dev.copy_bandwidth;
    j["copy_latency"] = dev.copy_latency;
    j["vector_width"] = dev.vector_width;
    return j.dump(2) + "\n";
}

std::span<float> WorkItem::global_span(BufferId buf, std::size_t index, std::size_t width) {
    auto& buffers = *state_.buffers;
    if (buf >= buffers.size()) {
        fault("access to undeclared buffer " + std::to_string(buf));
    }
    auto& data = buffers[buf].data;
    if (index > data.size() || width > data.size() - index) {
        fault("global access [" + std::to_string(index) + ", " + std::to_string(index + width) +
              ") outside buffer '" + buffers[buf].name + "' of " + std::to_string(data.size()) +
              " elements");
    }
    return {data.data() + index, width};
}

std::span<float> WorkItem::local_span(std::size_t index, std::size_t width) {
    auto& local = *state_.local;
    if (index > local.size() || width > local.size() - index) {
        fault("local access [" + std::to_string(index) + ", " + std::to_string(index + width) +
              ") outside " + std::to_string(local.size()) + " declared local elements");
    }
    return {local.data() + index, width};
}

void WorkItem::check_width(std::size_t width) const {
    if (!is_vector_width(width) || width > state_.vector_width) {
        throw ResourceError("vector width " + std::to_string(width) +
                            " not supported by device (vector_width " +
                            std::to_string(state_.vector_width) + ")");
    }
}

void WorkItem::fault(const std::string& what) const {
    throw FaultError("work item " + to_string(global_id_) + ": " + what);
}

LaunchResult simulate_launch(const KernelProgram& prog, const LaunchConfig& cfg,
                             const DeviceProfile& dev, std::vector<Buffer> global_mem) {
    validate_profile(dev);
    validate_config(cfg, dev);
    if (prog.local_mem_bytes > dev.local_mem_bytes) {
        throw ResourceError("kernel '" + prog.name + "' needs " +
                            std::to_string(prog.local_mem_bytes) +
                            " bytes of local memory, device has " +
                            std::to_string(dev.local_mem_bytes));
    }
    if (!prog.body) throw ArgumentError("kernel '" + prog.name + "' has no body");

    LaunchResult result;
    result.buffers = std::move(global_mem);
    std::vector<float> local(prog.local_mem_bytes / sizeof(float));

    const LaunchState state{&result.buffers, &local, &result.counters, dev.vector_width};
    const Dim2 groups{cfg.global.x / cfg.local.x, cfg.global.y / cfg.local.y};
    const std::size_t group_size = cfg.local.count();

    std::vector<WorkItem> items;
    std::vector<KernelTask> tasks;
    items.reserve(group_size);
    tasks.reserve(group_size);

    for (std::size_t gx = 0; gx < groups.x; ++gx) {
        for (std::size_t gy = 0; gy < groups.y; ++gy) {
            const Dim2 group{gx, gy};
            std::fill(local.begin(), local.end(), 0.0f);
            items.clear();
            tasks.clear();
            for (std::size_t lx = 0; lx < cfg.local.x; ++lx) {
                for (std::size_t ly = 0; ly < cfg.local.y; ++ly) {
                    const Dim2 gid{gx * cfg.local.x + lx, gy * cfg.local.y + ly};
                    items.emplace_back(gid, Dim2{lx, ly}, group, state);
                }
            }
            // `items` never reallocates after this point, so the references
            // captured by the coroutine frames stay valid.
            for (auto& item : items) tasks.push_back(prog.body(item));

            // One iteration per phase: every unfinished item runs to its next
            // barrier (or to the end) before any item continues.
            for (std::size_t phase = 0;; ++phase) {
                std::size_t finished = 0;
                for (auto& task : tasks) {
                    if (!task.done()) task.resume();
                    if (task.done()) ++finished;
                }
                if (finished == tasks.size()) break;
                if (finished != 0) {
                    throw BarrierError("barrier divergence in kernel '" + prog.name +
                                       "', group " + to_string(group) + ": " +
                                       std::to_string(tasks.size() - finished) +
                                       " work items wait at barrier " + std::to_string(phase + 1) +
                                       " while " + std::to_string(finished) + " have exited");
                }
            }
        }
    }
    result.groups = groups.count();
    result.work_items = cfg.global.count();
    return result;
}

}  // namespace gemmbench
