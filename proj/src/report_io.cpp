#include "gemmbench/report_io.hpp"

#include <charconv>
#include <cmath>
#include <nlohmann/json.hpp>

#include "gemmbench/errors.hpp"
#include "gemmbench/tensor.hpp"

namespace gemmbench {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = s.find(sep, pos);
        if (next == std::string_view::npos) {
            out.push_back(s.substr(pos));
            return out;
        }
        out.push_back(s.substr(pos, next - pos));
        pos = next + 1;
    }
}

std::vector<std::string_view> lines(std::string_view text) {
    auto out = split(text, '\n');
    if (!out.empty() && out.back().empty()) out.pop_back();
    for (auto& l : out)
        if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    return out;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no) {
    T v{};
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size())
        throw FormatError("line " + std::to_string(line_no) + ": bad number '" + std::string(field) + "'");
    return v;
}

std::vector<std::vector<std::string_view>> parse_table(std::string_view text, std::string_view header) {
    const auto ls = lines(text);
    if (ls.empty() || ls[0] != header)
        throw FormatError("expected CSV header '" + std::string(header) + "'");
    const std::size_t width = split(header, ',').size();
    std::vector<std::vector<std::string_view>> rows;
    for (std::size_t i = 1; i < ls.size(); ++i) {
        auto f = split(ls[i], ',');
        if (f.size() != width)
            throw FormatError("line " + std::to_string(i + 1) + ": expected " + std::to_string(width) +
                              " fields, got " + std::to_string(f.size()));
        rows.push_back(std::move(f));
    }
    return rows;
}

}  // namespace

std::string sweep_to_csv(const std::vector<SweepRecord>& records) {
    std::string out(kSweepCsvHeader);
    out += '\n';
    for (const auto& r : records) {
        out += std::to_string(r.n) + ',' + r.variant + ',' + r.backend + ',' + format_double(r.avg_time_s) +
               ',' + format_double(r.gflops) + '\n';
    }
    return out;
}

std::vector<SweepRecord> parse_sweep_csv(std::string_view text) {
    std::vector<SweepRecord> out;
    std::size_t line = 2;
    for (const auto& f : parse_table(text, kSweepCsvHeader)) {
        out.push_back({parse_number<std::size_t>(f[0], line), std::string(f[1]), std::string(f[2]),
                       parse_number<double>(f[3], line), parse_number<double>(f[4], line)});
        ++line;
    }
    return out;
}

std::vector<CounterRow> collect_counters(const std::vector<std::size_t>& sizes,
                                         const std::vector<KernelVariant>& variants,
                                         const DeviceProfile& device) {
    std::vector<CounterRow> rows;
    for (auto n : sizes) {
        const Matrix a = random_matrix(n, n, Seed{2 * n});
        const Matrix b = random_matrix(n, n, Seed{2 * n + 1});
        for (const auto& v : variants) rows.push_back({n, v.name(), simulate_gemm(v, a, b, device).counters});
    }
    return rows;
}

std::string counters_to_csv(const std::vector<CounterRow>& rows) {
    std::string out(kCountersCsvHeader);
    out += '\n';
    for (const auto& r : rows) {
        const auto& c = r.counters;
        out += std::to_string(r.n) + ',' + r.variant + ',' + std::to_string(c.global_loads) + ',' +
               std::to_string(c.global_stores) + ',' + std::to_string(c.local_loads) + ',' +
               std::to_string(c.local_stores) + '\n';
    }
    return out;
}

std::vector<CounterRow> parse_counters_csv(std::string_view text) {
    std::vector<CounterRow> out;
    std::size_t line = 2;
    for (const auto& f : parse_table(text, kCountersCsvHeader)) {
        CounterRow r;
        r.n = parse_number<std::size_t>(f[0], line);
        r.variant = std::string(f[1]);
        r.counters.global_loads = parse_number<std::uint64_t>(f[2], line);
        r.counters.global_stores = parse_number<std::uint64_t>(f[3], line);
        r.counters.local_loads = parse_number<std::uint64_t>(f[4], line);
        r.counters.local_stores = parse_number<std::uint64_t>(f[5], line);
        out.push_back(std::move(r));
        ++line;
    }
    return out;
}

namespace {

nlohmann::ordered_json report_object(const TrainingReport& r) {
    nlohmann::ordered_json j;
    j["model"] = r.model.to_string();
    j["layer_dims"] = r.model.layer_dims;
    j["batch_size"] = r.batch_size;
    j["variant"] = r.variant;
    j["compute_model"] = r.compute_model;
    j["total_compute_s"] = r.total_compute;
    j["total_copy_s"] = r.total_copy;
    j["total_host_s"] = r.total_host;
    j["total_time_s"] = r.total_time();
    j["compute_fraction"] = r.compute_fraction;
    j["ratio_device_over_host"] = r.ratio_device_over_host;
    auto& ops = j["ops"] = nlohmann::ordered_json::array();
    for (const auto& op : r.ops) {
        nlohmann::ordered_json o;
        o["op"] = op.op;
        o["m"] = op.dims.m;
        o["k"] = op.dims.k;
        o["n"] = op.dims.n;
        o["flops"] = op.flops;
        o["bytes"] = op.bytes;
        o["compute_time_s"] = op.compute_time;
        o["copy_time_s"] = op.copy_time;
        o["host_time_s"] = op.host_time;
        ops.push_back(std::move(o));
    }
    return j;
}

TrainingReport report_from(const nlohmann::json& j) {
    TrainingReport r;
    r.model.layer_dims = j.at("layer_dims").get<std::vector<std::size_t>>();
    r.batch_size = j.at("batch_size").get<std::size_t>();
    r.variant = j.at("variant").get<std::string>();
    r.compute_model = j.at("compute_model").get<std::string>();
    r.total_compute = j.at("total_compute_s").get<double>();
    r.total_copy = j.at("total_copy_s").get<double>();
    r.total_host = j.at("total_host_s").get<double>();
    r.compute_fraction = j.at("compute_fraction").get<double>();
    r.ratio_device_over_host = j.at("ratio_device_over_host").get<double>();
    for (const auto& o : j.at("ops")) {
        OpProfile op;
        op.op = o.at("op").get<std::string>();
        op.dims = {o.at("m").get<std::size_t>(), o.at("k").get<std::size_t>(), o.at("n").get<std::size_t>()};
        op.flops = o.at("flops").get<double>();
        op.bytes = o.at("bytes").get<double>();
        op.compute_time = o.at("compute_time_s").get<double>();
        op.copy_time = o.at("copy_time_s").get<double>();
        op.host_time = o.at("host_time_s").get<double>();
        r.ops.push_back(std::move(op));
    }
    return r;
}

}  // namespace

std::string report_to_json(const TrainingReport& r) { return report_object(r).dump(2) + "\n"; }

TrainingReport parse_report_json(std::string_view text) {
    try {
        return report_from(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad training report JSON: ") + e.what());
    }
}

std::string reports_to_json(const std::vector<TrainingReport>& reports) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : reports) j.push_back(report_object(r));
    return j.dump(2) + "\n";
}

std::vector<TrainingReport> parse_reports_json(std::string_view text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (!j.is_array()) throw FormatError("training report list must be a JSON array");
        std::vector<TrainingReport> out;
        for (const auto& e : j) out.push_back(report_from(e));
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad training report JSON: ") + e.what());
    }
}

std::string report_ops_to_csv(const TrainingReport& r) {
    std::string out(kOpsCsvHeader);
    out += '\n';
    const std::string model = r.model.to_string();
    for (const auto& op : r.ops) {
        out += model + ',' + op.op + ',' + std::to_string(op.dims.m) + ',' + std::to_string(op.dims.k) + ',' +
               std::to_string(op.dims.n) + ',' + format_double(op.flops) + ',' + format_double(op.bytes) + ',' +
               format_double(op.compute_time) + ',' + format_double(op.copy_time) + ',' +
               format_double(op.host_time) + '\n';
    }
    return out;
}

}  // namespace gemmbench
