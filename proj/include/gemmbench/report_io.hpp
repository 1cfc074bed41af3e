#pragma once

// CSV and JSON forms of sweep records, counter tables and training reports.
// Output uses LF line endings and shortest round-trip number formatting
// independent of the C locale, so parsing it back gives identical values.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "gemmbench/device_sim.hpp"
#include "gemmbench/profiler.hpp"

namespace gemmbench {

/// Shortest decimal that parses back to exactly `v`.
std::string format_double(double v);

inline constexpr std::string_view kSweepCsvHeader = "n,variant,backend,avg_time_s,gflops";
inline constexpr std::string_view kCountersCsvHeader =
    "n,variant,global_loads,global_stores,local_loads,local_stores";
inline constexpr std::string_view kOpsCsvHeader =
    "model,op,m,k,n,flops,bytes,compute_time_s,copy_time_s,host_time_s";

std::string sweep_to_csv(const std::vector<SweepRecord>& records);
/// Throws FormatError on a wrong header, wrong field count or bad number.
std::vector<SweepRecord> parse_sweep_csv(std::string_view text);

struct CounterRow {
    std::size_t n = 0;
    std::string variant;
    MemCounters counters;

    friend bool operator==(const CounterRow&, const CounterRow&) = default;
};

/// Simulates each variant at n x n x n and records its transaction counts.
std::vector<CounterRow> collect_counters(const std::vector<std::size_t>& sizes,
                                         const std::vector<KernelVariant>& variants,
                                         const DeviceProfile& device = {});

std::string counters_to_csv(const std::vector<CounterRow>& rows);
/// Only the columns present in the CSV are restored.
std::vector<CounterRow> parse_counters_csv(std::string_view text);

std::string report_to_json(const TrainingReport& report);
TrainingReport parse_report_json(std::string_view text);

/// JSON array of reports, as written by `train-profile`.
std::string reports_to_json(const std::vector<TrainingReport>& reports);
std::vector<TrainingReport> parse_reports_json(std::string_view text);

/// One row per GEMM of the step.
std::string report_ops_to_csv(const TrainingReport& report);

}  // namespace gemmbench
