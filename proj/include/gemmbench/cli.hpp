#pragma once

// Command-line front end and MNIST IDX ingestion.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gemmbench/tensor.hpp"

namespace gemmbench {

struct IdxDataset {
    Matrix images{1, 1};              // n x 784, values in [0, 1]
    std::vector<std::size_t> labels;  // n entries in 0..9
};

/// Big-endian IDX pair: images (magic 2051, dims [n, 28, 28]) and labels
/// (magic 2049). Pixels are divided by 255.
/// FormatError: wrong magic (found value in the message), unexpected dims,
/// label above 9 or an empty set. LengthError: file shorter than its header
/// says. ConsistencyError: image and label counts differ. IoError: unreadable.
IdxDataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Exit codes of run_cli.
enum ExitCode : int {
    kExitOk = 0,
    kExitCheckFailed = 1,
    kExitIo = 2,
    kExitBadArgs = 3,
};

/// Parses `args` (without the program name) and runs one subcommand:
/// gemm-sweep, train-profile, grad-check or counters. Data goes to the
/// --output file, or to `out` when none is given; progress and errors go to
/// `err`. GEMMBENCH_SEED in the environment overrides --seed.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gemmbench
