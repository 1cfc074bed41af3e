"""GEMM kernel simulator, host kernels and training-step profiler."""

from ._gemmbench import (
    ArgumentError,
    ConfigError,
    DeviceProfile,
    FormatError,
    GemmbenchError,
    IoError,
    ResourceError,
    ShapeError,
    counters,
    default_sweep_sizes,
    gflops,
    gradient_check,
    host_gemm,
    matmul_reference,
    max_relative_error,
    profile_training_step,
    random_matrix,
    run_cli,
    simulate_gemm,
    sweep,
    transfer_time,
    variants,
)

__all__ = [
    "ArgumentError",
    "ConfigError",
    "DeviceProfile",
    "FormatError",
    "GemmbenchError",
    "IoError",
    "ResourceError",
    "ShapeError",
    "counters",
    "default_sweep_sizes",
    "gflops",
    "gradient_check",
    "host_gemm",
    "matmul_reference",
    "max_relative_error",
    "profile_training_step",
    "random_matrix",
    "run_cli",
    "simulate_gemm",
    "sweep",
    "transfer_time",
    "variants",
]
