"""Holomorphic curves in quaternionic projective space: Willmore energy, degrees and Baecklund transforms."""
import os

# QW_THREADS caps the CPU threads used by XLA and BLAS; it must be read before jax loads.
_threads = os.environ.get("QW_THREADS")
if _threads:
    os.environ.setdefault("XLA_FLAGS", f"--xla_cpu_multi_thread_eigen=false intra_op_parallelism_threads={int(_threads)}")
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, str(int(_threads)))

import jax  # noqa: E402

jax.config.update("jax_enable_x64", True)

# Nested forward-mode fields compile slowly; reuse compiled kernels across runs.
# Set QW_JAX_CACHE=off to disable.
_cache = os.environ.get("QW_JAX_CACHE", os.path.join(os.path.expanduser("~"), ".cache", "hqwillmore-jax"))
if _cache.lower() != "off":
    jax.config.update("jax_compilation_cache_dir", _cache)
    jax.config.update("jax_persistent_cache_min_compile_time_secs", 0.5)

__version__ = "0.1.0"
