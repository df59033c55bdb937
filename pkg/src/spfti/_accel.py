"""Backend selection for the hot transform kernels.

Kernels are compiled with numba when it is importable and the environment
variable ``SPFTI_DISABLE_NUMBA`` is unset (or ``0``). Otherwise the pure
numpy implementations are used. Both paths produce the same numbers up to
floating point reassociation; the numba path is bit-reproducible run to run.
"""

import os

_DISABLED = os.environ.get("SPFTI_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError("disabled by SPFTI_DISABLE_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        # bare @njit or @njit(cache=True); return the function untouched
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn


def default_backend() -> str:
    return "numba" if HAS_NUMBA else "numpy"


def resolve_backend(backend: str | None) -> str:
    if backend is None:
        return default_backend()
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is unavailable or disabled")
    return backend
