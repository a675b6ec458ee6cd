"""Kernel backend selection.

The training/inference inner loops exist in two interchangeable
implementations:

- ``predmarket._kernels_numba``: explicit-loop kernels compiled with
  ``numba.njit`` (the default when numba is importable)
- ``predmarket._kernels_numpy``: vectorized pure-numpy fallback

Select via the ``PREDMARKET_BACKEND`` environment variable (``numba``,
``numpy``, or ``auto``; read once at import time). Both backends compute the
same quantities; results agree to float rounding but are not guaranteed
bit-identical across backends. Within one backend every run is deterministic.
"""

import os

ENV_VAR = "PREDMARKET_BACKEND"


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _resolve() -> str:
    choice = os.environ.get(ENV_VAR, "auto").strip().lower() or "auto"
    if choice == "auto":
        return "numba" if _numba_available() else "numpy"
    if choice not in ("numba", "numpy"):
        raise ValueError(
            f"{ENV_VAR} must be 'numba', 'numpy', or 'auto', got {choice!r}"
        )
    if choice == "numba" and not _numba_available():
        raise ImportError(f"{ENV_VAR}=numba but numba is not importable")
    return choice


_BACKEND = _resolve()

if _BACKEND == "numba":
    from predmarket import _kernels_numba as kernels
else:
    from predmarket import _kernels_numpy as kernels


def active_backend() -> str:
    """Name of the kernel backend selected at import time."""
    return _BACKEND


__all__ = ["kernels", "active_backend", "ENV_VAR"]
