"""Backend selection for the hot kernels.

The numba path is used when numba imports and ``MIXKMEANS_BACKEND`` is not
set to ``numpy``. Both paths produce bit-identical results.
"""

import os

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator


def selected_backend() -> str:
    choice = os.environ.get("MIXKMEANS_BACKEND", "numba").strip().lower()
    if choice not in ("numba", "numpy"):
        raise ValueError(f"MIXKMEANS_BACKEND must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numba" and not NUMBA_AVAILABLE:
        return "numpy"
    return choice


BACKEND = selected_backend()
