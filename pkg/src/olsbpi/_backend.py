"""Backend selection for the hot kernels.

Set ``OLSBPI_BACKEND=numpy`` to bypass numba entirely; the default is
``numba`` when it can be imported.
"""

import logging
import os

_requested = os.environ.get("OLSBPI_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"OLSBPI_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    import numba

    logging.getLogger("numba").setLevel(logging.WARNING)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

BACKEND = "numba" if (_requested == "numba" and HAVE_NUMBA) else "numpy"


def njit(func):
    """Compile ``func`` with numba when available; otherwise return it unchanged."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)
