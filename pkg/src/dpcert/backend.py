"""Kernel backend selection.

Hot numeric kernels ship in two variants: a numba ``@njit`` build and a pure
numpy build. The active variant is chosen once at import time from the
``DPCERT_BACKEND`` environment variable:

    DPCERT_BACKEND=auto    use numba when importable, else numpy (default)
    DPCERT_BACKEND=numba   require numba, raise if unavailable
    DPCERT_BACKEND=numpy   force the pure numpy path

Both variants implement identical arithmetic; they differ only in summation
order, so results agree to float rounding but are not guaranteed bit-equal
across backends. Within one backend results are fully deterministic.
"""

import os

_VALID = ("auto", "numba", "numpy")


def _resolve() -> str:
    requested = os.environ.get("DPCERT_BACKEND", "auto").strip().lower()
    if requested not in _VALID:
        raise ValueError(
            f"DPCERT_BACKEND must be one of {_VALID}, got {requested!r}"
        )
    if requested == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
        return "numba"
    except ImportError:
        if requested == "numba":
            raise
        return "numpy"


ACTIVE_BACKEND = _resolve()


def using_numba() -> bool:
    return ACTIVE_BACKEND == "numba"
