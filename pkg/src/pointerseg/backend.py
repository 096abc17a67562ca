"""Convolution kernel backend selection.

The hot conv kernels exist twice: a numba-jitted build and a pure-numpy
im2col build.  POINTERSEG_BACKEND=numpy|numba forces one; unset (or
"auto") picks numba when it imports, numpy otherwise.  The choice is
fixed at import time for the whole process.
"""

import os

ENV_VAR = "POINTERSEG_BACKEND"


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except Exception:
        return False
    return True


def resolve_backend(choice: str | None = None) -> str:
    """Return "numba" or "numpy". Raises if numba is forced but missing."""
    if choice is None:
        choice = os.environ.get(ENV_VAR, "auto")
    choice = choice.strip().lower()
    if choice in ("numpy", "np"):
        return "numpy"
    if choice == "numba":
        if not numba_available():
            raise RuntimeError(
                f"{ENV_VAR}=numba requested but numba is not importable"
            )
        return "numba"
    if choice in ("auto", ""):
        return "numba" if numba_available() else "numpy"
    raise ValueError(f"unrecognized {ENV_VAR} value: {choice!r}")
