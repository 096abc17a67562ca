"""Active conv kernel set, chosen once at import.

Downstream code imports conv2d_forward / conv2d_backward_input /
conv2d_backward_weight from here and never cares which build is live.
Tests and the benchmark import kernels_numpy / kernels_numba directly
to compare the two.
"""

from . import backend

BACKEND = backend.resolve_backend()

if BACKEND == "numba":
    from .kernels_numba import (  # noqa: F401
        conv2d_forward,
        conv2d_backward_input,
        conv2d_backward_weight,
    )
else:
    from .kernels_numpy import (  # noqa: F401
        conv2d_forward,
        conv2d_backward_input,
        conv2d_backward_weight,
    )


def get_backend() -> str:
    """Name of the kernel build in use: "numba" or "numpy"."""
    return BACKEND
