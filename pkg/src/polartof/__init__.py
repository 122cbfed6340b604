"""Polarimetric time-of-flight imaging toolkit.

Forward-renders time-resolved Mueller-matrix scene responses, simulates
rotating-ellipsometry captures, and inverts those captures back to depth,
surface normals, and scattering parameters.

All computation runs in float64; disk tensors are float32.
"""

import jax

jax.config.update("jax_enable_x64", True)

from . import mueller  # noqa: E402
from . import brdf  # noqa: E402
from . import numerics  # noqa: E402
from . import scene  # noqa: E402
from . import render  # noqa: E402
from . import ellipsometry  # noqa: E402
from . import inverse  # noqa: E402
from . import tensorio  # noqa: E402

__all__ = [
    "mueller",
    "brdf",
    "numerics",
    "scene",
    "render",
    "ellipsometry",
    "inverse",
    "tensorio",
]

__version__ = "0.1.0"
