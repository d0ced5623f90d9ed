"""Kernel backend selection.

The compiled Cython extension is preferred; the pure-Python twin is used when
the extension is unavailable or when ``HYPERSTAB_PURE=1`` is set.  Both expose
the same functions with identical numerics.
"""

import os

from . import _py

if os.environ.get("HYPERSTAB_PURE") == "1":
    _impl = _py
else:
    try:
        from . import _cy as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _py

BACKEND = _impl.BACKEND

eigvals = _impl.eigvals
spectral_radius = _impl.spectral_radius
phase_grid_spectral_radius = _impl.phase_grid_spectral_radius
delay_linear_advance = _impl.delay_linear_advance

pure = _py


def compiled_available():
    try:
        from . import _cy  # noqa: F401
        return True
    except ImportError:
        return False
