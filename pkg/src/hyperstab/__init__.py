"""hyperstab: stability indices and boundary-feedback experiments for
1-D hyperbolic systems with dissipative boundary conditions."""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND  # noqa: F401
