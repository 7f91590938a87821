"""Numerical toolkit for interpolation-based regularity of probability laws.

Layers: grid calculus (grid), Young/Orlicz norms (orlicz), Hermite band
decompositions (hermite), smooth distances by linear programming
(distances), vanishing-moment smoothing kernels (superkernel), the
interpolation inequality and its convergence criteria (interp),
path-dependent diffusions (sde), jump-process samplers and rate studies
(pdmp), and a CLI experiment registry (experiments, cli).
"""

from .grid import GridDensity, GridFunction, Samples
from .interp import InterpParams, key_inequality_ratio, rho_estimate
from .orlicz import luxembourg_norm, sobolev_orlicz_norm, young_log, young_p
from .distances import dk_binned, dk_lp
from .superkernel import build_superkernel, smooth

__version__ = "0.1.0"

__all__ = [
    "GridDensity", "GridFunction", "Samples",
    "InterpParams", "key_inequality_ratio", "rho_estimate",
    "luxembourg_norm", "sobolev_orlicz_norm", "young_log", "young_p",
    "dk_binned", "dk_lp",
    "build_superkernel", "smooth",
    "__version__",
]
