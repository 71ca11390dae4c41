"""First-passage densities of Brownian motion to convex moving boundaries.

Several independent routes to the same density, meant to check each other:
direct simulation, a Bessel-bridge functional estimator, a Feynman-Kac PDE,
a killed heat equation, and Fourier-integral solutions, plus Jensen bounds.
"""

from .boundary import Boundary, boundary_from_dict, load_boundary, make_boundary
from .bounds import BoundsEnvelope, corollary_flux_bounds, fractional_integral, theorem_envelope
from .bridge import PathBatch, functional_values, sample_sde, sample_three_bridge
from .errors import FPTError
from .kernels import BridgeSpec, bridge_mean, bridge_transition, heat_kernel, level_hitting_density
from .montecarlo import DensityCurve, EstimateCI, fpt_density_girsanov, fpt_direct_mc, martingale_check
from .pde import FieldGrid, density_from_v, solve_fk_cauchy, solve_killed_heat
from .spectral import SpectralProfile, fourier_w, omega_from_profile

__version__ = "0.1.0"
