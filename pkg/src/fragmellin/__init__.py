"""fragmellin: self-similar fragmentation profiles and the associated inverse problem.

The package simulates the pure fragmentation equation, constructs its
self-similar profile by two independent routes (long-time simulation and a
Cauchy-integral construction in Mellin space) and estimates the rate
parameters (alpha, gamma) and the fragmentation kernel from a measured
profile.
"""

__version__ = "0.1.0"

from .grids import ComplexLine, GridFunction, LogGrid, integrate, interp_log, line_integral, make_log_grid
from .kernels import (
    KernelSpec,
    RateSpec,
    beta_kernel,
    k0_mellin,
    k0_tail_coefficient,
    mitosis,
    renormalize,
    sampled_kernel,
    uniform_binary,
    validate_kernel,
)
from .forward import TimeSeries, gain_operator, rescale_snapshot, simulate, step
from .mellin import MellinSamples, Taper, mellin_forward, mellin_inverse, mellin_real, pv_cauchy
from .spectral import (
    ProfileResult,
    SpectralConfig,
    default_config,
    g_tilde,
    log_phi_line,
    phi,
    spectral_profile,
    stationary_residual,
)
from .estimation import (
    EstimationReport,
    estimate_alpha,
    estimate_gamma_mellin,
    estimate_gamma_moments,
    reconstruct_k0,
    recover_K0_line,
    roundtrip,
)
from .sampling import SampleSet, empirical_density, ingest_samples

__all__ = [name for name in dir() if not name.startswith("_")]
