"""Discretized linear isometries of R^n and the images of Z^n they produce."""

from .density import (
    DensityCurve,
    DiffHistogram,
    WindowExceeded,
    bohr_mean,
    delone_parameters,
    diff_frequency,
    diff_histogram,
    find_translations,
    rate_curve,
    rate_of_injectivity,
    residue_rate,
    uniform_R_density,
)
from .discretize import ImageChain, apply_hat, image_chain, rotate_raster, safe_window_radius
from .lattice import (
    Isometry,
    IsometrySequence,
    WindowedSet,
    integer_ball,
    make_pythagorean,
    make_rotation2d,
    project,
    round_half_low,
    sample_isometry,
)
from .torus import (
    SparseWeights,
    TorusSampler,
    density_decrease_predicate,
    diffusion_step,
    equidistribution_discrepancy,
    phi,
    rho_geometric,
    tau_geometric,
    tau_rotation_closed_form,
)

__version__ = "0.1.0"
