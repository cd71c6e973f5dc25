"""Coverage and area spectral efficiency of Poisson small-cell networks with
probabilistic LoS/NLoS path loss."""

from densecell.analytic import (
    AseResult,
    CoverageQuery,
    CoverageResult,
    ase,
    coverage_case1,
    coverage_general,
    coverage_values,
    laplace_case1_los,
    laplace_case1_nlos_far,
    laplace_case1_nlos_near,
    laplace_general,
)
from densecell.model import (
    NetworkEnvironment,
    PathLossModel,
    PathLossSegment,
    los_probability,
    path_gain,
    preset_3gpp_case1,
    preset_single_slope,
)
from densecell.special import hyp2f1_nonpos, rho1, rho2

__version__ = "0.1.0"
