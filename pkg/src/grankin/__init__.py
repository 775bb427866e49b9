"""Linear dissipative Boltzmann equation: spectra, coercivity constants,
homogeneous relaxation and the diffusion limit."""

from grankin.model import Maxwellian, ModelParams, equilibrium, eval_maxwellian, make_params

__version__ = "0.1.0"

__all__ = [
    "Maxwellian",
    "ModelParams",
    "equilibrium",
    "eval_maxwellian",
    "make_params",
    "__version__",
]
