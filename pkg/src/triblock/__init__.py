"""Phase-field and sharp-interface toolkit for ternary systems with long-range interactions.

Modules
-------
grid_spectral   periodic grid fields, spectral operators, torus Green's function
energy          parameters, triple-well potential, tension calibration, diffuse energy
flow            mass-constrained stabilised gradient flow
sharp           droplet-limit energies, optimal splittings, Young's angles
coreshell_opt   core-shell self-interaction integrals and the optimal core offset
lattice         droplet configurations on the torus and their lattice energy
morphology      segmentation, interface lengths, junction angles, classification
experiments     presets, runner and sweeps (used by the ``triblock`` command)
"""

from .energy import (
    InteractionMatrix,
    ModelParams,
    PhaseDensity,
    Regime,
    SurfaceTensions,
    WellParams,
    classify_regime,
)
from .sharp import MassPair, MassSplit, e0, ebar0, youngs_angles

__version__ = "0.1.0"

__all__ = [
    "InteractionMatrix",
    "ModelParams",
    "PhaseDensity",
    "Regime",
    "SurfaceTensions",
    "WellParams",
    "classify_regime",
    "MassPair",
    "MassSplit",
    "e0",
    "ebar0",
    "youngs_angles",
    "__version__",
]
