"""lvflow: phase-space Wigner flow toolkit for prey-predator (LV) Hamiltonians.

Classical Hamiltonian mechanics, truncated Wigner-current series with
stationarity and Liouvillianity diagnostics, thermal and gaussian ensembles
with exact closed forms, and quantum-corrected population dynamics.
"""

__version__ = "0.1.0"

from . import classical, dynamics, gaussian, hamiltonian, specfun, thermo, wignerflow

__all__ = [
    "__version__",
    "classical",
    "dynamics",
    "gaussian",
    "hamiltonian",
    "specfun",
    "thermo",
    "wignerflow",
]
