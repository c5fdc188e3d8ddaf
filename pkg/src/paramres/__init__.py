"""paramres: simulation and calibration of parametric-resonance two-qubit gates."""

__version__ = "0.1.0"
