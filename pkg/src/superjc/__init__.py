"""Two-level emitter driven by two quantized, Gaussian-pulsed field modes."""
from .dynamics import SimConfig, Trajectory, convergence_audit, evolve, oracle_propagate
from .hilbert import (Coherent, EmitterLevel, Fock, ProductBasis, StateVector,
                      TruncationWindow, build_basis, init_state)

__all__ = ["SimConfig", "Trajectory", "convergence_audit", "evolve", "oracle_propagate",
           "Coherent", "EmitterLevel", "Fock", "ProductBasis", "StateVector",
           "TruncationWindow", "build_basis", "init_state"]
