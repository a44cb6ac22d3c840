"""Expectation values, photon statistics and fidelities of emitter-field states."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hilbert import StateVector, check_same_basis


@dataclass(frozen=True)
class ObservableSet:
    p_x: float
    n1_mean: float
    n2_mean: float
    excitation: float
    norm_drift: float = 0.0


def _probabilities(state: StateVector) -> np.ndarray:
    return np.abs(state.as_array()) ** 2


def exciton_population(state: StateVector) -> float:
    """``<sigma^dag sigma>``: total weight on the excited level."""
    return math.fsum(_probabilities(state)[1].ravel().tolist())


def number_distribution(state: StateVector, mode: int) -> np.ndarray:
    """Marginal photon-number distribution of ``mode`` over its window."""
    prob = _probabilities(state)
    axis = {1: (0, 2), 2: (0, 1)}[mode]
    moved = np.moveaxis(prob, axis, (0, 1))
    flat = moved.reshape(-1, moved.shape[-1])
    return np.array([math.fsum(col.tolist()) for col in flat.T])


def mean_photon_number(state: StateVector, mode: int) -> float:
    prob = _probabilities(state)
    _, n1, n2 = state.basis.grids()
    n = {1: n1, 2: n2}[mode]
    return math.fsum((n * prob).ravel().tolist())


def excitation_number(state: StateVector) -> float:
    """``<sigma^dag sigma + n1 + n2>``."""
    return exciton_population(state) + mean_photon_number(state, 1) + mean_photon_number(state, 2)


def observable_set(state: StateVector, norm_drift: float = 0.0) -> ObservableSet:
    p = exciton_population(state)
    m1 = mean_photon_number(state, 1)
    m2 = mean_photon_number(state, 2)
    return ObservableSet(p, m1, m2, p + m1 + m2, norm_drift)


def photon_variation(traj, mode: int) -> float:
    """Final minus initial mean photon number of ``mode`` along a trajectory."""
    n = {1: traj.n1, 2: traj.n2}[mode]
    return float(n[-1] - n[0])


def fidelity(state: StateVector, target: StateVector,
             optimize_relative_phase: bool = False) -> float:
    """``|<target|state>|^2``.

    With ``optimize_relative_phase`` and a target made of exactly two basis
    components, the relative phase between those components is chosen to
    maximize the overlap, i.e. the result is ``(|c_a||t_a| + |c_b||t_b|)^2``.
    """
    check_same_basis(state, target)
    if not optimize_relative_phase:
        return abs(np.vdot(target.amplitudes, state.amplitudes)) ** 2
    support = np.flatnonzero(target.amplitudes)
    if support.size != 2:
        raise ValueError(f"phase optimization needs a two-component target, got {support.size}")
    overlap = sum(abs(target.amplitudes[i]) * abs(state.amplitudes[i]) for i in support)
    return float(overlap ** 2)
