"""Truncated product Fock bases for one two-level emitter and two field modes.

A basis label is ``(level, n1, n2)``.  Amplitudes are stored level-major::

    index(level, n1, n2) = level * M1 * M2 + (n1 - n1_min) * M2 + (n2 - n2_min)

so ``state.amplitudes.reshape(basis.shape)`` gives a ``(2, M1, M2)`` view.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.special import gammainc, gammaincc

from .errors import BasisMismatch, WindowTooSmall

COHERENT_EPS = 1e-12


class EmitterLevel(enum.IntEnum):
    GROUND = 0
    EXCITED = 1

    @classmethod
    def parse(cls, value) -> "EmitterLevel":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"g": cls.GROUND, "ground": cls.GROUND, "0": cls.GROUND,
                   "x": cls.EXCITED, "excited": cls.EXCITED, "1": cls.EXCITED}
        if key not in aliases:
            raise ValueError(f"unknown emitter level {value!r}")
        return aliases[key]


@dataclass(frozen=True)
class TruncationWindow:
    """Retained photon numbers ``n_min..n_max`` (inclusive) of one mode."""

    n_min: int
    n_max: int

    def __post_init__(self):
        if int(self.n_min) != self.n_min or int(self.n_max) != self.n_max:
            raise ValueError("window bounds must be integers")
        object.__setattr__(self, "n_min", int(self.n_min))
        object.__setattr__(self, "n_max", int(self.n_max))
        if self.n_min < 0:
            raise ValueError(f"n_min must be >= 0, got {self.n_min}")
        if self.n_max < self.n_min:
            raise ValueError(f"n_max={self.n_max} < n_min={self.n_min}")

    @property
    def size(self) -> int:
        return self.n_max - self.n_min + 1

    @property
    def occupations(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    def __contains__(self, n) -> bool:
        return self.n_min <= n <= self.n_max

    def widened(self) -> "TruncationWindow":
        """Roughly double the window, growing both sides, clipped at zero."""
        pad = (self.size + 1) // 2
        return TruncationWindow(max(0, self.n_min - pad), self.n_max + pad)

    def __str__(self):
        return f"[{self.n_min}..{self.n_max}]"


def centered_window(n: int, half_width: int) -> TruncationWindow:
    return TruncationWindow(max(0, n - half_width), n + half_width)


@dataclass(frozen=True)
class Fock:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise ValueError(f"Fock occupation must be a non-negative integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def mean_photons(self) -> float:
        return float(self.n)


@dataclass(frozen=True)
class Coherent:
    amplitude: complex

    def __post_init__(self):
        object.__setattr__(self, "amplitude", complex(self.amplitude))

    @property
    def mean_photons(self) -> float:
        return abs(self.amplitude) ** 2


FieldInit = Union[Fock, Coherent]


def coherent_loss(alpha: complex, window: TruncationWindow) -> float:
    """Poisson probability mass of ``|alpha>`` falling outside ``window``."""
    lam = abs(alpha) ** 2
    if lam == 0.0:
        return 0.0 if window.n_min == 0 else 1.0
    above = gammainc(window.n_max + 1, lam)   # P(N > n_max)
    below = gammaincc(window.n_min, lam) if window.n_min > 0 else 0.0  # P(N < n_min)
    return float(above + below)


def coherent_window(alpha: complex, eps: float = COHERENT_EPS) -> TruncationWindow:
    """Smallest-ish window around ``|alpha|^2`` losing at most ``eps`` of the norm."""
    lam = abs(alpha) ** 2
    if lam == 0.0:
        return TruncationWindow(0, 0)
    spread = math.sqrt(lam)
    k = 4.0
    while True:
        w = TruncationWindow(max(0, math.floor(lam - k * spread) - 2),
                             math.ceil(lam + k * spread) + 2)
        if coherent_loss(alpha, w) <= eps:
            return w
        k += 0.5


def field_amplitudes(init: FieldInit, window: TruncationWindow,
                     eps: float = COHERENT_EPS) -> np.ndarray:
    """Normalized single-mode amplitudes of ``init`` on ``window``."""
    amps = np.zeros(window.size, dtype=complex)
    if isinstance(init, Fock):
        if init.n not in window:
            raise WindowTooSmall(f"Fock occupation {init.n} lies outside window {window}")
        amps[init.n - window.n_min] = 1.0
        return amps
    alpha = init.amplitude
    loss = coherent_loss(alpha, window)
    if loss > eps:
        raise WindowTooSmall(
            f"coherent state alpha={alpha:g} loses {loss:.3g} > {eps:g} of its norm "
            f"on window {window}; try {coherent_window(alpha, eps)}")
    if alpha == 0:
        amps[0] = 1.0
        return amps
    n = window.occupations
    log_mag = -0.5 * abs(alpha) ** 2 + n * math.log(abs(alpha)) - 0.5 * np.array(
        [math.lgamma(k + 1.0) for k in n])
    amps = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))
    return amps / np.linalg.norm(amps)


@dataclass(frozen=True)
class ProductBasis:
    window1: TruncationWindow
    window2: TruncationWindow

    @property
    def shape(self) -> tuple[int, int, int]:
        return (2, self.window1.size, self.window2.size)

    @property
    def dimension(self) -> int:
        return 2 * self.window1.size * self.window2.size

    def index(self, level, n1: int, n2: int) -> int:
        level = EmitterLevel(level)
        if n1 not in self.window1 or n2 not in self.window2:
            raise IndexError(f"({n1}, {n2}) outside windows {self.window1} x {self.window2}")
        m1, m2 = self.window1.size, self.window2.size
        return int(level) * m1 * m2 + (n1 - self.window1.n_min) * m2 + (n2 - self.window2.n_min)

    def label(self, i: int) -> tuple[EmitterLevel, int, int]:
        if not 0 <= i < self.dimension:
            raise IndexError(i)
        m1, m2 = self.window1.size, self.window2.size
        level, rest = divmod(i, m1 * m2)
        k1, k2 = divmod(rest, m2)
        return EmitterLevel(level), self.window1.n_min + k1, self.window2.n_min + k2

    def grids(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcast arrays of (level, n1, n2) with the basis shape."""
        level = np.arange(2).reshape(2, 1, 1)
        n1 = self.window1.occupations.reshape(1, -1, 1)
        n2 = self.window2.occupations.reshape(1, 1, -1)
        return np.broadcast_arrays(level, n1, n2)

    def window(self, mode: int) -> TruncationWindow:
        if mode == 1:
            return self.window1
        if mode == 2:
            return self.window2
        raise ValueError(f"mode must be 1 or 2, got {mode}")


def build_basis(w1: TruncationWindow, w2: TruncationWindow) -> ProductBasis:
    return ProductBasis(w1, w2)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitudes aligned to a :class:`ProductBasis`.

    The amplitude array is copied and frozen on construction.  Normalization
    is the caller's business; :func:`init_state` and the integrators always
    return unit vectors.
    """

    basis: ProductBasis
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.basis.dimension:
            raise BasisMismatch(
                f"{amps.size} amplitudes for a basis of dimension {self.basis.dimension}")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    def as_array(self) -> np.ndarray:
        return self.amplitudes.reshape(self.basis.shape)

    def norm(self) -> float:
        return math.sqrt(math.fsum((np.abs(self.amplitudes) ** 2).tolist()))

    def normalized(self) -> "StateVector":
        return StateVector(self.basis, self.amplitudes / self.norm())

    def inner(self, other: "StateVector") -> complex:
        """``<self|other>``."""
        check_same_basis(self, other)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    @classmethod
    def from_labels(cls, basis: ProductBasis, components: dict) -> "StateVector":
        """Build a state from ``{(level, n1, n2): amplitude}`` and normalize it."""
        amps = np.zeros(basis.dimension, dtype=complex)
        for (level, n1, n2), c in components.items():
            amps[basis.index(level, n1, n2)] += c
        return cls(basis, amps).normalized()


def check_same_basis(a: StateVector, b: StateVector) -> None:
    if a.basis != b.basis:
        raise BasisMismatch(f"{a.basis} vs {b.basis}")


def init_state(basis: ProductBasis, level, f1: FieldInit, f2: FieldInit,
               eps: float = COHERENT_EPS) -> StateVector:
    """Product state ``|level> (x) f1 (x) f2`` on ``basis``.

    Raises :class:`WindowTooSmall` when a Fock occupation is outside its
    window or a coherent state loses more than ``eps`` of its norm to
    truncation.
    """
    level = EmitterLevel.parse(level)
    c1 = field_amplitudes(f1, basis.window1, eps)
    c2 = field_amplitudes(f2, basis.window2, eps)
    psi = np.zeros(basis.shape, dtype=complex)
    psi[int(level)] = np.outer(c1, c2)
    psi /= np.linalg.norm(psi)
    return StateVector(basis, psi)


def _ladder_views(basis: ProductBasis, mode: int):
    """Slices pairing (Ground, n_j) with (Excited, n_j - 1) inside the window.

    Returns ``(ground_slice, excited_slice, sqrt_n)`` where ``sqrt_n`` holds
    sqrt(n_j) of the ground-side photon numbers, broadcastable to the slices.
    """
    w = basis.window(mode)
    sqrt_n = np.sqrt(w.occupations[1:].astype(float))
    if mode == 1:
        return (slice(1, None), slice(None)), (slice(None, -1), slice(None)), sqrt_n[:, None]
    return (slice(None), slice(1, None)), (slice(None), slice(None, -1)), sqrt_n[None, :]


def apply_raising_term(state: StateVector, mode: int) -> StateVector:
    """Apply ``sigma^dag a_j``: (G, n_j) -> sqrt(n_j) (X, n_j - 1).

    Components whose image falls below the window's lower edge are dropped.
    The result is not normalized.
    """
    psi = state.as_array()
    out = np.zeros_like(psi)
    g_sl, x_sl, sqrt_n = _ladder_views(state.basis, mode)
    out[1][x_sl] = sqrt_n * psi[0][g_sl]
    return StateVector(state.basis, out)


def apply_lowering_term(state: StateVector, mode: int) -> StateVector:
    """Apply ``sigma a_j^dag``: (X, n_j) -> sqrt(n_j + 1) (G, n_j + 1).

    Components whose image falls above the window's upper edge are dropped.
    The result is not normalized.
    """
    psi = state.as_array()
    out = np.zeros_like(psi)
    g_sl, x_sl, sqrt_n = _ladder_views(state.basis, mode)
    out[0][g_sl] = sqrt_n * psi[1][x_sl]
    return StateVector(state.basis, out)


def annihilation_matrix(window: TruncationWindow) -> np.ndarray:
    """Dense ``a`` restricted to ``window``."""
    return np.diag(np.sqrt(window.occupations[1:].astype(float)), k=1)


def raising_matrix(basis: ProductBasis, mode: int) -> np.ndarray:
    """Dense ``sigma^dag a_j`` on ``basis``, built by Kronecker products."""
    sigma_dag = np.array([[0.0, 0.0], [1.0, 0.0]])  # |X><G| with G -> 0, X -> 1
    a1 = annihilation_matrix(basis.window1) if mode == 1 else np.eye(basis.window1.size)
    a2 = annihilation_matrix(basis.window2) if mode == 2 else np.eye(basis.window2.size)
    if mode not in (1, 2):
        raise ValueError(f"mode must be 1 or 2, got {mode}")
    return np.kron(sigma_dag, np.kron(a1, a2))
