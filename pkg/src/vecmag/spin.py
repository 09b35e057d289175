"""Dicke-basis representation of a collective spin.

N two-level particles in the fully symmetric subspace form a single spin
J = N/2.  Everything in this package lives in the (N+1)-dimensional Dicke
basis |J, m>, ordered by descending m (m = J first).  This module builds
the collective operators, the probe states, unitaries from Hermitian
generators, and the elementary expectation/fidelity helpers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "EnsembleDims",
    "DickeState",
    "CollectiveOperator",
    "FieldVector",
    "collective_operator",
    "squared_operator",
    "field_hamiltonian",
    "unitary_from_generator",
    "rotation",
    "twist",
    "scs_state",
    "ghz_state",
    "apply_unitary",
    "expectation",
    "variance",
    "fidelity",
]

AXES = ("x", "y", "z")

_NORM_TOL = 1e-12
_HERM_TOL = 1e-12


@dataclass(frozen=True)
class EnsembleDims:
    """Particle count N with derived total spin J = N/2 and dimension N + 1."""

    N: int

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise ValueError(f"particle count must be a positive integer, got {self.N!r}")

    @property
    def J(self) -> float:
        return self.N / 2.0

    @property
    def dim(self) -> int:
        return self.N + 1

    @property
    def m_values(self) -> np.ndarray:
        """Magnetic quantum numbers in basis order: J, J-1, ..., -J."""
        return self.J - np.arange(self.dim)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DickeState:
    """Normalized amplitude vector over |J, m> in descending-m order."""

    dims: EnsembleDims
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.dims.dim,):
            raise ValueError(
                f"amplitude vector has shape {amps.shape}, expected ({self.dims.dim},)")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"state norm {norm} deviates from 1")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True, eq=False)
class CollectiveOperator:
    """Hermitian matrix on the Dicke space with a descriptive label."""

    dims: EnsembleDims
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        d = self.dims.dim
        if mat.shape != (d, d):
            raise ValueError(f"operator has shape {mat.shape}, expected ({d}, {d})")
        if np.max(np.abs(mat - mat.conj().T)) > _HERM_TOL:
            raise ValueError(f"operator {self.label!r} is not Hermitian within {_HERM_TOL}")
        object.__setattr__(self, "matrix", _frozen(mat))


@dataclass(frozen=True)
class FieldVector:
    """Static field (Bx, By, Bz) in angular-frequency units.

    The effective coupling used everywhere is gamma * B_alpha, so with the
    default gamma = 1 the phase accumulated along axis alpha over time
    T_alpha is phi_alpha = B_alpha * T_alpha.
    """

    Bx: float
    By: float
    Bz: float
    gamma: float = 1.0

    def component(self, axis: str) -> float:
        return {"x": self.Bx, "y": self.By, "z": self.Bz}[axis]

    def coupling(self, axis: str) -> float:
        """gamma * B_alpha, the angular frequency actually driving axis alpha."""
        return self.gamma * self.component(axis)

    @property
    def components(self) -> tuple[float, float, float]:
        return (self.Bx, self.By, self.Bz)


@lru_cache(maxsize=None)
def _ladder_plus(N: int) -> np.ndarray:
    # J+ |J,m> = sqrt(J(J+1) - m(m+1)) |J,m+1>; in descending-m order the
    # nonzero elements sit on the first superdiagonal.
    dims = EnsembleDims(N)
    J = dims.J
    m = dims.m_values
    jp = np.zeros((dims.dim, dims.dim))
    for col in range(1, dims.dim):
        mm = m[col]
        jp[col - 1, col] = np.sqrt(J * (J + 1) - mm * (mm + 1))
    return _frozen(jp.astype(complex))


@lru_cache(maxsize=None)
def _axis_matrix(N: int, axis: str) -> np.ndarray:
    jp = _ladder_plus(N)
    if axis == "x":
        mat = (jp + jp.conj().T) / 2.0
    elif axis == "y":
        mat = (jp - jp.conj().T) / 2.0j
    elif axis == "z":
        mat = np.diag(EnsembleDims(N).m_values).astype(complex)
    else:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    return _frozen(mat)


def collective_operator(dims: EnsembleDims, axis: str) -> CollectiveOperator:
    """Collective spin operator J_axis in the descending-m Dicke basis.

    Parameters
    ----------
    dims : EnsembleDims
    axis : {'x', 'y', 'z'}

    Returns
    -------
    CollectiveOperator
        J_x = (J+ + J-)/2, J_y = (J+ - J-)/(2i), or J_z = diag(m).
    """
    return CollectiveOperator(dims, _axis_matrix(dims.N, axis), label=f"J{axis}")


def squared_operator(dims: EnsembleDims, axis: str) -> CollectiveOperator:
    """J_axis^2, the twist generator for the interaction-based readouts."""
    m = _axis_matrix(dims.N, axis)
    return CollectiveOperator(dims, m @ m, label=f"J{axis}^2")


def field_hamiltonian(dims: EnsembleDims, fv: FieldVector) -> CollectiveOperator:
    """H_B = gamma (Bx Jx + By Jy + Bz Jz)."""
    mat = sum(fv.coupling(ax) * _axis_matrix(dims.N, ax) for ax in AXES)
    return CollectiveOperator(dims, mat, label="H_B")


def unitary_from_generator(gen: CollectiveOperator, t: float) -> np.ndarray:
    """e^{-i G t} for Hermitian G, via spectral decomposition.

    The generators here are small Hermitian matrices, so eigendecomposition
    gives a unitary exact to eigensolver precision (no Pade scaling issues).
    """
    try:
        w, v = np.linalg.eigh(gen.matrix)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(
            f"eigendecomposition failed for generator {gen.label!r} "
            f"(dim {gen.dims.dim}): {exc}") from exc
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def rotation(dims: EnsembleDims, axis: str, theta: float) -> np.ndarray:
    """R_axis(theta) = e^{-i theta J_axis}."""
    return unitary_from_generator(collective_operator(dims, axis), theta)


def twist(dims: EnsembleDims, axis: str, theta: float) -> np.ndarray:
    """e^{-i theta J_axis^2}."""
    return unitary_from_generator(squared_operator(dims, axis), theta)


def scs_state(dims: EnsembleDims) -> DickeState:
    """Spin coherent state |J, J>: every particle up, the unentangled probe."""
    amps = np.zeros(dims.dim, dtype=complex)
    amps[0] = 1.0
    return DickeState(dims, amps)


def ghz_state(dims: EnsembleDims) -> DickeState:
    """GHZ state (|J, J> + |J, -J>)/sqrt(2), the maximally entangled probe."""
    amps = np.zeros(dims.dim, dtype=complex)
    amps[0] = amps[-1] = 1.0 / np.sqrt(2.0)
    return DickeState(dims, amps)


def apply_unitary(U: np.ndarray, state: DickeState) -> DickeState:
    """U |psi>, renormalized against accumulated round-off."""
    amps = U @ state.amplitudes
    norm = np.linalg.norm(amps)
    if abs(norm - 1.0) > 1e-9:
        raise ArithmeticError(f"evolution lost unitarity, norm {norm}")
    return DickeState(state.dims, amps / norm)


def expectation(state: DickeState, op: CollectiveOperator) -> float:
    """<psi| op |psi> as a real number.

    The imaginary part must vanish for Hermitian op; it is asserted below
    1e-10 and discarded.
    """
    if op.dims != state.dims:
        raise ValueError("state and operator built for different ensembles")
    val = np.vdot(state.amplitudes, op.matrix @ state.amplitudes)
    if abs(val.imag) > 1e-10:
        raise ArithmeticError(
            f"expectation of {op.label!r} has imaginary part {val.imag}")
    return float(val.real)


def variance(state: DickeState, op: CollectiveOperator) -> float:
    """<op^2> - <op>^2, clipped at round-off level."""
    mean = expectation(state, op)
    sq = CollectiveOperator(op.dims, op.matrix @ op.matrix, label=f"({op.label})^2")
    var = expectation(state, sq) - mean * mean
    if var < -1e-12:
        raise ArithmeticError(f"variance of {op.label!r} is negative: {var}")
    return max(var, 0.0)


def fidelity(a: DickeState, b: DickeState) -> float:
    """|<a|b>|^2."""
    if a.dims != b.dims:
        raise ValueError("states built for different ensembles")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)
