"""Small dense quantum states and operators.

Basis convention for two-level systems: index 0 is the lower level ``|1>``,
index 1 the upper level ``|2>``.  hbar = 1 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import DimensionError, ValidationError

MAX_DIM = 64
NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
BLOCH_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.flags.writeable = False
    return a


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a square, finite complex matrix (a fresh copy)."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    if not 1 <= m.shape[0] <= MAX_DIM:
        raise DimensionError(f"dimension {m.shape[0]} outside 1..{MAX_DIM}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix has non-finite entries")
    return m


def _check_same_dim(*mats: np.ndarray) -> None:
    shapes = {m.shape for m in mats}
    if len(shapes) != 1:
        raise DimensionError(f"dimension mismatch: {sorted(shapes)}")


@dataclass(frozen=True, eq=False)
class StateVector:
    """A normalized pure state."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or not 1 <= amps.size <= MAX_DIM:
            raise DimensionError(f"bad state vector shape {amps.shape}")
        if not np.all(np.isfinite(amps)):
            raise ValidationError("state vector has non-finite amplitudes")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError(f"state vector not normalized (norm={norm!r})")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @classmethod
    def normalized(cls, amplitudes) -> StateVector:
        amps = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(amps)
        if norm == 0 or not np.isfinite(norm):
            raise ValidationError("cannot normalize a zero or non-finite vector")
        return cls(amps / norm)

    @classmethod
    def basis(cls, level: int, dim: int = 2) -> StateVector:
        """Basis state ``|level>`` using 1-based level labels (``|1>``, ``|2>``, ...)."""
        if not 1 <= level <= dim:
            raise ValueError(f"level {level} outside 1..{dim}")
        amps = np.zeros(dim, dtype=complex)
        amps[level - 1] = 1.0
        return cls(amps)

    def __iter__(self) -> Iterator[complex]:
        return iter(self.amplitudes)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """A Hermitian, unit-trace, positive semidefinite operator."""

    matrix: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.matrix)
        herm, tr, min_eig = density_violations(m)
        if herm > HERMITIAN_TOL:
            raise ValidationError(f"density operator not Hermitian (error {herm:.3g})")
        if tr > TRACE_TOL:
            raise ValidationError(f"density operator trace differs from 1 by {tr:.3g}")
        if min_eig < -PSD_TOL:
            raise ValidationError(f"density operator has negative eigenvalue {min_eig:.3g}")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def maximally_mixed(cls, dim: int = 2) -> DensityOperator:
        return cls(np.eye(dim) / dim)


def density_violations(m: np.ndarray) -> tuple[float, float, float]:
    """Return (Hermiticity error, |trace - 1|, minimum eigenvalue) of ``m``.

    Works on a single matrix or a stack of shape ``(..., d, d)``; in the stacked
    case the worst value over the stack is returned.
    """
    m = np.asarray(m, dtype=complex)
    herm = float(np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2)))))
    tr = float(np.max(np.abs(np.trace(m, axis1=-2, axis2=-1) - 1.0)))
    hermitian_part = 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))
    min_eig = float(np.min(np.linalg.eigvalsh(hermitian_part)))
    return herm, tr, min_eig


@dataclass(frozen=True)
class BlochVector:
    """Bloch components ``(u, v, w) = (<s1>, <s2>, <s3>)``."""

    u: float
    v: float
    w: float

    def __post_init__(self):
        for name in ("u", "v", "w"):
            val = float(getattr(self, name))
            if not np.isfinite(val):
                raise ValidationError(f"Bloch component {name} is not finite")
            object.__setattr__(self, name, val)
        if self.length_squared() > 1.0 + BLOCH_TOL:
            raise ValidationError(
                f"Bloch vector length {np.sqrt(self.length_squared()):.12g} exceeds 1"
            )

    def length_squared(self) -> float:
        return self.u * self.u + self.v * self.v + self.w * self.w

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.w])

    def __iter__(self) -> Iterator[float]:
        return iter((self.u, self.v, self.w))


_PAULI = {
    # s1 = |1><2| + |2><1|
    1: np.array([[0, 1], [1, 0]], dtype=complex),
    # s2 = i(|1><2| - |2><1|)
    2: np.array([[0, 1j], [-1j, 0]], dtype=complex),
    # s3 = |2><2| - |1><1|
    3: np.array([[-1, 0], [0, 1]], dtype=complex),
}


def pauli(k: int) -> np.ndarray:
    """Pauli operator ``s_k`` for ``k`` in 1, 2, 3 (fresh array)."""
    if k not in _PAULI:
        raise ValueError(f"Pauli index must be 1, 2 or 3, got {k!r}")
    return _PAULI[k].copy()


def identity(dim: int = 2) -> np.ndarray:
    return np.eye(dim, dtype=complex)


def dagger(a) -> np.ndarray:
    return np.conj(as_matrix(a)).T


def commutator(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    _check_same_dim(a, b)
    return a @ b - b @ a


def anticommutator(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    _check_same_dim(a, b)
    return a @ b + b @ a


def trace(a) -> complex:
    return complex(np.trace(as_matrix(a)))


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    m = as_matrix(a)
    return bool(np.max(np.abs(m - m.conj().T)) <= tol)


def expectation(op, s: StateVector) -> complex:
    """``<psi|op|psi>``."""
    m = as_matrix(op)
    if m.shape[0] != s.dim:
        raise DimensionError(f"operator dim {m.shape[0]} != state dim {s.dim}")
    psi = s.amplitudes
    return complex(np.vdot(psi, m @ psi))


def fidelity(a: StateVector, b: StateVector) -> float:
    """``|<a|b>|^2`` for pure states."""
    if a.dim != b.dim:
        raise DimensionError(f"state dims differ: {a.dim} vs {b.dim}")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def density_from_state(s: StateVector) -> DensityOperator:
    if not isinstance(s, StateVector):
        s = StateVector(s)
    psi = s.amplitudes
    return DensityOperator(np.outer(psi, np.conj(psi)))


def bloch_from_density(rho: DensityOperator) -> BlochVector:
    m = rho.matrix if isinstance(rho, DensityOperator) else as_matrix(rho)
    if m.shape != (2, 2):
        raise DimensionError(f"Bloch vector needs a 2x2 operator, got {m.shape}")
    u, v, w = (float(np.real(np.trace(m @ _PAULI[k]))) for k in (1, 2, 3))
    return BlochVector(u, v, w)


def density_from_bloch(b: BlochVector) -> DensityOperator:
    if not isinstance(b, BlochVector):
        b = BlochVector(*b)
    m = 0.5 * (np.eye(2) + b.u * _PAULI[1] + b.v * _PAULI[2] + b.w * _PAULI[3])
    return DensityOperator(m)


def bloch_from_state(s: StateVector) -> BlochVector:
    """Bloch vector of a two-level pure state, without forming the density matrix."""
    if s.dim != 2:
        raise DimensionError(f"Bloch vector needs a two-level state, got dim {s.dim}")
    a, b = s.amplitudes
    ab = np.conj(a) * b
    return BlochVector(2.0 * ab.real, -2.0 * ab.imag, abs(b) ** 2 - abs(a) ** 2)


def state_from_bloch(b: BlochVector) -> StateVector:
    """A pure state with Bloch vector ``b`` (``|b|`` must be 1); global phase arbitrary."""
    if not isinstance(b, BlochVector):
        b = BlochVector(*b)
    if abs(b.length_squared() - 1.0) > BLOCH_TOL:
        raise ValidationError("only unit Bloch vectors correspond to pure states")
    rho = density_from_bloch(b).matrix
    vals, vecs = np.linalg.eigh(rho)
    return StateVector.normalized(vecs[:, int(np.argmax(vals))])
