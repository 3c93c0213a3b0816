"""Generalized measurements: Kraus effects, POM elements, collapse and channel.

Everything here is deterministic; outcome sampling lives in :mod:`mmeq.traj`.
Outcome labels are 1-based, matching the level labels ``|1>`` and ``|2>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CompletenessError, DimensionError, ImpossibleOutcomeError, UnsupportedError, ValidationError
from .qops import DensityOperator, StateVector, as_matrix

COMPLETENESS_TOL = 1e-10
POM_TOL = 1e-10


def _freeze(m: np.ndarray) -> np.ndarray:
    m = np.array(m, dtype=complex, copy=True)
    m.flags.writeable = False
    return m


@dataclass(frozen=True, eq=False)
class KrausSet:
    """Effect operators grouped by outcome.

    ``outcomes[i]`` is the tuple of effects ``A_ik`` belonging to outcome ``i + 1``.
    A group of one effect is an ordinary Kraus measurement; larger groups
    describe outcomes whose POM element is a sum of several effects.
    """

    outcomes: tuple

    def __post_init__(self):
        groups = []
        for group in self.outcomes:
            if isinstance(group, np.ndarray) and group.ndim == 2:
                group = (group,)
            effects = tuple(_freeze(as_matrix(a)) for a in group)
            if not effects:
                raise ValidationError("outcome group with no effects")
            groups.append(effects)
        if not groups:
            raise ValidationError("a Kraus set needs at least one outcome")
        dims = {a.shape[0] for g in groups for a in g}
        if len(dims) != 1:
            raise DimensionError(f"effects have mixed dimensions {sorted(dims)}")
        object.__setattr__(self, "outcomes", tuple(groups))
        err = completeness_error(self)
        if err > COMPLETENESS_TOL:
            raise CompletenessError(f"sum of A^dag A differs from identity by {err:.3g}")

    @property
    def dim(self) -> int:
        return self.outcomes[0][0].shape[0]

    @property
    def n_outcomes(self) -> int:
        return len(self.outcomes)

    def effects(self) -> list[np.ndarray]:
        """All effects, flattened across outcome groups."""
        return [a for group in self.outcomes for a in group]

    @classmethod
    def from_effects(cls, effects: Sequence) -> KrausSet:
        """One single-effect outcome per entry of ``effects``."""
        return cls(tuple((a,) for a in effects))


def completeness_error(k: KrausSet) -> float:
    total = sum(a.conj().T @ a for a in k.effects())
    return float(np.max(np.abs(total - np.eye(k.dim))))


@dataclass(frozen=True, eq=False)
class POM:
    """Probability operator measure: Hermitian, positive elements summing to I."""

    elements: tuple

    def __post_init__(self):
        elems = tuple(_freeze(as_matrix(e)) for e in self.elements)
        if not elems:
            raise ValidationError("a POM needs at least one element")
        if len({e.shape for e in elems}) != 1:
            raise DimensionError("POM elements have mixed dimensions")
        for i, e in enumerate(elems, start=1):
            if np.max(np.abs(e - e.conj().T)) > POM_TOL:
                raise ValidationError(f"POM element {i} is not Hermitian")
            if np.min(np.linalg.eigvalsh(0.5 * (e + e.conj().T))) < -POM_TOL:
                raise ValidationError(f"POM element {i} is not positive")
        total = sum(elems)
        if np.max(np.abs(total - np.eye(total.shape[0]))) > POM_TOL:
            raise CompletenessError("POM elements do not sum to the identity")
        object.__setattr__(self, "elements", elems)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]


@dataclass(frozen=True)
class MeasurementOutcome:
    index: int
    probability: float

    def __post_init__(self):
        if not -1e-12 <= self.probability <= 1 + 1e-12:
            raise ValidationError(f"probability {self.probability} outside [0, 1]")


def pom_from_kraus(k: KrausSet) -> POM:
    if not isinstance(k, KrausSet):
        k = KrausSet(k)
    return POM(tuple(sum(a.conj().T @ a for a in group) for group in k.outcomes))


def _rho_matrix(rho, dim: int) -> np.ndarray:
    m = rho.matrix if isinstance(rho, DensityOperator) else as_matrix(rho)
    if m.shape[0] != dim:
        raise DimensionError(f"state dim {m.shape[0]} != measurement dim {dim}")
    return m


def outcome_probabilities(k: KrausSet, rho: DensityOperator) -> list[MeasurementOutcome]:
    """``P(i) = Tr(rho pi_i)`` for every outcome, in outcome order."""
    m = _rho_matrix(rho, k.dim)
    pom = pom_from_kraus(k)
    probs = [float(np.real(np.trace(m @ e))) for e in pom.elements]
    return [MeasurementOutcome(i, min(max(pr, 0.0), 1.0)) for i, pr in enumerate(probs, start=1)]


def _outcome_effect(k: KrausSet, i: int) -> np.ndarray:
    if not 1 <= i <= k.n_outcomes:
        raise ValueError(f"outcome {i} outside 1..{k.n_outcomes}")
    group = k.outcomes[i - 1]
    if len(group) != 1:
        raise UnsupportedError(
            f"outcome {i} has {len(group)} effects; pure-state collapse needs a single effect"
        )
    return group[0]


def collapse(k: KrausSet, s: StateVector, i: int) -> StateVector:
    """Post-measurement state ``A_i|psi> / <psi|A_i^dag A_i|psi>^(1/2)``."""
    if s.dim != k.dim:
        raise DimensionError(f"state dim {s.dim} != measurement dim {k.dim}")
    a = _outcome_effect(k, i)
    phi = a @ s.amplitudes
    prob = float(np.real(np.vdot(phi, phi)))
    if prob <= 0.0:
        raise ImpossibleOutcomeError(f"outcome {i} has zero probability for this state")
    return StateVector.normalized(phi)


def collapse_density(k: KrausSet, rho: DensityOperator, i: int) -> DensityOperator:
    """Known-result update ``sum_k A_ik rho A_ik^dag / Tr(rho pi_i)``."""
    m = _rho_matrix(rho, k.dim)
    if not 1 <= i <= k.n_outcomes:
        raise ValueError(f"outcome {i} outside 1..{k.n_outcomes}")
    out = sum(a @ m @ a.conj().T for a in k.outcomes[i - 1])
    prob = float(np.real(np.trace(out)))
    if prob <= 0.0:
        raise ImpossibleOutcomeError(f"outcome {i} has zero probability for this state")
    out = out / prob
    return DensityOperator(0.5 * (out + out.conj().T))


def apply_channel(k: KrausSet, rho: DensityOperator) -> DensityOperator:
    """Unknown-result update ``sum_ik A_ik rho A_ik^dag``."""
    m = _rho_matrix(rho, k.dim)
    return DensityOperator(sum(a @ m @ a.conj().T for a in k.effects()))


def _check_error_probability(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 0.5:
        raise ValueError(f"error probability p={p} outside [0, 1/2]")
    return p


def two_level_pom(p: float) -> POM:
    """Imperfect energy measurement: outcome ``i`` reports level ``|i>`` with error ``p``."""
    p = _check_error_probability(p)
    return POM((np.diag([1 - p, p]), np.diag([p, 1 - p])))


def two_level_kraus(p: float) -> KrausSet:
    """Hermitian (diagonal) effects realising :func:`two_level_pom`."""
    p = _check_error_probability(p)
    sp, sq = np.sqrt(p), np.sqrt(1 - p)
    return KrausSet.from_effects([np.diag([sq, sp]), np.diag([sp, sq])])
