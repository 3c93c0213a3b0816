"""Post-processing of trajectories and exact measurement-sequence algebra."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ImpossibleOutcomeError, ValidationError
from .measurement import two_level_kraus
from .traj import TrajectoryRecord

DEFAULT_BAND = 0.1


@dataclass(frozen=True, eq=False)
class EnsembleMean:
    times: np.ndarray
    mean: np.ndarray  # (n_samples, 3)
    stderr: np.ndarray  # (n_samples, 3)
    n: int


class EnsembleAccumulator:
    """Running sums for the pointwise mean and standard error of (u, v, w)."""

    def __init__(self):
        self.times = None
        self.n = 0
        self._sum = None
        self._sumsq = None

    def add(self, record: TrajectoryRecord) -> None:
        if self.times is None:
            self.times = record.times.copy()
            self._sum = np.zeros_like(record.bloch)
            self._sumsq = np.zeros_like(record.bloch)
        elif record.times.shape != self.times.shape or not np.array_equal(record.times, self.times):
            raise ValueError("trajectories do not share a sample grid")
        self._sum += record.bloch
        self._sumsq += record.bloch**2
        self.n += 1

    def result(self) -> EnsembleMean:
        if self.n == 0:
            raise ValueError("need at least one trajectory")
        mean = self._sum / self.n
        if self.n == 1:
            stderr = np.zeros_like(mean)
        else:
            var = (self._sumsq - self.n * mean**2) / (self.n - 1)
            stderr = np.sqrt(np.clip(var, 0.0, None) / self.n)
        return EnsembleMean(times=self.times.copy(), mean=mean, stderr=stderr, n=self.n)


def ensemble_mean_bloch(records: Sequence[TrajectoryRecord]) -> EnsembleMean:
    """Pointwise mean and standard error of (u, v, w) over trajectories on a common grid."""
    if not records:
        raise ValueError("need at least one trajectory")
    acc = EnsembleAccumulator()
    for r in records:
        acc.add(r)
    return acc.result()


@dataclass(frozen=True)
class SequenceState:
    alpha: complex
    beta: complex
    probability: float

    def __post_init__(self):
        norm2 = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm2 - 1.0) > 1e-12:
            raise ValidationError(f"sequence state not normalized (|a|^2+|b|^2 = {norm2!r})")
        if not -1e-15 <= self.probability <= 1.0 + 1e-12:
            raise ValidationError(f"probability {self.probability} outside [0, 1]")

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([self.alpha, self.beta])


def sequence_state(alpha: complex, beta: complex, p: float, outcomes: Sequence[int]) -> SequenceState:
    """State and probability after a run of measurement results with no evolution between.

    Applies the two-level effects for ``outcomes`` in order (first element
    first) to ``alpha|1> + beta|2>``.  The probability is the squared norm of the
    unnormalized final state, accumulated as a product of conditional
    probabilities so long sequences do not underflow.
    """
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("need at least one outcome")
    psi = np.array([alpha, beta], dtype=complex)
    if abs(np.vdot(psi, psi).real - 1.0) > 1e-12:
        raise ValidationError("initial amplitudes are not normalized")
    effects = [a[0] for a in two_level_kraus(p).outcomes]
    prob = 1.0
    for i in outcomes:
        if i not in (1, 2):
            raise ValueError(f"outcome must be 1 or 2, got {i!r}")
        psi = effects[i - 1] @ psi
        step = float(np.vdot(psi, psi).real)
        if step <= 0.0:
            raise ImpossibleOutcomeError(f"outcome sequence {outcomes} has zero probability")
        prob *= step
        psi = psi / np.sqrt(step)
    return SequenceState(complex(psi[0]), complex(psi[1]), prob)


def sequence_probabilities(alpha: complex, beta: complex, p: float, length: int) -> dict:
    """Probability of every outcome sequence of the given length (zero if impossible)."""
    out = {}
    for seq in itertools.product((1, 2), repeat=length):
        try:
            out[seq] = sequence_state(alpha, beta, p, seq).probability
        except ImpossibleOutcomeError:
            out[seq] = 0.0
    return out


def mini_jump_ratio(epsilon: float, p: float) -> float:
    """``(eps^2 + p^2)/p``: odds of a second result 1 against a result 2 after a first 1."""
    if not 0.0 < p <= 0.5:
        raise ValueError(f"ratio undefined for p={p}; need 0 < p <= 1/2")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    return (epsilon**2 + p**2) / p


def zeno_jump_probability(epsilon: float) -> float:
    """Probability ``eps^2`` that a perfect measurement finds the other level."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    return epsilon**2


@dataclass(frozen=True)
class JumpReport:
    """Band-crossing features of an inversion record.

    ``jumps`` are ``(time, direction)`` pairs with direction ``"down"`` or ``"up"``;
    ``filaments`` are ``(start, end, extremal_w)``; ``dwell_times`` are the
    intervals spent in one eigenstate band between jumps (first and last are
    cut off by the record ends).
    """

    jumps: list = field(default_factory=list)
    dwell_times: list = field(default_factory=list)
    filaments: list = field(default_factory=list)
    duration: float = 0.0
    band: float = DEFAULT_BAND

    @property
    def jump_rate(self) -> float:
        return len(self.jumps) / self.duration if self.duration > 0 else 0.0

    @property
    def filament_rate(self) -> float:
        return len(self.filaments) / self.duration if self.duration > 0 else 0.0

    @property
    def interior_dwell_times(self) -> list:
        """Dwell times bounded by a jump at both ends."""
        return list(self.dwell_times[1:-1]) if len(self.jumps) >= 2 else []

    @property
    def mean_dwell(self) -> float:
        interior = self.interior_dwell_times
        if interior:
            return float(np.mean(interior))
        return float(np.mean(self.dwell_times)) if self.dwell_times else float("nan")


def _inversion_series(record: TrajectoryRecord) -> tuple[np.ndarray, np.ndarray]:
    """Samples merged with the pre/post values at each logged measurement."""
    ev = record.events
    if len(ev) == 0:
        return record.times, record.w
    t = np.concatenate([ev.time, ev.time, record.times])
    # at equal times: value before the event, after it, then samples (which are post-event)
    order_key = np.concatenate(
        [np.zeros(len(ev)), np.ones(len(ev)), np.full(len(record.times), 2.0)]
    )
    w = np.concatenate([ev.w_before, ev.w_after, record.w])
    idx = np.lexsort((order_key, t))
    return t[idx], w[idx]


def detect_jumps(record, band: float = DEFAULT_BAND) -> JumpReport:
    """Find telegraph jumps, dwell times and filaments in an inversion record.

    ``record`` is a :class:`TrajectoryRecord` (its event log, if kept, is merged
    with the samples) or a ``(times, w)`` pair.  The eigenstate bands are
    ``w >= 1 - band`` and ``w <= -1 + band``.  Leaving a band and coming back to
    it is a filament; arriving in the other band is a jump.
    """
    if not 0.0 < band < 1.0:
        raise ValueError(f"band must lie in (0, 1), got {band}")
    if isinstance(record, TrajectoryRecord):
        times, w = _inversion_series(record)
    else:
        times, w = (np.asarray(x, dtype=float) for x in record)
    if len(times) == 0:
        return JumpReport(band=band)
    duration = float(times[-1] - times[0])

    label = np.zeros(len(w), dtype=np.int8)
    label[w >= 1.0 - band] = 1
    label[w <= -1.0 + band] = -1
    change = np.flatnonzero(np.diff(label)) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [len(w)]])

    jumps, dwells, filaments = [], [], []
    current = 0  # band we are attached to
    dwell_start = None
    excursion_start = None
    for s, e in zip(starts.tolist(), ends.tolist()):
        lab = int(label[s])
        t_s = float(times[s])
        if current == 0:
            if lab != 0:
                current, dwell_start = lab, t_s
            continue
        if lab == 0:
            excursion_start = (t_s, s)
            continue
        if lab == current:
            if excursion_start is not None:
                t0, i0 = excursion_start
                seg = w[i0:s]
                extreme = float(seg.min() if current == 1 else seg.max())
                filaments.append((t0, t_s, extreme))
            excursion_start = None
            continue
        jumps.append((t_s, "down" if current == 1 else "up"))
        dwells.append(t_s - dwell_start)
        current, dwell_start, excursion_start = lab, t_s, None
    if current != 0:
        dwells.append(float(times[-1]) - dwell_start)
    return JumpReport(jumps=jumps, dwell_times=dwells, filaments=filaments, duration=duration, band=band)


def pooled_jump_statistics(reports: Sequence[JumpReport]) -> dict:
    """Rates and mean dwell pooled over several reports."""
    total = sum(r.duration for r in reports)
    n_jumps = sum(len(r.jumps) for r in reports)
    n_fil = sum(len(r.filaments) for r in reports)
    interior = [d for r in reports for d in r.interior_dwell_times]
    return {
        "duration": total,
        "jumps": n_jumps,
        "filaments": n_fil,
        "jump_rate": n_jumps / total if total > 0 else 0.0,
        "filament_rate": n_fil / total if total > 0 else 0.0,
        "mean_dwell": float(np.mean(interior)) if interior else None,
    }
