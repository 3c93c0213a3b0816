"""Pure-state quantum trajectories of the measured two-level atom.

Between measurements the state rotates exactly under ``H = -(Omega/2) s1``.
Measurements arrive as a Poisson process of rate ``R`` (``event-driven``
scheme) or with probability ``R*dt`` per time bin (``binned`` scheme); each
one picks an outcome with the Born probabilities of the two-level Kraus set
and collapses the state.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ConfigurationError, DimensionError
from .qops import StateVector
from .twolevel import AtomParams

EVENT_DRIVEN = "event-driven"
BINNED = "binned"
SCHEMES = (EVENT_DRIVEN, BINNED)
MAX_BIN_PROBABILITY = 0.05


@dataclass(frozen=True)
class TrajectoryConfig:
    """Run settings for a single trajectory (times in units of 1/Omega)."""

    t_final: float
    scheme: str = EVENT_DRIVEN
    dt: float | None = None
    sample_interval: float = 0.01
    seed: int = 0
    record_events: bool = True

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not (np.isfinite(self.t_final) and self.t_final > 0):
            raise ConfigurationError(f"t_final must be > 0, got {self.t_final}")
        if not (np.isfinite(self.sample_interval) and self.sample_interval > 0):
            raise ConfigurationError(f"sample_interval must be > 0, got {self.sample_interval}")
        if self.scheme == BINNED and (self.dt is None or not self.dt > 0):
            raise ConfigurationError("binned scheme needs a bin width dt > 0")
        if int(self.seed) != self.seed or self.seed < 0 or self.seed >= 2**64:
            raise ConfigurationError(f"seed must be an integer in [0, 2**64), got {self.seed!r}")

    def check_against(self, params: AtomParams) -> None:
        if self.scheme == BINNED and params.rate * self.dt > MAX_BIN_PROBABILITY:
            raise ConfigurationError(
                f"R*dt = {params.rate * self.dt:.3g} exceeds {MAX_BIN_PROBABILITY}; reduce dt"
            )


@dataclass(frozen=True)
class MeasurementEvent:
    time: float
    outcome: int
    w_before: float
    w_after: float
    gap: float


@dataclass(frozen=True, eq=False)
class EventLog:
    """Columnar measurement log; ``gap`` of the first event is measured from t = 0."""

    time: np.ndarray
    outcome: np.ndarray
    w_before: np.ndarray
    w_after: np.ndarray
    gap: np.ndarray

    @classmethod
    def empty(cls) -> EventLog:
        z = np.zeros(0)
        return cls(z, np.zeros(0, dtype=np.int8), z, z, z)

    def __len__(self) -> int:
        return len(self.time)

    def __getitem__(self, i: int) -> MeasurementEvent:
        return MeasurementEvent(
            float(self.time[i]), int(self.outcome[i]), float(self.w_before[i]),
            float(self.w_after[i]), float(self.gap[i]),
        )

    def __iter__(self) -> Iterator[MeasurementEvent]:
        return (self[i] for i in range(len(self)))


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    times: np.ndarray
    bloch: np.ndarray  # (n_samples, 3): u, v, w
    events: EventLog
    n_events: int
    params: AtomParams
    config: TrajectoryConfig
    stream: int | None
    final_state: StateVector

    @property
    def w(self) -> np.ndarray:
        return self.bloch[:, 2]

    @property
    def t_final(self) -> float:
        return self.config.t_final


def seed_sequence(seed: int, stream: int | None = None) -> np.random.SeedSequence:
    """Seed for trajectory ``stream`` of master ``seed``; distinct streams never collide."""
    if stream is None:
        return np.random.SeedSequence(int(seed))
    return np.random.SeedSequence(int(seed), spawn_key=(int(stream),))


def make_rng(seed: int, stream: int | None = None) -> np.random.Generator:
    # counter-based bit generator: reproducible under any scheduling
    return np.random.Generator(np.random.Philox(seed_sequence(seed, stream)))


def unitary_step(s: StateVector, omega: float, tau: float) -> StateVector:
    """Evolve ``s`` for time ``tau`` under ``H = -(Omega/2) s1``: ``exp(i Omega tau s1 / 2)``."""
    if tau < 0:
        raise ValueError(f"duration must be >= 0, got {tau}")
    if s.dim != 2:
        raise DimensionError("unitary_step acts on two-level states")
    a, b = _rotate(complex(s.amplitudes[0]), complex(s.amplitudes[1]), 0.5 * omega * tau)
    return StateVector.normalized([a, b])


def _rotate(a: complex, b: complex, theta: float) -> tuple[complex, complex]:
    c, s = math.cos(theta), math.sin(theta)
    return c * a + 1j * s * b, 1j * s * a + c * b


def _measure(a: complex, b: complex, sq: float, sp: float, draw: float) -> tuple[int, complex, complex]:
    """Sample an outcome with effects ``diag(sq, sp)``, ``diag(sp, sq)`` and collapse."""
    pa = a.real * a.real + a.imag * a.imag
    pb = b.real * b.real + b.imag * b.imag
    p1 = (sq * sq * pa + sp * sp * pb) / (pa + pb)
    if draw < p1:
        outcome, a, b = 1, sq * a, sp * b
    else:
        outcome, a, b = 2, sp * a, sq * b
    norm = math.sqrt(a.real * a.real + a.imag * a.imag + b.real * b.real + b.imag * b.imag)
    return outcome, a / norm, b / norm


def _event_times(rng: np.random.Generator, params: AtomParams, cfg: TrajectoryConfig) -> Iterator[float]:
    """Measurement times in ``[0, t_final]``, drawn in fixed-size blocks."""
    rate = params.rate
    if rate == 0:
        return
    block = max(256, int(1.1 * rate * cfg.t_final) + 256)
    if cfg.scheme == EVENT_DRIVEN:
        t = 0.0
        while True:
            for gap in rng.exponential(1.0 / rate, block).tolist():
                t += gap
                if t > cfg.t_final:
                    return
                yield t
    else:
        # A measurement happens at the start of each bin with probability R*dt;
        # bins between measurements are counted with geometric skips.
        q = rate * cfg.dt
        n_bins = int(math.floor(cfg.t_final / cfg.dt + 1e-9))
        j = -1
        while True:
            for skip in rng.geometric(q, block).tolist():
                j += skip
                if j >= n_bins:
                    return
                yield j * cfg.dt


def run_trajectory(
    params: AtomParams, s0: StateVector, cfg: TrajectoryConfig, stream: int | None = None
) -> TrajectoryRecord:
    """Simulate one trajectory.

    ``stream`` selects an independent random stream derived from ``cfg.seed``
    (used by :func:`run_ensemble`); ``None`` uses ``cfg.seed`` directly.
    Samples at time ``t`` include every measurement at times ``<= t``.
    """
    if not isinstance(s0, StateVector):
        s0 = StateVector(s0)
    if s0.dim != 2:
        raise DimensionError("trajectories are defined for two-level states")
    cfg.check_against(params)
    rng = make_rng(cfg.seed, stream)

    omega, p = params.omega, params.p
    half_omega = 0.5 * omega
    sq, sp = math.sqrt(1.0 - p), math.sqrt(p)
    n_samples = int(math.floor(cfg.t_final / cfg.sample_interval + 1e-9)) + 1
    ds = cfg.sample_interval
    us, vs, ws = [0.0] * n_samples, [0.0] * n_samples, [0.0] * n_samples

    ev_t, ev_o, ev_wb, ev_wa, ev_gap = [], [], [], [], []
    record = cfg.record_events
    a, b = complex(s0.amplitudes[0]), complex(s0.amplitudes[1])
    t = 0.0
    k = 0
    n_events = 0
    uniforms = iter(())

    def sample_until(limit: float, strict: bool) -> None:
        nonlocal k
        while k < n_samples and (k * ds < limit if strict else k * ds <= limit):
            aa, bb = _rotate(a, b, half_omega * (k * ds - t))
            ab = aa.conjugate() * bb
            us[k] = 2.0 * ab.real
            vs[k] = -2.0 * ab.imag
            ws[k] = (bb.real * bb.real + bb.imag * bb.imag) - (aa.real * aa.real + aa.imag * aa.imag)
            k += 1

    for te in _event_times(rng, params, cfg):
        sample_until(te, strict=True)
        a, b = _rotate(a, b, half_omega * (te - t))
        draw = next(uniforms, None)
        if draw is None:
            uniforms = iter(rng.random(4096).tolist())
            draw = next(uniforms)
        w_before = (b.real * b.real + b.imag * b.imag) - (a.real * a.real + a.imag * a.imag)
        outcome, a, b = _measure(a, b, sq, sp, draw)
        if record:
            ev_t.append(te)
            ev_o.append(outcome)
            ev_wb.append(w_before)
            ev_wa.append((b.real * b.real + b.imag * b.imag) - (a.real * a.real + a.imag * a.imag))
            ev_gap.append(te - t)
        n_events += 1
        t = te
    sample_until(cfg.t_final, strict=False)
    a, b = _rotate(a, b, half_omega * (cfg.t_final - t))

    if record:
        events = EventLog(
            np.array(ev_t), np.array(ev_o, dtype=np.int8), np.array(ev_wb),
            np.array(ev_wa), np.array(ev_gap),
        )
    else:
        events = EventLog.empty()
    return TrajectoryRecord(
        times=np.arange(n_samples) * ds,
        bloch=np.column_stack([us, vs, ws]),
        events=events,
        n_events=n_events,
        params=params,
        config=cfg,
        stream=stream,
        final_state=StateVector.normalized([a, b]),
    )


def _run_indexed(args):
    params, s0, cfg, index = args
    return run_trajectory(params, s0, cfg, stream=index)


def iter_ensemble(
    params: AtomParams, s0: StateVector, cfg: TrajectoryConfig, n: int
) -> Iterator[TrajectoryRecord]:
    """Lazily yield the trajectories of :func:`run_ensemble` in index order."""
    if n < 1:
        raise ConfigurationError(f"ensemble size must be >= 1, got {n}")
    cfg.check_against(params)
    for i in range(n):
        yield run_trajectory(params, s0, cfg, stream=i)


def run_ensemble(
    params: AtomParams, s0: StateVector, cfg: TrajectoryConfig, n: int, workers: int = 1
) -> list[TrajectoryRecord]:
    """``n`` independent trajectories; trajectory ``i`` uses stream ``i`` of ``cfg.seed``.

    Results are ordered by index and do not depend on ``workers``.
    """
    if workers <= 1:
        return list(iter_ensemble(params, s0, cfg, n))
    if n < 1:
        raise ConfigurationError(f"ensemble size must be >= 1, got {n}")
    cfg.check_against(params)
    jobs = [(params, s0, cfg, i) for i in range(n)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_indexed, jobs, chunksize=max(1, n // (4 * workers))))
