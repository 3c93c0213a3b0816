"""The measurement master equation and its numerical propagation.

Measurements described by a :class:`~mmeq.measurement.KrausSet` occur at
Poisson-distributed times with mean rate ``R``; averaging over unknown results
gives

    drho/dt = -i[H, rho] + R (sum_ik A_ik rho A_ik^dag - rho).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError, NumericalFailure, ValidationError
from .measurement import KrausSet
from .qops import DensityOperator, as_matrix, bloch_from_density, density_violations

log = logging.getLogger(__name__)

# Integrator guards and tolerances.
MAX_STEP_RATE = 0.1
TRACE_RENORM_TOL = 1e-9
HERMITIAN_FAIL_TOL = 1e-10
PSD_FAIL_TOL = -1e-8


@dataclass(frozen=True, eq=False)
class MMEModel:
    """Hamiltonian, measurement and measurement rate (units of the Rabi frequency)."""

    hamiltonian: np.ndarray
    kraus: KrausSet
    rate: float

    def __post_init__(self):
        h = as_matrix(self.hamiltonian)
        if np.max(np.abs(h - h.conj().T)) > 1e-12:
            raise ValidationError("Hamiltonian is not Hermitian")
        if h.shape[0] != self.kraus.dim:
            raise DimensionError(f"Hamiltonian dim {h.shape[0]} != measurement dim {self.kraus.dim}")
        rate = float(self.rate)
        if not (np.isfinite(rate) and rate >= 0):
            raise ValidationError(f"measurement rate must be finite and >= 0, got {self.rate}")
        h = h.copy()
        h.flags.writeable = False
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "rate", rate)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


def _as_rho_matrix(rho, dim: int) -> np.ndarray:
    m = rho.matrix if isinstance(rho, DensityOperator) else as_matrix(rho)
    if m.shape[0] != dim:
        raise DimensionError(f"state dim {m.shape[0]} != model dim {dim}")
    return m


def _mme_rhs(h: np.ndarray, effects: list[np.ndarray], rate: float, m: np.ndarray) -> np.ndarray:
    jumped = sum(a @ m @ a.conj().T for a in effects)
    return -1j * (h @ m - m @ h) + rate * (jumped - m)


def generator(m: MMEModel, rho) -> np.ndarray:
    """Time derivative of ``rho`` under the measurement master equation."""
    r = _as_rho_matrix(rho, m.dim)
    return _mme_rhs(m.hamiltonian, m.kraus.effects(), m.rate, r)


def double_commutator_generator(observable, kappa: float, hamiltonian, rho) -> np.ndarray:
    """``-i[H, rho] - (kappa/2)[O, [O, rho]]`` for Hermitian ``O``."""
    o = as_matrix(observable)
    if np.max(np.abs(o - o.conj().T)) > 1e-12:
        raise ValueError("monitored observable must be Hermitian")
    h = as_matrix(hamiltonian)
    r = _as_rho_matrix(rho, o.shape[0])
    if h.shape != o.shape:
        raise DimensionError("Hamiltonian and observable dimensions differ")
    inner = o @ r - r @ o
    return -1j * (h @ r - r @ h) - 0.5 * kappa * (o @ inner - inner @ o)


def lindblad_operators(m: MMEModel) -> list[np.ndarray]:
    """Jump operators ``sqrt(R) A_ik`` putting the generator in Lindblad form."""
    return [np.sqrt(m.rate) * a for a in m.kraus.effects()]


def lindblad_generator(hamiltonian, jump_ops, rho) -> np.ndarray:
    """Generic Lindblad form ``-i[H,rho] + sum_k (L rho L^dag - {L^dag L, rho}/2)``."""
    h = as_matrix(hamiltonian)
    r = _as_rho_matrix(rho, h.shape[0])
    out = -1j * (h @ r - r @ h)
    for op in jump_ops:
        op = as_matrix(op)
        ldl = op.conj().T @ op
        out = out + op @ r @ op.conj().T - 0.5 * (ldl @ r + r @ ldl)
    return out


def superoperator(m: MMEModel) -> np.ndarray:
    """Matrix of the (linear) generator acting on row-major ``rho.ravel()``."""
    d = m.dim
    effects = m.kraus.effects()
    cols = []
    for idx in range(d * d):
        basis = np.zeros(d * d, dtype=complex)
        basis[idx] = 1.0
        cols.append(_mme_rhs(m.hamiltonian, effects, m.rate, basis.reshape(d, d)).ravel())
    return np.array(cols).T


def rk4_step_matrix(m: MMEModel, dt: float) -> np.ndarray:
    """One classical RK4 step for the linear generator, as a matrix.

    For ``x' = L x`` the four RK4 stages collapse to
    ``x -> (I + hL + (hL)^2/2 + (hL)^3/6 + (hL)^4/24) x``.
    """
    hl = dt * superoperator(m)
    eye = np.eye(hl.shape[0], dtype=complex)
    hl2 = hl @ hl
    hl3 = hl2 @ hl
    return eye + hl + hl2 / 2 + hl3 / 6 + hl3 @ hl / 24


def check_step(m: MMEModel, dt: float) -> None:
    if not (np.isfinite(dt) and dt > 0):
        raise ConfigurationError(f"time step must be positive, got dt={dt}")
    h_norm = float(np.linalg.norm(m.hamiltonian, 2))
    if dt * m.rate > MAX_STEP_RATE:
        raise ConfigurationError(f"dt*R = {dt * m.rate:.3g} exceeds {MAX_STEP_RATE}; reduce dt")
    if dt * h_norm > MAX_STEP_RATE:
        raise ConfigurationError(f"dt*||H|| = {dt * h_norm:.3g} exceeds {MAX_STEP_RATE}; reduce dt")


@dataclass(frozen=True, eq=False)
class Propagation:
    """Sampled density-operator trajectory from :func:`propagate`."""

    times: np.ndarray
    matrices: np.ndarray  # shape (n_samples, d, d)
    dt: float
    warnings: tuple = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.times)

    def states(self) -> list[DensityOperator]:
        """Validated snapshots; drift below the renormalization threshold is divided out here."""
        out = []
        for r in self.matrices:
            h = 0.5 * (r + r.conj().T)
            out.append(DensityOperator(h / np.trace(h).real))
        return out

    def bloch(self) -> np.ndarray:
        """Bloch components as an ``(n_samples, 3)`` array (two-level models only)."""
        if self.matrices.shape[1:] != (2, 2):
            raise DimensionError("Bloch components need a two-level model")
        r = self.matrices
        u = 2.0 * r[:, 0, 1].real
        v = 2.0 * r[:, 0, 1].imag
        w = (r[:, 1, 1] - r[:, 0, 0]).real
        return np.column_stack([u, v, w])

    def violations(self) -> tuple[float, float, float]:
        """Worst (Hermiticity error, trace error, minimum eigenvalue) over all samples."""
        return density_violations(self.matrices)


def _sample_stride(dt: float, sample_interval: float) -> int:
    stride = int(round(sample_interval / dt))
    if stride < 1 or abs(stride * dt - sample_interval) > 1e-9 * max(sample_interval, 1.0):
        raise ConfigurationError(
            f"sample_interval={sample_interval} must be a positive multiple of dt={dt}"
        )
    return stride


def propagate(
    m: MMEModel,
    rho0,
    t_final: float,
    dt: float,
    sample_interval: float | None = None,
) -> Propagation:
    """Integrate the master equation with fixed-step RK4 from ``t = 0`` to ``t_final``.

    Parameters
    ----------
    m : MMEModel
    rho0 : DensityOperator
        Initial state.
    t_final : float
        End time, in units of 1/Omega.
    dt : float
        Integrator step.  Must satisfy ``dt*R <= 0.1`` and ``dt*||H|| <= 0.1``.
    sample_interval : float, optional
        Output spacing, a multiple of ``dt``.  Defaults to ``dt``.

    Returns
    -------
    Propagation
        States at ``t = 0, sample_interval, ...`` up to ``t_final``.
    """
    check_step(m, dt)
    if not (np.isfinite(t_final) and t_final >= 0):
        raise ConfigurationError(f"t_final must be >= 0, got {t_final}")
    if not isinstance(rho0, DensityOperator):
        rho0 = DensityOperator(rho0)
    if rho0.dim != m.dim:
        raise DimensionError(f"initial state dim {rho0.dim} != model dim {m.dim}")
    stride = _sample_stride(dt, dt if sample_interval is None else sample_interval)
    n_steps = int(np.floor(t_final / dt + 1e-9))
    n_samples = n_steps // stride + 1

    d = m.dim
    step = rk4_step_matrix(m, dt)
    diag = np.arange(d) * (d + 1)
    x = rho0.matrix.ravel().copy()
    out = np.empty((n_samples, d * d), dtype=complex)
    out[0] = x
    notes = []
    for k in range(1, n_samples):
        for _ in range(stride):
            x = step @ x
        tr = x[diag].sum()
        drift = abs(tr - 1.0)
        if drift > TRACE_RENORM_TOL:
            msg = f"trace drift {drift:.3g} at t={k * stride * dt:.6g}; renormalized"
            log.warning(msg)
            notes.append(msg)
            x = x / tr
        out[k] = x

    matrices = out.reshape(n_samples, d, d)
    herm, _, min_eig = density_violations(matrices)
    if not np.all(np.isfinite(matrices)) or herm > HERMITIAN_FAIL_TOL or min_eig < PSD_FAIL_TOL:
        raise NumericalFailure(
            f"propagated state left the density-operator set "
            f"(Hermiticity error {herm:.3g}, min eigenvalue {min_eig:.3g})"
        )
    times = np.arange(n_samples) * (stride * dt)
    return Propagation(times=times, matrices=matrices, dt=dt, warnings=tuple(notes))


def bloch_series(prop: Propagation) -> list:
    """Validated :class:`~mmeq.qops.BlochVector` objects for every sample."""
    return [bloch_from_density(s) for s in prop.states()]
