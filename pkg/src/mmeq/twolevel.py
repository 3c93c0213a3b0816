"""Resonantly driven two-level atom under imperfect energy measurements."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measurement import two_level_kraus
from .mme import MMEModel
from .qops import BlochVector, pauli

UNDERDAMPED = "underdamped"
CRITICAL = "critical"
OVERDAMPED = "overdamped"

_CRITICAL_RTOL = 1e-12


def hamiltonian(omega: float) -> np.ndarray:
    """Rabi Hamiltonian ``-(Omega/2) s1``."""
    return -0.5 * float(omega) * pauli(1)


def gamma_of(rate: float, p: float) -> float:
    """Dephasing rate ``(R/2)(sqrt(1-p) - sqrt(p))^2``."""
    rate, p = float(rate), float(p)
    if not (np.isfinite(rate) and rate >= 0):
        raise ValueError(f"measurement rate must be >= 0, got {rate}")
    if not 0.0 <= p <= 0.5:
        raise ValueError(f"error probability p={p} outside [0, 1/2]")
    return 0.5 * rate * (math.sqrt(1 - p) - math.sqrt(p)) ** 2


def rate_for_gamma(gamma: float, p: float) -> float:
    """Measurement rate giving dephasing rate ``gamma`` at error probability ``p < 1/2``."""
    if not 0.0 <= p < 0.5:
        raise ValueError(f"error probability p={p} must lie in [0, 1/2) to match a rate")
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    return 2.0 * gamma / (math.sqrt(1 - p) - math.sqrt(p)) ** 2


def regime_of(omega: float, gamma: float) -> str:
    if abs(omega - gamma) <= _CRITICAL_RTOL * max(abs(omega), abs(gamma)):
        return CRITICAL
    return UNDERDAMPED if gamma < omega else OVERDAMPED


@dataclass(frozen=True)
class AtomParams:
    """Rabi frequency ``omega``, error probability ``p`` and measurement rate ``rate``."""

    omega: float = 1.0
    p: float = 0.0
    rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "omega", float(self.omega))
        if not (np.isfinite(self.omega) and self.omega >= 0):
            raise ValueError(f"Rabi frequency must be >= 0, got {self.omega}")
        # validates p and rate
        gamma_of(self.rate, self.p)
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "rate", float(self.rate))

    @property
    def gamma(self) -> float:
        return gamma_of(self.rate, self.p)

    @property
    def regime(self) -> str:
        return regime_of(self.omega, self.gamma)

    @property
    def omega_prime(self) -> float:
        """``sqrt(|Omega^2 - gamma^2|)``: reduced Rabi frequency, or the overdamped rate."""
        return math.sqrt(abs(self.omega**2 - self.gamma**2))

    def model(self) -> MMEModel:
        return MMEModel(hamiltonian(self.omega), two_level_kraus(self.p), self.rate)


def bloch_derivatives(b, omega: float, gamma: float) -> np.ndarray:
    """Right-hand side ``(-2g u, Omega w - 2g v, -Omega v)`` of the Bloch equations.

    Returned as an array rather than a :class:`BlochVector`, since a rate of change
    is not confined to the unit ball.
    """
    u, v, w = b
    return np.array([-2.0 * gamma * u, omega * w - 2.0 * gamma * v, -omega * v])


def _damped_cos_sin(t: float, omega: float, gamma: float) -> tuple[float, float]:
    """``exp(-g t) C(t)`` and ``exp(-g t) S(t)`` for the (v, w) oscillator.

    ``C = cos(W t)``, ``S = sin(W t)/W`` with ``W^2 = Omega^2 - gamma^2``, continued
    analytically to cosh/sinh when ``gamma > Omega`` and to ``C = 1, S = t`` at
    critical damping.
    """
    disc = omega * omega - gamma * gamma
    if regime_of(omega, gamma) == CRITICAL or disc == 0.0:
        decay = math.exp(-gamma * t)
        return decay, decay * t
    if disc > 0:
        wp = math.sqrt(disc)
        decay = math.exp(-gamma * t)
        return decay * math.cos(wp * t), decay * math.sin(wp * t) / wp
    kp = math.sqrt(-disc)
    # exp(-g t) cosh(k t) without overflow for large t
    slow = math.exp((kp - gamma) * t)
    fast = math.exp(-(kp + gamma) * t)
    return 0.5 * (slow + fast), 0.5 * (slow - fast) / kp


def analytic_bloch(b0, t: float, omega: float, gamma: float) -> BlochVector:
    """Closed-form solution of the Bloch equations at time ``t`` from ``b0``."""
    t = float(t)
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    u0, v0, w0 = b0
    ec, es = _damped_cos_sin(t, omega, gamma)
    u = u0 * math.exp(-2.0 * gamma * t)
    v = v0 * (ec - gamma * es) + w0 * omega * es
    w = w0 * (ec + gamma * es) - v0 * omega * es
    return BlochVector(u, v, w)


def analytic_bloch_series(b0, times, omega: float, gamma: float) -> np.ndarray:
    """:func:`analytic_bloch` over an array of times, as an ``(n, 3)`` array."""
    return np.array([analytic_bloch(b0, t, omega, gamma).as_array() for t in np.asarray(times)])
