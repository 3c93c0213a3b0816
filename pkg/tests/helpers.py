"""Independent reference implementations used as test oracles."""

import numpy as np

S1 = np.array([[0, 1], [1, 0]], dtype=complex)
S2 = np.array([[0, 1j], [-1j, 0]], dtype=complex)
S3 = np.array([[-1, 0], [0, 1]], dtype=complex)


def matmul2(a, b):
    """Explicit 2x2 product, written out element by element."""
    return np.array(
        [[a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
         [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]]],
        dtype=complex,
    )


def bloch_ode(y, omega, gamma):
    u, v, w = y
    return np.array([-2 * gamma * u, omega * w - 2 * gamma * v, -omega * v])


def rk4_bloch(y0, t_final, h, omega, gamma):
    """Classical RK4 on the three Bloch equations (independent of the library integrator)."""
    y = np.array(y0, dtype=float)
    n = int(round(t_final / h))
    out = [y.copy()]
    for _ in range(n):
        k1 = bloch_ode(y, omega, gamma)
        k2 = bloch_ode(y + 0.5 * h * k1, omega, gamma)
        k3 = bloch_ode(y + 0.5 * h * k2, omega, gamma)
        k4 = bloch_ode(y + h * k3, omega, gamma)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(y.copy())
    return np.arange(n + 1) * h, np.array(out)


def gamma_formula(rate, p):
    return 0.5 * rate * (np.sqrt(1 - p) - np.sqrt(p)) ** 2


def rate_from_gamma(gamma, p):
    return 2 * gamma / (np.sqrt(1 - p) - np.sqrt(p)) ** 2


def random_state(rng, dim=2):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density(rng, dim=2, rank=None):
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    return m / np.trace(m).real
