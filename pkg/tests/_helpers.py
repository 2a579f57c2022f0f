"""Shared oracles and random generators for the test suite.

Everything here is independent of the library's own algorithms: closed-form
exponentials, quadrature, and stage-by-stage integrators, so library results
can be checked against a second route.
"""

import numpy as np

from qenvelope import GeneratorFamily, interval_generator


def two_state_generator(a, b):
    """The rate matrix [[-a, a], [b, -b]]."""
    return np.array([[-a, a], [b, -b]], dtype=float)


def two_state_exp(a, b, t):
    """Closed-form e^{t q} for q = [[-a, a], [b, -b]] with a + b > 0."""
    s = a + b
    decay = np.exp(-s * t)
    return np.array([
        [b + a * decay, a - a * decay],
        [b - b * decay, a + b * decay],
    ]) / s


def rk4_affine(q, f, u0, t, steps):
    """Fixed-step classical Runge-Kutta for the linear system u' = q u + f."""
    q = np.asarray(q, float)
    f = np.asarray(f, float)
    u = np.array(u0, dtype=float)
    h = t / steps
    for _ in range(steps):
        k1 = q @ u + f
        k2 = q @ (u + 0.5 * h * k1) + f
        k3 = q @ (u + 0.5 * h * k2) + f
        k4 = q @ (u + h * k3) + f
        u = u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return u


def trapezoid_flow_offset(a, b, f, h, steps=100_000):
    """Trapezoid quadrature of the integral of e^{s q} f over [0, h] for the
    closed-form two-state generator."""
    s = a + b
    grid = np.linspace(0.0, h, steps + 1)
    decay = np.exp(-s * grid)
    comp0 = ((b + a * decay) * f[0] + (a - a * decay) * f[1]) / s
    comp1 = ((b - b * decay) * f[0] + (a + b * decay) * f[1]) / s
    return np.trapezoid(np.stack([comp0, comp1], axis=1), grid, axis=0)


def off_to_rate(off):
    """Zero the diagonal of ``off`` and refill it so rows sum to zero."""
    m = np.array(off, dtype=float)
    np.fill_diagonal(m, 0.0)
    np.fill_diagonal(m, -m.sum(axis=1))
    return m


def random_rate_matrix(rng, d, scale=1.0):
    return off_to_rate(rng.uniform(0.0, scale, (d, d)))


def random_family(rng, d, members=2, convex=False, scale=1.0, direction="upper"):
    """A random valid family; ``convex=True`` adds nonpositive penalties with
    member 0 exactly unpenalised."""
    mats = tuple(random_rate_matrix(rng, d, scale) for _ in range(members))
    pens = None
    if convex:
        pens = (np.zeros(d),) + tuple(
            -np.abs(rng.uniform(0.0, 0.5, d)) for _ in range(members - 1)
        )
    return GeneratorFamily(mats, pens, direction=direction)


def random_interval_family(rng, d, direction="upper"):
    """Interval family whose endpoints are guaranteed valid: the base matrix
    off-diagonals dominate the spread's."""
    q0 = off_to_rate(0.5 + rng.uniform(0.0, 1.0, (d, d)))
    spread = off_to_rate(rng.uniform(0.0, 0.3, (d, d)))
    return interval_generator(q0, spread, -1.0, 1.0, direction=direction)
