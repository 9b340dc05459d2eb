"""Independent reference computations the tests check the library against.

Nothing in here calls back into splitac's numerical paths: flows are
integrated with classical RK4, the scalar SDE with Euler-Maruyama on a
dense time grid, and spectral identities are evaluated through explicit
sine-matrix algebra.
"""

import numpy as np


def rk4_flow(z0, t_final, h=1e-5):
    """Integrate dz/dt = z - z^3 from z0 over [0, t_final] with RK4.

    ``z0`` may be a scalar or an array (lanes integrate independently).
    ``t_final`` is snapped to a whole number of steps of size h.
    """
    z = np.asarray(z0, dtype=np.float64).copy()
    f = lambda v: v - v**3
    n = int(round(t_final / h))
    for _ in range(n):
        k1 = f(z)
        k2 = f(z + 0.5 * h * k1)
        k3 = f(z + 0.5 * h * k2)
        k4 = f(z + h * k3)
        z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return z if z.ndim else float(z)


def rk4_flow_many(z0, t_targets, h=1e-5):
    """RK4 values of the flow at per-lane times (snapped to the h grid)."""
    z = np.asarray(z0, dtype=np.float64).copy()
    steps = np.round(np.asarray(t_targets) / h).astype(int)
    out = np.empty_like(z)
    done = np.zeros(z.shape, dtype=bool)
    f = lambda v: v - v**3
    for k in range(1, int(steps.max()) + 1):
        k1 = f(z)
        k2 = f(z + 0.5 * h * k1)
        k3 = f(z + 0.5 * h * k2)
        k4 = f(z + h * k3)
        z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        hit = (steps == k) & ~done
        out[hit] = z[hit]
        done |= hit
    out[steps == 0] = np.asarray(z0, dtype=np.float64)[steps == 0]
    return out


def euler_maruyama_scalar(a_lin, x0, T, dt, noise_var_rate, n_samples, seed):
    """Dense-step reference for dX = (a_lin*X + X - X^3) dt + s dB.

    ``noise_var_rate`` is the variance per unit time of the driving
    noise (s^2).  Returns the terminal values of ``n_samples``
    independent paths.
    """
    rng = np.random.default_rng(seed)
    n_steps = int(round(T / dt))
    s = np.sqrt(noise_var_rate * dt)
    x = np.full(n_samples, float(x0))
    for _ in range(n_steps):
        x += dt * (a_lin * x + x - x**3) + s * rng.standard_normal(n_samples)
    return x


def sine_matrix(n):
    """Dense DST-I synthesis matrix S[k, j] = sin(k*pi*j/(n+1))."""
    idx = np.arange(1, n + 1)
    return np.sin(np.pi * np.outer(idx, idx) / (n + 1))


def resolvent_dense(n, dt):
    """Dense (I - dt*A_h)^{-1} for the Dirichlet stencil on n nodes."""
    dx2 = (1.0 / (n + 1)) ** 2
    A = (
        np.diag(np.full(n, -2.0))
        + np.diag(np.ones(n - 1), 1)
        + np.diag(np.ones(n - 1), -1)
    ) / dx2
    return np.linalg.inv(np.eye(n) - dt * A)
