"""Independent reference computations used only by the tests."""

import numpy as np


def volterra_jost(V, k, x_max=12.0, h=0.01):
    """
    ``f(k, 0)`` from the Volterra equation
    ``f(k,x) = e^{ikx} + int_x^inf sin(k(y-x))/k V(y) f(k,y) dy``.

    Trapezoidal rule marched backward from ``x_max`` with three halvings of
    ``h`` combined by Richardson extrapolation. ``V`` maps an array of ``x``
    to ``(len(x), n, n)``.
    """
    levels = [_volterra_level(V, k, x_max, h / 2**j) for j in range(3)]
    r1 = (4 * levels[1] - levels[0]) / 3
    r2 = (4 * levels[2] - levels[1]) / 3
    return (16 * r2 - r1) / 15


def _volterra_level(V, k, x_max, h):
    N = int(round(x_max / h))
    x = np.linspace(0.0, x_max, N + 1)
    Vx = V(x)
    n = Vx.shape[-1]
    w = np.full(N + 1, h)
    w[-1] = h / 2
    f = np.zeros((N + 1, n, n), dtype=complex)
    f[N] = np.exp(1j * k * x_max) * np.eye(n)
    Vf = np.zeros_like(f)
    Vf[N] = Vx[N] @ f[N]
    for i in range(N - 1, -1, -1):
        ker = w[i + 1:] * np.sin(k * (x[i + 1:] - x[i])) / k
        f[i] = np.exp(1j * k * x[i]) * np.eye(n) + np.einsum("j,jab->ab", ker, Vf[i + 1:])
        Vf[i] = Vx[i] @ f[i]
    return f[0]


def gauss_integral(fun, a, b, n=200):
    """Gauss-Legendre quadrature of a vectorized ``fun`` on ``[a, b]``."""
    t, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (b - a) * t + 0.5 * (b + a)
    return 0.5 * (b - a) * np.tensordot(w, fun(x), axes=(0, 0))
