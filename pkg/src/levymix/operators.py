"""First-order product-integration discretization of the distributed-order
Riemann-Liouville operator

    D u(t) = d/dt [ E b(Y) u(t) + ∫_c^t u(s) K(t - s) ds ],  K(s) = E nubar(s, Y),

and of its regularized form, which annihilates constants.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import AssumptionError, DomainError, PreconditionError
from .quadrature import checked_halfline

#: Laplace weight allowed at the end of the grid in :func:`symbol_check`
TAIL_WEIGHT = 1e-10


@dataclass(frozen=True)
class TimeGrid:
    """Points ``c + n h`` for ``n = 0..N``."""

    h: float
    N: int
    c: float = 0.0

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("step h must be positive")
        if self.N < 2:
            raise ValueError("N must be >= 2")

    @property
    def points(self):
        return self.c + self.h * np.arange(self.N + 1)

    @classmethod
    def covering(cls, length, h, c=0.0):
        return cls(h, max(2, int(math.ceil(length / h))), c)


@dataclass(frozen=True)
class ConvolutionKernel:
    """Cell integrals of ``K`` on a :class:`TimeGrid`.

    ``weights[k] = ∫_{kh}^{(k+1)h} K`` and
    ``moments[k] = ∫_{kh}^{(k+1)h} (s - kh) K(s) ds / h``, the latter being
    the part of the cell weight carried by the far node when ``u`` is linear
    on the cell.
    """

    grid: TimeGrid
    weights: np.ndarray
    moments: np.ndarray
    drift: float

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("k,s_low,s_high,weight,moment\n")
            h = self.grid.h
            for k, (w, m) in enumerate(zip(self.weights, self.moments)):
                fh.write(f"{k},{k * h!r},{(k + 1) * h!r},{float(w)!r},{float(m)!r}\n")


def build_kernel(mixed, grid):
    """Product-integration weights of ``E nubar`` on ``grid``."""
    if not mixed.report.a2:
        raise AssumptionError("tail is not integrable at 0 (E V(Y) = inf)", mixed.report)
    h = grid.h
    edges = h * np.arange(grid.N + 1)
    i1 = mixed.cum_kernel(edges)
    i2 = mixed.cum_kernel2(edges)
    if not np.all(np.isfinite(i1)):
        raise AssumptionError("first kernel weight diverges", mixed.report)
    # once the cumulative kernel saturates its differences are rounding noise
    weights = np.maximum(np.diff(i1), 0.0)
    moments = (np.diff(i2) - h * i1[:-1]) / h
    # rounding can push the moment slightly outside [0, weight]
    moments = np.clip(moments, 0.0, weights)
    return ConvolutionKernel(grid, weights, moments, float(mixed.mixed_drift))


def _check(u, kernel):
    u = np.asarray(u, float)
    if u.shape != (kernel.grid.N + 1,):
        raise ValueError(f"u must have {kernel.grid.N + 1} samples, got shape {u.shape}")
    return u


def convolution(u, kernel):
    """``J_n ≈ ∫_c^{t_n} u(s) K(t_n - s) ds`` with ``u`` linear per cell."""
    u = _check(u, kernel)
    n = u.size
    near = kernel.weights - kernel.moments
    coeff = np.zeros(n)
    coeff[: n - 1] += near
    coeff[1:] += kernel.moments
    j = fftconvolve(u, coeff)[:n]
    # the sum above includes a cell beyond the origin for the near weight
    j[: n - 1] -= near * u[0]
    j[0] = 0.0
    return j


def apply_rl(u, kernel):
    """Discrete operator at ``t_1..t_N`` (backward differences); index 0 is nan."""
    u = _check(u, kernel)
    j = convolution(u, kernel)
    h = kernel.grid.h
    out = np.full(u.size, np.nan)
    out[1:] = np.diff(j) / h + kernel.drift * np.diff(u) / h
    return out


def apply_regularized(u, kernel):
    """``apply_rl(u - u(c))``: the discrete image of the constant ``u(c)`` is
    removed, so constants are annihilated exactly."""
    u = _check(u, kernel)
    return apply_rl(u - u[0], kernel)


def _cell_laplace(values, grid, lam):
    """``∫ e^{-lam t} v(t) dt`` with ``v`` constant on each cell ``(t_{n-1}, t_n]``."""
    t = grid.points - grid.c
    e = np.exp(-lam * t)
    return float(np.sum(values[1:] * (e[:-1] - e[1:])) / lam)


def symbol_check(u, mixed, lambdas, grid, u_laplace=None, kernel=None):
    """Worst relative error between numerical Laplace transforms of the two
    discrete operators and their symbols

        E f(lam) u~(lam) - E b u(0)            (Riemann-Liouville)
        E f(lam) u~(lam) - E f(lam) u(0) / lam  (regularized)

    ``u`` is a callable on ``[0, inf)``; ``u_laplace`` its transform, computed
    by quadrature when omitted.
    """
    lambdas = np.atleast_1d(np.asarray(lambdas, float))
    if np.any(lambdas <= 0):
        raise DomainError("lambda must be positive")
    if grid.c != 0.0:
        raise DomainError("symbol_check needs a grid starting at 0")
    T = grid.N * grid.h
    if math.exp(-lambdas.min() * T) >= TAIL_WEIGHT:
        need = -math.log(TAIL_WEIGHT) / lambdas.min()
        raise PreconditionError(f"grid length {T:g} too short; need T > {need:g} for lambda={lambdas.min():g}")
    kernel = kernel or build_kernel(mixed, grid)
    samples = np.asarray(u(grid.points), float)
    rl = apply_rl(samples, kernel)
    reg = apply_regularized(samples, kernel)
    u0 = float(samples[0])
    worst = 0.0
    for lam in lambdas:
        if u_laplace is not None:
            ut = float(u_laplace(lam))
        else:
            ut = checked_halfline(lambda s: math.exp(-lam * s) * float(u(np.array(s))), "transform of u")
        ef = float(mixed.f(lam))
        exact_rl = ef * ut - mixed.mixed_drift * u0
        exact_reg = ef * ut - ef * u0 / lam
        for exact, vals in ((exact_rl, rl), (exact_reg, reg)):
            num = _cell_laplace(vals, grid, lam)
            worst = max(worst, abs(num - exact) / max(abs(exact), 1e-300))
    return worst
