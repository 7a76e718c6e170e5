"""Delayed Brownian motion ``B(L(t))`` with generator ``Laplacian``.

Its density is the subordination integral

    q(x, t) = ∫_0^∞ (4 pi s)^{-n/2} exp(-|x|^2 / 4s) l(s, t) ds,

available by quadrature against the inverse density or by inverting
``(E f / lam) G_n(|x|, E f)`` where ``G_n(r, k)`` is the resolvent kernel of
``k - Laplacian``.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DomainError, PreconditionError
from .operators import TimeGrid, apply_regularized, apply_rl, build_kernel
from .quadrature import gauss_legendre, log_panels
from .transforms import DensityGrid, InversionConfig, contour, inverse_cdf, renewal_function

#: tail probability of L(t) neglected by the quadrature route
TAIL_CUTOFF = 1e-11
#: small-lambda points used to estimate the index of regular variation
INDEX_LAMBDAS = (1e-4, 1e-5, 1e-6)
INDEX_SPREAD_TOL = 0.05
CONVERGED_SPREAD = 1e-3


def sphere_area(n):
    """Surface area of the unit sphere in ``R^n`` (2 for ``n = 1``)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass
class DiffusionField:
    """Radial profile ``q(r, t)`` in dimension ``n``."""

    r: np.ndarray
    n: int
    t: float
    q: np.ndarray
    params: dict = field(default_factory=dict)

    def mass(self):
        """``∫_{R^n} q dx`` by the trapezoid rule in ``r``."""
        return float(np.trapezoid(sphere_area(self.n) * self.r ** (self.n - 1) * self.q, self.r))

    def to_csv(self, path):
        DensityGrid(self.r, self.q, "q").to_csv(path)


@dataclass
class MsdCurve:
    """Mean-square displacement ``M(t) = 2 n U(t)`` and its asymptote."""

    t: np.ndarray
    values: np.ndarray
    asymptote: np.ndarray
    alpha: float
    n: int

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("t,msd,asymptote\n")
            for t, m, a in zip(self.t, self.values, self.asymptote):
                fh.write(f"{float(t)!r},{float(m)!r},{float(a)!r}\n")


@dataclass(frozen=True)
class IndexEstimate:
    """Index of regular variation of ``E f`` at ``0+``."""

    alpha: float
    spread: float
    raw: tuple

    @property
    def indeterminate(self):
        return self.spread > INDEX_SPREAD_TOL


# ---------------------------------------------------------------------------
# fundamental solution
# ---------------------------------------------------------------------------


def heat_kernel(r, s, n):
    r, s = np.asarray(r, float), np.asarray(s, float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = (4.0 * np.pi * s) ** (-n / 2.0) * np.exp(-(r * r) / (4.0 * s))
    return np.where(s > 0, out, 0.0)


def resolvent_kernel(r, kappa, n):
    """``∫_0^∞ heat_kernel(r, s, n) exp(-kappa s) ds`` for complex ``kappa``."""
    root = np.sqrt(kappa)
    if n == 1:
        return np.exp(-r * root) / (2.0 * root)
    if np.any(np.asarray(r) <= 0):
        raise DomainError("the density is singular at the origin for n >= 2; use r > 0")
    nu = n / 2.0 - 1.0
    return (2.0 * np.pi) ** (-n / 2.0) * (root / r) ** nu * special.kv(nu, r * root)


def _check_n(n):
    if int(n) != n or n < 1:
        raise DomainError("dimension n must be a positive integer")
    return int(n)


def _is_pure_drift(mixed):
    return mixed.levy_mass() == 0.0 and mixed.mixed_kill == 0.0


def _field_params(mixed, **extra):
    return {"family": mixed.family.name, "measure": mixed.measure.name, **extra}


def _transform_field(mixed, r, t, n, config):
    """``q(r_i, t_j)``, shape ``(len(r), len(t))``, by contour inversion."""
    z, w = contour(np.asarray(t, float), config)
    ef = mixed.f(z)
    scaled = w * ef / z
    r = np.asarray(r, float)
    out = np.empty((r.size, z.shape[0]))
    # bound the size of the complex temporaries
    step = max(1, 2_000_000 // z.size)
    for i in range(0, r.size, step):
        G = resolvent_kernel(r[i : i + step, None, None], ef[None], n)
        out[i : i + step] = np.imag(np.sum(scaled[None] * G, axis=-1))
    return out


def _tail_point(mixed, t, config):
    """An ``s`` with ``P(L(t) > s) < TAIL_CUTOFF``."""
    s = max(float(renewal_function(mixed, [t], config).values[0]), 1e-8)
    for _ in range(200):
        if 1.0 - inverse_cdf(mixed, [s], t, config)[0] < TAIL_CUTOFF:
            return s
        s *= 1.5
    raise PreconditionError(f"could not bound the support of L({t:g})")


def fundamental_solution(mixed, r_grid, t, n=1, config=None, method="quadrature", order=24):
    """Radial density ``q(r, t)`` of ``B(L(t))`` in ``R^n``.

    ``method="quadrature"`` integrates the heat kernel against ``l(s, t)``
    in ``u = sqrt(s)`` on graded Gauss-Legendre panels;
    ``method="transform"`` inverts the Laplace transform in ``t`` directly.
    """
    n = _check_n(n)
    if not t > 0:
        raise DomainError("t must be positive")
    r = np.atleast_1d(np.asarray(r_grid, float))
    if np.any(r < 0) or np.any(np.diff(r) <= 0):
        raise DomainError("r grid must be nonnegative and increasing")
    if n >= 2 and r[0] == 0:
        raise DomainError("the density is singular at the origin for n >= 2; use r > 0")
    params = _field_params(mixed, t=float(t), n=n, method=method)
    if _is_pure_drift(mixed):
        return DiffusionField(r, n, float(t), heat_kernel(r, t / mixed.mixed_drift, n), params)
    if method == "transform":
        q = _transform_field(mixed, r, [t], n, config)[:, 0]
    elif method == "quadrature":
        u_max = math.sqrt(_tail_point(mixed, t, config))
        u_lo = 1e-4 * u_max
        nodes, weights = log_panels(u_lo, u_max, panels=40, order=order)
        head_u, head_w = gauss_legendre(order, 0.0, u_lo)
        u = np.concatenate([head_u, nodes])
        wu = np.concatenate([head_w, weights])
        s = u * u
        l = _inverse_density_values(mixed, s, t, config)
        # ds = 2u du cancels the s^{-1/2} of the heat kernel for n = 1
        kern = heat_kernel(r[:, None], s[None], n)
        q = kern @ (2.0 * u * wu * l)
    else:
        raise ValueError(f"unknown method {method!r}")
    return DiffusionField(r, n, float(t), q, params)


def _inverse_density_values(mixed, s, t, config):
    """``l(s, t)`` by inversion of ``(E f / lam) exp(-s E f)`` (no activity
    precondition: atoms of ``L(t)`` cannot occur when ``sigma`` jumps)."""
    z, w = contour(np.array([t]), config)
    ef = mixed.f(z)[0]
    vals = (ef / z[0]) * np.exp(-np.asarray(s)[:, None] * ef)
    return np.imag(np.sum(w[0] * vals, axis=-1))


# ---------------------------------------------------------------------------
# mean-square displacement and asymptotics
# ---------------------------------------------------------------------------


def regular_variation_index(mixed, lambdas=INDEX_LAMBDAS):
    """Estimate ``alpha`` with ``E f(lam x) / E f(lam) -> x**alpha`` as ``lam -> 0``.

    Local exponents ``log2(E f(2 lam) / E f(lam))`` are extrapolated in
    ``x = 1 / |log lam|`` to ``x = 0`` by the interpolating quadratic
    (Richardson on three points); this removes the logarithmic drift of
    slowly varying exponents. The result is clipped to ``[0, 1]``; the
    spread of the raw local exponents flags slow convergence.
    """
    lam = np.asarray(lambdas, float)
    f1 = np.asarray(mixed.f(lam), float)
    f2 = np.asarray(mixed.f(2.0 * lam), float)
    local = np.log2(f2 / f1)
    x = 1.0 / np.abs(np.log(lam))
    spread = float(np.ptp(local))
    if spread < CONVERGED_SPREAD:
        # already converged; extrapolation would only amplify rounding
        alpha = float(local[-1])
    else:
        alpha = float(np.polyfit(x, local, len(x) - 1)[-1])
    alpha = float(np.clip(alpha, 0.0, 1.0))
    return IndexEstimate(alpha, spread, tuple(float(v) for v in local))


def msd(mixed, t_grid, n=1, config=None, alpha=None):
    """``M(t) = 2 n U(t)`` with asymptote ``1 / E f(1/t)``."""
    n = _check_n(n)
    t = np.atleast_1d(np.asarray(t_grid, float))
    U = renewal_function(mixed, t, config)
    if alpha is None:
        alpha = regular_variation_index(mixed).alpha
    asym = 1.0 / np.asarray(mixed.f(1.0 / t), float)
    return MsdCurve(t, 2.0 * n * U.values, asym, float(alpha), n)


def msd_asymptotic_ratio(mixed, t, n=1, config=None, alpha=None):
    """``Gamma(1 + alpha) M(t) / (2n)`` divided by ``1 / E f(1/t)``."""
    curve = msd(mixed, [t], n, config, alpha)
    return float(math.gamma(1.0 + curve.alpha) * curve.values[0] / (2.0 * n) / curve.asymptote[0])


def diffusivity_limit(mixed):
    """``lim t / M(t) * 2n = E b + ∫_0^∞ E nubar(s) ds``; ``inf`` if divergent."""
    return float(mixed.mixed_drift + mixed.kernel_integral())


# ---------------------------------------------------------------------------
# residuals of the governing equations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResidualReport:
    max_residual: float
    h: float
    dx: float
    t_window: tuple
    r_window: tuple


def _radial_laplacian(q, r, n):
    """Second-order central differences of ``q'' + (n - 1) q' / r`` on interior rows."""
    dr = r[1] - r[0]
    d2 = (q[2:] - 2.0 * q[1:-1] + q[:-2]) / dr**2
    d1 = (q[2:] - q[:-2]) / (2.0 * dr)
    return d2 + (n - 1) / r[1:-1, None] * d1


def _uniform(grid, what):
    d = np.diff(grid)
    if not np.allclose(d, d[0], rtol=1e-9, atol=0):
        raise DomainError(f"{what} grid must be uniform")
    return float(d[0])


def pde_residual(mixed, r_grid, t_end, h, n=1, t_window=None, config=None):
    """Max-norm of ``D_reg q - Laplacian q`` over interior points.

    ``q`` is tabulated on ``t = 0, h, ..., t_end`` (by contour inversion) and
    on the uniform radial grid ``r_grid``; the time operator uses
    :func:`apply_regularized`. Returns a :class:`ResidualReport` restricted to
    ``t_window`` (default: the second half of the time grid).
    """
    n = _check_n(n)
    r = np.asarray(r_grid, float)
    dx = _uniform(r, "radial")
    if r[0] <= 0:
        raise DomainError("radial grid must avoid the origin")
    grid = TimeGrid.covering(t_end, h)
    t = grid.points
    q = np.zeros((r.size, t.size))
    if _is_pure_drift(mixed):
        q[:, 1:] = heat_kernel(r[:, None], t[None, 1:] / mixed.mixed_drift, n)
    else:
        q[:, 1:] = _transform_field(mixed, r, t[1:], n, config)
    kernel = build_kernel(mixed, grid)
    dq = np.array([apply_regularized(row, kernel) for row in q[1:-1]])
    # backward differences sit at mid-steps: average the Laplacian to match
    lap = _radial_laplacian(q, r, n)
    lap_mid = 0.5 * (lap[:, 1:] + lap[:, :-1])
    resid = dq[:, 1:] - lap_mid
    tw = t_window or (0.5 * t_end, t_end)
    cols = (t[1:] >= tw[0]) & (t[1:] <= tw[1] + 1e-12)
    worst = float(np.max(np.abs(resid[:, cols])))
    return ResidualReport(worst, grid.h, dx, tuple(tw), (float(r[1]), float(r[-2])))


def inverse_density_residual(mixed, x_grid, t_end, h, t_window=None, config=None):
    """Max-norm of ``D l + d l / dx`` for the inverse density ``l(x, t)``."""
    x = np.asarray(x_grid, float)
    dx = _uniform(x, "x")
    if x[0] <= 0:
        raise DomainError("x grid must avoid the origin")
    grid = TimeGrid.covering(t_end, h)
    t = grid.points
    z, w = contour(t[1:], config)
    ef = mixed.f(z)
    scaled = w * ef / z
    l = np.zeros((x.size, t.size))
    step = max(1, 2_000_000 // z.size)
    for i in range(0, x.size, step):
        vals = np.exp(-x[i : i + step, None, None] * ef[None])
        l[i : i + step, 1:] = np.imag(np.sum(scaled[None] * vals, axis=-1))
    kernel = build_kernel(mixed, grid)
    dl = np.array([apply_rl(row, kernel) for row in l[1:-1]])
    dx_l = (l[2:] - l[:-2]) / (2.0 * dx)
    dx_mid = 0.5 * (dx_l[:, 1:] + dx_l[:, :-1])
    resid = dl[:, 1:] + dx_mid
    tw = t_window or (0.5 * t_end, t_end)
    cols = (t[1:] >= tw[0]) & (t[1:] <= tw[1] + 1e-12)
    worst = float(np.max(np.abs(resid[:, cols])))
    return ResidualReport(worst, grid.h, dx, tuple(tw), (float(x[1]), float(x[-2])))


def summary(mixed, t_max, n=1, config=None):
    """JSON-ready record: alpha, diffusivity limit and the MSD ratio at ``t_max``."""
    idx = regular_variation_index(mixed)
    return {
        "alpha": idx.alpha,
        "alpha_spread": idx.spread,
        "alpha_indeterminate": idx.indeterminate,
        "diffusivity_limit": diffusivity_limit(mixed),
        "t_max": float(t_max),
        "msd_ratio_at_t_max": msd_asymptotic_ratio(mixed, t_max, n, config, idx.alpha),
    }


def write_summary(record, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True, default=str)
