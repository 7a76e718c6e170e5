"""Numerical Laplace inversion and the densities of sigma, its inverse, and U.

Conventions: ``mu(t, x)`` is the density *in real time t* of ``sigma(x)``;
``l(x, t)`` is the density in ``x`` of the inverse ``L(t)``.
"""

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericError, PreconditionError

NEGATIVE_TOL = 1e-9

# cotangent contour of Weideman & Trefethen (2007), Talbot family
_C_SHIFT, _C_COT, _C_ALPHA, _C_IMAG = -0.6122, 0.5017, 0.6407, 0.2645


@dataclass(frozen=True)
class InversionConfig:
    """Fixed-contour inversion settings.

    ``node_count`` is the number of quadrature points on the full contour
    (only half are evaluated, by conjugate symmetry); ``scale`` stretches the
    contour away from the origin.
    """

    node_count: int = 32
    scale: float = 1.0

    def __post_init__(self):
        if self.node_count < 8 or self.node_count % 2:
            raise ValueError("node_count must be an even integer >= 8")
        if not self.scale > 0:
            raise ValueError("scale must be positive")


def contour(t, config=None):
    """Contour points ``z`` and weights ``w`` so that
    ``f(t) ≈ Im(sum(w * F(z), axis=-1))``."""
    cfg = config or InversionConfig()
    t = np.asarray(t, float)
    if np.any(t <= 0) or not np.all(np.isfinite(t)):
        raise DomainError("inversion points must be positive and finite")
    n = cfg.node_count
    theta = (np.arange(n // 2) + 0.5) * (2.0 * np.pi / n)
    at = _C_ALPHA * theta
    cot = 1.0 / np.tan(at)
    shape = _C_COT * theta * cot + _C_SHIFT + 1j * _C_IMAG * theta
    dshape = _C_COT * cot - _C_COT * at / np.sin(at) ** 2 + 1j * _C_IMAG
    mu = cfg.scale * n / t[..., None]
    z = mu * shape
    w = (2.0 / n) * np.exp(z * t[..., None]) * mu * dshape
    return z, w


def invert_laplace(F, t, config=None):
    """Inverse Laplace transform of ``F`` at ``t > 0``.

    ``F`` is called once with a complex array of contour points and must be
    analytic off the negative real axis with ``F(conj z) = conj F(z)``.
    """
    z, w = contour(t, config)
    vals = np.asarray(F(z))
    if not np.all(np.isfinite(vals)):
        raise NumericError("transform is not finite on the inversion contour")
    out = np.imag(np.sum(w * vals, axis=-1))
    return out if out.ndim else float(out)


@dataclass
class DensityGrid:
    """A tabulated function on a 1-D grid."""

    points: np.ndarray
    values: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)
    clipped: int = 0

    KINDS = ("mu", "l", "U", "q", "kernel")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown density kind {self.kind!r}")
        self.points = np.asarray(self.points, float)
        self.values = np.asarray(self.values, float)
        if self.points.shape != self.values.shape:
            raise ValueError("points and values differ in shape")
        if np.any(np.diff(self.points) <= 0):
            raise ValueError("grid points must increase")

    def mass(self):
        return float(np.trapezoid(self.values, self.points))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("point,value\n")
            for p, v in zip(self.points, self.values):
                fh.write(f"{float(p)!r},{float(v)!r}\n")

    def metadata(self):
        return {"kind": self.kind, "n_points": int(self.points.size), "clipped": self.clipped, **self.params}

    def write(self, path_stem):
        """CSV plus JSON sidecar ``<stem>.csv`` / ``<stem>.json``."""
        self.to_csv(f"{path_stem}.csv")
        with open(f"{path_stem}.json", "w", encoding="utf-8") as fh:
            json.dump(self.metadata(), fh, indent=2, sort_keys=True)


#: relative rounding of one term in the contour sum
CANCELLATION_EPS = 1e-16
#: a density value is unresolved when its rounding exceeds this absolutely
UNRESOLVED_TOL = 1e-8
#: ... or relative to the value itself
UNRESOLVED_REL = 1e-6


def _clip(values, what):
    with np.errstate(invalid="ignore"):
        bad = int(np.sum(values < -NEGATIVE_TOL))
    if bad:
        warnings.warn(f"{bad} values of {what} below -{NEGATIVE_TOL:g} clipped (inversion ringing)")
    return np.maximum(values, 0.0), bad


def _require_density(mixed):
    if not math.isinf(mixed.levy_mass()):
        raise PreconditionError(
            "the subordinator needs infinite activity (E nu((0, inf), Y) = inf) to have a density"
        )


def _params(mixed, **extra):
    return {
        "family": mixed.family.name,
        "family_params": mixed.family.params,
        "measure": mixed.measure.name,
        "measure_params": mixed.measure.params,
        **extra,
    }


def _density_matrix(mixed, x, s, config, cdf=False):
    # cdf=True inverts exp(-x E f) / lam, the distribution function of sigma(x)
    x = np.atleast_1d(np.asarray(x, float))
    s = np.atleast_1d(np.asarray(s, float))
    z, w = contour(s, config)
    ef = mixed.f(z)
    if cdf:
        w = w / z
    # weight and exponential combined in the log so 0 * overflow cannot occur
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        vals = np.exp(np.log(w.astype(complex))[None] - x[:, None, None] * ef[None])
        out = np.imag(np.sum(vals, axis=-1))
        # rounding in the sum; when it swamps the result the point is unresolved
        noise = CANCELLATION_EPS * np.sum(np.abs(vals), axis=-1)
        # the last node is the end of the truncated contour; the integrand must have decayed there
        noise = np.maximum(noise, np.abs(vals[..., -1]))
    bad = ~np.isfinite(out) | ~(noise < np.maximum(UNRESOLVED_TOL, UNRESOLVED_REL * np.abs(out)))
    return np.where(bad, np.nan, out), bad


def sigma_density_matrix(mixed, x, s, config=None):
    """``mu(s_j, x_i)`` for all pairs; shape ``(len(x), len(s))``.

    The mixed exponent is evaluated once per contour point and shared across
    all ``x``. Points where the contour sum is dominated by rounding (very
    small ``s`` for exponents growing faster than ``sqrt``) are nan.
    """
    out, bad = _density_matrix(mixed, x, s, config)
    if np.any(bad):
        warnings.warn(f"{int(bad.sum())} density values unresolved by the contour (set to nan)")
    return out


def _first_resolved(bad):
    """Index of the first resolved value in each row; only a leading run may be unresolved."""
    first = np.argmin(bad, axis=1)
    for row, k in zip(bad, first):
        if row.all() or row[k:].any():
            raise NumericError("density unresolved away from the origin; refine the inversion config")
    return first


def subordinator_density(mixed, x, t_grid, config=None):
    """Density in real time of ``sigma(x)`` on ``t_grid``."""
    _require_density(mixed)
    if not x > 0:
        raise DomainError("x must be positive")
    t_grid = np.asarray(t_grid, float)
    values = sigma_density_matrix(mixed, [x], t_grid, config)[0]
    values, bad = _clip(values, "mu")
    return DensityGrid(t_grid, values, "mu", _params(mixed, x=float(x)), bad)


def convolution_grid(t, points=300, depth=12):
    """Grid on ``[0, t]`` graded geometrically towards both endpoints."""
    half = np.geomspace(t * 10.0**-depth, 0.5 * t, points)
    return np.unique(np.concatenate([[0.0], half, t - half[::-1], [t]]))


def product_trapezoid_weights(mixed, s, t):
    """Weights ``(left, right)`` such that
    ``∫_0^t g(s) K(t - s) ds ≈ Σ left_i g(s_i) + right_i g(s_{i+1})`` for g
    linear on each cell, with the kernel integrated exactly."""
    w_hi = t - s[:-1]
    w_lo = np.maximum(t - s[1:], 0.0)
    i_hi, i_lo = mixed.cum_kernel(w_hi), mixed.cum_kernel(w_lo)
    a = i_hi - i_lo
    delta = s[1:] - s[:-1]
    b = mixed.cum_kernel2(w_hi) - mixed.cum_kernel2(w_lo) - delta * i_lo
    b = np.clip(b, 0.0, a * delta)
    return a - b / delta, b / delta


def _inverse_density_convolution(mixed, x, t, config, points):
    s = convolution_grid(t, points)
    mid = int(np.searchsorted(s, 0.5 * t))
    # [0, t/2]: mu may be singular at 0 but the kernel is smooth, so cells are
    # weighted by their exact sigma(x) mass and the kernel is averaged
    lo = s[: mid + 1]
    cdf, bad = _density_matrix(mixed, x, lo[1:], config, cdf=True)
    k = mixed.tail(t - lo)
    k_cell = 0.5 * (k[:-1] + k[1:])
    values = np.empty(x.size)
    # the mass below the first resolved point is lumped into one cell from 0
    for i, j in enumerate(_first_resolved(bad)):
        head = cdf[i, j] * 0.5 * (k[0] + k[j + 1])
        values[i] = head + np.diff(cdf[i, j:]) @ k_cell[j + 1 :]
    # [t/2, t]: the kernel is singular at t and mu smooth, so product integration
    hi = s[mid:]
    mu, bad = _density_matrix(mixed, x, hi, config)
    if np.any(bad):
        raise NumericError("density unresolved on [t/2, t]; refine the inversion config")
    left, right = product_trapezoid_weights(mixed, hi, t)
    values = values + mu[:, :-1] @ left + mu[:, 1:] @ right
    if mixed.mixed_drift > 0:
        values = values + mixed.mixed_drift * mu[:, -1]
    return values


def inverse_density(mixed, x_grid, t, config=None, method="convolution", points=1000):
    """Density ``l(x, t)`` of ``L(t)`` on ``x_grid``.

    ``method="convolution"`` evaluates
    ``E b mu(t, x) + ∫_0^t mu(s, x) E nubar(t - s) ds``, using the law of
    ``sigma(x)`` on ``[0, t/2]`` and product integration of the kernel on
    ``[t/2, t]``; ``method="transform"`` inverts
    ``(E f / lam) exp(-x E f)`` directly.
    """
    _require_density(mixed)
    if not t > 0:
        raise DomainError("t must be positive")
    x = np.asarray(x_grid, float)
    if np.any(x <= 0):
        raise DomainError("x grid must be positive")
    if method == "convolution":
        values = _inverse_density_convolution(mixed, x, t, config, points)
    elif method == "transform":
        def F(z):
            ef = mixed.f(z)
            return (ef / z) * np.exp(-x[:, None, None] * ef)

        z, w = contour(np.array([t]), config)
        values = np.imag(np.sum(w * F(z)[:, 0, :], axis=-1))
    else:
        raise ValueError(f"unknown method {method!r}")
    values, bad = _clip(values, "l")
    return DensityGrid(x, values, "l", _params(mixed, t=float(t), method=method), bad)


def inverse_cdf(mixed, x_grid, t, config=None):
    """``P(L(t) <= x) = 1 - P(sigma(x) < t)`` by inverting ``exp(-x E f) / lam``."""
    x = np.asarray(x_grid, float)
    z, w = contour(np.array([t]), config)
    ef = mixed.f(z)
    vals = np.exp(-x[:, None, None] * ef) / z
    below = np.imag(np.sum(w * vals[:, 0, :], axis=-1))
    return np.clip(1.0 - below, 0.0, 1.0)


def renewal_function(mixed, t_grid, config=None):
    """``U(t) = E L(t)``, inverse transform of ``1 / (lam E f(lam))``."""
    t_grid = np.atleast_1d(np.asarray(t_grid, float))
    values = invert_laplace(lambda z: 1.0 / (z * mixed.f(z)), t_grid, config)
    values = np.atleast_1d(values)
    values, bad = _clip(values, "U")
    grid = DensityGrid(t_grid, values, "U", _params(mixed), bad)
    if np.any(np.diff(values) < -1e-9 * np.max(np.abs(values))):
        raise NumericError("renewal function is not monotone; inversion inaccurate")
    return grid
