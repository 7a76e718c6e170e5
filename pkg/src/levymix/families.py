"""Parametrized Bernstein families ``y -> (a(y), b(y), nu(ds, y))``.

Every callable stored on a :class:`BernsteinFamily` is vectorized: ``s`` and
``y`` broadcast against each other with ordinary numpy rules, so the mixing
code evaluates a whole node set at once by passing ``s[..., None]`` and a 1-D
array of nodes.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import NumericError, ParameterError
from .quadrature import checked_halfline, integrate_halfline, _quad

_TINY = 1e-300


@dataclass(frozen=True)
class ParamDomain:
    """An interval of admissible parameters ``y``."""

    low: float = -math.inf
    high: float = math.inf
    low_open: bool = True
    high_open: bool = True

    def contains(self, y):
        y = np.asarray(y, dtype=float)
        lo = y > self.low if self.low_open else y >= self.low
        hi = y < self.high if self.high_open else y <= self.high
        return lo & hi

    def __str__(self):
        return "{}{}, {}{}".format(
            "(" if self.low_open else "[", self.low, self.high, ")" if self.high_open else "]"
        )


@dataclass(frozen=True)
class BernsteinFamily:
    """The triplet ``(a(y), b(y), nu(ds, y))`` with evaluators and a sampler.

    Only ``kill``, ``drift`` and ``levy_tail`` are mandatory; everything else
    has a quadrature or root-finding fallback.

    Attributes
    ----------
    kill, drift : callable ``y -> array``
        Killing rate a(y) and drift b(y).
    levy_tail : callable ``(s, y) -> array``
        ``nu((s, inf), y)``, the Lévy part only (no killing).
    levy_density : callable, optional
        ``nu(ds, y) / ds``.
    jump_sampler : callable ``(y, eps, rng, size) -> array``, optional
        Jumps of law ``nu(., y)`` conditioned on ``(eps, inf)``.
    integrated_tail : callable ``(s, y)``, optional
        ``∫_0^s nu((w, inf), y) dw``; finite whenever V(y) is.
    integrated_tail2 : callable ``(s, y)``, optional
        ``∫_0^s integrated_tail(w, y) dw``; used by product-trapezoid weights.
    exponent : callable ``(lam, y)``, optional
        Closed-form ``f(lam, y)``; must accept complex ``lam`` for the
        transform inversions to work.
    total_mass, mean_jump : callable ``y``, optional
        ``nu((0, inf), y)`` and ``∫ s nu(ds, y)`` (either may be ``inf``).
    eta : callable ``(t, y)``, optional
        Density of the Stieltjes representing measure (ME witness).
    """

    kill: object
    drift: object
    levy_tail: object
    levy_density: object = None
    jump_sampler: object = None
    integrated_tail: object = None
    integrated_tail2: object = None
    exponent: object = None
    total_mass: object = None
    mean_jump: object = None
    eta: object = None
    domain: ParamDomain = field(default_factory=ParamDomain)
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    # -- parameter handling -------------------------------------------------

    def check_param(self, y):
        y = np.asarray(y, dtype=float)
        if not np.all(self.domain.contains(y)):
            bad = y[~self.domain.contains(y)] if y.ndim else y
            raise ParameterError(
                f"parameter {np.ravel(bad)[:3]} outside domain {self.domain} of family {self.name!r}"
            )
        return y

    # -- evaluators ---------------------------------------------------------

    def f(self, lam, y):
        """Laplace exponent ``f(lam, y)``."""
        y = self.check_param(y)
        if self.exponent is not None:
            return self.exponent(lam, y)
        lam_arr = np.asarray(lam)
        if np.iscomplexobj(lam_arr):
            raise NumericError(
                f"family {self.name!r} has no closed-form exponent; complex arguments unsupported"
            )
        out = np.empty(np.broadcast(lam_arr, y).shape)
        for idx, (l, yy) in enumerate(np.broadcast(lam_arr, y)):
            out.flat[idx] = self._f_quadrature(float(l), float(yy))
        return out if out.ndim else float(out)

    def _f_quadrature(self, lam, y):
        # f = a + b lam + lam ∫_0^∞ e^{-lam s} nu((s, inf)) ds
        if lam <= 0:
            raise ValueError("lambda must be positive")
        integral = checked_halfline(
            lambda s: math.exp(-lam * s) * float(self.levy_tail(s, y)),
            "f(lambda, y)",
            split=min(1.0, 1.0 / lam),
        )
        return float(self.kill(y)) + float(self.drift(y)) * lam + lam * integral

    def nubar(self, s, y):
        """``a(y) + nu((s, inf), y)``."""
        return self.kill(y) + self.levy_tail(s, y)

    def cum_tail(self, s, y):
        """``∫_0^s nu((w, inf), y) dw`` (Lévy part only)."""
        if self.integrated_tail is not None:
            return self.integrated_tail(s, y)
        return self._vectorized_quad(lambda w, yy: float(self.levy_tail(w, yy)), s, y)

    def cum_tail2(self, s, y):
        """``∫_0^s cum_tail(w, y) dw``."""
        if self.integrated_tail2 is not None:
            return self.integrated_tail2(s, y)
        return self._vectorized_quad(lambda w, yy: float(self.cum_tail(w, yy)), s, y)

    @staticmethod
    def _vectorized_quad(g, s, y):
        s, y = np.broadcast_arrays(np.asarray(s, float), np.asarray(y, float))
        out = np.empty(s.shape)
        for idx in np.ndindex(s.shape):
            if s[idx] <= 0:
                out[idx] = 0.0
                continue
            val, _ = _quad(lambda w: g(w, y[idx]), 0.0, s[idx])
            out[idx] = val
        return out

    def mass(self, y):
        """``nu((0, inf), y)``; ``inf`` for infinite activity."""
        if self.total_mass is not None:
            return self.total_mass(y)
        m = np.asarray(self.levy_tail(1e-300, y), float)
        return np.where(m > 1e12, np.inf, m)

    def mean(self, y):
        """``∫ s nu(ds, y)``, possibly ``inf``."""
        if self.mean_jump is not None:
            return self.mean_jump(y)
        out = []
        for yy in np.atleast_1d(np.asarray(y, float)):
            val, err = integrate_halfline(lambda w: float(self.levy_tail(w, yy)))
            out.append(val if np.isfinite(val) and err < 1e-6 * max(1.0, abs(val)) else np.inf)
        out = np.array(out)
        return out if np.ndim(y) else float(out[0])

    def V(self, y):
        """``∫ (s ∧ 1) nu(ds, y)`` = ``∫_0^1 nu((w, inf), y) dw``."""
        return self.cum_tail(1.0, y)

    def sample_jumps(self, y, eps, rng, size):
        if size == 0:
            return np.empty(0)
        if self.jump_sampler is not None:
            return self.jump_sampler(y, eps, rng, size)
        return invert_tail_sampler(self.levy_tail, y, eps, rng, size)


def invert_tail_sampler(tail, y, eps, rng, size, iterations=64):
    """Sample ``nu(., y)`` restricted to ``(eps, inf)`` by inverting its tail.

    Solves ``tail(S) = U * tail(eps)`` by bisection in ``log S``; for step
    tails (atoms) this returns the generalized inverse.
    """
    target = rng.random(size) * float(tail(eps, y))
    lo = np.full(size, math.log(eps))
    step = 1.0
    hi = lo + step
    for _ in range(200):
        above = tail(np.exp(hi), y) > target
        if not np.any(above):
            break
        step *= 2.0
        hi = np.where(above, hi + step, hi)
    else:
        raise NumericError("could not bracket the jump-size quantile")
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        above = tail(np.exp(mid), y) > target
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return np.exp(hi)


# ---------------------------------------------------------------------------
# built-in families
# ---------------------------------------------------------------------------


def _zero(y):
    return np.zeros_like(np.asarray(y, dtype=float))


def stable(scale=1.0):
    """Stable family ``f(lam, y) = lam ** (scale * y)``, ``0 < scale * y < 1``."""
    scale = float(scale)
    if scale <= 0:
        raise ParameterError("stable scale must be positive")

    def idx(y):
        return scale * np.asarray(y, float)

    def exponent(lam, y):
        return np.power(lam, idx(y))

    def tail(s, y):
        b = idx(y)
        return np.power(s, -b) * special.rgamma(1.0 - b)

    def density(s, y):
        b = idx(y)
        return b * np.power(s, -b - 1.0) * special.rgamma(1.0 - b)

    def integrated(s, y):
        b = idx(y)
        return np.power(s, 1.0 - b) * special.rgamma(2.0 - b)

    def integrated2(s, y):
        b = idx(y)
        return np.power(s, 2.0 - b) * special.rgamma(3.0 - b)

    def sampler(y, eps, rng, size):
        b = float(idx(y))
        # Pareto(b) above eps; tiny b overflows to inf, which callers cap
        with np.errstate(over="ignore"):
            return eps * np.power(1.0 - rng.random(size), -1.0 / b)

    def eta(t, y):
        b = idx(y)
        return np.sin(np.pi * b) / np.pi * np.power(t, b)

    def inf_(y):
        return np.full_like(np.asarray(y, float), np.inf)

    return BernsteinFamily(
        kill=_zero,
        drift=_zero,
        levy_tail=tail,
        levy_density=density,
        jump_sampler=sampler,
        integrated_tail=integrated,
        integrated_tail2=integrated2,
        exponent=exponent,
        total_mass=inf_,
        mean_jump=inf_,
        eta=eta,
        domain=ParamDomain(0.0, 1.0 / scale),
        name="stable",
        params={"scale": scale},
    )


def _xm1(v):
    """``v + expm1(-v)`` without cancellation for small ``v``."""
    v = np.asarray(v, float)
    small = v < 1e-2
    vs = np.where(small, v, 0.0)
    series = vs**2 / 2 - vs**3 / 6 + vs**4 / 24 - vs**5 / 120 + vs**6 / 720
    return np.where(small, series, v + np.expm1(-np.where(small, 1.0, v)))


def gamma(rate=1.0):
    """Gamma family ``f(lam, y) = rate * log(1 + lam / y)``, ``y > 0``.

    Lévy density ``rate * exp(-y s) / s``.
    """
    c = float(rate)
    if c <= 0:
        raise ParameterError("gamma rate must be positive")

    def exponent(lam, y):
        return c * np.log1p(lam / y)

    def tail(s, y):
        return c * special.exp1(s * y)

    def density(s, y):
        return c * np.exp(-s * y) / s

    def integrated(s, y):
        y = np.asarray(y, float)
        v = np.asarray(s * y, float)
        with np.errstate(invalid="ignore"):
            g = np.where(v > 0, v * special.exp1(v), 0.0) - np.expm1(-v)
        return c * g / y

    def integrated2(s, y):
        y = np.asarray(y, float)
        v = np.asarray(s * y, float)
        with np.errstate(invalid="ignore"):
            e = np.where(v > 0, v * v * special.exp1(v), 0.0)
        g = 0.5 * e + 0.5 * v * (-np.expm1(-v)) + 0.5 * _xm1(v)
        return c * g / (y * y)

    def mean(y):
        return c / np.asarray(y, float)

    def inf_(y):
        return np.full_like(np.asarray(y, float), np.inf)

    def eta(t, y):
        return c * (np.asarray(t) >= y).astype(float)

    return BernsteinFamily(
        kill=_zero,
        drift=_zero,
        levy_tail=tail,
        levy_density=density,
        integrated_tail=integrated,
        integrated_tail2=integrated2,
        exponent=exponent,
        total_mass=inf_,
        mean_jump=mean,
        eta=eta,
        domain=ParamDomain(0.0, math.inf),
        name="gamma",
        params={"rate": c},
    )


def drift():
    """Pure drift ``f(lam, y) = y * lam``, ``y >= 0``."""

    def exponent(lam, y):
        return np.asarray(y, float) * lam

    def zero2(s, y):
        return np.zeros(np.broadcast(np.asarray(s), np.asarray(y)).shape)

    return BernsteinFamily(
        kill=_zero,
        drift=lambda y: np.asarray(y, float),
        levy_tail=zero2,
        levy_density=zero2,
        jump_sampler=lambda y, eps, rng, size: np.empty(0),
        integrated_tail=zero2,
        integrated_tail2=zero2,
        exponent=exponent,
        total_mass=_zero,
        mean_jump=_zero,
        domain=ParamDomain(0.0, math.inf, low_open=False),
        name="drift",
        params={},
    )


def killed(base, rate):
    """``base`` with an extra constant killing rate."""
    rate = float(rate)
    if rate < 0:
        raise ParameterError("killing rate must be nonnegative")
    exponent = None
    if base.exponent is not None:
        def exponent(lam, y):
            return rate + base.exponent(lam, y)

    return BernsteinFamily(
        kill=lambda y: rate + base.kill(y),
        drift=base.drift,
        levy_tail=base.levy_tail,
        levy_density=base.levy_density,
        jump_sampler=base.jump_sampler,
        integrated_tail=base.integrated_tail,
        integrated_tail2=base.integrated_tail2,
        exponent=exponent,
        total_mass=base.total_mass,
        mean_jump=base.mean_jump,
        eta=base.eta,
        domain=base.domain,
        name=f"killed({base.name})",
        params={"rate": rate, "base": base.params},
    )


def compound_poisson(jump="unit", size=1.0):
    """Compound Poisson family with jump rate ``y``.

    ``jump="unit"`` puts every jump at ``size``; ``jump="exponential"`` draws
    exponential jumps with mean ``size``.
    """
    m = float(size)
    if m <= 0:
        raise ParameterError("jump size must be positive")
    yv = lambda y: np.asarray(y, float)  # noqa: E731

    if jump == "unit":
        def tail(s, y):
            return yv(y) * (np.asarray(s) < m)

        def integrated(s, y):
            return yv(y) * np.minimum(s, m)

        def integrated2(s, y):
            s = np.asarray(s, float)
            return yv(y) * np.where(s < m, 0.5 * s * s, 0.5 * m * m + m * (s - m))

        def exponent(lam, y):
            return yv(y) * (-np.expm1(-lam * m))

        def sampler(y, eps, rng, n):
            return np.full(n, m) if eps < m else np.empty(0)

        density = None
    elif jump == "exponential":
        def tail(s, y):
            return yv(y) * np.exp(-np.asarray(s) / m)

        def density(s, y):
            return yv(y) / m * np.exp(-np.asarray(s) / m)

        def integrated(s, y):
            return yv(y) * m * (-np.expm1(-np.asarray(s) / m))

        def integrated2(s, y):
            s = np.asarray(s, float)
            return yv(y) * m * m * _xm1(s / m)

        def exponent(lam, y):
            return yv(y) * lam * m / (1.0 + lam * m)

        def sampler(y, eps, rng, n):
            return eps + rng.exponential(m, n)
    else:
        raise ParameterError(f"unknown compound-Poisson jump law {jump!r}")

    return BernsteinFamily(
        kill=_zero,
        drift=_zero,
        levy_tail=tail,
        levy_density=density,
        jump_sampler=sampler,
        integrated_tail=integrated,
        integrated_tail2=integrated2,
        exponent=exponent,
        total_mass=yv,
        mean_jump=lambda y: yv(y) * m,
        domain=ParamDomain(0.0, math.inf, low_open=False),
        name="compound-poisson",
        params={"jump": jump, "size": m},
    )


def tabulated(s_points, tail_values):
    """Family with Lévy tail ``y * T(s)``, ``T`` given on a grid.

    ``T`` is interpolated log-log and extrapolated as a power law from the
    outermost segments, so the slope of the last segment must be negative.
    """
    s_points = np.asarray(s_points, float)
    values = np.asarray(tail_values, float)
    if s_points.ndim != 1 or s_points.size < 2 or np.any(np.diff(s_points) <= 0):
        raise ParameterError("tabulated tail needs an increasing grid of >= 2 points")
    if np.any(values <= 0) or np.any(np.diff(values) > 0):
        raise ParameterError("tabulated tail values must be positive and nonincreasing")
    ls, lv = np.log(s_points), np.log(values)
    slope_lo = (lv[1] - lv[0]) / (ls[1] - ls[0])
    slope_hi = (lv[-1] - lv[-2]) / (ls[-1] - ls[-2])
    if slope_hi >= 0:
        raise ParameterError("tabulated tail must decay beyond its last grid point")
    if slope_lo <= -1:
        raise ParameterError("tabulated tail violates integrability at 0 (slope <= -1)")

    def T(s):
        x = np.log(np.maximum(np.asarray(s, float), _TINY))
        inner = np.interp(x, ls, lv)
        out = np.where(x < ls[0], lv[0] + slope_lo * (x - ls[0]), inner)
        out = np.where(x > ls[-1], lv[-1] + slope_hi * (x - ls[-1]), out)
        return np.exp(out)

    def tail(s, y):
        return np.asarray(y, float) * T(s)

    return BernsteinFamily(
        kill=_zero,
        drift=_zero,
        levy_tail=tail,
        domain=ParamDomain(0.0, math.inf, low_open=False),
        name="custom-tabulated",
        params={"s": s_points.tolist(), "tail": values.tolist()},
    )


REGISTRY = {
    "stable": stable,
    "gamma": gamma,
    "drift": drift,
    "killed": killed,
    "compound-poisson": compound_poisson,
    "custom-tabulated": tabulated,
}
