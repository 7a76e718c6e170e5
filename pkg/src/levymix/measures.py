"""Probability measures ``p`` on the parameter space, discretized once.

A measure is a list of atoms plus continuous parts. Each continuous part is
replaced at construction by Gauss-Legendre nodes, either affinely mapped onto
a finite support or pushed through a quantile function (needed for
unbounded supports such as the Pareto law).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .quadrature import gauss_legendre, integrate_to_endpoints

DEFAULT_NODES = 64
#: nodes are kept at least this far from the endpoints of a part
ENDPOINT_CLIP = 1e-6
MASS_TOL = 1e-10


@dataclass(frozen=True)
class ContinuousPart:
    """Absolutely continuous piece ``g(y) dy`` on ``[low, high]``.

    If ``quantile`` is given, the part is parametrized by ``u`` in ``(0, 1)``
    via ``y = quantile(u)`` and carries total mass ``mass``; ``density`` is
    then informational only.
    """

    density: object
    low: float
    high: float
    nodes: int = DEFAULT_NODES
    quantile: object = None
    mass: float = 1.0

    def discretize(self):
        if self.quantile is not None:
            u, w = gauss_legendre(self.nodes, 0.0, 1.0)
            u = np.clip(u, ENDPOINT_CLIP, 1.0 - ENDPOINT_CLIP)
            return np.asarray(self.quantile(u), float), self.mass * w
        y, w = gauss_legendre(self.nodes, self.low, self.high)
        width = self.high - self.low
        y = np.clip(y, self.low + ENDPOINT_CLIP * width, self.high - ENDPOINT_CLIP * width)
        return y, w * np.asarray(self.density(y), float)

    def expectation(self, fn):
        """``∫ fn(y) p(dy)`` over this part, with endpoint-divergence detection."""
        if self.quantile is not None:
            val, div = integrate_to_endpoints(lambda u: float(fn(self.quantile(u))), 0.0, 1.0)
            return self.mass * val, div
        return integrate_to_endpoints(
            lambda y: float(self.density(y)) * float(fn(y)), self.low, self.high
        )


@dataclass(frozen=True)
class MixingMeasure:
    """Probability measure: atoms ``(y_i, w_i)`` plus continuous parts."""

    atoms: tuple = ()
    continuous_parts: tuple = ()
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)
    ys: np.ndarray = field(init=False, repr=False, compare=False)
    ws: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ys, ws = [], []
        for y, w in self.atoms:
            if not w > 0:
                raise ParameterError("atom weights must be positive")
            ys.append(np.array([float(y)]))
            ws.append(np.array([float(w)]))
        for part in self.continuous_parts:
            y, w = part.discretize()
            ys.append(y)
            ws.append(w)
        if not ys:
            raise ParameterError("a mixing measure needs at least one atom or part")
        y = np.concatenate(ys)
        w = np.concatenate(ws)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ParameterError("negative or non-finite quadrature weight")
        order = np.argsort(y, kind="stable")
        object.__setattr__(self, "ys", y[order])
        object.__setattr__(self, "ws", w[order])
        total = self.total_mass()
        if abs(total - 1.0) > MASS_TOL:
            raise ParameterError(f"mixing measure has mass {total!r}, expected 1")

    def total_mass(self):
        return float(np.sum(self.ws))

    @property
    def nodes(self):
        """List of ``(y_j, omega_j)``, sorted by ``y``."""
        return list(zip(self.ys.tolist(), self.ws.tolist()))

    def expectation(self, fn):
        """``E fn(Y)`` computed from atoms and adaptive part quadrature.

        Unlike the node sum this detects divergence; returns ``(value, diverged)``.
        """
        total, diverged = 0.0, False
        for y, w in self.atoms:
            v = float(fn(y))
            total += w * v
            diverged |= not np.isfinite(v)
        for part in self.continuous_parts:
            v, d = part.expectation(fn)
            total += v
            diverged |= d
        if diverged:
            return math.inf, True
        return total, False


def dirac(y):
    return MixingMeasure(atoms=((float(y), 1.0),), name="dirac", params={"y": float(y)})


def atoms(points, weights=None):
    points = [float(p) for p in points]
    if weights is None:
        weights = [1.0 / len(points)] * len(points)
    weights = [float(w) for w in weights]
    if len(weights) != len(points):
        raise ParameterError("atoms: points and weights differ in length")
    s = sum(weights)
    if abs(s - 1.0) > MASS_TOL:
        raise ParameterError(f"atom weights sum to {s}, expected 1")
    return MixingMeasure(
        atoms=tuple(zip(points, weights)),
        name="atoms",
        params={"points": points, "weights": weights},
    )


def uniform(low, high, nodes=DEFAULT_NODES):
    low, high = float(low), float(high)
    if not high > low:
        raise ParameterError("uniform measure needs low < high")
    dens = 1.0 / (high - low)
    part = ContinuousPart(lambda y: np.full_like(np.asarray(y, float), dens), low, high, nodes)
    return MixingMeasure(
        continuous_parts=(part,),
        name="uniform",
        params={"low": low, "high": high, "nodes": nodes},
    )


def pareto(scale, shape, nodes=DEFAULT_NODES):
    """``p(dy) = shape * scale**shape * y**(-shape-1) dy`` on ``[scale, inf)``."""
    g, b = float(scale), float(shape)
    if g <= 0 or b <= 0:
        raise ParameterError("pareto needs positive scale and shape")

    def density(y):
        y = np.asarray(y, float)
        return np.where(y >= g, b * g**b * y ** (-b - 1.0), 0.0)

    def quantile(u):
        return g * np.power(1.0 - np.asarray(u, float), -1.0 / b)

    part = ContinuousPart(density, g, math.inf, nodes, quantile=quantile)
    return MixingMeasure(
        continuous_parts=(part,),
        name="pareto",
        params={"scale": g, "shape": b, "nodes": nodes},
    )


def tabulated(y_points, density_values, nodes=DEFAULT_NODES):
    """Density given on a grid, linearly interpolated and renormalized."""
    yp = np.asarray(y_points, float)
    dv = np.asarray(density_values, float)
    if yp.ndim != 1 or yp.size < 2 or np.any(np.diff(yp) <= 0) or np.any(dv < 0):
        raise ParameterError("tabulated measure needs an increasing grid and nonnegative density")
    # exact mass of the piecewise-linear interpolant
    mass = float(np.sum(0.5 * (dv[1:] + dv[:-1]) * np.diff(yp)))
    if mass <= 0:
        raise ParameterError("tabulated density has zero mass")
    knots = yp
    pieces = []
    for a, b in zip(knots[:-1], knots[1:]):
        # one part per interval keeps Gauss-Legendre exact on the linear pieces
        pieces.append(
            ContinuousPart(
                lambda y: np.interp(y, yp, dv) / mass, float(a), float(b), max(2, nodes // (yp.size - 1))
            )
        )
    return MixingMeasure(
        continuous_parts=tuple(pieces),
        name="tabulated",
        params={"y": yp.tolist(), "density": dv.tolist(), "nodes": nodes},
    )


REGISTRY = {
    "dirac": dirac,
    "atoms": atoms,
    "uniform": uniform,
    "pareto": pareto,
    "tabulated": tabulated,
}
