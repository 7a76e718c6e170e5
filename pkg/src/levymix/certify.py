"""Finite-order instance checks of the function classes.

A certificate evaluates a *witness* on a log-spaced grid and checks the sign
pattern of its divided differences:

==========  =========================  ==================================
kind        witness                    required pattern
==========  =========================  ==================================
``CBF``     Lévy density ``m(s)``       completely monotone
``TBF``     ``s * m(s)``                completely monotone
``SBF``     ``lam / f(lam)``            Bernstein (>= 0, derivative CM)
``BF``      ``f(lam)``                  Bernstein
``ME``      ``eta(t)``                  ``0 <= eta <= 1``, ``∫_0^1 eta/t`` finite
==========  =========================  ==================================

Passing is evidence up to the checked order on the grid, not a proof.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .quadrature import integrate_to_endpoints

KINDS = ("CBF", "SBF", "TBF", "ME", "BF")
DEFAULT_ORDER = 4
DEFAULT_POINTS = 64
#: violations smaller than this, relative to the local scale, are ignored
SIGN_TOL = 1e-7
#: violations up to this many times SIGN_TOL are reported inconclusive
NOISE_FACTOR = 100.0


def log_grid(low=1e-2, high=1e2, points=DEFAULT_POINTS):
    return np.geomspace(low, high, points)


@dataclass(frozen=True)
class ClassCertificate:
    """A witness function and the grid on which its class pattern is checked."""

    kind: str
    witness: object
    grid: np.ndarray = field(default_factory=log_grid)
    order: int = DEFAULT_ORDER
    label: str = ""
    #: ME only: also require ``∫_0^1 eta(t)/t dt < inf`` (off gives the bare range check)
    require_integrable: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown certificate kind {self.kind!r}; expected one of {KINDS}")
        if self.order < 1:
            raise ValueError("order must be >= 1")


@dataclass(frozen=True)
class CertificateReport:
    kind: str
    verdict: str  # "pass", "fail" or "inconclusive"
    failing_order: int
    worst: float
    order: int
    label: str = ""
    reason: str = ""

    @property
    def passed(self):
        return self.verdict == "pass"

    def as_dict(self):
        return {
            "kind": self.kind,
            "label": self.label,
            "verdict": self.verdict,
            "failing_order": self.failing_order,
            "worst_normalized_violation": self.worst,
            "orders_checked": self.order,
            "reason": self.reason,
        }


def normalized_differences(x, v, k):
    """``k``-th divided differences scaled by ``width**k / max|v|`` over each
    stencil, so a value of ``-1e-7`` means a violation at relative size 1e-7."""
    x = np.asarray(x, float)
    d = np.asarray(v, float).copy()
    for j in range(1, k + 1):
        d = (d[1:] - d[:-1]) / (x[j:] - x[:-j])
    width = x[k:] - x[:-k]
    windows = np.lib.stride_tricks.sliding_window_view(np.abs(v), k + 1)
    scale = np.max(windows, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = d * width**k / scale
    return np.where(scale > 0, out, 0.0)


def _sign_check(x, v, orders, sign_of):
    """Return (failing_order or None, worst, noisy) for the pattern
    ``sign_of(k) * D^k v >= 0`` for ``k`` in ``orders``."""
    worst = math.inf
    noisy = False
    for k in orders:
        if k == 0:
            d = np.asarray(v, float) / max(np.max(np.abs(v)), 1e-300)
        else:
            d = normalized_differences(x, v, k)
        signed = sign_of(k) * d
        m = float(np.min(signed)) if signed.size else 0.0
        worst = min(worst, m)
        if m < -NOISE_FACTOR * SIGN_TOL:
            return k, worst, noisy
        if m < -SIGN_TOL:
            noisy = True
    return None, worst, noisy


def class_check(cert):
    """Verdict on ``cert``; ``inconclusive`` when the grid cannot resolve it."""
    x = np.asarray(cert.grid, float)
    if x.ndim != 1 or x.size < cert.order + 2 or np.any(np.diff(x) <= 0) or x[0] <= 0:
        return CertificateReport(cert.kind, "inconclusive", 0, math.nan, cert.order, cert.label,
                                 "grid must be positive, increasing and longer than order + 1")
    with np.errstate(all="ignore"):
        v = np.asarray(cert.witness(x), float)
    if v.shape != x.shape or not np.all(np.isfinite(v)):
        return CertificateReport(cert.kind, "inconclusive", 0, math.nan, cert.order, cert.label,
                                 "witness not finite on the grid")

    if cert.kind == "ME":
        return _me_check(cert, x, v)
    if cert.kind in ("CBF", "TBF"):
        orders = range(0, cert.order + 1)
        sign_of = lambda k: (-1.0) ** k  # noqa: E731
    else:  # SBF, BF: v >= 0 and (-1)^(k-1) D^k v >= 0
        orders = range(0, cert.order + 1)
        sign_of = lambda k: 1.0 if k == 0 else (-1.0) ** (k - 1)  # noqa: E731
    k, worst, noisy = _sign_check(x, v, orders, sign_of)
    if k is not None:
        return CertificateReport(cert.kind, "fail", k, worst, cert.order, cert.label,
                                 f"sign pattern violated at order {k}")
    if noisy:
        return CertificateReport(cert.kind, "inconclusive", 0, worst, cert.order, cert.label,
                                 "violations at the resolution limit; refine the grid")
    return CertificateReport(cert.kind, "pass", 0, worst, cert.order, cert.label)


def _me_check(cert, x, v):
    lo, hi = float(np.min(v)), float(np.max(v))
    if lo < -SIGN_TOL or hi > 1.0 + SIGN_TOL:
        return CertificateReport("ME", "fail", 0, min(lo, 1.0 - hi), cert.order, cert.label,
                                 f"eta leaves [0, 1] on the grid (range [{lo:.3g}, {hi:.3g}])")
    if not cert.require_integrable:
        return CertificateReport("ME", "pass", 0, min(lo, 1.0 - hi), cert.order, cert.label)
    _, diverged = integrate_to_endpoints(lambda t: float(cert.witness(np.array(t))) / t, 0.0, 1.0)
    if diverged:
        return CertificateReport("ME", "fail", 0, math.inf, cert.order, cert.label,
                                 "∫_0^1 eta(t)/t dt diverges")
    return CertificateReport("ME", "pass", 0, min(lo, 1.0 - hi), cert.order, cert.label)


# ---------------------------------------------------------------------------
# witnesses for families and mixtures
# ---------------------------------------------------------------------------


def _density(family):
    if family.levy_density is None:
        raise PreconditionError(f"family {family.name!r} has no Lévy density")
    return family.levy_density


def _eta(family):
    if family.eta is None:
        raise PreconditionError(f"family {family.name!r} has no eta function")
    return family.eta


def witness(family, kind, y):
    """Witness of ``kind`` for ``f(., y)``."""
    y = float(family.check_param(y))
    if kind == "CBF":
        m = _density(family)
        return lambda s: m(s, y)
    if kind == "TBF":
        m = _density(family)
        return lambda s: s * m(s, y)
    if kind == "ME":
        eta = _eta(family)
        return lambda t: eta(t, y)
    if kind == "SBF":
        return lambda lam: lam / family.f(lam, y)
    if kind == "BF":
        return lambda lam: family.f(lam, y)
    raise ValueError(f"unknown kind {kind!r}")


def mixed_witness(mixed, kind):
    """Witness of ``kind`` for the mixture (node-weighted where linear)."""
    fam, ys, ws = mixed.family, mixed.ys, mixed.ws

    def node_sum(fn):
        return lambda x: np.sum(ws * fn(np.asarray(x, float)[..., None], ys), axis=-1)

    if kind == "CBF":
        return node_sum(_density(fam))
    if kind == "TBF":
        m = node_sum(_density(fam))
        return lambda s: np.asarray(s, float) * m(s)
    if kind == "ME":
        return node_sum(_eta(fam))
    if kind == "SBF":
        return lambda lam: np.asarray(lam, float) / mixed.f(np.asarray(lam, float))
    if kind == "BF":
        return lambda lam: mixed.f(np.asarray(lam, float))
    raise ValueError(f"unknown kind {kind!r}")


def certify_family(family, kind, y, grid=None, order=DEFAULT_ORDER):
    cert = ClassCertificate(kind, witness(family, kind, y), log_grid() if grid is None else grid,
                            order, f"{family.name}(y={y:g})")
    return class_check(cert)


def certify_mixed(mixed, kind, grid=None, order=DEFAULT_ORDER):
    """Check the mixed witness; also reports whether every node passes."""
    g = log_grid() if grid is None else grid
    cert = ClassCertificate(kind, mixed_witness(mixed, kind), g, order,
                            f"{mixed.family.name} mixed over {mixed.measure.name}")
    return class_check(cert)


def node_reports(mixed, kind, grid=None, order=DEFAULT_ORDER):
    return [certify_family(mixed.family, kind, y, grid, order) for y in mixed.ys]
