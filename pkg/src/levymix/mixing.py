"""Mixed exponents ``E f(lam, Y)`` and the quantities derived from them."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionError, DomainError, NumericError, PreconditionError
from .quadrature import INFINITY_THRESHOLD, _quad, checked_halfline
from .transforms import InversionConfig, invert_laplace

#: ``-log t`` beyond which conjugate tails are extrapolated (t would underflow)
LOG_CUTOFF = 600.0


def _weighted(ws, values):
    # nodes are sorted by y at construction, so this reduction order is fixed
    return np.sum(values * ws, axis=-1)


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of the integrability checks on ``E a``, ``E b`` and ``E V``."""

    mixed_kill: float
    mixed_drift: float
    mixed_V: float

    @property
    def a1(self):
        return math.isfinite(self.mixed_kill) and math.isfinite(self.mixed_drift)

    @property
    def a2(self):
        return math.isfinite(self.mixed_V)

    @property
    def passed(self):
        return self.a1 and self.a2

    def as_dict(self):
        return {
            "A1": "pass" if self.a1 else "fail",
            "A2": "pass" if self.a2 else "fail",
            "mixed_kill": self.mixed_kill,
            "mixed_drift": self.mixed_drift,
            "mixed_V": self.mixed_V,
        }


def check_assumptions(family, measure):
    """Compute ``E a(Y)``, ``E b(Y)`` and ``E V(Y)`` with divergence detection.

    Failures are reported, never raised.
    """
    vals = []
    for fn in (family.kill, family.drift, family.V):
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            v, diverged = measure.expectation(lambda y, fn=fn: float(np.asarray(fn(y))))
        vals.append(math.inf if diverged or v > INFINITY_THRESHOLD else v)
    return AssumptionReport(*vals)


@dataclass(frozen=True)
class MixedExponent:
    """The pair (family, measure) with cached mixed quantities.

    Construction checks that every node lies in the family's parameter domain
    and runs :func:`check_assumptions`; with ``strict=True`` (the default) a
    failing report raises :class:`AssumptionError`.
    """

    family: object
    measure: object
    strict: bool = True
    report: AssumptionReport = field(init=False, compare=False)
    mixed_kill: float = field(init=False, compare=False)
    mixed_drift: float = field(init=False, compare=False)
    _cache: dict = field(init=False, default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        report = check_assumptions(self.family, self.measure)
        object.__setattr__(self, "report", report)
        if self.strict and not report.passed:
            raise AssumptionError(f"assumptions violated: {report.as_dict()}", report)
        self.family.check_param(self.measure.ys)
        ws = self.measure.ws
        object.__setattr__(self, "mixed_kill", float(_weighted(ws, self.family.kill(self.ys))))
        object.__setattr__(self, "mixed_drift", float(_weighted(ws, self.family.drift(self.ys))))

    @property
    def ys(self):
        return self.measure.ys

    @property
    def ws(self):
        return self.measure.ws

    def _mix(self, fn, x):
        x = np.asarray(x)
        out = _weighted(self.ws, fn(x[..., None], self.ys))
        return out if out.ndim else out[()]

    # -- exponent and kernel -------------------------------------------------

    def f(self, lam):
        """``E f(lam, Y)``; accepts complex arrays when the family does."""
        return self._mix(self.family.f, lam)

    def tail(self, s):
        """``E nubar(s, Y) = E a(Y) + E nu((s, inf), Y)``."""
        return self._mix(self.family.nubar, s)

    def levy_tail(self, s):
        return self._mix(self.family.levy_tail, s)

    def cum_kernel(self, s):
        """``∫_0^s E nubar(w, Y) dw``."""
        s = np.asarray(s, float)
        return self.mixed_kill * s + self._mix(self.family.cum_tail, s)

    def cum_kernel2(self, s):
        """``∫_0^s cum_kernel(w) dw``."""
        s = np.asarray(s, float)
        return 0.5 * self.mixed_kill * s * s + self._mix(self.family.cum_tail2, s)

    def levy_mass(self):
        """``E nu((0, inf), Y)``; ``inf`` for infinite activity."""
        m = self.family.mass(self.ys)
        return float(np.inf) if np.any(np.isinf(m) & (self.ws > 0)) else float(_weighted(self.ws, m))

    def small_jump_mean(self, eps):
        """``∫_0^eps s E nu(ds, Y)`` (the compensating drift for jumps below eps)."""
        ys = self.ys
        per_node = self.family.cum_tail(eps, ys) - eps * self.family.levy_tail(eps, ys)
        return float(_weighted(self.ws, per_node))

    def kernel_integral(self):
        """``∫_0^∞ E nubar(s, Y) ds``; ``inf`` when divergent."""
        if self.mixed_kill > 0:
            return math.inf
        mean = np.asarray(self.family.mean(self.ys), float)
        if np.any(np.isinf(mean) & (self.ws > 0)):
            return math.inf
        total = float(_weighted(self.ws, mean))
        return math.inf if total > INFINITY_THRESHOLD else total

    # -- conjugates ----------------------------------------------------------

    def conjugates(self, config=None):
        """Per-node :class:`ConjugateData`, computed lazily and cached."""
        config = config or InversionConfig()
        key = ("conj", config)
        if key not in self._cache:
            self._cache[key] = [conjugate(self.family, y, config) for y in self.ys]
        return self._cache[key]


# ---------------------------------------------------------------------------
# scalar operations
# ---------------------------------------------------------------------------


def eval_f(family, lam, y):
    lam_arr = np.asarray(lam)
    if not np.iscomplexobj(lam_arr) and np.any(lam_arr <= 0):
        raise DomainError("lambda must be positive")
    return family.f(lam, y)


def eval_tail(family, s, y):
    if np.any(np.asarray(s) <= 0):
        raise DomainError("the tail is defined for s > 0 only")
    family.check_param(y)
    return family.nubar(s, y)


def mixed_f(mixed, lam):
    return mixed.f(lam)


def mixed_tail(mixed, s):
    if np.any(np.asarray(s) <= 0):
        raise DomainError("the tail is defined for s > 0 only")
    return mixed.tail(s)


def laplace_identity_residual(family, lam, y):
    """``|f(lam, y)/lam - b(y) - ∫_0^∞ e^{-lam s} nubar(s, y) ds|`` by quadrature."""
    if lam <= 0:
        raise DomainError("lambda must be positive")
    y = float(family.check_param(y))
    a = float(family.kill(y))
    integral = checked_halfline(
        lambda s: math.exp(-lam * s) * (a + float(family.levy_tail(s, y))),
        "Laplace transform of the tail",
        split=min(1.0, 1.0 / lam),
        tol=1e-13,
    )
    f = float(family.f(lam, y))
    b = float(family.drift(y))
    return abs(f - lam * b - lam * integral) / lam


# ---------------------------------------------------------------------------
# conjugation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConjugateData:
    """Triplet of the conjugate ``f* = lam / f`` at one parameter value."""

    family: object
    y: float
    a_star: float
    b_star: float
    config: InversionConfig

    def f_star(self, lam):
        """Closed form ``lam / f(lam, y)``."""
        return lam / self.family.f(lam, self.y)

    def tail_star(self, t):
        """``nubar*(t, y) = a*(y) + nu*((t, inf), y)`` by Laplace inversion of
        ``1 / f(lam, y) - b*(y)``."""
        return invert_laplace(
            lambda z: 1.0 / self.family.f(z, self.y) - self.b_star, t, self.config
        )

    def f_star_from_triplet(self, lam):
        """``lam * (b* + ∫ e^{-lam t} nubar*(t) dt)``, reassembled by quadrature."""
        return lam * (self.b_star + tail_transform(self.tail_star, lam, "conjugate tail"))


def tail_transform(tail, lam, what):
    """``∫_0^inf e^{-lam t} tail(t) dt`` for a tail that may be as singular as
    ``1 / (t log(t)**2)`` at 0.

    On ``(0, 1)`` the integral is taken in ``v = -log t``, where such a tail
    decays only like ``1 / v**2``; past ``v = LOG_CUTOFF`` the integrand is
    extended by its local power law in ``v``.
    """

    def near(v):
        t = math.exp(-v)
        return t * math.exp(-lam * t) * float(tail(t))

    cut = LOG_CUTOFF
    head, err = _quad_interval(near, 0.0, cut)
    h1, h2 = near(0.5 * cut), near(cut)
    if h2 > 0 and h1 > h2:
        p = math.log(h1 / h2) / math.log(2.0)
        head += h2 * cut / (p - 1.0) if p > 1.0 else math.inf
    if not math.isfinite(head) or err > 1e-8 * max(abs(head), 1.0):
        raise NumericError(f"{what} near 0 did not converge", residual=err)
    far = checked_halfline(
        lambda t: math.exp(-lam * t) * float(tail(t)),
        f"{what} beyond 1",
        start=1.0,
        split=1.0 + 1.0 / lam,
        tol=1e-12,
        rtol=1e-8,
    )
    return head + far


def _quad_interval(fn, a, b):
    # log-spaced breakpoints: the integrands here vary on all scales of v
    edges = np.concatenate([[a], np.geomspace(1e-2, b, 12)])
    total, err = 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e = _quad(fn, lo, hi, epsabs=1e-13, epsrel=1e-11)
        total, err = total + v, err + e
    return total, err


def conjugate(family, y, config=None):
    """Conjugate triplet at ``y``; the caller asserts ``f(., y)`` is special."""
    config = config or InversionConfig()
    y = float(family.check_param(y))
    a, b = float(family.kill(y)), float(family.drift(y))
    if b > 0:
        b_star = 0.0
    else:
        b_star = 1.0 / (a + float(family.mass(y)))
    if a > 0:
        a_star = 0.0
    else:
        a_star = 1.0 / (b + float(family.mean(y)))
    return ConjugateData(family, y, a_star, b_star, config)


def inverse_local_time_exponent(mixed, lam):
    """``lam / E f*(lam, Y)`` with ``f* = lam / f``."""
    lam = np.asarray(lam, float)
    if np.any(lam <= 0):
        raise DomainError("lambda must be positive")
    f = mixed.family.f(lam[..., None], mixed.ys)
    if np.any(f <= 0):
        raise PreconditionError("conjugate undefined where f(lam, y) = 0")
    out = lam / _weighted(mixed.ws, lam[..., None] / f)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PotentialMeasure:
    """``U(dt) = atom * delta_0(dt) + density(t) dt``."""

    atom: float
    mixed: MixedExponent
    config: InversionConfig

    def density(self, t):
        """``E nubar*(t, Y)``, the node-weighted sum of conjugate tails."""
        mixed = self.mixed
        b_stars = np.array([c.b_star for c in mixed.conjugates(self.config)])

        def transform(z):
            z = np.asarray(z)
            per_node = 1.0 / mixed.family.f(z[..., None], mixed.ys) - b_stars
            return _weighted(mixed.ws, per_node)

        return invert_laplace(transform, t, self.config)

    def laplace(self, lam):
        """``atom + ∫ e^{-lam t} density(t) dt`` by quadrature."""
        integral = tail_transform(self.density, lam, "potential density")
        return self.atom + integral


def mixed_potential_measure(mixed, config=None):
    config = config or InversionConfig()
    conj = mixed.conjugates(config)
    atom = float(_weighted(mixed.ws, np.array([c.b_star for c in conj])))
    return PotentialMeasure(atom, mixed, config)


def mixed_f_star(mixed, lam):
    """``E f*(lam, Y)`` from the closed-form conjugates."""
    lam = np.asarray(lam, float)
    out = _weighted(mixed.ws, lam[..., None] / mixed.family.f(lam[..., None], mixed.ys))
    return out if out.ndim else float(out)


__all__ = [
    "AssumptionReport",
    "ConjugateData",
    "MixedExponent",
    "PotentialMeasure",
    "check_assumptions",
    "conjugate",
    "eval_f",
    "eval_tail",
    "inverse_local_time_exponent",
    "laplace_identity_residual",
    "mixed_f",
    "mixed_f_star",
    "mixed_potential_measure",
    "mixed_tail",
]
