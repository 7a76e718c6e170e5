"""Quadrature utilities: Gauss-Legendre rules and divergence-aware integrals."""

import math
import warnings

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate

from .errors import NumericError

#: partial sums above this are reported as +inf
INFINITY_THRESHOLD = 1e12


def gauss_legendre(n, low, high):
    """Gauss-Legendre nodes and weights affinely mapped to ``[low, high]``."""
    x, w = leggauss(int(n))
    half = 0.5 * (high - low)
    return low + half * (x + 1.0), half * w


def _quad(fn, a, b, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(fn, a, b, limit=200, **kwargs)
    return val, err


def integrate_to_endpoints(fn, low, high, depth=12, ratio_tol=0.9):
    """Integrate ``fn`` over ``(low, high)``, detecting endpoint divergence.

    The interval is exhausted by shells ``[low + d_k, low + d_{k-1}]`` (and the
    mirror image at ``high``) with ``d_k = 10**-k * (high - low)``. The integral
    is declared divergent when a partial sum exceeds ``INFINITY_THRESHOLD`` or
    when the shell contributions stop decaying geometrically.

    Returns
    -------
    value : float
        The integral, or ``inf``.
    diverged : bool
    """
    width = high - low
    if not (np.isfinite(low) and np.isfinite(high)) or width <= 0:
        raise ValueError("integrate_to_endpoints needs a finite, non-empty interval")
    d = [10.0 ** -k * width for k in range(1, depth + 1)]
    total, _ = _quad(fn, low + d[0], high - d[0])
    shells = []
    for k in range(1, depth):
        left, _ = _quad(fn, low + d[k], low + d[k - 1])
        right, _ = _quad(fn, high - d[k - 1], high - d[k])
        shells.append(left + right)
        total += left + right
        if not np.isfinite(total) or abs(total) > INFINITY_THRESHOLD:
            return math.inf, True
    tail = np.abs(shells[-4:])
    scale = max(abs(total), 1e-300)
    if tail[-1] > 1e-10 * scale:
        ratios = tail[1:] / np.maximum(tail[:-1], 1e-300)
        if np.all(ratios > ratio_tol):
            return math.inf, True
        # geometric extrapolation of the unresolved remainder
        r = float(np.clip(ratios[-1], 0.0, ratio_tol))
        total += shells[-1] * r / (1.0 - r)
    return float(total), False


def integrate_halfline(fn, start=0.0, split=1.0, tol=1e-10):
    """``∫_start^∞ fn``, split at ``split`` so an integrable singularity at
    ``start`` and the infinite tail are handled by separate QUADPACK calls."""
    a, ea = _quad(fn, start, split, epsabs=tol, epsrel=tol)
    b, eb = _quad(fn, split, np.inf, epsabs=tol, epsrel=tol)
    return a + b, ea + eb


def checked_halfline(fn, what, start=0.0, split=1.0, tol=1e-10, rtol=1e-6):
    """As :func:`integrate_halfline` but raise :class:`NumericError` when the
    QUADPACK error estimate is not small relative to the value."""
    val, err = integrate_halfline(fn, start, split, tol)
    if not np.isfinite(val) or err > max(rtol * abs(val), 1e3 * tol):
        raise NumericError(f"quadrature for {what} did not converge", residual=err)
    return val


def log_panels(low, high, panels=60, order=16):
    """Composite Gauss-Legendre rule on geometrically spaced panels.

    Used where the integrand is smooth in ``log s`` and has to be evaluated
    for whole arrays of (possibly complex) parameters at once.
    """
    edges = np.geomspace(low, high, panels + 1)
    x, w = leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = (a + 0.5 * (b - a) * (x + 1.0)).ravel()
    weights = (0.5 * (b - a) * w).ravel()
    return nodes, weights
