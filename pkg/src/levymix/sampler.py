"""Monte-Carlo simulation of mixed subordinators and their inverses.

Jumps below ``epsilon`` are dropped and (optionally) replaced by their mean
contribution ``∫_0^eps s E nu(ds, Y)`` as extra drift; the resulting bias in
the Laplace exponent is ``O(lam**2 ∫_0^eps s**2 E nu(ds, Y))``.

Random streams are Philox generators keyed by ``(base_seed, block)`` where
paths ``block * stream_stride ... (block + 1) * stream_stride - 1`` share a
block, so batch results do not depend on the number of workers.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, HorizonError, PreconditionError
from .quadrature import INFINITY_THRESHOLD

MAX_DOUBLINGS = 6


@dataclass(frozen=True)
class SimulationConfig:
    epsilon: float = 1e-4
    compensate_small_jumps: bool = True
    horizon: float = 1.0
    path_count: int = 1000
    base_seed: int = 0
    stream_stride: int = 4096
    workers: int = 0  # 0: os.cpu_count()

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.path_count < 1:
            raise ValueError("path_count must be >= 1")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.stream_stride < 1:
            raise ValueError("stream_stride must be >= 1")


def stream(base_seed, *keys):
    """Counter-based generator for the stream ``(base_seed, *keys)``."""
    entropy = [int(base_seed), *(int(k) for k in keys)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class JumpSampler:
    """Two-stage sampler for the jumps above ``eps`` of the mixed subordinator.

    A jump first picks node ``j`` with probability ``omega_j nu((eps, inf), y_j)
    / rate``, then a size from ``nu(., y_j)`` conditioned on ``(eps, inf)``.
    """

    mixed: object
    eps: float
    node_rates: np.ndarray = field(repr=False)
    rate: float
    kill_rate: float
    drift: float
    compensation: float

    @property
    def degenerate(self):
        return self.rate == 0.0

    def sample(self, rng, n):
        if n == 0 or self.degenerate:
            return np.empty(0)
        ys = self.mixed.ys
        if ys.size == 1:
            return self.mixed.family.sample_jumps(float(ys[0]), self.eps, rng, n)
        node = rng.choice(ys.size, size=n, p=self.node_rates / self.rate)
        out = np.empty(n)
        counts = np.bincount(node, minlength=ys.size)
        for j in np.flatnonzero(counts):
            out[node == j] = self.mixed.family.sample_jumps(float(ys[j]), self.eps, rng, int(counts[j]))
        return out


def build_jump_sampler(mixed, eps, compensate=True):
    if not eps > 0:
        raise DomainError("epsilon must be positive")
    node_rates = np.asarray(mixed.ws * mixed.family.levy_tail(eps, mixed.ys), float)
    rate = float(np.sum(node_rates))
    if not math.isfinite(rate) or rate > INFINITY_THRESHOLD:
        raise DomainError(f"jump rate above epsilon={eps:g} is infinite; choose a larger epsilon")
    comp = mixed.small_jump_mean(eps) if compensate else 0.0
    return JumpSampler(
        mixed=mixed,
        eps=float(eps),
        node_rates=node_rates,
        rate=rate,
        kill_rate=mixed.mixed_kill,
        drift=mixed.mixed_drift,
        compensation=float(comp),
    )


@dataclass
class SubordinatorPath:
    """Piecewise-linear nondecreasing path on ``[0, horizon]``.

    ``sigma(s) = (drift_rate + compensation_rate) * s + sum of jumps up to s``,
    and ``+inf`` from ``kill_time`` on.
    """

    jump_times: np.ndarray
    jump_sizes: np.ndarray
    drift_rate: float
    compensation_rate: float
    kill_time: float
    horizon: float
    _sampler: JumpSampler = field(default=None, repr=False)
    _rng: np.random.Generator = field(default=None, repr=False)

    @property
    def rate(self):
        return self.drift_rate + self.compensation_rate

    def evaluate(self, s):
        s = np.asarray(s, float)
        if np.any(s < 0) or np.any(s > self.horizon):
            raise DomainError("evaluation outside [0, horizon]")
        cum = np.concatenate([[0.0], np.cumsum(self.jump_sizes)])
        idx = np.searchsorted(self.jump_times, s, side="right")
        out = self.rate * s + cum[idx]
        if self.kill_time is not None:
            out = np.where(s >= self.kill_time, np.inf, out)
        return out if out.ndim else float(out)

    def extend(self, new_horizon):
        """Simulate further jumps on ``(horizon, new_horizon]``."""
        if self._sampler is None:
            raise PreconditionError("path was not created by sample_path and cannot be extended")
        if new_horizon <= self.horizon:
            return
        rng = self._rng
        n = rng.poisson(self._sampler.rate * (new_horizon - self.horizon)) if not self._sampler.degenerate else 0
        times = np.sort(rng.uniform(self.horizon, new_horizon, n))
        sizes = self._sampler.sample(rng, n)
        self.jump_times = np.concatenate([self.jump_times, times])
        self.jump_sizes = np.concatenate([self.jump_sizes, sizes])
        self.horizon = float(new_horizon)

    def first_passage(self, t):
        """``inf{s : sigma(s) > t}`` if it occurs before the horizon, else None."""
        d = self.rate
        times = np.append(self.jump_times, self.horizon)
        sizes = np.append(self.jump_sizes, 0.0)
        kill = self.kill_time
        if kill is not None and kill <= self.horizon:
            keep = times < kill
            times = np.append(times[keep], kill)
            sizes = np.append(sizes[keep], np.inf)
        pre = d * times + np.concatenate([[0.0], np.cumsum(sizes)[:-1]])
        post = pre + sizes
        hit = np.flatnonzero(post > t)
        if hit.size == 0:
            return None
        i = hit[0]
        if pre[i] > t:
            return float(times[i] - (pre[i] - t) / d)
        return float(times[i])


def sample_path(mixed, cfg, index=0):
    """One path on ``[0, cfg.horizon]`` from its own stream ``(base_seed, index)``."""
    sampler = build_jump_sampler(mixed, cfg.epsilon, cfg.compensate_small_jumps)
    rng = stream(cfg.base_seed, index)
    n = 0 if sampler.degenerate else rng.poisson(sampler.rate * cfg.horizon)
    times = np.sort(rng.uniform(0.0, cfg.horizon, n))
    sizes = sampler.sample(rng, n)
    kill = float(rng.exponential(1.0 / sampler.kill_rate)) if sampler.kill_rate > 0 else None
    return SubordinatorPath(
        jump_times=times,
        jump_sizes=sizes,
        drift_rate=sampler.drift,
        compensation_rate=sampler.compensation,
        kill_time=kill,
        horizon=float(cfg.horizon),
        _sampler=sampler,
        _rng=rng,
    )


def sample_inverse(path, t):
    """``L(t) = inf{s >= 0 : sigma(s) > t}``, extending the horizon if needed."""
    if not t > 0:
        raise DomainError("t must be positive")
    for _ in range(MAX_DOUBLINGS + 1):
        L = path.first_passage(t)
        if L is not None:
            return L
        if path._sampler is None:
            break
        path.extend(2.0 * path.horizon)
    raise HorizonError(f"sigma did not exceed t={t:g} before operational time {path.horizon:g}")


# ---------------------------------------------------------------------------
# vectorized batches
# ---------------------------------------------------------------------------


def _blocks(cfg):
    n, k = cfg.path_count, cfg.stream_stride
    return [(b, min(k, n - b * k)) for b in range((n + k - 1) // k)]


def _run_blocks(fn, cfg):
    blocks = _blocks(cfg)
    workers = cfg.workers or os.cpu_count() or 1
    if workers == 1 or len(blocks) == 1:
        parts = [fn(*blk) for blk in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda blk: fn(*blk), blocks))
    return np.concatenate(parts)


def sample_sigma(mixed, s, cfg):
    """``sigma(s)`` for ``cfg.path_count`` independent paths (``inf`` if killed)."""
    sampler = build_jump_sampler(mixed, cfg.epsilon, cfg.compensate_small_jumps)

    def block(b, m):
        rng = stream(cfg.base_seed, b)
        counts = rng.poisson(sampler.rate * s, m) if not sampler.degenerate else np.zeros(m, int)
        sizes = sampler.sample(rng, int(counts.sum()))
        owner = np.repeat(np.arange(m), counts)
        jumps = np.bincount(owner, weights=sizes, minlength=m)
        out = (sampler.drift + sampler.compensation) * s + jumps
        if sampler.kill_rate > 0:
            kill = rng.exponential(1.0 / sampler.kill_rate, m)
            out = np.where(kill <= s, np.inf, out)
        return out

    return _run_blocks(block, cfg)


def sample_inverse_batch(mixed, t, cfg):
    """``L(t)`` for ``cfg.path_count`` paths.

    Paths are simulated in blocks of operational time (widths ``horizon``,
    ``2 horizon``, ...) until every path has crossed ``t``; each block ends
    with a zero-size pseudo-jump so linear crossings by drift are caught.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    sampler = build_jump_sampler(mixed, cfg.epsilon, cfg.compensate_small_jumps)
    d = sampler.drift + sampler.compensation

    def block(b, m):
        rng = stream(cfg.base_seed, b)
        if sampler.kill_rate > 0:
            kill = rng.exponential(1.0 / sampler.kill_rate, m)
        else:
            kill = np.full(m, np.inf)
        result = np.empty(m)
        active = np.arange(m)
        level = np.zeros(m)
        start, width = 0.0, cfg.horizon
        for _ in range(MAX_DOUBLINGS + 1):
            na = active.size
            if sampler.degenerate:
                counts = np.zeros(na, dtype=np.int64)
            else:
                counts = rng.poisson(sampler.rate * width, na)
            total = int(counts.sum())
            owner = np.concatenate([np.repeat(np.arange(na), counts), np.arange(na)])
            times = np.concatenate([rng.random(total) * width, np.full(na, width)])
            # any jump above t crosses from a level in [0, t]; capping keeps sums finite
            sizes = np.concatenate([np.minimum(sampler.sample(rng, total), t + 1.0), np.zeros(na)])
            order = np.lexsort((times, owner))
            owner, times, sizes = owner[order], times[order], sizes[order]
            cum = np.cumsum(sizes)
            first = np.searchsorted(owner, np.arange(na))
            offset = cum[first] - sizes[first]
            post = level[owner] + d * times + cum - offset[owner]
            pre = post - sizes

            idx = np.flatnonzero(post > t)
            hit, pos = np.unique(owner[idx], return_index=True)
            ih = idx[pos]
            cross = np.full(na, np.inf)
            slope = d if d > 0 else 1.0
            cross[hit] = np.where(pre[ih] > t, times[ih] - (pre[ih] - t) / slope, times[ih])
            k_local = kill[active] - start
            cross = np.minimum(cross, np.where(k_local < width, k_local, np.inf))

            done = np.isfinite(cross)
            result[active[done]] = start + cross[done]
            last = np.append(first[1:], owner.size) - 1
            level = post[last][~done]
            active = active[~done]
            if active.size == 0:
                return result
            start += width
            width *= 2.0
        raise HorizonError(
            f"{active.size} paths did not exceed t={t:g} before operational time {start:g}"
        )

    return _run_blocks(block, cfg)


def sample_delayed_bm(mixed, t, dim, cfg):
    """``B(L(t))`` in ``R^dim`` with generator ``Laplacian`` (variance ``2 L``
    per coordinate); returns ``(positions, L)``."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    L = sample_inverse_batch(mixed, t, cfg)
    z = np.concatenate(
        [stream(cfg.base_seed, b, 1).standard_normal((m, int(dim))) for b, m in _blocks(cfg)]
    )
    return z * np.sqrt(2.0 * L)[:, None], L


def estimate_laplace(mixed, lam, s, cfg):
    """Monte-Carlo ``E exp(-lam sigma(s))`` and its standard error.

    Killed paths contribute 0.
    """
    if not lam > 0:
        raise DomainError("lambda must be positive")
    sig = sample_sigma(mixed, s, cfg)
    vals = np.exp(-lam * sig)
    n = vals.size
    se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return float(np.mean(vals)), se


def estimate_record(mixed, lam, s, cfg):
    est, se = estimate_laplace(mixed, lam, s, cfg)
    return {
        "lambda": float(lam),
        "t": float(s),
        "estimate": est,
        "se": se,
        "n_paths": cfg.path_count,
        "epsilon": cfg.epsilon,
    }


def write_path_csv(path, grid, filename):
    """Write ``s, sigma_of_s`` for ``path`` on ``grid``."""
    values = np.atleast_1d(path.evaluate(np.asarray(grid, float)))
    with open(filename, "w", newline="") as fh:
        fh.write("s,sigma_of_s\n")
        for s, v in zip(np.atleast_1d(grid), values):
            fh.write(f"{float(s)!r},{float(v)!r}\n")
