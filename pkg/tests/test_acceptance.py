"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances are the stated ones. Two criteria are known to fail (6 and the
stable ME part of 9); see the decisions ledger for the analysis.
"""

import math
import time

import numpy as np
import pytest
from scipy import special

from levymix import families, measures
from levymix.certify import ClassCertificate, certify_family, certify_mixed, class_check
from levymix.diffusion import (
    diffusivity_limit,
    inverse_density_residual,
    msd,
    msd_asymptotic_ratio,
    pde_residual,
)
from levymix.mixing import MixedExponent, conjugate, mixed_f_star, mixed_potential_measure
from levymix.operators import TimeGrid, apply_regularized, build_kernel, symbol_check
from levymix.sampler import SimulationConfig, estimate_laplace, sample_inverse_batch
from levymix.transforms import inverse_density, renewal_function

PATHS = 100_000
MC = SimulationConfig(path_count=PATHS, epsilon=1e-4, compensate_small_jumps=True, base_seed=0)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail

    return emit


def stable(beta):
    return MixedExponent(families.stable(), measures.dirac(beta))


def test_criterion_1_laplace_exponent(report):
    cases = [
        ("stable 0.5, lambda=1", stable(0.5), 1.0, math.exp(-1.0)),
        ("stable 0.5, lambda=4", stable(0.5), 4.0, math.exp(-2.0)),
        ("uniform(0,1) stable, lambda=e", MixedExponent(families.stable(), measures.uniform(0.0, 1.0)),
         math.e, math.exp(-(math.e - 1.0))),
    ]
    start = time.perf_counter()
    parts, ok = [], True
    for label, mixed, lam, exact in cases:
        # the closed form and the mixed exponent must agree before MC is compared
        assert math.exp(-float(mixed.f(lam))) == pytest.approx(exact, rel=1e-10)
        est, se = estimate_laplace(mixed, lam, 1.0, MC)
        z = abs(est - exact) / se
        ok &= z < 3.0
        parts.append(f"{label}: {z:.2f} SE")
    elapsed = time.perf_counter() - start
    ok &= elapsed <= 60.0
    report(1, ok, "; ".join(parts) + f"; {elapsed:.1f} s")


def test_criterion_2_inverse_mean(report):
    mixed = stable(0.5)
    exact = 1.0 / special.gamma(1.5)
    L = sample_inverse_batch(mixed, 1.0, MC)
    mean = L.mean()
    se = L.std(ddof=1) / math.sqrt(L.size)
    U = renewal_function(mixed, [1.0]).values[0]
    rel_mc = abs(mean / exact - 1.0)
    rel_U = abs(U / exact - 1.0)
    ok = rel_mc <= 1e-2 and abs(mean - exact) < 3 * se and rel_U <= 1e-3 and abs(mean - U) < 3 * se
    report(2, ok, f"MC mean {mean:.5f} (rel {rel_mc:.2e}, {abs(mean - exact) / se:.2f} SE); "
                  f"U(1) rel {rel_U:.1e}; MC vs U(1) rel {abs(mean / U - 1):.1e}")


def test_criterion_3_renewal_convolution_density(report):
    mixed = stable(0.5)
    x = np.linspace(0.05, 4.0, 200)
    g = inverse_density(mixed, x, 1.0, method="convolution").values
    err = float(np.max(np.abs(g - np.exp(-x * x / 4.0) / math.sqrt(math.pi))))
    # CDF of the computed density on a fine grid, compared to the MC sample
    fine = np.linspace(1e-4, 10.0, 4000)
    dens = inverse_density(mixed, fine, 1.0, method="convolution").values
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(fine))]) + dens[0] * fine[0]
    L = np.sort(sample_inverse_batch(mixed, 1.0, MC))
    F = np.interp(L, fine, cdf)
    n = L.size
    ks = float(max(np.max(np.arange(1, n + 1) / n - F), np.max(F - np.arange(n) / n)))
    report(3, err <= 1e-3 and ks <= 0.01, f"max abs error {err:.2e}; KS {ks:.4f}")


def exp_u(t):
    return np.exp(-np.asarray(t, float))


def test_criterion_4_operator_symbols(report):
    lambdas = [0.5, 1.0, 2.0, 5.0]
    cases = {
        "stable Dirac": stable(0.5),
        "stable atoms": MixedExponent(families.stable(), measures.atoms([0.3, 0.7])),
        "gamma atoms": MixedExponent(families.gamma(), measures.atoms([0.5, 2.0])),
    }
    ok, parts = True, []
    for label, mixed in cases.items():
        res = [symbol_check(exp_u, mixed, lambdas, TimeGrid.covering(50.0, h), lambda lam: 1.0 / (lam + 1.0))
               for h in (1e-3, 5e-4)]
        ok &= res[0] <= 1e-2 and res[1] <= res[0] / 2.0
        grid = TimeGrid(1e-3, 1000)
        annihilated = float(np.max(np.abs(apply_regularized(np.full(grid.N + 1, 3.0), build_kernel(mixed, grid))[1:])))
        ok &= annihilated <= 10 * grid.h
        parts.append(f"{label}: {res[0]:.1e} -> {res[1]:.1e}, constant {annihilated:.1e}")
    report(4, ok, "; ".join(parts))


def test_criterion_5_conjugation(report):
    lam = np.geomspace(1e-2, 1e2, 41)
    worst = 0.0
    for family, y in [(families.stable(), 0.5), (families.stable(), 0.2), (families.gamma(), 1.0),
                      (families.drift(), 1.0)]:
        c = conjugate(family, y)
        worst = max(worst, float(np.max(np.abs(family.f(lam, y) * c.f_star(lam) / lam - 1.0))))
    pot_worst = 0.0
    for mixed in [MixedExponent(families.stable(), measures.atoms([0.3, 0.6])),
                  MixedExponent(families.gamma(), measures.atoms([0.5, 2.0]))]:
        pot = mixed_potential_measure(mixed)
        for lv in (0.5, 2.0):
            target = float(mixed_f_star(mixed, lv)) / lv
            pot_worst = max(pot_worst, abs(pot.laplace(lv) / target - 1.0))
    report(5, worst <= 1e-6 and pot_worst <= 1e-4,
           f"f f* / lambda max rel error {worst:.1e}; potential transform rel error {pot_worst:.1e}")


def test_criterion_6_ultraslow(report):
    beta, C, t = 0.5, 2.0, 1e6
    mixed = MixedExponent(families.stable(), measures.uniform(0.0, beta / C))
    a = beta / C
    curve = msd(mixed, [t], alpha=a)
    lhs = math.gamma(1.0 + a) * curve.values[0] / 2.0
    target = a * math.log(t) / (1.0 - t**-a)
    ratio = lhs / target
    report(6, abs(ratio - 1.0) <= 0.05, f"ratio {ratio:.4f} at t=1e6")


def test_criterion_7_diffusivity(report):
    parts, ok = [], True
    for y in (0.5, 1.0, 3.0):
        d = diffusivity_limit(MixedExponent(families.gamma(), measures.dirac(y)))
        ok &= abs(d * y - 1.0) <= 1e-6
    parts.append("gamma Dirac ok" if ok else "gamma Dirac off")
    for g, b in ((1.0, 2.0), (0.5, 3.0)):
        d = diffusivity_limit(MixedExponent(families.gamma(), measures.pareto(g, b)))
        rel = abs(d / (b / (g * (b + 1.0))) - 1.0)
        ok &= rel <= 1e-4
        parts.append(f"Pareto({g}, {b}) rel {rel:.1e}")
    inf = diffusivity_limit(stable(0.5))
    ok &= math.isinf(inf)
    parts.append(f"stable {inf}")
    report(7, ok, "; ".join(parts))


def test_criterion_8_msd_ratio(report):
    ratios = {beta: msd_asymptotic_ratio(stable(beta), 1e4) for beta in (0.3, 0.5, 0.8)}
    ok = all(0.98 <= r <= 1.02 for r in ratios.values())
    report(8, ok, ", ".join(f"beta {b}: {r:.4f}" for b, r in ratios.items()))


def test_criterion_9_class_certificates(report):
    failures = []
    for name, family, y in [("stable", families.stable(), 0.5), ("gamma", families.gamma(), 1.0)]:
        for kind in ("CBF", "TBF", "ME"):
            if not certify_family(family, kind, y).passed:
                failures.append(f"{name} {kind}")
        for mname, measure in [("atoms", measures.atoms([0.3, 0.7] if name == "stable" else [0.5, 2.0])),
                               ("uniform", measures.uniform(0.1, 0.9) if name == "stable" else measures.uniform(0.5, 3.0))]:
            mixed = MixedExponent(family, measure)
            for kind in ("CBF", "TBF", "ME"):
                if not certify_mixed(mixed, kind).passed:
                    failures.append(f"{name}-{mname} {kind}")
    bad = class_check(ClassCertificate("CBF", lambda s: np.sin(s) + 2.0))
    ok_bad = bad.verdict == "fail" and bad.failing_order <= 2
    ok = not failures and ok_bad
    report(9, ok, f"failing certificates: {failures or 'none'}; "
                  f"non-monotone witness fails at order {bad.failing_order}")


def test_criterion_10_pde_residuals(report):
    mixed = stable(0.5)
    levels = ((1e-3, 1e-2), (5e-4, 5e-3), (2.5e-4, 2.5e-3))
    q_res, l_res = [], []
    for h, dx in levels:
        grid = np.arange(0.1, 3.0 + 1e-9, dx)
        q_res.append(pde_residual(mixed, grid, 1.0, h).max_residual)
        l_res.append(inverse_density_residual(mixed, grid, 1.0, h).max_residual)
    ratios_q = [a / b for a, b in zip(q_res, q_res[1:])]
    ratios_l = [a / b for a, b in zip(l_res, l_res[1:])]
    # boundary value of the inverse density: l(0+, t) = E nubar(t)
    edge = inverse_density(mixed, [1e-8], 1.0, method="transform").values[0]
    edge_rel = abs(edge / float(mixed.tail(1.0)) - 1.0)
    ok = min(ratios_q) >= 1.8 and min(ratios_l) >= 1.8 and edge_rel <= 1e-4
    report(10, ok, "q residuals " + ", ".join(f"{r:.2e}" for r in q_res)
           + "; l residuals " + ", ".join(f"{r:.2e}" for r in l_res)
           + f"; boundary rel {edge_rel:.1e}")
