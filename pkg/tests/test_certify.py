import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from levymix import families, measures
from levymix.certify import (
    ClassCertificate,
    certify_family,
    certify_mixed,
    class_check,
    log_grid,
    mixed_witness,
    node_reports,
    normalized_differences,
)
from levymix.errors import PreconditionError
from levymix.mixing import MixedExponent

MIXTURES = {
    "stable-atoms": MixedExponent(families.stable(), measures.atoms([0.3, 0.7])),
    "stable-uniform": MixedExponent(families.stable(), measures.uniform(0.1, 0.9)),
    "gamma-atoms": MixedExponent(families.gamma(), measures.atoms([0.5, 2.0])),
    "gamma-uniform": MixedExponent(families.gamma(), measures.uniform(0.5, 3.0)),
}


def test_stable_density_is_cbf():
    beta = 0.5
    cert = ClassCertificate("CBF", lambda s: beta * s ** (-beta - 1) / special.gamma(1 - beta))
    rep = class_check(cert)
    assert rep.passed and rep.verdict == "pass"


def test_oscillating_witness_fails():
    rep = class_check(ClassCertificate("CBF", lambda s: np.sin(s) + 2.0))
    assert rep.verdict == "fail" and rep.failing_order <= 2
    # where sin is decreasing the first violation is convexity, order 2
    rep2 = class_check(ClassCertificate("CBF", lambda s: np.sin(s) + 2.0, grid=np.linspace(2.0, 4.0, 64)))
    assert rep2.verdict == "fail" and rep2.failing_order == 2


def test_direct_differences_confirm_the_oscillation():
    x = np.linspace(2.0, 4.0, 64)
    d2 = np.diff(np.sin(x) + 2.0, 2)
    assert np.any(d2 < 0)


def test_exponential_me_range_check():
    cert = ClassCertificate("ME", lambda t: np.exp(-np.asarray(t)), require_integrable=False)
    assert class_check(cert).passed


@pytest.mark.parametrize("kind", ["CBF", "TBF", "SBF", "BF"])
@pytest.mark.parametrize("family,y", [(families.stable(), 0.5), (families.stable(), 0.2), (families.gamma(), 1.0)])
def test_family_certificates_pass(family, y, kind):
    assert certify_family(family, kind, y).passed


def test_gamma_is_me():
    assert certify_family(families.gamma(), "ME", 1.0).passed


def test_stable_is_not_me():
    # eta(t) = sin(pi b) t^b / pi is unbounded, so the range check fails
    rep = certify_family(families.stable(), "ME", 0.5)
    assert rep.verdict == "fail"


def test_integrability_of_eta():
    # eta = 1 near 0 violates ∫_0^1 eta / t < inf
    rep = class_check(ClassCertificate("ME", lambda t: np.ones_like(np.asarray(t, float))))
    assert rep.verdict == "fail" and "diverges" in rep.reason


@pytest.mark.parametrize("name", sorted(MIXTURES))
@pytest.mark.parametrize("kind", ["CBF", "TBF", "SBF", "BF"])
def test_mixture_certificates_pass(name, kind):
    mixed = MIXTURES[name]
    assert certify_mixed(mixed, kind).passed
    # closure: the mixture passes whenever all nodes pass
    assert all(r.passed for r in node_reports(mixed, kind))


@pytest.mark.parametrize("name", ["gamma-atoms", "gamma-uniform"])
def test_gamma_mixtures_are_me(name):
    assert certify_mixed(MIXTURES[name], "ME").passed


def test_mixed_witness_is_node_weighted():
    mixed = MIXTURES["gamma-atoms"]
    s = np.array([0.3, 1.0, 4.0])
    m = families.gamma().levy_density
    assert np.allclose(mixed_witness(mixed, "CBF")(s), 0.5 * m(s, 0.5) + 0.5 * m(s, 2.0), rtol=1e-14)


def test_inconclusive_on_bad_grid():
    rep = class_check(ClassCertificate("CBF", lambda s: 1 / s, grid=np.array([1.0, 2.0, 3.0])))
    assert rep.verdict == "inconclusive"
    rep = class_check(ClassCertificate("CBF", lambda s: 1 / s, grid=np.array([-1.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0])))
    assert rep.verdict == "inconclusive"


def test_inconclusive_at_noise_level():
    # a perturbation of relative size 1e-6 is above SIGN_TOL but inside the noise band
    rng = np.random.default_rng(0)
    grid = log_grid()
    noise = 1e-6 * rng.standard_normal(grid.size)
    table = dict(zip(grid, np.exp(-grid) * (1 + noise)))
    rep = class_check(ClassCertificate("CBF", lambda s: np.array([table[v] for v in s]), grid=grid))
    assert rep.verdict in ("inconclusive", "fail")
    assert rep.verdict != "pass"


def test_missing_witness_is_a_precondition_error():
    with pytest.raises(PreconditionError):
        certify_family(families.compound_poisson(), "CBF", 1.0)
    with pytest.raises(PreconditionError):
        certify_family(families.drift(), "ME", 1.0)


def test_unknown_kind():
    with pytest.raises(ValueError):
        ClassCertificate("XYZ", lambda s: s)


@given(c=st.floats(0.1, 10.0), k=st.integers(1, 4))
def test_normalized_differences_of_polynomials(c, k):
    # k-th divided differences of c x^k are its leading coefficient c
    x = np.linspace(1.0, 2.0, 12)
    d = normalized_differences(x, c * x**k, k)
    width = x[k:] - x[:-k]
    scale = np.max(np.lib.stride_tricks.sliding_window_view(c * x**k, k + 1), axis=1)
    assert np.allclose(d * scale / width**k, c, rtol=1e-6)


@given(lam=st.lists(st.floats(0.05, 2.0), min_size=1, max_size=4))
def test_sums_of_exponentials_are_cbf(lam):
    rep = class_check(ClassCertificate("CBF", lambda s: sum(np.exp(-a * np.asarray(s)) for a in lam),
                                       grid=np.geomspace(0.1, 10.0, 40)))
    assert rep.verdict != "fail"


def test_report_dict():
    d = certify_family(families.gamma(), "TBF", 1.0).as_dict()
    assert d["verdict"] == "pass" and d["orders_checked"] == 4 and d["kind"] == "TBF"
