import numpy as np
import pytest
from hypothesis import settings

from levymix import families, measures
from levymix.mixing import MixedExponent

settings.register_profile("levymix", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("levymix")


@pytest.fixture(scope="session")
def stable_half():
    return MixedExponent(families.stable(), measures.dirac(0.5))


@pytest.fixture(scope="session")
def uniform_stable():
    return MixedExponent(families.stable(), measures.uniform(0.0, 1.0))


@pytest.fixture(scope="session")
def pure_drift():
    return MixedExponent(families.drift(), measures.dirac(1.0))


@pytest.fixture(scope="session")
def gamma_one():
    return MixedExponent(families.gamma(), measures.dirac(1.0))


def builtin_mixtures():
    """(label, MixedExponent) pairs covering every built-in family."""
    return [
        ("stable-dirac", MixedExponent(families.stable(), measures.dirac(0.5))),
        ("stable-atoms", MixedExponent(families.stable(), measures.atoms([0.3, 0.7]))),
        ("stable-uniform", MixedExponent(families.stable(), measures.uniform(0.1, 0.9))),
        ("gamma-dirac", MixedExponent(families.gamma(), measures.dirac(2.0))),
        ("gamma-pareto", MixedExponent(families.gamma(), measures.pareto(1.0, 2.0))),
        ("drift-uniform", MixedExponent(families.drift(), measures.uniform(1.0, 2.0))),
        ("killed-stable", MixedExponent(families.killed(families.stable(), 0.5), measures.dirac(0.5))),
        ("cpp-exponential", MixedExponent(families.compound_poisson("exponential", 0.5), measures.dirac(2.0))),
        ("cpp-unit", MixedExponent(families.compound_poisson(), measures.dirac(1.0))),
    ]


def close(a, b, rel=1e-10, abs_=0.0):
    return np.all(np.abs(np.asarray(a) - np.asarray(b)) <= abs_ + rel * np.abs(np.asarray(b)))
