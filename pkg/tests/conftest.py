import numpy as np
import pytest

from pboxrom.fom.beam import BeamSpec, build_timoshenko_beam
from pboxrom.fom.systems import FirstOrderSystem, SecondOrderSystem


def random_first_order(n, seed, m=1):
    """Dense stable system: E SPD, A negative definite."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, n))
    E = X @ X.T / n + np.eye(n)
    Y = rng.standard_normal((n, n))
    A = -(Y @ Y.T / n + 0.5 * np.eye(n))
    f = rng.standard_normal(n)
    D = rng.standard_normal((m, n))
    return FirstOrderSystem(E, A, f, D)


def random_second_order(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, n))
    M = X @ X.T / n + np.eye(n)
    Y = rng.standard_normal((n, n))
    K = -(Y @ Y.T / n + np.eye(n))
    return SecondOrderSystem(M, K, rng.standard_normal(n), rng.standard_normal((1, n)))


@pytest.fixture(scope="session")
def small_beam_factory():
    base = BeamSpec(element_count=10)

    def factory(params):
        return build_timoshenko_beam(base.with_params(youngs_modulus=params[0], density=params[1]))

    return factory


@pytest.fixture(scope="session")
def beam600():
    return build_timoshenko_beam(BeamSpec())
