import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci",
    derandomize=True,
    max_examples=150,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")

from gibbsdyn import potential as pot


@pytest.fixture(scope="session")
def zero():
    return pot.zero()


@pytest.fixture(scope="session")
def quadratic():
    return pot.polynomial([0.0, 0.0, 1.0])


@pytest.fixture(scope="session")
def double_well():
    # r^4 - 4 r^2 + 3
    return pot.polynomial([3.0, 0.0, -4.0, 0.0, 1.0])


@pytest.fixture(scope="session")
def shallow_quartic():
    # r^4 - r^2/2 + 1
    return pot.polynomial([1.0, 0.0, -0.5, 0.0, 1.0])


@pytest.fixture(scope="session")
def cosine1():
    return pot.cosine_well(1.0)


@pytest.fixture(scope="session")
def glued1():
    return pot.glued_exp(1.0)


@pytest.fixture(scope="session")
def builtin_specs(zero, quadratic, double_well, shallow_quartic, cosine1, glued1):
    return {
        "zero": zero,
        "r^2": quadratic,
        "double_well": double_well,
        "shallow_quartic": shallow_quartic,
        "cosine_beta1": cosine1,
        "cosine_beta04": pot.cosine_well(0.4),
        "cos_of_square": pot.cos_of_square(),
        "glued_beta1": glued1,
        "abs": pot.absolute(),
    }


def brute_force_minimisers(spec, t, alpha, n_grid=1_000_000, value_tol=1e-7, gap=1e-3):
    """Independent oracle: dense uniform scan of the un-normalised tilted rate
    on the same kind of truncation window the library uses. Returns the grid
    minimum and one location per near-minimal cluster (cluster argmins)."""
    c = alpha / (1.0 + t)
    k = (1.0 + t) / (2.0 * t)
    floor = min(spec.v_floor, 0.0)
    v_c = float(pot.eval(spec, c)) - floor
    R = np.sqrt((v_c + 10.0) / k)
    xs = np.linspace(c - R, c + R, n_grid)
    vals = np.asarray(pot.eval(spec, xs)) + xs**2 / 2.0 + (xs - alpha) ** 2 / (2.0 * t)
    m = float(vals.min())
    near = np.flatnonzero(vals <= m + value_tol * max(1.0, abs(m)))
    splits = np.flatnonzero(np.diff(xs[near]) > gap)
    locations = []
    for block in np.split(near, splits + 1):
        best = block[np.argmin(vals[block])]
        locations.append(float(xs[best]))
    return m, sorted(locations)
