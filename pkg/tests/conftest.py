import numpy as np
import pytest

from cdrshift.distributions import FeatureDomain, JointDistribution, TablePmf


def grid_dist(q0, q1, prior, points=None, name="fixture"):
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    if points is None:
        points = np.arange(len(q0), dtype=float)
    dom = FeatureDomain.grid(points)
    return JointDistribution(dom, prior, TablePmf(dom, q0), TablePmf(dom, q1), name)


def from_marginal(marginal, eta, points=None):
    """Grid distribution with the given marginal masses and posterior values."""
    m = np.asarray(marginal, dtype=float)
    e = np.asarray(eta, dtype=float)
    prior = float(m @ e)
    return grid_dist(m * (1 - e) / (1 - prior), m * e / prior, prior, points)


@pytest.fixture
def five_point():
    """Prior 0.3 with posterior (9/16, 15/43, 2/9, 6/41, 3/10)."""
    return grid_dist([0.1, 0.2, 0.3, 0.25, 0.15], [0.3, 0.25, 0.2, 0.1, 0.15], 0.3)


@pytest.fixture
def three_point():
    return grid_dist([0.5, 0.3, 0.2], [0.1, 0.3, 0.6], 0.5)


def s2_upper_mass(t):
    """Q(eta >= t) for N(-1,1) vs N(1,1) truncated to [-5, 5] with prior 1/2."""
    from scipy.special import ndtr

    x0 = 0.5 * np.log(t / (1 - t))
    z = ndtr(4.0) - ndtr(-6.0)
    return 0.5 * ((ndtr(4.0) - ndtr(x0 - 1)) + (ndtr(6.0) - ndtr(x0 + 1))) / z
