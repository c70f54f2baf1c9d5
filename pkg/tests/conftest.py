import math

import pytest

from idepca.model import make_problem


def example1(c="1", phi="1"):
    return make_problem(a="0", b="pi", c=c, tau=0.5, t0=0.25, times="integers",
                        coeff="-1", phi=phi)


def example2(phi="1"):
    return make_problem(a="1", b="pi", c="exp(t)", tau=2.5, t0=0.5, times="integers",
                        coeff="-2^i", phi=phi)


def pure_delay(b, tau, t0=1.0, phi="1"):
    return make_problem(a="0", b=str(b), c="0", tau=tau, t0=t0, phi=phi)


def pca_closed_form(n_max):
    """x(n) for x' = -x - x([t-1]), x(0) = x(1) = 1 (phi = 1, t0 = 1)."""
    vals = {0: 1.0, 1: 1.0}
    for n in range(1, n_max):
        vals[n + 1] = math.exp(-1.0) * vals[n] - (1.0 - math.exp(-1.0)) * vals[n - 1]
    return vals


def pca_exact(t, vals):
    n = math.floor(t)
    s = t - n
    return math.exp(-s) * vals[n] - (1.0 - math.exp(-s)) * vals[n - 1]


@pytest.fixture
def ex1():
    return example1()


@pytest.fixture
def ex2():
    return example2()
