import numpy as np
import pytest

from fkcap.cpmap import KrausTuple


def unit(i, j, m=2):
    e = np.zeros((m, m))
    e[i - 1, j - 1] = 1.0
    return e


PAULI = KrausTuple([np.eye(2), np.diag([1.0, -1.0])])
SWAP = KrausTuple([unit(1, 2), unit(2, 1)])
DIAG12 = KrausTuple([np.diag([1.0, 2.0])])
E11 = KrausTuple([unit(1, 1)])
ID1 = KrausTuple([np.eye(1)])
TWO1 = KrausTuple([2.0 * np.eye(1)])


def random_complex(rng, m, scale=1.0):
    return scale * (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m)))


def random_pd(rng, m):
    a = random_complex(rng, m)
    return a @ a.conj().T + m * np.eye(m)


def random_kraus(rng, m, n, selfadjoint=False):
    mats = []
    for _ in range(n):
        a = random_complex(rng, m) / np.sqrt(m * n)
        mats.append(0.5 * (a + a.conj().T) if selfadjoint else a)
    return KrausTuple(mats)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
