"""Gaussian block random matrices ``A_N = sum_i a_i (x) X_i`` with GUE blocks.

Per-trial generators are derived from ``SeedSequence(seed, spawn_key=(trial,))``
so a trial's draw depends only on ``(seed, trial)``, not on scheduling.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import fkdet
from .cpmap import KrausTuple
from .errors import DomainError
from .matkernel import logabsdet


def sample_gue(n, rng):
    """Hermitian ``n x n`` GUE draw with ``E|X_ij|^2 = 1/n`` (spectrum -> [-2, 2])."""
    g = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    return (g + g.conj().T) / math.sqrt(2.0 * n)


def assemble_block(eta, samples):
    """``sum_i a_i (x) X_i`` (Kronecker product, size ``m N``)."""
    samples = [np.asarray(x) for x in samples]
    if len(samples) != eta.n:
        raise DomainError(f"need {eta.n} samples, got {len(samples)}")
    n = samples[0].shape[0]
    if any(x.shape != (n, n) for x in samples):
        raise DomainError("samples must all be square of the same size")
    out = np.zeros((eta.m * n, eta.m * n), dtype=np.complex128)
    for a, x in zip(eta.kraus, samples):
        out += np.kron(a, x)
    return out


def trial_rng(seed, trial):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def trial_logdelta(eta, n, seed, trial):
    """``log Delta(A_N) = log|det A_N| / (m N)`` for one trial; ``-inf`` if singular."""
    rng = trial_rng(seed, trial)
    a_n = assemble_block(eta, [sample_gue(n, rng) for _ in range(eta.n)])
    return logabsdet(a_n) / (eta.m * n)


@dataclass(frozen=True)
class McConfig:
    N: int
    trials: int
    seed: int
    eta: KrausTuple

    def __post_init__(self):
        if self.N < 2:
            raise DomainError("N must be >= 2")
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned value")


@dataclass(frozen=True)
class McReport:
    per_trial_logdelta: tuple
    mean: float
    stderr: float
    prediction: float
    singular_count: int
    N: int
    trials: int
    seed: int

    @property
    def error(self):
        return abs(self.mean - self.prediction)

    def to_dict(self):
        return {
            "N": self.N,
            "trials": self.trials,
            "seed": self.seed,
            "mean": self.mean,
            "stderr": self.stderr,
            "prediction": self.prediction,
            "singular_count": self.singular_count,
            "per_trial_logdelta": list(self.per_trial_logdelta),
        }


def run_experiment(config, threads=1, prediction=None):
    """Monte Carlo estimate of ``log Delta(A_N)`` against ``log(cap^{1/2m} e^{-1/2})``.

    ``prediction`` may be passed to skip the capacity computation.
    """
    eta, n = config.eta, config.N

    def one(t):
        return trial_logdelta(eta, n, config.seed, t)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(one, range(config.trials)))
    else:
        vals = [one(t) for t in range(config.trials)]
    singular = sum(1 for v in vals if v == -math.inf)
    if singular:
        mean = -math.inf
        stderr = math.nan
    else:
        mean = math.fsum(vals) / len(vals)
        if len(vals) > 1:
            var = math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
            stderr = math.sqrt(var / len(vals))
        else:
            stderr = math.nan
    if prediction is None:
        delta = fkdet.fk_det_capacity(eta).value
        prediction = math.log(delta) if delta > 0 else -math.inf
    return McReport(
        per_trial_logdelta=tuple(float(v) for v in vals),
        mean=mean,
        stderr=stderr,
        prediction=prediction,
        singular_count=singular,
        N=n,
        trials=config.trials,
        seed=config.seed,
    )
