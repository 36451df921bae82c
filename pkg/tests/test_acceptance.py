"""Acceptance criteria, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line with the pinned tolerance
and the worst observed deviation, then asserts.
"""
import functools
import json
import math
import time

import numpy as np
import pytest

from fkcap import capacity, cli, cpmap, fkdet, randmat, semicirc
from fkcap.capacity import Status, Verdict
from fkcap.cpmap import KrausTuple

from conftest import DIAG12, E11, ID1, PAULI, SWAP, random_complex, random_kraus

E_HALF = math.exp(-0.5)
SELECTION_SEED = 20240601


@pytest.fixture
def line(capsys):
    def emit(num, title, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} [criterion {num:>2}] {title}: {detail}")
        assert ok, detail

    return emit


@functools.lru_cache(maxsize=None)
def random_integer_instances():
    """Ten integer tuples, m <= 3 and n <= 3, with a nondecreasing verdict.

    Draws that the scaling cannot bring to double stochasticity within its
    budget (decomposable maps whose capacity infimum is not attained) are
    passed over in favour of indecomposable ones.
    """
    rng = np.random.default_rng(SELECTION_SEED)
    out = []
    while len(out) < 10:
        m = int(rng.integers(2, 4))
        n = int(rng.integers(1, 4))
        eta = KrausTuple([rng.integers(-2, 3, size=(m, m)) for _ in range(n)])
        if capacity.decide_rank_nondecreasing(eta) is not Verdict.NONDECREASING:
            continue
        if capacity.estimate_capacity(eta).status is not Status.CONVERGED:
            continue
        out.append(eta)
    return tuple(out)


def named_instances():
    fixed = [("pauli", PAULI), ("swap", SWAP), ("diag12", DIAG12)]
    return fixed + [(f"random{i}", e) for i, e in enumerate(random_integer_instances())]


@functools.lru_cache(maxsize=None)
def both_routes():
    return {
        name: (fkdet.fk_det_capacity(eta), fkdet.fk_det_spectral(eta))
        for name, eta in named_instances()
    }


def test_criterion_01_semicircle_baseline(line):
    t0 = time.perf_counter()
    cap = fkdet.fk_det_capacity(ID1).value
    spec = fkdet.fk_det_spectral(ID1).value
    dt = time.perf_counter() - t0
    e_cap = abs(cap - E_HALF)
    e_spec = abs(spec - E_HALF) / E_HALF
    ok = e_cap <= 1e-9 and e_spec <= 1e-2 and dt < 10
    line(1, "semicircle baseline", ok,
         f"|cap-e^-1/2|={e_cap:.2e} (<=1e-9), spectral rel={e_spec:.2e} (<=1e-2), {dt:.1f}s (<10s)")


def test_criterion_02_route_agreement(line):
    t0 = time.perf_counter()
    res = both_routes()
    dt = time.perf_counter() - t0
    worst, worst_name = 0.0, None
    for name, (c, s) in res.items():
        rel = abs(s.value - c.value) / c.value
        if rel > worst:
            worst, worst_name = rel, name
    ok = worst <= 1e-2 and dt < 300 and len(res) == 13
    line(2, "spectral vs capacity route", ok,
         f"{len(res)} instances, worst rel={worst:.2e} ({worst_name}) (<=1e-2), {dt:.1f}s (<300s)")


def test_criterion_03_integer_bounds(line):
    lows, fails = [], []
    floor = E_HALF * (1 - 1e-2)
    for name, eta in named_instances():
        rep = capacity.check_integer_bound(eta)
        lows.append(rep.cap_upper)
        c, s = both_routes()[name]
        if not (rep.verdict is Verdict.NONDECREASING and rep.bound_holds):
            fails.append(f"{name}: cap")
        if c.value < floor or s.value < floor:
            fails.append(f"{name}: delta")
    swap_cap = capacity.estimate_capacity(SWAP).cap_upper
    ok = not fails and abs(swap_cap - 1) <= 1e-6
    line(3, "integer capacity bound and determinant floor", ok,
         f"min cap_upper={min(lows):.6f} (>=1-1e-6), swap cap-1={swap_cap - 1:.1e} (+-1e-6), "
         f"min delta={min(min(c.value, s.value) for c, s in both_routes().values()):.5f} "
         f"(>={floor:.5f}), failures={fails}")


def test_criterion_04_oracle_agreement(line):
    worst, worst_name = 0.0, None
    for name, eta in named_instances():
        est = capacity.estimate_capacity(eta).cap_estimate
        orc = capacity.brute_force_capacity(eta).value
        rel = abs(est - orc) / orc
        if rel > worst:
            worst, worst_name = rel, name
    line(4, "scaling vs brute-force oracle", worst <= 1e-4,
         f"13 instances, worst rel={worst:.2e} ({worst_name}) (<=1e-4)")


def test_criterion_05_scaling_covariance(line):
    rng = np.random.default_rng(5)
    worst_cap = worst_delta = worst_oracle = 0.0
    for k in range(20):
        m = 1 + k % 3
        eta = random_kraus(rng, m, 1 + k % 2)
        c1 = random_complex(rng, m) + 1.5 * np.eye(m)
        c2 = random_complex(rng, m) + 1.5 * np.eye(m)
        d1, d2 = abs(np.linalg.det(c1)), abs(np.linalg.det(c2))
        scaled = cpmap.scale(eta, c1, c2)
        cap0 = capacity.estimate_capacity(eta).cap_estimate
        cap1 = capacity.estimate_capacity(scaled).cap_estimate
        worst_cap = max(worst_cap, abs(cap1 - d1**2 * d2**2 * cap0) / cap1)
        orc0 = capacity.brute_force_capacity(eta).value
        orc1 = capacity.brute_force_capacity(scaled).value
        worst_oracle = max(worst_oracle, abs(orc1 - d1**2 * d2**2 * orc0) / orc1)
        del0 = fkdet.fk_det_capacity(eta).value
        del1 = fkdet.fk_det_capacity(scaled).value
        worst_delta = max(worst_delta, abs(del1 - (d1 * d2) ** (1 / m) * del0) / del1)
    ok = max(worst_cap, worst_delta, worst_oracle) <= 1e-3
    line(5, "scaling covariance", ok,
         f"20 triples, cap law {worst_cap:.1e}, oracle cap law {worst_oracle:.1e}, "
         f"delta law {worst_delta:.1e} (<=1e-3)")


def _hermitian_unitary(rng, m):
    q, _ = np.linalg.qr(random_complex(rng, m))
    signs = rng.choice([-1.0, 1.0], size=m)
    return q @ np.diag(signs) @ q.conj().T


def test_criterion_06_moment_bound(line):
    rng = np.random.default_rng(6)
    violations, checked = 0, 0
    for k in range(20):
        m, n = 1 + k % 3, 1 + k % 4
        eta = random_kraus(rng, m, n, selfadjoint=True)
        eta = KrausTuple([a * rng.uniform(0.5, 2.0) for a in eta.kraus])
        for kk in range(1, 6):
            checked += 1
            dev = abs(semicirc.moment(eta, kk) - semicirc.catalan(kk))
            if dev > semicirc.semicircle_deviation_bound(eta, kk) * (1 + 1e-12):
                violations += 1
    worst_cat = 0.0
    for k in range(5):
        m, n = 2 + k % 2, 2 + k % 3
        p = rng.dirichlet(np.ones(n))
        eta = KrausTuple([math.sqrt(pi) * _hermitian_unitary(rng, m) for pi in p])
        for kk in range(6):
            worst_cat = max(worst_cat, abs(semicirc.moment(eta, kk) - semicirc.catalan(kk)))
    ok = violations == 0 and worst_cat <= 1e-9
    line(6, "moment deviation bound", ok,
         f"{checked} (tuple, k) checks, violations={violations} (==0), "
         f"doubly stochastic Catalan dev={worst_cat:.1e} (<=1e-9)")


def test_criterion_07_superadditivity(line):
    rng = np.random.default_rng(7)
    worst = math.inf
    for k in range(20):
        m = 1 + k % 3
        e0 = random_kraus(rng, m, 1 + k % 2)
        ed = random_kraus(rng, m, 1 + (k + 1) % 2)
        e1 = cpmap.concatenate(e0, ed)
        c1 = capacity.brute_force_capacity(e1).value ** (1 / m)
        cd = capacity.brute_force_capacity(ed).value ** (1 / m)
        c0 = capacity.brute_force_capacity(e0).value ** (1 / m)
        worst = min(worst, c1 - cd - c0)
    line(7, "superadditivity", worst >= -1e-6,
         f"20 pairs, min cap1^(1/m)-capd^(1/m)-cap0^(1/m)={worst:.3e} (>=-1e-6)")


def test_criterion_08_finite_matrix_suite(line):
    rng = np.random.default_rng(8)
    d = fkdet.fk_det_matrix
    fails, cases = [], 0

    def close(a, b):
        return abs(a - b) <= 1e-8 * max(abs(a), abs(b))

    for i in range(200):
        m = int(rng.integers(1, 17))
        b1 = random_complex(rng, m) / math.sqrt(m) + 3 * np.eye(m)
        b2 = random_complex(rng, m) / math.sqrt(m) + 3 * np.eye(m)
        t = random_complex(rng, m)
        t2 = random_complex(rng, m)
        p = t @ t.conj().T
        z = np.zeros((m, m))
        lam = np.linalg.eigvalsh(t @ t.conj().T)
        checks = {
            "multiplicative": close(d(b1 @ b2), d(b1) * d(b2)),
            "adjoint": close(d(t), d(t.conj().T)),
            "am-gm": d(p) <= np.real(np.trace(p)) / m * (1 + 1e-8),
            "block": close(d(np.block([[z, t], [t2, z]])), math.sqrt(d(t) * d(t2))),
            "det formula": close(d(t), math.exp(np.sum(np.log(lam)) / (2 * m))),
        }
        cases += len(checks)
        fails += [f"{name}@m={m}" for name, ok in checks.items() if not ok]
    line(8, "finite-matrix determinant suite", not fails and cases == 1000,
         f"{cases} cases up to m=16 at 1e-8, failures={len(fails)} {fails[:3]}")


def test_criterion_09_rank_decreasing(line):
    rep = capacity.estimate_capacity(E11)
    delta = fkdet.fk_det_capacity(E11).value
    atom = semicirc.atom_at_zero(E11)
    mc = randmat.run_experiment(randmat.McConfig(N=50, trials=5, seed=0, eta=E11))
    ok = (
        rep.status is Status.RANK_DECREASING_SUSPECTED
        and delta == 0.0
        and atom >= 0.25
        and mc.singular_count == mc.trials
    )
    line(9, "rank-decreasing path", ok,
         f"status={rep.status.value}, delta={delta}, atom={atom:.4f} (>=0.25), "
         f"singular {mc.singular_count}/{mc.trials}")


@pytest.mark.slow
def test_criterion_10_monte_carlo(line):
    t0 = time.perf_counter()
    parts, ok = [], True
    for name, eta in (("id", ID1), ("pauli", PAULI)):
        pred = math.log(fkdet.fk_det_capacity(eta).value)
        trend, worst = 0, 0.0
        for seed in range(5):
            small = randmat.run_experiment(randmat.McConfig(100, 50, seed, eta), prediction=pred)
            large = randmat.run_experiment(randmat.McConfig(400, 50, seed, eta), prediction=pred)
            trend += large.error < small.error
            worst = max(worst, large.error)
        ok = ok and worst <= 0.03 and trend >= 4
        parts.append(f"{name}: max err(N=400)={worst:.4f} (<=0.03), trend {trend}/5 (>=4)")
    dt = time.perf_counter() - t0
    ok = ok and dt < 600
    line(10, "random matrix evidence", ok, "; ".join(parts) + f"; {dt:.0f}s (<600s)")


def test_criterion_11_determinism(line, tmp_path, capsys):
    doc = tmp_path / "pauli.json"
    doc.write_text(json.dumps({"m": 2, "kraus": [[[1, 0], [0, 1]], [[1, 0], [0, -1]]]}))
    c1 = tmp_path / "c1.json"
    c1.write_text("[[2, 1], [0, 1]]")
    commands = [
        ["cap", str(doc), "--oracle"],
        ["fkdet", str(doc), "--check-corollary"],
        ["density", str(doc), "--grid-points", "801", "--csv", "{csv}"],
        ["moments", str(doc), "--kmax", "6"],
        ["randmat", str(doc), "--N", "60", "--trials", "6", "--seed", "9", "--csv", "{csv}"],
        ["scale", str(doc), "--c1", str(c1)],
    ]
    mismatches = []
    for cmd in commands:
        runs = []
        for rep in range(2):
            csv = tmp_path / f"out{rep}.csv"
            argv = [a.replace("{csv}", str(csv)) for a in cmd]
            code = cli.main(argv)
            out = capsys.readouterr().out.replace(str(csv), "<csv>")
            runs.append((code, out.encode(), csv.read_bytes() if csv.exists() else b""))
            if csv.exists():
                csv.unlink()
        if runs[0] != runs[1] or runs[0][0] != 0:
            mismatches.append(cmd[0])
    line(11, "byte-identical outputs", not mismatches,
         f"{len(commands)} commands run twice, mismatches={mismatches}")
