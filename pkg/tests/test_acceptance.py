"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

The settings below (seeds, grids, sample counts) are fixed in advance; the
desk-scale runs use the default seed 0 of the presets.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from conftest import ACCEPTANCE
from oracles import brute_tv
from topoprior.config import PRESETS, preset
from topoprior.discretization import Field, make_grid_1d, make_grid_2d
from topoprior.experiments import run_experiment
from topoprior.forward import SourceTerm, solve_forward_1d, solve_forward_2d
from topoprior.prior import KernelSpec, build_covariance
from topoprior.sampler import PotentialSpec, run_chain
from topoprior.topology import GLOBAL, P1, P2, discrete_tv, pair_full, persistence_distance

pytestmark = pytest.mark.slow


def report(key, ok, detail):
    ACCEPTANCE[key] = (bool(ok), detail)
    print(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _random_vectors(rng, count, lo=2, hi=200):
    return [rng.normal(size=int(n)) * rng.uniform(0.1, 10) for n in rng.integers(lo, hi + 1, count)]


def test_criterion_1_tv_identity():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    vectors = _random_vectors(rng, 10_000)
    for y in vectors:
        assert np.unique(y).size == y.size
        tv = brute_tv(y)
        worst = max(worst, abs(persistence_distance(y) + np.ptp(y) - tv) / max(1.0, tv))
    elapsed = time.perf_counter() - start
    report(1, worst <= 1e-10 and elapsed < 10,
           f"{len(vectors)} vectors, worst scaled deviation {worst:.2e}, {elapsed:.1f}s")


def test_criterion_2_property_suite():
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    n = 1000
    close = lambda a, b: abs(a - b) <= 1e-9 * max(1.0, abs(a), abs(b))
    fails = {}

    ys = _random_vectors(rng, n)
    cs = rng.uniform(-10, 10, n)
    fails["homogeneity"] = sum(not close(persistence_distance(c * y), abs(c) * persistence_distance(y))
                               for y, c in zip(ys, cs))
    fails["translation"] = sum(not close(persistence_distance(y + c), persistence_distance(y))
                               for y, c in zip(ys, cs))
    # monotone -> 0 and (generic, non-monotone) -> positive
    mono = [np.cumsum(rng.random(len(y))) * rng.choice([-1, 1]) for y in ys]
    fails["monotone->zero"] = sum(persistence_distance(m) != 0 for m in mono)
    nonmono = [y for y in ys if not (np.all(np.diff(y) > 0) or np.all(np.diff(y) < 0))]
    fails["zero->monotone"] = sum(persistence_distance(y) <= 0 for y in nonmono)

    witness = None
    sub_fail = 0
    for y in ys:
        z = rng.normal(size=y.size) * rng.uniform(0.1, 10)
        lhs = persistence_distance(y) + persistence_distance(z)
        rhs = persistence_distance(np.maximum(y, z)) + persistence_distance(np.minimum(y, z))
        if lhs < rhs - 1e-9 * max(1.0, rhs):
            sub_fail += 1
            if witness is None or y.size < witness[0].size:
                witness = (y, z)
    fails["submodularity"] = sub_fail

    tri = None
    for _ in range(10_000):
        k = int(rng.integers(2, 6))
        y, z = rng.normal(size=k), rng.normal(size=k)
        if persistence_distance(y + z) > persistence_distance(y) + persistence_distance(z) + 1e-12:
            tri = (y, z)
            break
    elapsed = time.perf_counter() - start
    ok = all(v == 0 for v in fails.values()) and tri is not None and elapsed < 30
    detail = ", ".join(f"{k} {n - v}/{n}" if k != "zero->monotone" else
                       f"{k} {len(nonmono) - v}/{len(nonmono)}" for k, v in fails.items())
    detail += f", triangle witness {'found' if tri is not None else 'missing'}, {elapsed:.1f}s"
    if witness is not None:
        detail += f"; smallest submodularity counterexample has length {witness[0].size}"
    report(2, ok, detail)


def test_criterion_3_fixture():
    y = (0, 2, 1, 3, 0)
    ps = pair_full(y)
    got = (sorted((p.lo, p.hi) for p in ps.of(P1)), sorted((p.lo, p.hi) for p in ps.of(P2)),
           persistence_distance(y), discrete_tv(y), ps.persistences(GLOBAL))
    ok = got == ([(1, 2), (3, 4)], [(1, 2)], 5.0, 8.0, [3.0])
    report(3, ok, f"P1 {got[0]}, P2 {got[1]}, distance {got[2]}, TV {got[3]}, GLOBAL {got[4]}")


def _order(errors):
    return [math.log2(a / b) for a, b in zip(errors, errors[1:])]


def test_criterion_4_convergence():
    start = time.perf_counter()
    pi = np.pi
    e1 = []
    for m in (25, 50, 100, 200):
        g = make_grid_1d(0, 1, m)
        f = SourceTerm(func=lambda x: (pi**2 + 2) * np.sin(pi * x))
        u = solve_forward_1d(g, Field(g, np.full(g.shape, 2.0)), f).values
        e1.append(np.max(np.abs(u - np.sin(pi * g.knots))))
    e2 = []
    for n in (9, 17, 33, 65):
        g = make_grid_2d(0, 1, 0, 1, n, n)
        X, Y = g.mesh()
        f = SourceTerm(func=lambda x, y: (2 * pi**2 + 1) * np.sin(pi * x) * np.sin(pi * y))
        u = solve_forward_2d(g, Field(g, np.ones(g.shape)), f).values
        e2.append(np.max(np.abs(u - np.sin(pi * X) * np.sin(pi * Y))))
    o1, o2 = _order(e1), _order(e2)
    elapsed = time.perf_counter() - start
    ok = all(1.8 <= o <= 2.2 for o in o1 + o2) and elapsed < 60
    report(4, ok, f"1D orders {[round(o, 3) for o in o1]}, 2D orders {[round(o, 3) for o in o2]}, "
                  f"{elapsed:.1f}s")


def test_criterion_5_prior_invariance():
    start = time.perf_counter()
    cov = build_covariance(KernelSpec("squared_exponential", l=0.2), make_grid_1d(0, 1, 100))
    chain = run_chain(PotentialSpec(), cov, 0.8, 100_000, seed=0, burn_in_fraction=0.5, lag=5)
    var = chain.states.var(axis=0)
    dev = float(np.max(np.abs(var / cov.diagonal() - 1)))
    ks = stats.kstest(chain.states[:, 50] / math.sqrt(cov.diagonal()[50]), "norm").pvalue
    elapsed = time.perf_counter() - start
    ok = dev <= 0.05 and chain.acceptance_rate == 1.0 and elapsed < 120
    report(5, ok, f"max variance deviation {dev:.2%} over {chain.states.shape[0]} retained states, "
                  f"acceptance {chain.acceptance_rate}, KS p={ks:.2f}, {elapsed:.1f}s")


def _compare(name, grid, N):
    start = time.perf_counter()
    cfg = preset(name).replace(m=grid, N=N)
    tp = run_experiment(cfg.replace(regularizer="tp"), emit=False)
    plain = run_experiment(cfg.replace(regularizer="none"), emit=False)
    return tp, plain, time.perf_counter() - start


def test_criterion_6_example1():
    tp, plain, elapsed = _compare("example1", 100, 20_000)
    ok = tp.error <= plain.error and tp.error <= 0.15 and elapsed < 300
    report(6, ok, f"TP error {tp.error:.4f} (threshold 0.15), Gaussian error {plain.error:.4f}, "
                  f"acceptance {tp.acceptance_rate:.3f}/{plain.acceptance_rate:.3f}, {elapsed:.0f}s")


def test_criterion_7_example5():
    tp, plain, elapsed = _compare("example5", 64, 10_000)
    ok = tp.error <= plain.error and elapsed < 900
    report(7, ok, f"TP error {tp.error:.4f}, Gaussian error {plain.error:.4f}, {elapsed:.0f}s")


def test_criterion_8_determinism(tmp_path):
    names = sorted(PRESETS)
    mismatched = []
    for name in names:
        runs = []
        for tag in ("a", "b"):
            cfg = preset(name).replace(N=200, out=str(tmp_path / tag / name))
            rep = run_experiment(cfg)
            runs.append({k: open(p, "rb").read() for k, p in rep.paths.items() if p.endswith(".csv")})
        if runs[0] != runs[1] or len(runs[0]) != 4:
            mismatched.append(name)
    report(8, not mismatched, f"{len(names)} presets x 4 CSV files, byte-identical reruns; "
                              f"mismatches: {mismatched or 'none'}")
