import math

import numpy as np
import pytest
from scipy import stats

from topoprior.discretization import Field, make_grid_1d
from topoprior.forward import ForwardSolveError
from topoprior.prior import KernelSpec, build_covariance
from topoprior.sampler import (
    PotentialSpec, SamplerError, accept_probability, mh_accept, pcn_propose, retained_steps,
    run_chain, summarize,
)


@pytest.fixture(scope="module")
def cov():
    return build_covariance(KernelSpec("squared_exponential", l=0.2), make_grid_1d(0, 1, 20))


def test_propose():
    np.testing.assert_allclose(pcn_propose(np.array([1.0, 2.0]), 0.0, np.array([5.0, 5.0])), [1, 2])
    np.testing.assert_allclose(pcn_propose(np.array([1.0, 2.0]), 1.0, np.array([5.0, -1.0])), [5, -1])
    np.testing.assert_allclose(pcn_propose(np.ones(2), 0.6, np.zeros(2)), [0.8, 0.8])
    g = make_grid_1d(0, 1, 2)
    out = pcn_propose(Field(g, [1.0, 1.0, 1.0]), 0.6, np.ones(3))
    np.testing.assert_allclose(out.values, [1.4, 1.4, 1.4])
    with pytest.raises(ValueError):
        pcn_propose(np.ones(2), 1.5, np.ones(2))


def test_acceptance_rule():
    assert accept_probability(1.0, 1.0 + math.log(2)) == pytest.approx(0.5)
    assert accept_probability(2.0, 1.0) == 1.0
    assert mh_accept(1.0, 1.0 + math.log(2), 0.49)
    assert not mh_accept(1.0, 1.0 + math.log(2), 0.51)
    assert not mh_accept(0.0, math.inf, 0.0)


def test_retained_steps():
    assert retained_steps(20, 0.5, 5).tolist() == [11, 16]
    assert retained_steps(10, 0.0, 1).tolist() == list(range(1, 11))
    assert retained_steps(1, 0.5, 5).size == 0
    with pytest.raises(ValueError):
        retained_steps(10, 1.0, 5)


def test_zero_potential_accepts_everything(cov):
    ch = run_chain(PotentialSpec(), cov, 0.3, 500, seed=1)
    assert ch.acceptance_rate == 1.0
    assert ch.states.shape == (retained_steps(500).size, 21)


def test_determinism(cov):
    pot = PotentialSpec(misfit=lambda q: 50 * float(np.sum((q - 0.5) ** 2)))
    a = run_chain(pot, cov, 0.2, 300, seed=9, store="all")
    b = run_chain(pot, cov, 0.2, 300, seed=9, store="all")
    np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal(a.accept_flags, b.accept_flags)
    c = run_chain(pot, cov, 0.2, 300, seed=10, store="all")
    assert not np.array_equal(a.states, c.states)
    # thinned storage keeps exactly the states of the full record
    t = run_chain(pot, cov, 0.2, 300, seed=9)
    np.testing.assert_array_equal(t.states, a.states[t.state_steps - 1])


def test_summary_of_constant_chain(cov):
    # rho = 0 proposes the current state every time
    init = np.linspace(0, 1, 21)
    ch = run_chain(PotentialSpec(), cov, 0.0, 20, seed=0, initial=init)
    s = summarize(ch)
    assert s.n_retained == 2
    np.testing.assert_allclose(s.mean.values, init)
    np.testing.assert_array_equal(s.std.values, 0.0)
    text = s.to_csv()
    assert text.splitlines()[0] == "index,x,mean,std" and len(text.splitlines()) == 22


def test_summary_requires_stored_states(cov):
    ch = run_chain(PotentialSpec(), cov, 0.1, 40, seed=0)
    with pytest.raises(SamplerError):
        summarize(ch, 0.5, 3)
    full = run_chain(PotentialSpec(), cov, 0.1, 40, seed=0, store="all")
    assert summarize(full, 0.5, 3).n_retained == len(retained_steps(40, 0.5, 3))


@pytest.mark.slow
def test_prior_invariance_ks(cov):
    ch = run_chain(PotentialSpec(), cov, 0.9, 20_000, seed=4, burn_in_fraction=0.1, lag=10)
    k = 10
    sample = ch.states[:, k] / math.sqrt(cov.diagonal()[k])
    assert stats.kstest(sample, "norm").pvalue > 1e-3


def test_exponential_transform_positive(cov):
    pot = PotentialSpec(misfit=lambda q: float(np.sum((q - 1.0) ** 2)), transform="exponential")
    ch = run_chain(pot, cov, 0.3, 200, seed=0)
    s = summarize(ch)
    assert np.all(s.mean.values > 0)
    with pytest.raises(ValueError):
        pot.latent(np.zeros(3))


def test_acceptance_falls_with_step_size(cov):
    pot = PotentialSpec(misfit=lambda q: 200 * float(np.sum((q - 0.3) ** 2)))
    rates = [run_chain(pot, cov, rho, 3000, seed=0).acceptance_rate for rho in (0.002, 0.01, 0.05)]
    assert rates[0] >= rates[1] >= rates[2]


def test_failed_forward_solve_is_rejected(cov):
    def misfit(q):
        if q[10] > 0.5:
            raise ForwardSolveError("singular", residual=np.inf)
        return 0.0

    ch = run_chain(PotentialSpec(misfit=misfit), cov, 0.5, 400, seed=0, store="all")
    assert np.all(ch.states[:, 10] <= 0.5)
    assert 0 < ch.acceptance_rate < 1


def test_nan_potential_raises(cov):
    calls = {"n": 0}

    def misfit(q):
        calls["n"] += 1
        return math.nan if calls["n"] == 8 else 0.0

    with pytest.raises(SamplerError) as info:
        run_chain(PotentialSpec(misfit=misfit), cov, 0.1, 50, seed=0)
    # call 1 is the initial state (step 0)
    assert info.value.step == 7
