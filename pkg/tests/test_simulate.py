import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uqsa.processes import CTMCSpec, DTMCSpec, SDESpec
from uqsa.rng import run_chunks, split, streams
from uqsa.simulate import (
    SimConfig, SimulationError, _categorical, acf_estimate, euler_maruyama, simulate_dtmc, ssa,
)
from uqsa.zoo import BirthDeath, OUModel, TwoStateChain


class TestRng:
    def test_split_is_contiguous_and_complete(self):
        assert split(10, 3) == [4, 3, 3]
        assert sum(split(7, 7)) == 7

    def test_streams_are_reproducible_and_distinct(self):
        a = [g.random(3) for g in streams(42, 3)]
        b = [g.random(3) for g in streams(42, 3)]
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)
        assert not np.allclose(a[0], a[1])

    def test_thread_count_does_not_matter(self):
        job = lambda rng, n, off: rng.standard_normal(n) + off
        a = np.concatenate(run_chunks(job, 101, 9, workers=5, threads=1))
        b = np.concatenate(run_chunks(job, 101, 9, workers=5, threads=5))
        np.testing.assert_array_equal(a, b)


class TestSimConfig:
    @pytest.mark.parametrize("kw", [dict(n_paths=0, horizon=1.0), dict(n_paths=1, horizon=0.0),
                                    dict(n_paths=1, horizon=1.0, dt=-1.0),
                                    dict(n_paths=1, horizon=1.0, workers=0)])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SimConfig(**kw)


class TestCategorical:
    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=6), st.floats(0.0, 0.9999999))
    def test_never_selects_zero_weight(self, w, u):
        w = np.array(w)
        if w.sum() <= 0:
            return
        k = _categorical(np.cumsum(w)[None, :], np.array([u]))[0]
        assert w[k] > 0


class TestDTMC:
    def test_occupation_matches_stationary(self):
        chain = TwoStateChain(0.1, 0.2).dtmc()
        ens = simulate_dtmc(chain, SimConfig(400, 500, seed=3))
        occ = ens.time_averages(lambda x: x[..., 0])
        assert abs(occ.mean() - 1.0 / 3.0) < 4 * occ.std(ddof=1) / math.sqrt(occ.size)

    def test_absorbing_state_is_never_left(self):
        p = np.array([[1.0, 0.0], [0.5, 0.5]])
        ens = simulate_dtmc(DTMCSpec(p, initial=[1.0, 0.0]), SimConfig(20, 50, burn_in=0, seed=1))
        assert np.all(ens.states == 0)

    def test_worker_layout_is_replayable(self):
        chain = TwoStateChain().dtmc()
        cfg = SimConfig(30, 40, seed=8, workers=3, threads=1)
        a = simulate_dtmc(chain, cfg).states
        b = simulate_dtmc(chain, SimConfig(30, 40, seed=8, workers=3, threads=3)).states
        np.testing.assert_array_equal(a, b)


class TestSSA:
    def test_birth_death_mean(self):
        spec = BirthDeath(2.0, 1.0).ctmc()
        ens = ssa(spec, SimConfig(300, 50.0, seed=4))
        avg = ens.time_averages(lambda x: x[..., 0])
        assert abs(avg.mean() - 2.0) < 4 * avg.std(ddof=1) / math.sqrt(avg.size)

    def test_event_times_start_at_zero_and_increase(self):
        ens = ssa(BirthDeath().ctmc(), SimConfig(20, 10.0, seed=1))
        for t in ens.times:
            assert t[0] == 0.0
            assert np.all(np.diff(t) > 0)
            assert t[-1] <= 10.0

    def test_rate_guard(self):
        rates = np.array([[0.0, 1e13], [1.0, 0.0]])
        with pytest.raises(SimulationError):
            ssa(CTMCSpec(rates), SimConfig(2, 1.0, burn_in=0))

    def test_on_grid_holds_state(self):
        ens = ssa(BirthDeath().ctmc(), SimConfig(5, 5.0, seed=2))
        grid, states = ens.on_grid(0.5)
        assert grid.size == 11
        for i in range(5):
            t, s = ens.times[i], ens.states[i]
            for g, x in zip(grid, states[i]):
                assert x == s[np.searchsorted(t, g, side="right") - 1]


class TestEuler:
    def test_stationary_variance_of_euler_chain(self):
        # the Euler chain's own stationary variance is gamma^2 / (alpha (2 - alpha dt))
        dt = 0.1
        ens = euler_maruyama(OUModel().sde(), SimConfig(2000, 20.0, dt=dt, seed=6))
        v = ens.states[:, -1, 0].var(ddof=1)
        target = 1.0 / (2.0 - dt)
        assert abs(v - target) < 4 * target * math.sqrt(2.0 / 1999)

    @pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
    def test_blow_up_is_reported(self):
        sde = SDESpec(lambda x: x ** 3, np.array([[1.0]]), 1)
        with pytest.raises(SimulationError):
            euler_maruyama(sde, SimConfig(10, 5.0, dt=0.5, burn_in=0, seed=0), x0=[3.0])

    def test_deterministic_for_fixed_seed(self):
        cfg = SimConfig(8, 1.0, dt=0.01, seed=12, workers=2)
        a = euler_maruyama(OUModel().sde(), cfg).states
        b = euler_maruyama(OUModel().sde(), cfg).states
        np.testing.assert_array_equal(a, b)


class TestACF:
    def test_euler_autocovariance_decay(self):
        dt = 0.05
        ens = euler_maruyama(OUModel().sde(), SimConfig(400, 40.0, dt=dt, seed=7))
        acf = acf_estimate(ens, lambda x: x[..., 0], 40)
        var = 1.0 / (2.0 - dt)
        expected = var * (1.0 - dt) ** np.arange(41)
        assert np.all(np.abs(acf.values - expected) < 5 * acf.stderr + 0.02)

    def test_lag_must_fit(self):
        ens = euler_maruyama(OUModel().sde(), SimConfig(4, 1.0, dt=0.1, seed=1))
        with pytest.raises(ValueError):
            acf_estimate(ens, lambda x: x[..., 0], 11)

    def test_jump_ensemble_needs_grid(self):
        ens = ssa(BirthDeath().ctmc(), SimConfig(3, 2.0, seed=1))
        with pytest.raises(ValueError):
            acf_estimate(ens, lambda x: x[..., 0], 2)

    def test_drift_is_flagged(self):
        sde = SDESpec(lambda x: np.ones_like(x), np.array([[0.1]]), 1)
        ens = euler_maruyama(sde, SimConfig(50, 5.0, dt=0.05, burn_in=0, seed=2), x0=[0.0])
        with pytest.warns(RuntimeWarning):
            acf = acf_estimate(ens, lambda x: x[..., 0], 5)
        assert acf.nonstationary
