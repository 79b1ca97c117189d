"""Tests for Poisson simulation by thinning and martingale bookkeeping."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import chisquare

from spikefield.errors import DomainError
from spikefield.pointproc import (
    CompensatedStream,
    HomogeneousRate,
    SinusoidRate,
    SpikeData,
    VonMisesRate,
    fourth_moment_oracle,
    simulate_poisson,
)
from spikefield.signals import LinearPhase
from spikefield.specfun import bessel_i


class TestIntensityModels:
    def test_homogeneous(self):
        m = HomogeneousRate(20.0)
        assert np.all(m.rate(np.linspace(0, 5, 7)) == 20.0)
        assert m.max_rate() == 20.0

    def test_vonmises_bounds(self):
        m = VonMisesRate(20.0, 0.5, 0.0, LinearPhase(1.0, 5.0))
        t = np.linspace(0, 5, 1001)
        r = m.rate(t)
        assert np.all(r >= 0.0)
        assert np.all(r <= m.max_rate() + 1e-9)
        assert m.max_rate() == pytest.approx(20.0 * math.exp(0.5))

    def test_vonmises_phase_derivative_factor(self):
        base = VonMisesRate(20.0, 0.5, 0.0, LinearPhase(2.0, 5.0))
        with_der = VonMisesRate(20.0, 0.5, 0.0, LinearPhase(2.0, 5.0),
                                include_phase_derivative=True)
        t = np.array([0.3, 1.7])
        assert np.allclose(with_der.rate(t), base.rate(t) * 4 * math.pi)

    def test_sinusoid_nonnegative(self):
        m = SinusoidRate(30.0, 0.3, 1, 0.0, 1.0)
        t = np.linspace(0, 1, 1001)
        assert np.all(m.rate(t) >= 0.0)
        assert m.max_rate() == pytest.approx(39.0)

    def test_rejects_bad_params(self):
        with pytest.raises(DomainError):
            HomogeneousRate(0.0)
        with pytest.raises(DomainError):
            VonMisesRate(20.0, -0.1, 0.0, LinearPhase(1.0, 5.0))
        with pytest.raises(DomainError):
            SinusoidRate(30.0, 1.5, 1, 0.0, 1.0)
        with pytest.raises(DomainError):
            SinusoidRate(30.0, 0.3, 0, 0.0, 1.0)


class TestSimulatePoisson:
    def test_homogeneous_mean_count(self):
        rng = np.random.default_rng(10)
        sd = simulate_poisson(HomogeneousRate(20.0), window=5.0, trials=2000, rng=rng)
        counts = sd.counts()[0]
        se = math.sqrt(100.0 / 2000)
        assert abs(counts.mean() - 100.0) < 3 * se

    def test_vonmises_mean_count_matches_bessel(self):
        # Integer cycles: expected count per trial is rate0 * T * I0(kappa).
        rng = np.random.default_rng(11)
        model = VonMisesRate(20.0, 0.5, 0.0, LinearPhase(1.0, 5.0))
        sd = simulate_poisson(model, window=5.0, trials=2000, rng=rng)
        counts = sd.counts()[0]
        target = 20.0 * 5.0 * bessel_i(0, 0.5)
        se = math.sqrt(target / 2000)
        assert abs(counts.mean() - target) < 3 * se
        # Poisson equidispersion: variance matches the mean.
        se_var = math.sqrt((target + 2 * target**2) / 2000)
        assert abs(counts.var(ddof=1) - target) < 3 * se_var

    def test_sinusoid_mean_count(self):
        rng = np.random.default_rng(12)
        model = SinusoidRate(30.0, 0.3, 1, 0.0, 1.0)
        sd = simulate_poisson(model, window=1.0, trials=2000, rng=rng)
        counts = sd.counts()[0]
        se = math.sqrt(30.0 / 2000)
        assert abs(counts.mean() - 30.0) < 3 * se

    def test_time_marginal_histogram(self):
        # Event-time histogram proportional to the rate (chi-square, 20 bins).
        rng = np.random.default_rng(13)
        model = VonMisesRate(20.0, 1.0, 0.0, LinearPhase(1.0, 1.0))
        trials = int(math.ceil(100_000 / (20.0 * bessel_i(0, 1.0))))
        sd = simulate_poisson(model, window=1.0, trials=trials, rng=rng)
        times = sd.unit_times(0)
        assert len(times) > 90_000
        edges = np.linspace(0.0, 1.0, 21)
        observed, _ = np.histogram(times, bins=edges)
        probs = np.array([
            quad(lambda t: model.rate(np.array([t]))[0], a, b)[0] for a, b in zip(edges, edges[1:])
        ])
        probs /= probs.sum()
        stat, p = chisquare(observed, f_exp=probs * observed.sum())
        assert p > 0.001

    def test_trials_sorted_and_in_window(self):
        rng = np.random.default_rng(14)
        sd = simulate_poisson(HomogeneousRate(50.0), window=2.0, trials=100, rng=rng)
        sd.validate()

    def test_reproducible(self):
        model = VonMisesRate(20.0, 0.5, 0.3, LinearPhase(1.0, 5.0))
        a = simulate_poisson(model, 5.0, 50, np.random.default_rng(99))
        b = simulate_poisson(model, 5.0, 50, np.random.default_rng(99))
        assert all(np.array_equal(x, y) for x, y in zip(a.trains[0], b.trains[0]))

    def test_rejects_zero_trials(self):
        with pytest.raises(DomainError):
            simulate_poisson(HomogeneousRate(20.0), 5.0, 0, np.random.default_rng(0))


class TestSpikeData:
    def test_counts_shape(self):
        sd = SpikeData(window=1.0, trains=[[np.array([0.1]), np.array([])],
                                           [np.array([0.2, 0.5]), np.array([0.9])]])
        assert sd.n_units == 2 and sd.n_trials == 2
        assert sd.counts().tolist() == [[1, 0], [2, 1]]

    def test_validate_rejects_unsorted(self):
        sd = SpikeData(window=1.0, trains=[[np.array([0.5, 0.2])]])
        with pytest.raises(DomainError):
            sd.validate()

    def test_validate_rejects_out_of_window(self):
        sd = SpikeData(window=1.0, trains=[[np.array([0.5, 1.2])]])
        with pytest.raises(DomainError):
            sd.validate()

    def test_ragged_trials_rejected(self):
        with pytest.raises(DomainError):
            SpikeData(window=1.0, trains=[[np.array([0.1])], [np.array([0.1]), np.array([])]])


class TestCompensatedStream:
    def test_empty_trial_pure_compensator(self):
        cs = CompensatedStream(np.empty(0), rate=20.0, window=5.0)
        assert cs.integral(lambda t: np.ones_like(t)) == pytest.approx(-100.0)

    def test_zero_mean_over_trials(self):
        rng = np.random.default_rng(20)
        sd = simulate_poisson(HomogeneousRate(20.0), window=5.0, trials=2000, rng=rng)
        one = lambda t: np.ones_like(t)
        vals = np.array([
            CompensatedStream(t, rate=20.0, window=5.0).integral(one) for t in sd.trains[0]
        ])
        se = math.sqrt(100.0 / 2000)  # Var of integral is rate*T = 100
        assert abs(vals.mean()) < 3 * se
        assert abs(vals.var(ddof=1) - 100.0) < 0.05 * 100.0

    def test_exposed_pieces(self):
        cs = CompensatedStream(np.array([0.25, 0.5]), rate=4.0, window=1.0)
        f = lambda t: t
        assert cs.jump_sum(f) == pytest.approx(0.75)
        assert cs.compensator(f) == pytest.approx(2.0, abs=1e-9)
        assert cs.integral(f) == pytest.approx(0.75 - 2.0, abs=1e-9)

    def test_rejects_negative_rate(self):
        with pytest.raises(DomainError):
            CompensatedStream(np.array([0.5]), rate=lambda t: -np.ones_like(t), window=1.0)


class TestFourthMomentOracle:
    def test_constant_integrands(self):
        one = lambda t: np.ones_like(t)
        lam = 20.0 * 1.0
        val = fourth_moment_oracle(one, one, one, one, rate=20.0, horizon=1.0)
        assert val == pytest.approx(lam + 3 * lam**2, rel=1e-10)

    def test_zero_integrand(self):
        zero = lambda t: np.zeros_like(t)
        one = lambda t: np.ones_like(t)
        assert fourth_moment_oracle(zero, one, one, one, rate=20.0, horizon=1.0) == 0.0

    def test_array_inputs_and_grid_mismatch(self):
        grid_points = 101
        t = np.linspace(0, 1.0, grid_points)
        val = fourth_moment_oracle(np.ones(grid_points), np.ones(grid_points),
                                   np.ones(grid_points), np.ones(grid_points),
                                   rate=5.0, horizon=1.0, grid_points=grid_points)
        assert val == pytest.approx(5.0 + 3 * 25.0, rel=1e-9)
        with pytest.raises(DomainError):
            fourth_moment_oracle(np.ones(50), np.ones(grid_points), np.ones(grid_points),
                                 np.ones(grid_points), rate=5.0, horizon=1.0,
                                 grid_points=grid_points)

    def test_against_monte_carlo_trig(self):
        # E[W^2 Y^2] for W = int cos dM, Y = int sin dM, homogeneous rate.
        rate0, window, n_trials = 20.0, 1.0, 20_000
        cos_f = lambda t: np.cos(2 * math.pi * t / window)
        sin_f = lambda t: np.sin(2 * math.pi * t / window)
        predicted = fourth_moment_oracle(cos_f, cos_f, sin_f, sin_f, rate=rate0, horizon=window)
        rng = np.random.default_rng(21)
        sd = simulate_poisson(HomogeneousRate(rate0), window, n_trials, rng)
        comp_cos = rate0 * quad(cos_f, 0, window)[0]
        comp_sin = rate0 * quad(sin_f, 0, window)[0]
        samples = np.empty(n_trials)
        for i, t in enumerate(sd.trains[0]):
            w = np.sum(cos_f(t)) - comp_cos
            y = np.sum(sin_f(t)) - comp_sin
            samples[i] = w * w * y * y
        se = samples.std(ddof=1) / math.sqrt(n_trials)
        assert abs(samples.mean() - predicted) < 3 * se
