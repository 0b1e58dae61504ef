"""Matching process construction and its reductions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import obsmatch as om
from obsmatch.errors import InsufficientTailError
from obsmatch.matching import MatchConfig, match_values

EULER_GAMMA = float(np.euler_gamma)


def test_match_config_validation():
    with pytest.raises(ValueError):
        MatchConfig(q=1, n_total=10)
    with pytest.raises(ValueError):
        MatchConfig(q=2, n_total=10, metric="manhattan")
    with pytest.raises(ValueError):
        MatchConfig(q=2, n_total=10, floor=0.0)


def test_match_values_direct_example():
    # observations 0.5, 0.3, 0.9 with q=3 give Y = -log(max(0.2, 0.4))
    y = match_values(np.array([[0.5, 0.3, 0.9]]))
    assert y[0] == pytest.approx(-math.log(0.4), rel=1e-12)


def test_match_values_identical_trajectories_clamped():
    obs = np.zeros((5, 2))
    y = match_values(obs, floor=1e-300)
    np.testing.assert_allclose(y, -math.log(1e-300))


def test_match_values_vector_metrics():
    obs = np.array([[[0.0, 0.0], [0.3, 0.4]]])
    assert match_values(obs, metric="sup")[0] == pytest.approx(-math.log(0.4))
    assert match_values(obs, metric="euclidean")[0] == pytest.approx(-math.log(0.5))


def test_match_values_permutation_of_non_reference_columns():
    rng = np.random.default_rng(0)
    obs = rng.random((64, 4))
    base = match_values(obs)
    np.testing.assert_array_equal(base, match_values(obs[:, [0, 3, 1, 2]]))
    swapped = match_values(obs[:, [2, 1, 0, 3]])  # swapping the reference may change Y
    assert swapped.shape == base.shape


def test_y_process_reproducible_and_finite():
    cfg = MatchConfig(q=3, n_total=5000, block_size=100)
    system = om.doubling_map(noise=1e-12)
    obs = om.catalog("identity")
    s1 = om.y_process(system, obs, cfg, seed=5)
    s2 = om.y_process(system, obs, cfg, seed=5)
    np.testing.assert_array_equal(s1.values, s2.values)
    assert len(s1) == 5000
    assert np.isfinite(s1.values).all()
    assert s1.subseeds == tuple((5, t) for t in range(3))


def test_y_process_same_initial_states_all_clamped():
    import dataclasses
    system = dataclasses.replace(om.doubling_map(), sampler=lambda rng: 0.3)
    cfg = MatchConfig(q=2, n_total=100, block_size=10)
    s = om.y_process(system, om.catalog("identity"), cfg, seed=0)
    np.testing.assert_allclose(s.values, -math.log(1e-300))


def test_y_process_dimension_mismatch():
    cfg = MatchConfig(q=2, n_total=100, block_size=10)
    with pytest.raises(ValueError):
        om.y_process(om.doubling_map(), om.catalog("mean"), cfg, seed=0)


def test_y_process_data_quality_error_on_nan_observations():
    import dataclasses
    from obsmatch.errors import DataQualityError
    bad = dataclasses.replace(
        om.catalog("identity"), name="sometimes_nan",
        eval_batch=lambda s: np.where(s < 0.01, np.nan, s))
    cfg = MatchConfig(q=2, n_total=20_000, block_size=100)
    with pytest.raises(DataQualityError):
        om.y_process(om.doubling_map(noise=1e-12), bad, cfg, seed=2)


def test_y_process_propagates_diverged_orbit():
    import dataclasses
    from obsmatch.errors import DivergedOrbitError
    h = dataclasses.replace(om.henon_map(), sampler=lambda rng: (2.5, 0.0))
    cfg = MatchConfig(q=2, n_total=1000, block_size=10)
    with pytest.raises(DivergedOrbitError):
        om.y_process(h, om.catalog("identity"), cfg, seed=0)


def test_block_maxima_examples():
    cfg = MatchConfig(q=2, n_total=6, block_size=3)
    series = om.MatchSeries(np.array([1.0, 5.0, 2.0, 4.0, 3.0, 0.0]), cfg, seed=0)
    np.testing.assert_array_equal(om.block_maxima(series), [5.0, 4.0])
    np.testing.assert_array_equal(om.block_maxima_of(np.full(10, 2.5), 5), [2.5, 2.5])
    # trailing partial block is dropped, never padded
    np.testing.assert_array_equal(om.block_maxima_of(np.array([1.0, 2.0, 3.0]), 2), [2.0])
    with pytest.raises(ValueError):
        om.block_maxima_of(np.array([1.0]), 5)


@pytest.mark.slow
def test_block_maxima_exponential_oracle():
    # maxima of Exp(1) blocks of 1e4 follow Gumbel(log 1e4, 1):
    # the mean converges to log(1e4) + Euler-Mascheroni
    rng = np.random.default_rng(17)
    maxima = [rng.standard_exponential((100, 10_000)).max(axis=1) for _ in range(30)]
    mean = np.concatenate(maxima).mean()
    assert mean == pytest.approx(math.log(10_000) + EULER_GAMMA, abs=0.05)


def test_threshold_for_quantile_examples():
    values = np.arange(1.0, 101.0)
    assert om.threshold_for_quantile(values, 0.99) == 99.0
    assert om.threshold_for_quantile(np.arange(1.0, 102.0), 0.5) == 51.0
    with pytest.raises(InsufficientTailError):
        om.threshold_for_quantile(np.arange(50.0), 0.999)
    with pytest.raises(ValueError):
        om.threshold_for_quantile(values, 1.1)


@pytest.mark.slow
def test_threshold_exponential_quantile_oracle():
    rng = np.random.default_rng(3)
    sample = rng.standard_exponential(1_000_000)
    u = om.threshold_for_quantile(sample, 0.999)
    assert u == pytest.approx(-math.log(0.001), abs=0.15)


def test_u_n_schedule_examples():
    assert om.u_n_schedule(1, 0.0, 1.7, 2) == 0.0
    assert om.u_n_schedule(math.e ** 2, 0.0, 1.0, 2) == pytest.approx(2.0, abs=1e-12)
    assert om.u_n_schedule(10_000, 1.0, 2.0, 3) == pytest.approx(
        (math.log(10_000) + 1.0) / 4.0)
    with pytest.raises(ValueError):
        om.u_n_schedule(10, 0.0, -1.0, 2)


@pytest.mark.slow
def test_doubling_pair_tail_scaling_oracle():
    # for Lebesgue measure, mu_2(Y_0 > u) ~ 2 e^{-u}; the log-survival is
    # affine in u with slope -1
    cfg = MatchConfig(q=2, n_total=1_000_000, block_size=10_000)
    s = om.y_process(om.doubling_map(noise=1e-12), om.catalog("identity"), cfg, seed=21)
    us = np.linspace(4.0, 8.0, 9)
    surv = np.array([(s.values > u).mean() for u in us])
    np.testing.assert_allclose(surv, 2.0 * np.exp(-us), rtol=0.15)
    slope = np.polyfit(us, np.log(surv), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.05)


def test_save_load_round_trip(tmp_path):
    values = np.random.default_rng(0).random(257)
    path = tmp_path / "series.bin"
    om.save_values(values, path)
    back = om.load_values(path)
    np.testing.assert_array_equal(values, back)
    raw = path.read_bytes()
    assert raw[:8] == b"OBSMATCH"
    assert int.from_bytes(raw[12:20], "little") == 257


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 20)
    with pytest.raises(ValueError):
        om.load_values(path)


@given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=4, max_size=128),
       st.integers(min_value=1, max_value=8))
@settings(max_examples=80)
def test_block_maxima_matches_bruteforce(values, block):
    values = np.asarray(values)
    if len(values) < block:
        return
    got = om.block_maxima_of(values, block)
    want = [max(values[i * block:(i + 1) * block]) for i in range(len(values) // block)]
    np.testing.assert_array_equal(got, want)
