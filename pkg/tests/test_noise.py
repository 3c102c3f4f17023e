"""Determinism, extension stability, and distributional checks for the
counter-based noise environment."""

import numpy as np
import pytest

from pamlab.errors import CoverageError
from pamlab.noise import NoiseField, moment_selftest


def make(radius=6, t_start=-2.0, t_end=2.0, seed=123, **kw):
    return NoiseField(3, radius, t_start, t_end, 0.05, seed, **kw)


def test_increments_deterministic():
    a = make().increment_block(7, 4)
    b = make().increment_block(7, 4)
    assert np.array_equal(a, b)


def test_box_enlargement_preserves_values():
    small = make(radius=4).increment_block(3, 4)
    big = make(radius=12).increment_block(3, 12)
    center = (slice(8, 17),) * 3
    assert np.array_equal(big[center], small)


def test_window_enlargement_preserves_values():
    short = make(t_end=1.0).increment_block(5, 4)
    long = make(t_end=40.0, t_start=-40.0).increment_block(5, 4)
    assert np.array_equal(short, long)


def test_realizations_differ():
    a = make().increment_block(0, 4)
    b = make(realization_index=1).increment_block(0, 4)
    assert not np.allclose(a, b)


def test_seeds_differ():
    a = make(seed=1).increment_block(0, 4)
    b = make(seed=2).increment_block(0, 4)
    assert not np.allclose(a, b)


def test_increments_at_matches_block():
    nf = make()
    block = nf.increment_block(-3, 5)
    sites = np.array([[0, 0, 0], [1, -2, 3], [-5, 5, 0]])
    vals = nf.increments_at(sites, -3)
    for site, v in zip(sites, vals):
        assert block[tuple(site + 5)] == v


def test_path_anchored_at_zero():
    nf = make()
    assert nf.path_value((1, 2, 0), 0.0) == 0.0


def test_path_value_increment_telescoping():
    nf = make()
    x = (2, -1, 0)
    # omega(x, t2) - omega(x, t1) equals the sum of increments in between
    inc = sum(nf.increment(x, j) for j in range(10, 20))
    assert nf.path_value(x, 1.0) - nf.path_value(x, 0.5) == pytest.approx(
        inc, rel=1e-12)


def test_negative_time_consistency():
    nf = make()
    x = (0, 0, 1)
    assert nf.path_value(x, -0.5) == pytest.approx(
        -sum(nf.increment(x, j) for j in range(-10, 0)), rel=1e-12)


def test_wiener_shift_relabels_increments():
    nf = make()
    shifted = nf.wiener_shift(0.5)  # 10 grid steps
    x = (1, 1, -2)
    for j in (-5, 0, 7):
        assert shifted.increment(x, j) == nf.increment(x, j + 10)


def test_wiener_shift_group_law():
    nf = make()
    back = nf.wiener_shift(0.75).wiener_shift(-0.75)
    assert back == nf
    twice = nf.wiener_shift(0.25).wiener_shift(0.5)
    assert twice == nf.wiener_shift(0.75)


def test_shift_reanchors_at_zero():
    shifted = make().wiener_shift(1.0)
    assert shifted.path_value((3, 0, 0), 0.0) == 0.0


def test_off_grid_time_rejected():
    nf = make()
    with pytest.raises(CoverageError):
        nf.grid_index(0.512)
    with pytest.raises(CoverageError):
        nf.path_value((0, 0, 0), 100.0)


def test_out_of_box_site_rejected():
    nf = make(radius=3)
    with pytest.raises(CoverageError):
        nf.increment((4, 0, 0), 0)
    with pytest.raises(CoverageError):
        nf.increment_block(0, 5)


def test_window_must_contain_zero():
    with pytest.raises(ValueError):
        NoiseField(3, 4, 1.0, 2.0, 0.05, 0)


def test_moments_and_distribution():
    stats = moment_selftest(make(radius=8, t_start=-4.0, t_end=4.0),
                            n_samples=200_000)
    assert abs(stats["mean"]) < 3 * np.sqrt(0.05 / stats["n_samples"])
    assert stats["variance"] == pytest.approx(0.05, rel=0.02)
    assert stats["ks_pvalue"] > 1e-4


def test_increment_correlations_vanish():
    nf = make(radius=8, t_start=-4.0, t_end=4.0)
    a = nf.increment_block(0, 8).ravel()
    b = nf.increment_block(1, 8).ravel()
    corr = np.corrcoef(a, b)[0, 1]
    assert abs(corr) < 4.0 / np.sqrt(len(a))
