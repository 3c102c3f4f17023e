"""Walk-kernel tests against exact-rational and high-precision oracles."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pamlab.errors import CoverageError
from pamlab.kernels import (EXACT_N_MAX, discrete_kernel, kernel_table,
                            poisson_tail, ratio_extremes,
                            subgaussian_offbox_mass)

# Frozen oracle values for the continuous-time kernel at t = 1, d = 3,
# computed from the d-dimensional Poisson-mixture series with exact-rational
# discrete kernels and 50-digit arithmetic (40 series terms, remainder
# certified < 1e-40).
ORACLE_T1_D3 = {
    (0, 0, 0): 0.3996211416146254,
    (1, 0, 0): 0.06569528421399198,
    (2, 1, 0): 0.0008958541760407877,
}


def test_discrete_kernel_exact_values():
    k1 = discrete_kernel(1, 4)
    assert k1.exact
    assert k1.prob((0,)) == Fraction(3, 8)
    assert k1.prob((2,)) == Fraction(4, 16)
    assert k1.prob((4,)) == Fraction(1, 16)
    k3 = discrete_kernel(3, 2)
    assert k3.prob((0, 0, 0)) == Fraction(1, 6)
    assert k3.prob((1, 1, 0)) == Fraction(2, 36)


def test_discrete_kernel_total_mass_exact():
    for dim, n in [(1, 0), (1, 7), (2, 5), (3, 4)]:
        assert discrete_kernel(dim, n).total() == 1


def test_discrete_kernel_parity_support():
    k = discrete_kernel(2, 5)
    for site, p in k.values.items():
        assert (abs(site[0]) + abs(site[1])) % 2 == 5 % 2
        assert p > 0


def test_discrete_kernel_symmetry():
    k = discrete_kernel(3, 6)
    for site, p in k.values.items():
        mirrored = tuple(-c for c in site)
        assert k.prob(mirrored) == p
        assert k.prob(site[::-1]) == p


def test_discrete_kernel_float_mode_matches_exact():
    exact = discrete_kernel(2, 12, exact=True)
    approx = discrete_kernel(2, 12, exact=False)
    assert not approx.exact
    for site, p in exact.values.items():
        assert approx.prob(site) == pytest.approx(float(p), abs=1e-15)


def test_exact_mode_switches_at_threshold():
    assert discrete_kernel(1, EXACT_N_MAX).exact
    assert not discrete_kernel(1, EXACT_N_MAX + 1).exact


@settings(max_examples=25, deadline=None)
@given(dim=st.integers(1, 3), n=st.integers(0, 8))
def test_discrete_kernel_mass_property(dim, n):
    assert discrete_kernel(dim, n).total() == 1


def test_oracle_regeneration_from_first_principles():
    # recompute the frozen oracle with high-precision arithmetic straight
    # from the Poisson-mixture definition over d-dimensional exact kernels
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 50
    n_terms = 26
    kernels = [discrete_kernel(3, n, exact=True) for n in range(n_terms)]
    # Poisson tail of the dropped terms bounds the remainder
    tail = mp.mpf(1) - sum(mp.e ** -1 / mp.factorial(n)
                           for n in range(n_terms))
    assert float(tail) < 1e-26
    for site, frozen in ORACLE_T1_D3.items():
        total = mp.mpf(0)
        for n, kern in enumerate(kernels):
            q = kern.prob(site)
            if q:
                total += mp.e ** -1 / mp.factorial(n) * mp.mpf(
                    q.numerator) / q.denominator
        assert float(total) == pytest.approx(frozen, abs=1e-15)


def test_kernel_table_against_series_oracle():
    table = kernel_table(3, 1.0, 8, series_tol=1e-16)
    for site, p in ORACLE_T1_D3.items():
        assert table.prob(site) == pytest.approx(p, abs=1e-15)
    assert table.tail_bound < 1e-10
    assert table.series_remainder < 1e-15


def test_kernel_table_at_time_zero():
    table = kernel_table(3, 0.0, 3)
    assert table.prob((0, 0, 0)) == 1.0
    assert table.total() == 1.0


def test_kernel_table_symmetry_and_mass():
    table = kernel_table(3, 2.5, 10)
    v = table.values
    for axis in range(3):
        assert np.array_equal(v, np.flip(v, axis=axis))
    assert np.array_equal(v, v.transpose(1, 0, 2))
    assert table.total() <= 1.0 + 1e-12
    assert table.total() == pytest.approx(1.0, abs=table.tail_bound)


def test_kernel_table_tail_decreases_with_radius():
    tails = [kernel_table(3, 4.0, r).tail_bound for r in (6, 10, 14)]
    assert tails[0] > tails[1] > tails[2]


def test_chapman_kolmogorov_continuous_time():
    # p_{s+t} = p_s * p_t as a lattice convolution, checked on the center
    t1, t2, r = 1.0, 1.5, 14
    a = kernel_table(3, t1, r).values
    b = kernel_table(3, t2, r).values
    from scipy.signal import fftconvolve
    conv = fftconvolve(a, b, mode="same")
    direct = kernel_table(3, t1 + t2, r).values
    center = (slice(r - 3, r + 4),) * 3
    assert np.max(np.abs(conv[center] - direct[center])) < 1e-12


def test_poisson_tail_monotone():
    assert poisson_tail(5, 2.0) > poisson_tail(8, 2.0) > poisson_tail(20, 2.0)
    assert poisson_tail(3, 0.0) == 0.0


def test_ratio_extremes_reciprocity():
    e1, origin = (1, 0, 0), (0, 0, 0)
    fwd = ratio_extremes(3, 4.0, 0.7, e1, origin, radius=10)
    rev = ratio_extremes(3, 4.0, 0.7, origin, e1, radius=10)
    assert fwd.sup_ratio == pytest.approx(1.0 / rev.inf_ratio, rel=1e-12)
    assert fwd.inf_ratio == pytest.approx(1.0 / rev.sup_ratio, rel=1e-12)
    assert fwd.inf_ratio <= 1.0 <= fwd.sup_ratio


def test_ratio_extremes_identical_endpoints():
    ext = ratio_extremes(3, 4.0, 0.7, (1, 0, 0), (1, 0, 0), radius=8)
    assert ext.inf_ratio == 1.0 and ext.sup_ratio == 1.0


def test_ratio_extremes_coverage_error():
    with pytest.raises(CoverageError):
        ratio_extremes(3, 100.0, 0.9, (1, 0, 0), (0, 0, 0), radius=5)


def test_subgaussian_offbox_mass_bounds_true_mass():
    # certified upper bound must dominate the actual off-box probability
    for n in (4, 9):
        k = discrete_kernel(3, n, exact=False)
        for r in (2, 3):
            outside = sum(p for site, p in k.values.items()
                          if max(abs(c) for c in site) > r)
            assert outside <= subgaussian_offbox_mass(3, n, r) + 1e-15
    assert subgaussian_offbox_mass(3, 0, 1) == 0.0
    assert subgaussian_offbox_mass(3, 100, 1) <= 1.0
