import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from stablespde.errors import GridError, ModeError, ParameterError
from stablespde.hilbert import HSOperator
from stablespde.rng import PathStreams, make_generator
from stablespde.stable_noise import (JUMP_RESOLVED, NoisePath, StableConstants,
                                     increment_characteristic_check, isotropic_tail_mass,
                                     levy_tail_oracle, sample_isotropic_increment,
                                     sample_noise_path, sample_positive_stable, sample_sas_1d,
                                     truncated_moment_integrals, truncated_moments_closed_form,
                                     unit_tail_from_operators)
from stablespde.stable_noise.oracle import isotropic_tail_mass_by_bessel

alphas = st.floats(1.05, 1.95)


def test_sas_degenerate_scale():
    g = make_generator(1, "sas")
    assert sample_sas_1d(1.5, 0.0, g) == 0.0
    assert np.all(sample_sas_1d(1.5, 0.0, g, size=10) == 0.0)


def test_sas_characteristic_function_at_one():
    x = sample_sas_1d(1.5, 1.0, make_generator(2, "sas"), size=1_000_000)
    c = np.cos(x)
    se = c.std() / np.sqrt(c.size)
    assert abs(c.mean() - np.exp(-1.0)) < 3 * se


def test_sas_matches_scipy_quantiles():
    # scipy's levy_stable with beta=0 has characteristic function exp(-|scale s|^alpha)
    x = sample_sas_1d(1.3, 2.0, make_generator(3, "sas"), size=200_000)
    for q in (0.1, 0.25, 0.75, 0.9):
        ref = stats.levy_stable.ppf(q, 1.3, 0.0, scale=2.0)
        k = np.sum(x <= ref)
        lo, hi = stats.binom.interval(0.999, x.size, q)
        assert lo <= k <= hi


def test_sas_symmetry():
    x = sample_sas_1d(1.7, 1.0, make_generator(4, "sas"), size=100_000)
    k = np.sum(x > 0)
    assert stats.binomtest(int(k), x.size).pvalue > 1e-3


@pytest.mark.parametrize("alpha", [1.0, 2.0, 0.5])
def test_alpha_range_enforced(alpha):
    with pytest.raises(ParameterError):
        sample_sas_1d(alpha, 1.0, make_generator(0))


def test_positive_stable_laplace_transform():
    a = sample_positive_stable(0.75, make_generator(5, "ps"), size=400_000)
    assert np.all(a > 0)
    for u in (0.5, 1.0, 2.0):
        e = np.exp(-u * a)
        assert abs(e.mean() - np.exp(-u**0.75)) < 4 * e.std() / np.sqrt(a.size)


@pytest.mark.parametrize("alpha,dim", [(1.2, 2), (1.8, 8)])
def test_isotropic_increment_ecf(alpha, dim):
    rows = increment_characteristic_check(alpha, dim, make_generator(6, alpha, dim),
                                          n_samples=200_000, dt=0.3)
    assert len(rows) == 10
    # ten correlated probes at 3 SE; allow at most one excursion
    assert sum(not r["pass"] for r in rows) <= 1


def test_isotropic_increment_shapes():
    g = make_generator(7)
    assert sample_isotropic_increment(1.5, 0.1, 3, g).shape == (3,)
    assert sample_isotropic_increment(1.5, 0.1, 3, g, size=(4, 5)).shape == (4, 5, 3)
    with pytest.raises(ParameterError):
        sample_isotropic_increment(1.5, 0.0, 3, g)


@pytest.mark.parametrize("alpha,dim", [(1.2, 1), (1.5, 3), (1.8, 8)])
def test_tail_mass_two_routes(alpha, dim):
    # the Bessel route drops an oscillating tail of order 400^(-alpha-(dim+1)/2)
    assert isotropic_tail_mass(alpha, dim) == pytest.approx(
        isotropic_tail_mass_by_bessel(alpha, dim), rel=2e-6)


def test_tail_mass_one_dimension_closed_form():
    # |X| of a 1-d SaS law: tail constant Gamma(alpha) sin(pi alpha / 2) / pi, two sides
    from scipy.special import gamma
    for alpha in (1.2, 1.5, 1.8):
        ref = 2 * gamma(alpha) * np.sin(np.pi * alpha / 2) / np.pi
        assert isotropic_tail_mass(alpha, 1) == pytest.approx(ref, rel=1e-8)


@settings(max_examples=8, deadline=None)
@given(alphas, st.floats(0.05, 20.0), st.integers(0, 2**31))
def test_oracle_scaling(alpha, r, seed):
    phi = make_generator(seed).standard_normal((2, 3))
    t1 = levy_tail_oracle(phi, 1.0, alpha)
    assert levy_tail_oracle(phi, r, alpha) == pytest.approx(r**-alpha * t1, rel=1e-6)


@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
def test_oracle_routes_agree(alpha):
    phi = make_generator(11).standard_normal((5, 5))
    assert levy_tail_oracle(phi, 0.7, alpha, "subordination") == pytest.approx(
        levy_tail_oracle(phi, 0.7, alpha, "moment"), rel=1e-6)


def test_oracle_identity_is_isotropic_mass():
    for d in (1, 4):
        assert levy_tail_oracle(np.eye(d), 1.0, 1.5) == pytest.approx(
            isotropic_tail_mass(1.5, d), rel=1e-7)


def test_oracle_depends_on_singular_values_only():
    g = make_generator(12)
    phi = g.standard_normal((4, 4))
    q, _ = np.linalg.qr(g.standard_normal((4, 4)))
    assert levy_tail_oracle(q @ phi, 1.0, 1.4) == pytest.approx(
        levy_tail_oracle(phi, 1.0, 1.4), rel=1e-9)
    np.testing.assert_allclose(unit_tail_from_operators(np.stack([phi, q @ phi]), 1.4),
                               levy_tail_oracle(phi, 1.0, 1.4, "moment"), rtol=1e-8)


def test_oracle_zero_operator_and_bad_radius():
    assert levy_tail_oracle(np.zeros((2, 2)), 1.0, 1.5) == 0.0
    with pytest.raises(ParameterError):
        levy_tail_oracle(np.eye(2), 0.0, 1.5)


@pytest.mark.parametrize("m", [1, 2, 10, 100])
def test_truncated_moments_quadrature_matches_closed_form(m):
    phi = HSOperator(make_generator(13).standard_normal((3, 3)))
    q = truncated_moment_integrals(phi, m, 1.5)
    c = truncated_moments_closed_form(phi, m, 1.5)
    np.testing.assert_allclose(q, c, rtol=1e-6)


def test_constants_family():
    c = StableConstants.for_alpha(1.5)
    assert c.d_alpha(1) == pytest.approx(2 * c.c_alpha)
    d = c.d_alpha(np.arange(2, 2000))
    assert np.all(np.diff(d) < 0)
    assert c.d_alpha(1e12) < 1e-5 * c.d_alpha(1)
    with pytest.raises(ParameterError):
        c.d_alpha(0.5)
    assert c.c_alpha_record.value == c.c_alpha


def test_constants_bound_the_truncated_moments():
    c = StableConstants.for_alpha(1.5)
    g = make_generator(14)
    for _ in range(10):
        phi = HSOperator(g.standard_normal((4, 4)))
        for m in (1, 2, 5, 10):
            assert sum(truncated_moment_integrals(phi, m, 1.5, "moment")) <= \
                c.d_alpha(m) * phi.hs_norm**1.5


def test_e_p_alpha():
    from stablespde.stable_noise import Provenance
    c = StableConstants.for_alpha(1.5)
    with pytest.raises(ParameterError):
        c.e_p_alpha(1.0)
    c = c.with_e2(Provenance(2.0, "test"))
    assert c.e_p_alpha(1.0) == pytest.approx(1.5 / 0.5 * 2.0 ** (1 / 1.5))
    with pytest.raises(ParameterError):
        c.e_p_alpha(1.5)


def test_jump_resolved_path_invariants():
    path = sample_noise_path(1.5, 1.0, 3, 32, JUMP_RESOLVED, epsilon=0.2,
                             rng=make_generator(15), n_paths=50, series_budget=100)
    off = path.jump_offsets
    assert off[-1] == path.jump_time.size
    for i in range(path.n_paths):
        t, v = path.jumps_of(i)
        assert np.all(np.diff(t) > 0)
        assert np.all((t > 0) & (t <= 1.0))
        assert np.all(np.linalg.norm(v, axis=1) > 0.2)
    # residual jumps stay below the listing level
    assert path.series_floor < 0.2
    total = path.cell_increments().sum(axis=1)
    np.testing.assert_allclose(path.values()[:, -1], total, atol=1e-12)


def test_jump_count_mean():
    alpha, d, eps, T = 1.5, 2, 0.3, 2.0
    path = sample_noise_path(alpha, T, d, 4, JUMP_RESOLVED, epsilon=eps,
                             rng=make_generator(16), n_paths=20_000, series_budget=0)
    counts = np.diff(path.jump_offsets)
    lam = T * isotropic_tail_mass(alpha, d) * eps**-alpha
    assert abs(counts.mean() - lam) < 4 * np.sqrt(lam / counts.size)


def test_reproducible_from_seed():
    kw = dict(mode=JUMP_RESOLVED, epsilon=0.1, n_paths=7, series_budget=50)
    a = sample_noise_path(1.5, 1.0, 2, 16, rng=PathStreams(99, "t", 7), **kw)
    b = sample_noise_path(1.5, 1.0, 2, 16, rng=PathStreams(99, "t", 7), **kw)
    np.testing.assert_array_equal(a.jump_size, b.jump_size)
    np.testing.assert_array_equal(a.residual, b.residual)
    assert a.seed_record == b.seed_record


def test_coarsen_preserves_values():
    path = sample_noise_path(1.5, 1.0, 2, 16, rng=make_generator(17), n_paths=3)
    c = path.coarsen(4)
    np.testing.assert_allclose(c.values(), path.values()[:, ::4], atol=1e-12)
    with pytest.raises(GridError):
        path.coarsen(3)
    with pytest.raises(ModeError):
        path.jump_offsets


def test_select_reindexes_jumps():
    path = sample_noise_path(1.5, 1.0, 2, 8, JUMP_RESOLVED, epsilon=0.2,
                             rng=make_generator(18), n_paths=10, series_budget=10)
    sub = path.select([7, 2])
    for new, old in ((0, 7), (1, 2)):
        np.testing.assert_array_equal(sub.jumps_of(new)[1], path.jumps_of(old)[1])


def test_from_jumps():
    p = NoisePath.from_jumps(1.5, 1.0, 4, [(0.6, [1.0, 0.0]), (0.1, [0.0, 2.0])])
    np.testing.assert_array_equal(p.jump_time, [0.1, 0.6])
    np.testing.assert_array_equal(p.jump_cells(), [0, 2])
    np.testing.assert_allclose(p.values()[0, -1], [1.0, 2.0])
    with pytest.raises(ParameterError):
        NoisePath.from_jumps(1.5, 1.0, 4, [(0.0, [1.0])])
