import numpy as np
import pytest
from conftest import make_scenario

from stablespde.coefficients import ConstantDiffusion
from stablespde.errors import ModeError, ParameterError
from stablespde.jump_diagnostics import (RadialWeight, annulus_report,
                                         compensated_martingale_test, compensator_eval,
                                         extract_jumps, qv_expected_proxy, quadratic_variation,
                                         tail_ratio_test)
from stablespde.rng import PathStreams, make_generator
from stablespde.spde_solver import mild_solve
from stablespde.stable_noise import (JUMP_RESOLVED, NoisePath, annulus_mass, levy_tail_oracle,
                                     sample_noise_path)


def _jump_run(s, n_paths, seed, eps=0.05, budget=200):
    s = s.with_scheme(noise_mode=JUMP_RESOLVED, epsilon=eps, series_budget=budget)
    path = s.sample_noise(PathStreams(seed, "jd", n_paths), n_paths)
    return s, path, mild_solve(s, path)


def test_extract_jumps_applies_the_coefficient():
    g = np.array([2.0, 0.0])
    s = make_scenario(dim=2, F="zero", G=ConstantDiffusion(g), n_cells=4)
    path = NoisePath.from_jumps(1.5, 1.0, 4, [(0.2, [1.0, 1.0]), (0.7, [0.0, 3.0])])
    table = extract_jumps(mild_solve(s, path), path)
    # the second jump is annihilated by G and dropped
    assert len(table) == 1
    np.testing.assert_allclose(table.size[0], [2.0, 0.0])
    assert table.counts(1.0, 3.0).tolist() == [1]
    assert table.counts(1.0, 3.0, t=0.1).tolist() == [0]
    assert table.records()[0].time == 0.2


def test_extract_jumps_requires_jump_resolved_noise():
    s = make_scenario()
    path = s.sample_noise(make_generator(0), 2)
    with pytest.raises(ModeError):
        extract_jumps(mild_solve(s, path), path)


def test_constant_compensator_matches_oracle():
    s = make_scenario(dim=3, G="constant", n_cells=8)
    s, path, x = _jump_run(s, 3, 1)
    radii = [0.1, 0.2, 0.4, np.inf]
    comp = compensator_eval(x, s, radii)
    phi = s.G.full_matrix
    for a in range(3):
        ref = annulus_mass(phi, radii[a], radii[a + 1], s.alpha)
        np.testing.assert_allclose(comp.cells[:, -1, a], s.T * ref, rtol=1e-9)
    assert comp.unit_tail[0, 0] == pytest.approx(levy_tail_oracle(phi, 1.0, s.alpha), rel=1e-6)


def test_flow_and_left_rules_agree_on_a_frozen_state():
    s = make_scenario(dim=3, F="zero", G="sigmoid", n_cells=8)
    x = mild_solve(s, NoisePath.from_jumps(1.5, 1.0, 8, [], dim=3))
    left = compensator_eval(x, s, [0.1, 1.0], cell_rule="left")
    flow = compensator_eval(x, s, [0.1, 1.0], cell_rule="flow")
    np.testing.assert_allclose(left.cells, flow.cells, rtol=1e-12)
    with pytest.raises(ParameterError):
        compensator_eval(x, s, [0.1, 1.0], cell_rule="mid")
    with pytest.raises(ParameterError):
        compensator_eval(x, s, [1.0, 0.1])


def test_radial_constants():
    # a sharp indicator of ||h|| > r0 integrates to r0^-alpha
    sharp = RadialWeight(lambda r: (np.asarray(r) > 0.5).astype(float), 0.5)
    assert sharp.radial_constant(1.5) == pytest.approx(0.5 ** -1.5, rel=1e-8)
    smooth = RadialWeight.smooth_indicator(0.5, 1.0)
    assert 1.0 < smooth.radial_constant(1.5) < 0.5 ** -1.5
    assert smooth.scaled(2.0).radial_constant(1.5) == pytest.approx(
        2 * smooth.radial_constant(1.5))
    assert RadialWeight.zero().radial_constant(1.5) == 0.0
    with pytest.raises(ParameterError):
        RadialWeight(lambda r: np.ones_like(np.asarray(r, float)), 0.5)


def test_compensated_weights_have_zero_mean():
    s = make_scenario(dim=2, G="sigmoid", n_cells=16)
    s, path, x = _jump_run(s, 4000, 2, eps=0.02)
    comp = compensator_eval(x, s, [0.02, np.inf])
    w = RadialWeight.smooth_indicator(0.02, 0.04)
    rep = compensated_martingale_test(extract_jumps(x, path), comp, w)
    assert rep.passed, rep.rows()
    assert rep.values.shape == (4000, 5)


def test_annulus_counts_are_poisson():
    s = make_scenario(dim=2, G="constant", n_cells=8)
    s, path, x = _jump_run(s, 4000, 3, eps=0.05)
    lo = 0.05 * s.G.op_bound
    comp = compensator_eval(x, s, [lo, 2 * lo, 4 * lo, np.inf])
    rows = annulus_report(extract_jumps(x, path), comp, [0.5, 1.0])
    assert len(rows) == 6
    assert all(r["pass"] for r in rows), rows


def test_tail_ratio():
    path = sample_noise_path(1.5, 1.0, 2, 4, JUMP_RESOLVED, epsilon=0.05,
                             rng=make_generator(4), n_paths=2000, series_budget=0)
    res = tail_ratio_test(np.linalg.norm(path.jump_size, axis=1), 0.1, 1.5)
    assert res["pass"] and res["n"] > 1000
    assert tail_ratio_test(np.full(500, 0.3), 0.1, 1.5)["pass"] is False


def test_qv_of_a_pure_jump_path_is_its_jump_sum():
    s = make_scenario(dim=2, F="zero", G=ConstantDiffusion(np.array([1.0, 1.0])), n_cells=4096)
    path = NoisePath.from_jumps(1.5, 1.0, 4096, [(0.3, [0.5, 0.0]), (0.8, [0.0, 0.2])])
    x = mild_solve(s, path)
    rep = quadratic_variation(x, [0.1, 0.3], path)
    np.testing.assert_allclose(rep.jump_sums[0], [0.29, 0.25])
    # the grid-drift contribution vanishes like dt
    assert abs(rep.proxy[0, 0]) < 1e-3
    coarse = quadratic_variation(mild_solve(s.with_scheme(n_cells=256), path.coarsen(16)),
                                 [0.1], path.coarsen(16))
    assert abs(rep.proxy[0, 0]) < abs(coarse.proxy[0, 0])


def test_qv_requires_jump_record():
    s = make_scenario()
    path = s.sample_noise(make_generator(5), 2)
    x = mild_solve(s, path)
    assert np.all(quadratic_variation(x, [0.1]).jump_sums == 0)
    with pytest.raises(ModeError):
        quadratic_variation(x, [0.1], path)


def test_qv_expected_proxy():
    sv = np.array([0.25, 0.04])
    out = qv_expected_proxy(sv, 1.5, 2, 0.01, 0.0, 2.0)
    t1 = levy_tail_oracle(np.diag(np.sqrt(sv)), 1.0, 1.5, "moment")
    assert out["oracle"] == pytest.approx(2.0 * 3.0 * 0.01**0.5 * t1)
    assert out["correction"] == 0.0
    assert qv_expected_proxy(sv, 1.5, 2, 0.01, 1e-3, 2.0)["expected"] < out["expected"]
