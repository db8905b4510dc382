import numpy as np
import pytest
from conftest import make_scenario

from stablespde.coefficients import ConstantDiffusion, ConstantDrift
from stablespde.errors import ConfigError, ParameterError
from stablespde.rng import PathStreams, make_generator
from stablespde.spde_solver import (InitialLaw, Scheme, convergence_study, mild_solve,
                                    refinement_study, yosida_solve)
from stablespde.stable_noise import NoisePath


def test_deterministic_flow_is_the_semigroup():
    s = make_scenario(F="zero", G="zero", x0=[1.0, -1.0, 0.5, 2.0])
    path = s.sample_noise(make_generator(0), 2)
    x = mild_solve(s, path)
    expected = np.exp(-np.outer(path.times, s.model.mu)) * s.x0.mean
    np.testing.assert_allclose(x.states[0], expected, rtol=1e-12)


def test_exponential_euler_recursion():
    b = np.array([1.0, 0.0, -2.0, 0.5])
    s = make_scenario(F=ConstantDrift(b), G="constant", n_cells=8)
    path = s.sample_noise(make_generator(1), 3)
    x = mild_solve(s, path)
    E = np.exp(-s.model.mu * s.dt)
    g = s.G.full_matrix
    ref = np.zeros((3, 4))
    for k in range(8):
        ref = E * (ref + s.dt * b + path.increments[:, k] @ g.T)
    np.testing.assert_allclose(x.states[:, -1], ref, rtol=1e-12, atol=1e-14)


def test_listed_jump_enters_at_its_own_time():
    g = np.diag([1.0, 0.5])
    s = make_scenario(dim=2, F="zero", G=ConstantDiffusion(np.diag(g)), n_cells=4)
    tau = 0.3
    path = NoisePath.from_jumps(1.5, 1.0, 4, [(tau, [1.0, 2.0])])
    x = mild_solve(s, path)
    jump = g @ np.array([1.0, 2.0])
    np.testing.assert_allclose(x.states[0, -1], np.exp(-s.model.mu * (1 - tau)) * jump,
                               rtol=1e-12)
    np.testing.assert_allclose(x.jump_delta[0], jump)
    np.testing.assert_allclose(x.jump_pre[0], 0.0)
    # left limit at the end of the jump cell removes the transported jump
    np.testing.assert_allclose(x.left_limits[0, 2], 0.0, atol=1e-15)
    np.testing.assert_allclose(x.states[0, 1], 0.0)


def test_state_dependent_jump_uses_left_limit():
    s = make_scenario(dim=2, F="zero", G="sigmoid", n_cells=2, x0=[1.0, 0.0])
    path = NoisePath.from_jumps(1.5, 1.0, 2, [(0.25, [1.0, 0.0])])
    x = mild_solve(s, path)
    pre = np.exp(-s.model.mu * 0.25) * np.array([1.0, 0.0])
    np.testing.assert_allclose(x.jump_pre[0], pre, rtol=1e-12)
    np.testing.assert_allclose(x.jump_delta[0], s.G.apply(pre[None], np.array([[1.0, 0.0]]))[0])


def test_yosida_composition():
    s = make_scenario(F="zero", G="zero", x0=[1.0, 1.0, 1.0, 1.0])
    path = s.sample_noise(make_generator(2), 1)
    x = yosida_solve(s, 10.0, path)
    np.testing.assert_allclose(x.states[0, 0], s.model.resolvent_diag(10.0))
    assert x.yosida_n == 10.0
    with pytest.raises(ParameterError):
        yosida_solve(s, 0.0, path)
    np.testing.assert_array_equal(yosida_solve(s, np.inf, path).states, mild_solve(s, path).states)


def test_overflow_is_flagged_not_raised():
    s = make_scenario(F=ConstantDrift(np.full(4, 1e14)), G="zero", n_cells=4)
    x = mild_solve(s, s.sample_noise(make_generator(3), 2))
    assert x.n_failed == 2
    assert np.all(np.isfinite(x.states))


def test_yosida_gaps_shrink():
    s = make_scenario(dim=8, n_cells=64)
    rep = convergence_study(s, [4, 64, 1024, 16384], 200, 1.0, PathStreams(5, "conv", 200))
    D = list(rep.D.values())
    assert all(b < a for a, b in zip(D, D[1:]))
    med = list(rep.uniform_gap_medians.values())
    assert all(b < a for a, b in zip(med, med[1:]))
    assert rep.n_failed == 0
    with pytest.raises(ParameterError):
        convergence_study(s, [1, 4], 10, p=1.5)


def test_coupled_studies_are_reproducible():
    s = make_scenario(dim=4, n_cells=16)
    # the work split must not change the draws
    a = convergence_study(s, [1, 4], 600, 1.0, PathStreams(9, "conv", 600), block=256)
    b = convergence_study(s, [1, 4], 600, 1.0, PathStreams(9, "conv", 600), block=512)
    assert a.D == pytest.approx(b.D, rel=1e-13)
    with pytest.raises(ValueError):
        convergence_study(s, [1, 4], 300, 1.0, PathStreams(9, "conv", 300), block=100)


def test_time_refinement_gaps_shrink():
    s = make_scenario(dim=4, n_cells=16)
    out = refinement_study(s, [16, 64, 256, 1024], 200, 1.0, PathStreams(6, "ref", 200))
    v = list(out.values())
    assert all(b < a for a, b in zip(v, v[1:]))


@pytest.mark.parametrize("kw,message", [
    (dict(p_report=(0.5, 1.6)), "p_report"),
    (dict(T=0.0), "T"),
])
def test_scenario_validation(kw, message):
    base = make_scenario()
    with pytest.raises(ConfigError) as exc:
        base.replace(**kw)
    assert any(e.startswith(message) for e in exc.value.errors)


def test_scenario_dimension_mismatch():
    base = make_scenario()
    with pytest.raises(ConfigError):
        base.replace(x0=InitialLaw(np.zeros(3)))
    with pytest.raises(ConfigError):
        Scheme(n_cells=0)
    with pytest.raises(ConfigError):
        Scheme(noise_mode="jump_resolved", epsilon=0.0)


def test_initial_law_moments():
    law = InitialLaw(np.array([3.0, 4.0]))
    assert law.moment(0.5) == pytest.approx(5**0.5)
    g = InitialLaw(np.zeros(2), "gaussian", 1.0)
    # E|Z| for a standard 2-d Gaussian is sqrt(pi/2)
    assert g.moment(1.0, make_generator(7)) == pytest.approx(np.sqrt(np.pi / 2), rel=1e-2)
    with pytest.raises(ConfigError):
        InitialLaw(np.zeros(2), "stable", 1.0)
