import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stablespde.errors import DimensionError, ParameterError
from stablespde.hilbert import (GalerkinModel, HSOperator, analytic_constant, apply_semigroup,
                                fractional_norm, yosida_resolvent)

MODEL = GalerkinModel.dirichlet_laplacian(6)
vectors = arrays(np.float64, 6, elements=st.floats(-1e3, 1e3))


def test_dirichlet_spectrum():
    np.testing.assert_allclose(MODEL.mu, (np.arange(1, 7) * np.pi) ** 2)
    np.testing.assert_allclose(MODEL.eigenvalues, -MODEL.mu)
    assert MODEL.basis_label == "dirichlet-sine"


def test_semigroup_examples():
    v = np.arange(1.0, 7.0)
    np.testing.assert_array_equal(apply_semigroup(MODEL, 0.0, v), v)
    e1 = MODEL.first_eigenvector
    assert apply_semigroup(MODEL, 0.1, e1)[0] == pytest.approx(0.37271, abs=1e-5)
    vals = [np.abs(apply_semigroup(MODEL, t, v)) for t in (0.1, 1.0, 10.0)]
    assert np.all(vals[1] <= vals[0]) and np.all(vals[2] <= vals[1])
    assert np.max(vals[2]) < 1e-40


def test_resolvent_examples():
    m = GalerkinModel(np.array([1.0]))
    assert yosida_resolvent(m, 1.0, [1.0])[0] == 0.5
    v = np.ones(6)
    gaps = [np.linalg.norm(yosida_resolvent(MODEL, n, v) - v) for n in (1, 10, 100, 1e4)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    np.testing.assert_array_equal(yosida_resolvent(MODEL, np.inf, v), v)


def test_fractional_norm_examples():
    m = GalerkinModel(np.array([1.0, 4.0]))
    assert fractional_norm(m, 1.0, [1.0, 1.0]) == pytest.approx(np.sqrt(17))
    v = np.array([3.0, -4.0])
    assert fractional_norm(m, 0.0, v) == pytest.approx(5.0)


@pytest.mark.parametrize("call", [
    lambda: apply_semigroup(MODEL, -0.1, np.ones(6)),
    lambda: yosida_resolvent(MODEL, 0.0, np.ones(6)),
    lambda: fractional_norm(MODEL, 1.5, np.ones(6)),
    lambda: GalerkinModel(np.array([1.0, -2.0])),
    lambda: GalerkinModel(np.array([4.0, 1.0])),
    lambda: GalerkinModel.from_eigenvalues([-1.0, 0.0]),
])
def test_parameter_errors(call):
    with pytest.raises(ParameterError):
        call()


def test_dimension_error():
    with pytest.raises(DimensionError):
        apply_semigroup(MODEL, 0.1, np.ones(5))


@settings(max_examples=50, deadline=None)
@given(vectors, st.floats(0, 5), st.floats(0, 5))
def test_semigroup_law_and_contraction(v, t, s):
    both = apply_semigroup(MODEL, t + s, v)
    np.testing.assert_allclose(both, apply_semigroup(MODEL, t, apply_semigroup(MODEL, s, v)),
                               rtol=1e-12, atol=1e-300)
    assert np.linalg.norm(both) <= np.linalg.norm(v) * (1 + 1e-15)


@settings(max_examples=50, deadline=None)
@given(vectors, st.floats(1e-3, 1e6), st.floats(0, 2))
def test_resolvent_contraction_and_commutation(v, n, t):
    r = yosida_resolvent(MODEL, n, v)
    assert np.linalg.norm(r) <= np.linalg.norm(v) * (1 + 1e-15)
    # both are diagonal, so the orders differ only by rounding of the products
    np.testing.assert_allclose(yosida_resolvent(MODEL, n, apply_semigroup(MODEL, t, v)),
                               apply_semigroup(MODEL, t, r), rtol=4e-16, atol=1e-300)


@pytest.mark.parametrize("delta", [0.0, 0.25, 0.5])
def test_analytic_bound_on_log_grid(delta):
    model = GalerkinModel.dirichlet_laplacian(64)
    c = model.c_delta(delta)
    for t in np.geomspace(1e-6, 1e2, 200):
        op_norm = np.max(model.power_diag(delta) * np.exp(-model.mu * t))
        assert op_norm <= c * t**-delta * (1 + 1e-12)


def test_analytic_constant_is_sharp():
    # the supremum over mu of (mu t)^delta e^{-mu t} is attained at mu t = delta
    for delta in (0.25, 0.5, 1.0):
        x = np.linspace(1e-3, 10, 100_001)
        assert np.max(x**delta * np.exp(-x)) == pytest.approx(analytic_constant(delta), rel=1e-6)


def test_hs_operator():
    op = HSOperator(np.array([[3.0, 0.0], [0.0, 4.0]]))
    assert op.hs_norm == 5.0
    assert HSOperator(np.zeros((2, 3))).hs_norm == 0.0
    np.testing.assert_array_equal(HSOperator([1.0, 2.0]).matrix, np.diag([1.0, 2.0]))
    assert (2 * op).hs_norm == 10.0
    with pytest.raises(ValueError):
        op.matrix[0, 0] = 1.0


def test_model_is_immutable():
    with pytest.raises(ValueError):
        MODEL.mu[0] = 1.0
    assert MODEL.power_diag(0.5) is MODEL.domain_exponent_cache[0.5]
