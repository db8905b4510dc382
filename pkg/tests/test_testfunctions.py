import numpy as np
import pytest
from scipy import integrate

from stablespde.coefficients import ConstantDiffusion, DiagonalSigmoidDiffusion
from stablespde.errors import DimensionError, ParameterError
from stablespde.rng import make_generator
from stablespde.stable_noise import isotropic_tail_mass
from stablespde.testfunctions import (GaussianBump, ImageGeometry, PowerMixture, TrigFunction,
                                      TruncatedPower, check_bounds, check_derivatives,
                                      hessian_modulus, levy_integral)

SHIPPED = [
    TrigFunction.make([1.0, 0.5, 0.0], 0.2),
    GaussianBump.isotropic(3, 0.7),
    GaussianBump.coordinate(3, 1, 0.5, 0.3),
    PowerMixture.make(3, 0.5),
    TruncatedPower.make(3, 0.5),
]


@pytest.mark.parametrize("f", SHIPPED, ids=lambda f: f.label)
def test_derivatives_and_declared_bounds(f):
    g = make_generator(0, f.label)
    d = check_derivatives(f, g)
    assert d["ok"], d
    if f.grad_bound > 0:
        b = check_bounds(f, g)
        assert b["ok"], b


@pytest.mark.parametrize("f", SHIPPED[:3], ids=lambda f: f.label)
def test_hessian_modulus_decreases(f):
    mod = hessian_modulus(f, make_generator(1))
    assert mod[-1] < mod[0]


def test_power_mixture_sandwich():
    V = PowerMixture.make(4, 0.5)
    h = make_generator(2).standard_normal((1000, 4)) * np.geomspace(1e-2, 1e3, 1000)[:, None]
    r = np.linalg.norm(h, axis=-1) ** 0.5
    v = V.value(h)
    assert np.all(r - 1 <= v + 1e-12) and np.all(v <= r + 1e-12)


def test_dimension_checked():
    with pytest.raises(DimensionError):
        SHIPPED[0].value(np.zeros((2, 4)))
    with pytest.raises(ParameterError):
        TrigFunction.make([0.0, 0.0])


def _geometry(dim, seed):
    phi = make_generator(seed).standard_normal((dim, dim)) * 0.5
    return phi, ImageGeometry.from_matrix(phi, 5)


def test_trig_generic_quadrature_matches_closed_form():
    # the Fourier symbol of the image measure gives J cos = -(a^T C a)^{alpha/2} cos
    f = SHIPPED[0]
    phi, geom = _geometry(3, 3)
    h = make_generator(4).standard_normal((5, 3))
    for alpha in (1.2, 1.5, 1.8):
        generic = levy_integral(f, h, geom, alpha)
        np.testing.assert_allclose(generic, f.levy_integral(h, geom, alpha), rtol=1e-6,
                                   atol=1e-9)


def _direct_1d(f, h, scale, alpha):
    # density of lambda o Phi^-1 in 1-d: (alpha/2) T(1) scale^alpha |g|^{-1-alpha} per side;
    # symmetrizing removes the gradient term
    c = 0.5 * alpha * isotropic_tail_mass(alpha, 1) * scale**alpha

    def second_difference(g):
        return (f.value(np.array([[h + g]]))[0] + f.value(np.array([[h - g]]))[0]
                - 2 * f.value(np.array([[h]]))[0])

    def curvature(g):
        return second_difference(g) / g**2 if g > 0 else f.hess(np.array([[h]]))[0, 0, 0]

    near = integrate.quad(curvature, 0.0, 1.0, weight="alg",
                          wvar=(1 - alpha, 0.0), epsabs=1e-13)[0]
    far = integrate.quad(lambda g: second_difference(g) * g ** (-1 - alpha), 1.0, 12.0,
                         limit=200, epsabs=1e-13)[0]
    # beyond |g| = 12 the bump has vanished and only -2 f(h) remains
    tail = -2 * f.value(np.array([[h]]))[0] * 12.0**-alpha / alpha
    return c * (near + far + tail)


@pytest.mark.parametrize("alpha", [1.3, 1.7])
def test_bump_quadrature_against_direct_integration(alpha):
    f = GaussianBump.isotropic(1, 0.6)
    geom = ImageGeometry.from_operator(ConstantDiffusion(np.array([0.8])), np.zeros((1, 1)))
    for h in (0.0, 0.4, 1.5):
        got = f.levy_integral(np.array([[h]]), geom, alpha)[0]
        assert got == pytest.approx(_direct_1d(f, h, 0.8, alpha), rel=1e-5, abs=1e-8)


def test_power_mixture_against_generic_route():
    # the mixture route and the direct smoothing route must agree for TruncatedPower-free V
    V = PowerMixture.make(2, 0.5)
    G = DiagonalSigmoidDiffusion(np.array([0.5, 0.2]))
    h = make_generator(5).standard_normal((4, 2))
    geom = ImageGeometry.from_operator(G, h)
    mix = V.levy_integral(h, geom, 1.5)

    class Direct(PowerMixture):
        def smoothing(self, h, geom, s):
            from stablespde.testfunctions import _generic_smoothing
            return _generic_smoothing(self, h, geom, s)

    direct = levy_integral(Direct("direct", 2, 1.0, 1.0, 1.0, True, 0.5), h, geom, 1.5)
    np.testing.assert_allclose(mix, direct, rtol=2e-3)
