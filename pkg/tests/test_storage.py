"""Storage family evaluation and the controlled-dissipation residual."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from empc import storage
from empc.errors import DomainError
from empc.model import StageCost, SteadyState

settings.register_profile("ci", max_examples=60, deadline=None,
                          derandomize=True)
settings.load_profile("ci")

unit = st.floats(-1.0, 1.0, allow_nan=False)


def test_features_quadratic_basis(quad_family):
    assert np.array_equal(storage.features(quad_family, np.array([1.0, 2.0])),
                          [1.0, 4.0, 2.0, 1.0, 2.0, 1.0])
    phi0 = storage.features(quad_family, np.zeros(2))
    assert np.array_equal(phi0, [0, 0, 0, 0, 0, 1.0])


def test_features_quartic_basis(quartic_family_pinned):
    phi = storage.features(quartic_family_pinned, np.array([0.0, 0.7]))
    assert np.array_equal(phi, [0, 0, 0, 0, 1.0])


def test_storage_eval_values(quad_family):
    const = np.array([0, 0, 0, 0, 0, 1.0])
    assert storage.storage_eval(quad_family, const, np.array([0.3, -0.9])) == 1.0
    th = np.array([1.0, 1, 0, 0, 0, 0])
    assert storage.storage_eval(quad_family, th, np.array([0.5, -0.5])) == \
        pytest.approx(0.5)


def test_storage_eval_domain_errors(quad_family):
    with pytest.raises(DomainError):
        storage.storage_eval(quad_family, np.full(6, 9.0), np.zeros(2))
    fam = storage.StorageFamily.symmetric(storage.quartic_x1_basis(), 5.0,
                                          pinned=[(4, 0.0)])
    with pytest.raises(DomainError):
        storage.storage_eval(fam, np.array([0, 0, 0, 0, 1.0]), np.zeros(2))


@given(c=unit, a=st.floats(0.0, 5.0))
def test_pinned_constant_storage_vanishes_on_slice(c, a):
    # Assumption: every non-constant monomial vanishes at x1 = 0, and the
    # pinned constant contributes zero.
    fam = storage.StorageFamily.symmetric(storage.quartic_x1_basis(), 5.0,
                                          pinned=[(4, 0.0)])
    theta = fam.apply_pins(np.array([a, -a, a / 2, a, 3.0]))
    assert storage.storage_eval(fam, theta, np.array([0.0, c])) == 0.0


def test_family_validation():
    with pytest.raises(ValueError):
        storage.StorageFamily.create([(1, 0)], [1.0], [-1.0])
    with pytest.raises(ValueError):
        storage.StorageFamily.create([(1, 0)], [-1.0], [1.0], pinned=[(0, 2.0)])
    with pytest.raises(ValueError):
        storage.StorageFamily.create([(1, 0)], [-1.0], [1.0], pinned=[(3, 0.0)])


def test_rho_function():
    rho = storage.RhoFunction(0.2)
    assert rho.eval(np.zeros(2)) == 0.0
    assert rho.eval(np.array([1.0, -1.0])) == pytest.approx(0.4)
    assert np.allclose(rho.grad(np.array([1.0, 2.0])), [0.4, 0.8])
    assert storage.RhoFunction(0.0).eval(np.array([3.0])) == 0.0
    with pytest.raises(ValueError):
        storage.RhoFunction(-0.1)


@pytest.fixture(scope="module")
def diss_parts(quad_family):
    cost = StageCost.quartic()
    rho = storage.RhoFunction(0.2)
    ss = SteadyState(np.zeros(2), np.zeros(1), 0.0)
    return quad_family, rho, cost, ss


def test_dissipation_residual_examples(diss_parts):
    fam, rho, cost, ss = diss_parts
    th0 = np.zeros(6)
    r = storage.dissipation_residual(fam, rho, cost, ss, th0, th0,
                                     np.array([1.0, 0.0]), np.zeros(1),
                                     np.array([0.0, -1.0]))
    assert r == pytest.approx(-0.3)  # 0.2*1 - 0.5

    r = storage.dissipation_residual(fam, rho, cost, ss, th0, th0,
                                     ss.xs, ss.us, ss.xs)
    assert r == 0.0

    r = storage.dissipation_residual(fam, rho, cost, ss, th0, th0,
                                     np.array([0.0, 0.5]), np.zeros(1),
                                     np.array([0.5, 0.0]))
    assert r == pytest.approx(0.05)  # violated


@given(a=st.floats(0.0, 1.0), t1=unit, t2=unit, x1=unit, x2=unit)
def test_residual_affine_in_theta(diss_parts, a, t1, t2, x1, x2):
    fam, rho, cost, ss = diss_parts
    x = np.array([x1, x2])
    xn = np.array([x2, -x1])
    u = np.zeros(1)
    th_a = np.full(6, t1)
    th_b = np.full(6, t2)
    thp = np.zeros(6)

    def res(th):
        return storage.dissipation_residual(fam, rho, cost, ss, th, thp, x, u, xn)

    mixed = res(a * th_a + (1 - a) * th_b)
    assert mixed == pytest.approx(a * res(th_a) + (1 - a) * res(th_b),
                                  abs=1e-12)


@given(shift=st.floats(-2.0, 2.0), x1=unit, x2=unit)
def test_residual_invariant_to_constant_shift(diss_parts, shift, x1, x2):
    fam, rho, cost, ss = diss_parts
    x = np.array([x1, x2])
    xn = np.array([x2, -x1])
    u = np.zeros(1)
    th = np.array([0.5, -0.5, 0.25, 0.1, 0.0, 1.0])
    thp = np.array([0.1, 0.2, -0.3, 0.0, 0.4, -0.5])
    base = storage.dissipation_residual(fam, rho, cost, ss, th, thp, x, u, xn)
    e6 = np.zeros(6)
    e6[5] = shift  # the constant monomial: index 5 in the quadratic basis
    shifted = storage.dissipation_residual(fam, rho, cost, ss, th + e6,
                                           thp + e6, x, u, xn)
    assert shifted == pytest.approx(base, abs=1e-12)


def test_assumption6_structural(quad_family, quartic_family_pinned):
    xs = np.zeros(2)
    assert storage.assumption6_structural(quartic_family_pinned, xs)
    assert not storage.assumption6_structural(quad_family, xs)
    free = storage.StorageFamily.symmetric(storage.quartic_x1_basis(), 5.0)
    assert not storage.assumption6_structural(free, xs)
