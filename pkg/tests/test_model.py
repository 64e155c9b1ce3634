"""Plant, constraint-set, stage-cost, and steady-state behavior."""

import numpy as np
import pytest

from empc import model
from empc.errors import InfeasibleProblemError, NotPeriodicError


def test_step_hand_values(rotator):
    assert np.allclose(model.step(rotator, np.array([0.5, 0.0]),
                                  np.array([0.0])), [0.0, -0.5])
    assert np.allclose(model.step(rotator, np.zeros(2), np.zeros(1)), [0.0, 0.0])
    assert np.allclose(model.step(rotator, np.array([1.0, 1.0]),
                                  np.array([-1.0])), [0.0, -1.0])


def test_step_dimension_mismatch(rotator):
    with pytest.raises(ValueError):
        model.step(rotator, np.zeros(3), np.zeros(1))
    with pytest.raises(ValueError):
        model.step(rotator, np.zeros(2), np.zeros(2))


def test_rotator_expansion(rotator):
    assert rotator.n == 2 and rotator.m == 1
    assert np.array_equal(rotator.A, [[0, 1], [-1, 0]])
    assert np.array_equal(rotator.B, [[1], [0]])


def test_linear_shape_validation():
    with pytest.raises(ValueError):
        model.SystemModel.linear([[1, 0]], [[1]])
    with pytest.raises(ValueError):
        model.SystemModel.linear([[1, 0], [0, 1]], [[1]])


def test_constraint_residuals_coupled_set(coupled_box):
    r = model.constraint_residuals(coupled_box, np.zeros(2), np.zeros(1))
    assert np.allclose(r, -1.0)
    r = model.constraint_residuals(coupled_box, np.array([0.0, 1.0]),
                                   np.array([0.5]))
    assert r.max() == pytest.approx(0.5)  # u - (1 - x2) = 0.5
    r = model.constraint_residuals(coupled_box, np.array([1.0, 1.0]),
                                   np.array([-1.0]))
    assert r.max() == pytest.approx(0.0)  # boundary feasible


def test_constraint_compactness_required():
    with pytest.raises(ValueError):
        model.ConstraintSet.box([-np.inf, -1], [1, 1], [-1], [1])
    with pytest.raises(ValueError):
        model.ConstraintSet.box([2, -1], [1, 1], [-1], [1])


def test_cost_values(quartic, absxy):
    assert quartic.eval(np.array([0.5, 0.3]), np.array([0.2])) == \
        pytest.approx(0.2 ** 2 + 0.5 ** 4 - 0.5 * 0.25)
    assert absxy.eval(np.array([0.5, -0.4]), np.array([9.9])) == pytest.approx(0.2)


@pytest.mark.parametrize("kind", ["quartic", "absxy", "polynomial"])
def test_gradients_match_finite_differences(kind):
    if kind == "polynomial":
        cost = model.StageCost.polynomial(
            [((1, 2), (1,), 0.7), ((3, 0), (0,), -0.2), ((0, 0), (2,), 1.0)], 2, 1)
    else:
        cost = getattr(model.StageCost, kind)()
    rng = np.random.default_rng(11)
    h = 1e-6
    checked = 0
    while checked < 100:
        x = rng.uniform(-0.9, 0.9, size=2)
        u = rng.uniform(-0.9, 0.9, size=1)
        if kind == "absxy" and (abs(x[0]) < 1e-4 or abs(x[1]) < 1e-4):
            continue  # nonsmooth set of |x1*x2|
        lx, lu = cost.gradient(x, u)
        for j in range(2):
            xp, xm = x.copy(), x.copy()
            xp[j] += h
            xm[j] -= h
            fd = (cost.eval(xp, u) - cost.eval(xm, u)) / (2 * h)
            assert abs(fd - lx[j]) / max(1.0, abs(lx[j])) <= 1e-5
        up, um = u + h, u - h
        fd = (cost.eval(x, up) - cost.eval(x, um)) / (2 * h)
        assert abs(fd - lu[0]) / max(1.0, abs(lu[0])) <= 1e-5
        checked += 1


def test_steady_state_rotator_quartic(steady, rotator, quartic, coupled_box):
    assert np.max(np.abs(steady.xs)) <= 1e-6
    assert abs(steady.us[0]) <= 1e-6
    assert abs(steady.ls) <= 1e-9
    steady.check(rotator, quartic, coupled_box)


def test_steady_state_rotator_absxy(rotator, absxy, coupled_box):
    ss = model.solve_steady_state(rotator, absxy, coupled_box)
    assert np.max(np.abs(ss.xs)) <= 1e-6
    assert abs(ss.ls) <= 1e-9


def test_steady_state_identity_plant_quartic(quartic):
    # x+ = x + u forces u = 0; the grid oracle minimizes l(x, 0) directly.
    sys = model.SystemModel.linear(np.eye(2), np.eye(2))
    cost = model.StageCost.polynomial(
        [((4, 0), (0, 0), 1.0), ((2, 0), (0, 0), -0.5),
         ((0, 0), (2, 0), 1.0), ((0, 0), (0, 2), 1.0)], 2, 2)
    z = model.ConstraintSet.box([-1, -1], [1, 1], [-1, -1], [1, 1])
    ss = model.solve_steady_state(sys, cost, z)
    assert np.max(np.abs(ss.us)) <= 1e-6

    grid = np.linspace(-1, 1, 401)
    oracle = min(g ** 4 - 0.5 * g ** 2 for g in grid)
    assert ss.ls == pytest.approx(oracle, abs=1e-5)
    assert abs(abs(ss.xs[0]) - 0.5) <= 1e-5


def test_orbit_average_cost(rotator, quartic, absxy):
    # Independent oracle: sum the stage costs over the four orbit states.
    pts = [np.array([0.5, 0.0]), np.array([0.0, -0.5]),
           np.array([-0.5, 0.0]), np.array([0.0, 0.5])]
    hand = sum(quartic.eval(p, np.zeros(1)) for p in pts) / 4
    got = model.orbit_average_cost(rotator, quartic, [0.5, 0.0], 4)
    assert got == pytest.approx(hand, abs=1e-15)
    assert got == pytest.approx(-0.03125, abs=1e-12)
    assert got < 0.0

    assert model.orbit_average_cost(rotator, quartic, [0.0, 0.0], 1) == 0.0
    assert model.orbit_average_cost(rotator, absxy, [0.5, 0.0], 4) == 0.0


def test_orbit_not_periodic(rotator, quartic):
    with pytest.raises(NotPeriodicError):
        model.orbit_average_cost(rotator, quartic, [0.5, 0.0], 3)
    with pytest.raises(ValueError):
        model.orbit_average_cost(rotator, quartic, [0.5, 0.0], 0)


def test_no_feasible_steady_state(rotator, quartic):
    # Rotator fixed points need x2 = -x1, impossible inside [0.5, 1]^2.
    z = model.ConstraintSet.coupled([0.5, 0.5], [1, 1], [-1], [[0, -1]],
                                    [1], [[0, -1]])
    with pytest.raises(InfeasibleProblemError):
        model.solve_steady_state(rotator, quartic, z)
