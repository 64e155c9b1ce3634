"""Shared fixtures: the rotator testbed and small, fast experiment configs."""

import numpy as np
import pytest

from empc import model, nlp, ocp, storage


@pytest.fixture(scope="session")
def rotator():
    return model.SystemModel.rotator()


@pytest.fixture(scope="session")
def coupled_box():
    # X = [-1,1]^2, U(x) = [-1-x2, 1-x2]
    return model.ConstraintSet.coupled([-1, -1], [1, 1],
                                       [-1], [[0, -1]], [1], [[0, -1]])


@pytest.fixture(scope="session")
def quartic():
    return model.StageCost.quartic()


@pytest.fixture(scope="session")
def absxy():
    return model.StageCost.absxy()


@pytest.fixture(scope="session")
def steady(rotator, quartic, coupled_box):
    return model.solve_steady_state(rotator, quartic, coupled_box)


@pytest.fixture(scope="session")
def quad_family():
    return storage.StorageFamily.symmetric(storage.full_quadratic_basis(), 5.0)


@pytest.fixture(scope="session")
def quartic_family_pinned():
    return storage.StorageFamily.symmetric(storage.quartic_x1_basis(), 5.0,
                                           pinned=[(4, 0.0)])


@pytest.fixture(scope="session")
def region_terminal():
    # X_f = {x1 = 0, x2 in [-1, 1]}, V_f = x2^2, u = -x2
    return ocp.TerminalIngredients.region(
        [[1.0, 0.0]], [0.0], [-1, -1], [1, 1],
        [((0, 2), 1.0)], [[0.0, -1.0]], [0.0])


def make_config(rotator, coupled_box, cost, family, terminal, steady,
                rho_weight=0.2, horizon=6, steps=8, x0=(1.0, 1.0),
                theta0=None, feas_tol=1e-10, label="test"):
    return ocp.prepare_config(
        rotator, coupled_box, cost, family,
        storage.RhoFunction(rho_weight), terminal, horizon, steps,
        np.asarray(x0, dtype=float), theta0,
        nlp.SolverOptions(feas_tol=feas_tol), label=label, steady=steady)


@pytest.fixture()
def small_eq_cfg(rotator, coupled_box, quartic, quad_family, steady):
    """Equality-terminal rotator/quartic config small enough for unit tests."""
    return make_config(rotator, coupled_box, quartic, quad_family,
                       ocp.TerminalIngredients.equality(), steady)


@pytest.fixture()
def small_region_cfg(rotator, coupled_box, quartic, quartic_family_pinned,
                     region_terminal, steady):
    return make_config(rotator, coupled_box, quartic, quartic_family_pinned,
                       region_terminal, steady)
