"""Shared fixtures: coefficient tables and desk-scale runs reused across
unit tests.  The acceptance suite deliberately rebuilds everything inside
its own timed criteria and does not touch these."""

import numpy as np
import pytest

from degenstein.coeffs import (LambdaChoice, build_table, constant_table,
                               power_profile)
from degenstein.solver import EpsProblem, GridSpec, bump, solve

DESK_EXTENT = ((-1.0, 1.0),)
DESK_N = 401
DESK_EPS = 1e-6
DESK_T = 0.05
BUMP_CENTER = (-0.6,)
BUMP_RADIUS = 0.2
BUMP_HEIGHT = 0.2
LOC_X0 = (0.5,)
LOC_R = 0.4
LOC_RP = 0.2


@pytest.fixture(scope="session")
def beta1_profile():
    return power_profile(1.0)


@pytest.fixture(scope="session")
def beta1_table(beta1_profile):
    return build_table(beta1_profile, LambdaChoice(1.0), s_min=1e-8, K=256)


@pytest.fixture(scope="session")
def beta2_table():
    return build_table(power_profile(2.0), LambdaChoice(1.0), s_min=1e-8, K=256)


@pytest.fixture(scope="session")
def control_tab():
    return constant_table()


@pytest.fixture(scope="session")
def desk_grid():
    return GridSpec(extent=DESK_EXTENT, n=(DESK_N,))


@pytest.fixture(scope="session")
def desk_bump():
    return bump(BUMP_CENTER, BUMP_RADIUS, BUMP_HEIGHT)


@pytest.fixture(scope="session")
def desk_trace_beta1(beta1_table, desk_grid, desk_bump):
    prob = EpsProblem(table=beta1_table, eps=DESK_EPS, g=desk_bump, psi=1.0,
                      omega_prime=(LOC_X0, LOC_R))
    return solve(prob, desk_grid, DESK_T, 33)


@pytest.fixture(scope="session")
def desk_trace_beta2(beta2_table, desk_grid, desk_bump):
    prob = EpsProblem(table=beta2_table, eps=DESK_EPS, g=desk_bump, psi=1.0)
    return solve(prob, desk_grid, DESK_T, 33)


@pytest.fixture(scope="session")
def control_trace(control_tab, desk_grid, desk_bump):
    prob = EpsProblem(table=control_tab, eps=1e-8, g=desk_bump, psi=1.0)
    return solve(prob, desk_grid, DESK_T, 33)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260823)
