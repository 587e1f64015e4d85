import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from tracestab.radial import (
    Ball,
    LevelDomainError,
    ProblemParams,
    RadialProfile,
    Shell,
    level_functions,
    robin_neumann_profile,
    robin_neumann_shell,
    robin_residual,
    sigma_ball,
    sigma_shell,
    solve_ball,
    solve_shell,
    sphere_area,
)

# frozen from tests/oracles.py (Bessel closed forms and scipy DOP853 shooting)
SIGMA22_BALL_D2 = 0.6681242144216407
SIGMA22_BALL_D3 = 0.559495563431321
SIGMA22_SHELL_12 = 0.7819711920381999
ROBIN22_SHELL_12 = -1.8729717152879035
SHOOTING = {
    (3, 2, 2, 1.0): 0.5230953089325359,
    (3, 3, 2, 1.0): 0.7105764392604812,
    (3, 1, 2, 1.0): 0.20868483541283775,
    (1.5, 1.5, 2, 1.0): 0.6198885792843023,
    (1.5, 1, 2, 1.0): 0.335933781695769,
    (2, 1.5, 3, 1.0): 0.36693995477504593,
    (2, 2, 2, 2.5): 0.874640924945096,
}


def test_frozen_values_match_live_oracles():
    assert oracles.sigma22_ball_d2() == pytest.approx(SIGMA22_BALL_D2, abs=1e-15)
    assert oracles.sigma22_ball_d3() == pytest.approx(SIGMA22_BALL_D3, abs=1e-15)
    assert oracles.sigma22_shell_d2(1, 2) == pytest.approx(SIGMA22_SHELL_12, abs=1e-14)
    assert oracles.robin22_shell_d2(-1, 1, 2) == pytest.approx(ROBIN22_SHELL_12, abs=1e-12)
    for args, val in SHOOTING.items():
        assert oracles.sigma_ball_shooting(*args) == pytest.approx(val, rel=1e-12)


def test_bessel_ball_and_shell():
    assert sigma_ball(2, 2, 2, 1.0) == pytest.approx(SIGMA22_BALL_D2, abs=1e-10)
    assert sigma_ball(2, 2, 3, 1.0) == pytest.approx(SIGMA22_BALL_D3, abs=1e-10)
    assert sigma_shell(2, 2, 2, 1.0, 2.0) == pytest.approx(SIGMA22_SHELL_12, abs=1e-10)


@pytest.mark.parametrize("args", sorted(SHOOTING))
def test_nonlinear_ball_against_shooting(args):
    assert sigma_ball(*args) == pytest.approx(SHOOTING[args], rel=1e-9)


def test_trivial_one_dimensional_cases():
    # constant test function bound: σ^p ≤ |B| / P(B)^{p/q}
    for p, q in [(2, 2), (3, 2), (1.5, 1)]:
        prm = ProblemParams(p, q, 2, Ball(1.0))
        assert sigma_ball(p, q, 2, 1.0) ** p <= prm.volume / prm.outer_perimeter ** (p / q)


def test_q_scaling_identity():
    for p, qs in [(2, (1, 1.5, 2)), (3, (1, 2, 3))]:
        vals = [sigma_ball(p, q, 2, 1.0) * (2 * math.pi) ** (1 / q) for q in qs]
        assert max(vals) - min(vals) <= 1e-8 * vals[0]


def test_profile_shape_and_energies():
    prof = solve_ball(ProblemParams(3, 2, 2, Ball(1.0)))
    assert np.all(np.diff(prof.psi) > 0)
    assert np.all(prof.dpsi[1:] > 0)
    assert prof.z_m == prof.psi[0] and prof.z_M == prof.psi[-1]
    assert prof.quotient() == pytest.approx(prof.sigma, rel=1e-10)
    assert prof.boundary_residual() < 1e-8


def test_normalization_and_scaling():
    prof = solve_shell(ProblemParams(2, 1.5, 2, Shell(1.0, 2.0)))
    n = prof.normalized()
    assert n.boundary_integral == pytest.approx(1.0, rel=1e-14)
    assert n.quotient() == pytest.approx(prof.sigma, rel=1e-10)
    assert n.sigma == prof.sigma


def test_shell_neumann_condition_at_hole():
    prof = solve_shell(ProblemParams(2, 2, 2, Shell(1.0, 2.0)))
    assert prof.dpsi[0] == 0.0
    assert prof.flux[0] == 0.0


def test_json_round_trip():
    prof = solve_ball(ProblemParams(2, 2, 2, Ball(1.0)), grid_n=256)
    back = RadialProfile.from_json(prof.to_json())
    assert back.params == prof.params
    np.testing.assert_array_equal(back.psi, prof.psi)
    assert back.sigma == prof.sigma


def test_parameter_validation():
    with pytest.raises(ValueError):
        ProblemParams(1.0, 1.0, 2, Ball(1.0))
    with pytest.raises(ValueError):
        ProblemParams(2, 3, 2, Ball(1.0))  # q > p
    with pytest.raises(ValueError):
        Ball(-1.0)
    with pytest.raises(ValueError):
        Shell(2.0, 1.0)
    with pytest.raises(ValueError):
        ProblemParams(2, 2, 1, Ball(1.0))


def test_sphere_area():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert sphere_area(4) == pytest.approx(2 * math.pi**2)


def test_level_functions():
    prof = solve_shell(ProblemParams(2, 2, 2, Shell(1.0, 2.0))).normalized()
    lf = level_functions(prof)
    ts = np.linspace(prof.z_m, prof.z_M, 9)
    assert lf.g_inv(prof.z_M) == pytest.approx(0.0, abs=1e-14)
    assert lf.g_inv(prof.z_m) == pytest.approx(1.0, abs=1e-10)
    for t in ts[1:-1]:
        assert lf.g_inv(t) == pytest.approx(lf.g_inv_quadrature(t), rel=1e-8)
    assert lf.ell(prof.z_M) == pytest.approx(prof.dpsi[-1], rel=1e-12)
    # Euler-Lagrange boundary identity for p = q = 2: ℓ(z_M) = σ² z_M
    assert lf.ell(prof.z_M) == pytest.approx(prof.sigma**2 * prof.z_M, rel=1e-8)
    with pytest.raises(LevelDomainError):
        lf.ell(prof.z_M * 1.1)


def test_robin_against_bessel_and_residual_sign():
    lam = robin_neumann_shell(2, 2, -1.0, 1.0, 2.0)
    assert lam == pytest.approx(ROBIN22_SHELL_12, rel=1e-9)
    k = -lam
    assert robin_residual(2, 2, -1.0, 1.0, 2.0, 0.5 * k) < 0 < robin_residual(2, 2, -1.0, 1.0, 2.0, 2 * k)
    prof = robin_neumann_profile(2, 2, -1.0, 1.0, 2.0)
    assert prof.problem == "robin" and prof.sigma == lam


def test_robin_constant_function_bound():
    # constants give λ ≤ β P / |A|
    for p in (2.0, 3.0):
        lam = robin_neumann_shell(p, 2, -1.0, 1.0, 2.0)
        assert lam <= -1.0 * 4 * math.pi / (3 * math.pi)
    with pytest.raises(ValueError):
        robin_neumann_shell(2, 2, 1.0, 1.0, 2.0)


@settings(max_examples=15, deadline=None)
@given(R=st.floats(0.3, 3.0), p=st.sampled_from([1.5, 2.0, 3.0]))
def test_ball_scaling_in_radius(R, p):
    # σ_{p,p}(B_R) compared with the shooting oracle at the same radius
    assert sigma_ball(p, p, 2, R, grid_n=2048) == pytest.approx(oracles.sigma_ball_shooting(p, p, 2, R), rel=1e-7)


@settings(max_examples=10, deadline=None)
@given(R1=st.floats(0.2, 1.5), width=st.floats(0.3, 2.0))
def test_shell_against_bessel_oracle(R1, width):
    s = sigma_shell(2, 2, 2, R1, R1 + width, grid_n=2048)
    assert s == pytest.approx(oracles.sigma22_shell_d2(R1, R1 + width), rel=1e-7)
