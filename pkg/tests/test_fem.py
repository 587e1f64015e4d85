import math

import numpy as np
import pytest

import oracles
from tracestab.convex2d import ConvexPolygon, regular_polygon
from tracestab.fem import (
    INNER,
    OUTER,
    MeshResolutionError,
    NonConvergenceError,
    SolverOptions,
    TriMesh,
    linear_steklov_reference,
    mesh_domain,
    minimize_trace_quotient,
    radiality_check,
    robin_neumann_fem,
)
from tracestab.radial import sigma_ball

SIGMA22_BALL_D2 = 0.6681242144216407
SIGMA22_SHELL_12 = 0.7819711920381999
ROBIN22_SHELL_12 = -1.8729717152879035


def disc(n=256, R=1.0):
    return regular_polygon(n).with_perimeter(2 * math.pi * R)


def annulus_mesh(h):
    outer = disc(256, 2.0)
    return mesh_domain(outer, disc(128, 1.0), h)


@pytest.fixture(scope="module")
def disc_mesh():
    return mesh_domain(disc(), None, 0.05)


# ---------------------------------------------------------------- meshes
def test_mesh_covers_polygon_exactly():
    sq = ConvexPolygon([[0, 0], [1, 0], [1, 1], [0, 1]])
    m = mesh_domain(sq, None, 0.1)
    assert m.areas.sum() == pytest.approx(1.0, rel=1e-13)
    assert np.all(m.areas > 0)
    assert m.tags == {OUTER}
    loops = m.boundary_loops()
    assert len(loops[OUTER]) == 1
    edge = m.nodes[m.boundary_edges]
    assert np.linalg.norm(edge[:, 1] - edge[:, 0], axis=1).sum() == pytest.approx(4.0, rel=1e-13)


def test_holed_mesh_tags_and_area():
    m = annulus_mesh(0.1)
    outer, hole = disc(256, 2.0), disc(128, 1.0)
    assert m.areas.sum() == pytest.approx(outer.area - hole.area, rel=1e-12)
    assert m.tags == {OUTER, INNER}
    assert len(m.boundary_loops()[INNER]) == 1


def test_mesh_refine_and_json(tmp_path):
    m = mesh_domain(regular_polygon(7), None, 0.2)
    r = m.refine()
    assert len(r.triangles) == 4 * len(m.triangles)
    assert r.areas.sum() == pytest.approx(m.areas.sum(), rel=1e-13)
    assert r.h == m.h / 2
    path = tmp_path / "m.json"
    r.save(path)
    back = TriMesh.load(path)
    np.testing.assert_array_equal(back.nodes, r.nodes)
    np.testing.assert_array_equal(back.triangles, r.triangles)
    assert back.edge_tags == r.edge_tags


def test_mesh_resolution_error():
    with pytest.raises(MeshResolutionError):
        mesh_domain(disc(64, 2.0), disc(64, 1.9), 0.1)


# ---------------------------------------------------------------- solvers
def test_nonlinear_matches_linear_eigenproblem(disc_mesh):
    lin = linear_steklov_reference(disc_mesh)
    non = minimize_trace_quotient(disc_mesh, 2, 2)
    assert non.sigma == pytest.approx(lin.sigma, rel=1e-8)
    assert non.positive and lin.positive
    # the 256-gon sits a little below the disc, the discretization a little above the 256-gon
    assert non.sigma == pytest.approx(SIGMA22_BALL_D2, abs=2e-3)


def test_refinement_decreases_sigma():
    m = mesh_domain(regular_polygon(5).with_perimeter(2 * math.pi), None, 0.15)
    s0 = linear_steklov_reference(m).sigma
    s1 = linear_steklov_reference(m.refine()).sigma
    s2 = linear_steklov_reference(m.refine().refine()).sigma
    assert s0 >= s1 >= s2


def test_disc_minimizer_is_radial(disc_mesh):
    sol = minimize_trace_quotient(disc_mesh, 2, 2)
    assert radiality_check(sol, disc_mesh) <= 0.05


def test_shell_exterior_constant():
    m = annulus_mesh(0.05)
    sol = minimize_trace_quotient(m, 2, 2, boundary=OUTER)
    assert sol.sigma == pytest.approx(SIGMA22_SHELL_12, abs=2e-3)
    assert sol.sigma >= SIGMA22_SHELL_12 - 2e-4  # polygonal boundary nearly circular
    assert radiality_check(sol, m) <= 0.05


@pytest.mark.parametrize("p, q", [(3.0, 2.0), (1.5, 1.5)])
def test_nonlinear_against_radial_solver(disc_mesh, p, q):
    sol = minimize_trace_quotient(disc_mesh, p, q)
    ref = sigma_ball(p, q, 2, 1.0)
    assert ref == pytest.approx(oracles.sigma_ball_shooting(p, q, 2, 1.0), rel=1e-9)
    assert sol.sigma == pytest.approx(ref, rel=5e-3)
    assert sol.positive


def test_robin_neumann_against_bessel():
    res = robin_neumann_fem(annulus_mesh(0.05), 2, -1.0)
    assert res.eigenvalue < 0
    assert res.eigenvalue == pytest.approx(ROBIN22_SHELL_12, rel=1e-2)
    assert res.positive


def test_parameter_and_convergence_errors(disc_mesh):
    with pytest.raises(ValueError):
        minimize_trace_quotient(disc_mesh, 2, 3)
    with pytest.raises(ValueError):
        robin_neumann_fem(disc_mesh, 2, 1.0)
    with pytest.raises(NonConvergenceError) as info:
        minimize_trace_quotient(disc_mesh, 3, 2, options=SolverOptions(max_iter=1))
    assert info.value.iterate is not None
