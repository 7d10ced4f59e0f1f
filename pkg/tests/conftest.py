"""Shared fixtures: canonical S-elements and numeric oracles."""

import numpy as np
import pytest

from sbfem.mesh import (PolytopalMesh, gen_hex_mesh, gen_polygon_case1,
                        gen_polyhedron_case1, gen_quad_mesh, import_mesh,
                        number_dofs, singular_open_selement)
from sbfem.polyspace import facet_quadrature, radial_quadrature
from sbfem.refgeom import jacobian_columns_many
from sbfem.solver import build_operators


def operator_for(mesh, k, quad_order=None):
    """The S-element operator of a (usually single-element) mesh."""
    numbering = number_dofs(mesh, k)
    return build_operators(mesh, numbering, quad_order=quad_order)[0]


def polygon_mesh(vertices) -> PolytopalMesh:
    """Closed single-polygon S-element mesh from CCW vertices."""
    vertices = np.asarray(vertices, dtype=float)
    m = len(vertices)
    return import_mesh({
        "dimension": 2,
        "vertices": [list(map(float, v)) for v in vertices],
        "selements": [{"facets": [[i, (i + 1) % m] for i in range(m)]}],
    })


def random_polygon_mesh(rng, n_vertices=None) -> PolytopalMesh:
    m = int(n_vertices or rng.integers(4, 9))
    angles = np.sort(rng.uniform(0, 2 * np.pi, m))
    while np.min(np.diff(angles, append=angles[0] + 2 * np.pi)) < 0.25:
        angles = np.sort(rng.uniform(0, 2 * np.pi, m))
    radii = rng.uniform(0.75, 1.3, m)
    verts = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    return polygon_mesh(verts)


def affine_cube_mesh(rng) -> PolytopalMesh:
    """Random parallelepiped (planar faces) as a single S-element."""
    while True:
        M = np.eye(3) + rng.uniform(-0.35, 0.35, (3, 3))
        if np.linalg.det(M) > 0.3:
            break
    cube = np.array([[x, y, z] for z in (0, 1) for y in (0, 1) for x in (0, 1)],
                    dtype=float)
    verts = cube @ M.T
    c = [0, 1, 3, 2, 4, 5, 7, 6]   # counter-clockwise bottom / top
    faces = [[c[0], c[3], c[2], c[1]], [c[4], c[5], c[6], c[7]],
             [c[0], c[1], c[5], c[4]], [c[1], c[2], c[6], c[5]],
             [c[2], c[3], c[7], c[6]], [c[3], c[0], c[4], c[7]]]
    return import_mesh({
        "dimension": 3,
        "vertices": [list(map(float, v)) for v in verts],
        "selements": [{"facets": faces}],
    })


def octahedron_mesh() -> PolytopalMesh:
    """Regular octahedron: eight triangular facets, tetrahedral sectors."""
    verts = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]]
    faces = [[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
             [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]]
    return import_mesh({"dimension": 3, "vertices": verts,
                        "selements": [{"facets": faces}]})


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def square_mesh():
    return gen_quad_mesh(1)


@pytest.fixture(scope="session")
def octagon_mesh():
    return gen_polygon_case1(1)


@pytest.fixture(scope="session")
def cube_mesh():
    return gen_hex_mesh(1)


@pytest.fixture(scope="session")
def cube24_mesh():
    return gen_polyhedron_case1(1)


@pytest.fixture(scope="session")
def wedge_mesh():
    return singular_open_selement(2)


@pytest.fixture(scope="session")
def pentagon_mesh(rng):
    return random_polygon_mesh(np.random.default_rng(7), 5)


def fixture_meshes_2d():
    return [("square", gen_quad_mesh(1)),
            ("octagon", gen_polygon_case1(1)),
            ("pentagon", random_polygon_mesh(np.random.default_rng(7), 5))]


def fixture_meshes_3d():
    return [("cube", gen_hex_mesh(1)),
            ("affine-cube", affine_cube_mesh(np.random.default_rng(11))),
            ("octahedron", octahedron_mesh())]


def volume_gradient_inner(op, alpha, mu, rho, drho, sigma, dsigma,
                          facet_order=24, radial_points=20):
    """Tensor-quadrature oracle for the gradient inner product of two Duffy
    functions with polynomial radial parts vanishing at the center."""
    from sbfem.ematrix import sector_B_many
    d = op.E.dim
    rad = radial_quadrature(1.0, radial_points, 0)
    total = 0.0
    for ctx in op.sectors:
        frule = facet_quadrature(ctx.sector.facet_kind, facet_order)
        B1, B2, det = sector_B_many(ctx.sector, ctx.basis, frule.points)
        a = alpha[ctx.rows]
        m_ = mu[ctx.rows]
        for xi, wx in zip(rad.points[:, 0], rad.weights):
            gphi = (np.einsum("qdi,i->qd", B1, a) * drho(xi)
                    + np.einsum("qdi,i->qd", B2, a) * (rho(xi) / xi))
            gpsi = (np.einsum("qdi,i->qd", B1, m_) * dsigma(xi)
                    + np.einsum("qdi,i->qd", B2, m_) * (sigma(xi) / xi))
            total += wx * xi ** (d - 1) * np.sum(
                frule.weights * det * np.einsum("qd,qd->q", gphi, gpsi))
    return total


def fd_mode_gradients(op, ctx, xi, eta, step=1e-6):
    """Finite-difference oracle for the Cartesian mode gradients.

    Central differences of the mode values in the parametric coordinates,
    pushed through the (independently verified) surface Jacobian.
    """
    from sbfem.modes import shape_eval
    rows = op.sector_mode_rows(ctx)
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    dm1 = len(eta)
    partials = []
    vp, _ = shape_eval(op.modes, rows, ctx.sector, ctx.basis, xi + step, eta)
    vm, _ = shape_eval(op.modes, rows, ctx.sector, ctx.basis, xi - step, eta)
    partials.append((vp - vm) / (2 * step))
    for a in range(dm1):
        e = np.zeros(dm1)
        e[a] = step
        vp, _ = shape_eval(op.modes, rows, ctx.sector, ctx.basis, xi, eta + e)
        vm, _ = shape_eval(op.modes, rows, ctx.sector, ctx.basis, xi, eta - e)
        partials.append((vp - vm) / (2 * step))
    P = np.vstack(partials)                         # (d, n_modes) parametric
    J1, _ = jacobian_columns_many(ctx.sector, eta[None, :])
    J = J1[0].copy()
    J[:, 1:] *= xi
    return np.linalg.solve(J.T, P)
