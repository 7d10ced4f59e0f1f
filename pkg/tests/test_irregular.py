"""Property-based checks on irregular imported meshes (no reference tables)."""

import numpy as np
import pytest

from sbfem.mesh import gen_hex_mesh, import_mesh, number_dofs
from sbfem.postproc import get_exact, solution_errors
from sbfem.solver import (apply_dirichlet, assemble_global, build_operators,
                          sbfem_interpolate, solve)


def jittered_quad_mesh(n, amplitude, seed=0):
    """n x n mesh of general quadrilateral S-elements on [-1,1]^2."""
    rng = np.random.default_rng(seed)
    xs = np.linspace(-1, 1, n + 1)
    pts = {}
    for j in range(n + 1):
        for i in range(n + 1):
            p = np.array([xs[i], xs[j]])
            if 0 < i < n and 0 < j < n:
                p = p + rng.uniform(-amplitude, amplitude, 2) * (2.0 / n)
            pts[(i, j)] = p
    vertices = []
    vid = {}
    for key, p in pts.items():
        vid[key] = len(vertices)
        vertices.append([float(p[0]), float(p[1])])
    sels = []
    for j in range(n):
        for i in range(n):
            loop = [vid[(i, j)], vid[(i + 1, j)], vid[(i + 1, j + 1)],
                    vid[(i, j + 1)]]
            facets = [[loop[t], loop[(t + 1) % 4]] for t in range(4)]
            sels.append({"facets": facets})
    return import_mesh({"dimension": 2, "vertices": vertices,
                        "selements": sels})


def sheared_hex_mesh(n):
    """Affine image of the uniform hex mesh: irregular but planar facets."""
    base = gen_hex_mesh(n)
    M = np.array([[1.0, 0.25, 0.1], [0.0, 1.0, 0.3], [0.05, 0.0, 1.0]])
    data = base.to_json()
    data["vertices"] = [list(M @ np.asarray(v)) for v in data["vertices"]]
    for entry in data["selements"]:
        entry["center"] = list(M @ np.asarray(entry["center"]))
    return import_mesh(data)


def test_jittered_mesh_validates_and_has_no_congruence():
    mesh = jittered_quad_mesh(3, 0.18)
    numbering = number_dofs(mesh, 2)
    cache = {}
    build_operators(mesh, numbering, cache=cache)
    assert len(cache) == 9          # every element distinct


def test_jittered_mesh_spectral_properties():
    mesh = jittered_quad_mesh(3, 0.18)
    numbering = number_dofs(mesh, 2)
    for op in build_operators(mesh, numbering):
        lam = op.modes.all_eigenvalues
        scale = max(np.abs(lam).max(), 1.0)
        mirrored = -lam
        assert np.abs(np.sort_complex(lam)
                      - np.sort_complex(mirrored)).max() < 1e-8 * scale
        w = np.linalg.eigvalsh(op.K)
        assert w.min() > -1e-9 * np.linalg.norm(op.K)


def test_jittered_mesh_galerkin_convergence():
    exact = get_exact("exp2d")
    errs = []
    for n in (3, 6, 12):
        mesh = jittered_quad_mesh(n, 0.15, seed=4)
        system = assemble_global(mesh, 2)
        apply_dirichlet(system, exact.value)
        sol = solve(system)
        e = solution_errors(sol, exact)
        interp = sbfem_interpolate(mesh, 2, exact.value,
                                   operators=system.operators,
                                   numbering=system.numbering)
        # optimality needs the shared nodal trace
        system2 = assemble_global(mesh, 2)
        apply_dirichlet(system2, exact.value, method="nodal")
        sol2 = solve(system2)
        e2 = solution_errors(sol2, exact)
        ei = solution_errors(interp, exact)
        assert e2[1] <= ei[1] * (1 + 1e-9)
        errs.append(e)
    rate_h1 = np.log2(errs[-2][1] / errs[-1][1])
    rate_l2 = np.log2(errs[-2][0] / errs[-1][0])
    assert rate_h1 == pytest.approx(2.0, abs=0.3)
    assert rate_l2 == pytest.approx(3.0, abs=0.4)


def test_sheared_hex_mesh_solves():
    exact = get_exact("exp3d")
    errs = []
    for n in (1, 2):
        mesh = sheared_hex_mesh(n)
        system = assemble_global(mesh, 2)
        apply_dirichlet(system, exact.value)
        sol = solve(system)
        errs.append(solution_errors(sol, exact))
        assert sol.residual < 1e-10
    assert errs[1][1] < 0.4 * errs[0][1]
    assert errs[1][0] < 0.25 * errs[0][0]


def test_mixed_polygon_mesh():
    # pentagon + triangle + quadrilateral sharing edges, fully irregular
    mesh = import_mesh({
        "dimension": 2,
        "vertices": [[0, 0], [1.2, 0], [1.6, 1.0], [0.7, 1.7], [-0.4, 1.0],
                     [2.4, 0.4], [2.2, 1.6]],
        "selements": [
            {"facets": [[0, 1], [1, 2], [2, 3], [3, 4], [4, 0]]},
            {"facets": [[1, 5], [5, 2], [2, 1]]},
            {"facets": [[5, 6], [6, 2], [2, 5]]},
        ],
    })
    exact = get_exact("exp2d")
    rel = {}
    for k in (3, 4):
        system = assemble_global(mesh, k)
        apply_dirichlet(system, exact.value)
        sol = solve(system)
        e_l2, e_h1 = solution_errors(sol, exact)
        zero = sbfem_interpolate(mesh, k, 0.0, operators=system.operators,
                                 numbering=system.numbering)
        u_l2, u_h1 = solution_errors(zero, exact)   # norms of the solution
        rel[k] = (e_l2 / u_l2, e_h1 / u_h1)
    assert rel[3][1] < 0.15 and rel[3][0] < 0.05
    # p-refinement pays off on the irregular mesh
    assert rel[4][1] < 0.4 * rel[3][1]
    assert rel[4][0] < 0.4 * rel[3][0]
    # linear exactness on the same mesh
    system = assemble_global(mesh, 3)
    apply_dirichlet(system, lambda x: 2.0 * x[:, 0] - x[:, 1] + 0.5)
    sol = solve(system)
    expect = 2.0 * system.numbering.coords[:, 0] \
        - system.numbering.coords[:, 1] + 0.5
    assert np.abs(sol.nodal - expect).max() < 1e-9
