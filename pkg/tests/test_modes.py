import numpy as np
import pytest

from conftest import (affine_cube_mesh, fd_mode_gradients, fixture_meshes_2d,
                      fixture_meshes_3d, operator_for, random_polygon_mesh)
from sbfem.errors import GeometryError, SpectrumError
from sbfem.mesh import number_dofs, singular_open_selement
from sbfem.modes import (apply_sideface_bc, build_system, eigenvalue_rows,
                         ode_residual_at, orthogonality_residual,
                         quadratic_residual, select_modes, shape_eval,
                         stiffness_from_gram)


def all_fixture_ops(ks=(1, 2)):
    out = []
    for name, mesh in fixture_meshes_2d() + fixture_meshes_3d():
        for k in ks:
            out.append((f"{name}-k{k}", operator_for(mesh, k)))
    return out


def test_euler_blocks_2d(square_mesh):
    op = operator_for(square_mesh, 1)
    E = op.E
    system = build_system(E, 2)
    n = E.n
    Y = np.linalg.inv(E.E11)
    assert np.allclose(system.M[:n, :n], -Y @ E.E12)
    assert np.allclose(system.M[:n, n:], Y)
    # for d = 2 the lower-right block reduces to the bare cross term
    assert np.allclose(system.M[n:, n:], E.E21 @ Y)


def test_square_full_spectrum(square_mesh):
    op = operator_for(square_mesh, 1)
    lam = np.sort(op.modes.all_eigenvalues.real)
    assert np.abs(op.modes.all_eigenvalues.imag).max() < 1e-7
    assert lam == pytest.approx([-2, -1, -1, 0, 0, 1, 1, 2], abs=1e-8)


def test_square_selected_modes(square_mesh):
    op = operator_for(square_mesh, 1)
    lam = np.sort(op.modes.lambdas.real)
    assert lam == pytest.approx([0, 1, 1, 2], abs=1e-8)
    ci = op.modes.constant_index
    assert ci is not None
    col = op.modes.A_re[:, ci]
    assert np.abs(col - col[0]).max() < 1e-12
    assert np.linalg.norm(op.modes.P_re[:, ci]) < 1e-10


def test_cube_pairing(cube_mesh):
    op = operator_for(cube_mesh, 1)
    lam = op.modes.all_eigenvalues
    mirrored = -(lam + 1.0)
    a = np.sort_complex(np.round(lam, 8))
    b = np.sort_complex(np.round(mirrored, 8))
    assert np.abs(a - b).max() < 1e-7
    sel = np.sort(op.modes.lambdas.real)
    assert sel == pytest.approx([0, 1, 1, 1, 2, 2, 2, 3], abs=1e-7)


@pytest.mark.parametrize("dim", [2, 3])
def test_eigenvalue_pairing_randomized(dim, rng):
    for trial in range(10):
        if dim == 2:
            mesh = random_polygon_mesh(np.random.default_rng(100 + trial))
        else:
            mesh = affine_cube_mesh(np.random.default_rng(200 + trial))
        op = operator_for(mesh, 1 + trial % 2)
        lam = op.modes.all_eigenvalues
        scale = max(np.abs(lam).max(), 1.0)
        mirrored = -(lam + (dim - 2))
        a = np.sort_complex(lam)
        b = np.sort_complex(mirrored)
        assert np.abs(a - b).max() < 1e-8 * scale


def test_exactly_one_constant_mode():
    for name, op in all_fixture_ops():
        ci = op.modes.constant_index
        assert ci == 0, name
        near_zero = np.abs(op.modes.lambdas) < 1e-8
        assert near_zero.sum() == 1, name


def test_ode_residual_invariant(rng):
    for name, op in all_fixture_ops():
        res = quadratic_residual(op.modes, op.E)
        assert res < 1e-7, (name, res)
        xis = rng.uniform(0.05, 0.95, 20)
        assert ode_residual_at(op.modes, op.E, xis) < 1e-7, name


def test_flux_consistency():
    # eigenvector flux part equals (lambda E11 + E12) A
    for name, op in all_fixture_ops(ks=(2,)):
        md, E = op.modes, op.E
        for i, lam in enumerate(md.lambdas):
            expect = (lam * E.E11 + E.E12) @ md.A[:, i]
            assert np.abs(md.P[:, i] - expect).max() < 1e-8 * max(
                1.0, np.abs(expect).max()), name


def test_constant_mode_evaluation(square_mesh):
    op = operator_for(square_mesh, 1)
    ctx = op.sectors[0]
    for xi, eta in [(0.5, 0.2), (1.0, -0.7), (0.0, 0.0)]:
        vals, grads = shape_eval(op.modes, op.sector_mode_rows(ctx), ctx.sector, ctx.basis,
                                 xi, eta)
        ci = op.modes.constant_index
        norm = op.modes.A_re[0, ci]
        assert vals[ci] / norm == pytest.approx(1.0, abs=1e-12)
        assert np.abs(grads[:, ci]).max() < 1e-10


def test_square_top_mode_is_xy(square_mesh, rng):
    op = operator_for(square_mesh, 1)
    idx = int(np.argmax(op.modes.lambdas.real))
    assert op.modes.lambdas[idx].real == pytest.approx(2.0, abs=1e-9)
    ctx = op.sectors[0]
    from sbfem.refgeom import duffy_map
    xi0, eta0 = 0.77, 0.31
    v0, _ = shape_eval(op.modes, op.sector_mode_rows(ctx), ctx.sector, ctx.basis, xi0, eta0)
    x0 = duffy_map(ctx.sector, xi0, eta0)
    c = v0[idx] / (x0[0] * x0[1])
    for _ in range(50):
        xi, eta = rng.uniform(0.1, 1.0), rng.uniform(-1, 1)
        vals, _ = shape_eval(op.modes, op.sector_mode_rows(ctx), ctx.sector, ctx.basis, xi, eta)
        x = duffy_map(ctx.sector, xi, eta)
        assert vals[idx] == pytest.approx(c * x[0] * x[1], abs=1e-9 * abs(c))


def test_shape_gradients_match_finite_differences(rng):
    for name, op in all_fixture_ops(ks=(2,)):
        ctx = op.sectors[0]
        kind = ctx.sector.facet_kind
        for _ in range(20):
            xi = rng.uniform(0.25, 0.9)
            if kind.name == "SEGMENT":
                eta = rng.uniform(-0.8, 0.8, 1)
            elif kind.name == "QUADRILATERAL":
                eta = rng.uniform(-0.8, 0.8, 2)
            else:
                eta = rng.dirichlet([1, 1, 1])[:2] * 0.75
            _, grads = shape_eval(op.modes, op.sector_mode_rows(ctx), ctx.sector, ctx.basis,
                                  xi, eta)
            fd = fd_mode_gradients(op, ctx, xi, eta)
            scale = max(np.abs(grads).max(), 1.0)
            assert np.abs(grads - fd).max() < 1e-5 * scale, name


def test_gradient_at_center_domain_error(wedge_mesh):
    op = operator_for(wedge_mesh, 1)
    ctx = op.sectors[0]
    with pytest.raises(GeometryError):
        shape_eval(op.modes, op.sector_mode_rows(ctx), ctx.sector, ctx.basis, 0.0, 0.0)


def test_stiffness_properties():
    for name, op in all_fixture_ops():
        K = op.K
        n = K.shape[0]
        assert np.abs(K - K.T).max() < 1e-9 * np.linalg.norm(K), name
        w = np.linalg.eigvalsh(K)
        assert w.min() > -1e-9 * np.linalg.norm(K), name
        if not op.selement.is_open:
            ones = np.ones(n)
            assert np.linalg.norm(K @ ones) < 1e-9 * np.linalg.norm(K), name
            # kernel is exactly the constants
            assert (w > 1e-8 * w.max()).sum() == n - 1, name


def test_stiffness_matches_gram():
    for name, op in all_fixture_ops():
        K2 = stiffness_from_gram(op.modes, op.E)
        err = np.linalg.norm(op.K - K2) / np.linalg.norm(op.K)
        assert err < 1e-7, (name, err)


def test_square_stiffness_is_bilinear_fem(square_mesh):
    # S-functions with piecewise-linear traces on the square span Q1, so the
    # stiffness must match the classical bilinear element matrix
    op = operator_for(square_mesh, 1)
    coords = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)
    from sbfem.mesh import number_dofs
    nd = number_dofs(square_mesh, 1)
    # classical Q1 stiffness on [-1,1]^2 in the same dof order
    import itertools
    from numpy.polynomial.legendre import leggauss
    xg, wg = leggauss(3)
    Kq1 = np.zeros((4, 4))
    order = []
    for g in op.dofs_kept:
        xy = nd.coords[g]
        order.append(np.argmin(np.linalg.norm(coords - xy, axis=1)))
    for xi, wx in itertools.product(range(3), range(3)):
        u, v = xg[xi], xg[wx]
        dN = np.array([[-(1 - v), -(1 - u)], [(1 - v), -(1 + u)],
                       [(1 + v), (1 + u)], [-(1 + v), (1 - u)]]) * 0.25
        Kq1 += wg[xi] * wg[wx] * dN @ dN.T
    Kq1 = Kq1[np.ix_(order, order)]
    assert np.abs(op.K - Kq1).max() < 1e-8
    assert np.abs(np.diag(Kq1) - 2.0 / 3.0).max() < 1e-12
    assert np.abs(op.K.sum(axis=1)).max() < 1e-10


def test_square_stiffness_matches_volume_quadrature(square_mesh):
    # modes are polynomials here, so tensor quadrature integrates exactly
    from sbfem.polyspace import facet_quadrature, radial_quadrature
    from sbfem.ematrix import sector_B_many
    op = operator_for(square_mesh, 1)
    md = op.modes
    n = md.n
    R = md.pair_transform
    rad = radial_quadrature(1.0, 8, 0)
    G = np.zeros((n, n), dtype=complex)
    for ctx in op.sectors:
        frule = facet_quadrature(ctx.sector.facet_kind, 8)
        B1, B2, det = sector_B_many(ctx.sector, ctx.basis, frule.points)
        alpha = md.A[ctx.rows, :]
        Zs, Z1s = md.radial_complex(rad.points[:, 0])
        C1 = np.einsum("qdm,mi->qdi", B1, alpha)
        C2 = np.einsum("qdm,mi->qdi", B2, alpha)
        W1 = Z1s * md.lambdas[None, :]
        grads = (np.einsum("ri,qdi->rqdi", W1, C1)
                 + np.einsum("ri,qdi->rqdi", Z1s, C2))
        w = np.outer(rad.weights * rad.points[:, 0], frule.weights * det)
        G += np.einsum("rq,rqdi,rqdj->ij", w, grads, grads)
    G_re = (R.T @ G @ R).real
    K_vol = np.linalg.inv(md.A_re).T @ G_re @ np.linalg.inv(md.A_re)
    assert np.abs(K_vol - op.K).max() < 1e-8


def test_sideface_reduction_counts(wedge_mesh):
    from sbfem.mesh import selement_local_dofs
    nd = number_dofs(wedge_mesh, 1)
    sel = wedge_mesh.selements[0]
    dofs, rows = selement_local_dofs(wedge_mesh, nd, sel)
    from sbfem.ematrix import assemble_E
    from sbfem.polyspace import trace_basis
    data = []
    for pos in range(len(sel.facet_ids)):
        sector = wedge_mesh.sector(sel, pos)
        data.append((sector, trace_basis(sector.facet_kind, 1), rows[pos], 4))
    E = assemble_E(data, len(dofs), 2, dofs)
    reduced = apply_sideface_bc(E, np.array([3]))
    assert reduced.n == E.n - 1
    same = apply_sideface_bc(E, np.array([], dtype=int))
    assert same.n == E.n
    with pytest.raises(SpectrumError):
        apply_sideface_bc(E, np.arange(E.n))
    with pytest.raises(SpectrumError):
        apply_sideface_bc(E, np.array([E.n + 3]))


def test_wedge_min_exponent_half():
    mesh = singular_open_selement(4)
    op = operator_for(mesh, 3)
    assert abs(op.modes.min_positive_exponent - 0.5) < 1e-3
    assert op.modes.constant_index is None
    # count equals the constrained DOF count
    assert op.modes.n == len(op.dofs_full) - 1


def test_orthogonality_defining_and_extended(rng):
    for name, op in all_fixture_ops():
        r1 = orthogonality_residual(op.modes, op.E, [0.0, 1.0, -1.0], rng=rng)
        r2 = orthogonality_residual(op.modes, op.E, [1.0, -3.0, 3.0, -1.0],
                                    rng=rng)
        assert r1 < 1e-9, (name, r1)
        assert r2 < 1e-9, (name, r2)
        traces = rng.standard_normal((4, op.E.n))
        r3 = orthogonality_residual(op.modes, op.E, [0.0, 1.0, -1.0],
                                    traces=traces)
        assert r3 < 1e-9, (name, r3)


def test_defective_detection_by_condition_cap(square_mesh):
    op_E = operator_for(square_mesh, 1).E
    system = build_system(op_E, 2)
    with pytest.raises(SpectrumError):
        select_modes(system, cond_cap=1.0)


def test_eigenvalue_rows_format(square_mesh):
    op = operator_for(square_mesh, 1)
    rows = eigenvalue_rows(op.modes)
    assert len(rows) == 8
    assert sum(sel for _, _, sel in rows) == 3   # positives; constant replaced
    assert rows == sorted(rows)
