"""Galerkin assembly and solve, SBFEM interpolation, and coupled FE elements.

Every unknown lives on the mesh skeleton (plus FE element interiors in the
coupled formulation).  S-element stiffness matrices come from the boundary
flux of the eigen-modes; standard tensor-product Q_k quadrilaterals couple
through shared interface traces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from . import modes as modes_mod
from .ematrix import EMatrices, assemble_E
from .errors import AssemblyError, SolveError
from .mesh import (DofNumbering, FEQuad, PolytopalMesh, SElement,
                   number_dofs, selement_local_dofs)
from .polyspace import facet_quadrature, trace_basis
from .refgeom import FacetKind, Sector


@dataclass
class SectorContext:
    sector: Sector
    basis: object
    rows: np.ndarray           # S-local trace index of each sector node
    facet_id: int


@dataclass
class SElementOperator:
    """Modes, stiffness and sector data of one S-element."""

    selement: SElement
    E: EMatrices               # side-face-reduced coefficient matrices
    modes: modes_mod.SbfemModes
    K: np.ndarray              # stiffness over the kept trace DOFs
    dofs_full: np.ndarray      # global ids of all Gamma^S trace DOFs
    kept_local: np.ndarray     # indices of unconstrained DOFs in the full set
    sectors: list
    A_eval: np.ndarray         # complex (n_full, n_modes); constrained rows zero

    @property
    def dofs_kept(self) -> np.ndarray:
        return self.dofs_full[self.kept_local]

    def coefficients(self, nodal: np.ndarray) -> np.ndarray:
        """Realified modal coefficients reproducing the global nodal values."""
        return np.linalg.solve(self.modes.A_re, nodal[self.dofs_kept])

    def complex_coefficients(self, coeffs: np.ndarray) -> np.ndarray:
        """Coefficients of the complex modes for realified coefficients."""
        return self.modes.pair_transform @ coeffs

    def sector_mode_rows(self, ctx) -> np.ndarray:
        """Sector node rows in the reduced mode space; -1 where constrained."""
        pos = -np.ones(len(self.dofs_full), dtype=int)
        pos[self.kept_local] = np.arange(len(self.kept_local))
        return pos[ctx.rows]


def _congruence_key(mesh: PolytopalMesh, sel: SElement, sector_rows, k: int,
                    constrained_local) -> tuple:
    parts = [mesh.dimension, k, tuple(int(c) for c in constrained_local)]
    for pos, fid in enumerate(sel.facet_ids):
        sector = mesh.sector(sel, pos)
        rel = np.round(sector.facet_vertices - sel.center, 12)
        parts.append((sector.facet_kind.value, rel.tobytes(),
                      tuple(int(r) for r in sector_rows[pos])))
    return tuple(parts)


def build_operators(mesh: PolytopalMesh, numbering: DofNumbering,
                    quad_order: int | None = None,
                    cache: dict | None = None) -> list[SElementOperator]:
    """E-matrices, modes and stiffness for every S-element.

    Congruent S-elements (translated copies, common in the structured
    generators) share one eigen-solve through the cache.
    """
    k = numbering.k
    order = quad_order if quad_order is not None else 2 * k + 2
    cache = {} if cache is None else cache
    ops = []
    for sel in mesh.selements:
        dofs_full, sector_rows = selement_local_dofs(mesh, numbering, sel)
        n_full = len(dofs_full)
        constrained = np.array([], dtype=int)
        if sel.open_boundary is not None and sel.open_boundary.dirichlet_vertices:
            cons = [numbering.vertex_dof[v]
                    for v in sel.open_boundary.dirichlet_vertices]
            constrained = np.array(sorted(
                int(np.flatnonzero(dofs_full == g)[0]) for g in cons), dtype=int)
        key = _congruence_key(mesh, sel, sector_rows, k, constrained)
        hit = cache.get(key)
        if hit is None:
            sector_data = []
            for pos in range(len(sel.facet_ids)):
                sector = mesh.sector(sel, pos)
                basis = trace_basis(sector.facet_kind, k)
                sector_data.append((sector, basis, sector_rows[pos], order))
            E = assemble_E(sector_data, n_full, mesh.dimension,
                           np.arange(n_full))
            kept = np.setdiff1d(np.arange(n_full), constrained)
            E_red = modes_mod.apply_sideface_bc(E, constrained) \
                if constrained.size else E
            system = modes_mod.build_system(E_red, mesh.dimension)
            md = modes_mod.select_modes(system, label=f"S-element {sel.id}")
            K = modes_mod.element_stiffness(md).K
            A_eval = np.zeros((n_full, md.n), dtype=complex)
            A_eval[kept, :] = md.A
            hit = (E_red, md, K, kept, A_eval)
            cache[key] = hit
        E_red, md, K, kept, A_eval = hit
        sectors = []
        for pos in range(len(sel.facet_ids)):
            sector = mesh.sector(sel, pos)
            basis = trace_basis(sector.facet_kind, k)
            sectors.append(SectorContext(sector=sector, basis=basis,
                                         rows=sector_rows[pos],
                                         facet_id=sel.facet_ids[pos]))
        E_here = EMatrices(E11=E_red.E11, E12=E_red.E12, E21=E_red.E21,
                           E22=E_red.E22, dim=E_red.dim,
                           dof_map=dofs_full[kept])
        ops.append(SElementOperator(selement=sel, E=E_here, modes=md, K=K,
                                    dofs_full=dofs_full, kept_local=kept,
                                    sectors=sectors, A_eval=A_eval))
    return ops


# -- standard FE elements (coupled formulation) --------------------------------


def fe_element_stiffness(vertices: np.ndarray, k: int,
                         kind: str = "quad") -> np.ndarray:
    """H^1 Laplace stiffness of a Q_k quadrilateral or P_k triangle (2D)."""
    vertices = np.asarray(vertices, dtype=float)
    if kind == "quad":
        basis = trace_basis(FacetKind.QUADRILATERAL, k)
        helper = Sector(collapsed_vertex=np.zeros(3),
                        facet_vertices=np.column_stack([vertices,
                                                        np.zeros(4)]),
                        facet_kind=FacetKind.QUADRILATERAL)
        rule = facet_quadrature(FacetKind.QUADRILATERAL, 2 * k)
    elif kind == "triangle":
        basis = trace_basis(FacetKind.TRIANGLE, k)
        helper = Sector(collapsed_vertex=np.zeros(3),
                        facet_vertices=np.column_stack([vertices,
                                                        np.zeros(3)]),
                        facet_kind=FacetKind.TRIANGLE)
        rule = facet_quadrature(FacetKind.TRIANGLE, 2 * k)
    else:
        raise AssemblyError(f"unsupported FE element kind '{kind}'")
    _, grads = basis.eval_many(rule.points)
    from .refgeom import facet_tangents_many
    tans = facet_tangents_many(helper, rule.points)[:, :2, :]   # (q, 2, 2)
    det = np.linalg.det(tans)
    if np.any(det <= 0.0):
        raise AssemblyError("inverted FE element")
    JinvT = np.transpose(np.linalg.inv(tans), (0, 2, 1))
    g = JinvT @ grads                                           # (q, 2, m)
    return np.einsum("q,qdi,qdj->ij", rule.weights * det, g, g)


def fe_quad_dofs(mesh: PolytopalMesh, numbering: DofNumbering,
                 fe: FEQuad) -> np.ndarray:
    """Global DOF of each Q_k lattice node (index j*(k+1)+i) of an FE quad."""
    k = numbering.k
    vs = fe.vertices
    corner = {(0, 0): vs[0], (k, 0): vs[1], (k, k): vs[2], (0, k): vs[3]}
    # lattice edge -> (facet id, start corner, end corner)
    edge_of = {"bottom": (fe.edge_facets[0], vs[0], vs[1]),
               "right": (fe.edge_facets[1], vs[1], vs[2]),
               "top": (fe.edge_facets[2], vs[3], vs[2]),
               "left": (fe.edge_facets[3], vs[0], vs[3])}
    ids = np.empty((k + 1) * (k + 1), dtype=int)
    inter = iter(numbering.fe_interior[fe.id])
    for j in range(k + 1):
        for i in range(k + 1):
            n = j * (k + 1) + i
            if (i, j) in corner:
                ids[n] = numbering.vertex_dof[corner[(i, j)]]
                continue
            name = None
            if j == 0:
                name, p = "bottom", i
            elif i == k:
                name, p = "right", j
            elif j == k:
                name, p = "top", i
            elif i == 0:
                name, p = "left", j
            if name is not None:
                fid, va, vb = edge_of[name]
                a, _b = mesh.facets[fid].vertices
                idx = p if va == a else k - p
                ids[n] = numbering.facet_nodes[fid][idx]
            else:
                ids[n] = next(inter)
    return ids


# -- global system ---------------------------------------------------------------


@dataclass
class GlobalSystem:
    mesh: PolytopalMesh
    numbering: DofNumbering
    operators: list
    K: scipy.sparse.csr_matrix
    rhs: np.ndarray
    dirichlet: dict = field(default_factory=dict)   # dof -> value
    touched: np.ndarray = None


def assemble_global(mesh: PolytopalMesh, k: int,
                    quad_order: int | None = None,
                    cache: dict | None = None) -> GlobalSystem:
    """Scatter S-element (and FE element) stiffness into the skeleton system."""
    numbering = number_dofs(mesh, k)
    ops = build_operators(mesh, numbering, quad_order=quad_order, cache=cache)
    n = numbering.n_total
    rows, cols, vals = [], [], []
    touched = np.zeros(n, dtype=bool)
    for op in ops:
        dofs = op.dofs_kept
        touched[dofs] = True
        r, c = np.meshgrid(dofs, dofs, indexing="ij")
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(op.K.ravel())
    fe_cache: dict = {}
    for fe in mesh.fe_elements:
        corners = mesh.vertices[list(fe.vertices)]
        key = np.round(corners - corners[0], 12).tobytes()
        Kel = fe_cache.get(key)
        if Kel is None:
            Kel = fe_element_stiffness(corners, k)
            fe_cache[key] = Kel
        dofs = fe_quad_dofs(mesh, numbering, fe)
        touched[dofs] = True
        r, c = np.meshgrid(dofs, dofs, indexing="ij")
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(Kel.ravel())
    K = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n)).tocsr()
    system = GlobalSystem(mesh=mesh, numbering=numbering, operators=ops,
                          K=K, rhs=np.zeros(n), touched=touched)
    # side-face Dirichlet traces are pinned to zero from the start
    for sel in mesh.selements:
        if sel.open_boundary is not None:
            for v in sel.open_boundary.dirichlet_vertices:
                system.dirichlet[numbering.vertex_dof[v]] = 0.0
    dangling = np.flatnonzero(~touched
                              & ~np.isin(np.arange(n),
                                         list(system.dirichlet.keys())))
    if dangling.size:
        raise AssemblyError(f"{dangling.size} DOFs receive no element "
                            f"contribution (first: {dangling[:5].tolist()})")
    return system


def apply_dirichlet(system: GlobalSystem, g, facet_ids=None,
                    method: str = "project") -> GlobalSystem:
    """Constrain the trace of g on the given (default: all) boundary facets.

    ``method="project"`` takes the L2 projection of g onto the continuous
    trace space of the Dirichlet boundary (weak-style enforcement, the one
    that reproduces the reference convergence tables); ``method="nodal"``
    interpolates g at the equispaced Lagrange nodes.  Both reproduce data
    already in the trace space exactly.
    """
    if facet_ids is None:
        facet_ids = system.mesh.boundary_facet_ids()
    dofs = system.numbering.facet_boundary_dofs(facet_ids)
    if dofs.size == 0 and not system.dirichlet:
        raise SolveError("no Dirichlet boundary: the Laplace system is singular")
    if method == "nodal":
        values = _evaluate_field(g, system.numbering.coords[dofs])
    elif method == "project":
        values = _project_trace(system, g, facet_ids, dofs)
    else:
        raise SolveError(f"unknown Dirichlet method '{method}'")
    for dof, val in zip(dofs, values):
        # side-face pins are exact homogeneous constraints; keep them
        if int(dof) not in system.dirichlet:
            system.dirichlet[int(dof)] = float(val)
    return system


def _project_trace(system: GlobalSystem, g, facet_ids, dofs) -> np.ndarray:
    """L2 projection of g onto the trace space of the given facets."""
    from .refgeom import facet_map_many, facet_tangents_many
    mesh, numbering = system.mesh, system.numbering
    k = numbering.k
    pos = {int(d): i for i, d in enumerate(dofs)}
    M = np.zeros((len(dofs), len(dofs)))
    b = np.zeros(len(dofs))
    for fid in facet_ids:
        facet = mesh.facets[fid]
        basis = trace_basis(facet.kind, k)
        rule = facet_quadrature(facet.kind, 2 * k + 8)
        vals, _ = basis.eval_many(rule.points)
        helper = Sector(collapsed_vertex=np.zeros(mesh.dimension),
                        facet_vertices=mesh.vertices[list(facet.vertices)],
                        facet_kind=facet.kind)
        pts = facet_map_many(helper, rule.points)
        tans = facet_tangents_many(helper, rule.points)
        if mesh.dimension == 2:
            jac = np.linalg.norm(tans[:, :, 0], axis=1)
        else:
            jac = np.linalg.norm(np.cross(tans[:, :, 0], tans[:, :, 1]), axis=1)
        ue = _evaluate_field(g, pts)
        w = rule.weights * jac
        Mel = np.einsum("q,qi,qj->ij", w, vals, vals)
        bel = (w * ue) @ vals
        gl = [pos[int(d)] for d in numbering.facet_nodes[fid]]
        ix = np.ix_(gl, gl)
        M[ix] += Mel
        b[gl] += bel
    return np.linalg.solve(M, b)


def _evaluate_field(g, coords: np.ndarray) -> np.ndarray:
    if callable(g):
        out = g(coords)
        return np.full(coords.shape[0], float(out)) if np.ndim(out) == 0 \
            else np.asarray(out, dtype=float)
    return np.full(coords.shape[0], float(g))


@dataclass
class DiscreteSolution:
    """Nodal skeleton values plus per-S-element modal coefficients."""

    mesh: PolytopalMesh
    numbering: DofNumbering
    operators: list
    nodal: np.ndarray
    coefficients: list         # per S-element modal coefficient vector
    residual: float = 0.0

    @property
    def k(self) -> int:
        return self.numbering.k

    @property
    def n_dofs(self) -> int:
        return self.numbering.n_total


def solve(system: GlobalSystem) -> DiscreteSolution:
    """Direct sparse solve of the constrained Galerkin system."""
    n = system.numbering.n_total
    pinned = np.array(sorted(system.dirichlet.keys()), dtype=int)
    pinned_vals = np.array([system.dirichlet[d] for d in pinned])
    free = np.setdiff1d(np.arange(n), pinned)
    u = np.zeros(n)
    u[pinned] = pinned_vals
    K = system.K
    if free.size:
        Kff = K[free][:, free].tocsc()
        rhs = system.rhs[free] - K[free][:, pinned] @ pinned_vals
        try:
            lu = scipy.sparse.linalg.splu(Kff)
            u[free] = lu.solve(rhs)
        except RuntimeError as exc:
            raise SolveError(f"sparse factorization failed: {exc}") from exc
        res = np.linalg.norm(Kff @ u[free] - rhs)
        scale = max(np.linalg.norm(rhs), np.linalg.norm(Kff @ u[free]), 1e-300)
        residual = float(res / scale)
        if residual > 1e-10:
            raise SolveError(f"solver residual {residual:.2e} exceeds 1e-10")
    else:
        residual = 0.0
    coeffs = [op.coefficients(u) for op in system.operators]
    return DiscreteSolution(mesh=system.mesh, numbering=system.numbering,
                            operators=system.operators, nodal=u,
                            coefficients=coeffs, residual=residual)


def sbfem_interpolate(mesh: PolytopalMesh, k: int, f,
                      quad_order: int | None = None,
                      cache: dict | None = None,
                      operators: list | None = None,
                      numbering: DofNumbering | None = None) -> DiscreteSolution:
    """Radial extension of the nodal trace interpolant of f."""
    if numbering is None:
        numbering = number_dofs(mesh, k)
    if operators is None:
        operators = build_operators(mesh, numbering, quad_order=quad_order,
                                    cache=cache)
    nodal = _evaluate_field(f, numbering.coords)
    coeffs = [op.coefficients(nodal) for op in operators]
    return DiscreteSolution(mesh=mesh, numbering=numbering,
                            operators=operators, nodal=nodal,
                            coefficients=coeffs)


# -- evaluation helpers -----------------------------------------------------------


def evaluate_in_sector(solution: DiscreteSolution, op: SElementOperator,
                       ctx: SectorContext, xis: np.ndarray, etas: np.ndarray):
    """Values, gradients and mapped points on a (xi, eta) tensor grid.

    Returns (points, values, gradients) with shapes (R, Q, d), (R, Q) and
    (R, Q, d).  Evaluation runs over the complex modes with complexified
    coefficients; results are real up to round-off and returned real.
    """
    from .ematrix import sector_B_many
    from .refgeom import duffy_map_many
    md = op.modes
    c = op.complex_coefficients(solution.coefficients[op.selement.id])
    alpha = op.A_eval[ctx.rows, :]                     # (m, n_modes) complex
    nvals, _ = ctx.basis.eval_many(etas)               # (Q, m)
    xis = np.asarray(xis, dtype=float)
    Z, Z1 = md.radial_complex(xis)
    pts = duffy_map_many(ctx.sector, xis, etas)
    T = nvals @ alpha                                   # (Q, n_modes)
    values = ((Z * c[None, :]) @ T.T).real              # (R, Q)
    B1, B2, _ = sector_B_many(ctx.sector, ctx.basis, etas)
    C1 = np.einsum("qdm,mi->qdi", B1, alpha)
    C2 = np.einsum("qdm,mi->qdi", B2, alpha)
    W1 = Z1 * (md.lambdas * c)[None, :]
    W2 = Z1 * c[None, :]
    grads = (np.einsum("ri,qdi->rqd", W1, C1)
             + np.einsum("ri,qdi->rqd", W2, C2)).real
    return pts, values, grads


def evaluate_in_fe(solution: DiscreteSolution, fe: FEQuad, ref_pts: np.ndarray):
    """Values, gradients and mapped points of the FE part at reference points."""
    mesh, numbering = solution.mesh, solution.numbering
    k = numbering.k
    basis = trace_basis(FacetKind.QUADRILATERAL, k)
    dofs = fe_quad_dofs(mesh, numbering, fe)
    uel = solution.nodal[dofs]
    nvals, ngrads = basis.eval_many(ref_pts)
    corners = mesh.vertices[list(fe.vertices)]
    helper = Sector(collapsed_vertex=np.zeros(3),
                    facet_vertices=np.column_stack([corners, np.zeros(4)]),
                    facet_kind=FacetKind.QUADRILATERAL)
    from .refgeom import facet_map_many, facet_tangents_many
    pts = facet_map_many(helper, ref_pts)[:, :2]
    tans = facet_tangents_many(helper, ref_pts)[:, :2, :]
    det = np.linalg.det(tans)
    JinvT = np.transpose(np.linalg.inv(tans), (0, 2, 1))
    values = nvals @ uel
    grads = np.einsum("qde,qem->qdm", JinvT, ngrads) @ uel
    return pts, values, grads, det
