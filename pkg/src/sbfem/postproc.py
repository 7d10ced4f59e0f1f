"""Error norms against exact solutions, convergence rates, CSV emission."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import QuadratureError, SbfemError
from .polyspace import facet_quadrature, radial_quadrature
from .refgeom import FacetKind
from .solver import DiscreteSolution, evaluate_in_fe, evaluate_in_sector

SINGULAR_COMPOSITE_LEVELS = 8
SINGULAR_COMPOSITE_RATIO = 0.2


@dataclass(frozen=True)
class ExactSolution:
    """Closed-form harmonic reference solution."""

    name: str
    dim: int
    value: object              # (n, d) -> (n,)
    gradient: object           # (n, d) -> (n, d)
    neumann_predicate: object = None   # facet midpoint -> True for natural BC

    def dirichlet_facets(self, mesh) -> list[int]:
        fids = mesh.boundary_facet_ids()
        if self.neumann_predicate is None:
            return fids
        out = []
        for fid in fids:
            mid = mesh.vertices[list(mesh.facets[fid].vertices)].mean(axis=0)
            if not self.neumann_predicate(mid):
                out.append(fid)
        return out


def _exp2d_value(x):
    return np.exp(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])


def _exp2d_grad(x):
    e = np.exp(np.pi * x[:, 0])
    return np.pi * np.column_stack([e * np.sin(np.pi * x[:, 1]),
                                    e * np.cos(np.pi * x[:, 1])])


def _exp3d_value(x):
    q = 0.25 * np.pi
    return 4.0 * (np.exp(q * x[:, 0]) * np.sin(q * x[:, 1])
                  + np.exp(q * x[:, 1]) * np.sin(q * x[:, 2]))


def _exp3d_grad(x):
    q = 0.25 * np.pi
    ex, ey = np.exp(q * x[:, 0]), np.exp(q * x[:, 1])
    return np.pi * np.column_stack([
        ex * np.sin(q * x[:, 1]),
        ex * np.cos(q * x[:, 1]) + ey * np.sin(q * x[:, 2]),
        ey * np.cos(q * x[:, 2])])


def _sqrt2d_value(x):
    z = x[:, 0] + 1j * np.abs(x[:, 1])
    return 2.0 ** 0.25 * np.sqrt(z).real


def _sqrt2d_grad(x):
    z = x[:, 0] + 1j * np.abs(x[:, 1])
    df = 0.5 / np.sqrt(z)
    return 2.0 ** 0.25 * np.column_stack([df.real, -df.imag])


def _const_value(x):
    return np.ones(x.shape[0])


EXACT_SOLUTIONS = {
    "exp2d": ExactSolution("exp2d", 2, _exp2d_value, _exp2d_grad),
    "exp3d": ExactSolution("exp3d", 3, _exp3d_value, _exp3d_grad),
    "sqrt2d": ExactSolution(
        "sqrt2d", 2, _sqrt2d_value, _sqrt2d_grad,
        neumann_predicate=lambda mid: abs(mid[1]) < 1e-12 and mid[0] > 0.0),
    "const": ExactSolution("const", 0, _const_value,
                           lambda x: np.zeros_like(x)),
}


def get_exact(name: str) -> ExactSolution:
    try:
        return EXACT_SOLUTIONS[name]
    except KeyError:
        raise SbfemError(f"unknown exact solution '{name}'; registered: "
                         f"{sorted(EXACT_SOLUTIONS)}") from None


@dataclass
class QuadratureConfig:
    """Error-integration orders; None entries use degree-based defaults."""

    facet_order: int | None = None
    radial_points: int | None = None
    composite_levels: int | None = None
    composite_ratio: float = SINGULAR_COMPOSITE_RATIO

    def resolved(self, k: int) -> "QuadratureConfig":
        return QuadratureConfig(
            facet_order=self.facet_order or 2 * k + 4,
            radial_points=self.radial_points or 2 * k + 8,
            composite_levels=self.composite_levels,
            composite_ratio=self.composite_ratio)


def solution_errors(solution: DiscreteSolution, exact: ExactSolution,
                    quad: QuadratureConfig | None = None) -> tuple[float, float]:
    """(L2, energy) errors of a discrete solution against an exact one."""
    k = solution.k
    cfg = (quad or QuadratureConfig()).resolved(k)
    d = solution.mesh.dimension
    acc_l2 = 0.0
    acc_h1 = 0.0
    for op in solution.operators:
        lam_min = op.modes.min_positive_exponent
        if not np.isfinite(lam_min) or lam_min <= 0.0:
            raise QuadratureError(
                f"S-element {op.selement.id}: no positive exponent to set the "
                "radial quadrature floor")
        floor = lam_min - 1.0
        levels = cfg.composite_levels
        if levels is None:
            levels = SINGULAR_COMPOSITE_LEVELS if floor < 0.0 else 0
        n_rad = cfg.radial_points if floor >= 0.0 else max(cfg.radial_points,
                                                           k + 6)
        rad = radial_quadrature(floor, n_rad, levels, cfg.composite_ratio)
        xis = rad.points[:, 0]
        wxi = rad.weights
        for ctx in op.sectors:
            frule = facet_quadrature(ctx.sector.facet_kind, cfg.facet_order)
            from .refgeom import jacobian_columns_many
            _, det = jacobian_columns_many(ctx.sector, frule.points)
            pts, vals, grads = evaluate_in_sector(solution, op, ctx,
                                                  xis, frule.points)
            flat = pts.reshape(-1, d)
            ev = exact.value(flat).reshape(vals.shape)
            eg = exact.gradient(flat).reshape(grads.shape)
            w = np.outer(wxi * xis ** (d - 1), frule.weights * det)
            acc_l2 += float(np.sum(w * (vals - ev) ** 2))
            acc_h1 += float(np.sum(w * np.sum((grads - eg) ** 2, axis=2)))
    if solution.mesh.fe_elements:
        frule = facet_quadrature(FacetKind.QUADRILATERAL, cfg.facet_order)
        for fe in solution.mesh.fe_elements:
            pts, vals, grads, det = evaluate_in_fe(solution, fe, frule.points)
            ev = exact.value(pts)
            eg = exact.gradient(pts)
            w = frule.weights * det
            acc_l2 += float(np.sum(w * (vals - ev) ** 2))
            acc_h1 += float(np.sum(w * np.sum((grads - eg) ** 2, axis=1)))
    return float(np.sqrt(acc_l2)), float(np.sqrt(acc_h1))


def l2_error(solution: DiscreteSolution, exact: ExactSolution,
             quad: QuadratureConfig | None = None) -> float:
    return solution_errors(solution, exact, quad)[0]


def energy_error(solution: DiscreteSolution, exact: ExactSolution,
                 quad: QuadratureConfig | None = None) -> float:
    return solution_errors(solution, exact, quad)[1]


@dataclass
class ErrorReport:
    """Per-level errors and the last-two-level convergence rates."""

    rows: list                 # (level, h, dof, e_l2, e_h1)
    rate_l2: float
    rate_h1: float


def convergence_table(runs: list) -> ErrorReport:
    """Rates log2(e_l / e_{l+1}) from the last two refinement levels."""
    if len(runs) < 1:
        raise SbfemError("convergence table needs at least one level")
    dofs = [r[2] for r in runs]
    if any(b <= a for a, b in zip(dofs, dofs[1:])):
        raise SbfemError(f"DOF sequence {dofs} is not increasing")
    if len(runs) >= 2:
        (_, _, _, l2a, h1a), (_, _, _, l2b, h1b) = runs[-2], runs[-1]
        rate_l2 = float(np.log2(l2a / l2b)) if l2a > 0 and l2b > 0 else 0.0
        rate_h1 = float(np.log2(h1a / h1b)) if h1a > 0 and h1b > 0 else 0.0
    else:
        rate_l2 = rate_h1 = float("nan")
    return ErrorReport(rows=list(runs), rate_l2=rate_l2, rate_h1=rate_h1)


def report_to_csv(report: ErrorReport) -> str:
    out = io.StringIO()
    out.write("level,h,dof,e_l2,e_h1\n")
    for level, h, dof, e_l2, e_h1 in report.rows:
        out.write(f"{level},{h:.5E},{dof},{e_l2:.5E},{e_h1:.5E}\n")
    if np.isfinite(report.rate_l2):
        out.write(f"# rate_l2={report.rate_l2:.5E},rate_h1={report.rate_h1:.5E}\n")
    return out.getvalue()


def laplacian_residual(exact: ExactSolution, points: np.ndarray,
                       step: float = 1e-3) -> float:
    """Scaled finite-difference Laplacian of the registered solution."""
    d = points.shape[1]
    worst = 0.0
    for x in points:
        lap = 0.0
        curv = 0.0
        for axis in range(d):
            e = np.zeros(d)
            e[axis] = step
            trio = np.vstack([x + e, x, x - e])
            v = exact.value(trio)
            second = (v[0] - 2.0 * v[1] + v[2]) / step ** 2
            lap += second
            curv += abs(second)
        worst = max(worst, abs(lap) / max(curv, 1.0))
    return worst
