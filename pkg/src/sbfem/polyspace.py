"""Polynomial trace spaces on reference facets and quadrature rules.

Nodal Lagrange bases on equispaced nodes: P_k on the segment [-1,1] and on
the unit triangle, Q_{k,k} on the quadrilateral [-1,1]^2.  Quadrature is
Gauss-Legendre based; the triangle rule is a Duffy tensorization of 1D Gauss
rules, and the radial rule on [0,1] supports composite geometric subdivision
with a Gauss-Jacobi cell next to the origin for weakly singular integrands.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import QuadratureError
from .refgeom import FacetKind

MAX_DEGREE = 8


def _segment_nodes(k: int) -> np.ndarray:
    return np.linspace(-1.0, 1.0, k + 1)


def _monomial_powers(kind: FacetKind, k: int) -> np.ndarray:
    if kind is FacetKind.SEGMENT:
        return np.arange(k + 1)[:, None]
    if kind is FacetKind.QUADRILATERAL:
        i, j = np.meshgrid(np.arange(k + 1), np.arange(k + 1), indexing="ij")
        return np.column_stack([i.ravel(order="F"), j.ravel(order="F")])
    pows = [(i, j) for j in range(k + 1) for i in range(k + 1 - j)]
    return np.array(pows, dtype=int)


def _lattice_nodes(kind: FacetKind, k: int) -> np.ndarray:
    if kind is FacetKind.SEGMENT:
        return _segment_nodes(k)[:, None]
    if kind is FacetKind.QUADRILATERAL:
        t = _segment_nodes(k)
        u, v = np.meshgrid(t, t, indexing="ij")
        # index n = j*(k+1) + i: first lattice direction fastest
        return np.column_stack([u.ravel(order="F"), v.ravel(order="F")])
    nodes = [(i / k, j / k) for j in range(k + 1) for i in range(k + 1 - j)]
    return np.array(nodes, dtype=float)


@dataclass(frozen=True)
class TraceBasis:
    """Nodal Lagrange basis for the trace space V_k on a reference facet."""

    facet_kind: FacetKind
    degree: int
    nodes: np.ndarray          # (cardinality, d-1)
    powers: np.ndarray         # monomial exponents, (cardinality, d-1)
    coeffs: np.ndarray         # inverse Vandermonde: column l = basis function l

    @property
    def cardinality(self) -> int:
        return self.nodes.shape[0]

    def eval_many(self, etas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Basis values and eta-gradients at several points.

        Returns (values, grads) with shapes (q, cardinality) and
        (q, d-1, cardinality).
        """
        etas = np.atleast_2d(np.asarray(etas, dtype=float))
        q = etas.shape[0]
        nvar = self.powers.shape[1]
        mono = np.ones((q, self.powers.shape[0]))
        for v in range(nvar):
            mono *= etas[:, v][:, None] ** self.powers[:, v]
        values = mono @ self.coeffs
        grads = np.empty((q, nvar, self.cardinality))
        for v in range(nvar):
            p = self.powers[:, v]
            dm = np.ones((q, self.powers.shape[0]))
            for w in range(nvar):
                pw = self.powers[:, w] - (1 if w == v else 0)
                active = pw >= 0
                col = np.zeros((q, self.powers.shape[0]))
                col[:, active] = etas[:, w][:, None] ** pw[active]
                dm *= col
            grads[:, v, :] = (dm * p[None, :]) @ self.coeffs
        return values, grads


@lru_cache(maxsize=None)
def trace_basis(kind: FacetKind, k: int) -> TraceBasis:
    """Equispaced nodal basis of degree k on the given reference facet."""
    if k < 1:
        raise QuadratureError(f"trace degree must be >= 1, got {k}")
    if k > MAX_DEGREE:
        raise QuadratureError(
            f"trace degree {k} exceeds the supported maximum {MAX_DEGREE} "
            "(equispaced nodes become too ill-conditioned)")
    nodes = _lattice_nodes(kind, k)
    powers = _monomial_powers(kind, k)
    vmat = np.ones((nodes.shape[0], powers.shape[0]))
    for v in range(powers.shape[1]):
        vmat *= nodes[:, v][:, None] ** powers[:, v]
    coeffs = np.linalg.inv(vmat)
    return TraceBasis(facet_kind=kind, degree=k, nodes=nodes,
                      powers=powers, coeffs=coeffs)


def shape_values(basis: TraceBasis, eta) -> tuple[np.ndarray, np.ndarray]:
    """Lagrange values and derivatives at a single reference point.

    Returns (values, gradients) with gradients of shape (d-1, cardinality).
    """
    values, grads = basis.eval_many(np.atleast_1d(np.asarray(eta, float))[None, :])
    return values[0], grads[0]


@dataclass(frozen=True)
class QuadratureRule:
    """Points and positive weights on a reference domain."""

    points: np.ndarray      # (n, dim) -- dim 1 for segment/radial rules
    weights: np.ndarray
    exactness_degree: int

    def __len__(self) -> int:
        return self.points.shape[0]

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.points)))


def _gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def facet_quadrature(kind: FacetKind, order: int) -> QuadratureRule:
    """Rule on the reference facet exact for polynomials of total degree `order`."""
    if order < 1:
        raise QuadratureError(f"quadrature order must be >= 1, got {order}")
    n = (order + 2) // 2
    x, w = roots_legendre(n)
    if kind is FacetKind.SEGMENT:
        return QuadratureRule(points=x[:, None], weights=w, exactness_degree=2 * n - 1)
    if kind is FacetKind.QUADRILATERAL:
        u, v = np.meshgrid(x, x, indexing="ij")
        ww = np.outer(w, w)
        return QuadratureRule(points=np.column_stack([u.ravel(), v.ravel()]),
                              weights=ww.ravel(), exactness_degree=2 * n - 1)
    # Duffy tensorization: eta = (u(1-v), u v) with Jacobian u picks up one
    # extra power in the u direction.
    nu = (order + 3) // 2
    xu, wu = _gauss01(nu)
    xv, wv = _gauss01(n)
    u, v = np.meshgrid(xu, xv, indexing="ij")
    ww = np.outer(wu * xu, wv)
    pts = np.column_stack([(u * (1.0 - v)).ravel(), (u * v).ravel()])
    return QuadratureRule(points=pts, weights=ww.ravel(), exactness_degree=order)


def radial_quadrature(exponent_floor: float, order: int,
                      composite_levels: int = 0, ratio: float = 0.2) -> QuadratureRule:
    """Rule on [0,1] for integrands behaving like xi^exponent_floor near 0.

    `order` is the Gauss point count per subinterval.  With
    ``composite_levels == 0`` (or a benign exponent) this is a plain Gauss
    rule.  Otherwise the interval is subdivided geometrically toward 0 and
    the innermost cell uses a Gauss-Jacobi rule whose weights absorb the
    xi^exponent_floor factor.
    """
    if exponent_floor <= -1.0:
        raise QuadratureError(
            f"exponent floor {exponent_floor} <= -1: integrand is not integrable")
    if order < 1:
        raise QuadratureError(f"radial order must be >= 1, got {order}")
    if not (0.0 < ratio < 1.0):
        raise QuadratureError(f"geometric ratio must lie in (0,1), got {ratio}")
    if composite_levels < 0:
        raise QuadratureError("composite_levels must be non-negative")
    if composite_levels == 0 or exponent_floor >= 1.0:
        x, w = _gauss01(order)
        return QuadratureRule(points=x[:, None], weights=w,
                              exactness_degree=2 * order - 1)
    pts, wts = [], []
    hi = 1.0
    x01, w01 = _gauss01(order)
    for _ in range(composite_levels):
        lo = hi * ratio
        pts.append(lo + (hi - lo) * x01)
        wts.append((hi - lo) * w01)
        hi = lo
    alpha = min(exponent_floor, 0.0)
    if alpha > -1e-12:
        pts.append(hi * x01)
        wts.append(hi * w01)
    else:
        # roots_jacobi uses weight (1-x)^a (1+x)^b on [-1,1]; map to [0, hi]
        # so the rule carries weight x^alpha, then fold the weight into the
        # returned weights so callers integrate the raw integrand.
        xj, wj = roots_jacobi(order, 0.0, alpha)
        x = hi * 0.5 * (xj + 1.0)
        w = wj * (hi / 2.0) ** (alpha + 1.0)
        pts.append(x)
        wts.append(w / x ** alpha)
    points = np.concatenate(pts)[::-1]
    weights = np.concatenate(wts)[::-1]
    return QuadratureRule(points=points[:, None], weights=weights,
                          exactness_degree=2 * order - 1)
