"""Eigen-modes of the radial Euler system and semi-analytic shape functions.

Separable functions xi^lambda * alpha(eta) that are gradient-orthogonal to
all test functions vanishing on the scaled boundary solve a second-order
Euler ODE with coefficients E11, E12, E21, E22.  Introducing the flux
Q(xi) = xi^{d-1} E11 Phi' + xi^{d-2} E12 Phi and p = xi^{2-d} Q turns it
into the first-order system xi [Phi; p]' = M [Phi; p].  Admissible modes are
the eigenpairs with non-negative real exponent; their boundary fluxes
P_i = p_i(1) yield the element stiffness K = P A^{-1}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .ematrix import EMatrices, sector_B
from .errors import GeometryError, SpectrumError
from .polyspace import TraceBasis
from .refgeom import Sector

ZERO_CLUSTER_TOL = 1e-6    # |lambda| below this (x spectral radius) is "zero"
POSITIVE_CUT = 1e-8        # Re lambda cut for admissible modes
COND_CAP = 1e12


@dataclass(frozen=True)
class EulerSystem:
    """First-order form of the radial ODE in the variables (Phi, p)."""

    M: np.ndarray
    dim: int
    n: int
    E: EMatrices
    has_constant: bool


@dataclass
class SElementStiffness:
    K: np.ndarray
    asymmetry: float


@dataclass
class SbfemModes:
    """Selected eigen-modes of one S-element.

    ``A`` and ``P`` hold complex trace eigenvectors and boundary flux vectors
    column by column; ``A_re``/``P_re`` are the realified versions in which a
    conjugate pair is replaced by its real and imaginary parts (radial
    factors xi^a cos(b ln xi) and xi^a sin(b ln xi)).
    """

    lambdas: np.ndarray        # complex, selected, ascending real part
    A: np.ndarray              # complex trace eigenvectors (n x n)
    P: np.ndarray              # complex boundary flux vectors (n x n)
    A_re: np.ndarray
    P_re: np.ndarray
    kinds: tuple               # "real" | "cos" | "sin" per realified column
    constant_index: int | None
    dim: int
    dof_map: np.ndarray
    cond_A: float
    all_eigenvalues: np.ndarray
    selected_mask: np.ndarray
    pair_transform: np.ndarray = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def min_positive_exponent(self) -> float:
        re = self.lambdas.real
        pos = re[re > 0.5 * ZERO_CLUSTER_TOL]
        return float(pos.min()) if pos.size else np.inf

    def radial_complex(self, xis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(xi^lambda, xi^(lambda-1)) per mode; shapes (len(xis), n), complex.

        The second factor carries both gradient terms (times lambda for the
        radial part, times the surface-gradient coefficients for the rest);
        it is zeroed for the constant mode, whose gradient vanishes
        identically.
        """
        xis = np.asarray(xis, dtype=float)
        Z = np.empty((xis.size, self.n), dtype=complex)
        Z1 = np.empty((xis.size, self.n), dtype=complex)
        for i, lam in enumerate(self.lambdas):
            Z[:, i] = _power_or_limit(xis, lam)
            if abs(lam) < 1e-14:
                Z1[:, i] = 0.0
            else:
                Z1[:, i] = _power_or_limit(xis, lam - 1.0)
        return Z, Z1


def _power_or_limit(xis: np.ndarray, z: complex) -> np.ndarray:
    """xi^z with the xi -> 0 limit taken where it exists."""
    vals = np.zeros(xis.shape, dtype=complex)
    positive = xis > 0.0
    vals[positive] = np.power(xis[positive].astype(complex), z)
    if not positive.all():
        if abs(z) < 1e-14:
            vals[~positive] = 1.0
        elif z.real > 0.0:
            vals[~positive] = 0.0
        else:
            raise GeometryError(
                f"radial factor xi^({z:.3g}) has no limit at the scaling center")
    return vals


def build_system(E: EMatrices, d: int) -> EulerSystem:
    """Assemble the first-order Euler matrix from the coefficient matrices."""
    E11, E12, E21, E22 = E.blocks()
    n = E.n
    try:
        cho = scipy.linalg.cho_factor(E11)
    except scipy.linalg.LinAlgError as exc:
        raise SpectrumError(f"E11 is not positive definite: {exc}") from exc
    diag = np.diag(E11)
    if diag.min() <= 0 or np.linalg.cond(E11) > 1e14:
        raise SpectrumError("E11 is numerically singular")
    X = scipy.linalg.cho_solve(cho, E12)       # E11^{-1} E12
    Y = scipy.linalg.cho_solve(cho, np.eye(n))  # E11^{-1}
    M = np.block([[-X, Y],
                  [E22 - E21 @ X, (2 - d) * np.eye(n) + E21 @ Y]])
    return EulerSystem(M=M, dim=d, n=n, E=E,
                       has_constant=E.constant_trace_admissible())


def apply_sideface_bc(E: EMatrices, constrained_local: np.ndarray) -> EMatrices:
    """Delete Dirichlet-constrained side-face trace DOFs from the E-matrices."""
    constrained = np.unique(np.asarray(constrained_local, dtype=int))
    if constrained.size == 0:
        return E
    if constrained.min() < 0 or constrained.max() >= E.n:
        raise SpectrumError(
            f"side-face constraint index out of range 0..{E.n - 1}")
    keep = np.setdiff1d(np.arange(E.n), constrained)
    if keep.size == 0:
        raise SpectrumError("side-face constraints would remove every trace DOF")
    ix = np.ix_(keep, keep)
    return EMatrices(E11=E.E11[ix], E12=E.E12[ix], E21=E.E21[ix], E22=E.E22[ix],
                     dim=E.dim, dof_map=E.dof_map[keep])


def _sort_key(lams: np.ndarray) -> np.ndarray:
    return np.lexsort((np.sign(lams.imag), np.abs(lams.imag), lams.real))


def select_modes(system: EulerSystem, label: str = "S-element",
                 zero_tol: float = ZERO_CLUSTER_TOL,
                 cond_cap: float = COND_CAP) -> SbfemModes:
    """Eigen-solve the Euler system and keep the admissible modes.

    Keeps every eigenpair with positive real exponent plus, when the element
    admits a constant trace (closed boundary or unconstrained open one),
    exactly one exact constant mode in place of the numerically polluted
    zero cluster (the logarithmic Jordan partner is discarded).
    """
    M = system.M
    n = system.n
    lam_all, V = np.linalg.eig(M)
    scale = max(float(np.abs(lam_all).max()), 1.0)
    cluster = np.abs(lam_all) <= zero_tol * scale
    positive = (~cluster) & (lam_all.real > POSITIVE_CUT * scale)
    expected_zero = (2 if system.dim == 2 else 1) if system.has_constant else 0
    n_positive_expected = n - (1 if system.has_constant else 0)
    if int(cluster.sum()) != expected_zero or int(positive.sum()) != n_positive_expected:
        raise SpectrumError(
            f"{label}: unexpected spectrum split (zero cluster "
            f"{int(cluster.sum())}/{expected_zero}, positive "
            f"{int(positive.sum())}/{n_positive_expected})")
    idx = np.flatnonzero(positive)
    idx = idx[_sort_key(lam_all[idx])]
    lams = lam_all[idx]
    vecs = V[:, idx]

    resid = M @ vecs - vecs * lams[None, :]
    if resid.size and np.linalg.norm(resid, axis=0).max() > 1e-7 * scale:
        raise SpectrumError(f"{label}: defective spectrum (eigenvector residual)")

    lams, vecs, kinds = _canonicalize(lams, vecs, scale, label)
    A = vecs[:n, :]
    P = vecs[n:, :]
    constant_index = None
    if system.has_constant:
        c = np.zeros((2 * n, 1), dtype=complex)
        c[:n, 0] = 1.0 / np.sqrt(n)
        lams = np.concatenate([[0.0 + 0.0j], lams])
        A = np.hstack([c[:n], A])
        P = np.hstack([c[n:], P])
        kinds = ("real",) + kinds
        constant_index = 0

    A_re, P_re, R = _realify(lams, A, P, kinds)
    cond_A = float(np.linalg.cond(A_re))
    if cond_A > cond_cap:
        raise SpectrumError(
            f"{label}: defective spectrum (trace eigenvector condition "
            f"{cond_A:.2e} beyond cap {cond_cap:.1e})")
    selected_mask = np.zeros(2 * n, dtype=bool)
    selected_mask[idx] = True
    return SbfemModes(lambdas=lams, A=A, P=P, A_re=A_re, P_re=P_re,
                      kinds=kinds, constant_index=constant_index,
                      dim=system.dim, dof_map=system.E.dof_map,
                      cond_A=cond_A, all_eigenvalues=lam_all,
                      selected_mask=selected_mask, pair_transform=R)


def _canonicalize(lams, vecs, scale, label):
    """Force real modes real and conjugate pairs exactly conjugate.

    A mode is real only when its phase-aligned eigenvector is essentially
    real; a semisimple double real eigenvalue that LAPACK returns as a
    degenerate 2x2 block (complex vectors, negligible imaginary eigenvalue)
    stays on the pair branch, which realifies its invariant subspace.
    """
    n = len(lams)
    nhalf = vecs.shape[0] // 2
    kinds = []
    out_l = np.empty(n, dtype=complex)
    out_v = np.empty((vecs.shape[0], n), dtype=complex)
    i = 0
    while i < n:
        lam, v = lams[i], np.asarray(vecs[:, i], dtype=complex)
        ref = v[np.argmax(np.abs(v))]
        aligned = v * (np.conj(ref) / abs(ref))
        is_real = (abs(lam.imag) <= 1e-12 * scale
                   and np.abs(aligned.imag).max() <= 1e-8 * np.abs(aligned).max())
        if is_real:
            v = aligned.real.astype(complex)
            v /= np.linalg.norm(v[:nhalf])
            if v.real[np.argmax(np.abs(v.real))] < 0:
                v = -v
            out_l[i], out_v[:, i] = lam.real, v
            kinds.append("real")
            i += 1
            continue
        if i + 1 >= n or abs(lams[i + 1] - np.conj(lam)) > 1e-6 * scale:
            raise SpectrumError(f"{label}: unpaired complex exponent {lam:.6g}")
        if lam.imag < 0:
            lam, v = np.conj(lam), np.conj(v)
        ref = v[np.argmax(np.abs(v))]
        v = v * (np.conj(ref) / abs(ref))
        v /= np.linalg.norm(v[:nhalf])
        out_l[i], out_v[:, i] = lam, v
        out_l[i + 1], out_v[:, i + 1] = np.conj(lam), np.conj(v)
        kinds.extend(["cos", "sin"])
        i += 2
    return out_l, out_v, tuple(kinds)


def _realify(lams, A, P, kinds):
    """Columnwise transform R with [A R] real: pairs become (Re, Im) parts."""
    n = A.shape[1]
    R = np.zeros((n, n), dtype=complex)
    i = 0
    while i < n:
        if kinds[i] == "real":
            R[i, i] = 1.0
            i += 1
        else:
            R[i, i] = 0.5
            R[i + 1, i] = 0.5
            R[i, i + 1] = -0.5j
            R[i + 1, i + 1] = 0.5j
            i += 2
    A_re = A @ R
    P_re = P @ R
    imag = max(np.abs(A_re.imag).max(), np.abs(P_re.imag).max())
    if imag > 1e-8 * max(np.abs(A_re).max(), 1.0):
        raise SpectrumError(f"realified eigenvectors keep imaginary residue {imag:.2e}")
    return A_re.real, P_re.real, R


def element_stiffness(modes: SbfemModes) -> SElementStiffness:
    """Boundary-flux stiffness K = P A^{-1}, symmetrized, in the nodal basis."""
    K = np.linalg.solve(modes.A_re.T, modes.P_re.T).T
    norm = max(np.linalg.norm(K), 1e-300)
    asym = float(np.linalg.norm(K - K.T) / norm)
    if asym > 1e-6:
        raise SpectrumError(f"stiffness asymmetry {asym:.2e} beyond tolerance")
    return SElementStiffness(K=0.5 * (K + K.T), asymmetry=asym)


def shape_eval(modes: SbfemModes, local_rows: np.ndarray, sector: Sector,
               basis: TraceBasis, xi: float, eta) -> tuple[np.ndarray, np.ndarray]:
    """Values and Cartesian gradients of all realified modes at (xi, eta).

    `local_rows[l]` gives the trace index of sector shape function l in the
    (side-face-reduced) mode space; -1 marks a Dirichlet-constrained node
    whose trace vanishes.  Conjugate pairs appear as their real and
    imaginary parts.
    """
    if xi < 0.0 or xi > 1.0 + 1e-12:
        raise GeometryError(f"radial coordinate {xi} outside [0,1]")
    if xi == 0.0 and any(1e-14 < abs(lam) and lam.real < 1.0
                         for lam in modes.lambdas):
        raise GeometryError(
            "gradient at the scaling center only exists for exponents >= 1")
    rows = np.asarray(local_rows, dtype=int)
    alpha = np.zeros((len(rows), modes.n), dtype=complex)
    valid = rows >= 0
    alpha[valid] = modes.A[rows[valid], :]
    nvals, _ = basis.eval_many(np.atleast_1d(np.asarray(eta, float))[None, :])
    traces = nvals[0] @ alpha                      # (n_modes,) complex
    Z, Z1 = modes.radial_complex(np.array([xi]))
    values = ((Z[0] * traces) @ modes.pair_transform).real
    B1, B2 = sector_B(sector, basis, eta)
    lam = modes.lambdas
    grads_c = (B1 @ (alpha * (lam * Z1[0])[None, :])
               + B2 @ (alpha * Z1[0][None, :]))
    grads = (grads_c @ modes.pair_transform).real
    return values, grads


def mode_gram(modes: SbfemModes, E: EMatrices) -> np.ndarray:
    """Closed-form energy Gram of the realified modes via the radial integral.

    Uses int_0^1 xi^{li+lj+d-3} dxi = 1/(li+lj+d-2) applied to the four-term
    radial quadratic form; the constant mode row and column are zero.
    """
    lam = modes.lambdas
    A = modes.A
    d = modes.dim
    S11 = A.T @ E.E11 @ A
    S12 = A.T @ E.E12 @ A
    S21 = A.T @ E.E21 @ A
    S22 = A.T @ E.E22 @ A
    L_i = lam[:, None]
    L_j = lam[None, :]
    denom = L_i + L_j + (d - 2)
    G = (L_i * L_j * S11 + L_i * S12 + L_j * S21 + S22)
    if modes.constant_index is not None:
        ci = modes.constant_index
        G[ci, :] = 0.0
        G[:, ci] = 0.0
        denom = denom.copy()
        denom[ci, :] = 1.0
        denom[:, ci] = 1.0
    G = G / denom
    R = modes.pair_transform
    G_re = R.T @ G @ R
    if np.abs(G_re.imag).max() > 1e-8 * max(np.abs(G_re.real).max(), 1.0):
        raise SpectrumError("realified Gram keeps an imaginary residue")
    return G_re.real


def stiffness_from_gram(modes: SbfemModes, E: EMatrices) -> np.ndarray:
    """Independent stiffness A^{-T} G A^{-1} from the closed-form radial Gram."""
    G = mode_gram(modes, E)
    Ainv = np.linalg.inv(modes.A_re)
    return Ainv.T @ G @ Ainv


def quadratic_residual(modes: SbfemModes, E: EMatrices) -> float:
    """Worst scaled residual of the second-order radial ODE over the modes."""
    E11, E12, E21, E22 = E.blocks()
    d = modes.dim
    scale = max(np.linalg.norm(b) for b in (E11, E12, E21, E22))
    worst = 0.0
    for i, lam in enumerate(modes.lambdas):
        if modes.constant_index is not None and i == modes.constant_index:
            continue
        a = modes.A[:, i]
        r = (lam * (lam - 1.0) * (E11 @ a)
             + lam * ((d - 1) * (E11 @ a) + E12 @ a - E21 @ a)
             + (d - 2) * (E12 @ a) - E22 @ a)
        denom = scale * (1.0 + abs(lam)) ** 2 * np.linalg.norm(a)
        worst = max(worst, np.linalg.norm(r) / denom)
    return worst


def ode_residual_at(modes: SbfemModes, E: EMatrices, xis: np.ndarray) -> float:
    """Residual of the radial ODE sampled at given xi values (scaled)."""
    E11, E12, E21, E22 = E.blocks()
    d = modes.dim
    scale = max(np.linalg.norm(b) for b in (E11, E12, E21, E22))
    worst = 0.0
    for i, lam in enumerate(modes.lambdas):
        if modes.constant_index is not None and i == modes.constant_index:
            continue
        a = modes.A[:, i]
        quad = (lam * (lam - 1.0) * (E11 @ a)
                + lam * ((d - 1) * (E11 @ a) + E12 @ a - E21 @ a)
                + (d - 2) * (E12 @ a) - E22 @ a)
        for xi in np.asarray(xis, dtype=float):
            w = xi ** complex(lam + d - 3)
            denom = abs(w) * scale * (1.0 + abs(lam)) ** 2 * np.linalg.norm(a)
            worst = max(worst, np.linalg.norm(w * quad) / denom)
    return worst


def orthogonality_residual(modes: SbfemModes, E: EMatrices,
                           sigma_coeffs: np.ndarray,
                           traces: np.ndarray | None = None,
                           rng: np.random.Generator | None = None,
                           n_trials: int = 5) -> float:
    """Max scaled gradient inner product of the modes against Duffy tests.

    The test functions have radial polynomial sigma (coefficients in
    ascending powers) and either the supplied trace vectors or random
    constant traces.  Radial integrals of xi^{lambda+m} are evaluated in
    closed form, so the residual isolates the eigen-solve accuracy.
    """
    sigma = np.asarray(sigma_coeffs, dtype=float)
    if traces is None:
        rng = rng or np.random.default_rng(0)
        traces = rng.standard_normal((n_trials, 1)) * np.ones((1, E.n))
    lam = modes.lambdas
    d = modes.dim
    A = modes.A
    G = mode_gram(modes, E)
    energies = np.sqrt(np.maximum(np.diag(G), 0.0))
    dsig = sigma[1:] * np.arange(1, sigma.size)
    worst = 0.0
    R = modes.pair_transform
    for mu in np.atleast_2d(traces):
        # |psi| from the dominant E11 part of its energy; enough for scaling.
        pow_int = np.array([[1.0 / (a + b + d - 1) for b in range(dsig.size)]
                            for a in range(dsig.size)])
        psi_en = np.sqrt(max(float(mu @ E.E11 @ mu)
                             * float(dsig @ pow_int @ dsig), 1e-300))
        vals = np.zeros(len(lam), dtype=complex)
        for i, li in enumerate(lam):
            if modes.constant_index is not None and i == modes.constant_index:
                continue
            a = A[:, i]
            t11 = a @ (E.E11 @ mu)
            t12 = a @ (E.E12 @ mu)
            t21 = a @ (E.E21 @ mu)
            t22 = a @ (E.E22 @ mu)
            for mm, c in enumerate(sigma):
                if c == 0.0:
                    continue
                vals[i] += c / (li + mm + d - 2) * (li * mm * t11 + li * t12
                                                    + mm * t21 + t22)
        vals_re = R.T @ vals
        for i in range(len(lam)):
            if modes.constant_index is not None and i == modes.constant_index:
                continue
            den = max(energies[i] * psi_en, 1e-300)
            worst = max(worst, abs(vals_re[i]) / den)
    return worst


def eigenvalue_rows(modes: SbfemModes) -> list[tuple[float, float, int]]:
    """(re, im, selected) rows for every eigenvalue of the full system."""
    rows = []
    for lam, sel in zip(modes.all_eigenvalues, modes.selected_mask):
        rows.append((float(lam.real), float(lam.imag), int(sel)))
    rows.sort()
    return rows
