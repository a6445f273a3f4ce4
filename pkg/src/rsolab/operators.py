"""Finite-volume operators: assembly, eigenvalue counting, Green functions.

The operator attached to a field beta on a graph with weights W is
M = 2*diag(beta) - W ("simple" boundary condition).  On a box in Z^d the
"dirichlet" variant adds w*(2d - n_i) to the diagonal, n_i the in-box degree,
which dominates the simple form as a quadratic form.  The "scaled" form
divides everything by the uniform coupling w.

Eigenvalue counting below a threshold is exact up to floating comparison:
Sturm pivot recursion on tridiagonal (path) operators, Householder
tridiagonalization plus Sturm for general dense ones, and an LDL'-inertia
fast path.  Ties at the threshold count as below (the spectra encountered
here are absolutely continuous, so ties occur only in hand-built examples).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import (
    LinAlgError,
    cho_factor,
    cho_solve,
    get_lapack_funcs,
    ldl,
    solveh_banded,
)

from .field import BetaField
from .graphs import DENSE_MAX, WeightedGraph

__all__ = [
    "OperatorMatrix",
    "SpectralCount",
    "FactorizationError",
    "ResidualError",
    "assemble",
    "operator_from_two_beta",
    "count_eigenvalues_leq",
    "count_eigenvalues_many",
    "sturm_counts_batch",
    "finite_volume_ids",
    "green_column",
    "green_matrix",
    "u_field",
    "beta_from_u",
    "schur_y_and_a",
    "path_sum_green",
    "resolvent_identity_residual",
    "dump_matrix",
]

#: Largest dense eigenproblem/solve accepted; path graphs are unbounded.
DENSE_CUTOFF = DENSE_MAX

#: Residual guarantee for Green solves (infinity norm, after one refinement).
GREEN_RESIDUAL_TOL = 1e-10

#: Sturm pivot floor: zero or denormal pivots are replaced by -PIVMIN so an
#: eigenvalue exactly at the threshold counts as "<=".
PIVMIN = 1e-280

MATRIX_DUMP_HEADER = "# rso-matrix v1"


class FactorizationError(RuntimeError):
    """A positive-definite factorization failed: the field/operator is invalid."""


class ResidualError(RuntimeError):
    """A linear solve could not meet the residual guarantee."""


@dataclass(frozen=True)
class OperatorMatrix:
    """Sparse symmetric operator: diagonal plus signed edge entries.

    ``offdiag[e]`` is the actual (negative) matrix entry at the e-th graph
    edge, i.e. -w_ij, already divided by w in the scaled form.
    """

    graph: WeightedGraph
    diag: np.ndarray
    offdiag: np.ndarray
    bc: str
    scaled: bool
    w: float | None

    def __post_init__(self):
        diag = np.ascontiguousarray(np.asarray(self.diag, dtype=np.float64))
        off = np.ascontiguousarray(np.asarray(self.offdiag, dtype=np.float64))
        if diag.shape != (self.graph.n_vertices,):
            raise ValueError("diag length mismatch")
        if off.shape != (self.graph.n_edges,):
            raise ValueError("offdiag length mismatch")
        diag.setflags(write=False)
        off.setflags(write=False)
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "offdiag", off)

    @property
    def n(self) -> int:
        return self.graph.n_vertices

    def to_dense(self) -> np.ndarray:
        if self.n > DENSE_CUTOFF:
            raise ValueError(f"dense form refused for n={self.n} > {DENSE_CUTOFF}")
        m = np.zeros((self.n, self.n))
        i, j = self.graph.edges[:, 0], self.graph.edges[:, 1]
        m[i, j] = self.offdiag
        m[j, i] = self.offdiag
        idx = np.arange(self.n)
        m[idx, idx] = self.diag
        return m

    @cached_property
    def tridiagonal(self) -> tuple[np.ndarray, np.ndarray]:
        """(diag, offdiag) arrays for path graphs (edge k is (k, k+1))."""
        if not self.graph.is_path:
            raise ValueError("tridiagonal form requires a path graph")
        return self.diag, self.offdiag

    def matvec(self, x: np.ndarray) -> np.ndarray:
        out = self.diag * x
        i, j = self.graph.edges[:, 0], self.graph.edges[:, 1]
        np.add.at(out, i, self.offdiag * x[j])
        np.add.at(out, j, self.offdiag * x[i])
        return out


@dataclass(frozen=True)
class SpectralCount:
    threshold: float
    count: int
    method: str


def operator_from_two_beta(
    graph: WeightedGraph,
    two_beta: np.ndarray,
    bc: str = "simple",
    scaled: bool = False,
    w: float | None = None,
) -> OperatorMatrix:
    """Assemble from the diagonal field 2*beta (may be non-positive: tilted fields)."""
    two_beta = np.asarray(two_beta, dtype=float)
    if two_beta.shape != (graph.n_vertices,):
        raise ValueError("two_beta length mismatch")
    bc = bc.lower()
    if bc not in ("simple", "dirichlet"):
        raise ValueError(f"unknown boundary condition {bc!r}")
    if w is None:
        w = graph.uniform_weight
    diag = two_beta.astype(float).copy()
    if bc == "dirichlet":
        if graph.d is None:
            raise ValueError("dirichlet correction needs lattice metadata (ambient d)")
        if w is None:
            raise ValueError("dirichlet correction needs a uniform edge weight")
        diag += w * (2 * graph.d - graph.degree)
    offdiag = -graph.weights
    if scaled:
        if w is None:
            raise ValueError("scaled form needs a uniform edge weight")
        diag /= w
        offdiag = offdiag / w
    return OperatorMatrix(graph=graph, diag=diag, offdiag=offdiag, bc=bc, scaled=scaled, w=w)


def assemble(f: BetaField, bc: str = "simple", scaled: bool = False) -> OperatorMatrix:
    """Operator of a sampled field under the requested boundary condition."""
    return operator_from_two_beta(f.graph, 2.0 * f.beta, bc=bc, scaled=scaled, w=f.w)


# ---------------------------------------------------------------------------
# Eigenvalue counting
# ---------------------------------------------------------------------------


def _sturm_count_scalar(diag: np.ndarray, off: np.ndarray, energy: float) -> int:
    """Number of eigenvalues <= energy of the tridiagonal (diag, off)."""
    count = 0
    q = diag[0] - energy
    if abs(q) < PIVMIN:
        q = -PIVMIN
    if q < 0:
        count += 1
    for k in range(1, diag.shape[0]):
        q = (diag[k] - energy) - (off[k - 1] * off[k - 1]) / q
        if abs(q) < PIVMIN:
            q = -PIVMIN
        if q < 0:
            count += 1
    return count


def sturm_counts_batch(diag: np.ndarray, off: np.ndarray, energies: np.ndarray) -> np.ndarray:
    """Vectorized Sturm counts: diag (B, n), off (n-1,) or (B, n-1), energies (k,).

    Returns an integer array (B, k).  This is the throughput engine behind
    the spectral estimators: one pass over sites with (B, k)-shaped pivots.
    """
    diag = np.asarray(diag, dtype=float)
    energies = np.asarray(energies, dtype=float).reshape(-1)
    off = np.asarray(off, dtype=float)
    b, n = diag.shape
    shared_off = off.ndim == 1
    q = diag[:, 0, None] - energies[None, :]
    q = np.where(np.abs(q) < PIVMIN, -PIVMIN, q)
    counts = (q < 0).astype(np.int64)
    for k in range(1, n):
        o2 = (off[k - 1] * off[k - 1]) if shared_off else (off[:, k - 1] * off[:, k - 1])[:, None]
        q = (diag[:, k, None] - energies[None, :]) - o2 / q
        q = np.where(np.abs(q) < PIVMIN, -PIVMIN, q)
        counts += q < 0
    return counts


def _tridiagonalize(dense: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Householder reduction to tridiagonal form via LAPACK."""
    sytrd = get_lapack_funcs(("sytrd",), (dense,))[0]
    _, d, e, _, info = sytrd(dense, lower=1)
    if info != 0:
        raise FactorizationError(f"tridiagonal reduction failed (info={info})")
    return d, e


def _inertia_count(dense: np.ndarray, energy: float) -> int:
    """#{eigenvalues <= energy} from the LDL' inertia of (M - energy*I).

    Zero 1x1 pivots and zero-determinant 2x2 blocks mean an eigenvalue sits
    exactly at the threshold; it is counted (<= semantics).
    """
    n = dense.shape[0]
    shifted = dense - energy * np.eye(n)
    _, d, _ = ldl(shifted, lower=True)
    count = 0
    k = 0
    while k < n:
        if k + 1 < n and d[k, k + 1] != 0.0:
            a, b, c = d[k, k], d[k, k + 1], d[k + 1, k + 1]
            det = a * c - b * b
            tr = a + c
            if det < 0:
                count += 1
            elif det > 0:
                count += 2 if tr < 0 else 0
            else:
                count += 1 + (1 if tr < 0 else 0)
            k += 2
        else:
            piv = d[k, k]
            if piv <= 0:
                count += 1
            k += 1
    return count


def count_eigenvalues_leq(m: OperatorMatrix, energy: float, method: str | None = None) -> SpectralCount:
    """Exact count of eigenvalues <= energy.

    method: None (auto: Sturm for paths, inertia otherwise, dense as the
    inertia fallback), or one of "sturm", "dense", "inertia".
    """
    energy = float(energy)
    if method is None:
        method = "sturm" if m.graph.is_path else "inertia"
    method = method.lower()
    if method == "sturm":
        d, e = m.tridiagonal
        return SpectralCount(energy, _sturm_count_scalar(d, e, energy), "sturm")
    if m.n > DENSE_CUTOFF:
        raise ValueError(
            f"eigenvalue counting on a non-path graph with n={m.n} exceeds the "
            f"dense cutoff {DENSE_CUTOFF}"
        )
    if method == "dense":
        d, e = _tridiagonalize(m.to_dense())
        return SpectralCount(energy, _sturm_count_scalar(d, e, energy), "dense")
    if method == "inertia":
        try:
            return SpectralCount(energy, _inertia_count(m.to_dense(), energy), "inertia")
        except LinAlgError:
            d, e = _tridiagonalize(m.to_dense())
            return SpectralCount(energy, _sturm_count_scalar(d, e, energy), "dense")
    raise ValueError(f"unknown counting method {method!r}")


def count_eigenvalues_many(m: OperatorMatrix, energies) -> np.ndarray:
    """Counts for a whole energy grid, reusing one tridiagonal reduction."""
    energies = np.asarray(energies, dtype=float).reshape(-1)
    if m.graph.is_path:
        d, e = m.tridiagonal
    else:
        if m.n > DENSE_CUTOFF:
            raise ValueError(
                f"eigenvalue counting on a non-path graph with n={m.n} exceeds the "
                f"dense cutoff {DENSE_CUTOFF}"
            )
        d, e = _tridiagonalize(m.to_dense())
    return sturm_counts_batch(d[None, :], e, energies)[0]


def finite_volume_ids(m: OperatorMatrix, energy: float) -> float:
    """Eigenvalue counting measure per vertex: count(<= E) / n, in [0, 1]."""
    return count_eigenvalues_leq(m, energy).count / m.n


# ---------------------------------------------------------------------------
# Green solves
# ---------------------------------------------------------------------------


def _inf_norm(m: OperatorMatrix) -> float:
    """Matrix infinity norm (max absolute row sum) without densifying."""
    rowsum = np.abs(m.diag).copy()
    absw = np.abs(m.offdiag)
    np.add.at(rowsum, m.graph.edges[:, 0], absw)
    np.add.at(rowsum, m.graph.edges[:, 1], absw)
    return float(np.max(rowsum))


def _solve_refined(m: OperatorMatrix, rhs: np.ndarray) -> np.ndarray:
    """SPD solve with iterative refinement and a residual check.

    The residual must reach 1e-10, relaxed by the backward-stability floor
    (a small multiple of eps * |M|_inf * |x|_inf): below that floor the
    residual cannot even be evaluated reliably in double precision, which
    matters when the solution is legitimately huge (near-singular samples).
    """
    n = m.n
    if m.graph.is_path and n > DENSE_CUTOFF:
        ab = np.zeros((2, n))
        ab[0] = m.diag
        ab[1, : n - 1] = m.offdiag
        x = solveh_banded(ab, rhs, lower=True, check_finite=False)
        for _ in range(3):
            resid_vec = rhs - m.matvec(x)
            if np.max(np.abs(resid_vec)) <= GREEN_RESIDUAL_TOL:
                break
            x = x + solveh_banded(ab, resid_vec, lower=True, check_finite=False)
    else:
        if n > DENSE_CUTOFF:
            raise ValueError(f"dense Green solve refused for n={n} > {DENSE_CUTOFF}")
        dense = m.to_dense()
        try:
            c = cho_factor(dense, lower=True, check_finite=False)
        except LinAlgError as exc:
            raise FactorizationError("operator is not positive definite") from exc
        x = cho_solve(c, rhs, check_finite=False)
        for _ in range(3):
            resid_vec = rhs - dense @ x
            if np.max(np.abs(resid_vec)) <= GREEN_RESIDUAL_TOL:
                break
            x = x + cho_solve(c, resid_vec, check_finite=False)
    resid = np.max(np.abs(rhs - m.matvec(x)))
    floor = 8.0 * np.finfo(float).eps * _inf_norm(m) * np.max(np.abs(x))
    if not resid <= max(GREEN_RESIDUAL_TOL, floor):
        raise ResidualError(f"Green solve residual {resid:.3e} exceeds {GREEN_RESIDUAL_TOL:g}")
    return x


def green_column(m: OperatorMatrix, j: int) -> np.ndarray:
    """Column j of the inverse: solve M x = e_j (residual <= 1e-10)."""
    if not 0 <= j < m.n:
        raise ValueError("column index out of range")
    rhs = np.zeros(m.n)
    rhs[j] = 1.0
    return _solve_refined(m, rhs)


def green_matrix(m: OperatorMatrix) -> np.ndarray:
    """Full inverse (dense), symmetrized."""
    if m.n > DENSE_CUTOFF:
        raise ValueError(f"full inverse refused for n={m.n} > {DENSE_CUTOFF}")
    dense = m.to_dense()
    try:
        c = cho_factor(dense, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise FactorizationError("operator is not positive definite") from exc
    g = cho_solve(c, np.eye(m.n), check_finite=False)
    return 0.5 * (g + g.T)


# ---------------------------------------------------------------------------
# Log-field and Schur variables
# ---------------------------------------------------------------------------


def u_field(f: BetaField) -> np.ndarray:
    """Logarithmic field u with e^{u_j} = (M^{-1} eta)(j); needs eta not all zero."""
    g = f.graph
    if not np.any(g.eta > 0):
        raise ValueError("u-field undefined for an all-zero boundary field")
    m = assemble(f, bc="simple", scaled=False)
    x = _solve_refined(m, g.eta.astype(float))
    if np.any(x <= 0):
        raise FactorizationError("nonpositive Green action on eta; invalid field")
    return np.log(x)


def beta_from_u(u: np.ndarray, g: WeightedGraph) -> np.ndarray:
    """Invert the log transform: 2 beta_i = sum_j w_ij e^{u_j - u_i} + eta_i e^{-u_i}."""
    u = np.asarray(u, dtype=float)
    if u.shape != (g.n_vertices,):
        raise ValueError("u length mismatch")
    eu = np.exp(u)
    two_beta = g.eta / eu
    i, j = g.edges[:, 0], g.edges[:, 1]
    np.add.at(two_beta, i, g.weights * eu[j] / eu[i])
    np.add.at(two_beta, j, g.weights * eu[i] / eu[j])
    return 0.5 * two_beta


SCHUR_AGREE_TOL = 1e-9


def schur_y_and_a(f: BetaField, j: int) -> tuple[float, float]:
    """Schur variable y = 1/G(j,j) and conditional parameter a at vertex j.

    Both quantities are evaluated by two independent routes — through the
    full-graph Green function and through the vertex-removed block — and the
    routes must agree to 1e-9, which exercises the block-inverse algebra the
    samplers rely on.
    """
    from .graphs import remove_vertex

    g = f.graph
    m = assemble(f, bc="simple", scaled=False)
    col = green_column(m, j)
    y_full = 1.0 / col[j]
    a_full = float(col @ g.eta) / col[j]

    # Route 2: Schur complement through the graph with j removed.
    nbr_mask = np.zeros(g.n_vertices, dtype=bool)
    i0, j0 = g.edges[:, 0], g.edges[:, 1]
    wrow = np.zeros(g.n_vertices)
    wrow[j0[i0 == j]] = g.weights[i0 == j]
    wrow[i0[j0 == j]] = g.weights[j0 == j]
    nbr_mask = wrow > 0
    sub = remove_vertex(g, j)
    keep = np.arange(g.n_vertices) != j
    if sub.n_vertices:
        m_sub = operator_from_two_beta(sub, 2.0 * f.beta[keep], bc="simple", w=f.w)
        x = _solve_refined(m_sub, wrow[keep])  # (M_sub)^{-1} W_{.,j}
        y_schur = 2.0 * f.beta[j] - float(wrow[keep] @ x)
        x_eta = _solve_refined(m_sub, sub.eta.astype(float)) if np.any(sub.eta) else np.zeros(sub.n_vertices)
        a_schur = float(g.eta[j]) + float(wrow[keep] @ x_eta)
    else:
        y_schur = 2.0 * f.beta[j]
        a_schur = float(g.eta[j])
    if abs(y_full - y_schur) > SCHUR_AGREE_TOL * max(1.0, abs(y_full)):
        raise ResidualError(f"Schur y routes disagree: {y_full!r} vs {y_schur!r}")
    if abs(a_full - a_schur) > SCHUR_AGREE_TOL * max(1.0, abs(a_full)):
        raise ResidualError(f"Schur a routes disagree: {a_full!r} vs {a_schur!r}")
    return y_full, a_full


def path_sum_green(
    g: WeightedGraph, beta: np.ndarray, i: int, j: int, max_len: int
) -> float:
    """Green entry via the walk expansion, truncated at max_len steps.

    Sums over nearest-neighbor walks from i to j the products of edge
    weights divided by 2*beta at every visited vertex, by dynamic
    programming over (vertex, length).  Converges geometrically to the
    solve-based Green entry when the operator is positive definite.
    """
    beta = np.asarray(beta, dtype=float)
    wmat = g.weight_matrix()
    two_beta = 2.0 * beta
    p = np.zeros(g.n_vertices)
    p[i] = 1.0 / two_beta[i]
    total = p[j]
    for _ in range(max_len):
        p = (wmat.T @ p) / two_beta
        total += p[j]
    return float(total)


def resolvent_identity_residual(f: BetaField) -> float:
    """Residual of the boundary expansion linking simple and Dirichlet inverses.

    With C the diagonal Dirichlet correction, the exact identity
    G^S(0,0) - G^D(0,0) = sum_i G^D(0,i) C_i G^S(i,0) must hold per sample;
    returns the absolute deviation (scaled operators).
    """
    ms = assemble(f, bc="simple", scaled=True)
    md = assemble(f, bc="dirichlet", scaled=True)
    center = f.graph.center_index if f.graph.shape is not None else 0
    gs = green_column(ms, center)
    gd = green_column(md, center)
    corr = md.diag - ms.diag
    lhs = gs[center] - gd[center]
    rhs = float(np.sum(gd * corr * gs))
    return abs(lhs - rhs)


def dump_matrix(m: OperatorMatrix) -> str:
    """Coordinate-format text dump (debug): header plus "i j value" lines."""
    lines = [MATRIX_DUMP_HEADER]
    for k in range(m.n):
        lines.append(f"{k} {k} {m.diag[k]:.17g}")
    for (i, j), v in zip(m.graph.edges, m.offdiag):
        lines.append(f"{i} {j} {v:.17g}")
    return "\n".join(lines) + "\n"
