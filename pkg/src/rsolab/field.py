"""The beta random field: exact density, Laplace transform, and samplers.

The field beta lives on a :class:`~rsolab.graphs.WeightedGraph` and its law is
determined by the edge weights and the boundary field eta.  Writing
M(beta) = 2*diag(beta) - W for the weighted operator, the law has density

    1_{M > 0} * exp(-(<1, M 1> + <eta, M^-1 eta> - 2<1, eta>)/2)
             * det(M)^{-1/2} * (2/pi)^{n/2}            (w.r.t. d beta)

and closed-form Laplace transform

    E[exp(-<lam, beta>)] = exp(-sum_edges w_ij (r_i r_j - t_i t_j)
                               - sum_i eta_i (r_i - t_i)) * prod_i t_i / r_i,

with r = sqrt(t^2 + lam) and reference point t > 0 (t = 1 throughout except
in :func:`laplace_exact`, which accepts general t).

Two samplers are provided:

* :func:`sample_beta_batch` — exact i.i.d. draws.  Integrating out a single
  vertex v yields the same family of laws on the remaining graph with
  boundary field eta_i + w_vi for the neighbors i of v, so eliminating
  vertices one at a time and sampling the reciprocal-inverse-Gaussian
  conditionals in reverse order is an exact one-pass scheme for any finite
  graph.  Paths get an O(n)-per-sample recursion; general graphs a
  Green-matrix bordering scheme, both vectorized across samples.
* :func:`sample_field` / :func:`gibbs_sweep` — Markov chain with exact
  single-site conditionals and a rank-one-maintained Green matrix, kept for
  cross-validation and conditional-law diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.linalg import eigh_tridiagonal  # noqa: F401  (re-exported convenience for tests)

from .graphs import DENSE_MAX, WeightedGraph
from .rig import sample_rig

__all__ = [
    "BetaField",
    "SamplerConfig",
    "GreenState",
    "PositivityLossError",
    "QuadratureBudgetError",
    "log_density",
    "laplace_exact",
    "initial_beta",
    "fresh_green",
    "gibbs_update_site",
    "gibbs_sweep",
    "sample_field",
    "gibbs_chain",
    "sample_beta_batch",
    "exact_field",
    "quadrature_oracle",
]

LOG_2_OVER_PI = math.log(2.0 / math.pi)

#: Batch sizing for the exact sampler: a fixed scalar budget so that chunk
#: boundaries (and hence the random stream layout) depend only on the graph
#: size, never on memory pressure or worker count.
BATCH_SCALARS = 1 << 24


class PositivityLossError(RuntimeError):
    """The maintained operator lost positive definiteness (round-off)."""


class QuadratureBudgetError(RuntimeError):
    """The small-graph quadrature oracle could not certify the tolerance."""


@dataclass(frozen=True)
class BetaField:
    """A beta configuration bound to the graph and boundary it was sampled under."""

    graph: WeightedGraph
    beta: np.ndarray
    w: float | None = None
    provenance: str = ""

    def __post_init__(self):
        beta = np.ascontiguousarray(np.asarray(self.beta, dtype=np.float64))
        if beta.shape != (self.graph.n_vertices,):
            raise ValueError("beta length does not match the graph")
        if not np.all(beta > 0):
            raise ValueError("beta must be strictly positive")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        if self.w is None:
            object.__setattr__(self, "w", self.graph.uniform_weight)


@dataclass(frozen=True)
class SamplerConfig:
    """Gibbs chain configuration.

    refresh_every = None means one full Green recomputation per sweep
    (i.e. every n site updates).
    """

    seed: int = 0
    burn_in: int = 500
    thinning: int = 10
    chains: int = 1
    refresh_every: int | None = None

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if self.refresh_every is not None and self.refresh_every < 1:
            raise ValueError("refresh_every must be >= 1")


def _dense_operator(g: WeightedGraph, beta: np.ndarray) -> np.ndarray:
    m = -g.weight_matrix()
    idx = np.arange(g.n_vertices)
    m[idx, idx] = 2.0 * beta
    return m


def log_density(f: BetaField) -> float:
    """Log of the field density at f.beta; -inf outside the support.

    Evaluated through one symmetric factorization that supplies both the
    log-determinant and the boundary quadratic form.
    """
    g = f.graph
    n = g.n_vertices
    if n == 0:
        raise ValueError("empty graph")
    if n > DENSE_MAX:
        raise ValueError(f"density evaluation refused for n={n} > {DENSE_MAX}")
    m = _dense_operator(g, f.beta)
    try:
        c, lower = cho_factor(m, lower=True, check_finite=False)
    except LinAlgError:
        return -math.inf
    diag = np.diag(c)
    if not np.all(np.isfinite(diag)) or np.any(diag <= 0):
        return -math.inf
    logdet = 2.0 * float(np.sum(np.log(diag)))
    q_ones = 2.0 * float(np.sum(f.beta)) - 2.0 * float(np.sum(g.weights))
    if np.any(g.eta):
        x = cho_solve((c, lower), g.eta, check_finite=False)
        q_eta = float(g.eta @ x)
    else:
        q_eta = 0.0
    cross = 2.0 * float(np.sum(g.eta))
    return -0.5 * (q_ones + q_eta - cross) - 0.5 * logdet + 0.5 * n * LOG_2_OVER_PI


def laplace_exact(g: WeightedGraph, lam, theta=None) -> float:
    """Closed-form E[exp(-<lam, beta>)] for the field on g.

    ``theta`` is the reference point of the transform identity (componentwise
    positive, default all ones — the law the samplers target).
    """
    lam = np.asarray(lam, dtype=float).reshape(-1)
    n = g.n_vertices
    if lam.shape[0] != n:
        raise ValueError("lambda length does not match the graph")
    if np.any(lam < 0):
        raise ValueError("lambda must be nonnegative")
    if theta is None:
        theta = np.ones(n)
    else:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.shape[0] != n or np.any(theta <= 0):
            raise ValueError("theta must be positive of matching length")
    r = np.sqrt(theta * theta + lam)
    i, j = g.edges[:, 0], g.edges[:, 1]
    edge_term = float(np.sum(g.weights * (r[i] * r[j] - theta[i] * theta[j])))
    eta_term = float(np.sum(g.eta * (r - theta)))
    log_pref = float(np.sum(np.log(theta) - np.log(r)))
    return math.exp(-edge_term - eta_term + log_pref)


# ---------------------------------------------------------------------------
# Gibbs sampler with maintained Green matrix
# ---------------------------------------------------------------------------


@dataclass
class GreenState:
    """Mutable per-chain state: the maintained inverse of the operator.

    Confined to one chain; never shared.
    """

    green: np.ndarray
    refresh_every: int
    since_refresh: int = 0


def initial_beta(g: WeightedGraph) -> np.ndarray:
    """Diagonally dominant start: beta_i = (weighted degree + eta_i + 1)/2."""
    return 0.5 * (g.degree_w + g.eta + 1.0)


def fresh_green(g: WeightedGraph, beta: np.ndarray) -> np.ndarray:
    """Full inverse of the operator, symmetrized; raises on lost positivity."""
    m = _dense_operator(g, beta)
    try:
        c = cho_factor(m, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise PositivityLossError(
            "operator not positive definite at refresh; "
            "reduce refresh_every or inspect the field"
        ) from exc
    green = cho_solve(c, np.eye(g.n_vertices), check_finite=False)
    return 0.5 * (green + green.T)


def gibbs_update_site(
    beta: np.ndarray,
    green: np.ndarray,
    eta: np.ndarray,
    j: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """One exact conditional update at site j, in place.

    Returns (y, a): the drawn Schur variable and its conditional parameter.
    The Green matrix is updated by the rank-one identity for a diagonal
    perturbation; the multiplier 1 + delta*G_jj equals y*G_jj > 0, so the
    update never pivots through zero while y stays positive.
    """
    gjj = green[j, j]
    a = float(green[j] @ eta) / gjj
    s = 2.0 * beta[j] - 1.0 / gjj
    y = sample_rig(a, rng)
    beta[j] = 0.5 * (y + s)
    delta = y - 1.0 / gjj  # change in the diagonal entry 2*beta_j
    denom = 1.0 + delta * gjj
    col = green[:, j].copy()
    green -= np.outer(col, col) * (delta / denom)
    return y, a


def gibbs_sweep(f: BetaField, state: GreenState, rng: np.random.Generator) -> BetaField:
    """One raster-scan sweep of exact single-site updates.

    Scan order is the fixed vertex order (reproducibility); the Green matrix
    is refreshed from a fresh factorization every ``state.refresh_every``
    site updates, which also detects any accumulated loss of positivity.
    """
    g = f.graph
    beta = f.beta.copy()
    for j in range(g.n_vertices):
        gibbs_update_site(beta, state.green, g.eta, j, rng)
        state.since_refresh += 1
        if state.since_refresh >= state.refresh_every:
            state.green = fresh_green(g, beta)
            state.since_refresh = 0
    return BetaField(graph=g, beta=beta, w=f.w, provenance=f.provenance)


def sample_field(
    g: WeightedGraph,
    cfg: SamplerConfig,
    rng: np.random.Generator | None = None,
    chain: int = 0,
) -> Iterator[BetaField]:
    """Infinite stream of Gibbs samples: burn in, then every thinning-th sweep.

    Deterministic given (cfg.seed, chain).  The first yielded field (like all
    others) has a positive-definite operator by construction.
    """
    if g.n_vertices == 0:
        raise ValueError("empty graph")
    if rng is None:
        from .rng import philox_stream

        rng = philox_stream(cfg.seed, chain)
    refresh = cfg.refresh_every if cfg.refresh_every is not None else g.n_vertices
    beta = initial_beta(g)
    f = BetaField(graph=g, beta=beta, provenance=f"gibbs seed={cfg.seed} chain={chain}")
    state = GreenState(green=fresh_green(g, beta), refresh_every=refresh)
    for _ in range(cfg.burn_in):
        f = gibbs_sweep(f, state, rng)
    sweep = cfg.burn_in
    while True:
        for _ in range(cfg.thinning):
            f = gibbs_sweep(f, state, rng)
        sweep += cfg.thinning
        yield BetaField(
            graph=g,
            beta=f.beta,
            w=f.w,
            provenance=f"gibbs seed={cfg.seed} chain={chain} sweep={sweep}",
        )


def gibbs_chain(
    g: WeightedGraph, cfg: SamplerConfig, n_samples: int, chain: int = 0
) -> np.ndarray:
    """Collect n_samples thinned Gibbs configurations as an (n_samples, n) array."""
    stream = sample_field(g, cfg, chain=chain)
    out = np.empty((n_samples, g.n_vertices))
    for k in range(n_samples):
        out[k] = next(stream).beta
    return out


# ---------------------------------------------------------------------------
# Exact sequential sampler
# ---------------------------------------------------------------------------


def _sample_path_batch(g: WeightedGraph, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Exact draws on a path graph: O(n) recursion per sample, vectorized.

    Vertices are eliminated left to right, so sampling runs right to left.
    Maintains, for the already-sampled suffix, the corner Green entry
    g_run = G_suffix(k+1, k+1) and the boundary solve t_run =
    (G_suffix eta_suffix)(k+1); both update in O(1) per step because the
    suffix corner Schur complement equals the y just drawn.
    """
    n = g.n_vertices
    eta = g.eta
    w = g.weights  # edge k is (k, k+1)
    beta = np.empty((n_samples, n))
    g_run = np.zeros(n_samples)
    t_run = np.zeros(n_samples)
    for k in range(n - 1, -1, -1):
        eta_a = eta[k] + (w[k - 1] if k >= 1 else 0.0)
        if k == n - 1:
            s_term = 0.0
            a = np.full(n_samples, eta_a)
        else:
            s_term = (w[k] * w[k]) * g_run
            a = eta_a + w[k] * t_run
        y = sample_rig(a, rng)
        beta[:, k] = 0.5 * (y + s_term)
        if k > 0:
            t_run = (eta[k] + (w[k] * t_run if k < n - 1 else 0.0)) / y
            g_run = 1.0 / y
    return beta


def _sample_general_batch(
    g: WeightedGraph, n_samples: int, rng: np.random.Generator
) -> np.ndarray:
    """Exact draws on an arbitrary graph via Green-matrix bordering.

    Sampling vertex k (all higher-indexed vertices already drawn) needs the
    suffix Green block: the Schur term is w_k' G w_k and the conditional
    parameter adds w_k' G eta_eff, where eta_eff accumulates the weights of
    the already-eliminated (lower-indexed) vertices.  After drawing y, the
    block grows by the bordering identity with pivot 1/y.
    """
    n = g.n_vertices
    if n > DENSE_MAX:
        raise ValueError(f"general exact sampler refused for n={n} > {DENSE_MAX}")
    wmat = g.weight_matrix()
    # eta_eff[k] = eta + sum of weight rows of vertices < k
    eta_eff = np.empty((n, n))
    acc = g.eta.astype(float).copy()
    for k in range(n):
        eta_eff[k] = acc
        acc += wmat[k]
    beta = np.empty((n_samples, n))
    green = np.zeros((n_samples, n, n))
    for k in range(n - 1, -1, -1):
        if k == n - 1:
            a = np.full(n_samples, eta_eff[k, k])
            s_term = 0.0
            u = None
        else:
            wk = wmat[k, k + 1 :]
            u = green[:, k + 1 :, k + 1 :] @ wk
            s_term = u @ wk
            a = eta_eff[k, k] + u @ eta_eff[k, k + 1 :]
        y = sample_rig(a, rng)
        beta[:, k] = 0.5 * (y + s_term)
        piv = 1.0 / y
        green[:, k, k] = piv
        if u is not None:
            pu = piv[:, None] * u
            green[:, k, k + 1 :] = pu
            green[:, k + 1 :, k] = pu
            green[:, k + 1 :, k + 1 :] += pu[:, :, None] * u[:, None, :]
    return beta


def sample_beta_batch(g: WeightedGraph, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Exact i.i.d. field samples, shape (n_samples, n_vertices).

    Memory-chunked with a fixed scalar budget so the random stream layout
    depends only on the graph, keeping reruns byte-identical.
    """
    if g.n_vertices == 0:
        raise ValueError("empty graph")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    n = g.n_vertices
    if g.is_path:
        chunk = max(1, BATCH_SCALARS // max(n, 1))
        sampler = _sample_path_batch
    else:
        chunk = max(1, BATCH_SCALARS // max(n * n, 1))
        sampler = _sample_general_batch
    if n_samples <= chunk:
        return sampler(g, n_samples, rng)
    parts = []
    left = n_samples
    while left > 0:
        b = min(chunk, left)
        parts.append(sampler(g, b, rng))
        left -= b
    return np.concatenate(parts, axis=0)


def exact_field(g: WeightedGraph, rng: np.random.Generator, provenance: str = "exact") -> BetaField:
    """One exact sample wrapped as a BetaField."""
    beta = sample_beta_batch(g, 1, rng)[0]
    return BetaField(graph=g, beta=beta, provenance=provenance)


# ---------------------------------------------------------------------------
# Small-graph quadrature oracle
# ---------------------------------------------------------------------------

#: Gauss-Legendre panel edges in s = sqrt(y) coordinates, before scaling.
_PANEL_EDGES = np.array([0.0, 0.3, 0.6, 1.0, 1.4, 1.9, 2.5, 3.2, 4.0, 5.0, 6.5, 8.0, 10.0, 13.0, 16.0])
_QUAD_CHUNK = 200_000


def _pivots_to_field(
    y: np.ndarray, wmat: np.ndarray, eta: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Map pivot variables y (M, n) to (beta, <eta, inverse(M) eta>).

    The change of variables is triangular — beta_k = (y_k + S_k(beta_{>k}))/2
    with S_k the Schur coupling through the suffix block — so its Jacobian is
    2^{-n}, y > 0 exactly parametrizes the positive-definiteness region, and
    det = prod_k y_k.  The inverse is grown by bordering with pivots 1/y_k
    (unrolled for n <= 3), which stays finite even at grid corners where an
    LU factorization of the assembled matrix would be numerically singular
    (the huge quadratic form correctly drives the density weight to zero).
    """
    m_pts, n = y.shape
    has_eta = bool(np.any(eta))
    if n == 1:
        beta = 0.5 * y
        q_eta = (eta[0] * eta[0]) / y[:, 0] if has_eta else np.zeros(m_pts)
        return beta, q_eta
    if n == 2:
        w01 = wmat[0, 1]
        y0, y1 = y[:, 0], y[:, 1]
        u = w01 / y1
        beta = np.stack((0.5 * (y0 + w01 * u), 0.5 * y1), axis=1)
        if has_eta:
            g00 = 1.0 / y0
            g01 = u / y0
            g11 = 1.0 / y1 + u * u / y0
            q_eta = eta[0] * eta[0] * g00 + 2.0 * eta[0] * eta[1] * g01 + eta[1] * eta[1] * g11
        else:
            q_eta = np.zeros(m_pts)
        return beta, q_eta
    if n == 3:
        w01, w02, w12 = wmat[0, 1], wmat[0, 2], wmat[1, 2]
        y0, y1, y2 = y[:, 0], y[:, 1], y[:, 2]
        # suffix {2}: pivot 1/y2; border vertex 1 with coupling w12
        u1 = w12 / y2
        # suffix {1,2} inverse: entries after bordering with pivot 1/y1
        g11 = 1.0 / y1
        g12 = u1 / y1
        g22 = 1.0 / y2 + u1 * u1 / y1
        # border vertex 0 with coupling (w01, w02)
        u0a = g11 * w01 + g12 * w02
        u0b = g12 * w01 + g22 * w02
        s0 = u0a * w01 + u0b * w02
        beta = np.stack((0.5 * (y0 + s0), 0.5 * (y1 + w12 * u1), 0.5 * y2), axis=1)
        if has_eta:
            g00 = 1.0 / y0
            g01 = u0a / y0
            g02 = u0b / y0
            h11 = g11 + u0a * u0a / y0
            h12 = g12 + u0a * u0b / y0
            h22 = g22 + u0b * u0b / y0
            e0, e1, e2 = eta
            q_eta = (
                e0 * e0 * g00
                + e1 * e1 * h11
                + e2 * e2 * h22
                + 2.0 * (e0 * e1 * g01 + e0 * e2 * g02 + e1 * e2 * h12)
            )
        else:
            q_eta = np.zeros(m_pts)
        return beta, q_eta
    raise ValueError("pivot parametrization implemented for n <= 3")


def _log_density_batch(
    g: WeightedGraph, beta: np.ndarray, q_eta: np.ndarray, log_pivots: np.ndarray
) -> np.ndarray:
    """Vectorized log-density given the (always-valid) pivot parametrization."""
    q_ones = 2.0 * beta.sum(axis=1) - 2.0 * float(np.sum(g.weights))
    cross = 2.0 * float(np.sum(g.eta))
    n = beta.shape[1]
    return -0.5 * (q_ones + q_eta - cross) - 0.5 * log_pivots + 0.5 * n * LOG_2_OVER_PI


def _eval_grid(
    g: WeightedGraph,
    integrand: Callable,
    nodes_1d: np.ndarray,
    weights_1d: np.ndarray,
) -> float:
    """Tensor-product integral of integrand * density over the support."""
    n = g.n_vertices
    wmat = g.weight_matrix()
    grids = np.meshgrid(*([nodes_1d] * n), indexing="ij")
    s_pts = np.stack([a.ravel() for a in grids], axis=1)
    wgrids = np.meshgrid(*([weights_1d] * n), indexing="ij")
    w_pts = np.prod(np.stack([a.ravel() for a in wgrids], axis=1), axis=1)
    total = 0.0
    for start in range(0, s_pts.shape[0], _QUAD_CHUNK):
        s = s_pts[start : start + _QUAD_CHUNK]
        wq = w_pts[start : start + _QUAD_CHUNK]
        y = s * s
        beta, q_eta = _pivots_to_field(y, wmat, g.eta)
        log_piv = 2.0 * np.sum(np.log(s), axis=1)
        logrho = _log_density_batch(g, beta, q_eta, log_piv)
        vals = _call_integrand(integrand, beta)
        # d beta = 2^{-n} dy and dy = prod(2 s_i) ds  =>  d beta = prod(s_i) ds
        total += float(np.sum(vals * np.exp(logrho) * np.prod(s, axis=1) * wq))
    return total


def _call_integrand(integrand: Callable, beta: np.ndarray) -> np.ndarray:
    try:
        vals = np.asarray(integrand(beta), dtype=float)
        if vals.shape == (beta.shape[0],):
            return vals
    except Exception:
        pass
    return np.apply_along_axis(lambda row: float(integrand(row)), 1, beta)


def quadrature_oracle(
    g: WeightedGraph,
    integrand: Callable,
    tol: float = 1e-8,
) -> float:
    """Integrate integrand(beta) * density over the support, |V| <= 3.

    ``integrand`` is ideally vectorized over an (M, n) beta array returning
    (M,); plain scalar callables are accepted and looped.  Adaptive in the
    sense of panelized Gauss-Legendre at two orders: if the refinement
    changes the value by more than ``tol`` (absolute), the budget is deemed
    insufficient and :class:`QuadratureBudgetError` is raised.

    Independent of every sampler: only the density formula enters.
    """
    n = g.n_vertices
    if not 1 <= n <= 3:
        raise ValueError("quadrature oracle supports 1 to 3 vertices")
    scale = max(1.0, math.sqrt((2.0 + float(np.max(g.eta + g.degree_w))) / 3.0))
    edges = _PANEL_EDGES * scale
    results = []
    for order in (16, 24):
        x, w = np.polynomial.legendre.leggauss(order)
        nodes, wts = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = 0.5 * (hi - lo)
            nodes.append(lo + half * (x + 1.0))
            wts.append(half * w)
        results.append(_eval_grid(g, integrand, np.concatenate(nodes), np.concatenate(wts)))
    if not math.isfinite(results[1]) or abs(results[1] - results[0]) > tol:
        raise QuadratureBudgetError(
            f"quadrature did not certify tol={tol:g}: orders gave {results[0]!r}, {results[1]!r}"
        )
    return results[1]
