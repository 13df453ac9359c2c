"""Matrix-valued one-forms, wedge traces and quadrature grids.

The Maurer-Cartan form of a diffeomorphism g (in a fixed chart) is the
matrix one-form

    theta_i(g) = J(g)^{-1} * d_i J(g),

one square matrix per chart direction.  This module samples it from the
2-jets produced by :mod:`virbott.diffeo`, forms the wedge+trace densities
that enter the cocycle integrals, and integrates them over tensor grids:
Gauss-Legendre in the radial/box directions crossed with a uniform
(trapezoidal, spectrally accurate) angular rule.

Final reductions go through ``math.fsum``, which rounds the sum of the
per-node products exactly — the result is bit-identical under any
reordering of the nodes.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.special import roots_legendre

from ._jets import inv_batched
from .errors import DimensionError, DomainError, NumericError, SupportError
from .diffeo import ANALYTIC, DerivativePlan

_TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

def _gl_nodes(n, lo, hi):
    """Gauss-Legendre nodes/weights mapped to (lo, hi)."""
    x, w = roots_legendre(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


class DiscGrid:
    """Tensor quadrature grid on the unit disc (polar chart).

    Gauss-Legendre with ``n_r`` nodes on (0, 1) crossed with ``n_theta``
    uniform angles; node weights include the polar area element r dr dtheta.
    """

    __slots__ = ("n_r", "n_theta", "r", "theta", "weights", "xy")

    def __init__(self, n_r: int = 96, n_theta: int = 256):
        if n_r < 4 or n_theta < 8:
            raise DomainError(f"disc grid too coarse: {n_r} x {n_theta}")
        self.n_r = int(n_r)
        self.n_theta = int(n_theta)
        r, wr = _gl_nodes(self.n_r, 0.0, 1.0)
        th = np.arange(self.n_theta) * (_TWO_PI / self.n_theta)
        R, T = np.meshgrid(r, th, indexing="ij")
        WR = np.repeat(wr, self.n_theta)
        self.r = R.ravel()
        self.theta = T.ravel()
        self.weights = WR * (_TWO_PI / self.n_theta) * self.r
        self.xy = np.stack([self.r * np.cos(self.theta),
                            self.r * np.sin(self.theta)])

    @property
    def npts(self):
        return self.r.size

    def refined(self, factor: int = 2) -> "DiscGrid":
        return DiscGrid(self.n_r * factor, self.n_theta * factor)

    def signature(self):
        return ("disc-grid", self.n_r, self.n_theta)


class BallGrid:
    """Tensor grid on the layered ball chart (rho, x, y).

    Gauss-Legendre in rho on (0, 1) and in each plane coordinate on
    [-L, L]; the measure is the flat d rho dx dy of the chart (any area
    factor of the layered parametrization belongs to the integrand, not the
    measure).  Integrands must be compactly supported inside the box; the
    integrator spot-checks the box edge.
    """

    __slots__ = ("n_rho", "n_plane", "L", "nodes", "weights", "edge_points")

    def __init__(self, n_rho: int = 24, n_plane: int = 64, L: float = 1.25):
        if n_rho < 4 or n_plane < 4:
            raise DomainError(f"ball grid too coarse: {n_rho} x {n_plane}^2")
        if L < 1.0:
            raise DomainError("plane box must contain the unit disc (L >= 1)")
        self.n_rho = int(n_rho)
        self.n_plane = int(n_plane)
        self.L = float(L)
        rho, wrho = _gl_nodes(self.n_rho, 0.0, 1.0)
        x, wx = _gl_nodes(self.n_plane, -self.L, self.L)
        RHO, X, Y = np.meshgrid(rho, x, x, indexing="ij")
        W = (wrho[:, None, None] * wx[None, :, None] * wx[None, None, :])
        self.nodes = np.stack([RHO.ravel(), X.ravel(), Y.ravel()])
        self.weights = W.ravel()
        # box-edge samples for the compact-support check
        line = np.linspace(-self.L, self.L, 33)
        rho_s = np.linspace(0.05, 0.95, 7)
        edges = []
        for rv in rho_s:
            for sx, sy in ((self.L, None), (-self.L, None),
                           (None, self.L), (None, -self.L)):
                ex = np.full_like(line, sx) if sx is not None else line
                ey = np.full_like(line, sy) if sy is not None else line
                edges.append(np.stack([np.full_like(line, rv), ex, ey]))
        self.edge_points = np.concatenate(edges, axis=1)

    @property
    def npts(self):
        return self.nodes.shape[1]

    def refined(self, factor: int = 2) -> "BallGrid":
        return BallGrid(self.n_rho * factor, self.n_plane * factor, self.L)

    def signature(self):
        return ("ball-grid", self.n_rho, self.n_plane, self.L)


# ---------------------------------------------------------------------------
# Maurer-Cartan samples
# ---------------------------------------------------------------------------

class MCFormSample:
    """theta(g) at one point: a tuple of d matrices, one per direction."""

    __slots__ = ("components",)

    def __init__(self, components):
        components = tuple(np.asarray(c, dtype=np.float64) for c in components)
        d = len(components)
        for c in components:
            if c.shape != (d, d):
                raise DimensionError(
                    f"need {d} square {d}x{d} components, got {c.shape}")
        self.components = components

    @property
    def dim(self):
        return len(self.components)


def mc_components(jet) -> np.ndarray:
    """Batched MC components from a 2-jet: out[b] = J^{-1} d_b J.

    Returns (d, d, d, N): first index is the chart direction b, the middle
    two are the matrix indices.
    """
    inv = inv_batched(jet.j)
    # dJ[l, k, b, n] = H[l, k, b, n];  (J^{-1} d_b J)[j,k] = inv[j,l] H[l,k,b]
    return np.einsum("jln,lkbn->bjkn", inv, jet.h)


def mc_form(g, p, plan: DerivativePlan = ANALYTIC) -> MCFormSample:
    """Maurer-Cartan sample of a disc/ball map at a single point ``p``."""
    p = np.asarray(p, dtype=np.float64).reshape(-1, 1)
    jet = g.jet(p, plan)
    comps = mc_components(jet)
    return MCFormSample(tuple(comps[b, :, :, 0] for b in range(comps.shape[0])))


def wedge_trace_2form(a, b):
    """tr(a_x b_y - a_y b_x) for two matrix one-forms on a plane chart.

    Accepts MCFormSample pairs or batched (2, d, d, N) stacks.
    """
    if isinstance(a, MCFormSample):
        if not isinstance(b, MCFormSample) or a.dim != b.dim:
            raise DimensionError("mismatched one-form samples")
        ax, ay = a.components
        bx, by = b.components
        return float(np.einsum("ij,ji->", ax, by) - np.einsum("ij,ji->", ay, bx))
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.shape[0] != 2:
        raise DimensionError(f"need matching (2,d,d,N) stacks, got {a.shape}")
    return (np.einsum("ijn,jin->n", a[0], b[1])
            - np.einsum("ijn,jin->n", a[1], b[0]))


def wedge_trace_cube(a):
    """tr(a ^ a ^ a) for a matrix one-form with components (rho, x, y):

        3 [ tr(a_rho a_x a_y) - tr(a_rho a_y a_x) ].

    This shortcut equals the full antisymmetrization over S3 because the
    trace is cyclic; the tests check that against the permutation sum.
    Accepts an MCFormSample or a (3, d, d, N) stack.
    """
    if isinstance(a, MCFormSample):
        if a.dim != 3:
            raise DimensionError("cube wedge needs 3 components (rho, x, y)")
        ar, ax, ay = a.components
        return 3.0 * float(np.einsum("ij,jk,ki->", ar, ax, ay)
                           - np.einsum("ij,jk,ki->", ar, ay, ax))
    a = np.asarray(a)
    if a.shape[0] != 3:
        raise DimensionError(f"need (3,d,d,N) stack, got {a.shape}")
    return 3.0 * (np.einsum("ijn,jkn,kin->n", a[0], a[1], a[2])
                  - np.einsum("ijn,jkn,kin->n", a[0], a[2], a[1]))


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

def _fsum_weighted(values, weights):
    prods = np.asarray(values, dtype=np.float64) * weights
    if np.any(~np.isfinite(prods)):
        raise NumericError("non-finite values in quadrature")
    return math.fsum(prods.tolist())


def integrate_disc(density, grid: DiscGrid) -> float:
    """Integrate density(r, theta) over the unit disc (area element
    included in the grid weights)."""
    values = density(grid.r, grid.theta) if callable(density) else density
    values = np.broadcast_to(np.asarray(values, dtype=np.float64),
                             grid.r.shape)
    return _fsum_weighted(values, grid.weights)


def integrate_ball(density, grid: BallGrid, check_support: bool = True) -> float:
    """Integrate density(rho, x, y) over the chart box with the flat
    measure d rho dx dy.

    Raises SupportError when the density is visibly nonzero on the box
    edge (the construction demands compact support inside the plane box).
    """
    if callable(density):
        if check_support:
            e = density(*grid.edge_points)
            if np.max(np.abs(e)) > 1e-10:
                raise SupportError(
                    f"integrand not supported inside the box "
                    f"(edge magnitude {np.max(np.abs(e)):.3e})")
        values = density(*grid.nodes)
    else:
        values = density
    values = np.broadcast_to(np.asarray(values, dtype=np.float64),
                             (grid.npts,))
    return _fsum_weighted(values, grid.weights)


# ---------------------------------------------------------------------------
# the closedness identity for tr((g^{-1} dg)^4)
# ---------------------------------------------------------------------------

def _perm_sign(perm):
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def eta_closedness_residual(n: int, samples: int = 100, seed: int = 0) -> float:
    """Max over random samples of | sum_{sigma in S4} sign(sigma)
    tr(M_{s1} M_{s2} M_{s3} M_{s4}) | with M_k = g^{-1} T_k.

    The alternating sum vanishes identically for matrices of any size
    (cyclicity pairs permutations with opposite signs), which is the
    pointwise reason tr((g^{-1} dg)^4) = 0; this measures the float residue
    on well-conditioned random data.
    """
    if n not in (2, 3):
        raise DimensionError("matrix dimension must be 2 or 3")
    rng = np.random.default_rng(seed)
    perms = [(p, _perm_sign(p)) for p in itertools.permutations(range(4))]
    worst = 0.0
    for _ in range(samples):
        A = rng.standard_normal((n, n))
        g = np.eye(n) + 0.4 * A / np.linalg.norm(A, 2)
        Ms = []
        for _k in range(4):
            T = rng.standard_normal((n, n))
            Ms.append(np.linalg.solve(g, T / np.linalg.norm(T, 2)))
        total = 0.0
        for p, s in perms:
            prod = Ms[p[0]] @ Ms[p[1]] @ Ms[p[2]] @ Ms[p[3]]
            total += s * np.trace(prod)
        worst = max(worst, abs(total))
    return worst
