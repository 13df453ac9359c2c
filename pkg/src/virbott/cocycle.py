"""Group 2-cocycle of the disc diffeomorphism group and its ball realization.

gamma(g, h) = 3 c0 * integral_{D^2} tr(theta(g) ^ theta(h^{-1})) is a real
group 2-cocycle on asymptotically radial disc diffeomorphisms, and the
Wess-Zumino 1-cochain omega0(h) = c0 * W(ball extension of h) trivializes
it on the boundary-trivial subgroup.  Each identity of that construction
is exposed here as a residual: the 2-cocycle property, normalization,
the coboundary of omega0, the conjugation (normality) defect Delta_g, the
coboundary of W with its boundary-sphere surface term, and the vanishing
correction integral of the boundary normal derivatives.
"""

from __future__ import annotations

import math
import threading

import numpy as np

from .diffeo import (
    ANALYTIC,
    BallDiffeo,
    CutoffFn,
    DiscDiffeo,
    ball_compose,
    ball_extend,
    conjugated_extension,
    cutoff_make,
    disc_compose,
    disc_invert,
    is_boundary_trivial,
)
from .errors import DomainError, NotBoundaryTrivialError, SupportError
from .forms import (
    BallGrid,
    DiscGrid,
    _gl_nodes,
    integrate_ball,
    integrate_disc,
    mc_components,
    wedge_trace_2form,
    wedge_trace_cube,
)

__all__ = [
    "CheckResult",
    "CocycleConfig",
    "ExtElement",
    "delta_g_residual",
    "ext_mul",
    "gamma",
    "gamma_m",
    "iota",
    "omega0",
    "phi_correction_integral",
    "w_coboundary_residual",
    "wz_term",
]

# edge magnitude above which an integrand is considered to leak out of the
# quadrature box (matches the integrate_ball support check)
_EDGE_TOL = 1e-10

# sampling band width for boundary-triviality checks of candidate H-elements
_BT_EPS = 0.05

_DEFAULT_BALL_CUTOFF = cutoff_make(0.2, 0.2)


class CocycleConfig:
    """Coupling constant, quadrature grids, and derivative plan in one bag."""

    __slots__ = ("c0", "disc_grid", "ball_grid", "plan")

    def __init__(self, c0: float = 1.0, disc_grid: DiscGrid | None = None,
                 ball_grid: BallGrid | None = None, plan=ANALYTIC):
        self.c0 = float(c0)
        if not math.isfinite(self.c0):
            raise DomainError("coupling constant c0 must be finite")
        self.disc_grid = disc_grid if disc_grid is not None else DiscGrid()
        self.ball_grid = ball_grid if ball_grid is not None else BallGrid()
        self.plan = plan

    def refined(self, factor: int = 2) -> "CocycleConfig":
        """Same c0 and plan on factor-refined grids (decay checks)."""
        return CocycleConfig(self.c0, self.disc_grid.refined(factor),
                             self.ball_grid.refined(factor), self.plan)

    def signature(self):
        return ("cocycle-config", self.c0, self.disc_grid.signature(),
                self.ball_grid.signature(), self.plan.signature())


class ExtElement:
    """Element (g, a) of the central extension G^ = G x R."""

    __slots__ = ("g", "a")

    def __init__(self, g: DiscDiffeo, a: float):
        self.g = g
        self.a = float(a)

    def __repr__(self):
        return f"ExtElement(a={self.a!r}, links={len(self.g.links)})"


class CheckResult:
    """One verified identity: a residual measured against its tolerance.

    ``law`` states the identity in one line; ``params`` records whatever
    is needed to reproduce the check (seeds, grid sizes, indices).
    """

    __slots__ = ("name", "law", "residual", "tolerance", "params")

    def __init__(self, name: str, law: str, residual: float,
                 tolerance: float, params: dict | None = None):
        self.name = str(name)
        self.law = str(law)
        self.residual = float(residual)
        self.tolerance = float(tolerance)
        self.params = dict(params) if params else {}

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance

    def as_dict(self) -> dict:
        return {"name": self.name, "law": self.law,
                "residual": self.residual, "tolerance": self.tolerance,
                "pass": self.passed, "params": self.params}

    def __repr__(self):
        tag = "pass" if self.passed else "FAIL"
        return (f"CheckResult({self.name}: {self.residual:.3e} "
                f"<= {self.tolerance:.1e}? {tag})")


# ---------------------------------------------------------------------------
# the group 2-cocycle gamma
# ---------------------------------------------------------------------------

def _mc_stack(m, pts, plan) -> np.ndarray:
    """Batched Maurer-Cartan components (d, d, d, N) of a map on points."""
    return mc_components(m.jet(pts, plan))


_GAMMA_CACHE: dict = {}
_GAMMA_LOCK = threading.Lock()


def gamma_m(g: DiscDiffeo, h: DiscDiffeo, cfg: CocycleConfig,
            h_inv: DiscDiffeo | None = None) -> float:
    """integral_{D^2} tr(theta(g) ^ theta(h^{-1})) on the config disc grid.

    Values are cached by (g, h, grid, plan) signature; the cache is safe
    for concurrent readers and writers (recomputing a value is harmless,
    losing one is not).  A caller that already holds the inverse of ``h``
    (a time-reversed flow, say, whose link chain ``disc_invert`` refuses)
    may pass it as ``h_inv``; it must invert ``h``, and the cache key is
    unchanged because the value is.
    """
    key = (g.signature(), h.signature(),
           cfg.disc_grid.signature(), cfg.plan.signature())
    with _GAMMA_LOCK:
        if key in _GAMMA_CACHE:
            return _GAMMA_CACHE[key]
    grid = cfg.disc_grid
    hinv = disc_invert(h) if h_inv is None else h_inv
    vals = wedge_trace_2form(_mc_stack(g, grid.xy, cfg.plan),
                             _mc_stack(hinv, grid.xy, cfg.plan))
    out = integrate_disc(vals, grid)
    with _GAMMA_LOCK:
        _GAMMA_CACHE[key] = out
    return out


def gamma(g: DiscDiffeo, h: DiscDiffeo, cfg: CocycleConfig,
          h_inv: DiscDiffeo | None = None) -> float:
    """The scaled group 2-cocycle 3 c0 gamma_m(g, h)."""
    return 3.0 * cfg.c0 * gamma_m(g, h, cfg, h_inv=h_inv)


def ext_mul(e1: ExtElement, e2: ExtElement, cfg: CocycleConfig) -> ExtElement:
    """(g1, a1) (g2, a2) = (g1 g2, a1 + a2 + gamma(g1, g2))."""
    return ExtElement(disc_compose(e1.g, e2.g),
                      e1.a + e2.a + gamma(e1.g, e2.g, cfg))


# ---------------------------------------------------------------------------
# the Wess-Zumino term and the 1-cochain omega0
# ---------------------------------------------------------------------------

def wz_term(B: BallDiffeo, cfg: CocycleConfig) -> float:
    """W(B) = integral_{B^3} tr(theta(B)^{wedge 3}) over the layered chart.

    The integrand must vanish on the chart-box edge (layer supports stay
    inside the unit disc of the plane); a visible edge value raises
    SupportError before any integration happens.
    """
    if not isinstance(B, BallDiffeo):
        raise DomainError("wz_term expects a layered ball map")
    grid = cfg.ball_grid
    edge = wedge_trace_cube(_mc_stack(B, grid.edge_points, cfg.plan))
    worst = float(np.max(np.abs(edge))) if edge.size else 0.0
    if worst > _EDGE_TOL:
        raise SupportError(
            f"Wess-Zumino integrand reaches the box edge ({worst:.3e})")
    vals = wedge_trace_cube(_mc_stack(B, grid.nodes, cfg.plan))
    return integrate_ball(vals, grid)


def omega0(h: DiscDiffeo, cfg: CocycleConfig, xi: CutoffFn | None = None,
           profile=None, bt_eps: float = _BT_EPS) -> float:
    """c0 * W of the layered ball extension of a boundary-trivial element.

    The extension follows h's own canonical isotopy (every closed-form
    link carries a linear-in-u family), radially graded by ``profile``
    (default: the plain cutoff profile of ``xi``).
    """
    if not is_boundary_trivial(h, bt_eps):
        raise NotBoundaryTrivialError(
            "omega0 is defined on the boundary-trivial subgroup only")
    ball = ball_extend(h, xi if xi is not None else _DEFAULT_BALL_CUTOFF,
                       profile)
    return cfg.c0 * wz_term(ball, cfg)


def iota(h: DiscDiffeo, cfg: CocycleConfig, xi: CutoffFn | None = None,
         profile=None, bt_eps: float = _BT_EPS) -> ExtElement:
    """The section h -> (h, omega0(h)) over the boundary-trivial subgroup."""
    return ExtElement(h, omega0(h, cfg, xi, profile, bt_eps))


def delta_g_residual(g: DiscDiffeo, h: DiscDiffeo, cfg: CocycleConfig,
                     xi: CutoffFn | None = None, profile=None,
                     bt_eps: float = _BT_EPS) -> float:
    """|omega0(h) + gamma(g, h) + gamma(gh, g^{-1}) - omega0(g h g^{-1})|.

    The conjugate's omega0 runs along the conjugated isotopy
    u -> g h_u g^{-1}, with the conjugators entering as frozen layers;
    vanishing of this residual is what makes the extended subgroup normal.
    """
    if not is_boundary_trivial(h, bt_eps):
        raise NotBoundaryTrivialError(
            "Delta_g is defined for boundary-trivial h only")
    conj = disc_compose(disc_compose(g, h), disc_invert(g))
    if not is_boundary_trivial(conj, bt_eps):
        raise NotBoundaryTrivialError(
            "conjugate g h g^{-1} fails the boundary-triviality check")
    xi_ = xi if xi is not None else _DEFAULT_BALL_CUTOFF
    gh = disc_compose(g, h)
    total = (omega0(h, cfg, xi_, profile, bt_eps)
             + gamma(g, h, cfg) + gamma(gh, disc_invert(g), cfg))
    om_conj = cfg.c0 * wz_term(conjugated_extension(g, h, xi_, profile), cfg)
    return abs(total - om_conj)


# ---------------------------------------------------------------------------
# the coboundary of W and the boundary-sphere surface term
# ---------------------------------------------------------------------------

def _plane_quad(grid: BallGrid):
    """Plane quadrature matching the ball grid's cross-section:
    (points (2, M), weights (M,), edge samples (2, K))."""
    x, wx = _gl_nodes(grid.n_plane, -grid.L, grid.L)
    X, Y = np.meshgrid(x, x, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()])
    w = (wx[:, None] * wx[None, :]).ravel()
    line = np.linspace(-grid.L, grid.L, 65)
    edges = [np.stack([np.full_like(line, s), line]) for s in (grid.L, -grid.L)]
    edges += [np.stack([line, np.full_like(line, s)]) for s in (grid.L, -grid.L)]
    return pts, w, np.concatenate(edges, axis=1)


def _plane_integral(vals: np.ndarray, w: np.ndarray,
                    edge_vals: np.ndarray, what: str) -> float:
    worst = float(np.max(np.abs(edge_vals))) if edge_vals.size else 0.0
    if worst > _EDGE_TOL:
        raise SupportError(f"{what} reaches the plane-box edge ({worst:.3e})")
    return math.fsum((np.asarray(vals, dtype=np.float64) * w).tolist())


def w_coboundary_residual(g: BallDiffeo, h: BallDiffeo,
                          cfg: CocycleConfig) -> float:
    """|W(gh) - W(g) - W(h) - 3 S| with the surface term S equal to
    integral_plane tr(theta(g|_bnd) ^ theta((h|_bnd)^{-1})) over the
    boundary-sphere chart."""
    Wgh = wz_term(ball_compose(g, h), cfg)
    Wg = wz_term(g, cfg)
    Wh = wz_term(h, cfg)
    gb = g.boundary_map()
    hb_inv = disc_invert(h.boundary_map())
    pts, w, edge = _plane_quad(cfg.ball_grid)
    vals = wedge_trace_2form(_mc_stack(gb, pts, cfg.plan),
                             _mc_stack(hb_inv, pts, cfg.plan))
    ev = wedge_trace_2form(_mc_stack(gb, edge, cfg.plan),
                           _mc_stack(hb_inv, edge, cfg.plan))
    surface = _plane_integral(vals, w, ev, "boundary surface term")
    return abs(Wgh - Wg - Wh - 3.0 * surface)


def _phi_gradient(m, pts):
    """Plane gradient of phi = log of the boundary normal derivative."""
    d, dx, dy = (np.asarray(a, dtype=np.float64)
                 for a in m.normal_derivative_jet(pts))
    low = float(np.min(d))
    if low <= 0.0:
        raise DomainError(
            f"boundary normal derivative must stay positive (min {low:.3e})")
    return dx / d, dy / d


def phi_correction_integral(g, h, cfg: CocycleConfig) -> float:
    """integral_plane (d_x phi^g d_y phi^h - d_x phi^h d_y phi^g) dx dy
    with phi = log of the outward normal derivative of the first output
    component on the boundary sphere.

    The integrand is an exact 2-form on the boundary sphere, so the value
    is a pure discretization residual (exactly zero for layered maps,
    whose normal derivative is identically one).
    """
    pts, w, edge = _plane_quad(cfg.ball_grid)
    gx, gy = _phi_gradient(g, pts)
    hx, hy = _phi_gradient(h, pts)
    egx, egy = _phi_gradient(g, edge)
    ehx, ehy = _phi_gradient(h, edge)
    vals = gx * hy - hx * gy
    ev = egx * ehy - ehx * egy
    return _plane_integral(vals, w, ev, "normal-derivative correction")
