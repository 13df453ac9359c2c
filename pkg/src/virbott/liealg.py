"""Disc vector fields and the Lie-algebra side of the extension.

Fields live on the closed unit disc in polar components V3 d/dr + V4 d/dtheta
and carry exact boundary trig polynomials next to the 2-D callables, so the
boundary formula for G(beta) and the disc quadrature for beta share one
object.  The module computes the cocycle beta = -6 c0 int tr(dJ(V) ^ dJ(W)),
its boundary reduction G(beta), the finite-difference rederivation of beta
from the group cocycle gamma, the semidirect bracket on the circle with its
central term, and the exact Virasoro/Heisenberg structure constants.
"""

from __future__ import annotations

import csv

import numpy as np

from ._jets import fd4_jacobian
from .cocycle import CocycleConfig, gamma
from .diffeo import (AlexanderRadial, CircleIsotopy, CutoffFn, CutoffProfile,
                     DiscDiffeo, FlowMap, RadialTwist, Rotation, disc_compose,
                     disc_invert)
from .errors import DomainError, FlagError, StepError, UnsupportedError
from .forms import integrate_disc, mc_form
from .trigpoly import (CircleField, TrigPoly, circle_bracket, tp_derivative,
                       tp_integrate_period, tp_multiply)

__all__ = [
    "DiscVectorField",
    "GeneratorIndexPair",
    "SemidirectElement",
    "SeparableDiscField",
    "ar_split",
    "beta_from_gamma_fd",
    "beta_integral",
    "default_curve_builder",
    "disc_bracket",
    "gbeta_boundary",
    "gbeta_cyclic_residual",
    "generator_bracket",
    "generator_table_rows",
    "polar_components",
    "restrict_to_circle",
    "semidirect_bracket",
    "theta_variation_residual",
    "wf_field",
    "write_generator_table",
]

_N_BOUNDARY_ANGLES = 64
_BOUNDARY_MATCH_TOL = 1e-10
_COEF_PRUNE = 1e-13
_GENERATOR_PRUNE = 1e-12
_AR_DERIV_TOL = 1e-6
_AZ_VALUE_TOL = 1e-12
_DEFAULT_FD_STEP = 1e-3
_TINY_RADIUS = 1e-30

# FD4 stencil weights on offsets (-2h, -h, 0, +h, +2h).
_FD1_W = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_FD2_W = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_OFFSETS = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])


# ---------------------------------------------------------------------------
# boundary fit and flag sampling
# ---------------------------------------------------------------------------

def _fit_boundary_poly(fn) -> TrigPoly:
    """Fit the r = 1 trace of a polar callable as a TrigPoly (rfft at 64
    equispaced angles, coefficients below 1e-13 dropped)."""
    n = _N_BOUNDARY_ANGLES
    theta = np.arange(n) * (2.0 * np.pi / n)
    vals = np.broadcast_to(
        np.asarray(fn(np.ones(n), theta), dtype=np.float64), theta.shape)
    spec = np.fft.rfft(vals) / n
    constant = float(spec[0].real)
    cos_c = np.zeros(n // 2)
    sin_c = np.zeros(n // 2)
    cos_c[: n // 2 - 1] = 2.0 * spec[1: n // 2].real
    sin_c[: n // 2 - 1] = -2.0 * spec[1: n // 2].imag
    cos_c[n // 2 - 1] = spec[n // 2].real  # Nyquist term is not doubled
    if abs(constant) < _COEF_PRUNE:
        constant = 0.0
    cos_c[np.abs(cos_c) < _COEF_PRUNE] = 0.0
    sin_c[np.abs(sin_c) < _COEF_PRUNE] = 0.0
    return TrigPoly(constant, cos_c, sin_c)


def _poly_coef_norm(p: TrigPoly) -> float:
    return (abs(p.constant) + float(np.sum(np.abs(p.cos_coeffs)))
            + float(np.sum(np.abs(p.sin_coeffs))))


def _boundary_mismatch(fn, poly: TrigPoly) -> float:
    n = _N_BOUNDARY_ANGLES
    theta = np.arange(n) * (2.0 * np.pi / n)
    vals = np.broadcast_to(
        np.asarray(fn(np.ones(n), theta), dtype=np.float64), theta.shape)
    return float(np.max(np.abs(vals - poly(theta))))


def _sample_asymptotic_flags(v3, v4, ar_epsilon: float):
    """Measure (asymptotically_radial, asymptotically_zero) on the outer
    band r in (1 - ar_epsilon, 1) by values and FD4 radial derivatives."""
    radii = 1.0 - ar_epsilon * np.array([0.15, 0.35, 0.55, 0.75])
    theta = np.arange(24) * (2.0 * np.pi / 24.0)
    rr, tt = [a.ravel() for a in np.meshgrid(radii, theta, indexing="ij")]
    h = 0.05 * ar_epsilon

    def band_eval(fn):
        stack = np.stack([np.broadcast_to(
            np.asarray(fn(rr + off * h, tt), dtype=np.float64), rr.shape)
            for off in _OFFSETS])
        return stack

    s3, s4 = band_eval(v3), band_eval(v4)
    value_max = max(float(np.max(np.abs(s3[2]))), float(np.max(np.abs(s4[2]))))
    d3 = np.tensordot(_FD1_W, s3, axes=(0, 0)) / h
    d4 = np.tensordot(_FD1_W, s4, axes=(0, 0)) / h
    deriv_max = max(float(np.max(np.abs(d3))), float(np.max(np.abs(d4))))
    return deriv_max <= _AR_DERIV_TOL, value_max <= _AZ_VALUE_TOL


# ---------------------------------------------------------------------------
# polar 2-jets and the Cartesian conversion
# ---------------------------------------------------------------------------

class _PJet:
    """2-jet of a scalar in polar coordinates: (f, f_r, f_t, f_rr, f_rt,
    f_tt), vectorized over sample points."""

    __slots__ = ("f", "fr", "ft", "frr", "frt", "ftt")

    def __init__(self, f, fr, ft, frr, frt, ftt):
        self.f, self.fr, self.ft = f, fr, ft
        self.frr, self.frt, self.ftt = frr, frt, ftt

    def __add__(self, other):
        return _PJet(self.f + other.f, self.fr + other.fr,
                     self.ft + other.ft, self.frr + other.frr,
                     self.frt + other.frt, self.ftt + other.ftt)

    def __sub__(self, other):
        return _PJet(self.f - other.f, self.fr - other.fr,
                     self.ft - other.ft, self.frr - other.frr,
                     self.frt - other.frt, self.ftt - other.ftt)

    def scaled(self, c):
        return _PJet(c * self.f, c * self.fr, c * self.ft,
                     c * self.frr, c * self.frt, c * self.ftt)

    def __mul__(self, other):
        f, g = self, other
        return _PJet(
            f.f * g.f,
            f.fr * g.f + f.f * g.fr,
            f.ft * g.f + f.f * g.ft,
            f.frr * g.f + 2.0 * f.fr * g.fr + f.f * g.frr,
            f.frt * g.f + f.fr * g.ft + f.ft * g.fr + f.f * g.frt,
            f.ftt * g.f + 2.0 * f.ft * g.ft + f.f * g.ftt,
        )


def _pjet_zero(shape):
    z = np.zeros(shape)
    return _PJet(z, z, z, z, z, z)


def _pjet_radius(r):
    one, zero = np.ones_like(r), np.zeros_like(r)
    return _PJet(r, one, zero, zero, zero, zero)


def _pjet_cos(c, s):
    zero = np.zeros_like(c)
    return _PJet(c, zero, -s, zero, zero, -c)


def _pjet_sin(c, s):
    zero = np.zeros_like(s)
    return _PJet(s, zero, c, zero, zero, -s)


def _pjet_profile(profile, r):
    zero = np.zeros_like(r)
    v = np.broadcast_to(np.asarray(profile.value(r), dtype=np.float64), r.shape)
    d1 = np.broadcast_to(np.asarray(profile.d1(r), dtype=np.float64), r.shape)
    d2 = np.broadcast_to(np.asarray(profile.d2(r), dtype=np.float64), r.shape)
    return _PJet(v, d1, zero, d2, zero, zero)


def _pjet_poly(p: TrigPoly, dp: TrigPoly, ddp: TrigPoly, theta):
    zero = np.zeros_like(theta)
    return _PJet(p(theta), zero, dp(theta), zero, zero, ddp(theta))


def _cartesian_scalar(u: _PJet, rs, c, s):
    """Cartesian value/gradient/Hessian of a scalar from its polar 2-jet."""
    fx = c * u.fr - (s / rs) * u.ft
    fy = s * u.fr + (c / rs) * u.ft
    dfx_dr = c * u.frr - (s / rs) * u.frt + (s / rs ** 2) * u.ft
    dfx_dt = -s * u.fr + c * u.frt - (c / rs) * u.ft - (s / rs) * u.ftt
    dfy_dr = s * u.frr + (c / rs) * u.frt - (c / rs ** 2) * u.ft
    dfy_dt = c * u.fr + s * u.frt - (s / rs) * u.ft + (c / rs) * u.ftt
    fxx = c * dfx_dr - (s / rs) * dfx_dt
    fxy = s * dfx_dr + (c / rs) * dfx_dt
    fyx = c * dfy_dr - (s / rs) * dfy_dt
    fyy = s * dfy_dr + (c / rs) * dfy_dt
    cross = 0.5 * (fxy + fyx)  # symmetrize conversion roundoff
    return u.f, (fx, fy), (fxx, cross, fyy)


def _polar_jets_to_cartesian(j3: _PJet, j4: _PJet, r, c, s):
    rs = np.maximum(np.abs(r), _TINY_RADIUS) * np.where(r < 0, -1.0, 1.0)
    rj, cj, sj = _pjet_radius(r), _pjet_cos(c, s), _pjet_sin(c, s)
    u1 = j3 * cj - rj * j4 * sj
    u2 = j3 * sj + rj * j4 * cj
    n = r.shape[0]
    v = np.zeros((2, n))
    dv = np.zeros((2, 2, n))
    d2v = np.zeros((2, 2, 2, n))
    for i, u in enumerate((u1, u2)):
        val, grad, hess = _cartesian_scalar(u, rs, c, s)
        v[i] = val
        dv[i, 0], dv[i, 1] = grad
        d2v[i, 0, 0], d2v[i, 0, 1], d2v[i, 1, 1] = hess
        d2v[i, 1, 0] = d2v[i, 0, 1]
    return v, dv, d2v


# ---------------------------------------------------------------------------
# disc vector fields
# ---------------------------------------------------------------------------

class DiscVectorField:
    """A field V3 d/dr + V4 d/dtheta on the closed disc.

    ``v3``/``v4`` are vectorized callables of (r, theta); they must tolerate
    the width of an FD stencil beyond r = 1 (cutoff tails are flat there) and
    reflection through r = 0.  Boundary trig polynomials are fitted at r = 1
    over 64 angles unless supplied, and supplied ones are checked against the
    callables to 1e-10.  The flags (genuine, asymptotically_radial,
    asymptotically_zero) are measured by sampling the outer band of width
    ``ar_epsilon``.
    """

    def __init__(self, v3, v4, ar_epsilon: float = 0.05,
                 boundary_v3: TrigPoly | None = None,
                 boundary_v4: TrigPoly | None = None):
        if not (0.0 < ar_epsilon < 1.0):
            raise DomainError(f"ar_epsilon={ar_epsilon} outside (0, 1)")
        self.v3 = v3
        self.v4 = v4
        self.ar_epsilon = float(ar_epsilon)
        for name, fn, poly in (("v3", v3, boundary_v3), ("v4", v4, boundary_v4)):
            if poly is None:
                poly = _fit_boundary_poly(fn)
            elif _boundary_mismatch(fn, poly) > _BOUNDARY_MATCH_TOL:
                raise DomainError(
                    f"boundary poly for {name} disagrees with the callable "
                    f"at r = 1 beyond {_BOUNDARY_MATCH_TOL}")
            setattr(self, "boundary_" + name, poly)
        ar, az = _sample_asymptotic_flags(v3, v4, self.ar_epsilon)
        self.asymptotically_radial = bool(ar or az)
        self.asymptotically_zero = bool(az)
        self.genuine = _poly_coef_norm(self.boundary_v3) <= _AZ_VALUE_TOL

    @property
    def flags(self) -> dict:
        return {"genuine": self.genuine,
                "asymptotically_radial": self.asymptotically_radial,
                "asymptotically_zero": self.asymptotically_zero}

    # -- jets ---------------------------------------------------------------

    def polar_jet2(self, r, theta):
        """2-jets of (V3, V4) at polar sample arrays; FD4 on the callables
        (overridden analytically where the components are separable)."""
        h = _DEFAULT_FD_STEP
        jets = []
        for fn in (self.v3, self.v4):
            grid = np.stack([
                np.stack([np.broadcast_to(
                    np.asarray(fn(r + a * h, theta + b * h), dtype=np.float64),
                    r.shape) for b in _OFFSETS])
                for a in _OFFSETS])  # (5 radial, 5 angular, N)
            f = grid[2, 2]
            fr = np.tensordot(_FD1_W, grid[:, 2], axes=(0, 0)) / h
            ft = np.tensordot(_FD1_W, grid[2], axes=(0, 0)) / h
            frr = np.tensordot(_FD2_W, grid[:, 2], axes=(0, 0)) / h ** 2
            ftt = np.tensordot(_FD2_W, grid[2], axes=(0, 0)) / h ** 2
            frt = np.einsum("a,b,abn->n", _FD1_W, _FD1_W, grid) / h ** 2
            jets.append(_PJet(f, fr, ft, frr, frt, ftt))
        return jets[0], jets[1]

    def cartesian_value(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        r = np.hypot(pts[0], pts[1])
        theta = np.arctan2(pts[1], pts[0])
        c, s = np.cos(theta), np.sin(theta)
        v3 = np.broadcast_to(np.asarray(self.v3(r, theta), np.float64), r.shape)
        v4 = np.broadcast_to(np.asarray(self.v4(r, theta), np.float64), r.shape)
        return np.stack([v3 * c - r * v4 * s, v3 * s + r * v4 * c])

    def cartesian_jet2(self, pts):
        """(V, DV, D2V) with DV[i, a] = d_a V_i and D2V[i, a, b] = d_a d_b
        V_i, from the polar jets by the chain rule."""
        pts = np.asarray(pts, dtype=np.float64)
        r = np.hypot(pts[0], pts[1])
        theta = np.arctan2(pts[1], pts[0])
        c, s = np.cos(theta), np.sin(theta)
        j3, j4 = self.polar_jet2(r, theta)
        return _polar_jets_to_cartesian(j3, j4, r, c, s)

    def signature(self):
        return ("discfield", id(self))


class _UnitProfile:
    """Constant-1 radial profile (rotation-type angular terms)."""

    @property
    def support(self):
        return (0.0, np.inf)

    def value(self, r):
        return np.ones_like(np.asarray(r, dtype=np.float64))

    def d1(self, r):
        return np.zeros_like(np.asarray(r, dtype=np.float64))

    d2 = d1

    def signature(self):
        return ("unit",)


_UNIT_PROFILE = _UnitProfile()


class _ScaledProfile:
    """c * profile(r); twist curves scale one fixed profile by the time."""

    __slots__ = ("base", "scale")

    def __init__(self, base, scale: float):
        self.base = base
        self.scale = float(scale)

    @property
    def support(self):
        return self.base.support

    def value(self, r):
        return self.scale * self.base.value(r)

    def d1(self, r):
        return self.scale * self.base.d1(r)

    def d2(self, r):
        return self.scale * self.base.d2(r)

    def signature(self):
        return ("scaled", self.scale) + tuple(self.base.signature())


def _terms_callable(terms):
    def fn(r, theta):
        out = np.zeros(np.broadcast_shapes(np.shape(r), np.shape(theta)))
        for profile, poly in terms:
            out = out + profile.value(r) * poly(theta)
        return out
    return fn


class SeparableDiscField(DiscVectorField):
    """Field whose components are sums of profile(r) * poly(theta) terms;
    boundary polys and polar 2-jets are exact."""

    def __init__(self, v3_terms=(), v4_terms=(), ar_epsilon: float = 0.05):
        self.v3_terms = tuple((p, q) for p, q in v3_terms)
        self.v4_terms = tuple((p, q) for p, q in v4_terms)
        self._jet_terms = tuple(
            tuple((prof, poly, tp_derivative(poly),
                   tp_derivative(tp_derivative(poly))) for prof, poly in terms)
            for terms in (self.v3_terms, self.v4_terms))
        boundary = []
        for terms in (self.v3_terms, self.v4_terms):
            total = TrigPoly.zero()
            for prof, poly in terms:
                total = total + poly * float(prof.value(np.float64(1.0)))
            boundary.append(total)
        super().__init__(_terms_callable(self.v3_terms),
                         _terms_callable(self.v4_terms),
                         ar_epsilon=ar_epsilon,
                         boundary_v3=boundary[0], boundary_v4=boundary[1])

    def polar_jet2(self, r, theta):
        shape = np.broadcast_shapes(np.shape(r), np.shape(theta))
        r = np.broadcast_to(np.asarray(r, np.float64), shape)
        theta = np.broadcast_to(np.asarray(theta, np.float64), shape)
        out = []
        for terms in self._jet_terms:
            total = _pjet_zero(shape)
            for prof, poly, dpoly, ddpoly in terms:
                total = total + (_pjet_profile(prof, r)
                                 * _pjet_poly(poly, dpoly, ddpoly, theta))
            out.append(total)
        return out[0], out[1]

    def signature(self):
        return ("sepfield", self.ar_epsilon,
                tuple((p.signature(), q.signature())
                      for p, q in self.v3_terms),
                tuple((p.signature(), q.signature())
                      for p, q in self.v4_terms))


# ---------------------------------------------------------------------------
# constructions on fields
# ---------------------------------------------------------------------------

def polar_components(v1, v2, ar_epsilon: float = 0.05) -> DiscVectorField:
    """Convert Cartesian components (v1, v2)(x, y) to polar ones:
    V3 = v1 cos + v2 sin, V4 = r^{-1} (-v1 sin + v2 cos)."""

    def v3(r, theta):
        c, s = np.cos(theta), np.sin(theta)
        return v1(r * c, r * s) * c + v2(r * c, r * s) * s

    def v4(r, theta):
        c, s = np.cos(theta), np.sin(theta)
        rs = np.where(np.abs(r) < _TINY_RADIUS, _TINY_RADIUS, r)
        return (-v1(r * c, r * s) * s + v2(r * c, r * s) * c) / rs

    return DiscVectorField(v3, v4, ar_epsilon=ar_epsilon)


def disc_bracket(V: DiscVectorField, W: DiscVectorField) -> DiscVectorField:
    """Commutator field: [V, W]_j = V3 d_r W_j + V4 d_t W_j - (V <-> W)."""

    def component(idx):
        def comp(r, theta):
            r = np.asarray(r, dtype=np.float64)
            theta = np.asarray(theta, dtype=np.float64)
            a3, a4 = V.polar_jet2(r, theta)
            b3, b4 = W.polar_jet2(r, theta)
            tb = (b3, b4)[idx]
            ta = (a3, a4)[idx]
            # antisymmetrized pairwise so the diagonal cancels exactly
            return ((a3.f * tb.fr - b3.f * ta.fr)
                    + (a4.f * tb.ft - b4.f * ta.ft))
        return comp

    boundary = {}
    if V.asymptotically_radial and W.asymptotically_radial:
        # d_r terms vanish on the flat band, leaving exact boundary algebra.
        d = tp_derivative
        boundary["boundary_v3"] = (tp_multiply(V.boundary_v4, d(W.boundary_v3))
                                   - tp_multiply(W.boundary_v4, d(V.boundary_v3)))
        boundary["boundary_v4"] = (tp_multiply(V.boundary_v4, d(W.boundary_v4))
                                   - tp_multiply(W.boundary_v4, d(V.boundary_v4)))
    return DiscVectorField(component(0), component(1),
                           ar_epsilon=min(V.ar_epsilon, W.ar_epsilon),
                           **boundary)


def restrict_to_circle(V: DiscVectorField) -> CircleField:
    """Boundary restriction V4(1, theta) d/dtheta of an asymptotically
    radial field."""
    if not V.asymptotically_radial:
        raise FlagError("restriction needs an asymptotically radial field")
    return CircleField(V.boundary_v4)


def wf_field(f: TrigPoly, xi: CutoffFn) -> DiscVectorField:
    """The section W_f: (W_f)_3 = xi(r) f(theta), (W_f)_4 = 0."""
    terms = [] if _poly_coef_norm(f) == 0.0 else [(CutoffProfile(xi), f)]
    return SeparableDiscField(v3_terms=terms)


def ar_split(V: DiscVectorField, xi: CutoffFn):
    """Split a generalized asymptotically radial V as (V - W_{f_V}, f_V)
    with f_V the boundary trace of V3; the first part is genuine."""
    if not V.asymptotically_radial:
        raise FlagError("ar_split needs an asymptotically radial field")
    f = V.boundary_v3
    if _poly_coef_norm(f) <= _AZ_VALUE_TOL:
        return V, TrigPoly.zero()
    if isinstance(V, SeparableDiscField):
        correction = (CutoffProfile(xi), f * (-1.0))
        return (SeparableDiscField(V.v3_terms + (correction,), V.v4_terms,
                                   ar_epsilon=V.ar_epsilon), f)
    w = wf_field(f, xi)

    def v3(r, theta):
        return V.v3(r, theta) - w.v3(r, theta)

    return (DiscVectorField(v3, V.v4, ar_epsilon=V.ar_epsilon,
                            boundary_v3=TrigPoly.zero(),
                            boundary_v4=V.boundary_v4), f)


# ---------------------------------------------------------------------------
# the cocycle beta and its boundary computation
# ---------------------------------------------------------------------------

def beta_integral(V: DiscVectorField, W: DiscVectorField,
                  cfg: CocycleConfig | None = None) -> float:
    """beta(V, W) = -6 c0 int_{D^2} tr(dJ(V) ^ dJ(W)) on the config disc
    grid (the integrand is evaluated vectorized across the whole grid)."""
    cfg = cfg if cfg is not None else CocycleConfig()
    pts = cfg.disc_grid.xy
    _, _, d2v = V.cartesian_jet2(pts)
    _, _, d2w = W.cartesian_jet2(pts)
    vals = (np.einsum("ikn,kin->n", d2v[:, :, 0], d2w[:, :, 1])
            - np.einsum("ikn,kin->n", d2v[:, :, 1], d2w[:, :, 0]))
    return -6.0 * cfg.c0 * integrate_disc(vals, cfg.disc_grid)


def _is_zero_poly(p: TrigPoly) -> bool:
    return p.constant == 0 and not len(p.cos_coeffs) and not len(p.sin_coeffs)


def _gbeta_polys(v3: TrigPoly, v4: TrigPoly, w3: TrigPoly, w4: TrigPoly, c0):
    """-6 c0 int I with I = (v4' w4'' - 2 v4 w4') + (3 v3 w3' - v3' w4'
    + v4' w3'), exactly in trig-poly arithmetic.

    The period integral is linear, so each product is integrated on its
    own and products with an identically-zero factor are skipped.
    """
    d = tp_derivative
    total = 0.0
    if not (_is_zero_poly(v4) or _is_zero_poly(w4)):
        dw4 = d(w4)
        total += tp_integrate_period(tp_multiply(d(v4), d(dw4)))
        total += -2.0 * tp_integrate_period(tp_multiply(v4, dw4))
    if not (_is_zero_poly(v3) or _is_zero_poly(w3)):
        total += 3.0 * tp_integrate_period(tp_multiply(v3, d(w3)))
    if not (_is_zero_poly(v3) or _is_zero_poly(w4)):
        total += -tp_integrate_period(tp_multiply(d(v3), d(w4)))
    if not (_is_zero_poly(v4) or _is_zero_poly(w3)):
        total += tp_integrate_period(tp_multiply(d(v4), d(w3)))
    return -6.0 * c0 * total


def gbeta_boundary(V: DiscVectorField, W: DiscVectorField, c0=1.0):
    """G(beta)(V, W) from boundary data alone."""
    return _gbeta_polys(V.boundary_v3, V.boundary_v4,
                        W.boundary_v3, W.boundary_v4, c0)


# ---------------------------------------------------------------------------
# beta from gamma by differentiation
# ---------------------------------------------------------------------------

def default_curve_builder(field: DiscVectorField, flow_steps: int = 64):
    """Curve t -> disc diffeo tangent to ``field`` at t = 0.

    Closed-form families are used where the field shape allows them
    (rotations, radial twists, Alexander extensions of a circle isotopy);
    anything else falls back to the RK4 flow of the field.
    """
    if isinstance(field, SeparableDiscField) and not field.v3_terms:
        terms = field.v4_terms
        if not terms:
            return lambda t: DiscDiffeo.identity()
        if len(terms) == 1:
            profile, poly = terms[0]
            if poly.degree == 0 and not poly.is_complex:
                omega = float(poly.constant)
                if isinstance(profile, _UnitProfile):
                    return lambda t: DiscDiffeo.from_link(Rotation(omega * t))
                lo, hi = profile.support
                if 0.0 < lo and hi < 1.0:
                    return lambda t: DiscDiffeo.from_link(
                        RadialTwist(_ScaledProfile(profile, omega * t)))
            if isinstance(profile, CutoffProfile) and not poly.is_complex:
                isotopy = CircleIsotopy(0, poly)
                cutoff = profile.cutoff
                return lambda t: DiscDiffeo.from_link(
                    AlexanderRadial(isotopy, cutoff, t))

    def flow_curve(t):
        if t == 0.0:
            return DiscDiffeo.identity()
        return DiscDiffeo.from_link(FlowMap(field, t, flow_steps))

    return flow_curve


def _curve_inverse(curve, t: float) -> DiscDiffeo:
    g = curve(t)
    try:
        return disc_invert(g)
    except UnsupportedError:
        # flows of a fixed field form a one-parameter group
        return curve(-t)


def beta_from_gamma_fd(V: DiscVectorField, W: DiscVectorField,
                       curve_builder=None, cfg: CocycleConfig | None = None,
                       steps=(1e-2, 1e-2)) -> float:
    """beta(V, W) as the mixed derivative d^2/dt ds of
    gamma(h_t, k_s) - gamma(k_s, h_t) at (0, 0), by central differences
    with one Richardson halving."""
    cfg = cfg if cfg is not None else CocycleConfig()
    t_step, s_step = (float(steps[0]), float(steps[1]))
    if not (t_step > 0.0 and s_step > 0.0
            and np.isfinite(t_step) and np.isfinite(s_step)):
        raise StepError(f"FD steps must be positive and finite: {steps}")
    build = curve_builder if curve_builder is not None else default_curve_builder
    h_curve, k_curve = build(V), build(W)

    def bracket_diff(t, s):
        ht, ks = h_curve(t), k_curve(s)
        ht_inv = _curve_inverse(h_curve, t)
        ks_inv = _curve_inverse(k_curve, s)
        return (gamma(ht, ks, cfg, h_inv=ks_inv)
                - gamma(ks, ht, cfg, h_inv=ht_inv))

    def mixed(ts, ss):
        try:
            corners = (bracket_diff(ts, ss) - bracket_diff(ts, -ss)
                       - bracket_diff(-ts, ss) + bracket_diff(-ts, -ss))
        except DomainError as exc:
            raise StepError(
                f"curve step produced an invalid chain: {exc}") from exc
        return corners / (4.0 * ts * ss)

    d_full = mixed(t_step, s_step)
    d_half = mixed(0.5 * t_step, 0.5 * s_step)
    return (4.0 * d_half - d_full) / 3.0


# ---------------------------------------------------------------------------
# semidirect product on the boundary and generator brackets
# ---------------------------------------------------------------------------

class SemidirectElement:
    """(v, w, a): a Vect(S^1) part, an abelian copy, and an optional central
    coordinate."""

    __slots__ = ("v", "w", "a")

    def __init__(self, v, w, a=None):
        self.v = v if isinstance(v, CircleField) else CircleField(v)
        self.w = w if isinstance(w, CircleField) else CircleField(w)
        self.a = a


def semidirect_bracket(x: SemidirectElement, y: SemidirectElement,
                       c0=1.0) -> SemidirectElement:
    """[(v1, w1), (v2, w2)] = ([v1, v2], v1 w2' - v2 w1') with the central
    coordinate G(beta-bar) of the pair (computed on boundary data with
    (v3, v4) = (w, v))."""
    xv, xw = x.v.component, x.w.component
    yv, yw = y.v.component, y.w.component
    if _is_zero_poly(xv) or _is_zero_poly(yv):
        v_part = TrigPoly.zero()
    else:
        v_part = circle_bracket(x.v, y.v).component
    w_part = TrigPoly.zero()
    if not (_is_zero_poly(xv) or _is_zero_poly(yw)):
        w_part = w_part + tp_multiply(xv, tp_derivative(yw))
    if not (_is_zero_poly(yv) or _is_zero_poly(xw)):
        w_part = w_part - tp_multiply(yv, tp_derivative(xw))
    central = _gbeta_polys(xw, xv, yw, yv, c0)
    return SemidirectElement(CircleField(v_part), CircleField(w_part), central)


class GeneratorIndexPair:
    """Index data (n, m, kind) for a bracket of generators; kind is one of
    LL, LJ, JJ."""

    __slots__ = ("n", "m", "kind")
    _KINDS = ("LL", "LJ", "JJ")

    def __init__(self, n: int, m: int, kind: str):
        if kind not in self._KINDS:
            raise DomainError(f"kind must be one of {self._KINDS}: {kind!r}")
        self.n = int(n)
        self.m = int(m)
        self.kind = kind

    def __repr__(self):
        return f"GeneratorIndexPair({self.n}, {self.m}, {self.kind!r})"


def _i_exp_parts(n: int):
    """Real and imaginary TrigPoly parts of i e^{i n theta}."""
    if n == 0:
        return TrigPoly.zero(), TrigPoly.const(1.0)
    k = abs(n)
    real = TrigPoly.harmonic_sin(k, -1.0 if n > 0 else 1.0)
    return real, TrigPoly.harmonic_cos(k, 1.0)


def _letter_elements(letter: str, n: int):
    re_part, im_part = _i_exp_parts(n)
    zero = TrigPoly.zero()
    if letter == "L":
        return SemidirectElement(re_part, zero), SemidirectElement(im_part, zero)
    return SemidirectElement(zero, re_part), SemidirectElement(zero, im_part)


def generator_bracket(pair: GeneratorIndexPair, c0=1.0):
    """Exact structure constants of [X_n, Y_m] for X, Y in {L, J}.

    The complex generators i e^{i n theta} are split into real and
    imaginary parts, those run through four real semidirect brackets, and
    the results are recombined bilinearly.  Returns a coefficient map
    {(letter, k): complex} over the generators and the complex central term.
    """
    letters = {"LL": ("L", "L"), "LJ": ("L", "J"), "JJ": ("J", "J")}[pair.kind]
    x_re, x_im = _letter_elements(letters[0], pair.n)
    y_re, y_im = _letter_elements(letters[1], pair.m)
    b_rr = semidirect_bracket(x_re, y_re, c0)
    b_ri = semidirect_bracket(x_re, y_im, c0)
    b_ir = semidirect_bracket(x_im, y_re, c0)
    b_ii = semidirect_bracket(x_im, y_im, c0)

    def recombine(part):
        real = getattr(b_rr, part).component - getattr(b_ii, part).component
        imag = getattr(b_ri, part).component + getattr(b_ir, part).component
        return real + imag * 1j

    coeffs: dict = {}
    for letter, poly in (("L", recombine("v")), ("J", recombine("w"))):
        for k, ck in poly.exp_coeffs().items():
            value = -1j * ck  # the generator's own poly is i e^{i k theta}
            if abs(value) > _GENERATOR_PRUNE:
                coeffs[(letter, k)] = value
    central = complex(b_rr.a - b_ii.a, b_ri.a + b_ir.a)
    return coeffs, central


def generator_table_rows(pairs, c0=1.0):
    """Bracket table rows (n, m, kind, coefficient, central-real,
    central-imag); the coefficient is the structure constant in front of
    the single target generator of index n + m."""
    rows = []
    for pair in pairs:
        coeffs, central = generator_bracket(pair, c0)
        target = {"LL": "L", "LJ": "J", "JJ": None}[pair.kind]
        coefficient = 0.0
        if target is not None:
            coefficient = coeffs.get((target, pair.n + pair.m), 0.0)
            coefficient = float(np.real(coefficient))
        rows.append({"n": pair.n, "m": pair.m, "kind": pair.kind,
                     "coefficient": coefficient,
                     "central-real": central.real,
                     "central-imag": central.imag})
    return rows


def write_generator_table(path, pairs, c0=1.0) -> None:
    """Write the generator bracket table as CSV."""
    rows = generator_table_rows(pairs, c0)
    fields = ["n", "m", "kind", "coefficient", "central-real", "central-imag"]
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)


def gbeta_cyclic_residual(V0: DiscVectorField, V1: DiscVectorField,
                          V2: DiscVectorField, c0=1.0) -> float:
    """|sum_{cyclic} G(beta)([V_j, V_{j+1}], V_{j+2})| on boundary data,
    with the semidirect quotient bracket standing in for the commutator."""
    data = [(F.boundary_v3, F.boundary_v4) for F in (V0, V1, V2)]
    d = tp_derivative
    total = 0.0
    for j in range(3):
        a3, a4 = data[j]
        b3, b4 = data[(j + 1) % 3]
        c3, c4 = data[(j + 2) % 3]
        v_br = tp_multiply(a4, d(b4)) - tp_multiply(b4, d(a4))
        w_br = tp_multiply(a4, d(b3)) - tp_multiply(b4, d(a3))
        total += _gbeta_polys(w_br, v_br, c3, c4, c0)
    return abs(total)


# ---------------------------------------------------------------------------
# variation of the Maurer-Cartan form
# ---------------------------------------------------------------------------

def theta_variation_residual(g: DiscDiffeo, V: DiscVectorField, p,
                             cfg: CocycleConfig | None = None,
                             curve_builder=None, fd_step: float = 1e-4) -> float:
    """Residual of d/ds theta(g o h_s)|_0 = -J(g)^{-1} J(U) theta(g)
    + J(g)^{-1} dJ(U) with U = J(g) V, at a single point ``p``."""
    cfg = cfg if cfg is not None else CocycleConfig()
    plan = cfg.plan
    p = np.asarray(p, dtype=np.float64).reshape(2, 1)
    curve = (curve_builder if curve_builder is not None
             else default_curve_builder)(V)

    def theta_stack(s):
        sample = mc_form(disc_compose(g, curve(s)), p, plan)
        return np.stack(sample.components)

    lhs = (theta_stack(fd_step) - theta_stack(-fd_step)) / (2.0 * fd_step)

    def ju_flat(q):
        jet_q = g.jet(q, plan)
        vv, dvv, _ = V.cartesian_jet2(q)
        ju = (np.einsum("ijkn,jn->ikn", jet_q.h, vv)
              + np.einsum("ijn,jkn->ikn", jet_q.j, dvv))
        return ju.reshape(4, -1)

    jet_g = g.jet(p, plan)
    jg = jet_g.j[:, :, 0]
    jg_inv = np.linalg.inv(jg)
    ju_p = ju_flat(p).reshape(2, 2)
    dju = fd4_jacobian(ju_flat, p, fd_step).reshape(2, 2, 2)
    theta_g = theta_stack(0.0)
    residual = 0.0
    for b in range(2):
        rhs = -jg_inv @ (ju_p @ theta_g[b]) + jg_inv @ dju[:, :, b]
        residual = max(residual, float(np.max(np.abs(lhs[b] - rhs))))
    return residual
